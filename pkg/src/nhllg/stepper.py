"""Time loop of the tangent-plane theta-scheme and its online diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .fem import NormalizationError, Operators, exchange_energy, field_gradients, interpolate, normalize_nodal
from .mesh import Mesh
from .tangent import (
    SolverFailure,
    TangentFrame,
    TangentUpdate,
    assemble_step_system,
    build_frame,
    solve_step,
    torque_load,
)
from .torque import TorqueModel


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 0.75
    k: float = 0.005
    J: int = 1000
    tol: float = 1e-10
    max_iter: int | None = None
    snapshot_interval: int = 50
    theta_override: bool = False
    linear_solver: str = "gmres"
    frame_continuity: bool = True

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError("alpha and beta must be positive")
        if not self.k > 0:
            raise ConfigError("time step k must be positive")
        if self.J < 0:
            raise ConfigError("step count J must be non-negative")
        lo_open = 0.0 if self.theta_override else 0.5
        if not (lo_open < self.theta <= 1.0):
            raise ConfigError(
                f"theta = {self.theta} outside (1/2, 1], where the scheme is proven to converge; "
                "set theta_override to allow (0, 1]"
            )
        if not self.tol > 0:
            raise ConfigError("solver tolerance must be positive")
        if self.snapshot_interval < 1:
            raise ConfigError("snapshot_interval must be >= 1")

    @property
    def T(self) -> float:
        return self.J * self.k

    @classmethod
    def from_horizon(cls, T: float, J: int, **kw) -> "SolverConfig":
        if J < 1:
            raise ConfigError("J must be >= 1 to derive k from T")
        return cls(k=T / J, J=J, **kw)


TRACE_COLUMNS = (
    "step",
    "time",
    "exchange_energy",
    "v_l2_lumped",
    "v_h1",
    "max_norm_err",
    "max_tangency",
    "bound_Ej",
    "solver_iters",
)


@dataclass
class EnergyTrace:
    """One row per state m^j. Velocity columns hold the squared norms of v^(j-1), the
    update that produced m^j (zero on row 0)."""

    step: list = field(default_factory=list)
    time: list = field(default_factory=list)
    exchange_energy: list = field(default_factory=list)
    v_l2_lumped: list = field(default_factory=list)
    v_h1: list = field(default_factory=list)
    max_norm_err: list = field(default_factory=list)
    max_tangency: list = field(default_factory=list)
    bound_Ej: list = field(default_factory=list)
    solver_iters: list = field(default_factory=list)
    pythagoras_err: list = field(default_factory=list)

    def append(self, **row):
        for f in fields(self):
            getattr(self, f.name).append(row.get(f.name, 0.0))

    def __len__(self):
        return len(self.step)

    def array(self, name: str) -> np.ndarray:
        return np.asarray(getattr(self, name), dtype=float)

    def rows(self):
        for i in range(len(self)):
            yield tuple(getattr(self, c)[i] for c in TRACE_COLUMNS)


@dataclass(frozen=True)
class Snapshot:
    step: int
    time: float
    m: np.ndarray
    v: np.ndarray  # velocity computed from m (what the next step would use)


@dataclass
class SimulationState:
    m: np.ndarray
    j: int
    frame: TangentFrame
    trace: EnergyTrace
    v: TangentUpdate | None = None  # velocity at m, if already solved


@dataclass
class RunResult:
    state: SimulationState
    trace: EnergyTrace
    snapshots: list


class StepFailure(RuntimeError):
    """A step could not be completed; the partial run is attached."""

    def __init__(self, message: str, category: str, partial: RunResult | None = None):
        super().__init__(message)
        self.category = category
        self.partial = partial


def skyrmion_initial(x) -> np.ndarray:
    """Skyrmion-like unit field on (-1/2, 1/2)^2 with profile A = (1 - 4|x|)^4."""
    x = np.asarray(x, dtype=float)
    r = float(np.hypot(x[0], x[1]))
    if r >= 0.5:
        return np.array([-x[0] / r, -x[1] / r, 0.0])
    A = (1.0 - 4.0 * r) ** 4
    den = A * A + 4.0 * r * r
    sign = 1.0 if r < 0.25 else -1.0
    return np.array([sign * 4.0 * A * x[0], sign * 4.0 * A * x[1], A * A - 4.0 * r * r]) / den


def prepare_initial(initial, mesh: Mesh, tol: float = 1e-8) -> np.ndarray:
    """Interpolate ``initial`` (callable or (N, 3) array) and renormalise to exact unit length."""
    m0 = np.array(initial, dtype=float) if not callable(initial) else interpolate(initial, mesh)
    if m0.shape != (mesh.n_nodes, 3):
        raise ValueError(f"initial field must have shape ({mesh.n_nodes}, 3)")
    dev = np.max(np.abs(np.linalg.norm(m0, axis=1) - 1.0))
    if dev > tol:
        raise ValueError(f"initial data is not unit length at the nodes (max deviation {dev:.2e})")
    return m0 / np.linalg.norm(m0, axis=1, keepdims=True)


def velocity(m, frame, config: SolverConfig, ops: Operators, model: TorqueModel) -> TangentUpdate:
    system = assemble_step_system(m, frame, model, config, ops)
    return solve_step(system, config.tol, config.max_iter, config.linear_solver)


def _norms(v, ops):
    l2 = float(np.einsum("n,ni,ni->", ops.weights, v, v))
    h1 = float(np.einsum("ni,ni->", v, ops.stiffness @ v))
    return l2, h1


def step(state: SimulationState, config: SolverConfig, ops: Operators, model: TorqueModel) -> SimulationState:
    m = state.m
    upd = state.v if state.v is not None else velocity(m, state.frame, config, ops, model)
    v = upd.v
    k = config.k
    pre = m + k * v
    pre_sq = np.einsum("ni,ni->n", pre, pre)
    pyth = float(np.max(np.abs(pre_sq - (1.0 + k * k * np.einsum("ni,ni->n", v, v)))))
    try:
        m_new = normalize_nodal(pre)
    except NormalizationError as exc:
        raise StepFailure(f"step {state.j}: {exc} (tangency breach)", "invariant") from exc

    l2, h1 = _norms(v, ops)
    tr = state.trace
    energy = exchange_energy(m_new, ops.stiffness)
    prev_bound = tr.bound_Ej[-1] - tr.exchange_energy[-1]
    bound = energy + prev_bound + k * l2 + k * k * (2 * config.theta - 1) * h1
    tr.append(
        step=state.j + 1,
        time=(state.j + 1) * k,
        exchange_energy=energy,
        v_l2_lumped=l2,
        v_h1=h1,
        max_norm_err=float(np.max(np.abs(np.linalg.norm(m_new, axis=1) - 1.0))),
        max_tangency=float(np.max(np.abs(np.einsum("ni,ni->n", v, m)))),
        bound_Ej=bound,
        solver_iters=upd.iterations,
        pythagoras_err=pyth,
    )
    frame = build_frame(m_new, state.frame if config.frame_continuity else None)
    return SimulationState(m_new, state.j + 1, frame, tr, None)


def run(
    mesh: Mesh,
    config: SolverConfig,
    model: TorqueModel,
    initial,
    ops: Operators | None = None,
    on_snapshot: Callable[[Snapshot], None] | None = None,
    keep_snapshots: bool = True,
    extra_snapshots=(),
) -> RunResult:
    """Interpolate the initial data, then take ``config.J`` steps.

    Snapshots (with the velocity at that state) are taken every ``snapshot_interval``
    steps, at the final step and at any step index in ``extra_snapshots``.
    """
    extra = set(int(j) for j in extra_snapshots)
    ops = ops or Operators.build(mesh)
    m = prepare_initial(initial, mesh)
    trace = EnergyTrace()
    e0 = exchange_energy(m, ops.stiffness)
    trace.append(step=0, time=0.0, exchange_energy=e0, max_norm_err=float(np.max(np.abs(np.linalg.norm(m, axis=1) - 1.0))),
                 bound_Ej=e0)
    state = SimulationState(m, 0, build_frame(m), trace)
    snapshots: list = []

    def partial():
        return RunResult(state, trace, snapshots)

    for j in range(config.J + 1):
        want_snap = j % config.snapshot_interval == 0 or j == config.J or j in extra
        if j < config.J or want_snap:
            try:
                state.v = velocity(state.m, state.frame, config, ops, model)
            except SolverFailure as exc:
                raise StepFailure(f"step {j}: {exc}", "solver", partial()) from exc
        if want_snap:
            snap = Snapshot(j, j * config.k, state.m.copy(), state.v.v.copy())
            if keep_snapshots:
                snapshots.append(snap)
            if on_snapshot is not None:
                on_snapshot(snap)
        if j == config.J:
            break
        try:
            state = step(state, config, ops, model)
        except StepFailure as exc:
            exc.partial = partial()
            raise
    return RunResult(state, trace, snapshots)


def per_step_decay_margin(trace: EnergyTrace, config: SolverConfig) -> np.ndarray:
    """|grad m^j|^2 - (|grad m^(j+1)|^2 + (2 theta - 1) k^2 |grad v^j|^2 + (2 beta/alpha) k |v^j|^2).

    Non-negative (up to solver error) for zero torque on sign-condition meshes.
    """
    e = trace.array("exchange_energy")
    l2 = trace.array("v_l2_lumped")[1:]
    h1 = trace.array("v_h1")[1:]
    k = config.k
    rhs = e[1:] + (2 * config.theta - 1) * k * k * h1 + (2 * config.beta / config.alpha) * k * l2
    return e[:-1] - rhs


def gronwall_rate(trace: EnergyTrace) -> float:
    """Smallest C >= 0 with E_j <= E_0 exp(C t_j) along the trace."""
    E = trace.array("bound_Ej")
    t = trace.array("time")
    if E[0] <= 0 or len(E) < 2:
        return 0.0
    rates = np.log(np.maximum(E[1:], 1e-300) / E[0]) / t[1:]
    return max(0.0, float(np.max(rates)))


def weak_residual(snapshots, psi, config: SolverConfig, model: TorqueModel, ops: Operators) -> float:
    """Space-time residual of the continuous weak form tested with ``psi(t, X) -> (N, 3)``.

    Uses the vertex rule in space, the trapezoid rule over the snapshot times and the
    discrete velocity as the time derivative.
    """
    if len(snapshots) < 2:
        raise ValueError("weak_residual needs at least two snapshots")
    times = np.array([s.time for s in snapshots])
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    mesh = ops.mesh
    d = mesh.dimension
    w = ops.weights
    values = []
    for s in snapshots:
        m, v = s.m, s.v
        p = np.asarray(psi(s.time, mesh.nodes), dtype=float)
        G = field_gradients(m, mesh, ops.grads)
        gsq = np.einsum("eri,eri->e", G, G) * ops.measures / (d + 1)
        mp = np.einsum("ni,ni->n", m, p)
        normal = float(np.sum(gsq[:, None] * mp[mesh.elements]))
        lhs = float(np.einsum("n,ni,ni->", w, config.beta * v - np.cross(m, v), p))
        rhs = (
            config.alpha * normal
            - config.alpha * float(np.einsum("ni,ni->", m, ops.stiffness @ p))
            - float(np.einsum("ni,ni->", torque_load(m, model, ops), p))
        )
        values.append(lhs - rhs)
    return float(abs(trapezoid(values, times)))


def smooth_bump(t0: float, t1: float, box, vector=(1.0, 1.0, 1.0)):
    """psi(t, x) = eta(t) chi(x) e with C-infinity bumps vanishing outside (t0, t1) and the box."""
    vector = np.asarray(vector, dtype=float)
    box = [tuple(b) for b in box]

    def bump(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = np.abs(s) < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
        return out

    def psi(t, X):
        X = np.atleast_2d(X)
        eta = bump((2 * t - (t0 + t1)) / (t1 - t0))
        chi = np.ones(len(X))
        for i, (lo, hi) in enumerate(box):
            chi = chi * bump((2 * X[:, i] - (lo + hi)) / (hi - lo))
        return float(eta) * chi[:, None] * vector[None, :]

    return psi


