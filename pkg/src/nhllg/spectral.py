"""1D Faedo-Galerkin solver in the Neumann cosine basis, used to cross-check the FEM scheme.

Solves the parabolic form

    m_t = beta' m_xx + Pi_K(beta' |m_x|^2 m + alpha' m x m_xx + F(m, m_x))

with alpha' = alpha / (1 + beta^2), beta' = alpha beta / (1 + beta^2). Nonlinear terms are
evaluated on a midpoint grid and projected back by quadrature. The unit-length
constraint is not enforced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .torque import TorqueModel, evaluate_F


class SpectralBlowup(FloatingPointError):
    def __init__(self, time: float):
        super().__init__(f"spectral solution became non-finite at t = {time:.6g}")
        self.time = time


def primed(alpha: float, beta: float) -> tuple[float, float]:
    return alpha / (1 + beta**2), alpha * beta / (1 + beta**2)


@dataclass(frozen=True)
class SpectralBasis:
    """First ``K`` Neumann eigenfunctions of -d^2/dx^2 on (0, L), sampled at ``Q`` midpoints.

    With the midpoint rule the discrete Gram matrix is the identity for K <= Q.
    """

    L: float = 1.0
    K: int = 32
    Q: int = 512

    def __post_init__(self):
        if self.K < 1 or self.Q < self.K:
            raise ValueError("need 1 <= K <= Q")
        j = np.arange(self.K)
        x = (np.arange(self.Q) + 0.5) * self.L / self.Q
        w = np.full(self.Q, self.L / self.Q)
        kx = j[:, None] * np.pi / self.L
        amp = np.where(j == 0, np.sqrt(1 / self.L), np.sqrt(2 / self.L))[:, None]
        for name, val in {
            "x": x,
            "w": w,
            "lam": (j * np.pi / self.L) ** 2,
            "phi": amp * np.cos(kx * x[None, :]),
            "dphi": -amp * kx * np.sin(kx * x[None, :]),
        }.items():
            object.__setattr__(self, name, val)

    def gram(self) -> np.ndarray:
        return (self.phi * self.w) @ self.phi.T

    def project(self, values: np.ndarray) -> np.ndarray:
        """(Q, 3) grid values -> (K, 3) coefficients."""
        return (self.phi * self.w) @ values

    def values(self, c: np.ndarray) -> np.ndarray:
        return self.phi.T @ c

    def derivative(self, c: np.ndarray) -> np.ndarray:
        return self.dphi.T @ c

    def laplacian(self, c: np.ndarray) -> np.ndarray:
        return self.phi.T @ (-self.lam[:, None] * c)

    def project_function(self, fn) -> np.ndarray:
        return self.project(np.array([np.asarray(fn(np.array([xi])), dtype=float) for xi in self.x]))

    def exchange_energy(self, c: np.ndarray) -> float:
        dm = self.derivative(c)
        return float(np.sum(self.w[:, None] * dm * dm))


@dataclass(frozen=True)
class SpectralState:
    c: np.ndarray  # (K, 3)
    t: float


def spectral_rhs(state: SpectralState | np.ndarray, basis: SpectralBasis, model: TorqueModel,
                 alpha_p: float, beta_p: float) -> np.ndarray:
    """Time derivative of the coefficients."""
    c = state.c if isinstance(state, SpectralState) else state
    m = basis.values(c)
    dm = basis.derivative(c)
    lap = basis.laplacian(c)
    nonlinear = beta_p * np.einsum("qi,qi->q", dm, dm)[:, None] * m + alpha_p * np.cross(m, lap)
    if not model.is_zero:
        beta = beta_p / alpha_p
        nonlinear = nonlinear + evaluate_F(model, m, dm[:, :, None], alpha_p * (1 + beta**2), beta)
    return -beta_p * basis.lam[:, None] * c + basis.project(nonlinear)


@dataclass
class SpectralTrajectory:
    times: np.ndarray
    coeffs: np.ndarray  # (n_times, K, 3)
    basis: SpectralBasis

    def at(self, t: float) -> np.ndarray:
        i = np.flatnonzero(np.abs(self.times - t) <= 1e-9 * max(1.0, abs(t)))
        if not i.size:
            raise ValueError(f"time {t} is not on the spectral trajectory")
        return self.coeffs[i[0]]


def integrate(initial, basis: SpectralBasis, model: TorqueModel, config, substeps: int = 1) -> SpectralTrajectory:
    """Classical RK4 on the coefficients with step k / substeps, recorded every k for J steps.

    ``initial`` is a callable x -> R^3 (projected onto the basis) or a (K, 3) array.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if model.dimension != 1 and not model.is_zero:
        raise ValueError("the spectral oracle is one-dimensional")
    a_p, b_p = primed(config.alpha, config.beta)
    c = basis.project_function(initial) if callable(initial) else np.array(initial, dtype=float)
    dt = config.k / substeps
    out = [c.copy()]

    def rhs(y):
        return spectral_rhs(y, basis, model, a_p, b_p)

    # overflow is caught by the finiteness check below
    with np.errstate(over="ignore", invalid="ignore"):
        for j in range(config.J):
            for s in range(substeps):
                k1 = rhs(c)
                k2 = rhs(c + 0.5 * dt * k1)
                k3 = rhs(c + 0.5 * dt * k2)
                k4 = rhs(c + dt * k3)
                c = c + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                if not np.all(np.isfinite(c)):
                    raise SpectralBlowup(j * config.k + (s + 1) * dt)
            out.append(c.copy())
    times = np.arange(config.J + 1) * config.k
    return SpectralTrajectory(times, np.array(out), basis)


def norm_drift(traj: SpectralTrajectory) -> np.ndarray:
    """max_x | |m_K(t, x)| - 1 | at every recorded time."""
    b = traj.basis
    return np.array([np.max(np.abs(np.linalg.norm(b.values(c), axis=1) - 1.0)) for c in traj.coeffs])


def compare_to_fem(traj: SpectralTrajectory, fem_snapshots, times, mesh) -> float:
    """Largest L^2(0, L) distance between the spectral and P1 solutions over ``times``.

    ``fem_snapshots`` are objects with ``time`` and ``m`` (nodal (N, 3)) on a 1D ``mesh``.
    """
    if mesh.dimension != 1:
        raise ValueError("compare_to_fem needs a 1D mesh")
    b = traj.basis
    x = mesh.nodes[:, 0]
    order = np.argsort(x)
    worst = 0.0
    for t in times:
        match = [s for s in fem_snapshots if abs(s.time - t) <= 1e-9 * max(1.0, abs(t))]
        if not match:
            raise ValueError(f"time {t} is not among the FEM snapshots")
        c = traj.at(t)
        m_fem = np.column_stack([np.interp(b.x, x[order], match[0].m[order, r]) for r in range(3)])
        diff = b.values(c) - m_fem
        worst = max(worst, float(np.sqrt(np.sum(b.w[:, None] * diff * diff))))
    return worst


def smooth_initial_1d(x) -> np.ndarray:
    """Unit field on (0, 1) that is a smooth function of cos(pi x), so every odd derivative
    vanishes at both ends and the cosine series converges spectrally."""
    s = float(np.cos(np.pi * np.asarray(x, dtype=float).ravel()[0]))
    polar = 1.0 + 0.8 * s
    azim = 0.5 * (2 * s * s - 1)
    return np.array([np.sin(polar) * np.cos(azim), np.sin(polar) * np.sin(azim), np.cos(polar)])
