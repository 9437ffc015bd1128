"""Velocity solve of the tangent-plane scheme.

At step j we look for v in the discrete tangent space {w in V_h : w(x_n) . m(x_n) = 0}
with

    beta (v, psi) - (m x v, psi) = -alpha (grad(m + theta k v), grad psi) - (m x f(m, grad m), psi)

for all psi in the same space. Zeroth-order terms use the lumped (vertex) rule. The
nodal constraint is eliminated with an orthonormal frame (t1_n, t2_n) per node, leaving
two unknowns per node and a nonsymmetric system whose symmetric part is positive
definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fem import Operators, field_gradients
from .torque import TorqueModel

FRAME_THRESHOLD = 0.1
UNIT_TOL = 1e-10
_AXES = (np.array([0.0, 0.0, 1.0]), np.array([0.0, 1.0, 0.0]))


class SolverFailure(RuntimeError):
    def __init__(self, message: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class TangentFrame:
    t1: np.ndarray  # (N, 3)
    t2: np.ndarray  # (N, 3)

    def basis(self) -> sp.csr_matrix:
        """3N x 2N map from frame coefficients (a_n, b_n) to nodal R^3 vectors."""
        n = len(self.t1)
        rows = np.repeat(3 * np.arange(n), 6) + np.tile([0, 0, 1, 1, 2, 2], n)
        cols = np.repeat(2 * np.arange(n), 6) + np.tile([0, 1, 0, 1, 0, 1], n)
        vals = np.stack([self.t1, self.t2], axis=2).reshape(-1)
        return sp.csr_matrix((vals, (rows, cols)), shape=(3 * n, 2 * n))

    def reconstruct(self, coeffs: np.ndarray) -> np.ndarray:
        c = coeffs.reshape(-1, 2)
        return c[:, :1] * self.t1 + c[:, 1:] * self.t2

    def project(self, field: np.ndarray) -> np.ndarray:
        """Frame coefficients of the tangential part of ``field``."""
        return np.stack(
            [np.einsum("ni,ni->n", field, self.t1), np.einsum("ni,ni->n", field, self.t2)], axis=1
        ).ravel()


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def build_frame(m: np.ndarray, previous: TangentFrame | None = None) -> TangentFrame:
    """Deterministic right-handed frames with t1 x t2 = m at every node.

    t1 = normalize(e x m) for the first axis e in (z, y) with |e x m| >= 0.1; with a
    previous frame, its t1 projected onto the new tangent plane is reused when that
    projection is not too short.
    """
    m = np.asarray(m, dtype=float)
    cz = np.cross(_AXES[0], m)
    cy = np.cross(_AXES[1], m)
    use_z = np.linalg.norm(cz, axis=1) >= FRAME_THRESHOLD
    t1 = np.where(use_z[:, None], cz, cy)
    if previous is not None:
        p = previous.t1 - np.einsum("ni,ni->n", previous.t1, m)[:, None] * m
        keep = np.linalg.norm(p, axis=1) >= FRAME_THRESHOLD
        t1 = np.where(keep[:, None], p, t1)
    t1 = _unit(t1)
    # re-orthogonalise against m so t1 . m is at rounding level
    t1 = _unit(t1 - np.einsum("ni,ni->n", t1, m)[:, None] * m)
    t2 = np.cross(m, t1)
    return TangentFrame(t1, t2)


@dataclass(frozen=True)
class ReducedSystem:
    A: sp.csr_matrix
    b: np.ndarray
    frame: TangentFrame
    ops: Operators
    alpha: float
    beta: float
    theta: float
    k: float


def torque_load(m: np.ndarray, model: TorqueModel, ops: Operators) -> np.ndarray:
    """Nodal vectors sum_{T containing n} |T|/(d+1) m_n x f(m_n, grad_T m)."""
    mesh = ops.mesh
    if model.is_zero:
        return np.zeros_like(m)
    if model.dimension != mesh.dimension:
        raise ValueError(f"{model.dimension}D torque model used on a {mesh.dimension}D mesh")
    G = field_gradients(m, mesh, ops.grads)  # (E, 3, d)
    a = m[mesh.elements]  # (E, d+1, 3)
    f = model.evaluate(a, G[:, None, :, :])
    local = np.cross(a, f) * (ops.measures / (mesh.dimension + 1))[:, None, None]
    out = np.empty_like(m)
    idx = mesh.elements.ravel()
    for r in range(3):
        out[:, r] = np.bincount(idx, weights=local[..., r].ravel(), minlength=mesh.n_nodes)
    return out


def assemble_step_system(m: np.ndarray, frame: TangentFrame, model: TorqueModel, config, ops: Operators) -> ReducedSystem:
    m = np.asarray(m, dtype=float)
    if m.shape != (ops.mesh.n_nodes, 3):
        raise ValueError(f"field shape {m.shape} does not match mesh with {ops.mesh.n_nodes} nodes")
    dev = np.max(np.abs(np.linalg.norm(m, axis=1) - 1.0))
    if not dev <= UNIT_TOL:
        raise ValueError(f"magnetisation is not unit length at the nodes (max deviation {dev:.2e})")
    alpha, beta, theta, k = (float(config.alpha), float(config.beta), float(config.theta), float(config.k))
    n = ops.mesh.n_nodes
    w = ops.weights
    P = frame.basis()
    K3 = sp.kron(ops.stiffness, sp.identity(3), format="csr")

    # beta w I + w S per node, S = [[0, 1], [-1, 0]] from -(m x v, psi) with m x t1 = t2
    diag = np.repeat(beta * w, 2)
    upper = np.zeros(2 * n - 1)
    upper[0::2] = w
    local = sp.diags([diag, upper, -upper], [0, 1, -1], format="csr")
    A = (local + (alpha * theta * k) * (P.T @ K3 @ P)).tocsr()

    b = -alpha * (P.T @ (K3 @ m.ravel())) - frame.project(torque_load(m, model, ops))
    return ReducedSystem(A, b, frame, ops, alpha, beta, theta, k)


@dataclass(frozen=True)
class TangentUpdate:
    v: np.ndarray  # (N, 3)
    coeffs: np.ndarray  # (2N,)
    iterations: int
    residual: float


def relative_residual(system: ReducedSystem, x: np.ndarray) -> float:
    return float(np.linalg.norm(system.A @ x - system.b) / max(np.linalg.norm(system.b), 1.0))


def solve_step(system: ReducedSystem, tol: float = 1e-10, max_iter: int | None = None, method: str = "gmres") -> TangentUpdate:
    """Solve the reduced system to ``|A x - b| / max(|b|, 1) <= tol``.

    ``method`` is ``"gmres"`` (ILU-preconditioned, restarted) or ``"direct"`` (sparse LU).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, b = system.A, system.b
    if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(b))):
        raise ValueError("non-finite entries in the step system")
    size = len(b)
    if max_iter is None:
        max_iter = 10 * size
    scale = max(np.linalg.norm(b), 1.0)

    if not np.any(b):
        x = np.zeros(size)
        return TangentUpdate(system.frame.reconstruct(x), x, 0, 0.0)

    if method == "direct":
        x = spla.splu(A.tocsc()).solve(b)
        iters = 1
    elif method == "gmres":
        x, iters = _gmres(A, b, tol * scale, max_iter)
    else:
        raise ValueError(f"unknown linear solver {method!r}")

    res = relative_residual(system, x)
    if not res <= tol:
        raise SolverFailure(f"linear solve stopped at relative residual {res:.3e} after {iters} iterations", res, iters)
    return TangentUpdate(system.frame.reconstruct(x), x, iters, res)


def _gmres(A, b, atol, max_iter):
    n = len(b)
    try:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-8, fill_factor=20)
        M = spla.LinearOperator((n, n), ilu.solve)
    except RuntimeError:  # singular factor; fall back to unpreconditioned
        M = None
    restart = min(60, n)
    x = np.zeros(n)
    used = 0
    # rtol=0 so the stopping test is the absolute target; repeat from the last iterate
    # to absorb any gap between the preconditioned and true residual
    while used < max_iter:
        count = [0]

        def cb(_):
            count[0] += 1

        cycles = max(1, math.ceil((max_iter - used) / restart))
        x, _ = spla.gmres(A, b, x0=x, rtol=0.0, atol=atol, restart=restart, maxiter=cycles, M=M,
                          callback=cb, callback_type="pr_norm")
        used += max(count[0], 1)
        if np.linalg.norm(A @ x - b) <= atol:
            break
    return x, used


def coercivity_identity(system: ReducedSystem, coeffs: np.ndarray) -> float:
    """x.Ax - (beta |v|^2_lumped + alpha theta k |grad v|^2); zero up to rounding."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != system.b.shape:
        raise ValueError("coefficient vector has the wrong length")
    v = system.frame.reconstruct(coeffs)
    ops = system.ops
    lumped = float(np.einsum("n,ni,ni->", ops.weights, v, v))
    grad = float(np.einsum("ni,ni->", v, ops.stiffness @ v))
    quad = float(coeffs @ (system.A @ coeffs))
    return quad - (system.beta * lumped + system.alpha * system.theta * system.k * grad)
