"""P1 finite-element operators on a :class:`~nhllg.mesh.Mesh`.

Nodal vector fields are plain ``(N, 3)`` float arrays indexed like ``mesh.nodes``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh

DEGENERATE_TOL = 1e-14


class AssemblyError(ValueError):
    pass


class NormalizationError(ArithmeticError):
    """A nodal vector was too short to project back onto the sphere."""

    def __init__(self, node: int, norm: float):
        super().__init__(f"nodal norm {norm:.3e} at node {node} is below the threshold")
        self.node = node
        self.norm = norm


def shape_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the hat functions on each element and the element measures.

    Returns ``(grads, measures)`` with ``grads[e, a]`` the constant gradient (length d) of
    the hat function of local vertex ``a`` on element ``e``.
    """
    x = mesh.nodes[mesh.elements]  # (E, d+1, d)
    d = mesh.dimension
    # Jacobian columns are edge vectors from vertex 0
    J = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))  # (E, d, d)
    det = np.linalg.det(J) if d > 1 else J[:, 0, 0]
    bad = np.flatnonzero(np.abs(det) <= DEGENERATE_TOL)
    if bad.size:
        raise AssemblyError(f"element {int(bad[0])} is degenerate (measure {abs(det[bad[0]]):.3e})")
    Jinv = np.linalg.inv(J)  # rows are gradients of barycentric coords 1..d
    grads = np.empty((len(x), d + 1, d))
    grads[:, 1:, :] = Jinv
    grads[:, 0, :] = -Jinv.sum(axis=1)
    measures = np.abs(det) / (1.0 if d == 1 else 2.0)
    return grads, measures


def _scatter(mesh: Mesh, local: np.ndarray):
    n = mesh.n_nodes
    e = mesh.elements
    rows = np.repeat(e, e.shape[1], axis=1).ravel()
    cols = np.tile(e, (1, e.shape[1])).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """K[n, m] = integral of grad(phi_n) . grad(phi_m)."""
    grads, vol = shape_gradients(mesh)
    local = np.einsum("eai,ebi->eab", grads, grads) * vol[:, None, None]
    return _scatter(mesh, local)


def lumped_weights(mesh: Mesh) -> np.ndarray:
    _, vol = shape_gradients(mesh)
    share = np.repeat(vol / (mesh.dimension + 1), mesh.dimension + 1)
    return np.bincount(mesh.elements.ravel(), weights=share, minlength=mesh.n_nodes)


def assemble_mass(mesh: Mesh, lumped: bool = True) -> sp.csr_matrix:
    """Consistent P1 mass matrix, or its vertex-rule (diagonal) lumping."""
    if lumped:
        return sp.diags(lumped_weights(mesh)).tocsr()
    _, vol = shape_gradients(mesh)
    d = mesh.dimension
    # exact: integral of lambda_a lambda_b = |T| (1 + delta_ab) / ((d+1)(d+2))
    ref = (np.ones((d + 1, d + 1)) + np.eye(d + 1)) / ((d + 1) * (d + 2))
    return _scatter(mesh, vol[:, None, None] * ref)


@dataclass(frozen=True)
class Operators:
    """Assembled operators shared by every time step on one mesh."""

    mesh: Mesh
    stiffness: sp.csr_matrix
    weights: np.ndarray  # lumped mass diagonal
    grads: np.ndarray
    measures: np.ndarray

    @classmethod
    def build(cls, mesh: Mesh) -> "Operators":
        grads, vol = shape_gradients(mesh)
        return cls(mesh, assemble_stiffness(mesh), lumped_weights(mesh), grads, vol)


def interpolate(function, mesh: Mesh) -> np.ndarray:
    """Nodal interpolant: values[n] = function(x_n)."""
    return np.array([np.asarray(function(x), dtype=float) for x in mesh.nodes]).reshape(mesh.n_nodes, 3)


def field_gradients(field: np.ndarray, mesh: Mesh, grads: np.ndarray | None = None) -> np.ndarray:
    """Elementwise-constant gradients of the P1 interpolant, shape (E, 3, d)."""
    if grads is None:
        grads, _ = shape_gradients(mesh)
    return np.einsum("ear,eai->eri", field[mesh.elements], grads)


def element_gradient(field: np.ndarray, mesh: Mesh, element: int) -> np.ndarray:
    """3 x d gradient matrix of the P1 interpolant on a single element."""
    if not 0 <= element < mesh.n_elements:
        raise IndexError(f"element {element} out of range")
    sub = Mesh(mesh.dimension, mesh.nodes, mesh.elements[element : element + 1])
    return field_gradients(field, sub)[0]


def exchange_energy(field: np.ndarray, stiffness) -> float:
    """||grad m_h||^2 = sum over components of m_r . K m_r."""
    field = np.asarray(field)
    if stiffness.shape[0] != field.shape[0]:
        raise ValueError(f"field has {field.shape[0]} nodes, stiffness has {stiffness.shape[0]}")
    # clamp rounding-level negatives; K is positive semidefinite
    return max(0.0, float(np.einsum("nr,nr->", field, stiffness @ field)))


def normalize_nodal(field: np.ndarray, min_norm: float = 0.5) -> np.ndarray:
    norms = np.linalg.norm(field, axis=1)
    low = np.flatnonzero(norms < min_norm)
    if low.size:
        raise NormalizationError(int(low[0]), float(norms[low[0]]))
    return field / norms[:, None]
