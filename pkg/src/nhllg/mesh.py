"""Simplicial meshes (segments in 1D, triangles in 2D) and the sign-condition check."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

SIGN_TOL = 1e-12


class MeshError(ValueError):
    """Invalid mesh input or a mesh that violates its invariants."""


@dataclass(frozen=True)
class Mesh:
    dimension: int
    nodes: np.ndarray  # (N, d)
    elements: np.ndarray  # (E, d+1), 0-based
    boundary_nodes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if nodes.ndim == 1:
            nodes = nodes[:, None]
        if self.dimension not in (1, 2):
            raise MeshError(f"dimension must be 1 or 2, got {self.dimension}")
        if nodes.shape[1] != self.dimension:
            raise MeshError("node coordinates do not match mesh dimension")
        if elements.ndim != 2 or elements.shape[1] != self.dimension + 1:
            raise MeshError(f"elements must have {self.dimension + 1} vertices each")
        if elements.size and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise MeshError("element references a node that does not exist")
        nodes.setflags(write=False)
        elements.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "boundary_nodes", frozenset(int(i) for i in self.boundary_nodes))

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def signed_measures(self) -> np.ndarray:
        """Signed length (1D) or signed area (2D) of every element."""
        x = self.nodes[self.elements]
        if self.dimension == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def measures(self) -> np.ndarray:
        return np.abs(self.signed_measures())

    def validate(self, domain_measure: float | None = None) -> None:
        """Raise :class:`MeshError` if any structural invariant fails."""
        if self.n_nodes > 1:
            # sort-based duplicate detection; exact pairwise check only among neighbours
            order = np.lexsort(self.nodes.T[::-1])
            gaps = np.linalg.norm(np.diff(self.nodes[order], axis=0), axis=1)
            if np.any(gaps <= 1e-12):
                raise MeshError("duplicate nodes")
        signed = self.signed_measures()
        if np.any(signed <= 0):
            bad = int(np.flatnonzero(signed <= 0)[0])
            raise MeshError(f"element {bad} has non-positive measure {signed[bad]:.3e}")
        if domain_measure is not None:
            total = signed.sum()
            if abs(total - domain_measure) > 1e-10 * abs(domain_measure):
                raise MeshError(f"elements cover {total}, expected {domain_measure}")


@dataclass(frozen=True)
class MeshQualityReport:
    max_offdiagonal_stiffness: float
    satisfies_sign_condition: bool
    min_angle: float | None = None
    max_angle: float | None = None


def generate_structured(bounds, subdivisions, diagonal_rule: str = "fixed") -> Mesh:
    """Uniform grid on an interval or a box.

    ``bounds`` is ``[(lo, hi)]`` in 1D or ``[(x0, x1), (y0, y1)]`` in 2D. In 2D each cell
    is split into two triangles: ``fixed`` always uses the lower-left to upper-right
    diagonal, ``alternating`` flips the diagonal in a checkerboard pattern.
    """
    bounds = [tuple(float(v) for v in b) for b in bounds]
    subdivisions = [int(n) for n in np.atleast_1d(subdivisions)]
    if len(bounds) != len(subdivisions) or len(bounds) not in (1, 2):
        raise MeshError("bounds and subdivisions must both have length 1 or 2")
    if any(n < 1 for n in subdivisions):
        raise MeshError(f"subdivisions must be positive, got {subdivisions}")
    if any(hi <= lo for lo, hi in bounds):
        raise MeshError(f"empty bounds {bounds}")
    if diagonal_rule not in ("fixed", "alternating"):
        raise MeshError(f"unknown diagonal rule {diagonal_rule!r}")

    if len(bounds) == 1:
        (lo, hi), (n,) = bounds[0], subdivisions
        x = np.linspace(lo, hi, n + 1)
        elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        return Mesh(1, x[:, None], elements, frozenset({0, n}))

    (x0, x1), (y0, y1) = bounds
    nx, ny = subdivisions
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)  # row index = y
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def idx(i, j):
        return j * (nx + 1) + i

    tris = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            if diagonal_rule == "fixed" or (i + j) % 2 == 0:
                tris += [(a, b, c), (a, c, d)]
            else:
                tris += [(a, b, d), (b, c, d)]
    boundary = {
        idx(i, j)
        for j in range(ny + 1)
        for i in range(nx + 1)
        if i in (0, nx) or j in (0, ny)
    }
    return Mesh(2, nodes, np.array(tris), frozenset(boundary))


def box_measure(bounds) -> float:
    return float(np.prod([hi - lo for lo, hi in bounds]))


def _triangle_angles(mesh: Mesh) -> np.ndarray:
    x = mesh.nodes[mesh.elements]
    angles = np.empty((mesh.n_elements, 3))
    for v in range(3):
        p, q, r = x[:, v], x[:, (v + 1) % 3], x[:, (v + 2) % 3]
        u, w = q - p, r - p
        cos = np.einsum("ij,ij->i", u, w) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        angles[:, v] = np.arccos(np.clip(cos, -1.0, 1.0))
    return angles


def check_sign_condition(mesh: Mesh, stiffness) -> MeshQualityReport:
    """Check that every off-diagonal stiffness entry is non-positive (up to 1e-12)."""
    K = sp.coo_matrix(stiffness)
    if K.shape != (mesh.n_nodes, mesh.n_nodes):
        raise MeshError(f"stiffness shape {K.shape} does not match {mesh.n_nodes} nodes")
    K = K.tocsr()
    K.sum_duplicates()
    K = K.tocoo()
    off = K.row != K.col
    worst = float(K.data[off].max()) if np.any(off) else -np.inf
    min_angle = max_angle = None
    if mesh.dimension == 2 and mesh.n_elements:
        ang = _triangle_angles(mesh)
        min_angle, max_angle = float(ang.min()), float(ang.max())
    return MeshQualityReport(worst, bool(worst <= SIGN_TOL), min_angle, max_angle)


def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"{mesh.dimension} {mesh.n_nodes} {mesh.n_elements}"]
    lines += [" ".join(f"{c:.17g}" for c in x) for x in mesh.nodes]
    lines += [" ".join(str(int(i)) for i in e) for e in mesh.elements]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read the plain-text mesh format; boundary nodes are recovered from free facets."""
    tokens = Path(path).read_text().split("\n")
    rows = [ln.split() for ln in tokens if ln.strip()]
    if not rows or len(rows[0]) != 3:
        raise MeshError(f"{path}: header must be 'd N E'")
    try:
        d, n, e = (int(t) for t in rows[0])
    except ValueError as exc:
        raise MeshError(f"{path}: malformed header") from exc
    if len(rows) != 1 + n + e:
        raise MeshError(f"{path}: expected {n} nodes and {e} elements, found {len(rows) - 1} lines")
    try:
        nodes = np.array([[float(t) for t in r] for r in rows[1 : 1 + n]]).reshape(n, d)
        elements = np.array([[int(t) for t in r] for r in rows[1 + n :]]).reshape(e, d + 1)
    except ValueError as exc:
        raise MeshError(f"{path}: {exc}") from exc
    return Mesh(d, nodes, elements, _boundary_from_facets(d, elements))


def _boundary_from_facets(d: int, elements: np.ndarray) -> frozenset:
    if d == 1:
        counts = np.bincount(elements.ravel())
        return frozenset(int(i) for i in np.flatnonzero(counts == 1))
    edges = np.sort(np.concatenate([elements[:, [0, 1]], elements[:, [1, 2]], elements[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return frozenset(int(i) for i in np.unique(uniq[counts == 1]))
