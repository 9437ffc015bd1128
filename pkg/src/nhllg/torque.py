"""Separable torque terms f(a, B) = f1(a) + f2(a) x g1(B) + f3(a) x (f4(a) x g2(B)).

``a`` is a magnetisation value in R^3 and ``B`` a 3 x d gradient (row r = gradient of
component r). All component maps are vectorised over leading axes. The linear maps g1,
g2 are stored as 3 x 3d coefficient arrays acting on ``B`` flattened row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

VecMap = Callable[[np.ndarray], np.ndarray]

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class TorqueModel:
    name: str
    dimension: int
    f1: Optional[VecMap] = None
    f2: Optional[VecMap] = None
    f3: Optional[VecMap] = None
    f4: Optional[VecMap] = None
    g1: Optional[np.ndarray] = None
    g2: Optional[np.ndarray] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name in ("g1", "g2"):
            g = getattr(self, name)
            if g is not None:
                g = np.array(g, dtype=float)
                if g.shape != (3, 3 * self.dimension):
                    raise ValueError(f"{name} must be 3 x {3 * self.dimension}, got {g.shape}")
                g.setflags(write=False)
                object.__setattr__(self, name, g)

    @property
    def is_zero(self) -> bool:
        return self.f1 is None and (self.f2 is None or self.g1 is None) and (
            self.f3 is None or self.f4 is None or self.g2 is None
        )

    def apply_g(self, which: int, B: np.ndarray) -> np.ndarray:
        G = self.g1 if which == 1 else self.g2
        B = np.asarray(B, dtype=float)
        if G is None:
            return np.zeros(B.shape[:-2] + (3,))
        if B.shape[-2:] != (3, self.dimension):
            raise ValueError(f"gradient must be 3 x {self.dimension}, got {B.shape[-2:]}")
        return B.reshape(B.shape[:-2] + (3 * self.dimension,)) @ G.T

    def evaluate(self, a, B) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        out = np.zeros(np.broadcast_shapes(a.shape, np.shape(B)[:-2] + (3,)))
        if self.f1 is not None:
            out = out + self.f1(a)
        if self.f2 is not None and self.g1 is not None:
            out = out + np.cross(self.f2(a), self.apply_g(1, B))
        if self.f3 is not None and self.f4 is not None and self.g2 is not None:
            out = out + np.cross(self.f3(a), np.cross(self.f4(a), self.apply_g(2, B)))
        return out

    __call__ = evaluate


def evaluate_F(model: TorqueModel, a, B, alpha: float, beta: float) -> np.ndarray:
    """Torque as it enters the parabolic form: (f - beta a x f) / (1 + beta^2).

    ``alpha`` does not appear; it is accepted so callers can pass the physics tuple.
    """
    a = np.asarray(a, dtype=float)
    f = model.evaluate(a, B)
    return (f - beta * np.cross(a, f)) / (1.0 + beta**2)


def directional_derivative_map(j: Sequence[float]) -> np.ndarray:
    """Coefficient array of B -> B @ j."""
    j = np.asarray(j, dtype=float)
    d = len(j)
    G = np.zeros((3, 3 * d))
    for r in range(3):
        G[r, r * d : (r + 1) * d] = j
    return G


@dataclass(frozen=True)
class SttParams:
    lam: float = 1.0
    mu: float = 1.0
    j: tuple = (1.0, 0.0)

    def __post_init__(self):
        if abs(np.linalg.norm(self.j) - 1.0) > 1e-12:
            raise ValueError(f"current direction j must be a unit vector, got {self.j}")


@dataclass(frozen=True)
class SotParams:
    c: tuple = (1.0,) * 8

    def __post_init__(self):
        if len(self.c) != 8 or not np.all(np.isfinite(self.c)):
            raise ValueError("SOT needs eight finite coefficients c1..c8")


def make_zero(dimension: int = 2) -> TorqueModel:
    return TorqueModel("none", dimension)


def make_stt(params: SttParams) -> TorqueModel:
    """lam m x (j.grad m) + mu m x (m x (j.grad m))."""
    lam, mu = float(params.lam), float(params.mu)
    G = directional_derivative_map(params.j)
    return TorqueModel(
        "stt",
        len(params.j),
        f2=lambda a: lam * a,
        f3=lambda a: mu * a,
        f4=lambda a: a,
        g1=G,
        g2=G,
        params={"lambda": lam, "mu": mu, "j": list(params.j)},
    )


def sot_parallel(a: np.ndarray, c) -> np.ndarray:
    kxm = np.cross(E3, a)
    s = np.einsum("...i,...i->...", kxm, kxm)[..., None]
    mi = a[..., :1]
    return (c[0] + c[1] * s + c[2] * s**2) * np.cross(E2, a) + (c[3] + c[4] * s) * np.cross(a, kxm) * mi


def sot_perpendicular(a: np.ndarray, c) -> np.ndarray:
    kxm = np.cross(E3, a)
    s = np.einsum("...i,...i->...", kxm, kxm)[..., None]
    mi = a[..., :1]
    return c[5] * np.cross(a, np.cross(E2, a)) + (c[6] + c[7] * s) * kxm * mi


def make_sot(params: SotParams, dimension: int = 2) -> TorqueModel:
    c = tuple(float(v) for v in params.c)
    return TorqueModel(
        "sot",
        dimension,
        f1=lambda a: sot_parallel(a, c) + sot_perpendicular(a, c),
        params={"c": list(c)},
    )


def random_unit_vectors(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_orthogonality(model: TorqueModel, samples: int = 1000, seed: int = 0) -> float:
    """max |f(a, B) . a| over random unit a and standard-normal B."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    a = random_unit_vectors(rng, samples)
    B = rng.standard_normal((samples, 3, model.dimension))
    f = model.evaluate(a, B)
    return float(np.max(np.abs(np.einsum("ni,ni->n", f, a))))


def growth_constant(fn: VecMap, exponent: float, radii, n_dirs: int = 64, seed: int = 0) -> float:
    """Smallest C with |fn(a)| <= C (1 + |a|^exponent) over the sampled radii and directions."""
    rng = np.random.default_rng(seed)
    dirs = random_unit_vectors(rng, n_dirs)
    radii = np.asarray(radii, dtype=float)
    a = radii[:, None, None] * dirs[None, :, :]
    vals = np.linalg.norm(fn(a), axis=-1)
    return float(np.max(vals / (1.0 + radii[:, None] ** exponent)))
