"""Discrete velocity sets and void-fraction quadrature stencils.

Flow stencils are D1Q3, D2Q9 and D3Q27. Directions are ordered rest first,
then axis-aligned, then the diagonals (edges before corners in 3D), so
population dumps line up across runs. Quadrature stencils (D1Q3, D2Q5, D3Q7)
use only the rest point and the axis neighbours.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError

CS2 = Fraction(1, 3)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LatticeDescriptor:
    """A DdQq velocity set in lattice units (dx = dt = 1)."""

    name: str
    dimension: int
    velocities: np.ndarray  # (Q, d) int
    weights: tuple[Fraction, ...]
    cs2: Fraction = CS2
    w: np.ndarray = field(init=False, repr=False, compare=False)
    opposite: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vel = _freeze(np.asarray(self.velocities, dtype=np.int64).reshape(-1, self.dimension))
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "w", _freeze(np.array([float(x) for x in self.weights])))
        lookup = {tuple(v): i for i, v in enumerate(vel.tolist())}
        opp = np.array([lookup[tuple(-v)] for v in vel])
        object.__setattr__(self, "opposite", _freeze(opp))

    @property
    def Q(self) -> int:
        return len(self.weights)

    @property
    def cs2_float(self) -> float:
        return float(self.cs2)

    def padded_velocities(self) -> np.ndarray:
        """Velocities embedded in 3 components, shape (3, Q); used by the compiled kernels."""
        out = np.zeros((3, self.Q), dtype=np.int64)
        out[: self.dimension] = self.velocities.T
        return out

    def moment(self, order: int) -> np.ndarray:
        """Exact weighted velocity moment sum_i w_i xi_i^{(x order)} as a Fraction tensor."""
        d = self.dimension
        out = np.full((d,) * order, Fraction(0), dtype=object) if order else np.array(Fraction(0), dtype=object)
        for wi, xi in zip(self.weights, self.velocities.tolist()):
            t = np.array(wi, dtype=object)
            for _ in range(order):
                t = np.multiply.outer(t, np.array([Fraction(c) for c in xi], dtype=object))
            out = out + t
        return out


def _velocity_set(d: int) -> list[tuple[int, ...]]:
    # rest, then by number of non-zero components, each class in a fixed order
    vels = list(itertools.product((0, 1, -1), repeat=d))
    vels.sort(key=lambda v: (sum(map(abs, v)), tuple(-abs(c) for c in v), tuple(-c for c in v)))
    return vels


_WEIGHTS_BY_NORM = {
    1: (Fraction(2, 3), Fraction(1, 6)),
    2: (Fraction(4, 9), Fraction(1, 9), Fraction(1, 36)),
    3: (Fraction(8, 27), Fraction(2, 27), Fraction(1, 54), Fraction(1, 216)),
}


def make_lattice(d: int) -> LatticeDescriptor:
    """D1Q3 for d=1, D2Q9 for d=2, D3Q27 for d=3."""
    if d not in _WEIGHTS_BY_NORM:
        raise ConfigurationError(f"unsupported lattice dimension {d!r}; expected 1, 2 or 3")
    vels = _velocity_set(d)
    per_class = _WEIGHTS_BY_NORM[d]
    weights = tuple(per_class[sum(abs(c) for c in v)] for v in vels)
    return LatticeDescriptor(f"D{d}Q{len(vels)}", d, np.array(vels), weights)


@dataclass(frozen=True)
class QuadratureDescriptor:
    """Axis-aligned stencil integrating the void fraction over one cell.

    The weights are not those of a velocity set: the rest weight and the
    common off-centre weight are tabulated per number of varying directions.
    """

    dimension: int
    offsets: np.ndarray  # (N, d) int, rest first
    w0: Fraction
    w1: Fraction

    def __post_init__(self):
        object.__setattr__(self, "offsets", _freeze(np.asarray(self.offsets, dtype=np.int64)))

    @property
    def N(self) -> int:
        return len(self.offsets)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return (self.w0,) + (self.w1,) * (self.N - 1)


_QUADRATURE_WEIGHTS = {
    1: (Fraction(1, 2), Fraction(1, 4)),
    2: (Fraction(1, 3), Fraction(1, 6)),
    3: (Fraction(1, 6), Fraction(5, 36)),
}


def make_quadrature(variation_dims: int) -> QuadratureDescriptor:
    if variation_dims not in _QUADRATURE_WEIGHTS:
        raise ConfigurationError(
            f"unsupported quadrature dimension {variation_dims!r}; expected 1, 2 or 3"
        )
    d = variation_dims
    offsets = [(0,) * d]
    for axis in range(d):
        for sign in (1, -1):
            off = [0] * d
            off[axis] = sign
            offsets.append(tuple(off))
    w0, w1 = _QUADRATURE_WEIGHTS[d]
    return QuadratureDescriptor(d, np.array(offsets), w0, w1)
