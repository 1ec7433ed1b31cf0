"""Periodic Cartesian grids, population buffers and finite-difference stencils.

Field arrays are plain numpy arrays with the grid shape ``(n,) * d``; vector
fields carry a leading component axis, ``(d,) + shape``; populations are
stored structure-of-arrays, ``(Q,) + shape``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .lattice import LatticeDescriptor, QuadratureDescriptor


@dataclass(frozen=True)
class Grid:
    """Uniform periodic node grid covering ``[0, length)`` in each direction."""

    dimension: int
    n: int
    length: float = 2.0

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ConfigurationError(f"grid dimension must be 1, 2 or 3, got {self.dimension}")
        if self.n < 4:
            raise ConfigurationError(f"grid needs at least 4 cells per direction, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dimension

    @property
    def shape3(self) -> tuple[int, int, int]:
        """Shape padded with singleton axes to three dimensions."""
        return self.shape + (1,) * (3 - self.dimension)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @property
    def size(self) -> int:
        return self.n**self.dimension

    def axes(self) -> tuple[np.ndarray, ...]:
        """Node coordinates ``c * dx`` as open (broadcastable) arrays, one per axis."""
        x = np.arange(self.n) * self.dx
        out = []
        for a in range(self.dimension):
            shape = [1] * self.dimension
            shape[a] = self.n
            out.append(x.reshape(shape))
        return tuple(out)

    def coordinates(self) -> np.ndarray:
        """Dense node coordinates, shape ``(d,) + shape``."""
        return np.stack(np.broadcast_arrays(*self.axes()))


class PopulationField:
    """Double-buffered populations: a step reads ``current`` and fills ``next``."""

    def __init__(self, lattice: LatticeDescriptor, grid: Grid, values: np.ndarray | None = None):
        if lattice.dimension != grid.dimension:
            raise ConfigurationError("lattice and grid dimensions differ")
        self.lattice = lattice
        self.grid = grid
        shape = (lattice.Q,) + grid.shape
        self.current = np.zeros(shape) if values is None else np.ascontiguousarray(values, dtype=np.float64)
        if self.current.shape != shape:
            raise ConfigurationError(f"population shape {self.current.shape} != {shape}")
        self.next = np.empty_like(self.current)

    def swap(self) -> None:
        self.current, self.next = self.next, self.current

    def copy(self) -> "PopulationField":
        return PopulationField(self.lattice, self.grid, self.current.copy())


def neighbor(c, offset, n: int) -> tuple[int, ...]:
    """Periodic neighbour of cell ``c`` along ``offset``."""
    return tuple((ci + oi) % n for ci, oi in zip(c, offset))


def _shift(phi: np.ndarray, axis: int, k: int) -> np.ndarray:
    """Field value at ``c + k e_axis`` for every cell ``c``."""
    return np.roll(phi, -k, axis=axis)


def central_gradient(phi: np.ndarray, c, dx: float = 1.0) -> np.ndarray:
    n = phi.shape[0]
    out = np.empty(phi.ndim)
    for a in range(phi.ndim):
        e = [0] * phi.ndim
        e[a] = 1
        plus = phi[neighbor(c, e, n)]
        minus = phi[neighbor(c, [-x for x in e], n)]
        out[a] = (plus - minus) / (2 * dx)
    return out


def central_gradient_field(phi: np.ndarray, dx: float = 1.0) -> np.ndarray:
    return np.stack([(_shift(phi, a, 1) - _shift(phi, a, -1)) / (2 * dx) for a in range(phi.ndim)])


def gradient_potential_for_divergence(r: np.ndarray) -> np.ndarray:
    """Gradient field ``g = grad_h(psi)`` whose central divergence equals ``r``.

    Solved spectrally on the periodic grid with the symbol of the central
    difference. ``r`` must have zero mean; Fourier modes the central stencil
    cannot see (wavenumber 0 or pi along an axis) are dropped.
    """
    r = np.asarray(r, dtype=float)
    rh = np.fft.fftn(r)
    sines = np.meshgrid(*[np.sin(2 * np.pi * np.fft.fftfreq(s)) for s in r.shape], indexing="ij")
    symbol = -sum(s * s for s in sines)
    psi = np.zeros_like(rh)
    mask = np.abs(symbol) > 1e-12
    psi[mask] = rh[mask] / symbol[mask]
    return np.stack([np.real(np.fft.ifftn(1j * s * psi)) for s in sines])


def _quadrature_axes(phi: np.ndarray, q: QuadratureDescriptor) -> range:
    if q.dimension > phi.ndim:
        raise ConfigurationError(
            f"quadrature over {q.dimension} directions on a {phi.ndim}-dimensional field"
        )
    return range(q.dimension)


def _weight(w, phi: np.ndarray):
    # object arrays (e.g. Fractions) keep the rational weights exact
    return w if phi.dtype == object else float(w)


def quadrature_integral(phi: np.ndarray, c, q: QuadratureDescriptor) -> float:
    """Weighted sum ``sum_i w_i phi(c - xi_i)`` over the quadrature offsets.

    A d'-dimensional stencil acts on the first d' axes of the field.
    """
    _quadrature_axes(phi, q)
    n = phi.shape[0]
    total = 0
    for wi, off in zip(q.weights, q.offsets.tolist()):
        full = [-o for o in off] + [0] * (phi.ndim - q.dimension)
        total += _weight(wi, phi) * phi[neighbor(c, full, n)]
    return total


def laplacian_field(phi: np.ndarray, axes) -> np.ndarray:
    """Standard second-difference Laplacian (unit spacing) over ``axes``."""
    out = np.zeros_like(phi)
    for a in axes:
        out += _shift(phi, a, 1) + _shift(phi, a, -1)
    return out - 2 * len(axes) * phi


def quadrature_field(phi: np.ndarray, q: QuadratureDescriptor) -> np.ndarray:
    """Cell-integrated void fraction in the form ``phi + w1 * lap_h(phi)``.

    The identity form keeps a uniform field exactly unchanged in floating
    point, which the weighted-sum form does not guarantee.
    """
    axes = _quadrature_axes(phi, q)
    return phi + _weight(q.w1, phi) * laplacian_field(phi, axes)


def quadrature_field_weighted(phi: np.ndarray, q: QuadratureDescriptor) -> np.ndarray:
    """Same integral evaluated as the explicit weighted sum over offsets."""
    axes = _quadrature_axes(phi, q)
    out = _weight(q.w0, phi) * phi
    for a in axes:
        out = out + _weight(q.w1, phi) * (_shift(phi, a, -1) + _shift(phi, a, 1))
    return out


def stream(f: np.ndarray, lattice: LatticeDescriptor) -> np.ndarray:
    """Push every population one link along its velocity (periodic)."""
    out = np.empty_like(f)
    axes = tuple(range(lattice.dimension))
    for i, xi in enumerate(lattice.velocities.tolist()):
        out[i] = np.roll(f[i], tuple(xi), axis=axes)
    return out
