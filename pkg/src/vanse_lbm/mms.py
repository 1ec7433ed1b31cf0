"""Manufactured solutions: analytic void fraction, velocity and pressure.

Fields are in physical units on the 2 m periodic box. The momentum residual
of the analytic fields (the MMS force) is assembled from central finite
differences of the fields sampled at the stencil points, never from
derivatives written out by hand.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import _compiled
from .errors import ConfigurationError
from .fields import Grid

NU = 0.1  # m^2/s
RHO = 1.0  # kg/m^3
WAVE_SPEED = 0.5  # m/s
PI = np.pi

Fields = tuple[np.ndarray, tuple[np.ndarray, ...], np.ndarray]


@dataclass(frozen=True)
class MMSCase:
    """An analytic (phi, u, p) triple.

    ``fields(x, t)`` takes a tuple of ``dimension`` broadcastable coordinate
    arrays and returns ``(phi, (u_0, ..., u_{d-1}), p)``.
    """

    name: str
    dimension: int
    transient: bool
    quadrature_dims: int
    fields: Callable[[tuple, float], Fields] = field(repr=False, compare=False)
    description: str = ""

    def evaluate(self, x, t: float = 0.0) -> Fields:
        x = tuple(np.asarray(c, dtype=float) for c in x)
        if len(x) != self.dimension:
            raise ValueError(f"{self.name} needs {self.dimension} coordinates, got {len(x)}")
        phi, u, p = self.fields(x, t)
        shape = np.broadcast_shapes(*(c.shape for c in x))
        return (
            np.broadcast_to(phi, shape).astype(float),
            tuple(np.broadcast_to(c, shape).astype(float) for c in u),
            np.broadcast_to(p, shape).astype(float),
        )


def _s(x, t=0.0, speed=0.0):
    return np.sin(PI * (x - speed * t))


def _c(x):
    return np.cos(PI * x)


def _stat2d(x, t):
    X, Y = x
    sx, sy, cx, cy = _s(X), _s(Y), _c(X), _c(Y)
    phi = 0.5 + 0.4 * sx * sy
    u = (-2.0 * sx**2 * sy * cy, 2.0 * sy**2 * sx * cx)
    return phi, u, sx * sy


def _stat3d(x, t):
    X, Y, Z = x
    sx, sy, sz, cx, cy, cz = _s(X), _s(Y), _s(Z), _c(X), _c(Y), _c(Z)
    phi = 0.5 + 0.4 * sx * sy * sz
    u = (
        sx**2 * sy * cy * sz * cz,
        sy**2 * sx * cx * sz * cz,
        -2.0 * sz**2 * sx * cx * sy * cy,
    )
    return phi, u, sx * sy * sz


def _travelling(speed):
    def fields(x, t):
        prod = 1.0
        for c in x:
            prod = prod * _s(c, t, speed)
        phi = 0.5 + 0.4 * prod
        uc = 0.5 + 1.0 / phi
        return phi, (uc,) * len(x), prod

    return fields


CASES: dict[str, MMSCase] = {
    "stat2d": MMSCase("stat2d", 2, False, 2, _stat2d, "stationary, 2D"),
    "stat3d": MMSCase("stat3d", 3, False, 3, _stat3d, "stationary, 3D"),
    "tran1d": MMSCase("tran1d", 1, True, 1, _travelling(WAVE_SPEED), "travelling wave, 1D"),
    "tran2d": MMSCase("tran2d", 2, True, 2, _travelling(WAVE_SPEED), "travelling wave, 2D"),
    "tran3d": MMSCase("tran3d", 3, True, 3, _travelling(WAVE_SPEED), "travelling wave, 3D"),
}

# The 3D transient example with the void fraction frozen in time. Its fields
# never change, so it behaves as a steady problem, and its mass residual is
# not zero.
TRAN3D_AS_PRINTED = MMSCase("tran3d", 3, True, 3, _travelling(0.0), "3D, time-independent fields")


def get_case(name: str, as_printed: bool = False) -> MMSCase:
    if name not in CASES:
        raise ConfigurationError(f"unknown case {name!r}; choose from {', '.join(CASES)}")
    if as_printed and name == "tran3d":
        return TRAN3D_AS_PRINTED
    return CASES[name]


def constant_case(dimension: int, phi: float = 1.0, u=None, p: float = 0.0, name="uniform") -> MMSCase:
    """Spatially uniform fields; the MMS force and mass residual vanish."""
    u = tuple(u) if u is not None else (0.0,) * dimension

    def fields(x, t):
        return phi, u, p

    return MMSCase(name, dimension, False, dimension, fields, "uniform fields")


# -- finite-difference residuals ------------------------------------------------------------


def _shifted(x, axis, k):
    return tuple(c + k if a == axis else c for a, c in enumerate(x))


def mms_force(case: MMSCase, x, t: float, h_x: float, h_t: float, nu: float = NU, rho: float = RHO):
    """Momentum residual of the analytic fields at point(s) ``x``.

    ``d_t(phi rho u) + div(phi rho u u) + phi grad p - nu div(phi rho (grad u + grad u^T))``
    with every derivative a central difference of spacing ``h_x`` (space) or
    ``h_t`` (time). The viscous divergence nests two central differences.
    Returns an array of shape ``(d,) + broadcast shape``.
    """
    d = case.dimension
    x = tuple(np.asarray(c, dtype=float) for c in x)
    inv2h = 1.0 / (2.0 * h_x)
    ev = case.evaluate
    phi0, _, _ = ev(x, t)
    php_t, up_t, _ = ev(x, t + h_t)
    phm_t, um_t, _ = ev(x, t - h_t)

    def strain(point, a, b):
        _, u_p, _ = ev(_shifted(point, b, h_x), t)
        _, u_m, _ = ev(_shifted(point, b, -h_x), t)
        s = (u_p[a] - u_m[a]) * inv2h
        _, u_p, _ = ev(_shifted(point, a, h_x), t)
        _, u_m, _ = ev(_shifted(point, a, -h_x), t)
        return s + (u_p[b] - u_m[b]) * inv2h

    out = []
    for a in range(d):
        acc = rho * (php_t * up_t[a] - phm_t * um_t[a]) / (2.0 * h_t)
        for b in range(d):
            xp, xm = _shifted(x, b, h_x), _shifted(x, b, -h_x)
            php, up, pp = ev(xp, t)
            phm, um, pm = ev(xm, t)
            acc = acc + rho * (php * up[a] * up[b] - phm * um[a] * um[b]) * inv2h
            if a == b:
                acc = acc + phi0 * (pp - pm) * inv2h
            acc = acc - nu * rho * (php * strain(xp, a, b) - phm * strain(xm, a, b)) * inv2h
        out.append(acc)
    return np.stack(np.broadcast_arrays(*out))


def mass_residual(case: MMSCase, x, t: float, h_x: float, h_t: float, rho: float = RHO):
    """``d_t(phi rho) + div(phi rho u)`` by central differences."""
    x = tuple(np.asarray(c, dtype=float) for c in x)
    php, _, _ = case.evaluate(x, t + h_t)
    phm, _, _ = case.evaluate(x, t - h_t)
    res = rho * (php - phm) / (2.0 * h_t)
    for b in range(case.dimension):
        pp, up, _ = case.evaluate(_shifted(x, b, h_x), t)
        pm, um, _ = case.evaluate(_shifted(x, b, -h_x), t)
        res = res + rho * (pp * up[b] - pm * um[b]) / (2.0 * h_x)
    return res


class GridForcing:
    """MMS force on the nodes of a grid, with the spatial spacing equal to dx.

    Neighbouring stencil points are grid nodes, so the fields are evaluated
    once per time level and shifted. Time levels are integer multiples of
    ``h_t``; the last three are cached, so stepping forward costs one new
    evaluation per step.
    """

    def __init__(self, case: MMSCase, grid: Grid, h_t: float, nu: float = NU, rho: float = RHO):
        if case.dimension != grid.dimension:
            raise ConfigurationError("case and grid dimensions differ")
        self.case = case
        self.grid = grid
        self.h_t = h_t
        self.nu = nu
        self.rho = rho
        d = grid.dimension
        self.shape3 = (1,) * (3 - d) + grid.shape
        self._axes = np.zeros(3, dtype=np.int64)
        self._axes[3 - d :] = 1
        self._coords = grid.axes()
        self._cache: dict[int, tuple] = {}
        self._D = np.zeros((3, 3) + self.shape3)
        self._tmp = np.empty(self.shape3)
        self._dtmp = np.empty(self.shape3)

    def _level(self, k: int):
        hit = self._cache.get(k)
        if hit is not None:
            return hit
        d = self.grid.dimension
        phi, u, p = self.case.evaluate(self._coords, k * self.h_t)
        u3 = np.zeros((3,) + self.shape3)
        for a in range(d):
            u3[3 - d + a] = u[a].reshape(self.shape3)
        level = (phi.reshape(self.shape3).copy(), u3, p.reshape(self.shape3).copy())
        if len(self._cache) >= 3:
            self._cache.pop(min(self._cache))
        self._cache[k] = level
        return level

    def fields(self, k: int) -> Fields:
        """Analytic fields at time level ``k`` (time ``k * h_t``) on the grid."""
        d = self.grid.dimension
        phi, u3, p = self._level(k)
        shape = self.grid.shape
        return phi.reshape(shape), tuple(u3[3 - d + a].reshape(shape) for a in range(d)), p.reshape(shape)

    def force(self, k: int) -> np.ndarray:
        """Force density (physical units) at time level ``k``, shape ``(d,) + grid shape``."""
        d = self.grid.dimension
        phi, u3, p = self._level(k)
        if self.case.transient:
            phm, um, _ = self._level(k - 1)
            php, up, _ = self._level(k + 1)
            dtphiu = (php * up - phm * um) / (2.0 * self.h_t)
        else:
            dtphiu = np.zeros_like(u3)
        h = self.grid.dx
        out = np.empty_like(u3)
        _compiled.momentum_residual(
            phi, u3, p, dtphiu, self._axes, h, self.nu, self.rho, self._D, self._tmp, self._dtmp, out
        )
        return out[3 - d :].reshape((d,) + self.grid.shape)


# -- tabulated fields -------------------------------------------------------------------------

_AXIS_NAMES = "xyz"


def write_tabulated(path, case: MMSCase, grid: Grid, times) -> Path:
    """Sample a case on the nodes of ``grid`` at ``times`` into a CSV table."""
    path = Path(path)
    d = grid.dimension
    idx = np.indices(grid.shape).reshape(d, -1).T
    with path.open("w", newline="") as fh:
        fh.write(f"# dimension={d} n={grid.n} length={grid.length!r} quadrature_dims={case.quadrature_dims}\n")
        w = csv.writer(fh)
        w.writerow(["t"] + [f"i{_AXIS_NAMES[a]}" for a in range(d)] + ["phi"]
                   + [f"u{_AXIS_NAMES[a]}" for a in range(d)] + ["p"])
        for t in times:
            phi, u, p = case.evaluate(grid.axes(), t)
            for c in idx:
                c = tuple(c)
                w.writerow([repr(float(t))] + list(c) + [repr(float(phi[c]))]
                           + [repr(float(u[a][c])) for a in range(d)] + [repr(float(p[c]))])
    return path


def load_tabulated(path, name: str | None = None) -> MMSCase:
    """Case backed by per-node samples; linear in time, nodes only in space.

    File layout: one ``# key=value ...`` header line (``dimension``, ``n``,
    optional ``length`` and ``quadrature_dims``), a CSV header row
    ``t, ix[, iy[, iz]], phi, ux[, uy[, uz]], p`` and one row per node and
    time level.
    """
    path = Path(path)
    with path.open() as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise ConfigurationError(f"{path}: missing '# dimension=... n=...' header line")
        meta = dict(tok.split("=", 1) for tok in first[1:].split())
        d, n = int(meta["dimension"]), int(meta["n"])
        length = float(meta.get("length", 2.0))
        qdims = int(meta.get("quadrature_dims", d))
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    times = np.unique(data[:, 0])
    nt = len(times)
    if data.shape[0] != nt * n**d:
        raise ConfigurationError(f"{path}: expected {nt * n**d} rows, found {data.shape[0]}")
    tab = np.empty((nt, d + 2) + (n,) * d)
    ti = np.searchsorted(times, data[:, 0])
    cells = tuple(data[:, 1 + a].astype(int) for a in range(d))
    for k in range(d + 2):
        tab[(ti, k) + cells] = data[:, 1 + d + k]
    dx = length / n

    def fields(x, t):
        idx = []
        for c in x:
            r = c / dx
            k = np.rint(r)
            if np.any(np.abs(r - k) > 1e-6):
                raise ValueError("tabulated fields are only defined on grid nodes")
            idx.append(k.astype(int) % n)
        j = np.searchsorted(times, t)
        if nt == 1 or t <= times[0]:
            snap = tab[0]
        elif j >= nt:
            snap = tab[-1]
        else:
            s = (t - times[j - 1]) / (times[j] - times[j - 1])
            snap = (1 - s) * tab[j - 1] + s * tab[j]
        idx = tuple(np.broadcast_arrays(*idx))
        vals = [snap[(k,) + idx] for k in range(d + 2)]
        return vals[0], tuple(vals[1 : 1 + d]), vals[1 + d]

    return MMSCase(name or path.stem, d, nt > 1, qdims, fields, f"tabulated from {path.name}")
