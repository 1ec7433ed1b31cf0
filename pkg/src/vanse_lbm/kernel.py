"""Lattice Boltzmann scheme for the volume averaged Navier-Stokes equations.

Populations carry the effective density: their zeroth moment ``m0`` is the
fluid density times the void fraction integrated over the cell. The
integral is a quadrature over the axis neighbours, so the density follows as
``rho = m0 / Phi`` with ``Phi = phi + w1 * lap_h(phi)``. Collision is BGK
with Guo forcing; the total force always contains the pressure correction
``rho * cs2 * grad_h(phi)``.

Two code paths implement the step. The functions at module level operate on
plain numpy arrays and follow the formulas term by term; :class:`Stepper`
runs the same arithmetic through compiled loops and is what the driver
uses. Both keep all quantities in lattice units (dx = dt = 1).
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _compiled
from .errors import ConfigurationError, NumericalBreakdown
from .fields import Grid, PopulationField, central_gradient_field, quadrature_field, quadrature_integral
from .lattice import LatticeDescriptor, make_quadrature

log = logging.getLogger(__name__)

VARIANTS = ("consistent", "legacy")
LOW_VOID_FRACTION = 0.01


@dataclass(frozen=True)
class SchemeConfig:
    tau: float
    variant: str = "consistent"
    quadrature_dims: int = 2
    dt: float = 1.0

    def __post_init__(self):
        if not self.tau > 0.5:
            raise ConfigurationError(f"relaxation time must exceed 1/2, got {self.tau}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown scheme variant {self.variant!r}")
        make_quadrature(self.quadrature_dims)

    @property
    def viscosity(self) -> float:
        """Lattice kinematic viscosity ``(tau - dt/2) cs2``."""
        return (self.tau - self.dt / 2) / 3.0

    @property
    def forcing_prefactor(self) -> float:
        return 1.0 - self.dt / (2.0 * self.tau)


def _cu(lat: LatticeDescriptor, i: int, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = 0.0
    for a, c in enumerate(lat.velocities[i].tolist()):
        out = out + c * u[a]
    return out


def equilibrium(i: int, m0, u, lat: LatticeDescriptor):
    """Second-order truncated equilibrium of direction ``i`` with zeroth moment ``m0``.

    ``u`` has a leading component axis; ``m0`` broadcasts against ``u[0]``.
    """
    cs2 = lat.cs2_float
    u = np.asarray(u, dtype=float)
    cu = _cu(lat, i, u)
    uu = sum(u[a] * u[a] for a in range(lat.dimension))
    return lat.w[i] * m0 * (1.0 + cu * (1.0 / cs2) + (cu * cu - cs2 * uu) * (0.5 / (cs2 * cs2)))


def equilibrium_all(m0, u, lat: LatticeDescriptor) -> np.ndarray:
    return np.stack([np.asarray(equilibrium(i, m0, u, lat), dtype=float) for i in range(lat.Q)])


def guo_forcing_term(i: int, u, F, cfg: SchemeConfig, lat: LatticeDescriptor):
    """Guo source term of direction ``i`` for velocity ``u`` and total force ``F``."""
    cs2 = lat.cs2_float
    u = np.asarray(u, dtype=float)
    F = np.asarray(F, dtype=float)
    cu = _cu(lat, i, u)
    cF = _cu(lat, i, F)
    uF = sum(u[a] * F[a] for a in range(lat.dimension))
    return cfg.forcing_prefactor * lat.w[i] * (cF * (1.0 / cs2) + (cu * cF - cs2 * uF) * (1.0 / (cs2 * cs2)))


def guo_forcing_all(u, F, cfg: SchemeConfig, lat: LatticeDescriptor) -> np.ndarray:
    return np.stack([np.asarray(guo_forcing_term(i, u, F, cfg, lat), dtype=float) for i in range(lat.Q)])


def pressure_correction_force(rho, grad_phi, cs2: float = 1.0 / 3.0) -> np.ndarray:
    """``rho * cs2 * grad(phi)``: turns grad(phi p) into phi grad(p)."""
    return rho * cs2 * np.asarray(grad_phi, dtype=float)


def cell_void_integral(phi: np.ndarray, c, cfg: SchemeConfig) -> float:
    """Void fraction integrated over cell ``c``; the legacy variant keeps the local value."""
    if cfg.variant == "legacy":
        return float(phi[tuple(c)])
    return quadrature_integral(phi, c, make_quadrature(cfg.quadrature_dims))


def void_fraction_field(phi: np.ndarray, cfg: SchemeConfig) -> np.ndarray:
    if cfg.variant == "legacy":
        return np.array(phi, dtype=float)
    return quadrature_field(phi, make_quadrature(cfg.quadrature_dims))


def macro_from_populations(f, Phi, F, lat: LatticeDescriptor, cfg: SchemeConfig, *, step=None, cell=None):
    """Effective density ``sum f / Phi`` and the force-shifted velocity.

    Works on a single cell (``f`` of shape ``(Q,)``) or whole fields
    (``(Q,) + shape``); the moments are summed in direction order.
    """
    f = np.asarray(f, dtype=float)
    m0 = f[0].copy()
    for i in range(1, lat.Q):
        m0 = m0 + f[i]
    Phi = np.asarray(Phi, dtype=float)
    bad = ~((m0 > 0) & np.isfinite(m0)) | ~(Phi > 0)
    if np.any(bad):
        where = cell
        if where is None and np.ndim(bad):
            where = tuple(int(k) for k in np.argwhere(bad)[0])
        raise NumericalBreakdown("non-positive or non-finite zeroth moment", step=step, cell=where)
    F = np.asarray(F, dtype=float)
    u = []
    for a in range(lat.dimension):
        j = 0.0
        for i in range(lat.Q):
            j = j + lat.velocities[i, a] * f[i]
        u.append((j + cfg.dt / 2 * F[a]) / m0)
    return m0 / Phi, np.stack(u)


def equilibrium_moments(m0, u, lat: LatticeDescriptor):
    """Closed-form moments of the discrete equilibrium, orders 0 to 3.

    The third moment is the diagonal form ``m0 u_a`` on ``a == b == c`` and
    zero elsewhere; see :func:`equilibrium_third_moment_full` for the tensor
    the truncated equilibrium actually carries.
    """
    d = lat.dimension
    u = np.asarray(u, dtype=float)
    M0 = m0
    M1 = m0 * u
    M2 = m0 * np.outer(u, u) + m0 * lat.cs2_float * np.eye(d)
    M3 = np.zeros((d, d, d))
    for a in range(d):
        M3[a, a, a] = m0 * u[a]
    return M0, M1, M2, M3


def equilibrium_third_moment_full(m0, u, lat: LatticeDescriptor) -> np.ndarray:
    d = lat.dimension
    u = np.asarray(u, dtype=float)
    eye = np.eye(d)
    return m0 * lat.cs2_float * (
        np.einsum("a,bc->abc", u, eye) + np.einsum("b,ac->abc", u, eye) + np.einsum("c,ab->abc", u, eye)
    )


def summed_moments(f: np.ndarray, lat: LatticeDescriptor):
    """Moments of a population vector by direct summation over directions."""
    xi = lat.velocities.astype(float)
    M0 = sum(f[i] for i in range(lat.Q))
    M1 = sum(f[i] * xi[i] for i in range(lat.Q))
    M2 = sum(f[i] * np.outer(xi[i], xi[i]) for i in range(lat.Q))
    M3 = sum(f[i] * np.einsum("a,b,c->abc", xi[i], xi[i], xi[i]) for i in range(lat.Q))
    return M0, M1, M2, M3


def check_void_fraction(phi: np.ndarray) -> None:
    phi = np.asarray(phi)
    if not np.all(phi > 0):
        raise ConfigurationError("void fraction must be positive everywhere")
    if np.any(phi < LOW_VOID_FRACTION):
        log.warning("void fraction below %g in %d cells", LOW_VOID_FRACTION, int(np.sum(phi < LOW_VOID_FRACTION)))


def initialize(phi, u, lat: LatticeDescriptor, rho=1.0) -> np.ndarray:
    """Equilibrium populations seeded with the local ``rho * phi``."""
    check_void_fraction(phi)
    return equilibrium_all(rho * np.asarray(phi, dtype=float), u, lat)


def collide_and_stream(
    pop: PopulationField, phi: np.ndarray, fext: np.ndarray, cfg: SchemeConfig, step: int | None = None
) -> PopulationField:
    """Reference step: macroscopic moments, collision with forcing, streaming, swap.

    ``fext`` is the external force density in lattice units, shape ``(d,) + shape``.
    """
    lat = pop.lattice
    f = pop.current
    Phi = void_fraction_field(phi, cfg)
    grad = central_gradient_field(phi)
    m0 = f[0].copy()
    for i in range(1, lat.Q):
        m0 = m0 + f[i]
    if not np.all((m0 > 0) & np.isfinite(m0)):
        raise NumericalBreakdown(
            "non-positive or non-finite zeroth moment", step=step,
            cell=tuple(int(k) for k in np.argwhere(~((m0 > 0) & np.isfinite(m0)))[0]),
        )
    rho = m0 / Phi
    F = np.asarray(fext, dtype=float) + pressure_correction_force(rho, grad, lat.cs2_float)
    _, u = macro_from_populations(f, Phi, F, lat, cfg, step=step)
    post = f + (1.0 / cfg.tau) * (equilibrium_all(m0, u, lat) - f) + guo_forcing_all(u, F, cfg, lat)
    if not np.all(np.isfinite(post)):
        raise NumericalBreakdown("non-finite population after collision", step=step)
    axes = tuple(range(lat.dimension))
    for i, xi in enumerate(lat.velocities.tolist()):
        pop.next[i] = np.roll(post[i], tuple(xi), axis=axes)
    pop.swap()
    return pop


# -- compiled path ---------------------------------------------------------------------------


def pad_scalar(a: np.ndarray, d: int) -> np.ndarray:
    return a.reshape((1,) * (3 - d) + a.shape)


def pad_vector(v: np.ndarray, d: int) -> np.ndarray:
    """``(d,) + shape`` -> ``(3,) + padded shape`` with zero leading components."""
    shape = v.shape[1:]
    out = np.zeros((3,) + (1,) * (3 - d) + shape)
    out[3 - d :] = v.reshape((d,) + (1,) * (3 - d) + shape)
    return out


def unpad_vector(v: np.ndarray, d: int) -> np.ndarray:
    return v[3 - d :].reshape((d,) + v.shape[1 + 3 - d :])


class Stepper:
    """Compiled time stepper holding populations and per-step void-fraction data.

    ``workers > 1`` splits each sweep into slabs along the outermost padded
    axis and runs them on a thread pool; every cell is computed identically
    either way.
    """

    def __init__(self, lattice: LatticeDescriptor, grid: Grid, cfg: SchemeConfig, workers: int = 1):
        if cfg.dt != 1.0:
            raise ConfigurationError("the compiled stepper works in lattice units (dt = 1)")
        if cfg.quadrature_dims > grid.dimension:
            raise ConfigurationError("quadrature dimension exceeds grid dimension")
        self.lattice = lattice
        self.grid = grid
        self.cfg = cfg
        d = grid.dimension
        self.d = d
        self.shape3 = (1,) * (3 - d) + grid.shape
        q = make_quadrature(cfg.quadrature_dims)
        self._w1 = float(q.w1) if cfg.variant == "consistent" else 0.0
        self._qaxes = np.zeros(3, dtype=np.int64)
        if cfg.variant == "consistent":
            self._qaxes[3 - d : 3 - d + cfg.quadrature_dims] = 1
        self._gaxes = np.zeros(3, dtype=np.int64)
        self._gaxes[3 - d :] = 1
        self._cvec = np.zeros((3, lattice.Q), dtype=np.int64)
        self._cvec[3 - d :] = lattice.velocities.T
        self._w = np.ascontiguousarray(lattice.w, dtype=np.float64)
        self.f = np.zeros((lattice.Q,) + self.shape3)
        self.fn = np.empty_like(self.f)
        self.phi = np.ones(self.shape3)
        self.Phi = np.ones(self.shape3)
        self.grad = np.zeros((3,) + self.shape3)
        self.fext = np.zeros((3,) + self.shape3)
        self.step_count = 0
        self.workers = max(1, int(workers))
        nx = self.shape3[0]
        bounds = np.linspace(0, nx, min(self.workers, nx) + 1).astype(int)
        self._slabs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        self._pool = ThreadPoolExecutor(self.workers) if len(self._slabs) > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def _sweep(self, fn, *args):
        if self._pool is None:
            return [fn(*args, 0, self.shape3[0])]
        futures = [self._pool.submit(fn, *args, a, b) for a, b in self._slabs]
        return [fut.result() for fut in futures]

    # state ---------------------------------------------------------------------------------

    def set_populations(self, f: np.ndarray) -> None:
        self.f[...] = f.reshape((self.lattice.Q,) + self.shape3)

    def populations(self) -> np.ndarray:
        return self.f.reshape((self.lattice.Q,) + self.grid.shape).copy()

    def set_void_fraction(self, phi: np.ndarray) -> None:
        self.phi[...] = pad_scalar(np.asarray(phi, dtype=float), self.d)
        self._sweep(_compiled.void_terms, self.phi, self._w1, self._qaxes, self._gaxes, self.Phi, self.grad)

    def set_external_force(self, fext: np.ndarray) -> None:
        """External force density in lattice units, shape ``(d,) + shape``."""
        self.fext[3 - self.d :] = np.asarray(fext, dtype=float).reshape((self.d,) + self.shape3)

    def step(self) -> None:
        bad = self._sweep(
            _compiled.collide_stream, self.f, self.fn, self.Phi, self.grad, self.fext,
            float(self.cfg.tau), self._cvec, self._w, self.lattice.cs2_float,
        )
        bad = [b for b in bad if b >= 0]
        if bad:
            cell = np.unravel_index(min(bad), self.shape3)[3 - self.d :]
            raise NumericalBreakdown(
                "non-positive or non-finite zeroth moment", step=self.step_count,
                cell=tuple(int(k) for k in cell),
            )
        self.f, self.fn = self.fn, self.f
        self.step_count += 1

    def set_consistent_state(self, rho, u, non_equilibrium: bool = True) -> None:
        """Populations whose measured moments are ``rho`` and ``u``.

        Uses the loaded void fraction and force: ``m0 = rho * Phi`` and the
        equilibrium is built with ``u - F / (2 m0)`` so that
        ``(j + F/2) / m0 = u``. With ``non_equilibrium`` the second moment
        also carries the first-order Chapman-Enskog stress,
        ``-tau cs2 (grad(m0 u) + grad(m0 u)^T) - F F / (4 m0)`` relative to the
        shifted equilibrium; without it, the missing stress launches
        pressure waves whose physical amplitude does not shrink with the
        grid. Call after :meth:`set_void_fraction` and
        :meth:`set_external_force`.
        """
        lat = self.lattice
        d = self.d
        shape = self.grid.shape
        rho = np.broadcast_to(np.asarray(rho, dtype=float), shape)
        u = np.asarray(u, dtype=float)
        Phi = self.Phi.reshape(shape)
        m0 = rho * Phi
        F = unpad_vector(self.fext, d) + pressure_correction_force(
            rho, unpad_vector(self.grad, d), lat.cs2_float
        )
        v = u - 0.5 * F / m0
        f = equilibrium_all(m0, v, lat)
        if non_equilibrium:
            cs2 = lat.cs2_float
            gm = np.stack([central_gradient_field(m0 * u[b]) for b in range(d)], axis=1)  # [a, b] = d_b (m0 u_a)
            xi = lat.velocities.astype(float)
            for i in range(lat.Q):
                qpi = 0.0
                for a in range(d):
                    for b in range(d):
                        qab = xi[i, a] * xi[i, b] - (cs2 if a == b else 0.0)
                        if qab == 0.0:
                            continue
                        S = gm[a, b] + gm[b, a]
                        qpi = qpi + qab * (-self.cfg.tau * cs2 * S - F[a] * F[b] / (4.0 * m0))
                f[i] = f[i] + lat.w[i] / (2.0 * cs2 * cs2) * qpi
        self.set_populations(f)

    # diagnostics ---------------------------------------------------------------------------

    def total_mass(self) -> float:
        return math.fsum(self.f.ravel())

    def macroscopic(self):
        """Effective density and velocity (lattice units) of the current state."""
        f = self.populations()
        Phi = self.Phi.reshape(self.grid.shape)
        grad = unpad_vector(self.grad, self.d)
        fext = unpad_vector(self.fext, self.d)
        m0 = f[0].copy()
        for i in range(1, self.lattice.Q):
            m0 = m0 + f[i]
        rho = m0 / Phi
        F = fext + pressure_correction_force(rho, grad, self.lattice.cs2_float)
        return macro_from_populations(f, Phi, F, self.lattice, self.cfg, step=self.step_count)
