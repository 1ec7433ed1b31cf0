"""Run driver: one resolution (:func:`run_single`) or a refinement study (:func:`run_convergence`)."""
from __future__ import annotations

import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..analysis import (
    CS2,
    ConvergenceTable,
    ErrorReport,
    make_converter,
    error_norms,
    reports_to_csv,
    steady_detector,
)
from ..errors import ConfigurationError, NumericalBreakdown
from ..fields import Grid, gradient_potential_for_divergence
from ..io import write_snapshot_csv, write_vtk
from ..kernel import SchemeConfig, Stepper, check_void_fraction, initialize, void_fraction_field
from ..lattice import make_lattice
from ..mms import NU, RHO, GridForcing, MMSCase, get_case, load_tabulated

log = logging.getLogger(__name__)

TAU_STATIONARY = 0.53
TAU_TRANSIENT = 0.5075
INIT_MODES = ("prepared", "consistent", "local")
DEFAULT_RESOLUTIONS = {1: (32, 64, 128, 256), 2: (16, 32, 64, 128), 3: (8, 16, 32)}


@dataclass
class RunConfig:
    case: str = "stat2d"
    n: int = 32
    resolutions: tuple[int, ...] | None = None
    tau: float | None = None
    scheme: str = "consistent"
    quadrature_dims: int | None = None
    as_printed: bool = False
    tabulated: str | None = None
    out: str | None = None
    snapshots: int = 0
    snapshot_format: str = "csv"
    workers: int = 1
    parallel: bool = False
    steady_window: int = 1000
    steady_tol: float = 1e-6
    max_time: float = 10.0
    t_end: float = 4.0
    log_every: int = 1000
    init: str = "prepared"
    init_pressure: bool = True

    def __post_init__(self):
        if self.resolutions is not None:
            self.resolutions = tuple(int(r) for r in self.resolutions)
            if any(b <= a for a, b in zip(self.resolutions, self.resolutions[1:])):
                raise ConfigurationError(f"resolutions must be strictly increasing: {list(self.resolutions)}")
        if self.snapshot_format not in ("csv", "vtk", "both"):
            raise ConfigurationError(f"unknown snapshot format {self.snapshot_format!r}")
        if self.workers == 0:
            self.workers = os.cpu_count() or 1
        if self.workers < 0:
            raise ConfigurationError("workers must be positive (0 means all cores)")
        if self.init not in INIT_MODES:
            raise ConfigurationError(f"unknown initialisation {self.init!r}")
        if self.steady_window < self.log_every:
            raise ConfigurationError("steady window must span at least one logging interval")

    def load_case(self) -> MMSCase:
        if self.tabulated:
            return load_tabulated(self.tabulated)
        return get_case(self.case, self.as_printed)

    def effective_tau(self, case: MMSCase) -> float:
        if self.tau is not None:
            return float(self.tau)
        return TAU_TRANSIENT if case.transient else TAU_STATIONARY

    def manifest(self) -> dict:
        return dataclasses.asdict(self)


class Simulation:
    """One case at one resolution, stepped in lattice units and reported in physical units."""

    def __init__(self, cfg: RunConfig, n: int | None = None, case: MMSCase | None = None):
        self.cfg = cfg
        self.case = case or cfg.load_case()
        self.n = int(n if n is not None else cfg.n)
        d = self.case.dimension
        self.tau = cfg.effective_tau(self.case)
        self.grid = Grid(d, self.n)
        self.lattice = make_lattice(d)
        self.units = make_converter(self.n, self.tau, NU, self.grid.length, RHO)
        qdims = cfg.quadrature_dims or self.case.quadrature_dims
        self.scheme = SchemeConfig(self.tau, cfg.scheme, qdims)
        self.forcing = GridForcing(self.case, self.grid, self.units.dt)
        self.stepper = Stepper(self.lattice, self.grid, self.scheme, cfg.workers)
        self.step = 0
        self.history: list[tuple[float, ...]] = []

    @property
    def time(self) -> float:
        return self.step * self.units.dt

    def _load_level(self, k: int) -> None:
        phi = self.forcing.fields(k)[0]
        check_void_fraction(phi)
        self.stepper.set_void_fraction(phi)
        self.stepper.set_external_force(self.units.to_lattice(self.forcing.force(k), "force"))

    def _lattice_state(self, k: int):
        """Analytic density, effective mass and lattice velocity at time level ``k``."""
        phi, u, p = self.forcing.fields(k)
        rho = np.ones_like(phi)
        if self.cfg.init_pressure:
            rho = 1.0 + self.units.to_lattice(p - p.mean(), "pressure") / CS2
        m0 = rho * void_fraction_field(phi, self.scheme)
        return rho, m0, self.units.to_lattice(np.stack(u), "velocity")

    def _divergence_correction(self, rho, m0, u):
        """Velocity change that makes the first step's mass change match the analytic one.

        The lattice mass balance differs from the analytic one by a term of
        second order in dx; under diffusive scaling that is an O(1) pressure
        rate, which a plain start releases as pressure waves. One trial step
        measures the mismatch and a potential flow removes it.
        """
        st = self.stepper
        saved = st.populations()
        st.step()
        m1 = st.populations().sum(axis=0)
        st.set_populations(saved)
        st.step_count = 0
        target = self._lattice_state(1)[1] - m0
        r = target - (m1 - m0)
        r -= r.mean()
        # d(m0)/dt = -div(m0 du)
        return -gradient_potential_for_divergence(r) / m0

    def initialize(self) -> None:
        phi = self.forcing.fields(0)[0]
        rho, m0, u_lat = self._lattice_state(0)
        self._load_level(0)
        if self.cfg.init == "local":
            self.stepper.set_populations(initialize(phi, u_lat, self.lattice, rho))
        else:
            self.stepper.set_consistent_state(rho, u_lat)
            if self.cfg.init == "prepared":
                u_lat = u_lat + self._divergence_correction(rho, m0, u_lat)
                self.stepper.set_consistent_state(rho, u_lat)
        self.step = 0

    def advance(self, nsteps: int) -> None:
        transient = self.case.transient
        for _ in range(nsteps):
            try:
                self.stepper.step()
            except NumericalBreakdown as exc:
                exc.step = self.step
                raise
            self.step += 1
            if transient:
                self._load_level(self.step)

    def state(self):
        """Void fraction, effective density, velocity and zero-mean pressure (physical units)."""
        phi = self.forcing.fields(self.step)[0]
        rho, u = self.stepper.macroscopic()
        u_phys = self.units.to_physical(u, "velocity")
        # rho - 1 is exact near 1; the exact mean keeps uniform states at zero pressure
        dev = rho - 1.0
        p_phys = self.units.to_physical(CS2 * (dev - math.fsum(dev.ravel()) / dev.size), "pressure")
        return phi, rho, u_phys, p_phys

    def exact(self):
        _, u, p = self.forcing.fields(self.step)
        return np.stack(u), p - p.mean()

    def errors(self) -> dict[str, tuple[float, float, float]]:
        _, _, u, p = self.state()
        u_ex, p_ex = self.exact()
        return {"velocity": error_norms(u, u_ex, vector=True), "pressure": error_norms(p, p_ex)}

    def snapshot(self, out: Path) -> None:
        phi, rho, u, p = self.state()
        fmt = self.cfg.snapshot_format
        if fmt in ("csv", "both"):
            coords = self.grid.coordinates()
            write_snapshot_csv(out / f"snapshot_{self.step}.csv", coords, phi, rho, u, p, exact=self.exact())
        if fmt in ("vtk", "both"):
            write_vtk(out / f"snapshot_{self.step}.vtk", self.grid.dx, phi, rho, u, p,
                      title=f"{self.case.name} n={self.n} t={self.time!r}")

    def _record(self) -> dict:
        errs = self.errors()
        self.history.append(tuple(errs["velocity"]) + tuple(errs["pressure"]))
        log.info(
            "%s n=%d step=%d t=%.4g  u L2=%.4e  p L2=%.4e",
            self.case.name, self.n, self.step, self.time, errs["velocity"][1], errs["pressure"][1],
        )
        return errs

    def run(self, out: Path | None = None) -> ErrorReport:
        """Initialise, step to the termination rule and report the final errors.

        Stationary cases stop once the error norms are steady (or at
        ``max_time``); transient cases stop at ``t_end``.
        """
        cfg = self.cfg
        self.initialize()
        every = cfg.log_every
        snap = cfg.snapshots if out is not None else 0
        if snap:
            self.snapshot(out)
        if self.case.transient:
            target = int(round(cfg.t_end / self.units.dt))
        else:
            target = int(math.ceil(cfg.max_time / self.units.dt - 1e-9))
        window = cfg.steady_window // every + 1
        steady = False
        while self.step < target:
            chunk = min(every - self.step % every, target - self.step)
            if snap:
                chunk = min(chunk, snap - self.step % snap)
            self.advance(chunk)
            if snap and self.step % snap == 0:
                self.snapshot(out)
            if self.step % every == 0 or self.step == target:
                self._record()
                if not self.case.transient and steady_detector(self.history, window, cfg.steady_tol):
                    steady = True
                    break
        errs = self.errors()
        return ErrorReport(self.case.name, self.n, self.time, errs, self.step, "ok", steady)

    def close(self):
        self.stepper.close()


def _run_one(cfg: RunConfig, n: int, out: Path | None) -> ErrorReport:
    sim = Simulation(cfg, n)
    try:
        return sim.run(out)
    finally:
        sim.close()


def write_manifest(path: Path, cfg: RunConfig, reports, extra=None) -> None:
    lines = [f"vanse_lbm {__version__}"]
    for k, v in cfg.manifest().items():
        lines.append(f"{k} = {v}")
    for r in reports:
        lines.append(
            f"result n={r.n} status={r.status} steps={r.steps} t_final={r.time!r} "
            f"steady={r.steady}"
        )
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    path.write_text("\n".join(lines) + "\n")


def _prepare_out(cfg: RunConfig) -> Path | None:
    if cfg.out is None:
        return None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise ConfigurationError(f"output directory {out} is not writable")
    return out


def run_single(cfg: RunConfig) -> ErrorReport:
    out = _prepare_out(cfg)
    case = cfg.load_case()
    if cfg.tabulated:
        cfg.case = case.name
    t0 = time.perf_counter()
    sim = Simulation(cfg, cfg.n, case)
    try:
        report = sim.run(out)
    finally:
        sim.close()
    if out is not None:
        (out / "errors.csv").write_text(reports_to_csv([report]))
        write_manifest(out / "manifest.txt", cfg, [report], {
            "tau_effective": sim.tau, "dx": sim.units.dx, "dt": sim.units.dt,
            "quadrature_dims": sim.scheme.quadrature_dims,
            "wall_seconds": round(time.perf_counter() - t0, 3),
        })
    return report


def run_convergence(cfg: RunConfig) -> ConvergenceTable:
    """Run every resolution with the same relaxation time and tabulate pairwise EOCs.

    A resolution that breaks down numerically is kept as a failed row.
    """
    out = _prepare_out(cfg)
    case = cfg.load_case()
    ns = cfg.resolutions or DEFAULT_RESOLUTIONS[case.dimension]
    if len(ns) < 3:
        raise ConfigurationError("a convergence study needs at least three resolutions")
    ConvergenceTable(case.name, [ErrorReport(case.name, n, 0.0) for n in ns])  # validates ordering
    t0 = time.perf_counter()
    reports = []
    if cfg.parallel:
        with ProcessPoolExecutor() as pool:
            futures = [pool.submit(_run_one, cfg, n, None) for n in ns]
            outcomes = []
            for n, fut in zip(ns, futures):
                try:
                    outcomes.append(fut.result())
                except NumericalBreakdown as exc:
                    outcomes.append(exc)
    else:
        outcomes = []
        for n in ns:
            try:
                outcomes.append(_run_one(cfg, n, None))
            except NumericalBreakdown as exc:
                outcomes.append(exc)
    for n, res in zip(ns, outcomes):
        if isinstance(res, NumericalBreakdown):
            log.error("%s n=%d failed: %s", case.name, n, res)
            r = ErrorReport(case.name, n, math.nan, {}, res.step or 0, status="breakdown")
            reports.append(r)
        else:
            reports.append(res)
    table = ConvergenceTable(case.name, reports)
    if out is not None:
        (out / "errors.csv").write_text(reports_to_csv(reports))
        (out / "convergence.csv").write_text(table.to_csv())
        write_manifest(out / "manifest.txt", cfg, reports, {
            "resolutions": ",".join(map(str, ns)),
            "wall_seconds": round(time.perf_counter() - t0, 3),
        })
    return table
