"""Error norms, convergence orders, steady-state detection and unit conversion."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

CS2 = 1.0 / 3.0
NORMS = ("L1", "L2", "Linf")
QUANTITIES = ("velocity", "pressure")


@dataclass(frozen=True)
class UnitConverter:
    """Conversion between physical and lattice units (lattice dx = dt = 1)."""

    dx: float
    dt: float
    rho: float = 1.0

    @property
    def velocity(self) -> float:
        return self.dx / self.dt

    @property
    def viscosity(self) -> float:
        return self.dx**2 / self.dt

    @property
    def pressure(self) -> float:
        return self.rho * self.velocity**2

    @property
    def force(self) -> float:
        """Force density: kg m^-2 s^-2 per lattice unit."""
        return self.rho * self.dx / self.dt**2

    def to_lattice(self, value, kind: str):
        return value / getattr(self, kind)

    def to_physical(self, value, kind: str):
        return value * getattr(self, kind)

    def physical_viscosity(self, tau: float) -> float:
        return (tau - 0.5) * CS2 * self.viscosity


def make_converter(n: int, tau: float, nu: float = 0.1, length: float = 2.0, rho: float = 1.0) -> UnitConverter:
    """Diffusive scaling: ``dt = (tau - 1/2) cs2 dx^2 / nu`` with ``dx = length / n``."""
    if n < 4:
        raise ConfigurationError(f"resolution must be at least 4, got {n}")
    if not tau > 0.5:
        raise ConfigurationError(f"relaxation time must exceed 1/2, got {tau}")
    dx = length / n
    return UnitConverter(dx, (tau - 0.5) * CS2 * dx * dx / nu, rho)


def error_norms(sim, exact, vector: bool = False) -> tuple[float, float, float]:
    """Mean, root-mean-square and maximum nodal deviation.

    With ``vector=True`` the arrays carry a leading component axis and the
    nodal deviation is the Euclidean norm over components.
    """
    sim = np.asarray(sim, dtype=float)
    exact = np.asarray(exact, dtype=float)
    if sim.shape != exact.shape:
        raise ValueError(f"shape mismatch: {sim.shape} vs {exact.shape}")
    if vector:
        return _norms(np.sqrt(np.sum((sim - exact) ** 2, axis=0)))
    return _norms(np.abs(sim - exact))


def _norms(dev: np.ndarray) -> tuple[float, float, float]:
    dev = dev.ravel()
    n = dev.size
    top = float(dev.max())
    if top == 0.0 or not math.isfinite(top):
        return math.fsum(dev) / n, math.sqrt(math.fsum(dev * dev) / n), top
    # scaled so that squaring neither underflows nor overflows
    r = dev / top
    return math.fsum(dev) / n, top * math.sqrt(math.fsum(r * r) / n), top


def eoc(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    """Experimental order of convergence; NaN when either error is not positive."""
    if not (e_coarse > 0 and e_fine > 0) or not ratio > 1:
        return math.nan
    return math.log(e_coarse / e_fine) / math.log(ratio)


def steady_detector(history, window: int, tol: float) -> bool:
    """True once every tracked series changed by at most ``tol`` (relative) over the last ``window`` samples.

    ``history`` is a sequence of samples, each a scalar or a sequence of norms.
    """
    if window < 2:
        raise ValueError("window must cover at least two samples")
    if len(history) < window:
        return False
    tail = np.asarray(history[-window:], dtype=float).reshape(window, -1)
    ref = tail[-1]
    scale = np.where(ref != 0, np.abs(ref), 1.0)
    rel = np.abs(tail - ref) / scale
    return bool(np.all(np.isfinite(tail)) and rel.max() <= tol)


@dataclass
class ErrorReport:
    case: str
    n: int
    time: float
    norms: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    steps: int = 0
    status: str = "ok"
    steady: bool | None = None

    def rows(self):
        for q in QUANTITIES:
            for name, value in zip(NORMS, self.norms.get(q, (math.nan,) * 3)):
                yield self.case, self.n, q, name, value


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


CSV_HEADER = ("case", "n", "quantity", "norm", "value", "eoc")


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        for row in r.rows():
            w.writerow([_fmt(v) for v in row] + [""])
    return buf.getvalue()


@dataclass
class ConvergenceTable:
    case: str
    reports: list[ErrorReport]

    def __post_init__(self):
        ns = [r.n for r in self.reports]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ConfigurationError(f"resolutions must be strictly increasing: {ns}")

    @property
    def resolutions(self) -> list[int]:
        return [r.n for r in self.reports]

    def errors(self, quantity: str, norm: str) -> list[float]:
        k = NORMS.index(norm)
        return [r.norms[quantity][k] if r.status == "ok" else math.nan for r in self.reports]

    def eocs(self, quantity: str, norm: str) -> list[float]:
        e = self.errors(quantity, norm)
        ns = self.resolutions
        return [eoc(e[i], e[i + 1], ns[i + 1] / ns[i]) for i in range(len(e) - 1)]

    def mean_eoc(self, quantity: str, norm: str) -> float:
        vals = self.eocs(quantity, norm)
        return float(np.mean(vals)) if vals else math.nan

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for q in QUANTITIES:
            for norm in NORMS:
                e = self.errors(q, norm)
                orders = [math.nan] + self.eocs(q, norm)
                for r, value, order in zip(self.reports, e, orders):
                    w.writerow([self.case, r.n, q, norm, _fmt(value), _fmt(order)])
        return buf.getvalue()

    def format(self) -> str:
        lines = [f"case {self.case}"]
        head = f"{'quantity':<9} {'norm':<5}" + "".join(f"{n:>12d}" for n in self.resolutions) + "   EOC (pairwise)"
        lines.append(head)
        for q in QUANTITIES:
            for norm in NORMS:
                e = self.errors(q, norm)
                orders = " ".join(f"{o:5.2f}" for o in self.eocs(q, norm))
                lines.append(f"{q:<9} {norm:<5}" + "".join(f"{v:12.4e}" for v in e) + "   " + orders)
        return "\n".join(lines)
