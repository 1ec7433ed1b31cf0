"""Snapshot export (CSV and legacy VTK structured points)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

_AXES = "xyz"


def _columns(coords, phi, rho, u, p, exact=None):
    d = len(u)
    cols = {}
    for a in range(d):
        cols[_AXES[a]] = coords[a]
    cols["phi"] = phi
    cols["rho"] = rho
    for a in range(d):
        cols[f"u{_AXES[a]}"] = u[a]
    cols["p"] = p
    if exact is not None:
        u_ex, p_ex = exact
        for a in range(d):
            cols[f"u{_AXES[a]}_exact"] = u_ex[a]
        cols["p_exact"] = p_ex
    return cols


def write_snapshot_csv(path, coords, phi, rho, u, p, exact=None) -> Path:
    """One row per node, values with 17 significant digits.

    ``coords`` is ``(d,) + shape``; ``u`` likewise. ``exact`` optionally adds
    the analytic velocity and pressure as ``*_exact`` columns.
    """
    path = Path(path)
    cols = _columns(coords, phi, rho, u, p, exact)
    data = np.column_stack([np.asarray(v, dtype=float).ravel() for v in cols.values()])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
    return path


def read_snapshot_csv(path) -> dict[str, np.ndarray]:
    arr = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(arr[name]) for name in arr.dtype.names}


def write_vtk(path, dx: float, phi, rho, u, p, title: str = "vanse-lbm snapshot") -> Path:
    """Legacy ASCII VTK, DATASET STRUCTURED_POINTS, point data on the nodes."""
    path = Path(path)
    d = len(u)
    shape = phi.shape + (1,) * (3 - d)
    npts = int(np.prod(shape))

    def flat(a):
        # VTK runs x fastest
        return np.asarray(a, dtype=float).reshape(shape).ravel(order="F")

    with path.open("w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(title[:255] + "\n")
        fh.write("ASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write("DIMENSIONS %d %d %d\n" % shape)
        fh.write("ORIGIN 0 0 0\n")
        fh.write(f"SPACING {dx!r} {dx!r} {dx!r}\n")
        fh.write(f"POINT_DATA {npts}\n")
        for name, arr in (("phi", phi), ("rho", rho), ("p", p)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            np.savetxt(fh, flat(arr), fmt="%.10g")
        vec = np.zeros((npts, 3))
        for a in range(d):
            vec[:, a] = flat(u[a])
        fh.write("VECTORS u double\n")
        np.savetxt(fh, vec, fmt="%.10g")
    return path
