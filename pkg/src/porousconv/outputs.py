"""Writers and readers for the CSV, VTK and JSON outputs."""

import csv
import json
import math

import numpy as np

FIELD_COLUMNS = ("x", "y", "psi", "T", "H", "theta")


def _num(v):
    # shortest decimal that round-trips to the same double
    return repr(float(v))


def write_fields_csv(path, grid, report):
    X, Y = grid.mesh()
    cols = (X, Y, report.psi, report.T, report.H, report.theta)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(FIELD_COLUMNS) + "\n")
        for j in range(grid.ny + 1):
            for i in range(grid.nx + 1):
                fh.write(",".join(_num(c[i, j]) for c in cols) + "\n")


def read_fields_csv(path, grid):
    """Inverse of :func:`write_fields_csv`; returns a dict of grid-shaped arrays."""
    out = {k: np.empty(grid.shape) for k in FIELD_COLUMNS}
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != grid.size:
        raise ValueError(f"{path}: expected {grid.size} rows, found {len(rows)}")
    for n, r in enumerate(rows):
        i, j = n % (grid.nx + 1), n // (grid.nx + 1)
        for k in FIELD_COLUMNS:
            out[k][i, j] = float(r[k])
    return out


def write_convergence_csv(path, history):
    with open(path, "w", newline="") as fh:
        fh.write("iter,res_psi,res_H\n")
        for it, rp, rh in history:
            fh.write(f"{it},{_num(rp)},{_num(rh)}\n")


def write_vtk(path, grid, report, title="porousconv fields"):
    """Legacy ASCII structured-points file with psi, T, H and theta as point data."""
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.nx + 1} {grid.ny + 1} 1",
        "ORIGIN 0 0 0",
        f"SPACING {_num(grid.hx)} {_num(grid.hy)} 1",
        f"POINT_DATA {grid.size}",
    ]
    for name in ("psi", "T", "H", "theta"):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        # VTK point order: x fastest
        lines += [_num(v) for v in np.asarray(getattr(report, name)).T.ravel()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_clean(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
