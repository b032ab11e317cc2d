"""CSV and JSONL artifact formats.

All tabular data is CSV, all grids are CSV with a three-line header
(dims, extent, config hash), measurements are JSON lines.  Floats are
written with repr so files round-trip bit-identically and rerunning the
same configuration produces byte-identical artifacts.
"""

import json
import os

import numpy as np

from .errors import ConfigError
from .poisson import FieldGrid, inside_mask
from .tomography import Sinogram

__all__ = [
    "write_grid_csv", "read_grid_csv",
    "write_field_csv", "read_field_csv",
    "write_sinogram_csv", "read_sinogram_csv",
    "measurement_record", "extrapolated_record",
    "write_jsonl", "append_jsonl",
    "write_residuals_csv", "write_trajectory_csv",
    "write_sweep_csv", "write_metrics_csv", "write_validation_csv",
]


def _f(v):
    return repr(float(v))


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


# -- scalar grids -----------------------------------------------------------

def write_grid_csv(path, values, radius, chash):
    """n1 x n2 scalar grid; row index is the first array axis."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ConfigError(f"grid must be 2-d, got shape {values.shape}")
    lines = [
        f"# dims={values.shape[0]},{values.shape[1]}",
        f"# extent={_f(-radius)},{_f(radius)}",
        f"# config={chash}",
    ]
    for row in values:
        lines.append(",".join(_f(v) for v in row))
    return _write(path, "\n".join(lines) + "\n")


def read_grid_csv(path):
    """Returns (values, radius, config_hash)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    header = {}
    body = []
    for ln in lines:
        if ln.startswith("# ") and "=" in ln:
            key, val = ln[2:].split("=", 1)
            header[key.strip()] = val.strip()
        elif ln.strip():
            body.append(ln)
    for key in ("dims", "extent", "config"):
        if key not in header:
            raise ConfigError(f"{path}: missing '# {key}=' header line")
    n1, n2 = (int(tok) for tok in header["dims"].split(","))
    lo, hi = (float(tok) for tok in header["extent"].split(","))
    if len(body) != n1:
        raise ConfigError(f"{path}: expected {n1} data rows, found {len(body)}")
    values = np.array([[float(tok) for tok in ln.split(",")] for ln in body])
    if values.shape != (n1, n2):
        raise ConfigError(f"{path}: row length does not match dims={n1},{n2}")
    if abs(lo + hi) > 1e-12 * max(1.0, abs(hi)):
        raise ConfigError(f"{path}: extent must be symmetric, got {lo},{hi}")
    return values, hi, header["config"]


# -- vector fields (one file per component) ---------------------------------

def write_field_csv(out_dir, stem, field, chash):
    paths = []
    for comp in (0, 1):
        path = os.path.join(out_dir, f"{stem}_{comp + 1}.csv")
        write_grid_csv(path, field.values[:, :, comp], field.radius, chash)
        paths.append(path)
    return paths


def read_field_csv(out_dir, stem):
    comps = []
    radius = None
    for comp in (0, 1):
        values, radius, _ = read_grid_csv(os.path.join(out_dir, f"{stem}_{comp + 1}.csv"))
        comps.append(values)
    if comps[0].shape != comps[1].shape:
        raise ConfigError(f"{stem}: component grids disagree in shape")
    values = np.stack(comps, axis=-1)
    return FieldGrid(radius, values, inside_mask(values.shape[0], radius))


# -- sinograms --------------------------------------------------------------

_SINO_COLUMNS = "angle_index,offset_index,alpha,offset,v1,v2,parallel_residual"


def write_sinogram_csv(path, sino, chash):
    n_a, n_s = len(sino.angles), len(sino.offsets)
    par = sino.parallel_residual
    lines = [
        f"# config={chash}",
        "n_a,n_s,R_d",
        f"{n_a},{n_s},{_f(sino.radius)}",
        _SINO_COLUMNS,
    ]
    for i in range(n_a):
        alpha = sino.angles[i]
        for j in range(n_s):
            v1, v2 = sino.values[i, j]
            lines.append(",".join([
                str(i), str(j), _f(alpha), _f(sino.offsets[j]),
                _f(v1), _f(v2), _f(par[i, j]),
            ]))
    return _write(path, "\n".join(lines) + "\n")


def read_sinogram_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    chash = ""
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        if lines[k].startswith("# config="):
            chash = lines[k].split("=", 1)[1].strip()
        k += 1
    if k + 2 >= len(lines) or lines[k] != "n_a,n_s,R_d":
        raise ConfigError(f"{path}: missing 'n_a,n_s,R_d' header row")
    n_a_tok, n_s_tok, radius_tok = lines[k + 1].split(",")
    n_a, n_s, radius = int(n_a_tok), int(n_s_tok), float(radius_tok)
    if lines[k + 2] != _SINO_COLUMNS:
        raise ConfigError(f"{path}: unexpected column header {lines[k + 2]!r}")
    rows = lines[k + 3:]
    if len(rows) != n_a * n_s:
        raise ConfigError(
            f"{path}: expected {n_a * n_s} data rows, found {len(rows)}")
    angles = np.zeros(n_a)
    offsets = np.zeros(n_s)
    values = np.zeros((n_a, n_s, 2))
    for ln in rows:
        toks = ln.split(",")
        if len(toks) != 7:
            raise ConfigError(f"{path}: malformed row {ln!r}")
        i, j = int(toks[0]), int(toks[1])
        if not (0 <= i < n_a and 0 <= j < n_s):
            raise ConfigError(f"{path}: row index ({i},{j}) out of range")
        angles[i] = float(toks[2])
        offsets[j] = float(toks[3])
        values[i, j, 0] = float(toks[4])
        values[i, j, 1] = float(toks[5])
    return Sinogram(angles=angles, offsets=offsets, values=values,
                    radius=radius, meta={"config": chash})


# -- measurements (JSON lines) ----------------------------------------------

def measurement_record(meas, chash):
    rec = {
        "kind": "measurement",
        "config": chash,
        "alpha": float(meas.chord.angle),
        "offset": float(meas.chord.offset),
        "speed": float(meas.speed),
        "m": [float(meas.m[0]), float(meas.m[1])],
        "m_parallel": float(meas.m_parallel),
        "m_perp": float(meas.m_perp),
        "t_plus": float(meas.exit.t_plus),
        "t_star": float(meas.t_star),
        "v_plus": [float(meas.exit.v_plus[0]), float(meas.exit.v_plus[1])],
        "status": meas.exit.status,
        "lambda_hat": float("nan") if meas.lambda_hat is None else float(meas.lambda_hat),
        "iterations": int(meas.iterations),
        "residuals": [float(r) for r in meas.residuals],
    }
    return rec


def extrapolated_record(sweep, chash):
    return {
        "kind": "extrapolated",
        "config": chash,
        "alpha": float(sweep.chord.angle),
        "offset": float(sweep.chord.offset),
        "speeds": [float(s) for s in sweep.speeds],
        "m": [float(sweep.extrapolated[0]), float(sweep.extrapolated[1])],
        "order_hat": float(sweep.order_hat),
    }


def _dump(record):
    return json.dumps(record, sort_keys=True)


def write_jsonl(path, records):
    return _write(path, "".join(_dump(r) + "\n" for r in records))


def append_jsonl(path, record):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump(record) + "\n")
    return path


# -- small tables -----------------------------------------------------------

def write_residuals_csv(path, residuals, chash):
    lines = [f"# config={chash}", "iteration,residual"]
    lines += [f"{k},{_f(r)}" for k, r in enumerate(residuals)]
    return _write(path, "\n".join(lines) + "\n")


def write_trajectory_csv(path, samples, chash):
    """samples: array of rows (t, x1, x2, v1, v2)."""
    samples = np.asarray(samples, dtype=float)
    lines = [f"# config={chash}", "t,x1,x2,v1,v2"]
    lines += [",".join(_f(v) for v in row) for row in samples]
    return _write(path, "\n".join(lines) + "\n")


_SWEEP_COLUMNS = ("speed,m1,m2,m_parallel,m_perp,err_vs_oracle,"
                  "lambda_hat,iterations,residual_first,residual_last,"
                  "t_plus,t_star")


def write_sweep_csv(path, rows, chash):
    """One row per speed; feeds the convergence figures."""
    lines = [f"# config={chash}", _SWEEP_COLUMNS]
    for row in rows:
        lines.append(",".join([
            _f(row["speed"]), _f(row["m1"]), _f(row["m2"]),
            _f(row["m_parallel"]), _f(row["m_perp"]),
            _f(row["err_vs_oracle"]), _f(row["lambda_hat"]),
            str(int(row["iterations"])), _f(row["residual_first"]),
            _f(row["residual_last"]), _f(row["t_plus"]), _f(row["t_star"]),
        ]))
    return _write(path, "\n".join(lines) + "\n")


def write_metrics_csv(path, report, chash):
    row = report.row()
    lines = [
        f"# config={chash}",
        ",".join(row),
        ",".join(_f(v) for v in row.values()),
    ]
    return _write(path, "\n".join(lines) + "\n")


def write_validation_csv(path, results, chash):
    """results: list of (name, passed, value, bound)."""
    lines = [f"# config={chash}", "check,status,value,bound"]
    for name, passed, value, bound in results:
        status = "pass" if passed else "FAIL"
        lines.append(f"{name},{status},{_f(value)},{_f(bound)}")
    return _write(path, "\n".join(lines) + "\n")