"""Parsers for the vptomo CSV artifacts.

Each reader checks the documented layout up front and raises ParseError
naming the file and the 1-based line of the first mismatch. Nothing here
imports the producer package; the CSV formats are the whole interface.
"""

import numpy as np


class ParseError(Exception):
    """Input file does not match the documented layout."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line             # 0 means a file-level problem
        super().__init__(f"{self.path}:{line}: {message}")


def _read_lines(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return [ln.rstrip("\n") for ln in fh]
    except OSError as exc:
        raise ParseError(path, 0, f"cannot read: {exc.strerror or exc}") from exc


def _floats(path, lineno, line, want):
    toks = line.split(",")
    if len(toks) != want:
        raise ParseError(path, lineno, f"expected {want} fields, found {len(toks)}")
    try:
        return [float(t) for t in toks]
    except ValueError:
        raise ParseError(path, lineno, f"non-numeric field in {line!r}") from None


def read_grid(path):
    """Square scalar grid over [-R, R]^2.

    Layout: '# dims=n1,n2', '# extent=-R,R', '# config=hash' headers, then
    n1 rows of n2 comma-separated values. Returns (values, radius, config).
    """
    lines = _read_lines(path)
    header = {}
    body = []
    for k, ln in enumerate(lines, start=1):
        if ln.startswith("# ") and "=" in ln:
            key, val = ln[2:].split("=", 1)
            header[key.strip()] = (k, val.strip())
        elif ln.strip():
            body.append((k, ln))
    for key in ("dims", "extent", "config"):
        if key not in header:
            raise ParseError(path, 0, f"missing '# {key}=' header line")
    try:
        n1, n2 = (int(t) for t in header["dims"][1].split(","))
        lo, hi = (float(t) for t in header["extent"][1].split(","))
    except ValueError:
        raise ParseError(path, header["dims"][0], "malformed dims/extent header") from None
    if len(body) != n1:
        raise ParseError(path, body[-1][0] if body else 0,
                         f"expected {n1} data rows, found {len(body)}")
    values = np.array([_floats(path, k, ln, n2) for k, ln in body])
    if abs(lo + hi) > 1e-12 * max(1.0, abs(hi)):
        raise ParseError(path, header["extent"][0],
                         f"extent must be symmetric, got {lo},{hi}")
    return values, hi, header["config"][1]


SINOGRAM_COLUMNS = "angle_index,offset_index,alpha,offset,v1,v2,parallel_residual"


def read_sinogram(path):
    """Chord-wise vector sinogram.

    Layout: '# config=hash', 'n_a,n_s,R_d' plus its value row, the column
    header, then n_a*n_s rows in row-major (angle, offset) order. Returns
    a dict with angles, offsets, values (n_a, n_s, 2), parallel residual,
    radius, and config hash.
    """
    lines = _read_lines(path)
    if not lines or not lines[0].startswith("# config="):
        raise ParseError(path, 1, "expected '# config=' first line")
    config = lines[0].split("=", 1)[1]
    if len(lines) < 4:
        raise ParseError(path, len(lines), "truncated sinogram header")
    if lines[1] != "n_a,n_s,R_d":
        raise ParseError(path, 2, f"expected 'n_a,n_s,R_d', found {lines[1]!r}")
    try:
        na_tok, ns_tok, r_tok = lines[2].split(",")
        n_a, n_s, radius = int(na_tok), int(ns_tok), float(r_tok)
    except ValueError:
        raise ParseError(path, 3, f"malformed dimension row {lines[2]!r}") from None
    if lines[3] != SINOGRAM_COLUMNS:
        raise ParseError(path, 4, f"expected columns {SINOGRAM_COLUMNS!r}")
    body = [(k, ln) for k, ln in enumerate(lines[4:], start=5) if ln.strip()]
    if len(body) != n_a * n_s:
        raise ParseError(path, body[-1][0] if body else 4,
                         f"expected {n_a * n_s} rows, found {len(body)}")
    angles = np.zeros(n_a)
    offsets = np.zeros(n_s)
    values = np.zeros((n_a, n_s, 2))
    par = np.zeros((n_a, n_s))
    for idx, (k, ln) in enumerate(body):
        row = _floats(path, k, ln, 7)
        i, j = int(row[0]), int(row[1])
        if (i, j) != (idx // n_s, idx % n_s):
            raise ParseError(path, k, f"index pair ({i},{j}) out of order")
        angles[i] = row[2]
        offsets[j] = row[3]
        values[i, j] = row[4:6]
        par[i, j] = row[6]
    return {
        "angles": angles, "offsets": offsets, "values": values,
        "parallel_residual": par, "radius": radius, "config": config,
    }


def read_table(path, columns):
    """'# config=hash', a column header, then numeric rows.

    Returns (data, config) with data shaped (rows, len(columns)). Covers
    the sweep, residual, and trajectory files.
    """
    lines = _read_lines(path)
    if not lines or not lines[0].startswith("# config="):
        raise ParseError(path, 1, "expected '# config=' first line")
    config = lines[0].split("=", 1)[1]
    if len(lines) < 2 or lines[1] != ",".join(columns):
        found = lines[1] if len(lines) > 1 else ""
        raise ParseError(path, 2, f"expected columns {','.join(columns)!r}, "
                                  f"found {found!r}")
    rows = [_floats(path, k, ln, len(columns))
            for k, ln in enumerate(lines[2:], start=3) if ln.strip()]
    if not rows:
        raise ParseError(path, len(lines), "no data rows")
    return np.array(rows), config


SWEEP_COLUMNS = ("speed", "m1", "m2", "m_parallel", "m_perp", "err_vs_oracle",
                 "lambda_hat", "iterations", "residual_first", "residual_last",
                 "t_plus", "t_star")

TRAJECTORY_COLUMNS = ("t", "x1", "x2", "v1", "v2")


def read_sweep(path):
    data, config = read_table(path, SWEEP_COLUMNS)
    return {name: data[:, k] for k, name in enumerate(SWEEP_COLUMNS)}, config


def read_trajectory(path):
    data, config = read_table(path, TRAJECTORY_COLUMNS)
    return data, config
