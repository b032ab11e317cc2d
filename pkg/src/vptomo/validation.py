"""Runtime invariant suite behind the ``validate`` subcommand.

Each check exercises one documented invariant of the pipeline and reports
a measured value against its bound.  The suite is deterministic (fixed
seeds) and sized to finish in about a minute on one core.
"""

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from . import albedo, characteristics, geometry, kinetic, poisson, profiles, tomography
from .config import ExperimentConfig, canonical_text, config_hash, parse_config
from .fileio import read_grid_csv, write_grid_csv

__all__ = ["CheckResult", "run_all", "CHECK_NAMES"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    bound: float
    seconds: float


class _Ctx:
    """Lazily cached fields shared between checks."""

    def __init__(self):
        self.domain = geometry.DiskDomain(1.0)
        self._cache = {}

    def field(self, kind, nx):
        key = (kind, nx)
        if key not in self._cache:
            prof = profiles.constant(1.0) if kind == "constant" else profiles.gaussian()
            self._cache[key] = poisson.assemble_field(
                poisson.source_from_profile(prof, nx))
        return self._cache[key]

    def solve(self, kind, speed):
        key = ("fp", kind, speed)
        if key not in self._cache:
            prof = profiles.constant(1.0) if kind == "constant" else profiles.gaussian()
            chord = geometry.chord_from(self.domain, np.pi / 2, 0.3)
            beam = kinetic.make_beam(chord.entry, chord.direction, speed)
            self._cache[key] = kinetic.fixed_point_solve(
                beam, prof, e_n=self.field(kind, 128))
        return self._cache[key]


def _seeded_chords(rng, count, domain, cap=0.9):
    for _ in range(count):
        yield geometry.chord_from(domain, rng.uniform(0, np.pi),
                                  rng.uniform(-cap, cap) * domain.radius)


# -- geometry ---------------------------------------------------------------

def check_geometry_line_exit(ctx):
    rng = np.random.default_rng(11)
    worst = 0.0
    for chord in _seeded_chords(rng, 64, ctx.domain):
        length, exit_pt = geometry.line_exit(ctx.domain, chord.entry, chord.direction)
        err = max(abs(length - chord.length),
                  float(np.abs(exit_pt - chord.exit).max()))
        worst = max(worst, err)
    return worst, 1e-10


def check_geometry_classify(ctx):
    rng = np.random.default_rng(12)
    bad = 0
    for chord in _seeded_chords(rng, 64, ctx.domain):
        sigma = rng.uniform(0.1, 10.0)
        if geometry.classify(ctx.domain, chord.entry, sigma * chord.direction) != "incoming":
            bad += 1
        if geometry.classify(ctx.domain, chord.exit, sigma * chord.direction) != "outgoing":
            bad += 1
    return float(bad), 0.0


# -- profiles ---------------------------------------------------------------

def check_profiles_parallel_identity(ctx):
    rng = np.random.default_rng(13)
    nodes, weights = np.polynomial.legendre.leggauss(96)
    worst = 0.0
    for prof in (profiles.constant(1.0), profiles.radial_polynomial((1.0, -1.0))):
        for chord in _seeded_chords(rng, 8, ctx.domain):
            t = 0.5 * chord.length * (nodes + 1.0)
            vals = profiles.reference_field(prof, chord.point(t))
            m = 0.5 * chord.length * (weights[:, None] * vals).sum(axis=0)
            worst = max(worst, abs(float(m @ chord.direction)))
    return worst, 1e-8


def check_profiles_linearity(ctx):
    rng = np.random.default_rng(14)
    pts = rng.uniform(-0.6, 0.6, size=(32, 2))
    one = profiles.reference_field(profiles.radial_polynomial((1.0, -1.0)), pts)
    three = profiles.reference_field(profiles.radial_polynomial((3.0, -3.0)), pts)
    err = np.abs(three - 3.0 * one).max() / max(np.abs(three).max(), 1e-300)
    return float(err), 1e-12


# -- poisson ----------------------------------------------------------------

def check_poisson_linearity(ctx):
    n = 32
    rng = np.random.default_rng(15)
    mask = poisson.inside_mask(n, 1.0)
    v1 = rng.normal(size=(n, n)) * mask
    v2 = rng.normal(size=(n, n)) * mask
    a, b = 0.7, -1.3
    sep = (a * poisson.assemble_field(poisson.SourceGrid(1.0, v1, mask)).values
           + b * poisson.assemble_field(poisson.SourceGrid(1.0, v2, mask)).values)
    joint = poisson.assemble_field(
        poisson.SourceGrid(1.0, a * v1 + b * v2, mask)).values
    err = np.abs(joint - sep).max() / max(np.abs(joint).max(), 1e-300)
    return float(err), 1e-12


def check_poisson_curl(ctx):
    fld = ctx.field("gaussian", 64)
    h = fld.h
    E = fld.values
    curl = ((E[2:, 1:-1, 1] - E[:-2, 1:-1, 1])
            - (E[1:-1, 2:, 0] - E[1:-1, :-2, 0])) / (2 * h)
    R = np.hypot(*poisson.center_mesh(64, fld.radius))[1:-1, 1:-1]
    return float(np.abs(curl)[R <= 0.8].max()), 0.05 * h


def check_poisson_convergence(ctx):
    errs = []
    for nx in (64, 128, 256):
        fld = ctx.field("constant", nx)
        X, Y = poisson.center_mesh(nx, fld.radius)
        R = np.hypot(X, Y)
        sel = R <= 0.9 * fld.radius
        exact = np.stack([-X / 2, -Y / 2], axis=-1)
        diff = np.linalg.norm((fld.values - exact)[sel])
        errs.append(float(diff / np.linalg.norm(exact[sel])))
    monotone = errs[0] > errs[1] > errs[2]
    value = errs[2] if monotone else max(errs)
    return value, 5e-3, monotone and errs[2] <= 5e-3


# -- characteristics --------------------------------------------------------

def _char_sample(ctx):
    fld = ctx.field("constant", 64)
    speed = max(50.0, characteristics.nontrapping_threshold(fld))
    rng = np.random.default_rng(16)
    recs = []
    for chord in _seeded_chords(rng, 16, ctx.domain):
        start = characteristics.PhasePoint(chord.entry, speed * chord.direction)
        recs.append((chord, start, characteristics.trace(start, fld)))
    return fld, speed, recs


def check_chars_exit_time_bound(ctx):
    fld, speed, recs = ctx._cache.setdefault("char_sample", _char_sample(ctx))
    cap = 8.0 * fld.radius / speed     # 4R/|p0| with R the diameter
    worst = max(rec.t_plus / cap for _, _, rec in recs)
    assert all(rec.exited for _, _, rec in recs)
    return float(worst), 1.0


def check_chars_line_deviation(ctx):
    fld, speed, recs = ctx._cache["char_sample"]
    m0 = fld.M0
    worst = 0.0
    for _, _, rec in recs:
        bound = 0.5 * rec.t_plus ** 2 * m0 + 1e-14
        worst = max(worst, rec.max_line_deviation / bound)
    return float(worst), 1.0


def check_chars_step_halving(ctx):
    fld = ctx.field("constant", 64)
    chord = geometry.chord_from(ctx.domain, 1.1, 0.25)
    start = characteristics.PhasePoint(chord.entry, 50.0 * chord.direction)
    full = characteristics.trace(start, fld)
    half = characteristics.trace(start, fld, dt_scale=0.5)
    rel = np.abs(full.v_plus - half.v_plus).max() / 50.0
    return float(rel), 1e-8


def check_chars_det_one(ctx):
    fld, speed, recs = ctx._cache["char_sample"]
    worst = 0.0
    for chord, start, _ in recs[:8]:
        _, var = characteristics.trace_variational(start, fld)
        worst = max(worst, abs(var.det - 1.0))
    return float(worst), 1e-6


def check_chars_jacobian_fd(ctx):
    # the variational flow interpolates grid gradients, so the FD gap
    # shrinks with resolution; 128 is where the 1e-4 gate holds
    fld = ctx.field("constant", 128)
    rng = np.random.default_rng(17)
    delta = 1e-5
    worst = 0.0
    for chord in _seeded_chords(rng, 3, ctx.domain, cap=0.7):
        x = chord.point(rng.uniform(0.25, 0.75) * chord.length)
        start = characteristics.PhasePoint(x, 50.0 * chord.direction)
        jac = characteristics.exit_map_jacobians(start, fld)
        state0 = np.concatenate([start.x, start.v])
        fd_x = np.zeros((2, 4))
        fd_v = np.zeros((2, 4))
        for k in range(4):
            plus, minus = state0.copy(), state0.copy()
            plus[k] += delta
            minus[k] -= delta
            rp = characteristics.trace(
                characteristics.PhasePoint(plus[:2], plus[2:]), fld, direction="backward")
            rm = characteristics.trace(
                characteristics.PhasePoint(minus[:2], minus[2:]), fld, direction="backward")
            fd_x[:, k] = (rp.x_plus - rm.x_plus) / (2 * delta)
            fd_v[:, k] = (rp.v_plus - rm.v_plus) / (2 * delta)
        scale = max(np.abs(fd_x).max(), np.abs(fd_v).max())
        err = max(np.abs(jac.grad_x - fd_x).max(), np.abs(jac.grad_v - fd_v).max())
        worst = max(worst, err / scale)
    return float(worst), 1e-4


def check_chars_reversibility(ctx):
    fld, speed, recs = ctx._cache["char_sample"]
    worst = 0.0
    for chord, start, rec in recs[:8]:
        back = characteristics.trace(
            characteristics.PhasePoint(rec.x_plus, rec.v_plus), fld, direction="backward")
        err = max(np.abs(back.x_plus - start.x).max() / fld.radius,
                  np.abs(back.v_plus - start.v).max() / speed)
        worst = max(worst, err)
    return float(worst), 1e-8


# -- kinetic fixed point ----------------------------------------------------

def check_kinetic_max_principle(ctx):
    state = ctx.solve("gaussian", 50.0)
    return float(state.report["psi_max"]), 1.0 + 1e-12


def check_kinetic_support(ctx):
    state = ctx.solve("gaussian", 50.0)
    return float(state.report["support_band_max"]), 0.0


def check_kinetic_self_field_rate(ctx):
    e_n = ctx.field("gaussian", 128).values
    gap = {}
    for speed in (50.0, 100.0):
        state = ctx.solve("gaussian", speed)
        gap[speed] = float(np.abs(state.field.values - e_n).max())
    ratio = gap[50.0] / max(gap[100.0], 1e-300)
    # eps ~ 1/speed so the self-field gap should shrink ~4x per doubling
    return ratio, 3.0, ratio >= 3.0


def check_kinetic_contraction(ctx):
    state = ctx.solve("gaussian", 50.0)
    lam = state.lambda_hat if state.lambda_hat is not None else 0.0
    decays = all(b < a for a, b in zip(state.residuals, state.residuals[1:]))
    return float(lam), 0.5, decays and lam < 0.5


# -- measurement ------------------------------------------------------------

def check_albedo_dirichlet_parallel(ctx):
    opts = albedo.MeasureOptions(e_n=ctx.field("gaussian", 128))
    worst = 0.0
    for offset in (0.3, -0.55):
        chord = geometry.chord_from(ctx.domain, np.pi / 2, offset)
        sweep = albedo.sweep_and_extrapolate(chord, profiles.gaussian(),
                                             speeds=(50.0, 100.0), opts=opts)
        m_inf = sweep.extrapolated
        par = abs(float(m_inf @ chord.direction))
        gate = 5e-3 * max(1.0, float(np.linalg.norm(m_inf)))
        worst = max(worst, par / gate)
    return worst, 1.0


def check_albedo_arc_length(ctx):
    opts = albedo.MeasureOptions(e_n=ctx.field("gaussian", 128))
    chord = geometry.chord_from(ctx.domain, 0.4, 0.2)
    worst = 0.0
    for speed in (25.0, 100.0):
        meas = albedo.measure_beam(chord, speed, profiles.gaussian(), opts)
        worst = max(worst, abs(speed * meas.t_star - chord.length))
    return float(worst), 1e-12


def check_albedo_monotone_m(ctx):
    opts = albedo.MeasureOptions(e_n=ctx.field("gaussian", 128))
    chord = geometry.chord_from(ctx.domain, np.pi / 2, 0.3)
    sweep = albedo.sweep_and_extrapolate(chord, profiles.gaussian(), opts=opts)
    dm = [float(np.linalg.norm(np.subtract(b.m, a.m)))
          for a, b in zip(sweep.measurements, sweep.measurements[1:])]
    monotone = all(later < earlier for earlier, later in zip(dm, dm[1:]))
    return (dm[-1] / dm[0] if dm[0] else 0.0), 1.0, monotone


# -- tomography -------------------------------------------------------------

def _gauss_scalar_sino(n_a, n_s, center, sigma=0.15, amp=1.0):
    angles, offsets = tomography.scan_grid(n_a, n_s)
    p = np.zeros((n_a, n_s))
    for i, a in enumerate(angles):
        perp = np.array([-np.sin(a), np.cos(a)])
        d = offsets - center @ perp
        p[i] = amp * sigma * np.sqrt(2 * np.pi) * np.exp(-d * d / (2 * sigma * sigma))
    return angles, offsets, p


def check_tomo_fbp_linearity(ctx):
    n_a, n_s, n = 20, 25, 32
    rng = np.random.default_rng(18)
    angles, offsets = tomography.scan_grid(n_a, n_s)
    p1 = rng.normal(size=(n_a, n_s))
    p2 = rng.normal(size=(n_a, n_s))
    a, b = 1.4, -0.6
    sep = (a * tomography.fbp_scalar(angles, offsets, p1, n)
           + b * tomography.fbp_scalar(angles, offsets, p2, n))
    joint = tomography.fbp_scalar(angles, offsets, a * p1 + b * p2, n)
    err = np.abs(joint - sep).max() / max(np.abs(joint).max(), 1e-300)
    return float(err), 1e-12


def check_tomo_rot_equivariance(ctx):
    n_a, n_s, n = 60, 65, 64
    angles, offsets, p1 = _gauss_scalar_sino(n_a, n_s, np.array([0.2, 0.0]))
    f1 = tomography.fbp_scalar(angles, offsets, p1, n)
    p2 = np.empty_like(p1)              # advance every chord by one angle index
    p2[1:] = p1[:-1]
    p2[0] = p1[-1, ::-1]                # crossing alpha = pi flips the offset axis
    f2 = tomography.fbp_scalar(angles, offsets, p2, n)
    da = np.pi / n_a
    X, Y = poisson.center_mesh(n, 1.0)
    ca, sa = np.cos(-da), np.sin(-da)
    h = 2.0 / n
    ir = (ca * X - sa * Y + 1.0) / h - 0.5
    jr = (sa * X + ca * Y + 1.0) / h - 0.5
    f1_rot = map_coordinates(f1, [ir, jr], order=1, mode="nearest")
    sel = np.hypot(X, Y) <= 0.8
    rel = np.linalg.norm((f2 - f1_rot)[sel]) / np.linalg.norm(f2[sel])
    return float(rel), 0.02


def check_tomo_consistency_chain(ctx):
    prof = profiles.gaussian()
    errs = []
    for (n_a, n_s, n, nx) in ((30, 25, 48, 64), (60, 49, 96, 128)):
        mopts = albedo.MeasureOptions(e_n=ctx.field("gaussian", nx), n_field=nx)
        sino = tomography.acquire(prof, n_a, n_s, mode="oracle",
                                  opts=tomography.AcquireOptions(measure=mopts))
        res = tomography.reconstruct(sino, n, profile=prof, cut=0.8)
        errs.append(res.report.rel_l2)
        ctx._cache["chain_last"] = res
    return errs[1] / errs[0], 1.0, errs[1] < errs[0]


def check_tomo_curl_ehat(ctx):
    res = ctx._cache["chain_last"]
    E = res.e_hat.values
    h = res.e_hat.h
    n = E.shape[0]
    curl = ((E[2:, 1:-1, 1] - E[:-2, 1:-1, 1])
            - (E[1:-1, 2:, 0] - E[1:-1, :-2, 0])) / (2 * h)
    R = np.hypot(*poisson.center_mesh(n, res.e_hat.radius))[1:-1, 1:-1]
    ratio = np.abs(curl)[R <= 0.8].max() / np.abs(E).max()
    return float(ratio), 0.1


# -- config and file determinism --------------------------------------------

def check_cli_determinism(ctx):
    cfg = ExperimentConfig()
    text = canonical_text(cfg)
    if canonical_text(parse_config(text)) != text:
        return 1.0, 0.0, False
    chash = config_hash(cfg)
    rng = np.random.default_rng(19)
    grid = rng.normal(size=(9, 9))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "grid.csv")
        write_grid_csv(path, grid, 1.0, chash)
        first = open(path).read()
        write_grid_csv(path, grid, 1.0, chash)
        identical = open(path).read() == first
        back, radius, h2 = read_grid_csv(path)
        ok = (identical and h2 == chash and radius == 1.0
              and np.array_equal(back, grid) and f"# config={chash}" in first)
    return (0.0 if ok else 1.0), 0.0


_CHECKS = [
    ("geometry_line_exit", check_geometry_line_exit),
    ("geometry_classify", check_geometry_classify),
    ("profiles_parallel_identity", check_profiles_parallel_identity),
    ("profiles_linearity", check_profiles_linearity),
    ("poisson_linearity", check_poisson_linearity),
    ("poisson_curl", check_poisson_curl),
    ("poisson_convergence", check_poisson_convergence),
    ("chars_exit_time_bound", check_chars_exit_time_bound),
    ("chars_line_deviation", check_chars_line_deviation),
    ("chars_step_halving", check_chars_step_halving),
    ("chars_det_one", check_chars_det_one),
    ("chars_jacobian_fd", check_chars_jacobian_fd),
    ("chars_reversibility", check_chars_reversibility),
    ("kinetic_max_principle", check_kinetic_max_principle),
    ("kinetic_support", check_kinetic_support),
    ("kinetic_self_field_rate", check_kinetic_self_field_rate),
    ("kinetic_contraction", check_kinetic_contraction),
    ("albedo_dirichlet_parallel", check_albedo_dirichlet_parallel),
    ("albedo_arc_length", check_albedo_arc_length),
    ("albedo_monotone_m", check_albedo_monotone_m),
    ("tomo_fbp_linearity", check_tomo_fbp_linearity),
    ("tomo_rot_equivariance", check_tomo_rot_equivariance),
    ("tomo_consistency_chain", check_tomo_consistency_chain),
    ("tomo_curl_ehat", check_tomo_curl_ehat),
    ("cli_determinism", check_cli_determinism),
]

CHECK_NAMES = [name for name, _ in _CHECKS]


def run_all(cfg: ExperimentConfig = None, progress=None):
    ctx = _Ctx()
    results = []
    for k, (name, fn) in enumerate(_CHECKS):
        if progress:
            progress(name, k, len(_CHECKS))
        t0 = time.time()
        out = fn(ctx)
        if len(out) == 2:
            value, bound = out
            passed = value <= bound
        else:
            value, bound, passed = out
        results.append(CheckResult(name, bool(passed), float(value),
                                   float(bound), time.time() - t0))
    return results
