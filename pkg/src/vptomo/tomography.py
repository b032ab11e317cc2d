"""Sinogram acquisition, filtered back-projection, and profile recovery.

The scanning geometry is parallel-beam: uniform angles over [0, pi),
uniform offsets capped at 0.95 R to exclude grazing chords. Each chord
carries a 2-vector (the measured or quadrature line integral of the
doping field, in fixed Cartesian components). Components are inverted
separately by FBP with the discrete ramp kernel, and the doping profile
comes back from the reconstructed field by negated divergence.
"""
from dataclasses import dataclass, field as dfield

import numpy as np

from .errors import (AcquisitionError, ConfigError, DegenerateExitError,
                     NonContractionError, TrappedBeamError, VptomoError)
from .geometry import Chord, DiskDomain, chord_from
from .albedo import MeasureOptions, sweep_and_extrapolate, DEFAULT_SPEEDS
from .poisson import FieldGrid, assemble_field, cell_centers, source_from_profile
from .profiles import DopingProfile, RECOVERY_SIGN


@dataclass
class Sinogram:
    angles: np.ndarray         # (n_a,)
    offsets: np.ndarray        # (n_s,)
    values: np.ndarray         # (n_a, n_s, 2), Cartesian components
    radius: float
    meta: dict = dfield(default_factory=dict)

    @property
    def n_a(self):
        return len(self.angles)

    @property
    def n_s(self):
        return len(self.offsets)

    @property
    def parallel_residual(self):
        """Per-entry component along the chord direction (should be ~0)."""
        theta = np.column_stack([np.cos(self.angles), np.sin(self.angles)])
        return np.einsum("ak,ask->as", theta, self.values)


@dataclass
class AcquireOptions:
    offset_cap: float = 0.95
    n_quad: int = 513
    max_fail_frac: float = 0.02
    measure: MeasureOptions = None
    progress: object = None        # callable(done, total) or None


def scan_grid(n_a, n_s, radius=1.0, offset_cap=0.95):
    angles = np.arange(n_a) * np.pi / n_a
    offsets = np.linspace(-offset_cap * radius, offset_cap * radius, n_s)
    return angles, offsets


def chord_integral(field: FieldGrid, chord: Chord, n_quad=513):
    """Trapezoid line integral of the field along the chord (2-vector)."""
    t = np.linspace(0.0, chord.length, n_quad)
    pts = chord.point(t)
    vals = field.interp(pts)
    return np.trapezoid(vals, t, axis=0)


def acquire(profile: DopingProfile, n_a, n_s, speeds=DEFAULT_SPEEDS,
            mode="simulate", opts: AcquireOptions = None,
            radius=1.0) -> Sinogram:
    """Fill the sinogram chord by chord.

    oracle mode integrates the assembled doping field directly along each
    chord (no kinetics); simulate mode runs the full beam experiment with
    a speed sweep and Richardson extrapolation per chord. Failed chords
    (trapped, non-contracting, degenerate) are interpolated from offset
    neighbors when rare, otherwise the acquisition aborts.
    """
    if n_a < 2 or n_s < 2:
        raise ConfigError("sinogram needs n_a >= 2 and n_s >= 2")
    if mode not in ("simulate", "oracle"):
        raise ConfigError(f"unknown acquisition mode {mode!r}")
    opts = opts or AcquireOptions()
    mopts = opts.measure or MeasureOptions()
    opts.measure = mopts
    domain = DiskDomain(radius)
    angles, offsets = scan_grid(n_a, n_s, radius, opts.offset_cap)
    values = np.zeros((n_a, n_s, 2))
    failures = []

    if mode == "oracle":
        if mopts.e_n is None:
            mopts.e_n = assemble_field(source_from_profile(profile, mopts.n_field))
        field = mopts.e_n
        for i, a in enumerate(angles):
            for j, s in enumerate(offsets):
                values[i, j] = chord_integral(field, chord_from(domain, a, s),
                                              opts.n_quad)
            if opts.progress:
                opts.progress(i + 1, n_a)
    else:
        done = 0
        total = n_a * n_s
        for i, a in enumerate(angles):
            for j, s in enumerate(offsets):
                chord = chord_from(domain, a, s)
                try:
                    sweep = sweep_and_extrapolate(chord, profile, speeds, mopts)
                    values[i, j] = sweep.extrapolated
                except (TrappedBeamError, NonContractionError,
                        DegenerateExitError) as exc:
                    failures.append((i, j, type(exc).__name__))
                done += 1
                if opts.progress and done % max(1, total // 50) == 0:
                    opts.progress(done, total)
        if failures:
            frac = len(failures) / (n_a * n_s)
            if frac > opts.max_fail_frac:
                raise AcquisitionError(
                    f"{len(failures)} failed chords ({frac:.1%}) exceed "
                    f"{opts.max_fail_frac:.0%}")
            _patch_failures(values, failures, offsets)

    meta = {"mode": mode, "speeds": tuple(speeds),
            "failures": [(i, j) for i, j, _ in failures]}
    return Sinogram(angles, offsets, values, radius, meta)


def _patch_failures(values, failures, offsets):
    """Linear interpolation along the offset axis over failed entries."""
    by_row = {}
    for i, j, _ in failures:
        by_row.setdefault(i, []).append(j)
    for i, js in by_row.items():
        good = np.setdiff1d(np.arange(len(offsets)), js)
        if good.size == 0:
            raise AcquisitionError(f"entire angle row {i} failed")
        for c in range(2):
            values[i, js, c] = np.interp(offsets[js], offsets[good],
                                         values[i, good, c])


def ramp_kernel(n_s, ds):
    """Discrete Ram-Lak kernel h[-n_s+1 .. n_s-1]."""
    k = np.arange(-(n_s - 1), n_s)
    h = np.zeros(k.shape)
    h[n_s - 1] = 1.0 / (4.0 * ds * ds)
    odd = (np.abs(k) % 2) == 1
    h[odd] = -1.0 / (np.pi ** 2 * k[odd].astype(float) ** 2 * ds * ds)
    return h


def _check_uniform(x, name):
    d = np.diff(x)
    if d.size == 0 or not np.allclose(d, d[0], rtol=1e-9, atol=1e-12):
        raise ConfigError(f"{name} sampling must be uniform for FBP")
    return d[0]


def fbp_scalar(angles, offsets, proj, n, radius=1.0):
    """Parallel-beam FBP of one scalar sinogram onto an n x n cell grid.

    Direct spatial convolution with the ramp kernel, then back-projection
    with linear interpolation in offset (zero outside the sampled range)
    and a pi/n_a angular weight.
    """
    _check_uniform(angles, "angle")
    ds = _check_uniform(offsets, "offset")
    n_a, n_s = proj.shape
    h = ramp_kernel(n_s, ds)
    c = cell_centers(n, radius)
    X, Y = np.meshgrid(c, c, indexing="ij")
    out = np.zeros((n, n))
    for i in range(n_a):
        q = ds * np.convolve(proj[i], h)[n_s - 1: 2 * n_s - 1]
        s = -np.sin(angles[i]) * X + np.cos(angles[i]) * Y   # x . perp
        out += np.interp(s.ravel(), offsets, q, left=0.0, right=0.0).reshape(n, n)
    return out * (np.pi / n_a)


def fbp_vector(sino: Sinogram, n) -> FieldGrid:
    """Reconstruct the vector field component by component."""
    comps = [fbp_scalar(sino.angles, sino.offsets, sino.values[..., c], n,
                        sino.radius) for c in range(2)]
    return FieldGrid(sino.radius, np.stack(comps, axis=-1))


def recover_N(e_hat: FieldGrid) -> np.ndarray:
    """Doping estimate: sign convention times divergence of the field.

    Central differences on the interior; the one-cell margin is left at
    zero (and is excluded by the metric cut anyway).
    """
    v = e_hat.values
    h = e_hat.h
    out = np.zeros((e_hat.n, e_hat.n))
    div = ((v[2:, 1:-1, 0] - v[:-2, 1:-1, 0])
           + (v[1:-1, 2:, 1] - v[1:-1, :-2, 1])) / (2.0 * h)
    out[1:-1, 1:-1] = RECOVERY_SIGN * div
    return out


@dataclass
class MetricsReport:
    rel_l2: float
    rel_linf: float
    cut: float

    def row(self):
        return {"rel_l2": self.rel_l2, "rel_linf": self.rel_linf, "cut": self.cut}


def metrics(n_hat, profile: DopingProfile, radius=1.0, cut=0.85) -> MetricsReport:
    """Relative L2 and Linf errors against the profile on |x| <= cut R."""
    n = n_hat.shape[0]
    c = cell_centers(n, radius)
    X, Y = np.meshgrid(c, c, indexing="ij")
    sel = X * X + Y * Y <= (cut * radius) ** 2
    pts = np.column_stack([X[sel], Y[sel]])
    truth = profile.eval(pts)
    diff = n_hat[sel] - truth
    l2 = np.sqrt((diff ** 2).sum())
    tl2 = np.sqrt((truth ** 2).sum())
    linf = np.abs(diff).max()
    tinf = np.abs(truth).max()
    return MetricsReport(float(l2 / tl2) if tl2 > 0 else float(l2),
                         float(linf / tinf) if tinf > 0 else float(linf),
                         cut)


@dataclass
class ReconstructionResult:
    e_hat: FieldGrid
    n_hat: np.ndarray
    report: MetricsReport


def reconstruct(sino: Sinogram, n, profile: DopingProfile = None,
                cut=0.85) -> ReconstructionResult:
    """FBP both components, recover the profile, optionally score it."""
    e_hat = fbp_vector(sino, n)
    n_hat = recover_N(e_hat)
    rep = metrics(n_hat, profile, sino.radius, cut) if profile is not None else None
    return ReconstructionResult(e_hat, n_hat, rep)
