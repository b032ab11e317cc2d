import numpy as np
import pytest

from vptomo import profiles
from vptomo.errors import NoAnalyticReferenceError
from vptomo.geometry import DiskDomain, chord_from
from vptomo.profiles import RECOVERY_SIGN


def test_constant_reference_field():
    prof = profiles.constant(2.0)
    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.7, 0.7, size=(64, 2))
    field = profiles.reference_field(prof, pts)
    assert np.abs(field - (-2.0 * pts / 2)).max() < 1e-12


def test_constant_chord_integral():
    domain = DiskDomain(1.0)
    chord = chord_from(domain, np.pi / 2, 0.6)
    m = profiles.reference_chord_integral(profiles.constant(1.0), chord)
    # perpendicular part is -n0 s sqrt(1 - s^2), parallel part vanishes
    assert abs(m @ chord.perp - (-0.6 * np.sqrt(1 - 0.36))) < 1e-12
    assert abs(m @ chord.direction) < 1e-12
    assert abs(m @ chord.perp + 0.48) < 1e-12


def test_reference_laplacian_residual():
    prof = profiles.radial_polynomial((1.0, -1.0))
    ref = profiles.AnalyticReference(prof)
    rng = np.random.default_rng(8)
    pts = rng.uniform(-0.65, 0.65, size=(128, 2))
    # 5-point FD probe with step d: truncation floor is O(d^2)
    assert ref.laplacian_residual(pts) < 5 * (1e-4) ** 2


def test_reference_linearity():
    rng = np.random.default_rng(9)
    pts = rng.uniform(-0.6, 0.6, size=(32, 2))
    one = profiles.reference_field(profiles.radial_polynomial((1.0, 0.5)), pts)
    scaled = profiles.reference_field(profiles.radial_polynomial((2.5, 1.25)), pts)
    assert np.abs(scaled - 2.5 * one).max() < 1e-12 * np.abs(scaled).max()


def test_gaussian_defaults():
    prof = profiles.gaussian()
    assert prof.kind == "gaussian"
    peak = prof.eval(np.array([[0.2, 0.0]]))
    assert abs(peak[0] - 1.0) < 1e-14
    far = prof.eval(np.array([[0.2 + 6 * 0.15, 0.0]]))
    assert far[0] < 2e-8


def test_gaussian_has_no_closed_form():
    with pytest.raises(NoAnalyticReferenceError):
        profiles.reference_field(profiles.gaussian(), np.zeros((1, 2)))


def test_grid_profile_roundtrip():
    n = 48
    c = (np.arange(n) + 0.5) * (2.0 / n) - 1.0
    X, Y = np.meshgrid(c, c, indexing="ij")
    vals = 0.3 + 0.1 * X
    prof = profiles.from_grid(vals)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    back = prof.eval(pts).reshape(n, n)
    inside = X * X + Y * Y <= 0.8 ** 2
    assert np.abs(back - vals)[inside].max() < 1e-10


def test_recovery_sign_is_fixed():
    # the doping enters the potential equation with this orientation;
    # flipping it silently would negate every reconstruction
    assert RECOVERY_SIGN == -1.0
