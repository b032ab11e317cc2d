"""Field assembly on the disk: Green's kernel identities, accuracy against
the closed-form constant-source field, linearity, and symmetry."""

import numpy as np
import pytest

from vptomo import poisson, profiles


def test_greens_boundary_zero():
    rng = np.random.default_rng(3)
    y = rng.uniform(-0.6, 0.6, size=(32, 2))
    th = rng.uniform(0.0, 2 * np.pi, size=32)
    x = np.stack([np.cos(th), np.sin(th)], axis=-1)
    assert np.abs(poisson.greens_function(x, y)).max() < 1e-12


def test_greens_symmetry():
    rng = np.random.default_rng(4)
    x = rng.uniform(-0.7, 0.7, size=(64, 2))
    y = rng.uniform(-0.7, 0.7, size=(64, 2))
    gxy = poisson.greens_function(x, y)
    gyx = poisson.greens_function(y, x)
    assert np.abs(gxy - gyx).max() < 1e-12


def test_greens_gradient_matches_fd():
    rng = np.random.default_rng(5)
    x = rng.uniform(-0.7, 0.7, size=(16, 2))
    y = rng.uniform(-0.7, 0.7, size=(16, 2))
    grad = poisson.greens_gradient(x, y)
    d = 1e-6
    for axis in range(2):
        e = np.zeros(2)
        e[axis] = d
        fd = (poisson.greens_function(x + e, y)
              - poisson.greens_function(x - e, y)) / (2 * d)
        assert np.abs(grad[:, axis] - fd).max() < 1e-6


def test_constant_source_accuracy(const_field_128):
    # exact field of the unit source is -x/2; errors shrink with n
    errs = {}
    for nx, fld in ((32, None), (64, None), (128, const_field_128)):
        if fld is None:
            src = poisson.source_from_profile(profiles.constant(1.0), nx)
            fld = poisson.assemble_field(src)
        X, Y = poisson.center_mesh(nx, 1.0)
        exact = -0.5 * np.stack([X, Y], axis=-1)
        sel = X * X + Y * Y <= 0.9**2
        gap = np.linalg.norm((fld.values - exact)[sel], axis=-1)
        errs[nx] = gap.max() / 0.5
    assert errs[32] < 1.2e-3
    assert errs[64] < 5e-4
    assert errs[64] < errs[32] and errs[128] < errs[64]


def test_assembly_linearity():
    n = 32
    rng = np.random.default_rng(6)
    s1 = poisson.SourceGrid(1.0, rng.standard_normal((n, n)))
    s2 = poisson.SourceGrid(1.0, rng.standard_normal((n, n)))
    combo = poisson.SourceGrid(1.0, 0.7 * s1.values - 1.3 * s2.values)
    f1 = poisson.assemble_field(s1)
    f2 = poisson.assemble_field(s2)
    fc = poisson.assemble_field(combo)
    gap = fc.values - (0.7 * f1.values - 1.3 * f2.values)
    assert np.abs(gap).max() < 1e-12


def test_rotational_symmetry():
    # constant source is invariant under a quarter turn, so the field
    # commutes with it: E(Rx) = R E(x) with R = [[0, -1], [1, 0]]
    src = poisson.source_from_profile(profiles.constant(1.0), 32)
    fld = poisson.assemble_field(src)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    rotated = np.rot90(fld.values @ rot.T, k=1, axes=(0, 1))
    assert np.abs(rotated - fld.values).max() < 1e-12


def test_curl_small():
    src = poisson.source_from_profile(profiles.gaussian(), 64)
    fld = poisson.assemble_field(src)
    h = fld.h
    E = fld.values
    curl = ((E[2:, 1:-1, 1] - E[:-2, 1:-1, 1])
            - (E[1:-1, 2:, 0] - E[1:-1, :-2, 0])) / (2 * h)
    R = np.hypot(*poisson.center_mesh(64, 1.0))[1:-1, 1:-1]
    assert np.abs(curl)[R <= 0.8].max() < 0.05 * h


def test_source_from_profile_masked():
    src = poisson.source_from_profile(profiles.gaussian(), 48)
    assert np.all(src.values[~src.mask] == 0.0)
    assert src.values[src.mask].max() > 0.5


def test_field_bound_diagnostics(const_field_128):
    src = poisson.source_from_profile(profiles.constant(1.0), 128)
    diag = poisson.field_bound_diagnostics(const_field_128, src)
    # sup |E| / sup N = R/2 for the constant unit source
    assert abs(diag.ratio - 0.5) < 0.05
    assert diag.M1 > 0.0
    assert not diag.flagged


def test_interp_outside_raises(const_field_128):
    with pytest.raises(poisson.OutsideGridError):
        const_field_128.interp(np.array([2.5, 0.0]))
