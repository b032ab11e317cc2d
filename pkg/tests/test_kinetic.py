"""Beam construction, density deposition, and the self-consistency loop."""

import numpy as np
import pytest

from vptomo import geometry, kinetic, profiles
from vptomo.errors import BeamDefinitionError, NonContractionError


@pytest.fixture(scope="module")
def beam(domain):
    ch = geometry.chord_from(domain, np.pi / 2, 0.3)
    return kinetic.make_beam(ch.entry, ch.direction, 50.0, domain=domain)


def test_bump_values():
    assert kinetic.bump(0.0) == 1.0
    assert kinetic.bump(1.0) == 0.0
    assert kinetic.bump(-1.0) == 0.0
    assert kinetic.bump(2.7) == 0.0
    assert abs(kinetic.bump(0.5) - 0.7165313105737893) < 1e-12
    arr = kinetic.bump(np.array([0.0, 0.5, 0.999, 1.0, 3.0]))
    assert arr.shape == (5,)
    assert arr[3] == 0.0 and arr[4] == 0.0
    assert np.all(np.diff(arr[:4]) < 0)


def test_beam_shape(beam):
    assert beam.eps == 1.0 / 50.0
    assert beam.psi(beam.x0, beam.p0) == 1.0
    # support edge in x and in v, both exact zeros
    assert beam.psi(beam.x0 + [beam.eps, 0.0], beam.p0) == 0.0
    assert beam.psi(beam.x0, beam.p0 + [0.0, beam.eps]) == 0.0


def test_make_beam_rejections(domain):
    ch = geometry.chord_from(domain, np.pi / 2, 0.3)
    with pytest.raises(BeamDefinitionError):
        kinetic.make_beam(ch.entry, -ch.direction, 50.0, domain=domain)
    with pytest.raises(BeamDefinitionError):
        kinetic.make_beam(ch.entry, ch.direction, -1.0, domain=domain)
    with pytest.raises(BeamDefinitionError):
        kinetic.make_beam(ch.entry, [0.0, 0.0], 50.0, domain=domain)
    with pytest.raises(BeamDefinitionError):
        kinetic.make_beam(ch.entry, ch.direction, 50.0, domain=domain, threshold=1e9)


def test_deposit_refinement(beam, gauss_field_128):
    r8, _ = kinetic.deposit_rho(beam, gauss_field_128, n_v=8)
    r16, _ = kinetic.deposit_rho(beam, gauss_field_128, n_v=16)
    rel = np.abs(r8.values - r16.values).max() / np.abs(r16.values).max()
    assert rel < 2e-2


def test_deposit_mass_bound(beam, gauss_field_128):
    rho, rep = kinetic.deposit_rho(beam, gauss_field_128, n_v=8)
    # rho integrates psi <= 1 over a velocity ball of radius 2 eps
    assert np.abs(rho.values).max() <= 4 * np.pi * beam.eps**2
    assert rep.psi_max <= 1.0 + 1e-12
    assert rep.trapped == 0 and rep.left_grid == 0


def test_filters_are_exact(beam, gauss_field_128):
    rf, _ = kinetic.deposit_rho(beam, gauss_field_128, n_v=8, filtered=True)
    ru, _ = kinetic.deposit_rho(beam, gauss_field_128, n_v=8, filtered=False)
    assert np.array_equal(rf.values, ru.values)


def test_outer_band_is_empty(beam, gauss_field_128):
    smax, tried = kinetic.sample_band_unfiltered(beam, gauss_field_128, n_v=8)
    assert tried == 256
    assert smax == 0.0


def test_zero_profile_solve(beam):
    st = kinetic.fixed_point_solve(beam, profiles.constant(0.0), n_field=64)
    assert st.report["converged"]
    assert st.iteration <= 3
    assert all(b < a for a, b in zip(st.residuals, st.residuals[1:]))
    assert st.lambda_hat == st.residuals[1] / st.residuals[0]
    # only the beam's own charge feeds back
    assert st.lambda_hat < 1e-6


def test_gaussian_solve_contracts(beam, gauss_field_128):
    st = kinetic.fixed_point_solve(beam, profiles.gaussian(), e_n=gauss_field_128)
    assert st.report["converged"]
    assert st.iteration == 2
    assert st.lambda_hat < 0.5
    assert st.report["support_band_max"] == 0.0


def test_non_contraction_error_attrs():
    err = NonContractionError(12.5, [1.1, 1.2])
    assert err.speed == 12.5
    assert err.ratios == [1.1, 1.2]
    assert err.code == "non-contraction"
