"""Acceptance gates for the full pipeline, one printed PASS/FAIL line each.

Order mirrors the gate list: streaming exactness, the constant-profile
deflection oracle, speed convergence, exit-time bounds, contraction,
Jacobian consistency, both end-to-end reconstructions, and the field
assembly oracle.
"""

import numpy as np
import pytest

from vptomo import albedo, geometry, kinetic, poisson, profiles
from vptomo import characteristics as chars
from vptomo import tomography as tomo
from vptomo.characteristics import PhasePoint


def _report(name, ok, detail):
    print(f"ACCEPTANCE {'PASS' if ok else 'FAIL'} {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def gauss_sweep(domain, gauss_field_128):
    # a chord in generic position; symmetric chords show super-convergence
    # that would sit outside the expected order band
    chord = geometry.chord_from(domain, 1.1, -0.45)
    opts = albedo.MeasureOptions(e_n=gauss_field_128)
    return albedo.sweep_and_extrapolate(chord, profiles.gaussian(),
                                        speeds=(25.0, 50.0, 100.0, 200.0),
                                        opts=opts)


def test_01_free_streaming(domain, zero_field):
    rng = np.random.default_rng(101)
    opts = albedo.MeasureOptions(self_consistent=False, e_n=zero_field)
    worst_t = worst_v = 0.0
    for _ in range(20):
        ch = geometry.chord_from(domain, rng.uniform(0, np.pi), rng.uniform(-0.9, 0.9))
        m = albedo.measure_beam(ch, 50.0, profiles.constant(0.0), opts)
        worst_t = max(worst_t, abs(m.exit.t_plus - m.t_star) / m.t_star)
        worst_v = max(worst_v, np.abs(m.exit.v_plus - 50.0 * ch.direction).max() / 50.0)
    ok = worst_t < 1e-10 and worst_v < 1e-10
    _report("free-streaming", ok,
            f"rel t gap {worst_t:.2e}, rel v gap {worst_v:.2e} (gate 1e-10)")


def test_02_constant_deflection(domain, const_field_128):
    opts = albedo.MeasureOptions(e_n=const_field_128)
    worst = worst_par = 0.0
    for s in (0.0, 0.3, -0.3, 0.6, -0.6):
        ch = geometry.chord_from(domain, np.pi / 2, s)
        m = albedo.measure_beam(ch, 100.0, profiles.constant(1.0), opts)
        target = -s * np.sqrt(1.0 - s * s)
        gap = abs(m.m_perp - target)
        # 1% of the target, read as 1% absolute where the target is zero
        worst = max(worst, gap / (0.01 * abs(target)) if target else gap / 0.01)
        worst_par = max(worst_par, abs(m.m_parallel))
    ok = worst < 1.0 and worst_par <= 0.01
    _report("constant-deflection", ok,
            f"worst m_perp gap {worst:.3f} of the 1% gate, "
            f"worst |m_par| {worst_par:.2e} (gate 1e-2)")


def test_03_speed_convergence(gauss_sweep, gauss_field_128):
    oracle = tomo.chord_integral(gauss_field_128, gauss_sweep.chord)
    errs = np.array([np.linalg.norm(m.m - oracle) for m in gauss_sweep.measurements])
    order = -np.polyfit(np.log(gauss_sweep.speeds), np.log(errs), 1)[0]
    ok = 1.0 < order < 3.0
    _report("speed-convergence", ok,
            f"fitted order {order:.3f} (gate 1..3), errors {errs[0]:.2e}..{errs[-1]:.2e}")


def test_04_exit_time_bounds(gauss_sweep, gauss_field_128):
    thr = chars.nontrapping_threshold(gauss_field_128)
    caps_ok = True
    gaps = []
    for m in gauss_sweep.measurements:
        assert m.speed >= thr
        cap = chars.exit_time_bound(gauss_field_128, m.speed)
        caps_ok = caps_ok and m.exit.t_plus <= cap
        gaps.append(abs(m.exit.t_plus - m.t_star))
    order = -np.polyfit(np.log(gauss_sweep.speeds), np.log(gaps), 1)[0]
    ok = caps_ok and order >= 2.0
    _report("exit-time-bounds", ok,
            f"caps hold {caps_ok}, |t - t*| decay order {order:.3f} (gate >= 2)")


def test_05_contraction(gauss_sweep):
    lam = {m.speed: m.lambda_hat for m in gauss_sweep.measurements}
    ok = lam[50.0] < 0.5 and lam[100.0] < lam[50.0]
    _report("contraction", ok,
            f"lambda(50) {lam[50.0]:.2e} (gate 0.5), lambda(100) {lam[100.0]:.2e}")


def test_06_jacobian_consistency(domain, const_field_256):
    rng = np.random.default_rng(106)
    d = 1e-5
    worst = worst_det = 0.0
    for _ in range(10):
        ch = geometry.chord_from(domain, rng.uniform(0, np.pi), rng.uniform(-0.8, 0.8))
        speed = rng.uniform(30.0, 80.0)
        x0 = ch.point(rng.uniform(0.25, 0.75) * ch.length)
        z0 = np.concatenate([x0, speed * ch.direction])
        jac = chars.exit_map_jacobians(PhasePoint(z0[:2], z0[2:]), const_field_256)
        _, var = chars.trace_variational(PhasePoint(z0[:2], z0[2:]), const_field_256,
                                         direction="backward")
        worst_det = max(worst_det, abs(var.det - 1.0))
        for k in range(4):
            e = np.zeros(4)
            e[k] = d
            zp, zm = z0 + e, z0 - e
            rp = chars.trace(PhasePoint(zp[:2], zp[2:]), const_field_256, "backward")
            rm = chars.trace(PhasePoint(zm[:2], zm[2:]), const_field_256, "backward")
            fd_t = (rp.t_plus - rm.t_plus) / (2 * d)
            fd_x = (rp.x_plus - rm.x_plus) / (2 * d)
            fd_v = (rp.v_plus - rm.v_plus) / (2 * d)
            worst = max(worst, abs(fd_t - jac.grad_t[k]) / max(1.0, abs(jac.grad_t[k])))
            worst = max(worst, np.abs(fd_x - jac.grad_x[:, k]).max())
            worst = max(worst, np.abs(fd_v - jac.grad_v[:, k]).max() / speed)
    ok = worst < 1e-4 and worst_det < 1e-6
    _report("jacobian-consistency", ok,
            f"worst FD gap {worst:.2e} (gate 1e-4), worst |det-1| {worst_det:.2e} (gate 1e-6)")


def test_07_oracle_end_to_end():
    gauss = profiles.gaussian()
    e_n = poisson.assemble_field(poisson.source_from_profile(gauss, 256))
    opts = tomo.AcquireOptions(measure=albedo.MeasureOptions(e_n=e_n))
    sino = tomo.acquire(gauss, 180, 129, mode="oracle", opts=opts)
    res = tomo.reconstruct(sino, 128, gauss, cut=0.85)
    ok = res.report.rel_l2 <= 0.05
    _report("oracle-end-to-end", ok,
            f"rel L2 {res.report.rel_l2:.4f} on |x| <= 0.85 (gate 0.05)")


def test_08_simulate_end_to_end(gauss_field_128):
    gauss = profiles.gaussian()
    opts = tomo.AcquireOptions(measure=albedo.MeasureOptions(e_n=gauss_field_128))
    sino = tomo.acquire(gauss, 90, 65, speeds=(50.0, 100.0), mode="simulate",
                        opts=opts)
    res = tomo.reconstruct(sino, 128, gauss, cut=0.85)
    ok = res.report.rel_l2 <= 0.15
    _report("simulate-end-to-end", ok,
            f"rel L2 {res.report.rel_l2:.4f} on |x| <= 0.85 (gate 0.15), "
            f"{len(sino.meta['failures'])} patched chords")


def test_09_field_solver_oracle(const_field_256):
    X, Y = poisson.center_mesh(256, 1.0)
    exact = -0.5 * np.stack([X, Y], axis=-1)
    sel = X * X + Y * Y <= 0.9**2
    gap = np.linalg.norm((const_field_256.values - exact)[sel], axis=-1).max()
    rel = gap / 0.5
    ok = rel < 0.005
    _report("field-solver-oracle", ok, f"sup-normalized gap {rel:.2e} (gate 5e-3)")
