from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_modes, random_modes
from fpja.coupled_modes import PumpSet, amplitude_gains
from fpja.errors import InterpolationIllConditioned, OutOfRegime
from fpja.stability import (
    characteristic_polynomial,
    characteristic_roots,
    critical_beta_bb,
    hurwitz_stable,
    langevin_matrix,
    performance_bounds,
    pole_beta_bb,
    r_from_direct_gain,
    routh_coefficients,
    routh_table,
    stability_region,
)


def test_routh_table_known_polynomials():
    assert hurwitz_stable(np.poly([-1, -2, -3]))
    assert not hurwitz_stable(np.poly([-1, -2, 0.5]))
    # positive coefficients but a right-half-plane pair: s^3 + s^2 + s + 6
    assert not hurwitz_stable([1, 1, 1, 6])
    t = routh_table([1, 6, 11, 6])
    np.testing.assert_allclose(t[:, 0], [1, 6, 10, 6])


def test_routh_passive_circulator_always_stable():
    rng = np.random.default_rng(0)
    for _ in range(50):
        modes = random_modes(rng)
        rep = routh_coefficients(modes, rng.uniform(0, 2), 0.0, rng.uniform(-np.pi, np.pi))
        coeffs = [rep.b1_plus, rep.b2_plus, rep.b3_plus, rep.b1_minus, rep.b2_minus, rep.b3_minus]
        assert all(c > 0 for c in coeffs)
        assert rep.stable


def test_routh_pole_condition(lossless_modes):
    assert routh_coefficients(lossless_modes, 1.0, 2.49, math.pi / 2).stable
    assert not routh_coefficients(lossless_modes, 1.0, 2.51, math.pi / 2).stable
    assert pole_beta_bb(1.0) == 2.5


def test_regime_bound_device_kappas(lossless_modes):
    assert performance_bounds(lossless_modes).max_beta_ab_sq == pytest.approx(128 / 60)


def test_routh_out_of_regime(lossless_modes):
    with pytest.raises(OutOfRegime):
        routh_coefficients(lossless_modes, 1.0, 1.0, math.pi / 2, beta_ac_mag=0.4)
    with pytest.raises(OutOfRegime):
        routh_coefficients(lossless_modes, 1.0, 1.0, math.pi / 2, beta_bc_mag=0.9)


@given(st.floats(0, 2), st.floats(-2 * math.pi, 2 * math.pi))
def test_b_phi_nonnegative(ab, phi):
    rep = routh_coefficients(make_modes(), ab, 1.0, phi)
    assert rep.b_phi >= 0


def test_b_phi_closed_form(lossless_modes):
    k = np.array([m.kappa for m in lossless_modes])
    rep = routh_coefficients(lossless_modes, 0.7, 1.0, 0.3)
    assert rep.b_phi == pytest.approx(np.prod(k) ** 2 * 0.7 ** 4 * math.cos(0.3) ** 2)


def test_b_phi_zero_at_directional_phases(lossless_modes):
    for phi in (math.pi / 2, -math.pi / 2):
        assert routh_coefficients(lossless_modes, 1.3, 1.0, phi).b_phi < 1e-20 * (83e6 * 15e6 * 45e6) ** 2


def test_factored_polynomial_matches_determinant():
    rng = np.random.default_rng(1)
    for _ in range(100):
        modes = random_modes(rng)
        ab, bb, phi = rng.uniform(0, 2), rng.uniform(0, 3), rng.uniform(-np.pi, np.pi)
        rep = routh_coefficients(modes, ab, bb, phi)
        num = characteristic_roots(modes, PumpSet.canonical(ab, ab, 0.5, bb, phi_loop=phi))
        np.testing.assert_allclose(rep.poly, num.poly, rtol=0, atol=1e-10 * np.max(np.abs(num.poly)))


def test_pumps_off_roots(lossless_modes):
    rep = characteristic_roots(lossless_modes, PumpSet())
    k = np.array([m.kappa for m in lossless_modes])
    expected = np.sort(np.repeat(-k / 2, 2))
    np.testing.assert_allclose(np.sort(rep.roots.real), expected, rtol=1e-5)
    assert rep.stable


def test_roots_match_langevin_eigenvalues():
    rng = np.random.default_rng(2)
    for _ in range(50):
        modes = random_modes(rng)
        v = rng.uniform(0, 1.5, 4)
        ph = rng.uniform(-np.pi, np.pi, 4)
        pumps = PumpSet(*(v * np.exp(1j * ph)))
        L = langevin_matrix(modes, pumps)
        ev = np.linalg.eigvals(L)
        rep = characteristic_roots(modes, pumps)
        assert rep.margin == pytest.approx(np.max(ev.real), abs=1e-4 * max(m.kappa for m in modes))


def test_polynomial_reconstruction_at_fresh_points(device_modes, device_pumps):
    L = langevin_matrix(device_modes, device_pumps)
    scale = max(m.kappa for m in device_modes)
    poly = characteristic_polynomial(L, scale)
    for z in np.random.default_rng(4).uniform(-2, 2, 20) + 1j * np.random.default_rng(5).uniform(-2, 2, 20):
        lam = z * scale
        direct = np.linalg.det(lam * np.eye(6) - L)
        assert abs(np.polyval(poly, lam) - direct) <= 1e-8 * abs(direct)


def test_ill_conditioned_nodes(device_modes, device_pumps):
    L = langevin_matrix(device_modes, device_pumps)
    with pytest.raises(InterpolationIllConditioned):
        characteristic_polynomial(L, 1.0, nodes=np.linspace(0, 1e-3, 7))


def test_routh_agrees_with_roots():
    rng = np.random.default_rng(6)
    for _ in range(200):
        modes = random_modes(rng)
        k = [m.kappa for m in modes]
        ab = rng.uniform(0, 2)
        first = min(0.5 + 2 * ab ** 2, 0.5 + (k[0] + k[2]) / (2 * k[1]),
                    0.5 + 2 * ab ** 2 + k[0] * k[2] / (k[1] * (k[0] + k[2])))
        bb = rng.uniform(0, 1.2 * first)
        phi = rng.choice([math.pi / 2, -math.pi / 2])
        verdict = routh_coefficients(modes, ab, bb, phi).stable
        assert verdict == characteristic_roots(modes, PumpSet.canonical(ab, ab, 0.5, bb, phi_loop=phi)).stable


def test_critical_beta_bb_is_pole(lossless_modes):
    assert critical_beta_bb(lossless_modes, 1.0) == pytest.approx(2.5, rel=1e-6)


def test_r_from_direct_gain_inverts_gain_formula():
    for r in (0.1, 0.5, 0.91):
        gs = amplitude_gains(0.8, r, 0.99, 0.99)[0]
        assert r_from_direct_gain(20 * math.log10(gs), 0.8, 0.99, 0.99) == pytest.approx(r)
    assert math.isnan(r_from_direct_gain(-20.0, 0.8))


def test_region_symmetry_and_directional_stability(device_modes):
    phis = np.linspace(-math.pi, math.pi, 25)
    reg = stability_region(device_modes, 1.0, np.linspace(-10, 30, 21), phis)
    np.testing.assert_array_equal(reg.stable, reg.stable[:, ::-1])
    j = int(np.argmin(np.abs(phis - math.pi / 2)))
    assert (reg.stable[:, j] | reg.unknown[:, j]).all()
    assert reg.stable[~reg.unknown[:, j], j].any()
    assert reg.unknown[0].all()  # -10 dB lies below the pump-off direct gain at s = 0.8


def test_region_rejects_bad_grid(device_modes):
    with pytest.raises(ValueError):
        stability_region(device_modes, 1.0, [1.0, 0.0], [0.0, 1.0])


def test_performance_bounds_examples():
    b = performance_bounds(make_modes())
    assert b.max_eta == pytest.approx(128 / 143)
    assert b.min_n_add == pytest.approx(15 / 256)
    assert b.min_sqrt_GY == pytest.approx(15 / 143)
    improved = performance_bounds(make_modes((166.0, 3.0, 90.0)))
    assert improved.max_eta > 0.95
    assert improved.max_eta == pytest.approx(256 / 259)
    assert b.min_n_add / improved.min_n_add == pytest.approx(10.0)
    tiny = performance_bounds(make_modes((83.0, 1e-9, 45.0)))
    assert tiny.max_eta == pytest.approx(1.0)
    assert tiny.min_n_add == pytest.approx(0.0, abs=1e-10)


@settings(deadline=None)
@given(st.floats(0.05, 1.4), st.floats(0.0, 0.95))
def test_n_add_respects_bound_in_design_regime(ab, r):
    from fpja.noise import added_noise_fpja
    modes = make_modes()
    bound = performance_bounds(modes)
    gx = amplitude_gains(4 * ab ** 2 / (1 + 4 * ab ** 2), r)[2]
    if gx <= 0:
        return
    assert added_noise_fpja(ab, sqrt_gain_x=gx) > bound.min_n_add
