"""Acceptance criteria, each at its stated tolerance.

Every test records one ``criterion N: PASS|FAIL ...`` line, printed in the
terminal summary, before asserting.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, make_modes, random_modes
from fpja.config import load_config
from fpja.coupled_modes import (
    A_S,
    C_S,
    DetuningVector,
    PumpSet,
    amplitude_gains,
    build_coupling_matrix,
    gain_summary_from_sr,
    scattering_matrix,
    simulate,
    sweep_scattering,
    to_db,
)
from fpja.errors import NearSingular, StabilityBoundViolated
from fpja.noise import added_noise_fpja, noise_report, output_covariance, system_efficiency
from fpja.quadrature import X_A, X_C, Y_A, Y_C, quadrature_matrix
from fpja.stability import (
    characteristic_roots,
    critical_beta_bb,
    performance_bounds,
    pole_beta_bb,
    routh_coefficients,
    stability_region,
)
from fpja.tuning import TuningTargets, program_device, simulated_gx_db

MHZ = 2 * math.pi * 1e6
SIGMA = np.diag([1, 1, 1, -1, -1, -1])


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def device():
    return load_config("paper_device")


def test_criterion_1_directional_gain_sweep(device):
    modes, pumps = device.mode_params(), device.pump_set()
    res = sweep_scattering(modes, pumps, device.grid("delta_mhz") * MHZ)
    S0 = simulate(modes, pumps)
    fwd = float(to_db(abs(S0[A_S, C_S]) ** 2))
    rev = float(to_db(abs(S0[C_S, A_S]) ** 2))
    bw = res.bandwidth_3db / MHZ
    rl = res.return_loss_band / MHZ
    ok = abs(fwd - 18) <= 1 and abs(rev) <= 0.5 and abs(bw - 7) <= 2 and rl >= 3
    record(1, ok, f"forward {fwd:.3f} dB, reverse {rev:.3f} dB, -3 dB width {bw:.3f} MHz, "
                  f">10 dB return loss over {rl:.3f} MHz")


def test_criterion_2_quadrature_gains(device):
    g = gain_summary_from_sr(0.8, 0.91, 0.99, 0.99)
    modes, pumps = device.mode_params(), device.pump_set()
    Q = quadrature_matrix(simulate(modes, pumps))
    sim_gx = Q[X_A, Y_C].real ** 2
    formula_gx = amplitude_gains(0.8, 0.91, 0.99, 0.99)[2] ** 2
    lossless = make_modes()
    Q0 = quadrature_matrix(simulate(lossless, pumps))
    sim_gy = Q0[Y_A, X_C].real ** 2
    formula_gy = amplitude_gains(0.8, 0.91)[3] ** 2
    gy_db = float(to_db(formula_gy))
    ok = (abs(g.gain_x_db - 24.4) <= 0.1
          and abs(sim_gx - formula_gx) <= 1e-10 * formula_gx
          and abs(g.gain_x_db - 24.0) <= 1.0
          and abs(sim_gy - formula_gy) <= 1e-10 * formula_gy)
    # G_Y is checked against the formula only; the value is reported for reference
    record(2, ok, f"G_X {g.gain_x_db:.4f} dB (simulated vs formula rel err "
                  f"{abs(sim_gx - formula_gx) / formula_gx:.2e}); lossless G_Y {gy_db:.3f} dB "
                  f"(simulated vs formula rel err {abs(sim_gy - formula_gy) / formula_gy:.2e}), "
                  f"G_Y at eta = 0.99 {g.gain_y_db:.3f} dB")


def test_criterion_3_noise_pipeline():
    rng = np.random.default_rng(30)
    worst, n_done = 0.0, 0
    while n_done < 200:
        modes = random_modes(rng)
        ab = rng.uniform(0.1, 1.4)
        r = rng.uniform(0.0, 0.95)
        pumps = PumpSet.canonical(ab, ab, 0.5, r * (1 + 4 * ab ** 2) / 2)
        if not characteristic_roots(modes, pumps).stable:
            continue
        # Var(X_a,out) = G_X (1/2 + n_add), with X_a fed from Y_c
        S = simulate(modes, pumps)
        V = output_covariance(S)
        sqrt_gx = quadrature_matrix(S)[X_A, Y_C].real
        n_cov = V[X_A, X_A] / sqrt_gx ** 2 - 0.5
        worst = max(worst, abs(n_cov - added_noise_fpja(ab, sqrt_gain_x=sqrt_gx)))
        n_done += 1
    limit = added_noise_fpja(1.0, 1e6)
    ok = worst <= 1e-8 and abs(limit - 0.125) <= 1e-4
    record(3, ok, f"max |n_add(covariance) - formula| = {worst:.2e} over {n_done} configs; "
                  f"n_add(|beta_ab| = 1, G_X = 1e6) = {limit:.6f} (|diff from 1/8| = {abs(limit - 0.125):.2e})")


def test_criterion_4_efficiency_bounds(device):
    modes = make_modes()
    b = performance_bounds(modes)
    rng = np.random.default_rng(40)
    worst_excess, count = -math.inf, 0
    ab_max = math.sqrt(b.max_beta_ab_sq)
    for _ in range(300):
        ab = rng.uniform(0.05, ab_max)
        r = rng.uniform(0.0, 0.99)
        pumps = PumpSet.canonical(ab, ab, 0.5, r * (1 + 4 * ab ** 2) / 2)
        if amplitude_gains(4 * ab ** 2 / (1 + 4 * ab ** 2), r)[2] <= 0:
            continue  # outside the amplifying regime
        if not characteristic_roots(modes, pumps).stable:
            continue
        rep = noise_report(modes, pumps, chain=device.chain_noise)
        worst_excess = max(worst_excess, rep.eta_meas - b.max_eta)
        count += 1
    eff = system_efficiency(added_noise_fpja(1.0, 276.0), device.chain_noise.photons, 276.0)
    ok = (abs(b.max_eta - 0.8951) <= 1e-4 and abs(b.min_n_add - 0.0586) <= 1e-4
          and worst_excess <= 1e-9 and count > 0 and abs(eff.eta - 0.70) <= 0.01)
    record(4, ok, f"eta_max {b.max_eta:.5f}, n_add_min {b.min_n_add:.5f}, "
                  f"max(eta_meas - eta_max) = {worst_excess:.3g} over {count} configs, "
                  f"eta(G_X = 276) {eff.eta:.4f}")


def test_criterion_5_stability_oracles():
    rng = np.random.default_rng(50)
    agree = 0
    for _ in range(1000):
        modes = random_modes(rng)
        ab = rng.uniform(0, 2)
        bb = rng.uniform(0, 1.2 * (0.5 + 2 * ab ** 2))
        phi = rng.choice([math.pi / 2, -math.pi / 2])
        verdict = routh_coefficients(modes, ab, bb, phi).stable
        agree += verdict == characteristic_roots(modes, PumpSet.canonical(ab, ab, 0.5, bb, phi_loop=phi)).stable
    worst = 0.0
    for modes in (make_modes(), make_modes(eta=(0.99, 0.9, 0.99))):
        for ab in (0.5, 1.0, 1.3):
            pole = pole_beta_bb(ab)
            worst = max(worst, abs(critical_beta_bb(modes, ab) - pole) / pole)
    ok = agree == 1000 and worst <= 1e-6
    record(5, ok, f"Routh/roots agreement {agree}/1000; max relative offset of margin zero "
                  f"from the r = 1 pole {worst:.2e}")


def test_criterion_6_stability_region(device):
    modes, pumps = device.mode_params(), device.pump_set()
    ab = abs(pumps.beta_ab)
    reg = stability_region(modes, ab, device.grid("gain_db"), device.grid("loop_phase_rad"),
                           beta_ac_mag=abs(pumps.beta_ac))
    widths = reg.unstable_width()
    known = ~np.all(reg.unknown, axis=1)
    monotone = bool(np.all(np.diff(widths[known]) >= 0))
    widens = monotone and widths[known][-1] > widths[known][0]
    t0 = reg.threshold_phi0_db
    ok = math.isfinite(t0) and 3 <= t0 <= 9 and widens
    record(6, ok, f"threshold at phi_loop = 0: {t0} dB; unstable loop-phase cells per gain row "
                  f"{widths.tolist()} (monotone widening: {widens})")


def test_criterion_7_symplectic():
    rng = np.random.default_rng(70)
    worst, n_done = 0.0, 0
    while n_done < 500:
        modes = random_modes(rng)
        pumps = PumpSet(*(rng.uniform(0, 1.2, 4) * np.exp(1j * rng.uniform(-np.pi, np.pi, 4))))
        k = np.array([m.kappa for m in modes])
        det = DetuningVector.from_offsets(modes, rng.uniform(-1, 1, 3) * k, rng.uniform(-1, 1, 3) * k)
        try:
            S = scattering_matrix(build_coupling_matrix(modes, pumps, det), modes)
        except NearSingular:
            continue
        worst = max(worst, float(np.max(np.abs(S @ SIGMA @ S.conj().T - SIGMA))))
        n_done += 1
    ok = worst <= 1e-10
    record(7, ok, f"max |S Sigma S^dagger - Sigma| = {worst:.2e} over {n_done} configs")


def test_criterion_8_end_to_end_tuning(device):
    modes = device.mode_params()
    res = program_device(modes, TuningTargets(24.0, 0.8, 1))
    gx = simulated_gx_db(modes, res.pumps)
    stable = characteristic_roots(modes, res.pumps).stable
    try:
        program_device(modes, TuningTargets(24.0, 0.95, 1))
        raised = "nothing"
    except StabilityBoundViolated as exc:
        raised = f"StabilityBoundViolated at stage {exc.stage}"
    ok = stable and res.stable and abs(gx - 24.0) <= 0.1 and raised.startswith("StabilityBoundViolated")
    record(8, ok, f"re-simulated G_X {gx:.4f} dB, stable {stable}; s = 0.95 raised {raised}")
