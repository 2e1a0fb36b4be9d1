"""Linear stability of the pumped three-mode system and the resulting bounds.

Two independent routes are provided:

* :func:`routh_coefficients` uses the factored characteristic polynomial
  ``P = P+ P- + b_phi`` valid for ``|beta_ac| = 1/2`` and
  ``|beta_ab| = |beta_bc|`` and runs a Routh table on it;
* :func:`characteristic_roots` recovers ``P(lambda)`` for any pump set by
  interpolating the determinant of the Langevin matrix and finds its roots
  with a companion-matrix eigensolve.

Rates (roots, margins, coefficients) are in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .coupled_modes import (
    SYMMETRY_TOL,
    DetuningVector,
    ModeParams,
    PumpSet,
    build_coupling_matrix,
    conversion_ratio,
    etas,
    kappas,
)
from .errors import FPJAError, InterpolationIllConditioned, OutOfRegime

N_SAMPLES = 7
VANDERMONDE_COND_MAX = 1e6


@dataclass
class StabilityReport:
    b1_plus: float = math.nan
    b2_plus: float = math.nan
    b3_plus: float = math.nan
    b1_minus: float = math.nan
    b2_minus: float = math.nan
    b3_minus: float = math.nan
    b_phi: float = math.nan
    roots: np.ndarray = field(default_factory=lambda: np.empty(0, complex))
    stable: bool = False
    margin: float = math.nan
    poly: np.ndarray | None = None

    @property
    def cubic_plus(self) -> np.ndarray:
        return np.array([1.0, self.b1_plus, self.b2_plus, self.b3_plus])

    @property
    def cubic_minus(self) -> np.ndarray:
        return np.array([1.0, self.b1_minus, self.b2_minus, self.b3_minus])


# -- Routh route -------------------------------------------------------------

def routh_table(coeffs: Sequence[float]) -> np.ndarray:
    """Routh array of a real polynomial (highest power first).

    Rows that start with zero are not regularized; callers treat a zero in
    the first column as marginal, i.e. not stable.
    """
    c = np.asarray(coeffs, dtype=float)
    n = len(c)
    width = (n + 1) // 2
    table = np.zeros((n, width))
    table[0, : len(c[0::2])] = c[0::2]
    table[1, : len(c[1::2])] = c[1::2]
    for i in range(2, n):
        pivot = table[i - 1, 0]
        if pivot == 0:
            break
        for j in range(width - 1):
            table[i, j] = (pivot * table[i - 2, j + 1] - table[i - 2, 0] * table[i - 1, j + 1]) / pivot
    return table


def hurwitz_stable(coeffs: Sequence[float]) -> bool:
    """True iff every root of the polynomial has a strictly negative real part."""
    c = np.asarray(coeffs, dtype=float)
    if c[0] < 0:
        c = -c
    if np.any(c <= 0):
        return False
    return bool(np.all(routh_table(c)[:, 0] > 0))


def routh_coefficients(modes: Sequence[ModeParams], beta_ab_mag: float, beta_bb_mag: float,
                       phi_loop: float, beta_ac_mag: float = 0.5,
                       beta_bc_mag: float | None = None) -> StabilityReport:
    """Coefficients of the factored polynomial and the Routh verdict.

    ``P+-(lambda) = lambda^3 + b1 lambda^2 + b2 lambda + b3``.  At
    ``phi_loop = +-pi/2`` (``b_phi = 0``) the verdict is that of the two
    cubics, which needs ``b1 b2 > b3`` on top of positive coefficients.
    Elsewhere the Routh table is applied to the full sextic.
    """
    if beta_bc_mag is None:
        beta_bc_mag = beta_ab_mag
    problems = []
    if abs(beta_ac_mag - 0.5) > SYMMETRY_TOL:
        problems.append(f"|beta_ac| = {beta_ac_mag} (need 1/2)")
    if abs(beta_ab_mag - beta_bc_mag) > SYMMETRY_TOL:
        problems.append(f"|beta_ab| = {beta_ab_mag} != |beta_bc| = {beta_bc_mag}")
    if beta_bb_mag < 0 or beta_ab_mag < 0:
        problems.append("pump magnitudes must be >= 0")
    if problems:
        raise OutOfRegime("factored polynomial needs " + "; ".join(problems))

    ka, kb, kc = kappas(modes)
    x = 4 * beta_ab_mag ** 2 + 1
    rep = StabilityReport()
    for sign, tag in ((-1, "plus"), (+1, "minus")):
        g = x + sign * 2 * beta_bb_mag
        setattr(rep, f"b1_{tag}", kb / 2 * (1 + sign * 2 * beta_bb_mag) + (ka + kc) / 2)
        setattr(rep, f"b2_{tag}", kb * (ka + kc) / 4 * g + ka * kc / 2)
        setattr(rep, f"b3_{tag}", ka * kb * kc / 4 * g)
    # loop-phase term, from expanding |M(i lambda)|; with |beta_ac| = 1/2 and
    # |beta_bc| = |beta_ab| it equals (k_a k_b k_c)^2 |beta_ab|^4 cos^2(phi_loop)
    rep.b_phi = ((ka * kb * kc) ** 2 * 4 * (beta_ab_mag * beta_bc_mag * beta_ac_mag) ** 2
                 * math.cos(phi_loop) ** 2)

    poly = np.polymul(rep.cubic_plus, rep.cubic_minus)
    poly[-1] += rep.b_phi
    rep.poly = poly
    # scale lambda by the largest kappa so the table stays well conditioned
    scale = max(ka, kb, kc)
    rep.stable = hurwitz_stable(poly / scale ** np.arange(7))
    return rep


# -- numeric route -----------------------------------------------------------

def langevin_matrix(modes: Sequence[ModeParams], pumps: PumpSet,
                    detunings: DetuningVector | None = None) -> np.ndarray:
    """L with d/dt A = L A + inputs; P(lambda) = det(lambda - L)."""
    detunings = detunings or DetuningVector.resonant(modes)
    k = np.sqrt(np.tile(kappas(modes), 2))
    M = build_coupling_matrix(modes, pumps, detunings)
    return 1j * (k[:, None] * M * k[None, :])


def chebyshev_nodes(n: int = N_SAMPLES) -> np.ndarray:
    return np.cos((2 * np.arange(n) + 1) * np.pi / (2 * n))


def characteristic_polynomial(L: np.ndarray, scale: float,
                              nodes: np.ndarray | None = None) -> np.ndarray:
    """Coefficients (highest first, rad/s units) of det(lambda - L).

    The determinant is sampled at ``scale * nodes`` and the degree-6
    polynomial in ``z = lambda/scale`` recovered from a Vandermonde solve.
    """
    z = chebyshev_nodes() if nodes is None else np.asarray(nodes, dtype=float)
    n = L.shape[0]
    if len(z) != n + 1:
        raise ValueError(f"need {n + 1} sample points, got {len(z)}")
    V = np.vander(z, n + 1)
    cond = np.linalg.cond(V)
    if cond > VANDERMONDE_COND_MAX:
        raise InterpolationIllConditioned(f"Vandermonde condition {cond:.3g} > {VANDERMONDE_COND_MAX:g}")
    vals = np.array([np.linalg.det(zk * np.eye(n) - L / scale) for zk in z])
    cz = np.linalg.solve(V, vals)
    return cz * scale ** np.arange(n + 1)


def companion_roots(coeffs: np.ndarray) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    c = c / c[0]
    n = len(c) - 1
    C = np.zeros((n, n), dtype=complex)
    C[0, :] = -c[1:]
    C[1:, :-1] = np.eye(n - 1)
    return np.linalg.eigvals(C)


def characteristic_roots(modes: Sequence[ModeParams], pumps: PumpSet,
                         detunings: DetuningVector | None = None) -> StabilityReport:
    """Roots of P(lambda) for an arbitrary pump set; stable iff all Re < 0."""
    L = langevin_matrix(modes, pumps, detunings)
    scale = float(np.max(kappas(modes)))
    poly = characteristic_polynomial(L, scale)
    roots = companion_roots(poly / scale ** np.arange(7)) * scale
    margin = float(np.max(roots.real))
    return StabilityReport(roots=roots, stable=margin < 0, margin=margin, poly=poly)


def stability_margin(modes: Sequence[ModeParams], pumps: PumpSet,
                     detunings: DetuningVector | None = None) -> float:
    return characteristic_roots(modes, pumps, detunings).margin


def pole_beta_bb(beta_ab_mag: float) -> float:
    """|beta_bb| at the r = 1 pole."""
    return (1 + 4 * beta_ab_mag ** 2) / 2


def critical_beta_bb(modes: Sequence[ModeParams], beta_ab_mag: float, phi_loop: float = math.pi / 2,
                     beta_ac_mag: float = 0.5, hi: float | None = None, xtol: float = 1e-12) -> float:
    """Smallest |beta_bb| at which the stability margin crosses zero (Brent's method)."""
    hi = hi or 2 * pole_beta_bb(beta_ab_mag)

    def margin(bb):
        p = PumpSet.canonical(beta_ab_mag, beta_ab_mag, beta_ac_mag, bb, phi_loop=phi_loop)
        return stability_margin(modes, p)

    if margin(0.0) >= 0:
        return 0.0
    if margin(hi) < 0:
        raise OutOfRegime(f"no instability found below |beta_bb| = {hi}")
    # walk up to the first sign change so Brent brackets the lowest crossing
    grid = np.linspace(0.0, hi, 65)
    prev = grid[0]
    for b in grid[1:]:
        if margin(b) >= 0:
            return brentq(margin, prev, b, xtol=xtol, rtol=4 * np.finfo(float).eps)
        prev = b
    raise OutOfRegime("margin sign change not bracketed")


# -- region map --------------------------------------------------------------

def r_from_direct_gain(gain_db: float, s: float, eta_a: float = 1.0, eta_c: float = 1.0) -> float:
    """Invert sqrt(G_S) = sqrt(eta_a eta_c)(2s + r^2 - 1)/(1 - r^2) for r >= 0.

    Returns NaN when the gain is below the pump-off value (no real r).
    """
    g = 10 ** (gain_db / 20) / math.sqrt(eta_a * eta_c)
    r2 = 1 - 2 * s / (g + 1)
    return math.sqrt(r2) if r2 >= 0 else math.nan


@dataclass
class StabilityRegion:
    gain_db: np.ndarray
    phi_loop: np.ndarray
    stable: np.ndarray          # (n_gain, n_phi) bool
    unknown: np.ndarray         # (n_gain, n_phi) bool, cells that could not be evaluated
    margin: np.ndarray          # (n_gain, n_phi) rad/s, NaN where unknown
    beta_bb: np.ndarray         # (n_gain,)
    threshold_db: float         # lowest gain with any unstable loop phase
    threshold_phi0_db: float    # lowest gain unstable at the loop phase closest to 0

    def unstable_width(self) -> np.ndarray:
        """Number of unstable loop-phase cells per gain row."""
        return np.sum(~self.stable & ~self.unknown, axis=1)


def stability_region(modes: Sequence[ModeParams], beta_ab_mag: float, gain_grid_db: Sequence[float],
                     phi_loop_grid: Sequence[float], beta_ac_mag: float = 0.5) -> StabilityRegion:
    """Stability over direct gain |S_ac|^2 (dB) and loop phase.

    Each gain is converted to |beta_bb| through the resonant directional
    gain formula at the given |beta_ab| (the operating point fixed by the
    other pumps); the loop phase is then swept with that pump set.
    """
    gains = np.asarray(gain_grid_db, dtype=float)
    phis = np.asarray(phi_loop_grid, dtype=float)
    for name, g in (("gain grid", gains), ("loop-phase grid", phis)):
        if g.ndim != 1 or len(g) < 2 or np.any(np.diff(g) <= 0):
            raise ValueError(f"{name} must be strictly increasing with >= 2 points")
    eta_a, _, eta_c = etas(modes)
    s = conversion_ratio(beta_ab_mag)

    shape = (len(gains), len(phis))
    stable = np.zeros(shape, bool)
    unknown = np.zeros(shape, bool)
    margin = np.full(shape, np.nan)
    beta_bb = np.full(len(gains), np.nan)
    for i, gdb in enumerate(gains):
        r = r_from_direct_gain(gdb, s, eta_a, eta_c)
        if math.isnan(r):
            unknown[i] = True
            continue
        beta_bb[i] = r * (1 + 4 * beta_ab_mag ** 2) / 2
        for j, phi in enumerate(phis):
            pumps = PumpSet.canonical(beta_ab_mag, beta_ab_mag, beta_ac_mag, beta_bb[i], phi_loop=phi)
            try:
                rep = characteristic_roots(modes, pumps)
            except FPJAError:
                unknown[i, j] = True
                continue
            stable[i, j] = rep.stable
            margin[i, j] = rep.margin

    bad_rows = np.any(~stable & ~unknown, axis=1)
    threshold = float(gains[np.argmax(bad_rows)]) if bad_rows.any() else math.inf
    j0 = int(np.argmin(np.abs(phis)))
    bad0 = ~stable[:, j0] & ~unknown[:, j0]
    threshold0 = float(gains[np.argmax(bad0)]) if bad0.any() else math.inf
    return StabilityRegion(gains, phis, stable, unknown, margin, beta_bb, threshold, threshold0)


# -- bounds ------------------------------------------------------------------

@dataclass(frozen=True)
class PerformanceBounds:
    min_sqrt_GY: float
    min_n_add: float
    max_eta: float
    max_beta_ab_sq: float


def performance_bounds(modes: Sequence[ModeParams]) -> PerformanceBounds:
    """Limits implied by |beta_ab|^2 < (k_a + k_c)/(4 k_b)."""
    ka, kb, kc = kappas(modes)
    total = ka + kb + kc
    return PerformanceBounds(
        min_sqrt_GY=kb / total,
        min_n_add=kb / (2 * (ka + kc)),
        max_eta=(ka + kc) / total,
        max_beta_ab_sq=(ka + kc) / (4 * kb),
    )
