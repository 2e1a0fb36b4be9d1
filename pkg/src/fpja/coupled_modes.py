"""Mode-coupling matrix and scattering for the three-mode, four-pump amplifier.

All 6x6 matrices in this module use the basis ordering

    (a^S, b^S, c^S, a^I*, b^I*, c^I*)

i.e. the three signal amplitudes followed by the three conjugated idler
amplitudes.  ``S[i, j]`` is the amplitude scattered *into* output ``i``
*from* input ``j``, so ``S[A_S, C_S]`` is the forward (c -> a) gain and
``S[C_S, A_S]`` the reverse transmission.

Detunings and couplings are dimensionless: detunings are normalized by each
mode's total linewidth and couplings are ``beta_jk = g_jk / (2 sqrt(k_j k_k))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import AsymmetricConversion, DegenerateLoop, NearSingular, PoleReached

BASIS = ("aS", "bS", "cS", "aI*", "bI*", "cI*")
A_S, B_S, C_S, A_I, B_I, C_I = range(6)
LABELS = ("a", "b", "c")

RCOND_MIN = 1e-12
SYMMETRY_TOL = 1e-9


def wrap_phase(phi: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.remainder(phi, 2 * math.pi)
    if w <= -math.pi:
        w += 2 * math.pi
    return w


def to_db(x) -> np.ndarray | float:
    """Power ratio -> dB.  Zero maps to -inf without a warning."""
    with np.errstate(divide="ignore"):
        out = 10 * np.log10(x)
    return out


@dataclass(frozen=True)
class ModeParams:
    """One resonant mode.  Rates are angular (rad/s)."""

    label: str
    omega: float
    kappa: float
    kappa_ext: float

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"mode label must be one of {LABELS}, got {self.label!r}")
        if not self.kappa > 0:
            raise ValueError(f"mode {self.label}: kappa must be > 0, got {self.kappa}")
        if not 0 <= self.kappa_ext <= self.kappa * (1 + 1e-12):
            raise ValueError(
                f"mode {self.label}: need 0 <= kappa_ext <= kappa, got {self.kappa_ext} vs {self.kappa}"
            )

    @property
    def eta(self) -> float:
        return min(self.kappa_ext / self.kappa, 1.0)

    @property
    def kappa_int(self) -> float:
        return max(self.kappa - self.kappa_ext, 0.0)

    @classmethod
    def from_lab_units(cls, label: str, freq_ghz: float, kappa_mhz: float,
                       kappa_ext_mhz: float | None = None) -> "ModeParams":
        """Build from frequencies in GHz and linewidths in MHz (cyclic units)."""
        two_pi = 2 * math.pi
        kext = kappa_mhz if kappa_ext_mhz is None else kappa_ext_mhz
        return cls(label, two_pi * freq_ghz * 1e9, two_pi * kappa_mhz * 1e6, two_pi * kext * 1e6)

    @classmethod
    def with_eta(cls, label: str, omega: float, kappa: float, eta: float) -> "ModeParams":
        return cls(label, omega, kappa, eta * kappa)


def _check_modes(modes: Sequence[ModeParams]) -> tuple[ModeParams, ModeParams, ModeParams]:
    if len(modes) != 3 or tuple(m.label for m in modes) != LABELS:
        raise ValueError("expected exactly three modes ordered (a, b, c)")
    return tuple(modes)  # type: ignore[return-value]


def kappas(modes: Sequence[ModeParams]) -> np.ndarray:
    return np.array([m.kappa for m in _check_modes(modes)])


def etas(modes: Sequence[ModeParams]) -> np.ndarray:
    return np.array([m.eta for m in _check_modes(modes)])


@dataclass(frozen=True)
class PumpSet:
    """The four normalized complex pump couplings."""

    beta_ab: complex = 0j
    beta_bc: complex = 0j
    beta_ac: complex = 0j
    beta_bb: complex = 0j

    def __post_init__(self):
        for name in ("beta_ab", "beta_bc", "beta_ac", "beta_bb"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @property
    def phi_loop(self) -> float:
        phi = np.angle(self.beta_ab) + np.angle(self.beta_bc) - np.angle(self.beta_ac)
        return wrap_phase(float(phi))

    @property
    def phi_bb(self) -> float:
        return float(np.angle(self.beta_bb))

    @property
    def magnitudes(self) -> tuple[float, float, float, float]:
        return abs(self.beta_ab), abs(self.beta_bc), abs(self.beta_ac), abs(self.beta_bb)

    @classmethod
    def canonical(cls, beta_ab: float = 0.0, beta_bc: float | None = None,
                  beta_ac: float = 0.0, beta_bb: float = 0.0, *,
                  phi_loop: float = math.pi / 2, phi_bb: float = -math.pi / 2) -> "PumpSet":
        """Pumps from magnitudes in the canonical gauge.

        The whole loop phase sits on ``beta_ab`` (``phi_bc = phi_ac = 0``).
        With ``phi_loop = pi/2`` and ``phi_bb = -pi/2`` this gauge yields the
        textbook reduced matrices with ``X_a <- Y_c`` as the amplified path.
        """
        if beta_bc is None:
            beta_bc = beta_ab
        return cls(
            beta_ab=beta_ab * np.exp(1j * phi_loop),
            beta_bc=complex(beta_bc),
            beta_ac=complex(beta_ac),
            beta_bb=beta_bb * np.exp(1j * phi_bb),
        )

    def with_loop_phase(self, phi_loop: float) -> "PumpSet":
        """Same magnitudes and phi_bb, loop phase reset in the canonical gauge."""
        ab, bc, ac, bb = self.magnitudes
        return PumpSet.canonical(ab, bc, ac, bb, phi_loop=phi_loop, phi_bb=self.phi_bb)

    def replace(self, **kw) -> "PumpSet":
        return replace(self, **kw)


@dataclass(frozen=True)
class DetuningVector:
    """Normalized complex detunings ``(omega - omega_j)/kappa_j + i/2``."""

    delta_S: tuple[complex, complex, complex]
    delta_I: tuple[complex, complex, complex]

    def __post_init__(self):
        for name in ("delta_S", "delta_I"):
            vals = tuple(complex(v) for v in getattr(self, name))
            if len(vals) != 3:
                raise ValueError(f"{name} needs three entries")
            if any(v.imag != 0.5 for v in vals):
                raise ValueError(f"{name}: imaginary parts must equal 1/2 exactly")
            object.__setattr__(self, name, vals)

    @classmethod
    def resonant(cls, modes: Sequence[ModeParams], delta: float = 0.0) -> "DetuningVector":
        """Resonant pumps, signal offset ``delta`` (rad/s) from every mode."""
        k = kappas(modes)
        return cls(tuple(delta / k + 0.5j), tuple(-delta / k + 0.5j))

    @classmethod
    def from_offsets(cls, modes: Sequence[ModeParams], signal: Sequence[float],
                     idler: Sequence[float]) -> "DetuningVector":
        """Explicit per-mode signal and idler offsets (rad/s); no pump bookkeeping."""
        k = kappas(modes)
        return cls(tuple(np.asarray(signal, float) / k + 0.5j),
                   tuple(np.asarray(idler, float) / k + 0.5j))

    @property
    def is_resonant(self) -> bool:
        s = np.array(self.delta_S)
        i = np.array(self.delta_I)
        return bool(np.allclose(-np.conj(i), s, rtol=0, atol=1e-12))


def build_coupling_matrix(modes: Sequence[ModeParams], pumps: PumpSet,
                          detunings: DetuningVector) -> np.ndarray:
    """Return the 6x6 mode-coupling matrix M."""
    _check_modes(modes)
    ab, bc, ac, bb = pumps.beta_ab, pumps.beta_bc, pumps.beta_ac, pumps.beta_bb
    cj = np.conj
    M = np.zeros((6, 6), dtype=complex)
    M[A_S, A_S], M[B_S, B_S], M[C_S, C_S] = detunings.delta_S
    M[A_S, B_S], M[A_S, C_S] = ab, ac
    M[B_S, A_S], M[B_S, C_S] = cj(ab), bc
    M[C_S, A_S], M[C_S, B_S] = cj(ac), cj(bc)
    M[B_S, B_I] = bb

    for k, d in zip((A_I, B_I, C_I), detunings.delta_I):
        M[k, k] = -cj(d)
    M[A_I, B_I], M[A_I, C_I] = -cj(ab), -cj(ac)
    M[B_I, B_S] = -cj(bb)
    M[B_I, A_I], M[B_I, C_I] = -ab, -cj(bc)
    M[C_I, A_I], M[C_I, B_I] = -ac, -bc
    return M


def efficiency_matrix(modes: Sequence[ModeParams]) -> np.ndarray:
    """H = diag(sqrt(eta)) repeated over signal and idler blocks."""
    h = np.sqrt(etas(modes))
    return np.diag(np.concatenate([h, h]))


def internal_efficiency_matrix(modes: Sequence[ModeParams]) -> np.ndarray:
    """diag(sqrt(1 - eta)): coupling of each amplitude to its internal-loss port."""
    h = np.sqrt(1.0 - etas(modes))
    return np.diag(np.concatenate([h, h]))


def invert_checked(M: np.ndarray) -> np.ndarray:
    rcond = 1.0 / np.linalg.cond(M, 1)
    if not rcond >= RCOND_MIN:
        raise NearSingular(f"coupling matrix reciprocal condition {rcond:.3g} < {RCOND_MIN:g}")
    return np.linalg.inv(M)


def scattering_matrix(M: np.ndarray, modes: Sequence[ModeParams]) -> np.ndarray:
    """S = i H M^-1 H - 1."""
    H = efficiency_matrix(modes)
    return 1j * H @ invert_checked(M) @ H - np.eye(6)


def simulate(modes: Sequence[ModeParams], pumps: PumpSet, delta: float = 0.0) -> np.ndarray:
    """Scattering matrix for resonant pumps at signal offset ``delta`` (rad/s)."""
    det = DetuningVector.resonant(modes, delta)
    return scattering_matrix(build_coupling_matrix(modes, pumps, det), modes)


# -- closed forms (resonant pumps) -----------------------------------------

@dataclass(frozen=True)
class ClosedFormDiagnostics:
    C: complex
    delta_b_eff: complex
    det_M: complex
    S_aa: complex
    S_cc: complex
    S_aIaS: complex
    S_cIcS: complex
    S_ac: complex
    S_ca: complex
    S_aIcS: complex
    S_aScI: complex

    def as_entries(self) -> dict[tuple[int, int], complex]:
        """Map each element onto its (row, col) position in the 6x6 S."""
        return {
            (A_S, A_S): self.S_aa,
            (C_S, C_S): self.S_cc,
            (A_I, A_S): self.S_aIaS,
            (C_I, C_S): self.S_cIcS,
            (A_S, C_S): self.S_ac,
            (C_S, A_S): self.S_ca,
            (A_I, C_S): self.S_aIcS,
            (A_S, C_I): self.S_aScI,
        }


def loop_determinant(D: Sequence[complex], ab: complex, bc: complex, ac: complex) -> complex:
    Da, Db, Dc = D
    cj = np.conj
    return (Da * Db * Dc - abs(bc) ** 2 * Da - abs(ac) ** 2 * Db - abs(ab) ** 2 * Dc
            - ab * bc * cj(ac) - cj(ab) * cj(bc) * ac)


def closed_form_scattering(modes: Sequence[ModeParams], pumps: PumpSet,
                           detunings: DetuningVector) -> ClosedFormDiagnostics:
    """Analytic scattering elements for resonant pumps.

    ``S_aIcS`` is the forward idler gain (a^I* <- c^S).  ``S_aScI`` is its
    partner a^S <- c^I*.
    """
    if not detunings.is_resonant:
        raise ValueError("closed forms require resonant pumps (-conj(delta_I) == delta_S)")
    eta_a, _, eta_c = etas(modes)
    ab, bc, ac, bb = pumps.beta_ab, pumps.beta_bc, pumps.beta_ac, pumps.beta_bb
    Da, Db, Dc = detunings.delta_S
    cj = np.conj

    C = loop_determinant((Da, Db, Dc), ab, bc, ac)
    if abs(C) < 1e-14:
        raise DegenerateLoop(f"|C| = {abs(C):.3g}")
    Db_eff = Db + abs(bb) ** 2 / C * (Da * Dc - abs(ac) ** 2)
    # Schur complement over the signal block.  The idler block carries the
    # couplings -conj(beta), which flips the sign of the loop term; the two
    # loop determinants coincide only when Re(ab bc ac*) = 0 (phi_loop = +-pi/2).
    det_M = C * loop_determinant((Da, Db_eff, Dc), -cj(ab), -cj(bc), -cj(ac))
    if abs(det_M) < 1e-300:
        raise NearSingular("|M| = 0")
    root = math.sqrt(eta_a * eta_c)

    return ClosedFormDiagnostics(
        C=C,
        delta_b_eff=Db_eff,
        det_M=det_M,
        S_aa=1j * eta_a * C / det_M * (Db_eff * Dc - abs(bc) ** 2) - 1,
        S_cc=1j * eta_c * C / det_M * (Db_eff * Da - abs(ab) ** 2) - 1,
        S_aIaS=1j * eta_a / det_M * cj(bb) * (bc ** 2 * cj(ac) ** 2 - cj(ab) ** 2 * Dc ** 2),
        S_cIcS=1j * eta_c / det_M * cj(bb) * (ac ** 2 * cj(ab) ** 2 - bc ** 2 * Da ** 2),
        S_ac=1j * root * C / det_M * (ab * bc - ac * Db_eff),
        S_ca=1j * root * C / det_M * (cj(ab) * cj(bc) - cj(ac) * Db_eff),
        S_aIcS=-1j * root / det_M * cj(bb) * (bc * Da - cj(ab) * ac) * (cj(ab) * Dc + cj(ac) * bc),
        S_aScI=1j * root / det_M * bb * (ab * Dc - ac * cj(bc)) * (cj(bc) * Da + ab * cj(ac)),
    )


# -- reduced description -----------------------------------------------------

def conversion_ratio(beta_ab_mag: float) -> float:
    """s = 4|b_ab|^2 / (1 + 4|b_ab|^2)."""
    x = 4 * beta_ab_mag ** 2
    return x / (1 + x)


def amplification_ratio(beta_ab_mag: float, beta_bb_mag: float) -> float:
    """r = 2|b_bb| / (1 + 4|b_ab|^2)."""
    return 2 * beta_bb_mag / (1 + 4 * beta_ab_mag ** 2)


def amplitude_gains(s: float, r: float, eta_a: float = 1.0, eta_c: float = 1.0):
    """Signed amplitude gains (sqrt_GS, sqrt_GI, sqrt_GX, sqrt_GY)."""
    if r >= 1:
        raise PoleReached(f"r = {r} >= 1")
    root = math.sqrt(eta_a * eta_c)
    gs = root * (2 * s + r * r - 1) / (1 - r * r)
    gi = root * 2 * r * s / (1 - r * r)
    gx = root * (2 * s / (1 - r) - 1)
    gy = root * (2 * s / (1 + r) - 1)
    return gs, gi, gx, gy


def reduced_scattering_ac(s: float, r: float, eta_a: float, eta_c: float,
                          phi_bb: float = -math.pi / 2) -> np.ndarray:
    """4x4 scattering in the reduced basis (a^S, c^S, a^I*, c^I*).

    Valid on resonance under the directionality conditions with
    ``phi_loop = +pi/2`` in the canonical gauge.
    """
    if not 0 <= s <= 1:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    if r < 0:
        raise ValueError(f"r must be >= 0, got {r}")
    gs, gi, _, _ = amplitude_gains(s, r, eta_a, eta_c)
    root = math.sqrt(eta_a * eta_c)
    e = np.exp(1j * phi_bb)
    return np.array([
        [eta_a - 1, -1j * gs, 0, -e * gi],
        [1j * root, eta_c - 1, 0, 0],
        [0, -np.conj(e) * gi, eta_a - 1, 1j * gs],
        [0, 0, -1j * root, eta_c - 1],
    ], dtype=complex)


@dataclass(frozen=True)
class GainSummary:
    s: float
    r: float
    sqrt_GS: float
    sqrt_GI: float
    sqrt_GX: float
    sqrt_GY: float
    eta_a: float = 1.0
    eta_c: float = 1.0
    beta_ab_mag: float = float("nan")
    bandwidth_3db: float | None = None

    @property
    def G_S(self) -> float:
        return self.sqrt_GS ** 2

    @property
    def G_I(self) -> float:
        return self.sqrt_GI ** 2

    @property
    def G_X(self) -> float:
        return self.sqrt_GX ** 2

    @property
    def G_Y(self) -> float:
        return self.sqrt_GY ** 2

    @property
    def gain_s_db(self) -> float:
        return float(to_db(self.G_S))

    @property
    def gain_i_db(self) -> float:
        return float(to_db(self.G_I))

    @property
    def gain_x_db(self) -> float:
        return float(to_db(self.G_X))

    @property
    def gain_y_db(self) -> float:
        return float(to_db(self.G_Y))


def gain_summary_from_sr(s: float, r: float, eta_a: float = 1.0, eta_c: float = 1.0,
                         beta_ab_mag: float = float("nan")) -> GainSummary:
    gs, gi, gx, gy = amplitude_gains(s, r, eta_a, eta_c)
    return GainSummary(s, r, gs, gi, gx, gy, eta_a, eta_c, beta_ab_mag=beta_ab_mag)


def gain_summary(modes: Sequence[ModeParams], pumps: PumpSet) -> GainSummary:
    ab, bc, _, bb = pumps.magnitudes
    if abs(ab - bc) > SYMMETRY_TOL:
        raise AsymmetricConversion(f"|beta_ab| = {ab} differs from |beta_bc| = {bc}")
    eta_a, _, eta_c = etas(modes)
    return gain_summary_from_sr(conversion_ratio(ab), amplification_ratio(ab, bb),
                                eta_a, eta_c, beta_ab_mag=ab)


# -- frequency sweeps ----------------------------------------------------------

@dataclass
class SweepResult:
    """Scattering versus signal offset.  ``S`` has shape (n, 6, 6); rows that
    hit a near-singular coupling matrix are NaN and flagged in ``singular``."""

    delta: np.ndarray
    S: np.ndarray
    singular: np.ndarray
    bandwidth_3db: float
    return_loss_band: float
    return_loss_db: float = 10.0
    meta: dict = field(default_factory=dict)

    def power_db(self, out: int, inp: int) -> np.ndarray:
        return to_db(np.abs(self.S[:, out, inp]) ** 2)

    def phase(self, out: int, inp: int) -> np.ndarray:
        return np.angle(self.S[:, out, inp])


def _crossing(x0, x1, y0, y1, level):
    if y1 == y0:
        return x0
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def band_width(x: np.ndarray, y: np.ndarray, level: float, center: int) -> float:
    """Width of the contiguous region around ``center`` with ``y >= level``.

    Edges are linearly interpolated between grid points.  Returns 0 if the
    centre itself is below the level, and the grid span if it never drops.
    """
    ok = ~np.isnan(y) & (y >= level)
    if not ok[center]:
        return 0.0
    lo = center
    while lo > 0 and ok[lo - 1]:
        lo -= 1
    hi = center
    while hi < len(x) - 1 and ok[hi + 1]:
        hi += 1

    def edge(i_out, i_in):
        if not (np.isfinite(y[i_out]) and np.isfinite(y[i_in])):
            return x[i_in]
        return _crossing(x[i_out], x[i_in], y[i_out], y[i_in], level)

    left = x[lo] if lo == 0 else edge(lo - 1, lo)
    right = x[hi] if hi == len(x) - 1 else edge(hi + 1, hi)
    return float(right - left)


def sweep_scattering(modes: Sequence[ModeParams], pumps: PumpSet, delta_grid: Sequence[float],
                     return_loss_db: float = 10.0) -> SweepResult:
    """Sweep the signal offset (rad/s) with resonant pumps.

    Reports the -3 dB width of the forward gain |S_ac|^2 around its peak and
    the width of the band around the gain peak where both reflections
    |S_aa|^2 and |S_cc|^2 stay below ``-return_loss_db``.  Widths are in rad/s.
    """
    delta = np.asarray(delta_grid, dtype=float)
    if delta.ndim != 1 or len(delta) < 2 or np.any(np.diff(delta) <= 0):
        raise ValueError("delta grid must be strictly increasing with >= 2 points")
    S = np.full((len(delta), 6, 6), np.nan, dtype=complex)
    singular = np.zeros(len(delta), dtype=bool)
    for i, d in enumerate(delta):
        try:
            S[i] = simulate(modes, pumps, d)
        except NearSingular:
            singular[i] = True

    fwd = to_db(np.abs(S[:, A_S, C_S]) ** 2)
    if np.all(~np.isfinite(fwd)):
        bw, rl_band = 0.0, 0.0
    else:
        peak = int(np.nanargmax(np.where(np.isfinite(fwd), fwd, -np.inf)))
        bw = band_width(delta, fwd, fwd[peak] - 3.0, peak)
        worst_refl = np.maximum(to_db(np.abs(S[:, A_S, A_S]) ** 2), to_db(np.abs(S[:, C_S, C_S]) ** 2))
        rl_band = band_width(delta, -worst_refl, return_loss_db, peak)
    return SweepResult(delta, S, singular, bw, rl_band, return_loss_db)
