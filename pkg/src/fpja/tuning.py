"""Four-stage programming of the directional phase-sensitive amplifier.

1. calibrate each conversion pump alone for matched conversion;
2. close the loop at ``phi_loop = sign * pi/2`` to form a circulator;
3. raise ``|beta_ab| = |beta_bc|`` to the target saturation ``s``;
4. turn on the amplification pump for the target quadrature gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .coupled_modes import (
    A_S,
    B_S,
    C_S,
    GainSummary,
    ModeParams,
    PumpSet,
    amplitude_gains,
    conversion_ratio,
    etas,
    gain_summary,
    kappas,
    simulate,
    to_db,
)
from .errors import (
    FPJAError,
    IsolationNotReached,
    NoMinimum,
    StabilityBoundViolated,
    TargetUnreachable,
)
from .noise import amplified_quadrature
from .quadrature import quadrature_matrix
from .stability import characteristic_roots

PAIRS = {("a", "b"): "beta_ab", ("b", "c"): "beta_bc", ("a", "c"): "beta_ac"}
_PORT = {"a": A_S, "b": B_S, "c": C_S}
DEFAULT_MAX_R = 0.99
DEFAULT_MIN_ISOLATION_DB = 15.0
GAIN_TOL_DB = 1e-3
R_ROUND = 1e-9


@dataclass(frozen=True)
class TuningTargets:
    target_gx_db: float
    target_s: float
    phi_loop_sign: int = 1

    def __post_init__(self):
        if not math.isfinite(self.target_gx_db):
            raise ValueError("target_gx_db must be finite")
        if not 0 < self.target_s < 1:
            raise ValueError(f"target_s must lie in (0, 1), got {self.target_s}")
        if self.phi_loop_sign not in (1, -1):
            raise ValueError("phi_loop_sign must be +1 or -1")


@dataclass
class StageReport:
    name: str
    pumps: PumpSet
    S: np.ndarray                   # resonant 6x6 snapshot
    metrics: dict = field(default_factory=dict)


@dataclass
class TuningResult:
    pumps: PumpSet
    stage_reports: list[StageReport]
    stable: bool
    gains: GainSummary | None = None   # closed form; assumes |beta_ac| = 1/2

    @property
    def gain_x_db(self) -> float:
        """Simulated quadrature gain of the final stage."""
        return self.stage_reports[-1].metrics["gain_x_db"]


def golden_section_minimize(f: Callable[[float], float], lo: float, hi: float,
                            tol: float = 1e-6) -> float:
    """Minimize a unimodal scalar function on [lo, hi].

    Delegates to scipy's bounded scalar minimizer (golden section with
    parabolic steps).
    """
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    return float(res.x)


def _single_pump(pair: tuple[str, str], mag: float) -> PumpSet:
    return PumpSet(**{PAIRS[pair]: mag})


def _normalize_pair(pair) -> tuple[str, str]:
    key = tuple(sorted(pair))
    if key not in PAIRS:
        raise ValueError(f"unknown conversion pair {pair!r}")
    return key  # type: ignore[return-value]


def reflection_objective(modes: Sequence[ModeParams], pair) -> Callable[[float], float]:
    """|S_jj|^2 + |S_kk|^2 on resonance with only the (j, k) conversion pump on."""
    j, k = _normalize_pair(pair)

    def f(mag: float) -> float:
        S = simulate(modes, _single_pump((j, k), mag))
        return float(abs(S[_PORT[j], _PORT[j]]) ** 2 + abs(S[_PORT[k], _PORT[k]]) ** 2)

    return f


def calibrate_conversion(modes: Sequence[ModeParams], pair, tol: float = 1e-6,
                         bracket: tuple[float, float] = (0.0, 2.0)) -> float:
    """|beta_jk| minimizing the on-resonance reflections of both modes."""
    f = reflection_objective(modes, pair)
    probe = [f(x) for x in np.linspace(*bracket, 9)]
    if max(probe) - min(probe) < 1e-12:
        raise NoMinimum(f"reflection objective is flat over {bracket} for pair {pair}")
    return golden_section_minimize(f, *bracket, tol=tol)


def _directions(sign: int) -> tuple[tuple[int, int], tuple[int, int]]:
    """(pass, blocked) element indices of the circulator for a loop-phase sign."""
    a_to_c, c_to_a = (C_S, A_S), (A_S, C_S)
    return (a_to_c, c_to_a) if sign > 0 else (c_to_a, a_to_c)


def isolation_db(S: np.ndarray, sign: int) -> float:
    """Pass over blocked a<->c transmission, dB; +inf for exact cancellation."""
    passed, blocked = _directions(sign)
    num = abs(S[passed]) ** 2
    den = abs(S[blocked]) ** 2
    if den == 0:
        return math.inf
    return float(to_db(num / den))


def set_circulation(modes: Sequence[ModeParams], pumps: PumpSet, sign: int,
                    min_isolation_db: float = DEFAULT_MIN_ISOLATION_DB) -> PumpSet:
    """Set phi_loop = sign * pi/2 (canonical gauge) and check the isolation."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    out = pumps.with_loop_phase(sign * math.pi / 2)
    iso = isolation_db(simulate(modes, out), sign)
    if iso < min_isolation_db:
        raise IsolationNotReached(f"isolation {iso:.2f} dB < {min_isolation_db} dB")
    return out


def beta_for_saturation(target_s: float) -> float:
    """Inverse of s = 4|b|^2/(1 + 4|b|^2)."""
    if not 0 <= target_s < 1:
        raise ValueError(f"target_s must lie in [0, 1), got {target_s}")
    return 0.5 * math.sqrt(target_s / (1 - target_s))


def boost_b_coupling(modes: Sequence[ModeParams], pumps: PumpSet, target_s: float) -> PumpSet:
    """Raise |beta_ab| = |beta_bc| to reach ``target_s``, keeping every phase."""
    mag = beta_for_saturation(target_s)
    ka, kb, kc = kappas(modes)
    bound = (ka + kc) / (4 * kb)
    if mag ** 2 >= bound:
        raise StabilityBoundViolated(
            f"|beta_ab|^2 = {mag ** 2:.4g} >= (k_a + k_c)/(4 k_b) = {bound:.4g}"
        )
    return pumps.replace(
        beta_ab=mag * np.exp(1j * np.angle(pumps.beta_ab)),
        beta_bc=mag * np.exp(1j * np.angle(pumps.beta_bc)),
    )


def required_r(target_gx_db: float, s: float, eta_a: float = 1.0, eta_c: float = 1.0) -> float:
    """r = 1 - 2s/(sqrt(G_X)/sqrt(eta_a eta_c) + 1) for a positive amplitude gain."""
    g = 10 ** (target_gx_db / 20) / math.sqrt(eta_a * eta_c)
    return 1 - 2 * s / (g + 1)


def _gx_db_from_r(s: float, r: float, eta_a: float, eta_c: float) -> float:
    return float(to_db(amplitude_gains(s, r, eta_a, eta_c)[2] ** 2))


def simulated_gx_db(modes: Sequence[ModeParams], pumps: PumpSet, sign: int = 1) -> float:
    """Largest resonant quadrature gain along the amplified direction, dB."""
    Q = quadrature_matrix(simulate(modes, pumps))
    if sign < 0:
        # mirror a <-> c so the amplified a -> c block sits where c -> a was
        perm = [2, 1, 0, 5, 4, 3]
        Q = Q[np.ix_(perm, perm)]
    return float(to_db(amplified_quadrature(Q)[0]))


def _with_bb(pumps: PumpSet, mag: float) -> PumpSet:
    return pumps.replace(beta_bb=mag * np.exp(-0.5j * math.pi))


def set_amplification(modes: Sequence[ModeParams], pumps: PumpSet, target_gx_db: float,
                      sign: int = 1, max_r: float = DEFAULT_MAX_R) -> TuningResult:
    """Turn on beta_bb for the target quadrature gain and verify stability.

    The closed-form r gives the starting pump; it is then refined with a
    one-dimensional root find on the simulated gain, which absorbs the small
    offsets left by lossy calibration.  ``max_r`` is the practical ceiling
    below the r = 1 pole.
    """
    eta_a, _, eta_c = etas(modes)
    ab = abs(pumps.beta_ab)
    s = conversion_ratio(ab)
    r = required_r(target_gx_db, s, eta_a, eta_c)
    if -R_ROUND < r < 0:
        r = 0.0  # pump-off target, up to rounding
    ceiling = _gx_db_from_r(s, max_r, eta_a, eta_c)
    if r >= max_r:
        raise TargetUnreachable(
            f"target {target_gx_db} dB needs r = {r:.4f} >= {max_r}; ceiling {ceiling:.2f} dB",
            ceiling_db=ceiling)
    if r < 0:
        floor = _gx_db_from_r(s, 0.0, eta_a, eta_c)
        raise TargetUnreachable(
            f"target {target_gx_db} dB is below the pump-off gain {floor:.2f} dB (r = {r:.4f} < 0)",
            ceiling_db=ceiling)

    scale = (1 + 4 * ab ** 2) / 2
    bb = r * scale
    out = _with_bb(pumps, bb)
    err = simulated_gx_db(modes, out, sign) - target_gx_db
    if abs(err) > GAIN_TOL_DB and r > 0:
        def resid(x):
            return simulated_gx_db(modes, _with_bb(pumps, x), sign) - target_gx_db
        lo, hi = 0.0, max_r * scale
        if resid(lo) < 0 < resid(hi):
            bb = brentq(resid, lo, hi, xtol=1e-12)
            out = _with_bb(pumps, bb)

    rep = characteristic_roots(modes, out)
    if not rep.stable:
        raise TargetUnreachable(
            f"configuration for {target_gx_db} dB is unstable (margin {rep.margin:.3g} rad/s); "
            f"ceiling {ceiling:.2f} dB", ceiling_db=ceiling)
    gains = gain_summary(modes, out)
    S = simulate(modes, out)
    report = StageReport("amplification", out, S, {
        "gain_x_db": simulated_gx_db(modes, out, sign),
        "forward_db": float(to_db(abs(S[_directions(-sign)[0]]) ** 2)),
        "reverse_db": float(to_db(abs(S[_directions(-sign)[1]]) ** 2)),
        "reflection_a_db": float(to_db(abs(S[A_S, A_S]) ** 2)),
        "reflection_c_db": float(to_db(abs(S[C_S, C_S]) ** 2)),
        "margin": rep.margin,
    })
    return TuningResult(out, [report], True, gains)


def _snapshot(name: str, modes, pumps: PumpSet, sign: int, **extra) -> StageReport:
    S = simulate(modes, pumps)
    passed, blocked = _directions(sign)
    metrics = {
        "pass_db": float(to_db(abs(S[passed]) ** 2)),
        "blocked_db": float(to_db(abs(S[blocked]) ** 2)),
        "isolation_db": isolation_db(S, sign),
        "reflection_a_db": float(to_db(abs(S[A_S, A_S]) ** 2)),
        "reflection_c_db": float(to_db(abs(S[C_S, C_S]) ** 2)),
    }
    metrics.update(extra)
    return StageReport(name, pumps, S, metrics)


def program_device(modes: Sequence[ModeParams], targets: TuningTargets, *,
                   max_r: float = DEFAULT_MAX_R,
                   min_isolation_db: float = DEFAULT_MIN_ISOLATION_DB) -> TuningResult:
    """Run the four stages in order; errors carry the failing stage name."""
    sign = targets.phi_loop_sign
    stage = "conversion"
    try:
        mags = {name: calibrate_conversion(modes, pair) for pair, name in PAIRS.items()}
        pumps = PumpSet(**mags)
        reports = [_snapshot(stage, modes, pumps, sign, **mags)]

        stage = "circulation"
        pumps = set_circulation(modes, pumps, sign, min_isolation_db)
        reports.append(_snapshot(stage, modes, pumps, sign, phi_loop=pumps.phi_loop))

        stage = "saturation"
        pumps = boost_b_coupling(modes, pumps, targets.target_s)
        reports.append(_snapshot(stage, modes, pumps, sign, s=conversion_ratio(abs(pumps.beta_ab))))

        stage = "amplification"
        res = set_amplification(modes, pumps, targets.target_gx_db, sign, max_r)
    except FPJAError as exc:
        if exc.stage is None:
            exc.stage = stage
        raise
    reports.extend(res.stage_reports)
    return TuningResult(res.pumps, reports, res.stable, res.gains)
