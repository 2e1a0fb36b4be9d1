"""Quadrature-basis scattering, LO-phase response and squeezing metrics.

Quadratures are ``X_j = (j^S + j^I*)/sqrt(2)`` and ``Y_j = i(j^I* - j^S)/sqrt(2)``.
The rotation ``U`` produces them interleaved, ``(X_a, Y_a, X_b, Y_b, X_c, Y_c)``;
every matrix returned here is reordered to

    (X_a, X_b, X_c, Y_a, Y_b, Y_c)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupled_modes import GainSummary, to_db

QUAD_BASIS = ("Xa", "Xb", "Xc", "Ya", "Yb", "Yc")
X_A, X_B, X_C, Y_A, Y_B, Y_C = range(6)

_S2 = 1 / np.sqrt(2)
U = _S2 * np.array([
    [1, 0, 0, 1, 0, 0],
    [-1j, 0, 0, 1j, 0, 0],
    [0, 1, 0, 0, 1, 0],
    [0, -1j, 0, 0, 1j, 0],
    [0, 0, 1, 0, 0, 1],
    [0, 0, -1j, 0, 0, 1j],
], dtype=complex)

# interleaved (Xa, Ya, Xb, Yb, Xc, Yc) -> (Xa, Xb, Xc, Ya, Yb, Yc)
_ORDER = [0, 2, 4, 1, 3, 5]
REORDER = np.eye(6)[_ORDER]

# mode basis -> reordered quadrature basis
T = REORDER @ U
T_INV = T.conj().T


def _block_t(n_cols: int) -> np.ndarray:
    if n_cols % 6:
        raise ValueError(f"column count {n_cols} is not a multiple of 6")
    k = n_cols // 6
    return np.kron(np.eye(k), T)


def quadrature_matrix(S: np.ndarray) -> np.ndarray:
    """Q = U S U^-1 in the reordered quadrature basis.

    ``S`` may also be a 6 x 6k port map (e.g. the 6x12 map including
    internal-loss ports); every group of six input columns is rotated the
    same way.
    """
    S = np.asarray(S)
    Tin = _block_t(S.shape[1])
    return T @ S @ Tin.conj().T


def mode_matrix(Q: np.ndarray) -> np.ndarray:
    """Inverse of :func:`quadrature_matrix`."""
    Q = np.asarray(Q)
    Tin = _block_t(Q.shape[1])
    return T_INV @ Q @ Tin


def reduced_ac(Q: np.ndarray) -> np.ndarray:
    """(X_a, Y_a, X_c, Y_c) block of a 6x6 quadrature matrix."""
    idx = [X_A, Y_A, X_C, Y_C]
    return np.asarray(Q)[np.ix_(idx, idx)]


def drive_vector(angle: float) -> np.ndarray:
    """Unit drive on mode c; angle 0 drives Y_c (the amplified input quadrature)."""
    v = np.zeros(6)
    v[Y_C] = np.cos(angle)
    v[X_C] = np.sin(angle)
    return v


def lo_vector(angle: float) -> np.ndarray:
    """Demodulation axis on mode a; angle 0 reads X_a."""
    v = np.zeros(6)
    v[X_A] = np.cos(angle)
    v[Y_A] = np.sin(angle)
    return v


def demodulate(Q: np.ndarray, drive_angle: float, lo_angle: float) -> complex:
    """Amplitude seen at LO angle ``lo_angle`` for a drive at ``drive_angle``."""
    return complex(lo_vector(lo_angle) @ np.asarray(Q) @ drive_vector(drive_angle))


def drive_power_gain(Q: np.ndarray, drive_angle: float) -> float:
    """Power transferred into both quadratures of mode a for a single-quadrature drive."""
    out = np.asarray(Q) @ drive_vector(drive_angle)
    return float(abs(out[X_A]) ** 2 + abs(out[Y_A]) ** 2)


@dataclass
class LoPhaseResponse:
    theta: np.ndarray
    power_gain: np.ndarray
    noise_floor: np.ndarray | None = None
    noise_floor_chain: np.ndarray | None = None

    @property
    def gain_db(self) -> np.ndarray:
        return to_db(self.power_gain)


def quadrature_variance(covariance: np.ndarray, theta) -> np.ndarray:
    """Variance of ``cos(t) X_a + sin(t) Y_a`` from a 6x6 quadrature covariance."""
    V = np.asarray(covariance)
    t = np.asarray(theta, dtype=float)
    c, s = np.cos(t), np.sin(t)
    return c * c * V[X_A, X_A] + s * s * V[Y_A, Y_A] + 2 * c * s * V[X_A, Y_A]


def lo_phase_response(gains: GainSummary, theta_grid, covariance: np.ndarray | None = None,
                      n_chain: float | None = None) -> LoPhaseResponse:
    """Phase-sensitive gain ``G_X cos^2 + G_Y sin^2`` over LO phase.

    With the aligned drive convention theta = 0 picks the amplified
    quadrature.  When an output ``covariance`` is given the amplifier noise
    floor along the same axis is attached; ``n_chain`` adds the following
    amplifier's noise (photons, referred to its input).
    """
    theta = np.asarray(theta_grid, dtype=float)
    g = gains.G_X * np.cos(theta) ** 2 + gains.G_Y * np.sin(theta) ** 2
    floor = chain = None
    if covariance is not None:
        floor = quadrature_variance(covariance, theta)
        if n_chain is not None:
            chain = floor + n_chain
    return LoPhaseResponse(theta, g, floor, chain)


@dataclass(frozen=True)
class SqueezingMetrics:
    sqrt_product_signed: float
    product_GXGY: float
    ideal_squeezing_deviation: float


def squeezing_metrics(gains: GainSummary) -> SqueezingMetrics:
    """Closed-form quadrature-gain product and its distance from G_X G_Y = 1."""
    s, r = gains.s, gains.r
    signed = gains.eta_a * gains.eta_c * (1 - 4 * s * (1 - s) / (1 - r * r))
    prod = signed ** 2
    return SqueezingMetrics(signed, prod, abs(prod - 1))
