"""Noise propagation, added noise and measurement efficiency.

Input noise uses the symmetrized convention: each input port contributes
``n + 1/2`` to the variance of both of its quadratures, so vacuum sits at
1/2.  Output covariances are returned in the quadrature basis
``(X_a, X_b, X_c, Y_a, Y_b, Y_c)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coupled_modes import (
    DetuningVector,
    ModeParams,
    PumpSet,
    build_coupling_matrix,
    efficiency_matrix,
    internal_efficiency_matrix,
    invert_checked,
)
from .errors import NonPhysical
from .quadrature import T, X_A, X_C, Y_A, Y_C, quadrature_matrix

VACUUM_TOL = 1e-9
IMAG_TOL = 1e-12


@dataclass(frozen=True)
class InputOccupancies:
    """Thermal occupancies (photons) of the external and internal-loss ports."""

    n_a: float = 0.0
    n_b: float = 0.0
    n_c: float = 0.0
    n_int_a: float = 0.0
    n_int_b: float = 0.0
    n_int_c: float = 0.0

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if not v >= 0:
                raise ValueError(f"occupancy {k} must be >= 0, got {v}")

    @classmethod
    def vacuum(cls) -> "InputOccupancies":
        return cls()

    @property
    def is_vacuum(self) -> bool:
        return all(v == 0 for v in self.__dict__.values())

    def port_vector(self, n_ports: int) -> np.ndarray:
        """Occupancy per input port for a 6- or 12-port map (mode-basis order)."""
        ext = [self.n_a, self.n_b, self.n_c] * 2
        if n_ports == 6:
            return np.array(ext, dtype=float)
        if n_ports == 12:
            internal = [self.n_int_a, self.n_int_b, self.n_int_c] * 2
            return np.array(ext + internal, dtype=float)
        raise ValueError(f"expected 6 or 12 input ports, got {n_ports}")


@dataclass(frozen=True)
class ChainNoise:
    """Noise added by the following amplifier chain, photons, with asymmetric error."""

    photons: float = 19.8
    err_minus: float = 3.3
    err_plus: float = 3.2


def output_covariance(S: np.ndarray, occ: InputOccupancies | None = None) -> np.ndarray:
    """Propagate input noise to the 6x6 output quadrature covariance.

    ``S`` is the 6x6 external scattering matrix or the 6x12 map that also
    includes the internal-loss ports.  The result is real symmetric; an
    imaginary residue above 1e-12 (present away from resonance, where the
    frequency-domain quadratures are not Hermitian) triggers a warning.
    For vacuum input the result is checked against the uncertainty relation
    and :class:`NonPhysical` is raised if it fails.
    """
    S = np.asarray(S)
    occ = occ or InputOccupancies.vacuum()
    n = occ.port_vector(S.shape[1])
    V_mode = (S * (n + 0.5)) @ S.conj().T
    V = T @ V_mode @ T.conj().T
    residue = float(np.max(np.abs(V.imag)))
    if residue > IMAG_TOL * max(1.0, float(np.max(np.abs(V)))):
        warnings.warn(f"output covariance has imaginary residue {residue:.3g}; discarded",
                      RuntimeWarning, stacklevel=2)
    V = V.real
    V = 0.5 * (V + V.T)
    if occ.is_vacuum:
        check_physical(V)
    return V


# commutator form in (X_a, X_b, X_c, Y_a, Y_b, Y_c): [X_j, Y_j] = i
OMEGA = np.block([[np.zeros((3, 3)), np.eye(3)], [-np.eye(3), np.zeros((3, 3))]])


def uncertainty_margin(V: np.ndarray) -> float:
    """Smallest eigenvalue of V + i Omega / 2; negative means unphysical.

    Single quadratures may legitimately sit below 1/2 (squeezing); what a
    physical state cannot do is violate the uncertainty relation.
    """
    return float(np.min(np.linalg.eigvalsh(np.asarray(V) + 0.5j * OMEGA)))


def check_physical(V: np.ndarray) -> None:
    margin = uncertainty_margin(V)
    if margin < -VACUUM_TOL * max(1.0, float(np.max(np.abs(V)))):
        raise NonPhysical(
            f"output covariance violates the uncertainty relation (margin {margin:.3g}); "
            "a lossy map needs its internal ports (use internal_port_scattering)"
        )


def added_noise_fpja(beta_ab_mag: float, gain_x: float | None = None, *,
                     sqrt_gain_x: float | None = None) -> float:
    """Amplifier added noise in photons, resonant and lossless.

    Pass either the power gain ``gain_x`` or the signed amplitude gain
    ``sqrt_gain_x``; the latter matters when the amplitude gain is negative
    (below-unity transmission).
    """
    if not beta_ab_mag > 0:
        raise ValueError("beta_ab_mag must be > 0")
    if sqrt_gain_x is None:
        if gain_x is None or not gain_x > 0:
            raise ValueError("need gain_x > 0 or sqrt_gain_x")
        inv = 0.0 if np.isinf(gain_x) else gain_x ** -0.5
    else:
        inv = 0.0 if np.isinf(sqrt_gain_x) else 1.0 / sqrt_gain_x
    return (1 + inv) ** 2 / (8 * beta_ab_mag ** 2)


@dataclass(frozen=True)
class EfficiencyEstimate:
    eta: float
    eta_low: float
    eta_high: float
    n_add_total: float


def system_efficiency(n_fpja: float, n_chain: float, gain_x: float,
                      err_minus: float = 0.0, err_plus: float = 0.0) -> EfficiencyEstimate:
    """eta = 1/(1 + 2 n_add) with n_add = n_fpja + n_chain/G_X.

    The chain-noise interval maps onto an efficiency interval; eta falls as
    n_chain grows, so the upper chain bound gives the lower eta bound.
    """
    if n_fpja < 0 or n_chain < 0 or not gain_x > 0:
        raise ValueError("need n_fpja >= 0, n_chain >= 0, gain_x > 0")

    def eta(nc):
        return 1.0 / (1.0 + 2.0 * (n_fpja + max(nc, 0.0) / gain_x))

    n_total = n_fpja + n_chain / gain_x
    return EfficiencyEstimate(eta(n_chain), eta(n_chain + err_plus), eta(n_chain - err_minus), n_total)


def internal_port_scattering(modes: Sequence[ModeParams], pumps: PumpSet,
                             detunings: DetuningVector) -> np.ndarray:
    """6x12 map from (6 external + 6 internal) input ports to the external outputs.

    Internal ports couple at sqrt(kappa_int), i.e. through diag(sqrt(1 - eta)).
    """
    M = build_coupling_matrix(modes, pumps, detunings)
    Minv = invert_checked(M)
    H = efficiency_matrix(modes)
    H_int = internal_efficiency_matrix(modes)
    ext = 1j * H @ Minv @ H - np.eye(6)
    internal = 1j * H @ Minv @ H_int
    return np.hstack([ext, internal])


@dataclass(frozen=True)
class NoiseReport:
    covariance: np.ndarray
    gain_x: float
    n_add_fpja: float
    n_add_total: float
    eta_meas: float
    eta_low: float
    eta_high: float
    n_chain: tuple[float, float, float]
    amplified_axis: np.ndarray


def amplified_quadrature(Q: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest c -> a quadrature power gain and the output axis it lands on.

    Uses the singular value decomposition of the (X_a, Y_a) <- (X_c, Y_c)
    block, so it does not depend on the squeezing-axis orientation.
    """
    block = np.asarray(Q)[np.ix_([X_A, Y_A], [X_C, Y_C])]
    u, sv, _ = np.linalg.svd(block)
    axis = u[:, 0]
    axis = axis * np.exp(-1j * np.angle(axis[np.argmax(np.abs(axis))]))
    return float(sv[0] ** 2), np.real_if_close(axis)


def noise_report(modes: Sequence[ModeParams], pumps: PumpSet,
                 detunings: DetuningVector | None = None,
                 occ: InputOccupancies | None = None,
                 chain: ChainNoise | None = None) -> NoiseReport:
    """Full noise budget through the 12-port map (internal loss included)."""
    detunings = detunings or DetuningVector.resonant(modes)
    chain = chain or ChainNoise()
    S12 = internal_port_scattering(modes, pumps, detunings)
    V = output_covariance(S12, occ)
    gx, axis = amplified_quadrature(quadrature_matrix(S12[:, :6]))
    a = np.real(axis)
    var = float(a @ V[np.ix_([X_A, Y_A], [X_A, Y_A])] @ a)
    n_fpja = var / gx - 0.5
    eff = system_efficiency(max(n_fpja, 0.0), chain.photons, gx, chain.err_minus, chain.err_plus)
    return NoiseReport(V, gx, n_fpja, eff.n_add_total, eff.eta, eff.eta_low, eff.eta_high,
                       (chain.photons, chain.err_minus, chain.err_plus), a)
