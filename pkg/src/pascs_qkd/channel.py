"""Lossy, noisy channel and homodyne conditioning at covariance-matrix level.

All variances are in shot-noise units (vacuum variance 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_LOSS_DB_PER_KM = 0.2

SIGMA_Z = np.diag([1.0, -1.0])
HOMODYNE_X = np.diag([1.0, 0.0])


class SignConvention(str, enum.Enum):
    """How excess noise enters Bob's variance.

    ``STANDARD`` adds ``T xi``.  ``PAPER_LITERAL`` subtracts it in Bob's
    variance and the conditional variance, as printed, while the Holevo
    terms keep ``+ xi T``.
    """

    STANDARD = "standard"
    PAPER_LITERAL = "paper-literal"

    @property
    def noise_sign(self) -> float:
        return 1.0 if self is SignConvention.STANDARD else -1.0


def transmittance_from_distance(length_km: float, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM) -> float:
    """Fiber transmittance ``10^(-loss * L / 10)``."""
    if not (math.isfinite(length_km) and length_km >= 0):
        raise ValueError(f"length must be finite and >= 0, got {length_km}")
    if not (math.isfinite(loss_db_per_km) and loss_db_per_km > 0):
        raise ValueError(f"loss must be finite and > 0, got {loss_db_per_km}")
    return 10.0 ** (-loss_db_per_km * length_km / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    transmissivity: float
    excess_noise: float = 0.0
    fiber_length: float | None = None
    loss_db_per_km: float | None = None

    def __post_init__(self):
        t, xi = self.transmissivity, self.excess_noise
        if not (math.isfinite(t) and 0.0 < t <= 1.0):
            raise ValueError(f"transmissivity must lie in (0, 1], got {t}")
        if not (math.isfinite(xi) and xi >= 0.0):
            raise ValueError(f"excess noise must be >= 0, got {xi}")
        if self.fiber_length is not None:
            loss = DEFAULT_LOSS_DB_PER_KM if self.loss_db_per_km is None else self.loss_db_per_km
            expected = transmittance_from_distance(self.fiber_length, loss)
            if abs(expected - t) > 1e-12:
                raise ValueError(
                    f"transmissivity {t} inconsistent with {self.fiber_length} km at {loss} dB/km"
                )

    @classmethod
    def from_distance(
        cls, length_km: float, excess_noise: float = 0.0, loss_db_per_km: float = DEFAULT_LOSS_DB_PER_KM
    ) -> ChannelParams:
        return cls(
            transmissivity=transmittance_from_distance(length_km, loss_db_per_km),
            excess_noise=excess_noise,
            fiber_length=float(length_km),
            loss_db_per_km=loss_db_per_km,
        )


@dataclass(frozen=True)
class DetectionParams:
    reconciliation_efficiency: float = 1.0
    detector_efficiency: float = 1.0

    def __post_init__(self):
        beta, eta = self.reconciliation_efficiency, self.detector_efficiency
        if not (math.isfinite(beta) and 0.0 <= beta <= 1.0):
            raise ValueError(f"reconciliation efficiency must lie in [0, 1], got {beta}")
        if not (math.isfinite(eta) and 0.0 < eta <= 1.0):
            raise ValueError(f"detector efficiency must lie in (0, 1], got {eta}")


def effective_transmissivity(ch: ChannelParams, det: DetectionParams) -> float:
    """Detector inefficiency folded in as extra (untrusted) loss."""
    return ch.transmissivity * det.detector_efficiency


@dataclass(frozen=True)
class CovarianceMatrix:
    """Two-mode covariance matrix stored as its 2x2 blocks."""

    gamma_a: np.ndarray
    gamma_b: np.ndarray
    sigma_ab: np.ndarray

    def full(self) -> np.ndarray:
        return np.block([[self.gamma_a, self.sigma_ab], [self.sigma_ab.T, self.gamma_b]])

    @property
    def variance_a(self) -> float:
        return float(self.gamma_a[0, 0])

    @property
    def variance_b(self) -> float:
        return float(self.gamma_b[0, 0])

    @property
    def correlation(self) -> float:
        return float(self.sigma_ab[0, 0])


def bob_variance(v_a: float, t_eff: float, xi: float, convention: SignConvention = SignConvention.STANDARD) -> float:
    return t_eff * v_a + 1.0 + SignConvention(convention).noise_sign * t_eff * xi


def propagate(
    v_a: float,
    z: float,
    ch: ChannelParams,
    det: DetectionParams | None = None,
    convention: SignConvention = SignConvention.STANDARD,
) -> CovarianceMatrix:
    """Covariance matrix shared by Alice and Bob after the channel."""
    det = DetectionParams() if det is None else det
    t_eff = effective_transmissivity(ch, det)
    eye = np.eye(2)
    return CovarianceMatrix(
        gamma_a=(1.0 + v_a) * eye,
        gamma_b=bob_variance(v_a, t_eff, ch.excess_noise, convention) * eye,
        sigma_ab=math.sqrt(t_eff) * z * SIGMA_Z,
    )


def condition_on_homodyne(cm: CovarianceMatrix) -> np.ndarray:
    """Alice's block after Bob measures the X quadrature.

    ``gamma_A - sigma (X gamma_B X)^MP sigma^T`` with ``X = diag(1, 0)``; the
    pseudo-inverse of the rank-one middle factor is ``diag(1/b, 0)``.
    """
    b = cm.variance_b
    if b <= 0.0:
        raise ValueError(f"Bob's X variance must be positive, got {b}")
    middle = np.diag([1.0 / b, 0.0])
    return cm.gamma_a - cm.sigma_ab @ middle @ cm.sigma_ab.T


def conditional_variance(
    v_a: float, z: float, t_eff: float, xi: float, convention: SignConvention = SignConvention.STANDARD
) -> float:
    """First diagonal entry of the conditioned block, as a scalar formula."""
    return v_a + 1.0 - t_eff * z * z / bob_variance(v_a, t_eff, xi, convention)
