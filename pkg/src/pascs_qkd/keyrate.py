"""Mutual information, Holevo bound and secret key rate under collective attacks.

Eve's information is bounded with the Gaussian-protocol formulas evaluated
at the discrete-modulation correlation ``Z``.  All entropies are in bits.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

from .channel import (
    ChannelParams,
    DetectionParams,
    SignConvention,
    conditional_variance,
    effective_transmissivity,
)
from .modulation import StateFamily, signal_moments

LN2 = math.log(2.0)
PHYSICAL_TOL = 1e-9


class UnphysicalError(ValueError):
    """Covariance data that no quantum state can have."""


class FormulaRegimeWarning(UserWarning):
    """A formula was evaluated outside the regime where it makes sense."""


class MutualInfoConvention(str, enum.Enum):
    """Which unconditioned variance enters ``I_AB``.

    ``EB`` uses Alice's full quadrature variance ``V = 1 + V_A`` against
    its homodyne-conditioned value, both taken on the same entangled mode.
    ``LITERAL`` uses the modulation variance ``V_A`` in the numerator.
    """

    EB = "eb"
    LITERAL = "literal"


def mutual_information(
    v_a: float, v_a_given_b: float, convention: MutualInfoConvention = MutualInfoConvention.EB
) -> float:
    """``I_AB`` in bits per pulse from Alice's unconditioned/conditioned variances."""
    if not (v_a > 0 and v_a_given_b > 0):
        raise ValueError(f"variances must be positive, got V_A={v_a}, V_A|B={v_a_given_b}")
    numerator = v_a if MutualInfoConvention(convention) is MutualInfoConvention.LITERAL else 1.0 + v_a
    i_ab = 0.5 * math.log2(numerator / v_a_given_b)
    if i_ab < 0:
        warnings.warn(
            f"I_AB = {i_ab:.3g} < 0 (V_A={v_a:.4g}, V_A|B={v_a_given_b:.4g})",
            FormulaRegimeWarning,
            stacklevel=2,
        )
    return i_ab


def entropy_g(x: float) -> float:
    """``G(x) = (x+1)log2(x+1) - x log2 x`` with ``G(0) = 0``.

    Evaluated as ``log2(1+x) + x log2(1+1/x)``, which has no ``0 log 0`` and
    no large-argument cancellation.
    """
    if x <= 0.0:
        return 0.0
    return (math.log1p(x) + x * math.log1p(1.0 / x)) / LN2


@dataclass(frozen=True)
class HolevoResult:
    s_be: float
    nu: tuple[float, float, float]
    delta_big: float
    delta_small: float


def holevo_bound(v_a: float, z: float, t_eff: float, xi: float) -> HolevoResult:
    """Holevo information ``S_BE`` between Bob's homodyne data and Eve.

    ``t_eff`` already includes any detector inefficiency.
    """
    t = t_eff
    z2 = z * z
    delta_big = (
        xi * xi * t * t
        + (t * t + 1.0) * v_a * v_a
        + 2.0 * v_a * (xi * t * t + t + 1.0)
        + 2.0 * xi * t
        - 2.0 * t * z2
        + 2.0
    )
    root = t * v_a * v_a + v_a * (xi * t + t + 1.0) + t * (xi - z2) + 1.0
    delta_small = root * root

    disc = delta_big * delta_big - 4.0 * delta_small
    if disc < -PHYSICAL_TOL * delta_big * delta_big:
        raise UnphysicalError(f"Delta^2 - 4 delta = {disc:.3e} < 0")
    sq = math.sqrt(max(disc, 0.0))
    nu1 = math.sqrt(0.5 * (delta_big + sq))
    # nu1 * nu2 = sqrt(delta); avoids the Delta - sqrt(...) cancellation
    nu2 = math.sqrt(delta_small) / nu1

    v = v_a + 1.0
    cond = v - t * z2 / (t * v_a + 1.0 + xi * t)
    if v * cond < 0:
        raise UnphysicalError(f"negative conditional determinant {v * cond:.3e}")
    nu3 = math.sqrt(v * cond)

    for name, nu in (("nu1", nu1), ("nu2", nu2), ("nu3", nu3)):
        if nu < 1.0 - PHYSICAL_TOL:
            raise UnphysicalError(f"{name} = {nu:.12g} < 1: inconsistent V_A={v_a}, Z={z}")

    s_be = entropy_g((nu1 - 1.0) / 2.0) + entropy_g((nu2 - 1.0) / 2.0) - entropy_g((nu3 - 1.0) / 2.0)
    return HolevoResult(s_be, (nu1, nu2, nu3), delta_big, delta_small)


@dataclass(frozen=True)
class RatePoint:
    alpha: float
    family: StateFamily | None
    channel: ChannelParams
    detection: DetectionParams
    v_a: float
    z: float
    v_a_given_b: float
    i_ab: float
    s_be: float
    key_rate: float
    symplectic: tuple[float, float, float]
    intermediates: tuple[float, float]

    @property
    def distance_km(self) -> float | None:
        return self.channel.fiber_length

    @property
    def secure(self) -> bool:
        return self.key_rate > 0.0


def rate_from_moments(
    v_a: float,
    z: float,
    ch: ChannelParams,
    det: DetectionParams,
    *,
    alpha: float = math.nan,
    family: StateFamily | None = None,
    iab_convention: MutualInfoConvention = MutualInfoConvention.EB,
    sign_convention: SignConvention = SignConvention.STANDARD,
) -> RatePoint:
    """Key rate for given modulation variance and correlation."""
    t_eff = effective_transmissivity(ch, det)
    v_ab = conditional_variance(v_a, z, t_eff, ch.excess_noise, sign_convention)
    i_ab = mutual_information(v_a, v_ab, iab_convention)
    hol = holevo_bound(v_a, z, t_eff, ch.excess_noise)
    k = det.reconciliation_efficiency * i_ab - hol.s_be
    return RatePoint(
        alpha=alpha,
        family=family,
        channel=ch,
        detection=det,
        v_a=v_a,
        z=z,
        v_a_given_b=v_ab,
        i_ab=i_ab,
        s_be=hol.s_be,
        key_rate=k,
        symplectic=hol.nu,
        intermediates=(hol.delta_big, hol.delta_small),
    )


def key_rate(
    alpha: float,
    family: StateFamily | str,
    ch: ChannelParams,
    det: DetectionParams | None = None,
    *,
    num_states: int = 4,
    iab_convention: MutualInfoConvention = MutualInfoConvention.EB,
    sign_convention: SignConvention = SignConvention.STANDARD,
    truncation: int | None = None,
) -> RatePoint:
    """Secret key rate ``beta I_AB - S_BE`` for a discrete-modulated protocol.

    Negative values mean no secure key at that operating point.
    """
    family = StateFamily(family)
    det = DetectionParams() if det is None else det
    v_a, z = signal_moments(family, float(alpha), num_states, truncation)
    return rate_from_moments(
        v_a,
        z,
        ch,
        det,
        alpha=float(alpha),
        family=family,
        iab_convention=MutualInfoConvention(iab_convention),
        sign_convention=SignConvention(sign_convention),
    )
