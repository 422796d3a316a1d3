"""Discrete-modulation ensembles, their spectra and Alice-Bob correlations.

Two independent routes are provided for every quantity that enters the key
rate: closed forms in the amplitude ``alpha`` and a numeric route through
truncated Fock vectors.  They are meant to check each other.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .fock import (
    FockVector,
    TruncationError,
    apply_annihilation,
    coherent_coefficients,
    default_truncation,
    pascs_coefficients,
)

# Below this amplitude cosh(a^2) - cos(a^2) style differences lose ~8 digits.
CANCELLATION_THRESHOLD = 0.05

BLOCK_LEAK_TOL = 1e-12


class StateFamily(str, enum.Enum):
    PASCS = "pascs"
    COHERENT = "coherent"

    def builder(self):
        return pascs_coefficients if self is StateFamily.PASCS else coherent_coefficients


@dataclass(frozen=True)
class ModulationEnsemble:
    """Uniform mixture of ``num_states`` copies of a base state at phases ``i^k``.

    For two states the phases are ``+1, -1``.
    """

    family: StateFamily
    amplitude: float
    num_states: int = 4
    truncation: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", StateFamily(self.family))
        if self.num_states not in (2, 4):
            raise ValueError(f"num_states must be 2 or 4, got {self.num_states}")
        if not math.isfinite(self.amplitude) or self.amplitude < 0:
            raise ValueError(f"amplitude must be finite and >= 0, got {self.amplitude}")
        if self.truncation is None:
            object.__setattr__(self, "truncation", default_truncation())

    @property
    def phases(self) -> tuple[complex, ...]:
        step = 4 // self.num_states
        return tuple(1j ** (step * k) for k in range(self.num_states))

    @property
    def probabilities(self) -> tuple[float, ...]:
        return (1.0 / self.num_states,) * self.num_states

    def base_state(self) -> FockVector:
        return self.family.builder()(self.amplitude, self.truncation)

    def signal_states(self) -> list[FockVector]:
        build = self.family.builder()
        return [build(self.amplitude * p, self.truncation) for p in self.phases]

    def density_matrix(self) -> np.ndarray:
        rho = np.zeros((self.truncation + 1,) * 2, dtype=complex)
        for p, psi in zip(self.probabilities, self.signal_states()):
            rho += p * np.outer(psi.coeffs, psi.coeffs.conj())
        return rho


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of the ensemble density matrix, indexed by residue class."""

    eigenvalues: tuple[float, ...]
    eigenvectors: tuple[FockVector, ...] = field(repr=False)

    @property
    def block_period(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class CorrelationTerms:
    A: float
    B: float
    C: float
    D: float


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha}")
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return alpha


def _pascs_norm(x: float) -> float:
    return 1.0 + 3.0 * x + x * x


def eigenvalues_series(alpha: float, terms: int = 64) -> tuple[float, float, float, float]:
    """Four-state PASCS eigenvalues as sums of positive terms.

    ``lambda_k = e^{-a^2}/(1+3a^2+a^4) * sum_n a^{2m} (m+1)^2 / m!`` over
    ``m = 4n + k``.  Cancellation-free at any amplitude.
    """
    alpha = _check_alpha(alpha)
    x = alpha * alpha
    lam = [0.0, 0.0, 0.0, 0.0]
    term = 1.0  # x^m / m!
    for m in range(4 * terms):
        lam[m % 4] += term * (m + 1) ** 2
        term *= x / (m + 1)
    scale = math.exp(-x) / _pascs_norm(x)
    return tuple(scale * v for v in lam)


def eigenvalues_closed(alpha: float) -> tuple[float, float, float, float]:
    """Four-state PASCS eigenvalues ``(lambda_0, .., lambda_3)`` in closed form.

    Switches to :func:`eigenvalues_series` below ``CANCELLATION_THRESHOLD``.
    """
    alpha = _check_alpha(alpha)
    if alpha < CANCELLATION_THRESHOLD:
        return eigenvalues_series(alpha)
    x = alpha * alpha
    s, c = math.sin(x), math.cos(x)
    sh, ch = math.sinh(x), math.cosh(x)
    x2m, x2p = x * x - 1.0, x * x + 1.0
    pref = math.exp(-x) / (2.0 * _pascs_norm(x))
    return (
        pref * (3 * x * (sh - s) - x2m * c + x2p * ch),
        pref * (3 * x * (c + ch) - x2m * s + x2p * sh),
        pref * (3 * x * (s + sh) + x2m * c + x2p * ch),
        pref * (3 * x * (ch - c) + x2m * s + x2p * sh),
    )


def coherent_eigenvalues(alpha: float) -> tuple[float, float, float, float]:
    """Standard four-state coherent mixture eigenvalues."""
    x = _check_alpha(alpha) ** 2
    h = 0.5 * math.exp(-x)
    return (
        h * (math.cosh(x) + math.cos(x)),
        h * (math.sinh(x) + math.sin(x)),
        h * (math.cosh(x) - math.cos(x)),
        h * (math.sinh(x) - math.sin(x)),
    )


def spectral_numeric(ensemble: ModulationEnsemble) -> SpectralDecomposition:
    """Diagonalize the ensemble density matrix numerically.

    The mixture only couples Fock indices in the same residue class mod
    ``num_states``, so each class block is diagonalized on its own; the
    dominant eigenpair of block ``k`` is returned in slot ``k``.  Raises
    :class:`TruncationError` if the blocks leak or carry a second
    non-negligible eigenvalue.
    """
    m = ensemble.num_states
    rho = ensemble.density_matrix()
    dim = rho.shape[0]
    idx = np.arange(dim)
    off_block = rho[(idx[:, None] - idx[None, :]) % m != 0]
    if off_block.size and np.max(np.abs(off_block)) > BLOCK_LEAK_TOL:
        raise TruncationError("density matrix leaks between residue classes")

    eigenvalues, eigenvectors = [], []
    for k in range(m):
        sel = idx[k::m]
        if sel.size == 0:
            eigenvalues.append(0.0)
            eigenvectors.append(FockVector(np.zeros(dim)))
            continue
        w, v = np.linalg.eigh(rho[np.ix_(sel, sel)])
        top = int(np.argmax(w))
        rest = np.delete(w, top)
        if rest.size and np.max(np.abs(rest)) > BLOCK_LEAK_TOL:
            raise TruncationError(f"residue block {k} is not rank one")
        vec = np.zeros(dim, dtype=complex)
        col = v[:, top]
        pivot = col[np.argmax(np.abs(col))]
        vec[sel] = col * (abs(pivot) / pivot)  # fix global phase
        eigenvalues.append(max(float(w[top]), 0.0))
        eigenvectors.append(FockVector(vec))
    return SpectralDecomposition(tuple(eigenvalues), tuple(eigenvectors))


def spectral_projection(ensemble: ModulationEnsemble) -> SpectralDecomposition:
    """Eigenpairs from projecting the base state onto residue classes.

    Exact for the symmetric mixtures used here; cheaper than
    :func:`spectral_numeric` and used on the hot path.
    """
    m = ensemble.num_states
    c = ensemble.base_state().coeffs
    eigenvalues, eigenvectors = [], []
    for k in range(m):
        part = np.zeros_like(c)
        part[k::m] = c[k::m]
        lam = float(np.sum(np.abs(part) ** 2))
        eigenvalues.append(lam)
        eigenvectors.append(FockVector(part / math.sqrt(lam) if lam > 0 else part))
    return SpectralDecomposition(tuple(eigenvalues), tuple(eigenvectors))


def modulation_variance(ensemble: ModulationEnsemble) -> float:
    """``V_A = 2 <n>`` of the base state, in shot-noise units."""
    return 2.0 * ensemble.base_state().mean_photon_number()


def modulation_variance_closed(alpha: float, family: StateFamily | str = StateFamily.PASCS) -> float:
    alpha = _check_alpha(alpha)
    x = alpha * alpha
    if StateFamily(family) is StateFamily.COHERENT:
        return 2.0 * x
    return 2.0 * x * (x * x + 5.0 * x + 4.0) / _pascs_norm(x)


def correlation_terms(alpha: float) -> CorrelationTerms:
    x = _check_alpha(alpha) ** 2
    s, c = math.sin(x), math.cos(x)
    sh, ch = math.sinh(x), math.cosh(x)
    x2m, x2p = x * x - 2.0, x * x + 2.0
    return CorrelationTerms(
        A=-x2m * c + x2p * ch + 4 * x * (sh - s),
        B=4 * x * c + 4 * x * ch - x2m * s + x2p * sh,
        C=x2m * c + x2p * ch + 4 * x * (s + sh),
        D=-4 * x * c + 4 * x * ch + x2m * s + x2p * sh,
    )


def correlation_numeric(decomp: SpectralDecomposition) -> float:
    """``<Phi|ab + a^dag b^dag|Phi>`` for the purification of the ensemble.

    ``|Phi> = sum_k sqrt(lambda_k) |phi_k^*>|phi_k>``; the annihilator moves
    class ``k`` into ``k-1``, so only neighbouring classes contribute.
    """
    lam = decomp.eigenvalues
    phi = decomp.eigenvectors
    m = decomp.block_period
    total = 0.0
    for k in range(m):
        j = (k - 1) % m
        if lam[j] <= 0.0 or lam[k] <= 0.0:
            continue
        amp = phi[j].inner(apply_annihilation(phi[k]))
        # <phi_j^*|a|phi_k^*> is the conjugate of amp
        total += math.sqrt(lam[j] * lam[k]) * abs(amp) ** 2
    return 2.0 * total


def correlation_z4_closed(alpha: float) -> float:
    """Four-state PASCS correlation ``Z_4`` from the A, B, C, D terms.

    Small amplitudes go through the numeric purification path, where the
    ``1/sqrt(lambda_j lambda_k)`` factors would otherwise amplify cancellation.
    """
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        return 0.0
    if alpha < CANCELLATION_THRESHOLD:
        ens = ModulationEnsemble(StateFamily.PASCS, alpha, 4)
        return correlation_numeric(spectral_projection(ens))
    x = alpha * alpha
    l0, l1, l2, l3 = eigenvalues_closed(alpha)
    t = correlation_terms(alpha)
    s = (
        t.A**2 / math.sqrt(l0 * l1)
        + t.B**2 / math.sqrt(l1 * l2)
        + t.C**2 / math.sqrt(l2 * l3)
        + t.D**2 / math.sqrt(l3 * l0)
    )
    return math.exp(-2.0 * x) * x / (2.0 * _pascs_norm(x) ** 2) * s


def correlation_gauss(v_a: float) -> float:
    """Correlation of the Gaussian-modulated protocol with the same ``V_A``."""
    v_a = float(v_a)
    if not v_a >= 0.0:
        raise ValueError(f"V_A must be >= 0, got {v_a}")
    return math.sqrt(v_a * (v_a + 2.0))


@lru_cache(maxsize=4096)
def signal_moments(
    family: StateFamily | str,
    alpha: float,
    num_states: int = 4,
    truncation: int | None = None,
) -> tuple[float, float]:
    """``(V_A, Z)`` for an ensemble, picking the best available route.

    Four-state PASCS uses the closed forms; everything else is numeric.
    """
    family = StateFamily(family)
    alpha = _check_alpha(alpha)
    if family is StateFamily.PASCS and num_states == 4 and truncation is None:
        return modulation_variance_closed(alpha), correlation_z4_closed(alpha)
    ens = ModulationEnsemble(family, alpha, num_states, truncation)
    return modulation_variance(ens), correlation_numeric(spectral_projection(ens))
