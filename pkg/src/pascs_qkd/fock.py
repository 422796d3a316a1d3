"""Truncated Fock-space vectors and single-mode ladder operators.

Coefficients are always built from ratio recurrences so that no factorial is
ever materialized; this keeps cutoffs in the hundreds safe in float64.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

TRUNCATION_ENV = "PASCS_QKD_TRUNCATION"
DEFAULT_TRUNCATION = 60
MAX_TRUNCATION = 512

NORMALIZATION_TOL = 1e-10
TAIL_TOL = 1e-14


class TruncationError(ValueError):
    """Raised when a photon-number cutoff cannot hold a state faithfully."""


def default_truncation() -> int:
    """Cutoff used when none is given; honours ``PASCS_QKD_TRUNCATION``."""
    raw = os.environ.get(TRUNCATION_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_TRUNCATION
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{TRUNCATION_ENV} must be an integer, got {raw!r}") from exc
    if value < 0:
        raise ValueError(f"{TRUNCATION_ENV} must be >= 0, got {value}")
    return value


@dataclass(frozen=True)
class FockVector:
    """Amplitudes ``c_0..c_N`` of a single-mode state in the number basis."""

    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=complex)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("coeffs must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coeffs must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def truncation(self) -> int:
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def tail_weight(self) -> float:
        """Relative weight of the top coefficient, ``|c_N|^2 / sum |c_k|^2``."""
        total = self.norm_squared()
        if total == 0.0:
            return 0.0 if self.coeffs[-1] == 0 else math.inf
        return float(abs(self.coeffs[-1]) ** 2 / total)

    def is_converged(self, tol: float = TAIL_TOL) -> bool:
        return self.tail_weight() <= tol

    def normalized(self) -> FockVector:
        total = self.norm_squared()
        if total == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return FockVector(self.coeffs / math.sqrt(total))

    def inner(self, other: FockVector) -> complex:
        """``<self|other>``, conjugate-linear in ``self``."""
        n = min(len(self), len(other))
        return complex(np.vdot(self.coeffs[:n], other.coeffs[:n]))

    def mean_photon_number(self) -> float:
        k = np.arange(self.coeffs.size)
        return float(np.sum(k * np.abs(self.coeffs) ** 2))

    def conjugate(self) -> FockVector:
        return FockVector(np.conj(self.coeffs))

    def padded(self, trunc: int) -> FockVector:
        if trunc < self.truncation:
            raise ValueError("padded() cannot shrink a vector")
        out = np.zeros(trunc + 1, dtype=complex)
        out[: self.coeffs.size] = self.coeffs
        return FockVector(out)


def _check_amplitude(eta: complex, trunc: int) -> complex:
    eta = complex(eta)
    if not (math.isfinite(eta.real) and math.isfinite(eta.imag)):
        raise ValueError(f"amplitude must be finite, got {eta!r}")
    if int(trunc) != trunc or trunc < 0:
        raise ValueError(f"truncation must be a non-negative integer, got {trunc!r}")
    return eta


def _from_ratios(log_c0: float, eta: complex, trunc: int, log_ratio: Callable[[int], float]) -> np.ndarray:
    """Accumulate ``|c_k|`` in log space so large amplitudes do not underflow."""
    out = np.zeros(trunc + 1, dtype=complex)
    out[0] = math.exp(log_c0)
    if eta == 0:
        return out
    log_eta = math.log(abs(eta))
    phase = eta / abs(eta)
    log_c = log_c0
    for k in range(trunc):
        log_c += log_eta + log_ratio(k)
        out[k + 1] = math.exp(log_c) * phase ** (k + 1)
    return out


def _validated(coeffs: np.ndarray, check: bool, what: str, eta: complex) -> FockVector:
    vec = FockVector(coeffs)
    if check and not vec.is_converged():
        raise TruncationError(
            f"cutoff N={vec.truncation} too small for {what}(eta={eta:.6g}): "
            f"tail weight {vec.tail_weight():.3e} > {TAIL_TOL:.0e}"
        )
    return vec


def pascs_coefficients(eta: complex, trunc: int | None = None, check: bool = True) -> FockVector:
    """Photon-added-then-subtracted coherent state ``a a^dag |eta>``, normalized.

    Uses ``c_{k+1}/c_k = eta (k+2) / (k+1)^{3/2}``.  With ``check`` set, raises
    :class:`TruncationError` when the top coefficient carries more than
    ``TAIL_TOL`` of the weight.
    """
    trunc = default_truncation() if trunc is None else trunc
    eta = _check_amplitude(eta, trunc)
    r2 = abs(eta) ** 2
    log_c0 = -r2 / 2.0 - 0.5 * math.log(1.0 + 3.0 * r2 + r2 * r2)
    coeffs = _from_ratios(log_c0, eta, trunc, lambda k: math.log(k + 2) - 1.5 * math.log(k + 1))
    return _validated(coeffs, check, "pascs", eta)


def coherent_coefficients(eta: complex, trunc: int | None = None, check: bool = True) -> FockVector:
    """Coherent state ``|eta>`` via ``c_{k+1}/c_k = eta / sqrt(k+1)``."""
    trunc = default_truncation() if trunc is None else trunc
    eta = _check_amplitude(eta, trunc)
    log_c0 = -abs(eta) ** 2 / 2.0
    coeffs = _from_ratios(log_c0, eta, trunc, lambda k: -0.5 * math.log(k + 1))
    return _validated(coeffs, check, "coherent", eta)


def apply_annihilation(v: FockVector) -> FockVector:
    """``a|v>``: slot k receives ``sqrt(k+1) c_{k+1}``; the top slot becomes 0."""
    c = v.coeffs
    out = np.zeros_like(c)
    out[:-1] = np.sqrt(np.arange(1, c.size)) * c[1:]
    return FockVector(out)


def apply_creation(v: FockVector, check: bool = True) -> FockVector:
    """``a^dag|v>`` kept inside the same cutoff.

    The image of ``c_N`` lands at ``N+1`` and is dropped; with ``check`` set a
    :class:`TruncationError` is raised if that loses more than ``TAIL_TOL`` of
    the output weight.
    """
    c = v.coeffs
    n = c.size
    out = np.zeros_like(c)
    out[1:] = np.sqrt(np.arange(1, n)) * c[:-1]
    if check:
        lost = n * abs(c[-1]) ** 2
        kept = float(np.sum(np.abs(out) ** 2))
        if lost > TAIL_TOL * (kept + lost):
            raise TruncationError(
                f"creation pushes weight {lost:.3e} past cutoff N={n - 1}"
            )
    return FockVector(out)


def converged_state(builder: Callable[..., FockVector], eta: complex, trunc: int | None = None) -> FockVector:
    """Build ``builder(eta, N)`` doubling ``N`` until the tail test passes.

    Starts from ``trunc`` (or the default cutoff) and stops at
    ``MAX_TRUNCATION``.
    """
    n = default_truncation() if trunc is None else trunc
    n = max(n, 1)
    while True:
        vec = builder(eta, n, check=False)
        if vec.is_converged():
            return vec
        if n >= MAX_TRUNCATION:
            raise TruncationError(
                f"no adequate cutoff up to N={MAX_TRUNCATION} for eta={complex(eta):.6g}"
            )
        n = min(2 * n, MAX_TRUNCATION)
