"""Generic Gaussian-state entropies from covariance matrices.

Deliberately independent of the closed-form expressions in :mod:`keyrate`:
symplectic spectra come from a dense eigensolve, and homodyne conditioning
uses a generic pseudo-inverse.  Used as a cross-check oracle.
"""

from __future__ import annotations

import numpy as np


def symplectic_form(n_modes: int) -> np.ndarray:
    omega = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return np.kron(np.eye(n_modes), omega)


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Moduli of the eigenvalues of ``i Omega cov``, one per mode, ascending."""
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov))
    return np.sort(ev)[::2]


def entropy_function(x: float) -> float:
    """Bosonic entropy ``(x+1)log2(x+1) - x log2 x`` written naively."""
    if x <= 0.0:
        return 0.0
    return (x + 1.0) * np.log2(x + 1.0) - x * np.log2(x)


def von_neumann_entropy(cov: np.ndarray) -> float:
    """Entropy in bits of the Gaussian state with covariance ``cov``."""
    return float(sum(entropy_function((nu - 1.0) / 2.0) for nu in symplectic_eigenvalues(cov)))


def homodyne_conditional(cov_ab: np.ndarray) -> np.ndarray:
    """Mode A of a two-mode state after homodyne X on mode B."""
    cov_ab = np.asarray(cov_ab, dtype=float)
    ga, gb, sab = cov_ab[:2, :2], cov_ab[2:, 2:], cov_ab[:2, 2:]
    proj = np.diag([1.0, 0.0])
    return ga - sab @ np.linalg.pinv(proj @ gb @ proj) @ sab.T


def holevo_reverse_homodyne(cov_ab: np.ndarray) -> float:
    """Eve's Holevo information on Bob's homodyne outcome.

    Eve holds the purification of AB, so ``S(E) = S(AB)`` and, after Bob's
    projective measurement, ``S(E|x_B) = S(A|x_B)``.
    """
    return von_neumann_entropy(cov_ab) - von_neumann_entropy(homodyne_conditional(cov_ab))
