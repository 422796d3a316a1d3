import math

import numpy as np
import pytest

from pascs_qkd.fock import TruncationError
from pascs_qkd.modulation import (
    ModulationEnsemble,
    StateFamily,
    coherent_eigenvalues,
    correlation_gauss,
    correlation_numeric,
    correlation_terms,
    correlation_z4_closed,
    eigenvalues_closed,
    eigenvalues_series,
    modulation_variance,
    modulation_variance_closed,
    signal_moments,
    spectral_numeric,
    spectral_projection,
)

SMALL_COEFF = 4 * (3 * math.sqrt(2) - 4)


def gram_eigenvalues(family, alpha, m=4):
    """Nonzero spectrum of the mixture via the m x m Gram matrix.

    Uses analytic overlaps only, no Fock vectors:
    <b|g> = exp(-|b|^2/2 - |g|^2/2 + b* g) for coherent states, times
    (1 + 3w + w^2)/norms with w = b* g for PASCS.
    """
    step = 4 // m
    amps = [alpha * 1j ** (step * k) for k in range(m)]
    g = np.empty((m, m), dtype=complex)
    for i, b in enumerate(amps):
        for j, c in enumerate(amps):
            w = np.conj(b) * c
            ov = np.exp(-abs(b) ** 2 / 2 - abs(c) ** 2 / 2 + w)
            if family == "pascs":
                nb = 1 + 3 * abs(b) ** 2 + abs(b) ** 4
                nc = 1 + 3 * abs(c) ** 2 + abs(c) ** 4
                ov *= (1 + 3 * w + w * w) / math.sqrt(nb * nc)
            g[i, j] = ov / m
    return np.sort(np.linalg.eigvalsh(g))


def dense_two_mode_z(decomp):
    """<Phi|a(x)a + a^dag(x)a^dag|Phi> with explicit two-mode matrices."""
    n = len(decomp.eigenvectors[0])
    psi = np.zeros((n, n), dtype=complex)
    for lam, phi in zip(decomp.eigenvalues, decomp.eigenvectors):
        psi += math.sqrt(lam) * np.outer(np.conj(phi.coeffs), phi.coeffs)
    a = np.diag(np.sqrt(np.arange(1, n)), 1)
    aa = np.kron(a, a)
    vec = psi.reshape(-1)
    return float(np.real(np.vdot(vec, aa @ vec) + np.vdot(vec, aa.T @ vec)))


def test_ensemble_structure():
    ens = ModulationEnsemble("pascs", 0.13)
    assert ens.family is StateFamily.PASCS
    assert ens.phases == (1, 1j, -1, -1j)
    assert math.isclose(sum(ens.probabilities), 1.0)
    assert ModulationEnsemble("coherent", 0.3, 2).phases == (1, -1)
    with pytest.raises(ValueError):
        ModulationEnsemble("pascs", 0.1, 3)
    with pytest.raises(ValueError):
        ModulationEnsemble("pascs", -0.1)


def test_eigenvalues_at_zero():
    assert eigenvalues_closed(0.0) == pytest.approx((1.0, 0.0, 0.0, 0.0), abs=0)


def test_eigenvalues_unit_trace():
    assert abs(sum(eigenvalues_closed(0.13)) - 1.0) <= 1e-12


def test_closed_eigenvalues_match_series():
    closed = eigenvalues_closed(0.5)
    series = eigenvalues_series(0.5)
    for c, s in zip(closed, series):
        assert abs(c - s) / s <= 1e-10


@pytest.mark.parametrize("alpha", [0.02, 0.05, 0.13, 0.5, 1.0])
def test_series_matches_gram_oracle(alpha):
    # dense eigvalsh resolves the small eigenvalues only to ~1e-16 absolute
    oracle = gram_eigenvalues("pascs", alpha)
    np.testing.assert_allclose(np.sort(eigenvalues_series(alpha)), oracle, rtol=1e-9, atol=1e-15)


def test_coherent_numeric_spectrum():
    alpha = 0.25
    num = spectral_numeric(ModulationEnsemble("coherent", alpha)).eigenvalues
    std = coherent_eigenvalues(alpha)
    np.testing.assert_allclose(num, std, rtol=1e-10)
    np.testing.assert_allclose(np.sort(std), gram_eigenvalues("coherent", alpha), rtol=1e-10)


def test_pascs_numeric_spectrum_matches_closed():
    num = spectral_numeric(ModulationEnsemble("pascs", 0.13)).eigenvalues
    np.testing.assert_allclose(num, eigenvalues_closed(0.13), rtol=1e-10)


def test_eigenvector_residue_support():
    dec = spectral_numeric(ModulationEnsemble("pascs", 0.13))
    idx = np.arange(len(dec.eigenvectors[0]))
    for k, phi in enumerate(dec.eigenvectors):
        assert np.max(np.abs(phi.coeffs[idx % 4 != k])) <= 1e-12
        assert phi.is_normalized()


def test_two_state_spectrum():
    dec = spectral_numeric(ModulationEnsemble("pascs", 0.4, 2))
    assert dec.block_period == 2
    np.testing.assert_allclose(np.sort(dec.eigenvalues), gram_eigenvalues("pascs", 0.4, 2), rtol=1e-10)


def test_spectral_numeric_rejects_short_cutoff():
    with pytest.raises(TruncationError):
        spectral_numeric(ModulationEnsemble("pascs", 1.0, 4, truncation=5))


ALPHA_GRID = [0.0, 0.001, 0.01, 0.03, 0.05, 0.1, 0.13, 0.3, 0.6, 1.0]


@pytest.mark.parametrize("alpha", ALPHA_GRID)
def test_trace_and_nonnegativity_both_paths(alpha):
    for lam in (eigenvalues_closed(alpha), spectral_numeric(ModulationEnsemble("pascs", alpha)).eigenvalues):
        assert abs(sum(lam) - 1.0) <= 1e-10
        assert min(lam) >= -1e-12


def test_modulation_variance():
    assert modulation_variance(ModulationEnsemble("pascs", 0.0)) == 0.0
    assert modulation_variance_closed(0.25, "coherent") == pytest.approx(0.125, abs=1e-15)
    assert modulation_variance(ModulationEnsemble("coherent", 0.25)) == pytest.approx(0.125, abs=1e-12)
    numeric = modulation_variance(ModulationEnsemble("pascs", 0.13))
    assert abs(numeric - modulation_variance_closed(0.13)) <= 1e-10


def test_correlation_terms_nonnegative():
    for a in np.linspace(0.0, 1.5, 31):
        t = correlation_terms(a)
        assert min(t.A, t.B, t.C, t.D) >= 0


def test_z4_at_zero():
    assert correlation_z4_closed(0.0) == 0.0


def test_z4_small_amplitude_expansion():
    a = 0.05
    assert abs(correlation_z4_closed(a) - (4 * a + SMALL_COEFF * a**3)) <= 10 * a**5


def test_z4_relative_gap_at_two_tenths():
    a = 0.2
    zg = correlation_gauss(modulation_variance_closed(a))
    assert abs((zg - correlation_z4_closed(a)) / zg - 0.03) <= 0.01


def test_z_numeric_matches_closed_and_expected_gap():
    dec = spectral_numeric(ModulationEnsemble("pascs", 0.13))
    zn = correlation_numeric(dec)
    assert abs(zn - correlation_z4_closed(0.13)) / zn <= 1e-8
    zg = correlation_gauss(modulation_variance_closed(0.13))
    assert abs((zg - zn) / zg - 0.013) <= 0.005


@pytest.mark.parametrize("family,alpha,m", [("pascs", 0.3, 4), ("pascs", 0.3, 2), ("coherent", 0.5, 4)])
def test_z_contraction_matches_dense_two_mode(family, alpha, m):
    dec = spectral_numeric(ModulationEnsemble(family, alpha, m, truncation=30))
    assert abs(correlation_numeric(dec) - dense_two_mode_z(dec)) <= 1e-12


def test_coherent_z_standard_formula():
    # four-state coherent: Z = 2 a^2 sum_k lambda_{k-1}^{3/2} lambda_k^{-1/2}
    a = 0.25
    lam = coherent_eigenvalues(a)
    expected = 2 * a * a * sum(lam[k - 1] ** 1.5 / lam[k] ** 0.5 for k in range(4))
    z = correlation_numeric(spectral_projection(ModulationEnsemble("coherent", a)))
    assert abs(z - expected) / expected <= 1e-12


def test_z_ordering_two_four_gauss():
    a = 0.3
    z2 = correlation_numeric(spectral_numeric(ModulationEnsemble("pascs", a, 2)))
    z4 = correlation_z4_closed(a)
    assert z2 < z4 < correlation_gauss(modulation_variance_closed(a))


def test_z_ordering_grid():
    for a in np.linspace(0.02, 1.0, 50):
        _, z2 = signal_moments("pascs", float(a), 2)
        va, z4 = signal_moments("pascs", float(a), 4)
        assert 0 <= z2 <= z4 <= correlation_gauss(va)


def test_gauss_correlation():
    assert correlation_gauss(0.0) == 0.0
    assert correlation_gauss(3.0) == pytest.approx(math.sqrt(15), rel=1e-15)
    a = 0.05
    assert abs(correlation_gauss(modulation_variance_closed(a)) - (4 * a + 4.5 * a**3)) <= 25 * a**5
    with pytest.raises(ValueError):
        correlation_gauss(-0.1)


def test_gauss_correlation_fifth_order():
    # sqrt(16a^2 + 36a^4 - 152a^6) = 4a + 4.5a^3 - (19 + 81/32) a^5 + ...
    for a in (0.01, 0.02):
        resid = correlation_gauss(modulation_variance_closed(a)) - (4 * a + 4.5 * a**3)
        assert resid / a**5 == pytest.approx(-(19 + 81 / 32), rel=0.01)


def test_small_amplitude_gap_asymptote():
    a = 0.02
    va, z4 = signal_moments("pascs", a)
    ratio = (correlation_gauss(va) - z4) / a**3 / (4.5 - SMALL_COEFF)
    assert abs(ratio - 1.0) <= 0.05


@pytest.mark.parametrize("alpha", np.linspace(0.05, 1.0, 20))
def test_cross_path_equivalence(alpha):
    dec = spectral_numeric(ModulationEnsemble("pascs", float(alpha)))
    np.testing.assert_allclose(dec.eigenvalues, eigenvalues_closed(alpha), rtol=1e-10)
    zn = correlation_numeric(dec)
    assert abs(correlation_z4_closed(alpha) - zn) / zn <= 1e-8


def test_below_threshold_continuity():
    lo = correlation_z4_closed(0.0499999)
    hi = correlation_z4_closed(0.05)
    assert abs(hi - lo) / hi < 1e-5
