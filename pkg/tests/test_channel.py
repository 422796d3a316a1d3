import math

import numpy as np
import pytest

from pascs_qkd.channel import (
    ChannelParams,
    DetectionParams,
    SignConvention,
    condition_on_homodyne,
    conditional_variance,
    propagate,
    transmittance_from_distance,
)
from pascs_qkd.gaussian import homodyne_conditional, symplectic_eigenvalues
from pascs_qkd.modulation import correlation_gauss


@pytest.mark.parametrize("length,expected", [(0, 1.0), (50, 0.1), (100, 0.01)])
def test_transmittance(length, expected):
    assert transmittance_from_distance(length, 0.2) == pytest.approx(expected, rel=1e-12)


def test_transmittance_rejects_negative_length():
    with pytest.raises(ValueError):
        transmittance_from_distance(-1.0)


def test_channel_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(0.0)
    with pytest.raises(ValueError):
        ChannelParams(1.2)
    with pytest.raises(ValueError):
        ChannelParams(0.5, -0.01)
    with pytest.raises(ValueError):
        ChannelParams(0.5, 0.0, fiber_length=10.0, loss_db_per_km=0.2)
    ch = ChannelParams.from_distance(25.0, 0.01)
    assert abs(ch.transmissivity - 10 ** (-0.5)) <= 1e-12
    with pytest.raises(ValueError):
        DetectionParams(1.1, 1.0)
    with pytest.raises(ValueError):
        DetectionParams(1.0, 0.0)


def test_identity_channel():
    cm = propagate(0.7, 0.9, ChannelParams(1.0, 0.0))
    np.testing.assert_array_equal(cm.gamma_b, 1.7 * np.eye(2))
    np.testing.assert_array_equal(cm.sigma_ab, np.diag([0.9, -0.9]))


def test_total_loss_leaves_vacuum():
    cm = propagate(2.0, 1.5, ChannelParams(1e-15, 0.05))
    np.testing.assert_allclose(cm.gamma_b, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(cm.sigma_ab, 0, atol=1e-7)


def test_bob_variance_with_detector_folding():
    cm = propagate(0.5, 1.0, ChannelParams(0.25, 0.01), DetectionParams(1.0, 0.6))
    # 0.15 * 0.5 + 1 + 0.15 * 0.01
    assert cm.variance_b == pytest.approx(1.0765, abs=1e-15)


def test_detector_folding_equivalence():
    a = propagate(0.4, 0.8, ChannelParams(0.3, 0.02), DetectionParams(0.9, 0.6))
    b = propagate(0.4, 0.8, ChannelParams(0.3 * 0.6, 0.02), DetectionParams(0.9, 1.0))
    np.testing.assert_array_equal(a.full(), b.full())


def test_conditioning_pure_gaussian():
    v_a = 0.5
    cm = propagate(v_a, correlation_gauss(v_a), ChannelParams(1.0, 0.0))
    cond = condition_on_homodyne(cm)
    assert cond[0, 0] == pytest.approx(2 / 3, abs=1e-14)
    assert cond[1, 1] == pytest.approx(1 + v_a, abs=1e-15)
    assert cond[0, 1] == 0 and cond[1, 0] == 0


def test_conditioning_without_correlation():
    cm = propagate(0.5, 0.0, ChannelParams(0.3, 0.01))
    np.testing.assert_array_equal(condition_on_homodyne(cm), cm.gamma_a)


def test_conditioning_matches_dense_pinv():
    rng = np.random.default_rng(7)
    for _ in range(200):
        v_a = rng.uniform(0.01, 5)
        z = rng.uniform(0, 1) * correlation_gauss(v_a)
        ch = ChannelParams(rng.uniform(1e-3, 1), rng.uniform(0, 0.2))
        cm = propagate(v_a, z, ch)
        np.testing.assert_allclose(condition_on_homodyne(cm), homodyne_conditional(cm.full()), atol=1e-12)
        assert condition_on_homodyne(cm)[0, 0] == pytest.approx(
            conditional_variance(v_a, z, ch.transmissivity, ch.excess_noise), abs=1e-12
        )


def test_conditioning_bounds_and_physicality():
    rng = np.random.default_rng(11)
    for _ in range(300):
        v_a = rng.uniform(0.01, 5)
        z = rng.uniform(0, 1) * correlation_gauss(v_a)
        t, xi = rng.uniform(1e-4, 1), rng.uniform(0, 0.2)
        cm = propagate(v_a, z, ChannelParams(t, xi))
        assert cm.variance_a >= 1 and cm.variance_b >= 1
        assert min(symplectic_eigenvalues(cm.full())) >= 1 - 1e-9
        v = conditional_variance(v_a, z, t, xi)
        assert 0 <= v <= v_a + 1


def test_conditional_variance_monotone():
    v_a, z = 0.6, 0.95 * correlation_gauss(0.6)
    ts = np.linspace(0.01, 1, 60)
    xis = np.linspace(0, 0.2, 60)
    in_t = [conditional_variance(v_a, z, t, 0.01) for t in ts]
    in_xi = [conditional_variance(v_a, z, 0.3, x) for x in xis]
    assert np.all(np.diff(in_t) <= 1e-15)
    assert np.all(np.diff(in_xi) >= -1e-15)


def test_literal_sign_can_go_unphysical():
    v_a = 0.1
    std = propagate(v_a, 0.0, ChannelParams(1.0, 0.3))
    lit = propagate(v_a, 0.0, ChannelParams(1.0, 0.3), convention=SignConvention.PAPER_LITERAL)
    assert std.variance_b == pytest.approx(1.4)
    assert lit.variance_b == pytest.approx(0.8)
    assert lit.variance_b < 1  # below the vacuum floor when xi > V_A
    assert SignConvention("paper-literal") is SignConvention.PAPER_LITERAL
    assert math.isclose(
        conditional_variance(v_a, 0.2, 0.5, 0.05, SignConvention.PAPER_LITERAL),
        v_a + 1 - 0.5 * 0.04 / (0.5 * v_a + 1 - 0.5 * 0.05),
    )
