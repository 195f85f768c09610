import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefgame.errors import DimensionError, DomainError
from prefgame.simplex import (
    PROB_FLOOR,
    apply_floor,
    as_policy,
    kl_divergence,
    log_normalize,
    prox,
    pure,
    three_point_slack,
    uniform,
)

# frozen from tests/reference_oracles.py (mpmath, 50 digits)
KL_NASH_INIT = 0.12203892390012358521
PROX_INIT_STEP = np.array([0.193428036593426135, 0.49383244093539401576, 0.31273952247117984925])


def policies(n):
    return st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n).map(lambda x: np.array(x) / sum(x))


class TestPolicy:
    def test_normalizes_and_freezes(self):
        p = as_policy([0.25, 0.25, 0.5])
        assert not p.flags.writeable
        assert abs(p.sum() - 1) <= 1e-12

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            as_policy([1.5, -0.5])

    def test_rejects_bad_sum(self):
        with pytest.raises(DomainError):
            as_policy([0.5, 0.6])

    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            as_policy([np.nan, 1.0])

    def test_rejects_matrix(self):
        with pytest.raises(DimensionError):
            as_policy([[0.5, 0.5]])

    def test_floor_clamps_tiny_entries_keeps_zeros(self):
        p = as_policy([1e-20, 0.0, 1.0 - 1e-20])
        assert p[0] == pytest.approx(PROB_FLOOR, rel=1e-6)
        assert p[1] == 0.0
        assert abs(p.sum() - 1) <= 1e-12

    def test_apply_floor_noop(self):
        p = np.array([0.3, 0.7])
        assert apply_floor(p) is p


class TestKL:
    def test_identity(self):
        assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0

    def test_pure_vs_uniform(self):
        assert kl_divergence([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)

    def test_appendix_e_value(self, nash, init):
        assert abs(kl_divergence(nash, init) - KL_NASH_INIT) <= 1e-12

    def test_support_violation_names_index(self):
        with pytest.raises(DomainError, match="index 1"):
            kl_divergence([0.5, 0.5, 0.0], [1.0, 0.0, 0.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            kl_divergence([0.5, 0.5], [1 / 3] * 3)

    def test_near_equal_accuracy(self):
        # second-order behaviour: KL ~ sum d^2 / (2 q)
        q = np.array([0.2, 0.3, 0.5])
        d = 1e-9 * np.array([1.0, -2.0, 1.0])
        expected = float(np.sum(d * d / (2 * q)))
        assert kl_divergence(q + d, q) == pytest.approx(expected, rel=1e-6)

    @settings(max_examples=300, deadline=None)
    @given(policies(4), policies(4))
    def test_nonnegative_and_pinsker(self, p, q):
        k = kl_divergence(p, q)
        assert k >= 0
        assert np.abs(p - q).sum() <= math.sqrt(2 * k) + 1e-10

    @settings(max_examples=100, deadline=None)
    @given(policies(5))
    def test_zero_iff_equal(self, p):
        assert kl_divergence(p, p) == 0.0
        q = np.roll(p, 1)
        if np.abs(p - q).max() > 1e-6:
            assert kl_divergence(p, q) > 0


class TestProx:
    def test_zero_gradient_is_identity(self, init):
        np.testing.assert_allclose(prox(init, np.zeros(3)), init, atol=1e-15)

    def test_constant_gradient(self):
        np.testing.assert_allclose(prox(uniform(3), np.full(3, 123.0)), uniform(3), atol=1e-15)

    def test_appendix_e_step(self, init):
        out = prox(init, 0.3 * np.array([0.39, 0.46, 0.64]))
        np.testing.assert_allclose(out, PROX_INIT_STEP, atol=1e-15)

    def test_large_gradient_no_overflow(self):
        out = prox(uniform(3), np.array([700.0, -700.0, 0.0]))
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0)
        assert out[1] > 0  # floored, still on support

    def test_support_follows_reference(self):
        out = prox([0.5, 0.0, 0.5], np.array([0.0, 50.0, 0.0]))
        assert out[1] == 0.0
        np.testing.assert_allclose(out, [0.5, 0.0, 0.5])

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            prox(uniform(2), np.array([np.inf, 0.0]))

    def test_rejects_shape(self):
        with pytest.raises(DimensionError):
            prox(uniform(2), np.zeros(3))

    @settings(max_examples=200, deadline=None)
    @given(policies(5), st.lists(st.floats(-20, 20), min_size=5, max_size=5), st.floats(-1e3, 1e3))
    def test_shift_invariance(self, p, g, c):
        g = np.array(g)
        a, b = prox(p, g), prox(p, g + c)
        np.testing.assert_allclose(a, b, atol=1e-12)
        assert abs(a.sum() - 1) <= 1e-12
        assert np.all(a > 0)

    def test_log_normalize_neg_inf(self):
        np.testing.assert_array_equal(log_normalize([0.0, -np.inf]), [1.0, 0.0])


class TestThreePoint:
    def test_zero_gradient_self(self, init):
        assert three_point_slack(init, np.zeros(3), prox(init, np.zeros(3)), init) == pytest.approx(0, abs=1e-15)

    def test_star_equals_prime(self, init):
        g = np.array([0.3, -0.2, 0.1])
        zp = prox(init, g)
        assert three_point_slack(init, g, zp, zp) >= -1e-10

    def test_random_triples(self):
        rng = np.random.default_rng(20260)
        worst = np.inf
        for i in range(10_000):
            n = (2, 3, 5, 10)[i % 4]
            z = rng.dirichlet(np.ones(n))
            zs = rng.dirichlet(np.ones(n))
            g = rng.normal(scale=2.0, size=n)
            worst = min(worst, three_point_slack(z, g, prox(z, g), zs))
        assert worst >= -1e-10

    def test_pure_target(self):
        z = uniform(4)
        g = np.array([1.0, 0.0, -1.0, 0.5])
        assert three_point_slack(z, g, prox(z, g), pure(4, 2)) >= -1e-10
