"""Unit and property tests for the probability-vector math."""

import math

import numpy as np
import pytest

from smem.probmath import AllZeroOutput, LengthMismatch, entropy, jsd, kl_div, normalize

from oracles import entropy_ref, jsd_ref, kl_ref, normalize_ref


def random_distribution(rng, k):
    """Random point on the simplex, occasionally with hard zeros."""
    d = rng.dirichlet(np.full(k, rng.uniform(0.1, 4.0)))
    if rng.random() < 0.25:
        kill = rng.choice(k, size=rng.integers(1, k), replace=False)
        d[kill] = 0.0
        if d.sum() == 0.0:
            d[rng.integers(k)] = 1.0
        d = d / d.sum()
    return d


class TestNormalize:
    def test_uniform_scaling(self):
        np.testing.assert_allclose(normalize([0.2, 0.2, 0.2, 0.2]), [0.25, 0.25, 0.25, 0.25])

    def test_already_normalized(self):
        np.testing.assert_allclose(normalize([1.0, 0.0]), [1.0, 0.0])

    def test_hand_division(self):
        np.testing.assert_allclose(normalize([0.9, 0.3]), [0.75, 0.25], atol=1e-15)

    def test_all_zero_rejected(self):
        with pytest.raises(AllZeroOutput):
            normalize([0.0, 0.0, 0.0])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            normalize([0.5, 1.5])
        with pytest.raises(ValueError):
            normalize([-0.1, 0.5])

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            raw = rng.uniform(0.0, 1.0, size=rng.integers(2, 12))
            raw[rng.integers(raw.size)] = rng.uniform(0.5, 1.0)
            c = rng.uniform(0.05, 1.0)
            np.testing.assert_allclose(normalize(c * raw), normalize(raw), atol=1e-12)


class TestEntropy:
    def test_deterministic_distribution(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_two_point_uniform(self):
        assert entropy([0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_four_point_uniform(self):
        assert entropy([0.25] * 4) == pytest.approx(math.log(4), abs=1e-12)

    def test_bounds_and_uniform_maximum(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            k = int(rng.integers(2, 20))
            h = entropy(random_distribution(rng, k))
            assert 0.0 <= h <= math.log(k) + 1e-12
        assert entropy(np.full(9, 1.0 / 9)) == pytest.approx(math.log(9), abs=1e-12)


class TestKlDiv:
    def test_identical_is_zero(self):
        assert kl_div([0.3, 0.7], [0.3, 0.7]) == pytest.approx(0.0, abs=1e-12)

    def test_hand_value(self):
        # 0.5*ln 2 + 0.5*ln(2/3)
        assert kl_div([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.14384103622589042, abs=1e-12)

    def test_disjoint_support_is_infinite(self):
        assert kl_div([1.0, 0.0], [0.0, 1.0]) == math.inf

    def test_smoothing_keeps_score_finite(self):
        smoothed = kl_div([1.0, 0.0], [0.0, 1.0], smoothing=True)
        assert math.isfinite(smoothed)
        assert smoothed > 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            kl_div([0.5, 0.5], [0.2, 0.3, 0.5])

    def test_non_negative_and_self_zero(self):
        rng = np.random.default_rng(13)
        for _ in range(500):
            k = int(rng.integers(2, 15))
            p = random_distribution(rng, k)
            q = random_distribution(rng, k)
            assert kl_div(p, q) >= -1e-12
            assert kl_div(p, p) <= 1e-12


class TestJsd:
    def test_identical_is_zero(self):
        assert jsd([0.2, 0.3, 0.5], [0.2, 0.3, 0.5]) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_support_is_ln2(self):
        assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.log(2), abs=1e-12)

    def test_hand_value(self):
        # direct evaluation with M = (0.375, 0.625)
        assert jsd([0.5, 0.5], [0.25, 0.75]) == pytest.approx(0.033822075568605205, abs=1e-12)

    def test_symmetric_bounded_finite(self):
        rng = np.random.default_rng(17)
        for _ in range(500):
            k = int(rng.integers(2, 15))
            p = random_distribution(rng, k)
            q = random_distribution(rng, k)
            forward_value = jsd(p, q)
            assert abs(forward_value - jsd(q, p)) <= 1e-12
            assert -1e-12 <= forward_value <= math.log(2) + 1e-12
            assert math.isfinite(forward_value)


class TestOracleEquivalence:
    """The numpy implementations must agree with plain-loop summation."""

    def test_thousand_random_distributions(self):
        rng = np.random.default_rng(23)
        for _ in range(1000):
            k = int(rng.integers(2, 30))
            p = random_distribution(rng, k)
            q = random_distribution(rng, k)
            assert entropy(p) == pytest.approx(entropy_ref(p), abs=1e-12)
            lib = kl_div(p, q)
            ref = kl_ref(list(p), list(q))
            if math.isinf(ref):
                assert lib == math.inf
            else:
                assert lib == pytest.approx(ref, abs=1e-12)
            assert jsd(p, q) == pytest.approx(jsd_ref(list(p), list(q)), abs=1e-12)

    def test_normalize_against_reference(self):
        rng = np.random.default_rng(29)
        for _ in range(200):
            raw = rng.uniform(0.0, 1.0, size=rng.integers(2, 12))
            raw[rng.integers(raw.size)] = 0.9
            np.testing.assert_allclose(normalize(raw), normalize_ref(list(raw)), atol=1e-12)
