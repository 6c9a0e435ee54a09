"""Metric tests: every hand-computed example plus structural properties."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from activerank import (
    average_precision,
    interpolated_pr_11pt,
    manifold_smoothing_loss,
    mean_ap,
)


class TestAveragePrecision:
    def test_perfect_ranking(self):
        assert average_precision(["a", "b", "c", "d"], {"a", "b"}) == pytest.approx(1.0)

    def test_relevant_at_one_and_three(self):
        # (1 + 2/3) / 2
        ap = average_precision(["a", "x", "b", "y"], {"a", "b"})
        assert ap == pytest.approx((1 + 2 / 3) / 2)

    def test_single_relevant_last_of_four(self):
        assert average_precision(["x", "y", "z", "a"], {"a"}) == pytest.approx(0.25)

    def test_empty_relevant_errors(self):
        with pytest.raises(ValueError, match="empty"):
            average_precision(["a"], set())

    def test_missing_relevant_counts_as_miss(self):
        # one of two relevant items absent from the list halves the score
        assert average_precision(["a"], {"a", "b"}) == pytest.approx(0.5)

    @given(st.integers(1, 40), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_invariant_to_shuffling_irrelevant_tail(self, n_relevant, seed):
        rng = np.random.default_rng(seed)
        n = n_relevant + int(rng.integers(1, 30))
        items = list(range(n))
        relevant = set(rng.choice(n, size=n_relevant, replace=False).tolist())
        ranking = rng.permutation(n).tolist()
        last_hit = max(i for i, item in enumerate(ranking) if item in relevant)
        tail = ranking[last_hit + 1 :]
        shuffled = ranking[: last_hit + 1] + rng.permutation(tail).tolist()
        assert average_precision(ranking, relevant) == pytest.approx(
            average_precision(shuffled, relevant)
        )


class TestMeanAp:
    def test_two_values(self):
        assert mean_ap([1.0, 0.5]) == pytest.approx(0.75)

    def test_single_value(self):
        assert mean_ap([0.3]) == pytest.approx(0.3)

    def test_empty_errors(self):
        with pytest.raises(ValueError):
            mean_ap([])


class TestInterpolatedPr:
    def test_perfect_ranking_all_ones(self):
        curve = interpolated_pr_11pt(["a", "b", "x"], {"a", "b"})
        np.testing.assert_allclose(curve, np.ones(11))

    def test_nothing_retrieved(self):
        curve = interpolated_pr_11pt(["x", "y"], {"a"})
        np.testing.assert_allclose(curve, np.zeros(11))

    def test_single_relevant_second_of_two(self):
        curve = interpolated_pr_11pt(["x", "a"], {"a"})
        np.testing.assert_allclose(curve, np.full(11, 0.5))

    def test_curve_non_increasing_on_random_inputs(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 40))
            items = list(range(n))
            k = int(rng.integers(1, n + 1))
            relevant = set(rng.choice(n, size=k, replace=False).tolist())
            ranking = rng.permutation(n).tolist()
            curve = interpolated_pr_11pt(ranking, relevant)
            assert np.all(np.diff(curve) <= 1e-12)
            assert curve.min() >= 0.0 and curve.max() <= 1.0


class TestSmoothingLoss:
    def test_zero_graph(self):
        assert manifold_smoothing_loss(np.zeros((3, 3)), [1, 0, 1]) == 0.0

    def test_two_node_disagreement(self):
        affinity = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert manifold_smoothing_loss(affinity, [1, 0]) == pytest.approx(0.5)

    def test_constant_labels_zero(self, rng):
        affinity = rng.random((5, 5))
        affinity = (affinity + affinity.T) / 2
        np.fill_diagonal(affinity, 0.0)
        assert manifold_smoothing_loss(affinity, np.ones(5)) == 0.0

    def test_nonnegative_and_complement_symmetric(self, rng):
        for _ in range(25):
            m = int(rng.integers(2, 20))
            affinity = rng.random((m, m))
            affinity = (affinity + affinity.T) / 2
            np.fill_diagonal(affinity, 0.0)
            labels = rng.integers(0, 2, size=m).astype(float)
            value = manifold_smoothing_loss(affinity, labels)
            assert value >= 0.0
            assert value == pytest.approx(manifold_smoothing_loss(affinity, 1.0 - labels))
