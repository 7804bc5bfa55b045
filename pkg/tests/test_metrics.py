import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from forestlab.errors import InputError, NumericError
from forestlab.metrics import (PointStats, RunAccumulator, accumulate_run, compare, conditional_slice,
                               decompose_conditional_on_fhat, decompose_conditional_on_x,
                               decorrelation_identity_gap, fhat_decomposition, paired_t,
                               relative_difference, tree_diagnostics, tree_diagnostics_detail,
                               tree_moments)


def fill(signal, response, preds, per_tree=None):
    """Accumulator over runs; preds is W x J, per_tree W x B x J."""
    acc = RunAccumulator(signal, response)
    for w, p in enumerate(preds):
        if per_tree is None:
            acc.add_run(p)
        else:
            acc.add_run(p, tree_moments(per_tree[w], signal), per_tree.shape[1])
    return acc


def synthetic(rng, W=6, B=4, J=10):
    f = rng.normal(size=J)
    y = f + rng.normal(size=J)
    trees = f + rng.normal(size=(W, 1, J)) + 0.5 * rng.normal(size=(W, B, J))
    return f, y, trees, trees.mean(axis=1)


class TestAccumulator:
    def test_zero_run(self):
        acc = RunAccumulator(np.zeros(3), np.zeros(3)).add_run(np.zeros(3))
        assert acc.mse_run == [0.0]

    def test_empty_accumulator_errors(self):
        acc = RunAccumulator(np.zeros(3), np.zeros(3))
        with pytest.raises(NumericError):
            acc.point_stats()
        with pytest.raises(NumericError):
            decompose_conditional_on_x(acc, 1.0)

    def test_merge_matches_sequential(self, rng):
        f, y, trees, preds = synthetic(rng, W=6)
        whole = fill(f, y, preds, trees)
        merged = fill(f, y, preds[:3], trees[:3]).merge(fill(f, y, preds[3:], trees[3:]))
        assert merged.W == 6 and merged.B == whole.B
        for name in ("sum_d", "sum_d2", "sum_sqerr_y", "sum_S", "sum_Q", "sum_S2"):
            np.testing.assert_allclose(getattr(merged, name), getattr(whole, name), rtol=1e-13, atol=1e-13)
        assert merged.mse_run == whole.mse_run

    def test_merge_exact_on_dyadic_values(self, rng):
        f = np.zeros(5)
        preds = rng.integers(-8, 8, size=(6, 5)) / 4.0
        whole = fill(f, f, preds)
        parts = [fill(f, f, preds[i:i + 2]) for i in (0, 2, 4)]
        left = parts[0].merge(parts[1]).merge(parts[2])
        right = parts[0].merge(parts[1].merge(parts[2]))
        for name in ("sum_d", "sum_d2", "sum_sqerr_y"):
            assert getattr(left, name).tobytes() == getattr(whole, name).tobytes()
            assert getattr(right, name).tobytes() == getattr(whole, name).tobytes()

    def test_merge_rejects_other_test_set(self):
        a = RunAccumulator(np.zeros(2), np.zeros(2))
        with pytest.raises(InputError):
            a.merge(RunAccumulator(np.ones(2), np.zeros(2)))

    def test_dimension_checks(self):
        acc = RunAccumulator(np.zeros(3), np.zeros(3))
        with pytest.raises(InputError):
            acc.add_run(np.zeros(4))
        with pytest.raises(InputError):
            accumulate_run(acc, np.zeros(3), None, np.ones(3))
        acc.add_run(np.zeros(3))
        with pytest.raises(InputError):
            acc.add_run(np.zeros(3), (np.zeros(3), np.zeros(3)), 2)

    def test_accumulate_run(self, rng):
        f, y, trees, preds = synthetic(rng, W=2)
        acc = RunAccumulator(f, y)
        S, Q = tree_moments(trees[0], f)
        accumulate_run(acc, preds[0], (S, Q, trees.shape[1]), y)
        assert acc.W == 1 and acc.mse_run[0] == pytest.approx(np.mean((y - preds[0]) ** 2))


class TestConditionalOnX:
    def test_perfect_predictions(self):
        f = np.array([1.0, 2.0, 3.0])
        rep = decompose_conditional_on_x(fill(f, f, [f, f, f]), 0.7)
        assert rep.bias_sq == 0 and rep.variance == 0
        assert rep.mse_plugin == pytest.approx(0.49)

    def test_symmetric_deviation(self):
        f = np.array([1.0, -2.0, 0.5])
        rep = decompose_conditional_on_x(fill(f, f, [f + 1, f - 1]), 1.0)
        assert rep.bias_sq == pytest.approx(0.0, abs=1e-15)
        assert rep.variance == pytest.approx(1.0)
        assert rep.mse_plugin == rep.bias_sq + rep.variance + rep.irreducible

    def test_single_run_rejected(self):
        f = np.zeros(2)
        with pytest.raises(NumericError):
            decompose_conditional_on_x(fill(f, f, [f]), 1.0)

    def test_empirical_mse(self, rng):
        f, y, _, preds = synthetic(rng)
        rep = decompose_conditional_on_x(fill(f, y, preds), 1.0)
        assert rep.mse_empirical == pytest.approx(np.mean((y - preds) ** 2), rel=1e-12)
        assert rep.irreducible_empirical == pytest.approx(np.mean((y - f) ** 2), rel=1e-12)


class TestConditionalOnFhat:
    def test_perfect(self):
        assert decompose_conditional_on_fhat(np.zeros((3, 4))) == (0.0, 0.0)

    def test_plus_minus(self):
        assert decompose_conditional_on_fhat([[1.0, -1.0]]) == (0.0, 1.0)

    def test_needs_two_points(self):
        with pytest.raises(NumericError):
            decompose_conditional_on_fhat(np.zeros((3, 1)))

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(np.float64, (5, 10), elements=st.floats(-100, 100)))
    def test_both_decompositions_split_same_total(self, e):
        total = np.mean(e ** 2)
        b, v = decompose_conditional_on_fhat(e)
        f = np.zeros(10)
        rep = decompose_conditional_on_x(fill(f, f, f - e), 1.0)
        tol = 1e-10 * max(total, 1e-300) + 1e-12
        assert abs(b + v - total) <= tol
        assert abs(rep.bias_sq + rep.variance - total) <= tol

    def test_streaming_matches_matrix(self, rng):
        f, y, _, preds = synthetic(rng)
        acc = fill(f, y, preds)
        np.testing.assert_allclose(fhat_decomposition(acc), decompose_conditional_on_fhat(f - preds), rtol=1e-12)


class TestTreeDiagnostics:
    def test_constant_trees(self):
        f = np.array([0.0, 1.0])
        trees = np.full((3, 4, 2), 2.0)
        tv, corr = tree_diagnostics(fill(f, f, trees.mean(axis=1), trees), 4)
        assert tv == 0.0 and corr == 1.0
        assert tree_diagnostics_detail(fill(f, f, trees.mean(axis=1), trees)).degenerate_points == 2

    def test_independent_trees(self, rng):
        f = np.zeros(50)
        trees = rng.normal(size=(400, 10, 50))
        tv, corr = tree_diagnostics(fill(f, f, trees.mean(axis=1), trees))
        assert tv == pytest.approx(1.0, abs=0.05)
        assert abs(corr) < 0.02

    def test_known_correlation(self, rng):
        f = np.zeros(20)
        trees = np.sqrt(0.3) * rng.normal(size=(500, 1, 20)) + np.sqrt(0.7) * rng.normal(size=(500, 8, 20))
        tv, corr = tree_diagnostics(fill(f, f, trees.mean(axis=1), trees))
        assert corr == pytest.approx(0.3, abs=0.03)

    def test_shift_invariance(self, rng):
        f, y, trees, preds = synthetic(rng)
        a = tree_diagnostics(fill(f, y, preds, trees))
        b = tree_diagnostics(fill(f + 1e6, y + 1e6, preds + 1e6, trees + 1e6))
        np.testing.assert_allclose(a, b, rtol=1e-6)

    def test_correlation_in_range(self, rng):
        f = np.zeros(30)
        # Two runs with anti-aligned trees push the raw estimate below -1 at some points.
        trees = rng.normal(size=(2, 2, 30))
        d = tree_diagnostics_detail(fill(f, f, trees.mean(axis=1), trees))
        assert -1.0 <= d.pairwise_correlation <= 1.0

    def test_requires_two_trees(self):
        f = np.zeros(2)
        trees = np.zeros((2, 1, 2))
        with pytest.raises(InputError):
            tree_diagnostics(fill(f, f, trees.mean(axis=1), trees))

    def test_finite_b_identity(self, rng):
        # Exact pointwise: Var(mean of B trees) = Cov + (TreeVar - Cov) / B.
        f, y, trees, preds = synthetic(rng, W=7, B=2, J=12)
        acc = fill(f, y, preds, trees)
        rep = decompose_conditional_on_x(acc, 1.0)
        d = tree_diagnostics_detail(acc)
        assert rep.variance == pytest.approx(d.mean_covariance + (d.tree_variance - d.mean_covariance) / 2,
                                             rel=1e-12)

    def test_gap_bounded_by_remainder(self, rng):
        f, y, trees, preds = synthetic(rng, W=9, B=2, J=1)
        rep = decompose_conditional_on_x(fill(f, y, preds, trees), 1.0)
        cov = rep.pairwise_correlation * rep.tree_variance
        remainder = abs(rep.tree_variance - cov) / 2
        assert decorrelation_identity_gap(rep) == pytest.approx(remainder / rep.variance, rel=1e-10)

    def test_gap_zero_for_offset_trees(self, rng):
        f = np.zeros(5)
        shift = rng.normal(size=(6, 1, 5))
        trees = np.repeat(shift, 3, axis=1)
        rep = decompose_conditional_on_x(fill(f, f, trees.mean(axis=1), trees), 1.0)
        assert decorrelation_identity_gap(rep) == pytest.approx(0.0, abs=1e-12)

    def test_paper_table_gap(self):
        rep = decompose_conditional_on_x(fill(np.zeros(2), np.zeros(2), [[1.0, -1.0], [-1.0, 1.0]]), 1.0)
        rep = type(rep)(**{**rep.__dict__, "variance": 1.06, "tree_variance": 7.03, "pairwise_correlation": 0.15})
        assert decorrelation_identity_gap(rep) == pytest.approx(0.0052, abs=0.005)

    def test_gap_zero_variance(self):
        f = np.zeros(2)
        rep = decompose_conditional_on_x(fill(f, f, [f, f]), 1.0)
        with pytest.raises(NumericError):
            decorrelation_identity_gap(rep)


class TestComparison:
    @pytest.mark.parametrize("bag,forest,expected", [(2, 2, 0.0), (1.35, 1.33, 1.5), (0.044, 0.032, 37.5)])
    def test_relative_difference(self, bag, forest, expected):
        assert relative_difference(bag, forest) == pytest.approx(expected, abs=0.1)

    def test_relative_difference_bad_denominator(self):
        with pytest.raises(NumericError):
            relative_difference(1.0, 0.0)

    def test_paired_t_zero(self):
        assert paired_t([1, -1, 1, -1])[0] == 0.0

    def test_paired_t_hand(self):
        t, z_bar, z_std = paired_t([1.0, 2.0, 3.0])
        assert (z_bar, z_std) == (2.0, 1.0)
        assert t == pytest.approx(2 * math.sqrt(3))
        assert t == pytest.approx(3.464, abs=5e-4)

    def test_paired_t_degenerate(self):
        with pytest.raises(NumericError):
            paired_t([0.5, 0.5, 0.5])

    def test_compare_identical_methods(self, rng):
        f, y, trees, preds = synthetic(rng)
        cmp = compare(fill(f, y, preds, trees), fill(f, y, preds, trees), 1.0)
        assert cmp.delta_r_percent == 0.0 and math.isnan(cmp.t_statistic)

    def test_compare(self, rng):
        f, y, trees, preds = synthetic(rng)
        worse = preds + 0.3 * rng.normal(size=preds.shape)
        cmp = compare(fill(f, y, worse), fill(f, y, preds), 1.0)
        z = np.mean((y - worse) ** 2, axis=1) - np.mean((y - preds) ** 2, axis=1)
        assert cmp.t_statistic == pytest.approx(paired_t(z)[0], rel=1e-12)
        assert cmp.delta_r_percent == pytest.approx(
            relative_difference(np.mean((y - worse) ** 2), np.mean((y - preds) ** 2)), rel=1e-12)


class TestConditionalSlice:
    def test_hand_example(self):
        bag = PointStats(bias=np.array([1.0, 0.0, 2.0, 1.0]), variance=np.array([1.0, 2.0, 3.0, 4.0]),
                         mse=np.array([4.0, 3.0, 8.0, 6.0]))
        forest = PointStats(bias=np.zeros(4), variance=np.ones(4), mse=np.full(4, 2.0))
        x = np.array([0.9, 0.1, 0.5, 0.3])
        low, high = conditional_slice(bag, forest, x, 2)
        # Low bin holds x = 0.1, 0.3 (points 1 and 3); high bin x = 0.5, 0.9 (points 2 and 0).
        assert (low.count, low.bin_low, low.bin_high) == (2, 0.1, 0.3)
        assert low.d_mse == pytest.approx((1 + 4) / 2)
        assert low.d_bias_sq == pytest.approx((0 + 1) / 2)
        assert low.d_var == pytest.approx((1 + 3) / 2)
        assert high.d_mse == pytest.approx((6 + 2) / 2)
        assert high.d_bias_sq == pytest.approx((4 + 1) / 2)
        assert high.d_var == pytest.approx((2 + 0) / 2)

    def test_identical_methods(self, rng):
        s = PointStats(bias=rng.normal(size=50), variance=rng.random(50), mse=rng.random(50))
        for b in conditional_slice(s, s, rng.random(50), 5):
            assert b.d_mse == b.d_bias_sq == b.d_var == 0.0

    def test_errors(self):
        s = PointStats(bias=np.zeros(4), variance=np.zeros(4), mse=np.zeros(4))
        with pytest.raises(InputError):
            conditional_slice(s, s, np.array([1.0, 1.0, 2.0, 2.0]), 3)
        with pytest.raises(InputError):
            conditional_slice(s, s, np.arange(4.0), 1)
