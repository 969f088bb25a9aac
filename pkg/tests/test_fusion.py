"""Unit tests for the subset-averaging fusion rule, frozen hand-worked cases."""
from __future__ import annotations

import math

import numpy as np
import pytest

from fusionguard.fusion import (
    CombinatorialBudgetError,
    FusionConfig,
    enumerate_subsets,
    fuse,
    fuse_series,
    reconstructible,
    spread_series,
    subset_average,
    subset_spread,
    theoretical_error_bound,
)


class TestEnumerateSubsets:
    def test_lexicographic_order_and_count(self):
        subs = enumerate_subsets(5, 3)
        assert len(subs) == 10
        assert subs[0] == (1, 2, 3)
        assert subs[1] == (1, 2, 4)
        assert subs[-1] == (3, 4, 5)
        assert subs == sorted(subs)

    def test_full_and_single(self):
        assert enumerate_subsets(3, 3) == [(1, 2, 3)]
        assert enumerate_subsets(3, 1) == [(1,), (2,), (3,)]

    def test_budget_exceeded_names_the_count(self):
        with pytest.raises(CombinatorialBudgetError, match=r"C\(40, 20\)"):
            enumerate_subsets(40, 20)
        with pytest.raises(CombinatorialBudgetError, match="combinatorial budget exceeded"):
            enumerate_subsets(10, 5, budget=100)

    def test_invalid_sizes(self):
        with pytest.raises(ValueError):
            enumerate_subsets(3, 0)
        with pytest.raises(ValueError):
            enumerate_subsets(3, 4)
        with pytest.raises(ValueError):
            enumerate_subsets(0, 1)


class TestSubsetStats:
    def test_average_and_spread_pair(self):
        values = [5.0, 5.1, 50.0]
        assert subset_average(values, (1, 2)) == pytest.approx(5.05)
        assert subset_spread(values, (1, 2)) == pytest.approx(0.05)
        assert subset_average(values, (2, 3)) == pytest.approx(27.55)
        assert subset_spread(values, (2, 3)) == pytest.approx(22.45)

    def test_subset_order_does_not_matter(self):
        values = [1.0, 2.0, 3.0]
        assert subset_average(values, (3, 1)) == subset_average(values, (1, 3))

    def test_single_member(self):
        assert subset_average([4.0, 8.0], (2,)) == 8.0
        assert subset_spread([4.0, 8.0], (2,)) == 0.0

    def test_bad_subsets(self):
        with pytest.raises(ValueError):
            subset_average([1.0, 2.0], (1, 1))
        with pytest.raises(ValueError):
            subset_average([1.0, 2.0], (0,))
        with pytest.raises(ValueError):
            subset_average([1.0, 2.0], (3,))
        with pytest.raises(ValueError):
            subset_spread([1.0, 2.0], ())

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            subset_average([1.0, float("nan")], (1, 2))
        with pytest.raises(ValueError, match="non-finite"):
            subset_spread([1.0, float("inf")], (1,))


class TestFuse:
    def test_three_sensors_single_attack(self):
        """One wild reading loses against the two that agree."""
        out = fuse([5.0, 5.1, 50.0], FusionConfig(3, 1), collect_spreads=True)
        assert out.selected_subset == (1, 2)
        assert out.fused_value == pytest.approx(5.05)
        assert out.spread == pytest.approx(0.05)
        assert out.all_spreads[(1, 3)] == pytest.approx(22.5)
        assert out.all_spreads[(2, 3)] == pytest.approx(22.45)

    def test_five_sensors_two_attacks(self):
        out = fuse([1.0, 1.2, 0.9, 10.0, -10.0], FusionConfig(5, 2))
        assert out.selected_subset == (1, 2, 3)
        assert out.fused_value == pytest.approx(1.0333333333333334)
        assert out.spread == pytest.approx(0.16666666666666666)

    def test_tie_goes_to_lexicographically_smallest(self):
        # both (1, 2) and (2, 3) have zero spread; (1, 2) comes first
        out = fuse([2.0, 2.0, 2.0], FusionConfig(3, 1))
        assert out.selected_subset == (1, 2)

    def test_no_attack_budget_uses_all_sensors(self):
        out = fuse([1.0, 2.0, 3.0], FusionConfig(3, 0))
        assert out.selected_subset == (1, 2, 3)
        assert out.fused_value == pytest.approx(2.0)

    def test_spreads_not_collected_by_default(self):
        assert fuse([1.0, 2.0, 3.0], FusionConfig(3, 1)).all_spreads is None

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="expected 3 readings"):
            fuse([1.0, 2.0], FusionConfig(3, 1))

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            fuse([1.0, float("nan"), 2.0], FusionConfig(3, 1))

    def test_deterministic(self):
        values = np.array([0.3, -1.7, 0.31])
        a = fuse(values, FusionConfig(3, 1))
        b = fuse(values, FusionConfig(3, 1))
        assert a == b


class TestFuseSeries:
    def test_matches_scalar_path(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(200, 5))
        cfg = FusionConfig(5, 2)
        fused, selected, spreads, subsets = fuse_series(X, cfg)
        for k in range(X.shape[0]):
            out = fuse(X[k], cfg)
            assert subsets[selected[k]] == out.selected_subset
            assert abs(fused[k] - out.fused_value) <= 1e-12
            assert abs(spreads[k] - out.spread) <= 1e-12

    def test_spread_series_matches_collected(self):
        X = np.array([[5.0, 5.1, 50.0], [1.0, 1.0, 1.0]])
        cfg = FusionConfig(3, 1)
        spreads, subsets = spread_series(X, cfg)
        out = fuse(X[0], cfg, collect_spreads=True)
        for j, sub in enumerate(subsets):
            assert spreads[0, j] == pytest.approx(out.all_spreads[sub], abs=1e-12)

    def test_column_count_checked(self):
        with pytest.raises(ValueError, match="sensor columns"):
            fuse_series(np.zeros((4, 4)), FusionConfig(3, 1))


class TestFusionConfig:
    def test_subset_size(self):
        assert FusionConfig(5, 2).subset_size == 3

    @pytest.mark.parametrize("n,q", [(2, 1), (3, 2), (4, 2), (6, 3), (1, 1)])
    def test_unreconstructable_geometry_rejected(self, n, q):
        with pytest.raises(ValueError, match="reconstruct"):
            FusionConfig(n, q)

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            FusionConfig(0, 0)
        with pytest.raises(ValueError):
            FusionConfig(3, -1)


class TestReconstructible:
    @pytest.mark.parametrize("n,q,expected", [
        (1, 0, True), (3, 1, True), (5, 2, True), (7, 3, True),
        (2, 1, False), (3, 2, False), (4, 2, False), (6, 3, False),
    ])
    def test_threshold(self, n, q, expected):
        assert reconstructible(n, q) is expected

    def test_validation(self):
        with pytest.raises(ValueError):
            reconstructible(0, 0)
        with pytest.raises(ValueError):
            reconstructible(3, -1)


class TestErrorBound:
    def test_values(self):
        assert theoretical_error_bound(0.3) == pytest.approx(0.9)
        assert theoretical_error_bound(0.5) == 1.5
        assert theoretical_error_bound(0.0) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            theoretical_error_bound(-0.1)
        with pytest.raises(ValueError):
            theoretical_error_bound(math.inf)
