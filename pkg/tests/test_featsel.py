import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mfgpkit as mk
from mfgpkit import bench, featsel
from mfgpkit.errors import ConstantColumnWarning

import helpers


class TestDiscretize:
    def test_one_value_per_bin(self):
        labels = featsel.discretize(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), n_bins=5)
        assert list(labels) == [0, 1, 2, 3, 4]

    def test_constant_column_single_bin_with_warning(self):
        with pytest.warns(ConstantColumnWarning):
            labels = featsel.discretize(np.full(7, 2.5), n_bins=5)
        assert np.array_equal(labels, np.zeros(7, dtype=np.int64))

    def test_forty_rows_balanced_quintiles(self):
        rng = np.random.default_rng(0)
        col = rng.permutation(np.arange(40, dtype=float))
        labels = featsel.discretize(col, n_bins=5)
        assert list(np.bincount(labels)) == [8, 8, 8, 8, 8]

    def test_quintile_boundaries_follow_sorted_order(self):
        rng = np.random.default_rng(1)
        col = rng.normal(size=40)
        labels = featsel.discretize(col, n_bins=5)
        order = np.argsort(col, kind="stable")
        assert list(labels[order]) == sorted(labels)

    def test_ties_split_by_first_occurrence(self):
        col = np.array([1.0, 1.0, 1.0, 2.0])
        labels = featsel.discretize(col, n_bins=2)
        assert list(labels) == [0, 0, 1, 1]

    def test_mdl_accepts_clean_split(self):
        values = np.arange(1.0, 21.0)
        target = (values > 10.5).astype(int)
        labels = featsel.discretize(values, 5, featsel.BinningMethod.MDL, target=target)
        assert list(np.unique(labels)) == [0, 1]
        assert np.array_equal(labels, target)

    def test_mdl_rejects_structureless_column(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=30)
        target = rng.integers(0, 2, size=30)
        labels = featsel.discretize(values, 5, featsel.BinningMethod.MDL, target=target)
        assert np.all(labels == 0)

    def test_mdl_cut_budget_capped(self):
        # A 5-class staircase wants 4 cuts; with n_bins=3 only 2 may be taken.
        values = np.arange(100, dtype=float)
        target = (values // 20).astype(int)
        labels = featsel.discretize(values, 3, featsel.BinningMethod.MDL, target=target)
        assert np.unique(labels).size <= 3

    def test_mdl_requires_target(self):
        with pytest.raises(ValueError):
            featsel.discretize(np.arange(5.0), 5, featsel.BinningMethod.MDL)


class TestMutualInformation:
    def test_self_information_is_entropy(self):
        labels = np.tile(np.arange(5), 20)
        assert featsel.mutual_information(labels, labels) == pytest.approx(
            math.log(5), abs=1e-10
        )

    def test_independent_columns_near_zero(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 4, size=10_000)
        b = rng.integers(0, 4, size=10_000)
        assert featsel.mutual_information(a, b) < 0.01

    def test_two_by_two_hand_value(self):
        a = np.repeat([0, 0, 1, 1], [40, 10, 10, 40])
        b = np.repeat([0, 1, 0, 1], [40, 10, 10, 40])
        assert featsel.mutual_information(a, b) == pytest.approx(0.19274, abs=1e-5)
        assert featsel.mutual_information(a, b) == pytest.approx(
            helpers.plugin_mi_dict(a, b), abs=1e-10
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            featsel.mutual_information([0, 1], [0, 1, 2])

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.integers(0, 3), min_size=2, max_size=40),
        st.integers(0, 2**31 - 1),
    )
    def test_symmetry_and_entropy_bound(self, a, seed):
        rng = np.random.default_rng(seed)
        b = rng.integers(0, 4, size=len(a))
        mi_ab = featsel.mutual_information(a, b)
        mi_ba = featsel.mutual_information(b, a)
        assert mi_ab == mi_ba
        assert mi_ab <= min(helpers.entropy_dict(a), helpers.entropy_dict(list(b))) + 1e-12
        assert mi_ab >= 0.0


class TestMrmrRank:
    def test_target_copy_ranked_first(self):
        rng = np.random.default_rng(4)
        target = rng.integers(0, 3, size=80)
        noise = [rng.integers(0, 3, size=80) for _ in range(3)]
        table = featsel.DiscreteTable(
            columns=(noise[0], target.copy(), noise[1], noise[2]), n_bins=(3, 3, 3, 3)
        )
        ranking = featsel.mrmr_rank(table, target)
        assert ranking.order[0] == 1

    def test_duplicate_of_leader_ranked_last(self):
        rng = np.random.default_rng(5)
        n = 200
        target = rng.integers(0, 2, size=n)
        flips = rng.random(n)
        leader = np.where(flips < 0.05, 1 - target, target)
        duplicate = leader.copy()
        weak1 = np.where(rng.random(n) < 0.35, rng.integers(0, 2, size=n), target)
        weak2 = np.where(rng.random(n) < 0.40, rng.integers(0, 2, size=n), target)
        columns = (leader, duplicate, weak1, weak2)
        table = featsel.DiscreteTable(columns=columns, n_bins=(2,) * 4)
        ranking = featsel.mrmr_rank(table, target)
        expected_order, expected_scores = helpers.brute_force_mrmr(
            [list(c) for c in columns], list(target)
        )
        assert list(ranking.order) == expected_order
        assert ranking.order[-1] == 1
        assert np.allclose(ranking.scores, expected_scores, atol=1e-12)

    def test_matches_brute_force_greedy_on_six_features(self):
        rng = np.random.default_rng(6)
        n = 60
        target = rng.integers(0, 5, size=n)
        columns = []
        for j in range(6):
            noise_rate = 0.15 * (j + 1)
            col = np.where(rng.random(n) < noise_rate, rng.integers(0, 5, size=n), target)
            columns.append(col)
        table = featsel.DiscreteTable(columns=tuple(columns), n_bins=(5,) * 6)
        ranking = featsel.mrmr_rank(table, target)
        expected_order, expected_scores = helpers.brute_force_mrmr(
            [list(c) for c in columns], list(target)
        )
        assert list(ranking.order) == expected_order
        assert np.allclose(ranking.scores, expected_scores, atol=1e-12)

    def test_relabelling_is_irrelevant(self):
        rng = np.random.default_rng(7)
        n = 90
        target = rng.integers(0, 4, size=n)
        cols = [
            np.where(rng.random(n) < 0.2 * (j + 1), rng.integers(0, 4, size=n), target)
            for j in range(4)
        ]
        table = featsel.DiscreteTable(columns=tuple(cols), n_bins=(4,) * 4)
        base = featsel.mrmr_rank(table, target)
        perm = np.array([2, 0, 3, 1])
        remapped = tuple(perm[c] for c in cols)
        table2 = featsel.DiscreteTable(columns=remapped, n_bins=(4,) * 4)
        again = featsel.mrmr_rank(table2, perm[target])
        assert base.order == again.order

    def test_deterministic(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 1, (50, 5))
        y = X[:, 2] + 0.1 * rng.standard_normal(50)
        t1, labels1 = featsel.make_table(X, y)
        t2, labels2 = featsel.make_table(X, y)
        assert featsel.mrmr_rank(t1, labels1).order == featsel.mrmr_rank(t2, labels2).order


def planted_levels(rng, n_low=120, n_high=10, n_features=4):
    # Only the first two features matter; enough rows that the plug-in
    # mutual-information bias cannot outvote the planted signal.
    x_low = rng.uniform(0, 1, (n_low, n_features))
    idx = rng.choice(n_low, size=n_high, replace=False)
    x_high = x_low[idx]

    def f(x):
        return x[:, 0] + x[:, 1]

    return (
        mk.FidelityLevel(1, x_low, f(x_low)),
        mk.FidelityLevel(2, x_high, 2.0 * f(x_high)),
    )


class TestSweep:
    def test_full_subset_reproduces_unrestricted_baseline(self):
        rng = np.random.default_rng(9)
        levels = planted_levels(rng)
        table, target = featsel.make_table(
            np.vstack([lv.x for lv in levels]),
            np.concatenate([lv.y for lv in levels]),
        )
        ranking = featsel.mrmr_rank(table, target)
        cfg = featsel.SweepConfig(n_t=8, n_repeats=3, seed=20, fit=mk.FitConfig(n_restarts=2))
        sweep = featsel.sweep_subset_size(levels, ranking, "gp-high", cfg)
        assert [p.n_f for p in sweep] == [1, 2, 3, 4]
        full = bench.run_experiment(
            levels, ["gp-high"], [8], 3, seed=20 + 4, fit=mk.FitConfig(n_restarts=2)
        )
        assert sweep[-1].mean_rmse == full.cells[0].mean_rmse
        assert sweep[-1].feature_indices == (0, 1, 2, 3)

    def test_planted_relevance_minimum_at_two(self):
        hits = 0
        for meta in range(10):
            rng = np.random.default_rng(1000 + meta)
            levels = planted_levels(rng)
            table, target = featsel.make_table(
                np.vstack([lv.x for lv in levels]),
                np.concatenate([lv.y for lv in levels]),
            )
            ranking = featsel.mrmr_rank(table, target)
            cfg = featsel.SweepConfig(
                n_t=8, n_repeats=5, seed=meta, fit=mk.FitConfig(n_restarts=2)
            )
            sweep = featsel.sweep_subset_size(levels, ranking, "gp-high", cfg)
            best = min(sweep, key=lambda p: (p.mean_rmse, p.n_f))
            hits += best.n_f == 2
        assert hits >= 8

    def test_ranking_must_cover_features(self):
        rng = np.random.default_rng(10)
        levels = planted_levels(rng)
        bad = featsel.FeatureRanking(order=(0, 1), scores=(1.0, 0.5))
        with pytest.raises(ValueError):
            featsel.sweep_subset_size(
                levels, bad, "gp-high", featsel.SweepConfig(n_t=8, n_repeats=2)
            )

    def test_twenty_feature_protocol_emits_twenty_point_curve(self):
        # Wide-table protocol: 20 features, 16 high-fidelity rows,
        # all-but-one of them in training. Repeats scaled down for speed.
        x_low, y_low, x_high, y_high = helpers.wide_two_level_dataset(seed=21)
        levels = (
            mk.FidelityLevel(1, x_low, y_low),
            mk.FidelityLevel(2, x_high, y_high),
        )
        table, target = featsel.make_table(
            np.vstack([lv.x for lv in levels]),
            np.concatenate([lv.y for lv in levels]),
        )
        ranking = featsel.mrmr_rank(table, target)
        assert sorted(ranking.order) == list(range(20))
        cfg = featsel.SweepConfig(
            n_t=15, n_repeats=3, seed=1, fit=mk.FitConfig(n_restarts=2)
        )
        sweep = featsel.sweep_subset_size(levels, ranking, "gp-high", cfg)
        assert [p.n_f for p in sweep] == list(range(1, 21))
        assert all(np.isfinite(p.mean_rmse) for p in sweep)
