import numpy as np
import pytest

from mfgpkit import data as dmod
from mfgpkit.errors import (
    EmptyFileError,
    MissingColumnError,
    NonNumericCellError,
    ZeroRangeWarning,
)

import helpers


def write_two_level_csv(path, seed=0):
    x_low, y_low, x_high, y_high = helpers.wide_two_level_dataset(seed=seed)
    names = [f"aa{j:02d}" for j in range(20)]
    lines = [",".join(names + ["response", "scale"])]
    for x, y in zip(x_low, y_low):
        lines.append(",".join(repr(float(v)) for v in x) + f",{float(y)!r},0")
    for x, y in zip(x_high, y_high):
        lines.append(",".join(repr(float(v)) for v in x) + f",{float(y)!r},1")
    path.write_text("\n".join(lines) + "\n")
    return names


class TestLoadCsv:
    def test_scale_up_shape(self, tmp_path):
        path = tmp_path / "d.csv"
        names = write_two_level_csv(path)
        ds = dmod.load_csv(path, dmod.CsvSchema(target_column="response", fidelity_column="scale"))
        assert ds.feature_names == tuple(names)
        assert ds.n_rows == 40
        assert int(np.sum(ds.fidelity == 1)) == 24
        assert int(np.sum(ds.fidelity == 2)) == 16
        assert ds.top_level == 2

    def test_non_numeric_cell_coordinates(self, tmp_path):
        path = tmp_path / "bad.csv"
        rows = ["a,b,y,f"] + ["0.1,0.2,0.3,0"] * 7 + ["0.1,oops,0.3,0", "0.1,0.2,0.3,1"]
        path.write_text("\n".join(rows) + "\n")
        with pytest.raises(NonNumericCellError) as err:
            dmod.load_csv(path, dmod.CsvSchema(target_column="y", fidelity_column="f"))
        assert err.value.row == 7
        assert err.value.column == "b"

    def test_missing_column(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(MissingColumnError):
            dmod.load_csv(path, dmod.CsvSchema(target_column="y"))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(EmptyFileError):
            dmod.load_csv(path, dmod.CsvSchema(target_column="y"))

    def test_roundtrip_is_identity(self, tmp_path):
        path = tmp_path / "d.csv"
        write_two_level_csv(path, seed=3)
        schema = dmod.CsvSchema(target_column="y", fidelity_column="fidelity")
        ds = dmod.load_csv(path, dmod.CsvSchema(target_column="response", fidelity_column="scale"))
        out = tmp_path / "out.csv"
        dmod.write_csv(ds, out)
        again = dmod.load_csv(out, schema)
        assert np.array_equal(again.x, ds.x)
        assert np.array_equal(again.y, ds.y)
        assert np.array_equal(again.fidelity, ds.fidelity)
        assert again.feature_names == ds.feature_names

    def test_categorical_fidelity_with_declared_order(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("x,y,line\n0.1,0.2,A\n0.3,0.4,H\n0.5,0.6,A\n")
        ds = dmod.load_csv(
            path,
            dmod.CsvSchema(target_column="y", fidelity_column="line", fidelity_order=("A", "H")),
        )
        assert list(ds.fidelity) == [1, 2, 1]

    def test_declared_feature_subset_and_order(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("a,b,c,y\n1,2,3,9\n4,5,6,8\n")
        ds = dmod.load_csv(
            path, dmod.CsvSchema(target_column="y", feature_columns=("c", "a"))
        )
        assert ds.feature_names == ("c", "a")
        assert np.array_equal(ds.x, np.array([[3.0, 1.0], [6.0, 4.0]]))

    def test_comment_lines_skipped(self, tmp_path):
        path = tmp_path / "k.csv"
        path.write_text("# {\"command\": \"make-synthetic\"}\nx,y,fidelity\n0.5,1.0,1\n")
        ds = dmod.load_csv(path, dmod.CsvSchema(target_column="y", fidelity_column="fidelity"))
        assert ds.n_rows == 1


class TestNormalize:
    def make_ds(self, x, y, fid=None):
        x = np.asarray(x, dtype=float)
        fid = np.ones(x.shape[0], dtype=int) if fid is None else fid
        names = tuple(f"x{i}" for i in range(x.shape[1]))
        return dmod.Dataset(feature_names=names, x=x, y=np.asarray(y, float), fidelity=fid)

    def test_simple_column(self):
        ds = self.make_ds([[2.0], [4.0], [6.0]], [1.0, 2.0, 3.0])
        stats = dmod.fit_normalize(ds)
        out = dmod.apply_normalize(ds, stats)
        assert np.allclose(out.x[:, 0], [0.0, 0.5, 1.0], atol=0)
        assert np.allclose(out.y, [0.0, 0.5, 1.0], atol=0)

    def test_constant_column_maps_to_zero_with_warning(self):
        ds = self.make_ds([[1.0, 5.0], [2.0, 5.0]], [0.0, 1.0])
        stats = dmod.fit_normalize(ds)
        with pytest.warns(ZeroRangeWarning):
            out = dmod.apply_normalize(ds, stats)
        assert np.array_equal(out.x[:, 1], [0.0, 0.0])

    def test_boundary_values_attained(self):
        rng = np.random.default_rng(0)
        ds = self.make_ds(rng.normal(size=(12, 3)), rng.normal(size=12))
        out = dmod.apply_normalize(ds, dmod.fit_normalize(ds))
        assert np.all(out.x >= 0.0) and np.all(out.x <= 1.0)
        assert np.all(out.x.min(axis=0) == 0.0)
        assert np.all(out.x.max(axis=0) == 1.0)
        assert out.y.min() == 0.0 and out.y.max() == 1.0

    def test_invert_roundtrip(self):
        rng = np.random.default_rng(1)
        ds = self.make_ds(rng.normal(size=(9, 2)), rng.normal(2.0, 3.0, size=9))
        stats = dmod.fit_normalize(ds)
        out = dmod.apply_normalize(ds, stats)
        back = dmod.invert_target(out.y, stats)
        assert np.max(np.abs(back - ds.y)) < 1e-12

    def test_train_only_reference(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(10, 1))
        fid = np.array([1] * 6 + [2] * 4)
        ds = self.make_ds(x, rng.normal(size=10), fid)
        plan = dmod.SplitPlan(seed=0, n_t=2, train_high=(6, 7), test_high=(8, 9))
        stats = dmod.fit_normalize(ds, plan)
        ref_rows = [0, 1, 2, 3, 4, 5, 6, 7]
        assert stats.feature_min[0] == ds.x[ref_rows].min()
        assert stats.feature_max[0] == ds.x[ref_rows].max()


class TestSplits:
    def high_ds(self, n_low=24, n_high=16, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.uniform(0, 1, (n_low + n_high, 2))
        fid = np.array([1] * n_low + [2] * n_high)
        return dmod.Dataset(
            feature_names=("a", "b"), x=x, y=rng.uniform(0, 1, n_low + n_high), fidelity=fid
        )

    def test_thirty_plans_single_test_row(self):
        ds = self.high_ds()
        plans = dmod.make_splits(ds, 15, 30, seed=4)
        assert len(plans) == 30
        for plan in plans:
            assert len(plan.train_high) == 15
            assert len(plan.test_high) == 1
            assert set(plan.train_high) | set(plan.test_high) == set(ds.high_rows().tolist())

    def test_empty_test_set_rejected(self):
        ds = self.high_ds()
        with pytest.raises(ValueError):
            dmod.make_splits(ds, 16, 5, seed=0)
        with pytest.raises(ValueError):
            dmod.make_splits(ds, 0, 5, seed=0)

    def test_same_seed_identical(self):
        ds = self.high_ds()
        a = dmod.make_splits(ds, 10, 8, seed=9)
        b = dmod.make_splits(ds, 10, 8, seed=9)
        assert a == b

    def test_translation_exchangeability(self):
        # Permuting dataset rows and mapping the plan's indices through the
        # permutation selects the same data.
        ds = self.high_ds(seed=5)
        plans = dmod.make_splits(ds, 6, 4, seed=7)
        rng = np.random.default_rng(6)
        perm = rng.permutation(ds.n_rows)
        ds2 = dmod.Dataset(
            feature_names=ds.feature_names,
            x=ds.x[perm],
            y=ds.y[perm],
            fidelity=ds.fidelity[perm],
        )
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        for plan in plans:
            mapped_train = [int(inverse[i]) for i in plan.train_high]
            got = ds2.x[mapped_train]
            assert np.array_equal(np.sort(got, axis=0), np.sort(ds.x[list(plan.train_high)], axis=0))

    def test_loo_partition(self):
        ds = self.high_ds(n_low=0, n_high=24)
        plans = dmod.loo_splits(ds)
        assert len(plans) == 24
        test_rows = sorted(p.test_high[0] for p in plans)
        assert test_rows == sorted(ds.high_rows().tolist())
        for plan in plans:
            assert len(plan.train_high) == 23

    def test_loo_two_rows_complementary(self):
        ds = self.high_ds(n_low=3, n_high=2)
        plans = dmod.loo_splits(ds)
        assert len(plans) == 2
        assert plans[0].train_high == plans[1].test_high
        assert plans[1].train_high == plans[0].test_high

    def test_loo_needs_two_rows(self):
        ds = self.high_ds(n_low=4, n_high=1)
        with pytest.raises(ValueError):
            dmod.loo_splits(ds)

    def test_split_plan_json_roundtrip(self, tmp_path):
        ds = self.high_ds()
        plans = dmod.make_splits(ds, 10, 5, seed=3)
        path = tmp_path / "splits.json"
        dmod.write_split_plans(plans, path, config_line='{"command": "benchmark"}')
        again = dmod.read_split_plans(path)
        assert again == plans


class TestLevelsConversion:
    def test_roundtrip(self):
        ds = TestSplits().high_ds()
        levels = dmod.to_levels(ds)
        assert [lv.index for lv in levels] == [1, 2]
        back = dmod.from_levels(levels, feature_names=ds.feature_names)
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.fidelity, ds.fidelity)


class TestPca:
    def test_collinear_points_first_component_captures_everything(self):
        t = np.linspace(0, 1, 30)
        X = np.column_stack([2 * t + 1, -3 * t + 0.5])
        _, ratios = dmod.pca_project(X, 1)
        assert ratios[0] >= 1 - 1e-10

    def test_full_rank_ratios_sum_to_one(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(15, 4))
        _, ratios = dmod.pca_project(X, 4)
        assert np.sum(ratios) == pytest.approx(1.0, abs=1e-10)
        assert np.all(np.diff(ratios) <= 1e-12)
        assert np.all(ratios >= 0)

    def test_matches_svd_oracle_up_to_sign(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(20, 5))
        proj, ratios = dmod.pca_project(X, 3)
        centered = X - X.mean(axis=0)
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        oracle = centered @ vt[:3].T
        for j in range(3):
            direct = np.max(np.abs(proj[:, j] - oracle[:, j]))
            flipped = np.max(np.abs(proj[:, j] + oracle[:, j]))
            assert min(direct, flipped) < 1e-8
        var_oracle = s**2 / np.sum(s**2)
        assert np.allclose(ratios, var_oracle[:3], atol=1e-10)

    def test_sign_fixing_makes_leading_loading_positive(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(12, 3))
        proj1, _ = dmod.pca_project(X, 2)
        proj2, _ = dmod.pca_project(-X + 7.0, 2)
        # Deterministic orientation: projections of mirrored data flip together.
        assert np.allclose(np.abs(proj1), np.abs(proj2), atol=1e-8)

    def test_k_out_of_range(self):
        X = np.random.default_rng(6).normal(size=(5, 3))
        with pytest.raises(ValueError):
            dmod.pca_project(X, 5)
        with pytest.raises(ValueError):
            dmod.pca_project(X, 0)
