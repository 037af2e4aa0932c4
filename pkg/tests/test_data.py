import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arctanboost.data import (
    TEST,
    TRAIN,
    VAL,
    DataError,
    Dataset,
    Standardization,
    chronological,
    destandardize_predictions,
    kfold,
    load_csv,
    make_toy,
    plan_splits,
    standardize_targets,
    true_toy_quantile,
    write_csv,
)
from arctanboost.metrics import count_crossings


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestCSV:
    def test_missing_cell_masked(self, tmp_path):
        f = _write(tmp_path / "a.csv", "a,b,y\n1,2,3\n4,,6\n7,8,9\n")
        ds = load_csv(f, "y")
        assert ds.missing.sum() == 1
        assert ds.missing[1, 1]
        assert ds.feature_names == ("a", "b")
        np.testing.assert_array_equal(ds.targets, [3, 6, 9])

    def test_missing_target_names_row(self, tmp_path):
        f = _write(tmp_path / "a.csv", "a,y\n1,2\n3,\n")
        with pytest.raises(DataError, match="row 2"):
            load_csv(f, "y")

    def test_unparseable_cell(self, tmp_path):
        f = _write(tmp_path / "a.csv", "a,y\n1,2\nabc,3\n")
        with pytest.raises(DataError, match="line 3.*'a'"):
            load_csv(f, "y")

    def test_duplicate_columns(self, tmp_path):
        f = _write(tmp_path / "a.csv", "a,a,y\n1,2,3\n")
        with pytest.raises(DataError, match="duplicate"):
            load_csv(f, "y")

    def test_custom_missing_token(self, tmp_path):
        f = _write(tmp_path / "a.csv", "a,y\nNA,1\n2,3\n")
        assert load_csv(f, "y", missing_token="NA").missing.sum() == 1

    def test_missing_target_column(self, tmp_path):
        f = _write(tmp_path / "a.csv", "a,b\n1,2\n")
        with pytest.raises(DataError, match="target column"):
            load_csv(f, "y")

    def test_round_trip_random_tables(self, tmp_path):
        rng = np.random.default_rng(5)
        for trial in range(20):
            n, d = rng.integers(1, 8), rng.integers(1, 4)
            X = rng.normal(size=(n, d)) * 10.0 ** rng.integers(-5, 5)
            X[rng.random((n, d)) < 0.2] = np.nan
            ds = Dataset(X, rng.normal(size=n), tuple(f"f{i}" for i in range(d)), "target")
            p = tmp_path / f"t{trial}.csv"
            write_csv(ds, p)
            back = load_csv(p, "target")
            assert back.equals(ds)
            write_csv(back, p)
            assert load_csv(p, "target").equals(ds)


class TestStandardize:
    def test_two_points(self):
        ds = Dataset(np.zeros((2, 1)), [0.0, 1.0], ("x",))
        st_ = standardize_targets(ds)
        np.testing.assert_array_equal(st_.targets, [-1.0, 1.0])
        assert st_.standardization == Standardization(0.5, 0.5)

    def test_already_standardized(self):
        y = np.array([-1.0, 1.0])
        st_ = standardize_targets(Dataset(np.zeros((2, 1)), y, ("x",)))
        assert st_.standardization.mean == pytest.approx(0.0, abs=1e-15)
        assert st_.standardization.std == pytest.approx(1.0)
        np.testing.assert_allclose(st_.targets, y)

    def test_constant_rejected(self):
        with pytest.raises(DataError, match="zero variance"):
            standardize_targets(Dataset(np.zeros((3, 1)), [2.0, 2.0, 2.0], ("x",)))

    def test_moments_and_round_trip(self):
        rng = np.random.default_rng(0)
        y = rng.normal(5, 3, size=257)
        st_ = standardize_targets(Dataset(rng.normal(size=(257, 2)), y, ("a", "b")))
        assert abs(np.mean(st_.targets)) < 1e-9
        assert abs(np.std(st_.targets) - 1) < 1e-9
        back = destandardize_predictions(st_.targets, st_.standardization)
        np.testing.assert_allclose(back, y, rtol=1e-9)
        # restandardizing works from original units
        again = standardize_targets(st_)
        np.testing.assert_allclose(again.targets, st_.targets, rtol=1e-12, atol=1e-12)

    def test_destandardize(self):
        np.testing.assert_array_equal(destandardize_predictions(np.zeros((3, 2)), Standardization(2, 3)), 2.0)
        P = np.arange(6.0).reshape(3, 2)
        np.testing.assert_array_equal(destandardize_predictions(P, Standardization(0.0, 1.0)), P)

    def test_destandardize_keeps_crossings(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            P = rng.normal(size=(20, 5))
            Q = destandardize_predictions(P, Standardization(rng.normal() * 10, rng.uniform(0.1, 10)))
            brute_p = sum(P[i, j] > P[i, j + 1] for i in range(20) for j in range(4))
            brute_q = sum(Q[i, j] > Q[i, j + 1] for i in range(20) for j in range(4))
            assert brute_p == brute_q == count_crossings(P)


class TestToy:
    def test_mean_matches_population(self):
        ds = make_toy(1000, 0)
        pop_mean = (1 - math.cos(7)) / 7
        # sd of Y: Var(sin 7X) + 0.04
        x = np.linspace(0, 1, 200001)
        var_sin = np.trapezoid(np.sin(7 * x) ** 2, x) - pop_mean**2
        sigma = math.sqrt(var_sin + 0.04)
        assert abs(ds.targets.mean() - pop_mean) < 3 * sigma / math.sqrt(1000)
        assert pop_mean == pytest.approx(0.0351568208080993, rel=1e-12)

    def test_single_row(self):
        ds = make_toy(1, seed=42)
        assert ds.features.shape == (1, 1)
        assert 0 <= ds.features[0, 0] <= 1

    def test_noise_variance(self):
        ds = make_toy(1000, 1)
        r = ds.targets - np.sin(7 * ds.features[:, 0])
        assert abs(np.var(r) - 0.04) < 0.2 * 0.04

    def test_reproducible(self):
        a, b = make_toy(500, 7), make_toy(500, 7)
        assert a.features.tobytes() == b.features.tobytes()
        assert a.targets.tobytes() == b.targets.tobytes()
        assert not np.array_equal(make_toy(500, 8).targets, a.targets)
        assert not a.missing.any()

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            make_toy(0)

    def test_true_quantile(self):
        assert true_toy_quantile(0.0, 0.5) == 0.0
        # statistics.NormalDist uses an independent rational approximation of the normal quantile
        z95 = statistics.NormalDist().inv_cdf(0.95)
        assert true_toy_quantile(0.0, 0.95) == pytest.approx(0.2 * z95, rel=1e-12)
        assert true_toy_quantile(0.0, 0.95) == pytest.approx(0.32897, abs=1e-5)
        for x in (0.1, 0.4, 0.9):
            for t in (0.05, 0.3):
                lo, hi = true_toy_quantile(x, t), true_toy_quantile(x, 1 - t)
                assert (lo + hi) / 2 == pytest.approx(math.sin(7 * x), abs=1e-12)


class TestSplits:
    def test_chronological_sizes(self):
        plan = chronological(10, 0.8, 0.1, 0.1)
        assert [plan.rows(p).size for p in (TRAIN, VAL, TEST)] == [8, 1, 1]
        assert np.all(np.diff(plan.assignments) >= 0)

    def test_chronological_100(self):
        plan = chronological(100)
        assert plan.refit_rows().size == 90
        assert plan.rows(TRAIN).max() < plan.rows(VAL).min() <= plan.rows(VAL).max() < plan.rows(TEST).min()

    def test_kfold_equal(self):
        plan = kfold(9, 3, seed=0)
        assert sorted(np.bincount(plan.assignments).tolist()) == [3, 3, 3]

    @settings(max_examples=60, deadline=None)
    @given(n=st.integers(2, 200), k=st.integers(2, 10), seed=st.integers(0, 2**32 - 1))
    def test_kfold_partitions(self, n, k, seed):
        if k > n:
            with pytest.raises(DataError):
                kfold(n, k, seed)
            return
        plan = kfold(n, k, seed)
        sizes = np.bincount(plan.assignments, minlength=k)
        assert sizes.max() - sizes.min() <= 1
        seen = set()
        for train, held in plan.folds():
            assert not set(train) & set(held)
            assert set(train) | set(held) == set(range(n))
            assert not seen & set(held)
            seen |= set(held)
        assert seen == set(range(n))
        np.testing.assert_array_equal(kfold(n, k, seed).assignments, plan.assignments)

    def test_too_few_rows(self):
        with pytest.raises(DataError):
            chronological(5)
        with pytest.raises(DataError):
            kfold(2, 3)
        with pytest.raises(DataError):
            chronological(100, 0.8, 0.1, 0.2)

    def test_plan_dispatch(self):
        ds = make_toy(30, 0)
        assert plan_splits(ds, "kfold", k=3).kind == "kfold"
        assert plan_splits(ds, "chronological").describe()["sizes"] == [24, 3, 3]
        with pytest.raises(DataError):
            plan_splits(ds, "random")


class TestDatasetInvariants:
    def test_rejects_missing_targets(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 1)), [1.0, np.nan], ("x",))

    def test_immutable(self):
        ds = make_toy(5, 0)
        with pytest.raises(ValueError):
            ds.features[0, 0] = 1.0

    def test_shape_checks(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 2)), [1.0, 2.0], ("x",))
        with pytest.raises(DataError):
            Dataset(np.zeros((0, 1)), [], ("x",))
