import json

import numpy as np
import pytest

from arctanboost.booster import BoosterConfig, fit, predict
from arctanboost.data import TEST, chronological, kfold, make_toy, standardize_targets
from arctanboost.loss import QuantileLevels
from arctanboost.metrics import average_pinball
from arctanboost.tune import Grid, TuneError, apply_cell, grid_search, refit_final

BASE = BoosterConfig(n_estimators=10, levels=QuantileLevels([0.1, 0.5, 0.9]))


@pytest.fixture(scope="module")
def ds():
    return standardize_targets(make_toy(120, 4))


def tiny_grid(**kw):
    axes = dict(n_estimators=(5,), lam=(1.0,), gamma=(0.1,), max_depth=(3,))
    axes.update(kw)
    return Grid(**axes)


class TestGrid:
    def test_default_size(self):
        g = Grid()
        assert len(g) == 504 == len(g.cells())
        assert g.cells()[0] == {"n_estimators": 100, "lambda": 0.01, "gamma": 0.1, "max_depth": 2}

    def test_dict_round_trip(self):
        g = tiny_grid(lam=(0.5, 2.0))
        assert Grid.from_dict(json.loads(json.dumps(g.to_dict()))) == g

    def test_rejects_bad_axes(self):
        with pytest.raises(TuneError):
            Grid(n_estimators=())
        with pytest.raises(TuneError):
            Grid.from_dict({"eta": [0.1]})
        with pytest.raises(TuneError):
            tiny_grid(lam=(-1.0,))

    def test_apply_cell(self):
        cfg = apply_cell(BASE, {"n_estimators": 7, "lambda": 2.0, "gamma": 0.5, "max_depth": 4})
        assert cfg.n_estimators == 7
        assert (cfg.tree.lam, cfg.tree.gamma, cfg.tree.max_depth) == (2.0, 0.5, 4)
        assert cfg.tree.max_delta_step == BASE.tree.max_delta_step


class TestGridSearch:
    def test_single_cell_passthrough(self, ds):
        res = grid_search(ds, BASE, tiny_grid(), kfold(ds.n_rows, 3))
        assert res.best_config == apply_cell(BASE, tiny_grid().cells()[0])
        assert len(res.table) == 1 and len(res.table[0]["fold_scores"]) == 3

    def test_matches_manual_fold_fits(self, ds):
        grid = tiny_grid(max_depth=(2, 4))
        plan = kfold(ds.n_rows, 3, seed=1)
        res = grid_search(ds, BASE, grid, plan)
        manual = []
        for cell in grid.cells():
            scores = []
            for train, held in plan.folds():
                m, _ = fit(ds.subset(train), apply_cell(BASE, cell))
                h = ds.subset(held)
                scores.append(average_pinball(h.original_targets(), predict(m, h.features), BASE.levels))
            manual.append(np.mean(scores))
        assert [r["mean_score"] for r in res.table] == pytest.approx(manual, rel=1e-12)
        assert res.best_cell == grid.cells()[int(np.argmin(manual))]

    def test_truncation_equals_direct_fits(self, ds):
        grid = tiny_grid(n_estimators=(3, 8))
        plan = kfold(ds.n_rows, 3)
        res = grid_search(ds, BASE, grid, plan)
        for row in res.table:
            direct = grid_search(ds, BASE, tiny_grid(n_estimators=(row["cell"]["n_estimators"],)), plan)
            assert direct.table[0]["fold_scores"] == row["fold_scores"]

    def test_ties_keep_first_cell(self, ds):
        # identical cells score identically
        res = grid_search(ds, BASE, tiny_grid(gamma=(0.1, 0.1)), kfold(ds.n_rows, 3))
        assert res.table[0]["mean_score"] == res.table[1]["mean_score"]
        assert res.best_cell == res.table[0]["cell"]

    def test_threads_deterministic(self, ds):
        grid = tiny_grid(lam=(0.5, 1.0), max_depth=(2, 3))
        plan = kfold(ds.n_rows, 3)
        a = grid_search(ds, BASE, grid, plan, n_jobs=1)
        b = grid_search(ds, BASE, grid, plan, n_jobs=4)
        assert a.to_json() == b.to_json()

    def test_progress_callback(self, ds):
        seen = []
        grid_search(ds, BASE, tiny_grid(lam=(0.5, 1.0)), kfold(ds.n_rows, 3), progress=lambda i, n, r: seen.append((i, n)))
        assert seen == [(1, 2), (2, 2)]

    def test_plan_size_mismatch(self, ds):
        with pytest.raises(TuneError):
            grid_search(ds, BASE, tiny_grid(), kfold(50, 3))

    def test_table_csv(self, ds):
        res = grid_search(ds, BASE, tiny_grid(lam=(0.5, 1.0)), kfold(ds.n_rows, 3))
        lines = res.table_csv().splitlines()
        assert lines[0] == "n_estimators,lambda,gamma,max_depth,mean_score,fold0,fold1,fold2"
        assert len(lines) == 3


class TestChronological:
    def test_no_leakage(self):
        ds = standardize_targets(make_toy(100, 2))
        plan = chronological(100)
        (train, held), = list(plan.folds())
        assert train.max() < held.min()
        assert not np.isin(plan.rows(TEST), np.concatenate([train, held])).any()
        res = grid_search(ds, BASE, tiny_grid(), plan)
        m, _ = fit(ds.subset(train), res.best_config)
        h = ds.subset(held)
        assert res.table[0]["fold_scores"] == [average_pinball(h.original_targets(), predict(m, h.features), BASE.levels)]
        assert res.protocol["sizes"] == [80, 10, 10]

    def test_refit_uses_train_and_val(self):
        ds = standardize_targets(make_toy(100, 2))
        plan = chronological(100)
        res = grid_search(ds, BASE, tiny_grid(), plan)
        model, rows = refit_final(ds, res, plan)
        np.testing.assert_array_equal(rows, np.arange(90))
        direct, _ = fit(ds.subset(np.arange(90)), res.best_config)
        assert model.dumps() == direct.dumps()

    def test_kfold_refit_uses_all_rows(self, ds):
        plan = kfold(ds.n_rows, 3)
        res = grid_search(ds, BASE, tiny_grid(), plan)
        _, rows = refit_final(ds, res, plan)
        np.testing.assert_array_equal(rows, np.arange(ds.n_rows))
