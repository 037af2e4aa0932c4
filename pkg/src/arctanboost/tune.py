"""Grid search over tree hyper-parameters, scored by held-out average pinball loss."""
from __future__ import annotations

import csv
import io
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .booster import BoosterConfig, Model, fit, predict
from .data import Dataset, SplitPlan
from .metrics import average_pinball


class TuneError(RuntimeError):
    pass


@dataclass(frozen=True)
class Grid:
    n_estimators: tuple = (100, 200, 400)
    lam: tuple = (0.01, 0.1, 0.25, 0.5, 1, 2.5, 5, 10)
    gamma: tuple = (0.1, 0.25, 0.5, 1, 2.5, 5, 10)
    max_depth: tuple = (2, 3, 4)

    def __post_init__(self):
        for name in ("n_estimators", "lam", "gamma", "max_depth"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise TuneError(f"grid axis {name!r} is empty")
            object.__setattr__(self, name, vals)
        if any(int(n) != n or n < 1 for n in self.n_estimators):
            raise TuneError(f"n_estimators values must be integers >= 1: {self.n_estimators}")
        if any(int(d) != d or d < 1 for d in self.max_depth):
            raise TuneError(f"max_depth values must be integers >= 1: {self.max_depth}")
        if any(not v >= 0 for v in self.lam + self.gamma):
            raise TuneError("lambda and gamma values must be >= 0")

    def cells(self) -> list[dict]:
        """Cartesian product in axis order n_estimators, lambda, gamma, max_depth."""
        return [
            {"n_estimators": int(n), "lambda": float(l), "gamma": float(g), "max_depth": int(d)}
            for n, l, g, d in itertools.product(self.n_estimators, self.lam, self.gamma, self.max_depth)
        ]

    def __len__(self) -> int:
        return len(self.n_estimators) * len(self.lam) * len(self.gamma) * len(self.max_depth)

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        allowed = {"n_estimators", "lambda", "gamma", "max_depth"}
        unknown = set(d) - allowed
        if unknown:
            raise TuneError(f"unknown grid keys {sorted(unknown)}; expected {sorted(allowed)}")
        default = cls()
        return cls(
            n_estimators=tuple(d.get("n_estimators", default.n_estimators)),
            lam=tuple(d.get("lambda", default.lam)),
            gamma=tuple(d.get("gamma", default.gamma)),
            max_depth=tuple(d.get("max_depth", default.max_depth)),
        )

    def to_dict(self) -> dict:
        return {
            "n_estimators": list(self.n_estimators),
            "lambda": list(self.lam),
            "gamma": list(self.gamma),
            "max_depth": list(self.max_depth),
        }


def apply_cell(cfg: BoosterConfig, cell: dict) -> BoosterConfig:
    return replace(cfg, n_estimators=cell["n_estimators"]).with_tree(
        lam=cell["lambda"], gamma=cell["gamma"], max_depth=cell["max_depth"]
    )


@dataclass
class TuneResult:
    best_config: BoosterConfig
    best_cell: dict
    table: list = field(default_factory=list)
    protocol: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "best_cell": self.best_cell,
            "best_config": self.best_config.to_dict(),
            "protocol": self.protocol,
            "table": self.table,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n_folds = len(self.table[0]["fold_scores"]) if self.table else 0
        w.writerow(["n_estimators", "lambda", "gamma", "max_depth", "mean_score", *(f"fold{k}" for k in range(n_folds))])
        for row in self.table:
            c = row["cell"]
            w.writerow([c["n_estimators"], repr(c["lambda"]), repr(c["gamma"]), c["max_depth"],
                        repr(row["mean_score"]), *(repr(s) for s in row["fold_scores"])])
        return buf.getvalue()


def _score_fold(ds: Dataset, cfg: BoosterConfig, cells: list[dict], train_rows, held_rows) -> list[float]:
    """Held-out average pinball for cells that differ only in ``n_estimators``.

    Boosting rounds do not depend on the total count, so one fit with the
    largest count is truncated for the smaller ones.
    """
    n_max = max(c["n_estimators"] for c in cells)
    model, _ = fit(ds.subset(train_rows), apply_cell(cfg, {**cells[0], "n_estimators": n_max}))
    held = ds.subset(held_rows)
    y = held.original_targets()
    return [
        average_pinball(y, predict(model.truncated(c["n_estimators"]), held.features), cfg.levels)
        for c in cells
    ]


def grid_search(ds: Dataset, base_cfg: BoosterConfig, grid: Grid, plan: SplitPlan,
                progress: Optional[Callable[[int, int, dict], None]] = None, n_jobs: int = 1) -> TuneResult:
    """Score every grid cell on every fold of ``plan`` and pick the lowest mean.

    Scores are average pinball losses in original target units. Ties keep the
    earliest cell in grid order.
    """
    if plan.n_rows != ds.n_rows:
        raise TuneError(f"plan covers {plan.n_rows} rows but dataset has {ds.n_rows}")
    folds = list(plan.folds())
    cells = grid.cells()
    total = len(cells)

    # group cells sharing everything except n_estimators
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(cells):
        groups.setdefault((c["lambda"], c["gamma"], c["max_depth"]), []).append(i)

    jobs = [(key, f) for key in groups for f in range(len(folds))]

    def run(job):
        key, f = job
        idx = groups[key]
        try:
            return _score_fold(ds, base_cfg, [cells[i] for i in idx], *folds[f])
        except Exception as exc:
            raise TuneError(f"training failed for cell {cells[idx[0]]} (fold {f}): {exc}") from exc

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    scores = np.full((total, len(folds)), np.nan)
    for (key, f), vals in zip(jobs, results):
        for i, v in zip(groups[key], vals):
            scores[i, f] = v

    table = []
    for i, c in enumerate(cells):
        table.append({"cell": c, "mean_score": float(np.mean(scores[i])), "fold_scores": scores[i].tolist()})
        if progress is not None:
            progress(i + 1, total, table[-1])
    means = np.array([row["mean_score"] for row in table])
    best = int(np.argmin(means))
    return TuneResult(
        best_config=apply_cell(base_cfg, cells[best]),
        best_cell=cells[best],
        table=table,
        protocol={**plan.describe(), "n_cells": total, "metric": "average_pinball"},
    )


def refit_final(ds: Dataset, result: TuneResult, plan: SplitPlan) -> tuple[Model, np.ndarray]:
    """Refit the best configuration on train+val (chronological) or all rows (k-fold).

    Returns the model and the row indices it was trained on.
    """
    rows = plan.refit_rows()
    model, _ = fit(ds.subset(rows), result.best_config)
    return model, rows
