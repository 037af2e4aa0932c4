"""Second-order boosting of multi-output trees for composite quantile regression.

The ensemble predicts ``f0 + eta * sum_k f_k(x)``, where ``f0`` holds one
base score per quantile level and every tree outputs one weight per level.
Targets are expected to be standardized; predictions are mapped back to the
original units with the standardization stored in the model.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .data import Dataset, Standardization, destandardize_predictions
from .loss import LossSpec, QuantileLevels, batch_grad_hess, loss_value
from .tree import Tree, TreeParams, build_tree, predict_tree, presort

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
BASE_SCORE_MODES = ("empirical_quantiles", "zeros")


class BoosterError(ValueError):
    pass


class ModelFormatError(BoosterError):
    pass


@dataclass(frozen=True)
class BoosterConfig:
    n_estimators: int = 400
    learning_rate: float = 0.05
    loss: LossSpec = field(default_factory=LossSpec)
    levels: QuantileLevels = field(default_factory=QuantileLevels)
    tree: TreeParams = field(default_factory=TreeParams)
    base_score_mode: str = "empirical_quantiles"
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.levels, QuantileLevels):
            object.__setattr__(self, "levels", QuantileLevels(self.levels))
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 1:
            raise BoosterError(f"n_estimators must be an integer >= 1, got {self.n_estimators!r}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise BoosterError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if not self.loss.trainable:
            raise BoosterError(f"loss kind {self.loss.kind!r} cannot be used for training (zero Hessian)")
        if self.base_score_mode not in BASE_SCORE_MODES:
            raise BoosterError(f"base_score_mode must be one of {BASE_SCORE_MODES}")

    def with_tree(self, **kwargs) -> "BoosterConfig":
        return replace(self, tree=replace(self.tree, **kwargs))

    def to_dict(self) -> dict:
        return {
            "n_estimators": int(self.n_estimators),
            "learning_rate": self.learning_rate,
            "loss": self.loss.to_dict(),
            "levels": list(self.levels),
            "tree": self.tree.to_dict(),
            "base_score_mode": self.base_score_mode,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoosterConfig":
        return cls(
            n_estimators=int(d["n_estimators"]),
            learning_rate=float(d["learning_rate"]),
            loss=LossSpec(**d["loss"]),
            levels=QuantileLevels(d["levels"]),
            tree=TreeParams.from_dict(d["tree"]),
            base_score_mode=d["base_score_mode"],
            seed=int(d["seed"]),
        )


@dataclass(frozen=True, eq=False)
class Model:
    trees: tuple[Tree, ...]
    base_scores: np.ndarray
    config: BoosterConfig
    standardization: Optional[Standardization] = None
    n_features: int = 1
    feature_names: tuple = ()

    @property
    def levels(self) -> QuantileLevels:
        return self.config.levels

    @property
    def learning_rate(self) -> float:
        return self.config.learning_rate

    def truncated(self, n_trees: int) -> "Model":
        """The model after its first ``n_trees`` boosting rounds."""
        return replace(self, trees=self.trees[:n_trees], config=replace(self.config, n_estimators=max(n_trees, 1)))

    def raw_predict(self, X) -> np.ndarray:
        """Predictions in standardized units."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise BoosterError(f"expected features of width {self.n_features}, got shape {X.shape}")
        out = np.tile(self.base_scores, (X.shape[0], 1))
        for tree in self.trees:
            out += self.learning_rate * predict_tree(tree, X)
        return out

    def to_dict(self) -> dict:
        st = self.standardization
        return {
            "format_version": FORMAT_VERSION,
            "levels": list(self.levels),
            "base_scores": [float(v) for v in self.base_scores],
            "learning_rate": self.learning_rate,
            "standardization": None if st is None else st.to_dict(),
            "n_features": self.n_features,
            "feature_names": list(self.feature_names),
            "config": self.config.to_dict(),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Model":
        if not isinstance(d, dict):
            raise ModelFormatError("model file must hold a JSON object")
        version = d.get("format_version")
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model format_version {version!r}, expected {FORMAT_VERSION}")
        try:
            config = BoosterConfig.from_dict(d["config"])
            if list(config.levels) != [float(t) for t in d["levels"]]:
                raise ModelFormatError("levels disagree with config snapshot")
            if float(d["learning_rate"]) != config.learning_rate:
                raise ModelFormatError("learning_rate disagrees with config snapshot")
            base = np.array([float(v) for v in d["base_scores"]], dtype=float)
            if base.shape[0] != len(config.levels):
                raise ModelFormatError("base_scores length does not match levels")
            trees = tuple(Tree.from_dict(t) for t in d["trees"])
            for k, t in enumerate(trees):
                if t.n_outputs != len(config.levels):
                    raise ModelFormatError(f"tree {k} has leaf dimension {t.n_outputs}, expected {len(config.levels)}")
            st = d.get("standardization")
            standardization = None if st is None else Standardization(float(st["mean"]), float(st["std"]))
            names = tuple(str(n) for n in d.get("feature_names", ()))
            return cls(trees, base, config, standardization, int(d["n_features"]), names)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ModelFormatError):
                raise
            raise ModelFormatError(f"malformed model: {type(exc).__name__}: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))


class FitLog(NamedTuple):
    iteration: int
    train_pinball: float


def composite_pinball(y, preds, levels) -> float:
    u = np.asarray(y, dtype=float)[:, None] - preds
    return float(np.mean(loss_value(u, np.asarray(levels)[None, :], LossSpec("pinball"))))


def base_scores_for(y, levels, mode: str) -> np.ndarray:
    if mode == "zeros":
        return np.zeros(len(levels))
    # smallest y with empirical CDF >= tau
    return np.quantile(np.asarray(y, dtype=float), list(levels), method="inverted_cdf")


def fit(ds: Dataset, cfg: BoosterConfig) -> tuple[Model, list[FitLog]]:
    """Train ``cfg.n_estimators`` trees on ``ds``.

    Returns the model and a per-iteration log of the true composite pinball
    loss on the training rows (in the units the model was trained in).
    """
    if ds.standardization is None:
        log.warning("training on targets without a standardization snapshot; recommended defaults assume standardized targets")
    X = ds.features
    y = ds.targets
    levels = np.asarray(cfg.levels)
    base = base_scores_for(y, cfg.levels, cfg.base_score_mode)
    preds = np.tile(base, (ds.n_rows, 1))
    rows = np.arange(ds.n_rows)
    order = presort(X)
    trees = []
    history = []
    for t in range(1, cfg.n_estimators + 1):
        resid = y[:, None] - preds
        grad, hess = batch_grad_hess(resid, levels, cfg.loss)
        bad = ~(np.isfinite(grad) & np.isfinite(hess))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise BoosterError(f"non-finite gradient at iteration {t}, row {i}, level {levels[j]}")
        tree = build_tree(rows, X, grad, hess, cfg.tree, sorted_index=order)
        trees.append(tree)
        preds = preds + cfg.learning_rate * predict_tree(tree, X)
        history.append(FitLog(t, composite_pinball(y, preds, levels)))
    model = Model(tuple(trees), base, cfg, ds.standardization, ds.n_features, ds.feature_names)
    return model, history


def predict(model: Model, features) -> np.ndarray:
    """``N x N_tau`` quantile predictions in original target units."""
    return destandardize_predictions(model.raw_predict(features), model.standardization)


def save_model(model: Model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model.dumps())
        fh.write("\n")


def load_model(path) -> Model:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return Model.from_dict(d)


# --- single-datum update (crossing analysis) ----------------------------------


class UpdateResult(NamedTuple):
    before: np.ndarray
    after: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    crossed: bool


def single_point_update(y: float, q_hats: Sequence[float], levels: Sequence[float], loss: LossSpec,
                        lam: float = 0.0, learning_rate: float = 1.0) -> UpdateResult:
    """One boosting step for a leaf that holds a single observation ``y``.

    Each level moves by ``-eta * g_j / (h_j + lam)``. ``crossed`` is set when
    a pair of adjacent levels that was ordered before the update is out of
    order after it.
    """
    if not loss.trainable:
        raise BoosterError(f"loss kind {loss.kind!r} has no usable Hessian")
    q = np.asarray(q_hats, dtype=float)
    grad, hess = batch_grad_hess((y - q)[None, :], levels, loss)
    grad, hess = grad[0], hess[0]
    denom = hess + lam
    step = np.divide(grad, denom, out=np.zeros_like(grad), where=denom > 0)
    after = q - learning_rate * step
    was_ordered = q[:-1] <= q[1:]
    crossed = bool(np.any(was_ordered & (after[:-1] > after[1:])))
    return UpdateResult(q, after, grad, hess, crossed)
