"""Multi-output regression trees grown by exact greedy second-order splitting.

All ``N_tau`` outputs share one tree structure. Split gains and the
``min_child_weight`` check use sums over the outputs; every leaf stores one
weight per output.

Depth counts nodes on a root-to-leaf path, so ``max_depth=1`` is a single
leaf and ``max_depth=2`` allows one split.

Routing: a row goes left iff ``x < threshold``; equality goes right and a
missing value follows the node's default direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from ._kernels import scan_feature


class TreeError(ValueError):
    pass


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 3
    lam: float = 1.0
    gamma: float = 0.1
    min_child_weight: float = 0.0
    max_delta_step: float = 0.5

    def __post_init__(self):
        if int(self.max_depth) != self.max_depth or self.max_depth < 1:
            raise TreeError(f"max_depth must be an integer >= 1, got {self.max_depth!r}")
        if not self.lam >= 0:
            raise TreeError(f"lambda must be >= 0, got {self.lam!r}")
        if not self.gamma >= 0:
            raise TreeError(f"gamma must be >= 0, got {self.gamma!r}")
        if not self.min_child_weight >= 0:
            raise TreeError(f"min_child_weight must be >= 0, got {self.min_child_weight!r}")
        if not self.max_delta_step > 0:
            raise TreeError(f"max_delta_step must be positive or inf, got {self.max_delta_step!r}")

    def to_dict(self) -> dict:
        return {
            "max_depth": int(self.max_depth),
            "lambda": self.lam,
            "gamma": self.gamma,
            "min_child_weight": self.min_child_weight,
            "max_delta_step": None if math.isinf(self.max_delta_step) else self.max_delta_step,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        mds = d.get("max_delta_step")
        return cls(
            max_depth=int(d["max_depth"]),
            lam=float(d["lambda"]),
            gamma=float(d["gamma"]),
            min_child_weight=float(d["min_child_weight"]),
            max_delta_step=math.inf if mds is None else float(mds),
        )


@dataclass(frozen=True, eq=False)
class Leaf:
    weights: np.ndarray

    def __eq__(self, other):
        return isinstance(other, Leaf) and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True, eq=False)
class Split:
    feature: int
    threshold: float
    default_left: bool
    left: "Node"
    right: "Node"

    def __eq__(self, other):
        return (
            isinstance(other, Split)
            and self.feature == other.feature
            and self.threshold == other.threshold
            and self.default_left == other.default_left
            and self.left == other.left
            and self.right == other.right
        )


Node = Union[Leaf, Split]


@dataclass(frozen=True, eq=False)
class Tree:
    root: Node

    def __eq__(self, other):
        return isinstance(other, Tree) and self.root == other.root

    @property
    def leaf_count(self) -> int:
        return sum(1 for _ in self.leaves())

    @property
    def depth(self) -> int:
        def _depth(node):
            if isinstance(node, Leaf):
                return 1
            return 1 + max(_depth(node.left), _depth(node.right))

        return _depth(self.root)

    @property
    def n_outputs(self) -> int:
        return next(self.leaves()).weights.shape[0]

    def leaves(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.extend((node.right, node.left))

    def max_feature(self) -> int:
        feats = [-1]
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Split):
                feats.append(node.feature)
                stack.extend((node.left, node.right))
        return max(feats)

    def to_dict(self) -> dict:
        return node_to_dict(self.root)

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(node_from_dict(d))


def node_to_dict(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"weights": [float(w) for w in node.weights]}
    return {
        "feature": node.feature,
        "threshold": float(node.threshold),
        "default_left": node.default_left,
        "left": node_to_dict(node.left),
        "right": node_to_dict(node.right),
    }


def node_from_dict(d: dict) -> Node:
    if "weights" in d:
        w = np.array([float(v) for v in d["weights"]], dtype=float)
        w.setflags(write=False)
        return Leaf(w)
    return Split(
        feature=int(d["feature"]),
        threshold=float(d["threshold"]),
        default_left=bool(d["default_left"]),
        left=node_from_dict(d["left"]),
        right=node_from_dict(d["right"]),
    )


class SplitCandidate(NamedTuple):
    feature: int
    threshold: float
    default_left: bool
    gain: float


def leaf_weight(grad_sum, hess_sum, lam: float, max_delta_step: float = math.inf) -> np.ndarray:
    """Per-output optimal leaf weight ``-G/(H + lam)``, clamped to ``+-max_delta_step``."""
    G = np.asarray(grad_sum, dtype=float)
    H = np.asarray(hess_sum, dtype=float)
    denom = H + lam
    if np.any(denom <= 0):
        raise TreeError(f"non-positive leaf denominator H + lambda: {denom}")
    w = -G / denom
    if math.isfinite(max_delta_step):
        w = np.clip(w, -max_delta_step, max_delta_step)
    return w


def _score(G, H, lam):
    return float(np.sum(G * G / (H + lam)))


def split_gain(G_L, H_L, G_R, H_R, params: TreeParams) -> float:
    """Loss reduction of a split, summed over outputs, minus ``gamma``."""
    G_L, H_L, G_R, H_R = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (G_L, H_L, G_R, H_R))
    lam = params.lam
    for name, H in (("left", H_L), ("right", H_R), ("parent", H_L + H_R)):
        if np.any(H + lam <= 0):
            raise TreeError(f"non-positive {name} denominator H + lambda")
    return 0.5 * (_score(G_L, H_L, lam) + _score(G_R, H_R, lam) - _score(G_L + G_R, H_L + H_R, lam)) - params.gamma


def presort(features: np.ndarray) -> list[np.ndarray]:
    """Per-feature row order by ascending value, missing rows dropped."""
    out = []
    for f in range(features.shape[1]):
        col = features[:, f]
        present = np.flatnonzero(~np.isnan(col))
        out.append(present[np.argsort(col[present], kind="stable")])
    return out


def find_best_split(rows, features, grad, hess, params: TreeParams, sorted_index=None) -> Optional[SplitCandidate]:
    """Exact greedy search over all features and midpoint thresholds.

    Each candidate is scored twice, with missing rows sent left and then
    right. Ties go to the lower feature, then the lower threshold, then
    missing-left. Returns ``None`` unless the best gain is positive.
    """
    rows = np.sort(np.asarray(rows, dtype=np.int64))
    if rows.size < 2:
        return None
    if sorted_index is None:
        sorted_index = presort(features[rows])
        sorted_index = [rows[o] for o in sorted_index]
        in_node = None
    else:
        in_node = np.zeros(features.shape[0], dtype=bool)
        in_node[rows] = True

    K = grad.shape[1]
    lam = params.lam
    G = grad[rows].sum(axis=0)
    H = hess[rows].sum(axis=0)
    if np.any(H + lam <= 0):
        return None
    parent_score = _score(G, H, lam)

    best: Optional[SplitCandidate] = None
    best_gain = -math.inf
    for f in range(features.shape[1]):
        order = sorted_index[f]
        if in_node is not None:
            order = order[in_node[order]]
        if order.size < 2:
            continue
        col = features[rows, f]
        miss_rows = rows[np.isnan(col)]
        if miss_rows.size:
            gm = grad[miss_rows].sum(axis=0)
            hm = hess[miss_rows].sum(axis=0)
        else:
            gm = np.zeros(K)
            hm = np.zeros(K)
        gain, thr, default_left = scan_feature(
            np.ascontiguousarray(features[order, f]),
            np.ascontiguousarray(grad[order]),
            np.ascontiguousarray(hess[order]),
            gm,
            hm,
            parent_score,
            lam,
            params.gamma,
            params.min_child_weight,
        )
        if gain > best_gain:
            best_gain = gain
            best = SplitCandidate(f, thr, bool(default_left), gain)
    if best is None or not best.gain > 0:
        return None
    return best


def go_left(values: np.ndarray, threshold: float, default_left: bool) -> np.ndarray:
    miss = np.isnan(values)
    return np.where(miss, default_left, values < threshold)


def build_tree(rows, features, grad, hess, params: TreeParams, sorted_index=None) -> Tree:
    """Grow one tree minimizing the second-order objective on ``rows``."""
    features = np.asarray(features, dtype=float)
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    if grad.ndim != 2 or grad.shape != hess.shape or grad.shape[0] != features.shape[0]:
        raise TreeError(f"grad/hess must be N x N_tau matching features; got {grad.shape}, {hess.shape}")
    if sorted_index is None:
        sorted_index = presort(features)

    def grow(node_rows, depth):
        if depth < params.max_depth and node_rows.size >= 2:
            split = find_best_split(node_rows, features, grad, hess, params, sorted_index)
            if split is not None:
                left = go_left(features[node_rows, split.feature], split.threshold, split.default_left)
                return Split(
                    split.feature,
                    split.threshold,
                    split.default_left,
                    grow(node_rows[left], depth + 1),
                    grow(node_rows[~left], depth + 1),
                )
        w = leaf_weight(grad[node_rows].sum(axis=0), hess[node_rows].sum(axis=0), params.lam, params.max_delta_step)
        w.setflags(write=False)
        return Leaf(w)

    rows = np.sort(np.asarray(rows, dtype=np.int64))
    return Tree(grow(rows, 1))


def predict_tree(tree: Tree, X) -> np.ndarray:
    """Leaf weights for each row of ``X`` (a single row gives a 1-D vector)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X2 = X[None, :] if single else X
    if tree.max_feature() >= X2.shape[1]:
        raise TreeError(f"tree uses feature {tree.max_feature()} but input has {X2.shape[1]} columns")
    out = np.empty((X2.shape[0], tree.n_outputs))

    def route(node, idx):
        if isinstance(node, Leaf):
            out[idx] = node.weights
            return
        left = go_left(X2[idx, node.feature], node.threshold, node.default_left)
        if left.any():
            route(node.left, idx[left])
        if not left.all():
            route(node.right, idx[~left])

    if X2.shape[0]:
        route(tree.root, np.arange(X2.shape[0]))
    return out[0] if single else out


def tree_objective(tree: Tree, features, grad, hess, params: TreeParams, rows=None) -> float:
    """Second-order objective of ``tree`` with constant loss terms dropped.

    ``sum_i (g_i w + h_i w^2 / 2) + lam/2 * sum ||w||^2 + gamma * T``, using
    the stored (possibly clamped) leaf weights.
    """
    features = np.asarray(features, dtype=float)
    if rows is not None:
        rows = np.asarray(rows)
        features, grad, hess = features[rows], grad[rows], hess[rows]
    W = predict_tree(tree, features)
    total = float(np.sum(grad * W + 0.5 * hess * W * W))
    for leaf in tree.leaves():
        total += 0.5 * params.lam * float(np.sum(leaf.weights**2))
    return total + params.gamma * tree.leaf_count
