"""Datasets, target standardization, split plans and the sine toy problem.

Missing feature cells are stored as NaN; ``Dataset.missing`` exposes the
mask. Targets can never be missing.

Randomness comes from NumPy's PCG64 bit generator, which has a fixed,
documented output stream for a given seed on every platform. Normal noise is
drawn by inverse-CDF transform of open-interval uniforms.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional, Sequence

import numpy as np
from scipy.special import ndtri

TOY_NOISE_SD = 0.2
TOY_FREQ = 7.0


class DataError(ValueError):
    """Raised for malformed input data or impossible split requests."""


@dataclass(frozen=True)
class Standardization:
    mean: float
    std: float

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    target_name: str = "y"
    standardization: Optional[Standardization] = None

    def __post_init__(self):
        X = np.array(self.features, dtype=float, copy=True)
        y = np.array(self.targets, dtype=float, copy=True).ravel()
        if X.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"dataset needs at least one row and one feature, got {X.shape}")
        if y.shape[0] != n:
            raise DataError(f"{n} feature rows but {y.shape[0]} targets")
        if not np.all(np.isfinite(y)):
            raise DataError("targets contain missing or non-finite values")
        if np.isinf(X).any():
            raise DataError("features contain infinite values")
        if len(self.feature_names) != d:
            raise DataError(f"{d} feature columns but {len(self.feature_names)} names")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "targets", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.features)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, features=self.features[rows], targets=self.targets[rows])

    def original_targets(self) -> np.ndarray:
        if self.standardization is None:
            return self.targets.copy()
        st = self.standardization
        return self.targets * st.std + st.mean

    def equals(self, other: "Dataset") -> bool:
        return (
            self.feature_names == other.feature_names
            and self.target_name == other.target_name
            and self.standardization == other.standardization
            and np.array_equal(self.features, other.features, equal_nan=True)
            and np.array_equal(self.targets, other.targets)
        )


# --- CSV ---------------------------------------------------------------------


def load_csv(path, target_column: str = "y", missing_token: str = "") -> Dataset:
    """Read a headed, comma separated numeric table.

    Cells equal to ``missing_token`` become missing features. The target
    column must be fully populated.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"{path}: duplicate column name {name!r}")
            seen.add(name)
        if target_column not in seen:
            raise DataError(f"{path}: target column {target_column!r} not in header {header}")
        t_idx = header.index(target_column)
        f_idx = [i for i in range(len(header)) if i != t_idx]
        if not f_idx:
            raise DataError(f"{path}: no feature columns besides the target")

        X, y = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}")
            values = []
            for col, cell in enumerate(row):
                if cell.strip() == missing_token:
                    if col == t_idx:
                        raise DataError(
                            f"{path}: missing target value at line {line_no} (data row {line_no - 1})"
                        )
                    values.append(math.nan)
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: unparseable numeric cell {cell!r} at line {line_no}, column {header[col]!r}"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(
                        f"{path}: non-finite cell {cell!r} at line {line_no}, column {header[col]!r}"
                    )
                values.append(v)
            X.append([values[i] for i in f_idx])
            y.append(values[t_idx])
    if not y:
        raise DataError(f"{path}: no data rows")
    return Dataset(
        features=np.array(X, dtype=float),
        targets=np.array(y, dtype=float),
        feature_names=tuple(header[i] for i in f_idx),
        target_name=target_column,
    )


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_csv(ds: Dataset, path, original_units: bool = False) -> None:
    """Write features followed by the target column; missing cells are empty."""
    y = ds.original_targets() if original_units else ds.targets
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*ds.feature_names, ds.target_name])
        for row, t in zip(ds.features, y):
            w.writerow([*(_fmt(v) for v in row), _fmt(t)])


def write_matrix_csv(path, header: Sequence[str], matrix) -> None:
    m = np.asarray(matrix, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for row in np.atleast_2d(m):
            w.writerow([_fmt(v) for v in row])


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a headed all-numeric CSV; empty cells become NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {line_no} has {len(row)} cells, expected {len(header)}")
            try:
                rows.append([float(c) if c.strip() else math.nan for c in row])
            except ValueError as exc:
                raise DataError(f"{path}: line {line_no}: {exc}") from None
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


# --- standardization ---------------------------------------------------------


def standardize_targets(ds: Dataset) -> Dataset:
    """Return a copy with targets rescaled to zero mean and unit population std."""
    y = ds.original_targets()
    mean = float(np.mean(y))
    std = float(np.std(y))
    if not std > 0:
        raise DataError("cannot standardize constant targets (zero variance)")
    return replace(ds, targets=(y - mean) / std, standardization=Standardization(mean, std))


def destandardize_predictions(preds, standardization: Optional[Standardization]) -> np.ndarray:
    p = np.asarray(preds, dtype=float)
    if standardization is None:
        return p.copy()
    return p * standardization.std + standardization.mean


# --- toy problem -------------------------------------------------------------


def open_uniforms(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniforms on the open interval (0, 1): ``(k + 0.5) / 2**53`` for 53-bit ``k``."""
    k = rng.integers(0, 2**53, size=n, dtype=np.int64)
    return (k.astype(float) + 0.5) / 2.0**53


def make_toy(n: int = 1000, seed: int = 0) -> Dataset:
    """Draw ``X ~ U[0, 1]`` and ``Y | X=x ~ N(sin(7x), 0.2**2)``.

    The stream is PCG64(seed): first ``n`` uniforms for ``x``, then ``n``
    open-interval uniforms mapped through the normal quantile function.
    """
    if n < 1:
        raise DataError(f"toy sample size must be >= 1, got {n}")
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.random(n)
    z = ndtri(open_uniforms(rng, n))
    y = np.sin(TOY_FREQ * x) + TOY_NOISE_SD * z
    return Dataset(features=x[:, None], targets=y, feature_names=("x",), target_name="y")


def true_toy_quantile(x, tau):
    """Exact conditional ``tau``-quantile of the toy model, ``sin(7x) + 0.2*z_tau``."""
    return np.sin(TOY_FREQ * np.asarray(x, dtype=float)) + TOY_NOISE_SD * ndtri(np.asarray(tau, dtype=float))


# --- split plans -------------------------------------------------------------

TRAIN, VAL, TEST = 0, 1, 2


@dataclass(frozen=True, eq=False)
class SplitPlan:
    """Row assignment for k-fold CV or a chronological train/val/test split.

    For ``kfold`` the assignment is the fold index; for ``chronological`` it
    is one of ``TRAIN``, ``VAL``, ``TEST``.
    """

    kind: str
    params: dict
    assignments: np.ndarray = field(repr=False)

    @property
    def n_rows(self) -> int:
        return self.assignments.shape[0]

    def rows(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == part)

    def folds(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        """Yield ``(train_rows, held_out_rows)`` pairs used for tuning."""
        if self.kind == "kfold":
            for k in range(self.params["k"]):
                yield self.rows_not(k), self.rows(k)
        else:
            yield self.rows(TRAIN), self.rows(VAL)

    def rows_not(self, part: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != part)

    def refit_rows(self) -> np.ndarray:
        if self.kind == "kfold":
            return np.arange(self.n_rows)
        return np.flatnonzero(self.assignments != TEST)

    def describe(self) -> dict:
        sizes = np.bincount(self.assignments, minlength=self.params.get("k", 3)).tolist()
        return {"kind": self.kind, **self.params, "n_rows": self.n_rows, "sizes": sizes}


def kfold(n_rows: int, k: int = 3, seed: int = 0) -> SplitPlan:
    if k < 2:
        raise DataError(f"k-fold needs k >= 2, got {k}")
    if k > n_rows:
        raise DataError(f"cannot make {k} folds from {n_rows} rows")
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n_rows)
    assign = np.empty(n_rows, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(perm, k)):
        assign[chunk] = f
    return SplitPlan("kfold", {"k": k, "seed": seed}, assign)


def chronological(n_rows: int, train_frac: float = 0.8, val_frac: float = 0.1, test_frac: float = 0.1) -> SplitPlan:
    fracs = (train_frac, val_frac, test_frac)
    if min(fracs) <= 0 or abs(sum(fracs) - 1.0) > 1e-9:
        raise DataError(f"chronological fractions must be positive and sum to 1, got {fracs}")
    # small slack so that e.g. 0.29 * 100 floors to 29
    n_train = int(math.floor(train_frac * n_rows + 1e-9))
    n_val = int(math.floor(val_frac * n_rows + 1e-9))
    n_test = n_rows - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise DataError(
            f"{n_rows} rows too few for chronological split {fracs} "
            f"(sizes {n_train}, {n_val}, {n_test})"
        )
    assign = np.repeat([TRAIN, VAL, TEST], [n_train, n_val, n_test]).astype(np.int64)
    return SplitPlan(
        "chronological",
        {"train_frac": train_frac, "val_frac": val_frac, "test_frac": test_frac},
        assign,
    )


def plan_splits(ds: Dataset, kind: str = "kfold", **kwargs) -> SplitPlan:
    if kind == "kfold":
        return kfold(ds.n_rows, **kwargs)
    if kind == "chronological":
        return chronological(ds.n_rows, **kwargs)
    raise DataError(f"unknown split kind {kind!r}")
