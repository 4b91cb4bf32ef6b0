"""Datasets, column typing, standardization and resampling splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigError, DataError


@dataclass(frozen=True)
class ColumnSpec:
    """Name and type of one covariate column.

    ``levels`` is the ordered tuple of level labels for a categorical column
    (code ``i`` means ``levels[i]``); it is ``None`` for numeric columns.
    ``scaling`` holds the ``(mean, sd)`` used by :func:`standardize`.
    """

    name: str
    kind: str = "numeric"
    levels: Optional[tuple] = None
    scaling: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise ConfigError(f"unknown column kind {self.kind!r}")
        if self.kind == "categorical" and not self.levels:
            raise ConfigError(f"categorical column {self.name!r} needs levels")
        if self.scaling is not None and not self.scaling[1] > 0:
            raise DataError(f"column {self.name!r}: recorded sd must be positive")

    @property
    def n_levels(self) -> int:
        return len(self.levels) if self.levels else 0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "levels": list(self.levels) if self.levels else None,
            "scaling": list(self.scaling) if self.scaling else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSpec":
        return cls(
            name=d["name"],
            kind=d["kind"],
            levels=tuple(d["levels"]) if d.get("levels") else None,
            scaling=tuple(d["scaling"]) if d.get("scaling") else None,
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Covariate matrix plus response.

    Categorical columns hold integer level codes stored as floats. The
    response may be ``None`` for data that is only used for prediction.
    """

    columns: tuple
    values: np.ndarray
    response: Optional[np.ndarray] = None
    response_name: str = "y"

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim == 1:
            values = _frozen(values[:, None])
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", tuple(self.columns))
        if values.shape[1] != len(self.columns):
            raise DataError(
                f"{values.shape[1]} value columns but {len(self.columns)} column specs"
            )
        if not np.all(np.isfinite(values)):
            i, j = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"missing or non-finite value at row {i + 1}, column {self.columns[j].name!r}")
        if self.response is not None:
            y = _frozen(self.response).ravel()
            if y.shape[0] != values.shape[0]:
                raise DataError(f"response length {y.shape[0]} != row count {values.shape[0]}")
            if not np.all(np.isfinite(y)):
                raise DataError(f"missing or non-finite response at row {int(np.argmin(np.isfinite(y))) + 1}")
            object.__setattr__(self, "response", y)
        for j, c in enumerate(self.columns):
            if c.kind == "categorical":
                codes = values[:, j]
                if np.any(codes < 0) or np.any(codes != np.round(codes)) or np.any(codes >= c.n_levels):
                    raise DataError(f"column {c.name!r}: codes must be integers in [0, {c.n_levels})")

    @classmethod
    def from_arrays(cls, X, y=None, names=None, categorical=None, response_name="y"):
        """Build a dataset from a numeric matrix.

        ``categorical`` maps column names to their level labels; those
        columns of ``X`` must already contain the integer codes.
        """
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if names is None:
            names = [f"x{j + 1}" for j in range(X.shape[1])]
        categorical = categorical or {}
        cols = [
            ColumnSpec(n, "categorical", tuple(str(v) for v in categorical[n]))
            if n in categorical
            else ColumnSpec(n)
            for n in names
        ]
        return cls(tuple(cols), X, y, response_name)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    def column_index(self, name: str) -> int:
        for j, c in enumerate(self.columns):
            if c.name == name:
                return j
        raise DataError(f"no column named {name!r}")

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def spec(self, name: str) -> ColumnSpec:
        return self.columns[self.column_index(name)]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        y = None if self.response is None else self.response[idx]
        return replace(self, values=self.values[idx], response=y)

    def with_response(self, y) -> "Dataset":
        return replace(self, response=y)


def _parse_float(text: str) -> Optional[float]:
    try:
        v = float(text)
    except ValueError:
        return None
    return v


def load_csv(path: Union[str, Path], response_column: Optional[str] = None,
             schema: Optional[Sequence[ColumnSpec]] = None) -> Dataset:
    """Read a comma-separated file with a header row.

    Columns whose every cell parses as a number become numeric; the rest are
    categorical with levels in lexicographic order. With ``schema`` (column
    specs of a training set) columns are typed and coded accordingly and
    recorded scaling is applied, so prediction data lines up with the
    training design. ``response_column=None`` loads covariates only.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for i, r in enumerate(body):
        if len(r) != len(header):
            raise DataError(f"{path}: row {i + 1} has {len(r)} fields, header has {len(header)}")
        for j, cell in enumerate(r):
            s = cell.strip()
            if s == "" or s.lower() in ("na", "nan", "null"):
                raise DataError(f"{path}: missing value at row {i + 1}, column {header[j]!r}")
    cols = {h: [r[j].strip() for r in body] for j, h in enumerate(header)}

    y = None
    if response_column is not None:
        if response_column not in cols:
            raise DataError(f"{path}: response column {response_column!r} not found")
        parsed = [_parse_float(s) for s in cols[response_column]]
        for i, v in enumerate(parsed):
            if v is None or not math.isfinite(v):
                raise DataError(f"{path}: unparseable response {cols[response_column][i]!r} at row {i + 1}")
        y = np.array(parsed)

    covariates = [h for h in header if h != response_column]
    if schema is not None:
        known = {c.name: c for c in schema}
        missing = [n for n in known if n not in cols]
        if missing:
            raise DataError(f"{path}: columns {missing} required by the model are absent")
        covariates = [c.name for c in schema]

    specs, mats = [], []
    for name in covariates:
        cells = cols[name]
        ref = known[name] if schema is not None else None
        nums = [_parse_float(s) for s in cells]
        if ref is not None and ref.kind == "numeric":
            bad = [i for i, v in enumerate(nums) if v is None]
            if bad:
                raise DataError(f"{path}: non-numeric value at row {bad[0] + 1}, column {name!r}")
            spec = ColumnSpec(name, "numeric", scaling=ref.scaling)
            col = np.array(nums)
            if ref.scaling is not None:
                col = (col - ref.scaling[0]) / ref.scaling[1]
        elif ref is None and all(v is not None for v in nums):
            spec, col = ColumnSpec(name), np.array(nums)
        else:
            levels = ref.levels if ref is not None else tuple(sorted(set(cells)))
            lookup = {lv: k for k, lv in enumerate(levels)}
            codes = []
            for i, s in enumerate(cells):
                if s not in lookup:
                    raise DataError(f"{path}: unseen level {s!r} at row {i + 1}, column {name!r}")
                codes.append(lookup[s])
            spec, col = ColumnSpec(name, "categorical", tuple(levels)), np.array(codes, dtype=float)
        specs.append(spec)
        mats.append(col)
    values = np.column_stack(mats) if mats else np.empty((len(body), 0))
    return Dataset(tuple(specs), values, y, response_column or "y")


def standardize(d: Dataset, columns: Optional[Sequence[str]] = None) -> Dataset:
    """Center numeric columns to mean 0 and scale them to sd 1 (ddof=1).

    The applied ``(mean, sd)`` is composed with any scaling already recorded,
    so the column spec always maps raw values to the stored ones.
    """
    names = set(columns) if columns is not None else None
    values = np.array(d.values)
    specs = list(d.columns)
    for j, c in enumerate(d.columns):
        if c.kind != "numeric" or (names is not None and c.name not in names):
            continue
        x = values[:, j]
        mean = x.mean()
        sd = x.std(ddof=1) if x.size > 1 else 0.0
        if not sd > 0:
            raise DataError(f"column {c.name!r} is constant; cannot standardize")
        values[:, j] = (x - mean) / sd
        if c.scaling is None:
            scaling = (float(mean), float(sd))
        else:
            m0, s0 = c.scaling
            scaling = (float(m0 + s0 * mean), float(s0 * sd))
        specs[j] = replace(c, scaling=scaling)
    return replace(d, columns=tuple(specs), values=values)


def apply_scaling(d: Dataset, schema: Sequence[ColumnSpec]) -> Dataset:
    """Scale raw numeric columns of ``d`` with the scaling recorded in ``schema``."""
    values = np.array(d.values)
    specs = list(d.columns)
    for ref in schema:
        if ref.kind != "numeric" or ref.scaling is None:
            continue
        j = d.column_index(ref.name)
        values[:, j] = (values[:, j] - ref.scaling[0]) / ref.scaling[1]
        specs[j] = replace(specs[j], scaling=ref.scaling)
    return replace(d, columns=tuple(specs), values=values)


@dataclass(frozen=True)
class ResamplingPlan:
    """How to split observations into train/test parts.

    ``scheme`` is one of ``"kfold"``, ``"subsample"`` or ``"bootstrap"``.
    """

    scheme: str = "subsample"
    k: int = 10
    fraction: float = 0.5
    B: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("kfold", "subsample", "bootstrap"):
            raise ConfigError(f"unknown resampling scheme {self.scheme!r}")
        if self.scheme == "kfold" and self.k < 2:
            raise ConfigError("kfold needs k >= 2")
        if self.scheme == "subsample" and not 0 < self.fraction < 1:
            raise ConfigError("subsample fraction must lie in (0, 1)")
        if self.scheme != "kfold" and self.B < 1:
            raise ConfigError("B must be >= 1")

    @classmethod
    def kfold_plan(cls, k: int, seed: int = 0) -> "ResamplingPlan":
        return cls("kfold", k=k, seed=seed)

    @classmethod
    def subsample_plan(cls, fraction: float = 0.5, B: int = 25, seed: int = 0) -> "ResamplingPlan":
        return cls("subsample", fraction=fraction, B=B, seed=seed)

    @classmethod
    def bootstrap_plan(cls, B: int, seed: int = 0) -> "ResamplingPlan":
        return cls("bootstrap", B=B, seed=seed)

    @property
    def n_splits(self) -> int:
        return self.k if self.scheme == "kfold" else self.B

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "k": self.k, "fraction": self.fraction,
                "B": self.B, "seed": self.seed}


def _run_rng(seed: int, b: int) -> np.random.Generator:
    # one independent stream per (seed, run index)
    return np.random.default_rng([int(seed), int(b)])


def make_folds(d: Union[Dataset, int], plan: ResamplingPlan) -> list:
    """Return a list of ``(train_idx, test_idx)`` integer arrays."""
    n = d if isinstance(d, (int, np.integer)) else d.rows
    folds = []
    if plan.scheme == "kfold":
        if plan.k > n:
            raise DataError(f"kfold with k={plan.k} on n={n} leaves an empty test set")
        perm = np.random.default_rng(int(plan.seed)).permutation(n)
        for test in np.array_split(perm, plan.k):
            test = np.sort(test)
            folds.append((np.setdiff1d(np.arange(n), test), test))
    elif plan.scheme == "subsample":
        size = int(math.floor(plan.fraction * n))
        if size < 1 or size >= n:
            raise DataError(f"subsample fraction {plan.fraction} on n={n} leaves an empty train or test set")
        for b in range(plan.B):
            train = np.sort(_run_rng(plan.seed, b).choice(n, size, replace=False))
            folds.append((train, np.setdiff1d(np.arange(n), train)))
    else:
        for b in range(plan.B):
            train = np.sort(_run_rng(plan.seed, b).integers(0, n, size=n))
            test = np.setdiff1d(np.arange(n), train)
            if test.size == 0:
                raise DataError(f"bootstrap sample {b} has no out-of-bag observations")
            folds.append((train, test))
    for i, (train, test) in enumerate(folds):
        if train.size == 0 or test.size == 0:
            raise DataError(f"fold {i} has an empty train or test set")
    return folds


def half_subsamples(d: Union[Dataset, int], B: int, seed: int = 0) -> list:
    """Draw ``B`` index sets of size ``floor(n/2)`` without replacement."""
    n = d if isinstance(d, (int, np.integer)) else d.rows
    if n < 2:
        raise DataError("half subsampling needs n >= 2")
    if B < 1:
        raise ConfigError("B must be >= 1")
    return [np.sort(_run_rng(seed, b).choice(n, n // 2, replace=False)) for b in range(B)]
