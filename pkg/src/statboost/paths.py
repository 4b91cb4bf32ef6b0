"""Coefficient paths and the diagnostics built on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .data import Dataset
from .engine import ModelFit
from .exceptions import DataError, NumericalError


@dataclass(frozen=True)
class PathMatrix:
    """Accumulated coefficients after 0, 1, ..., mstop iterations.

    ``values[m]`` concatenates every learner's coefficient vector; ``labels``
    names the columns and ``blocks[j]`` is learner ``j``'s column slice.
    """

    values: np.ndarray
    labels: tuple
    blocks: tuple

    @property
    def iterations(self) -> int:
        return self.values.shape[0] - 1

    def learner(self, j: int) -> np.ndarray:
        return self.values[:, self.blocks[j]]


def coefficient_path(fit: ModelFit) -> PathMatrix:
    widths = [ds.width for ds in fit.designs]
    starts = np.concatenate([[0], np.cumsum(widths)]).astype(int)
    blocks = tuple(slice(a, b) for a, b in zip(starts[:-1], starts[1:]))
    labels = []
    for ds in fit.designs:
        labels += [ds.name] if ds.width == 1 else [f"{ds.name}[{k}]" for k in range(ds.width)]
    coefs = [np.zeros(w) for w in widths]
    rows = [np.zeros(starts[-1])]
    # same accumulation order as the engine, so the last row equals fit.coefs exactly
    for step in fit.history:
        j = step.selected
        coefs[j] = coefs[j] + fit.scale * step.coef
        row = rows[-1].copy()
        row[blocks[j]] = coefs[j]
        rows.append(row)
    return PathMatrix(np.array(rows), tuple(labels), blocks)


def arc_length(path: Union[PathMatrix, np.ndarray]) -> float:
    """Discrete L1 arc length: total absolute coefficient movement along the path."""
    values = path.values if isinstance(path, PathMatrix) else np.asarray(path, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] == 0:
        raise DataError("empty path")
    return float(np.abs(np.diff(values, axis=0)).sum())


@dataclass(frozen=True)
class DominanceReport:
    """``margins[i] = |a_ii| - sum_{k != i} |a_ik|`` for the inverse covariance ``a``."""

    dominant: bool
    margins: np.ndarray
    precision: np.ndarray

    def to_dict(self) -> dict:
        return {"diagonally_dominant": self.dominant, "margins": self.margins.tolist()}


def diagonal_dominance(d: Union[Dataset, np.ndarray], covariance: bool = False) -> DominanceReport:
    """Check the diagonal dominance condition for the inverse sample covariance.

    ``d`` is a dataset (numeric columns are used) or a covariate matrix; with
    ``covariance=True`` an array is taken to be the covariance matrix itself.
    """
    if isinstance(d, Dataset):
        idx = [j for j, c in enumerate(d.columns) if c.kind == "numeric"]
        if not idx:
            raise DataError("no numeric covariates")
        cov = np.atleast_2d(np.cov(d.values[:, idx], rowvar=False))
    elif covariance:
        cov = np.atleast_2d(np.asarray(d, dtype=float))
    else:
        cov = np.atleast_2d(np.cov(np.asarray(d, dtype=float), rowvar=False))
    if np.linalg.matrix_rank(cov) < cov.shape[0]:
        raise NumericalError("sample covariance is singular")
    prec = np.linalg.inv(cov)
    a = np.abs(prec)
    margins = np.diag(a) - (a.sum(axis=1) - np.diag(a))
    return DominanceReport(bool(np.all(margins >= 0)), margins, prec)
