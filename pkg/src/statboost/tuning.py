"""Resampling-based choice of the stopping iteration and of the step length."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .data import Dataset, ResamplingPlan, make_folds
from .engine import BoostSpec, ModelFit, _link_from_bases
from .exceptions import BoostError, ConfigError, DataError

DEFAULT_GRID = tuple(range(101))


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("STATBOOST_JOBS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, jobs: Optional[int] = None) -> list:
    """Ordered map; results do not depend on the number of workers."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    items = list(items)
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


@dataclass(frozen=True)
class RiskGrid:
    """Out-of-sample mean loss, one row per fold and one column per grid value."""

    risks: np.ndarray
    grid: tuple
    plan: ResamplingPlan

    @property
    def mean(self) -> np.ndarray:
        return self.risks.mean(axis=0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["fold"] + [str(m) for m in self.grid])
            for i, row in enumerate(self.risks):
                w.writerow([i] + [repr(float(v)) for v in row])


def _check_grid(grid) -> tuple:
    grid = tuple(int(m) for m in grid)
    if not grid:
        raise ConfigError("grid must be non-empty")
    if any(m < 0 for m in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("grid must be strictly increasing non-negative integers")
    return grid


def path_risks(fit: ModelFit, test: Dataset, grid: Sequence[int]) -> np.ndarray:
    """Mean test loss of ``fit`` truncated at every value of ``grid``.

    Walks the stored history once; at each grid value the prediction goes
    through the same code as :func:`statboost.engine.predict`.
    """
    fam = fit.family
    y = fam.check_response(test.response)
    bases = [None] * len(fit.designs)
    for j in {s.selected for s in fit.history[: max(grid)]}:
        bases[j] = fit.designs[j].basis(test)
    coefs = [np.zeros(ds.width) for ds in fit.designs]
    out = np.empty(len(grid))
    m = 0
    for g, target in enumerate(grid):
        while m < target:
            step = fit.history[m]
            j = step.selected
            coefs[j] = coefs[j] + fit.scale * step.coef
            m += 1
        f = _link_from_bases(fit.offset, coefs, bases, test.rows)
        out[g] = np.mean(fam.loss(y, f))
    return out


def _fold_risks(d: Dataset, spec: BoostSpec, grid, fold_id, train, test) -> np.ndarray:
    try:
        fit = spec.fit(d.subset(train), max(grid), keep_data=False)
        return path_risks(fit, d.subset(test), grid)
    except BoostError as e:
        raise type(e)(f"fold {fold_id}: {e}") from e


def cvrisk(d: Dataset, spec: BoostSpec, plan: Optional[ResamplingPlan] = None,
           grid: Sequence[int] = DEFAULT_GRID, jobs: Optional[int] = None) -> RiskGrid:
    """Out-of-sample risk along the boosting path for every resampling fold.

    One fit per fold up to ``max(grid)``; smaller grid values are read off
    the same path.
    """
    plan = plan or ResamplingPlan()
    grid = _check_grid(grid)
    if d.response is None:
        raise DataError("dataset has no response")
    folds = make_folds(d, plan)
    rows = parallel_map(lambda it: _fold_risks(d, spec, grid, it[0], *it[1]),
                        enumerate(folds), jobs)
    risks = np.vstack(rows)
    if not np.all(np.isfinite(risks)):
        raise DataError("non-finite out-of-sample risk")
    return RiskGrid(risks, grid, plan)


def select_mstop(rg: RiskGrid) -> int:
    """Grid value with the smallest mean risk; ties go to the smallest value."""
    return int(rg.grid[int(np.argmin(rg.mean))])


@dataclass(frozen=True)
class GridTuneResult:
    nu: float
    mstop: int
    surface: np.ndarray
    nu_grid: tuple
    mstop_grid: tuple
    riskgrids: tuple


def tune_grid2(d: Dataset, spec: BoostSpec, plan: Optional[ResamplingPlan] = None,
               nu_grid: Sequence[float] = (0.1,), mstop_grid: Sequence[int] = DEFAULT_GRID,
               jobs: Optional[int] = None) -> GridTuneResult:
    """Joint resampling search over step length and stopping iteration.

    ``surface[a, b]`` is the fold-averaged risk at ``nu_grid[a]`` and
    ``mstop_grid[b]``. Ties prefer the smaller step length, then the
    smaller stopping iteration.
    """
    nu_grid = tuple(sorted(float(v) for v in nu_grid))
    if not nu_grid:
        raise ConfigError("nu grid must be non-empty")
    if len(set(nu_grid)) != len(nu_grid):
        raise ConfigError("nu grid has duplicates")
    mstop_grid = _check_grid(mstop_grid)
    rgs = tuple(cvrisk(d, replace(spec, nu=nu), plan, mstop_grid, jobs) for nu in nu_grid)
    surface = np.vstack([rg.mean for rg in rgs])
    a, b = np.unravel_index(int(np.argmin(surface)), surface.shape)
    return GridTuneResult(nu_grid[a], mstop_grid[b], surface, nu_grid, mstop_grid, rgs)
