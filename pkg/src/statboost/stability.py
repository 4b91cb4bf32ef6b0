"""Stability selection for component-wise gradient boosting.

The model is refitted on ``B`` random halves of the data, each run stopping
once ``q`` distinct base-learners have entered. Learners whose selection
frequency reaches ``pi_thr`` form the stable set, and the expected number of
false positives is bounded by ``q**2 / ((2 * pi_thr - 1) * p)``. The bound
assumes exchangeable noise learners and a selection procedure no worse than
random guessing; neither is checked at runtime.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .data import Dataset, half_subsamples
from .engine import BoostSpec, _apply, _gradient_step, _response, _start
from .exceptions import ComplexityWarning, ConfigError, NumericalError
from .tuning import parallel_map


def pfer_bound(q: int, pi_thr: float, p: int) -> float:
    """Upper bound on the expected number of falsely selected learners."""
    if q < 1 or p < q:
        raise ConfigError(f"need 1 <= q <= p, got q={q}, p={p}")
    if not 0.5 < pi_thr <= 1:
        raise ConfigError(f"pi_thr must lie in (0.5, 1] for the error bound, got {pi_thr}")
    return q * q / ((2.0 * pi_thr - 1.0) * p)


def threshold_for_pfer(q: int, p: int, pfer: float) -> float:
    """Selection threshold at which the error bound equals ``pfer``."""
    if not pfer > 0:
        raise ConfigError("pfer must be positive")
    if q < 1 or p < q:
        raise ConfigError(f"need 1 <= q <= p, got q={q}, p={p}")
    thr = (q * q / (pfer * p) + 1.0) / 2.0
    if thr > 1:
        raise ConfigError(
            f"PFER {pfer:g} is unattainable with q={q}, p={p}: it needs pi_thr={thr:.4g} > 1; "
            "lower q or raise the PFER target"
        )
    return thr


def _reaches(counts, B, pi_thr):
    # counts are integers; the slack absorbs rounding in pi_thr * B
    return counts >= pi_thr * B - 1e-9


class StableSet(NamedTuple):
    ids: tuple
    names: tuple
    pi_thr: float
    pfer: float


@dataclass(frozen=True)
class StabSelResult:
    """Selection frequencies over the subsample runs plus the error-control parameters.

    ``pi_thr`` and ``pfer`` are always both filled in: one as supplied, the
    other derived from it.
    """

    names: tuple
    counts: np.ndarray
    q: int
    B: int
    pi_thr: float
    pfer: float
    seed: int
    selected_sets: tuple = ()

    @property
    def p(self) -> int:
        return len(self.names)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.B

    @property
    def stable(self) -> StableSet:
        return stable_set(self, self.pi_thr)

    def to_dict(self) -> dict:
        return {
            "frequencies": {n: float(f) for n, f in zip(self.names, self.frequencies)},
            "q": self.q, "B": self.B, "p": self.p,
            "pi_thr": self.pi_thr, "pfer": self.pfer, "seed": self.seed,
            "stable": list(self.stable.names),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def ranking_table(self) -> str:
        order = sorted(range(self.p), key=lambda j: (-self.counts[j], j))
        width = max(len(n) for n in self.names)
        lines = [f"{'learner':<{width}}  frequency  stable"]
        for j in order:
            flag = "*" if _reaches(self.counts[j], self.B, self.pi_thr) else ""
            lines.append(f"{self.names[j]:<{width}}  {self.frequencies[j]:9.3f}  {flag}")
        return "\n".join(lines) + "\n"


def stable_set(r: StabSelResult, pi_thr: float) -> StableSet:
    """Learners with frequency >= ``pi_thr``, and the error bound at that threshold.

    Works on the stored counts only; nothing is refitted.
    """
    if not 0.5 <= pi_thr <= 1:
        raise ConfigError(f"pi_thr must lie in [0.5, 1], got {pi_thr}")
    ids = tuple(int(j) for j in np.flatnonzero(_reaches(r.counts, r.B, pi_thr)))
    pfer = pfer_bound(r.q, pi_thr, r.p) if pi_thr > 0.5 else math.inf
    return StableSet(ids, tuple(r.names[j] for j in ids), pi_thr, pfer)


def _run_until_q(d: Dataset, spec: BoostSpec, q: int, cap: int, run_id: int) -> tuple:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ComplexityWarning)
        fit = _start(d, spec.family, spec.learners, spec.nu, "gradient", keep_data=True)
    y = _response(d, fit.family)
    seen = []
    while len(seen) < q:
        if fit.mstop >= cap:
            raise NumericalError(
                f"subsample {run_id}: only {len(seen)} of q={q} learners selected "
                f"after {cap} iterations; q is too large or the signal too weak"
            )
        step = _apply(fit, _gradient_step(fit, y), y)
        if step.selected not in seen:
            seen.append(step.selected)
    return tuple(seen)


def stabsel(d: Dataset, spec: BoostSpec, q: int, B: int = 100, pi_thr: Optional[float] = None,
            pfer: Optional[float] = None, seed: int = 0, iteration_cap: Optional[int] = None,
            jobs: Optional[int] = None) -> StabSelResult:
    """Stability selection with the gradient engine.

    Exactly one of ``pi_thr`` and ``pfer`` must be given.
    """
    if (pi_thr is None) == (pfer is None):
        raise ConfigError("give exactly one of pi_thr and pfer")
    if spec.engine != "gradient":
        raise ConfigError("stability selection runs the gradient engine only")
    p = len(spec.learners)
    if not 1 <= q <= p:
        raise ConfigError(f"need 1 <= q <= p={p}, got q={q}")
    if pi_thr is None:
        pi_thr = threshold_for_pfer(q, p, pfer)
    else:
        pfer = pfer_bound(q, pi_thr, p)
    cap = iteration_cap if iteration_cap is not None else max(1000, 100 * q)
    subsets = half_subsamples(d, B, seed)
    sets = parallel_map(lambda it: _run_until_q(d.subset(it[1]), spec, q, cap, it[0]),
                        enumerate(subsets), jobs)
    counts = np.zeros(p, dtype=int)
    for s in sets:
        counts[list(s)] += 1
    names = tuple(bl.name for bl in spec.learners)
    return StabSelResult(names, counts, q, B, float(pi_thr), float(pfer), seed, tuple(sets))
