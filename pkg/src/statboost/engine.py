"""Component-wise gradient boosting and likelihood-based boosting.

Both engines share one loop: start from a constant offset, fit every
base-learner to the current working target, update only the best one and
record the step. The full history is kept so a fit can be truncated,
continued, or turned into a coefficient path after the fact.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import linalg

from .data import Dataset
from .exceptions import ComplexityWarning, ConfigError, DataError, NumericalError
from .families import Family, get_family
from .learners import BaseLearner, Design, build_design, design_df

ENGINES = ("gradient", "likelihood")


@dataclass(frozen=True)
class Step:
    """One boosting iteration.

    ``coef`` is the raw base-learner estimate; the amount added to the
    component is ``scale * coef`` where ``scale`` is the step length for the
    gradient engine and 1 for the likelihood engine.
    """

    selected: int
    coef: np.ndarray
    risk: float


class Stepper:
    """Vectorized component-wise fitting over a fixed list of designs."""

    def __init__(self, designs: Sequence[Design]):
        self.designs = list(designs)
        widths = [ds.width for ds in self.designs]
        self.starts = np.concatenate([[0], np.cumsum(widths)[:-1]]).astype(int)
        self.widths = widths
        self.X = np.hstack([ds.X for ds in self.designs])
        # rows of P map a target u to every learner's coefficients at once
        self.P = np.vstack([ds.solve(ds.X.T) for ds in self.designs])

    def block(self, j: int) -> slice:
        return slice(self.starts[j], self.starts[j] + self.widths[j])

    def fit_all(self, u):
        """Coefficients and fitted values of every learner fitted to ``u``."""
        c = self.P @ u
        F = np.add.reduceat(self.X * c, self.starts, axis=1)
        return c, F

    def best(self, u):
        """Index minimizing the residual sum of squares; ties go to the lowest index."""
        c, F = self.fit_all(u)
        rss = np.sum((u[:, None] - F) ** 2, axis=0)
        j = int(np.argmin(rss))
        return j, c[self.block(j)].copy(), rss

    def fitted(self, j: int, coef) -> np.ndarray:
        return self.designs[j].X @ coef


@dataclass
class ModelFit:
    """A boosted additive model and its full iteration history.

    ``coefs[j]`` is the accumulated coefficient vector of learner ``j``;
    ``f`` is the training predictor (kept with the data so fitting can be
    continued by :func:`set_mstop`).
    """

    family: Family
    designs: List[Design]
    offset: float
    nu: float
    engine: str
    coefs: List[np.ndarray]
    history: List[Step]
    initial_risk: float
    penalties: Optional[np.ndarray] = None
    seed: int = 0
    data: Optional[Dataset] = None
    f: Optional[np.ndarray] = None
    _stepper: Optional[Stepper] = field(default=None, repr=False, compare=False)

    @property
    def mstop(self) -> int:
        return len(self.history)

    @property
    def scale(self) -> float:
        return self.nu if self.engine == "gradient" else 1.0

    @property
    def names(self) -> list:
        return [ds.name for ds in self.designs]

    @property
    def selected(self) -> np.ndarray:
        return np.array([s.selected for s in self.history], dtype=int)

    @property
    def risk(self) -> np.ndarray:
        """Training risk after 0, 1, ..., mstop iterations."""
        return np.array([self.initial_risk] + [s.risk for s in self.history])

    def increment(self, step: Step) -> np.ndarray:
        return self.scale * step.coef

    def stepper(self) -> Stepper:
        if self._stepper is None:
            self._stepper = Stepper(self.designs)
        return self._stepper


def _as_designs(d: Dataset, learners) -> List[Design]:
    if not learners:
        raise ConfigError("at least one base-learner is required")
    return [bl if isinstance(bl, Design) else build_design(bl, d) for bl in learners]


def _check_complexity(designs: Sequence[Design]) -> None:
    dfs = [design_df(ds) for ds in designs]
    if max(dfs) - min(dfs) > 1e-3:
        warnings.warn(
            "base-learners differ in degrees of freedom "
            f"({min(dfs):.3g} to {max(dfs):.3g}); selection may favour the more flexible ones",
            ComplexityWarning, stacklevel=3,
        )


def _response(d: Dataset, family: Family) -> np.ndarray:
    if d.response is None:
        raise DataError("dataset has no response")
    return family.check_response(d.response)


def _start(d, family, learners, nu, engine, penalties=None, seed=0, keep_data=True) -> ModelFit:
    family = get_family(family)
    y = _response(d, family)
    designs = _as_designs(d, learners)
    offset = family.offset(y)
    f = np.full(d.rows, offset)
    return ModelFit(
        family=family, designs=designs, offset=offset, nu=nu, engine=engine,
        coefs=[np.zeros(ds.width) for ds in designs], history=[],
        initial_risk=family.risk(y, f), penalties=penalties, seed=seed,
        data=d if keep_data else None, f=f,
    )


def _gradient_step(fit: ModelFit, y: np.ndarray) -> Step:
    st = fit.stepper()
    u = fit.family.negative_gradient(y, fit.f)
    j, coef, _ = st.best(u)
    return Step(j, coef, np.nan)


def _likelihood_step(fit: ModelFit, y: np.ndarray) -> Step:
    fam = fit.family
    u = fam.negative_gradient(y, fit.f)
    w = fam.fisher_weight(fit.f)
    best = None
    for j, ds in enumerate(fit.designs):
        Xw = ds.X * w[:, None]
        A = ds.X.T @ Xw + fit.penalties[j] * np.eye(ds.width)
        try:
            inc = linalg.solve(A, ds.X.T @ u, assume_a="pos")
        except linalg.LinAlgError:
            raise NumericalError(f"singular Fisher-scoring system for base-learner {ds.name}") from None
        r = fam.risk(y, fit.f + ds.X @ inc)
        if best is None or r < best[2]:
            best = (j, inc, r)
    return Step(best[0], best[1], np.nan)


def _apply(fit: ModelFit, step: Step, y: Optional[np.ndarray]) -> Step:
    """Add one step to ``fit`` in place; the same arithmetic serves fitting and replay."""
    j = step.selected
    fit.coefs[j] = fit.coefs[j] + fit.scale * step.coef
    if fit.f is not None:
        fit.f = fit.f + fit.scale * fit.stepper().fitted(j, step.coef)
    if y is not None:
        risk = fit.family.risk(y, fit.f)
        if not np.isfinite(risk):
            raise NumericalError(f"non-finite training risk at iteration {fit.mstop + 1}")
        step = Step(j, step.coef, risk)
    fit.history.append(step)
    return step


def _advance(fit: ModelFit, iterations: int) -> ModelFit:
    y = _response(fit.data, fit.family)
    take = _gradient_step if fit.engine == "gradient" else _likelihood_step
    for _ in range(iterations):
        _apply(fit, take(fit, y), y)
    return fit


def fit_gradient(d: Dataset, family, learners, nu: float = 0.1, mstop: int = 100,
                 seed: int = 0, keep_data: bool = True) -> ModelFit:
    """Component-wise gradient boosting.

    Each iteration fits all learners to the negative gradient by penalized
    least squares, picks the one with the smallest residual sum of squares
    (lowest index on ties) and adds ``nu`` times its fit.

    Parameters
    ----------
    d : Dataset
    family : Family or str
    learners : list of BaseLearner or Design
    nu : float
        Step length in (0, 1].
    mstop : int
        Number of iterations; 0 gives the offset-only model.
    seed : int
        Recorded for provenance; the algorithm itself is deterministic.
    keep_data : bool
        Retain the training data so the fit can be continued later.
    """
    if not 0 < nu <= 1:
        raise ConfigError("nu must lie in (0, 1]")
    if mstop < 0:
        raise ConfigError("mstop must be >= 0")
    fit = _start(d, family, learners, nu, "gradient", seed=seed)
    _check_complexity(fit.designs)
    _advance(fit, mstop)
    if not keep_data:
        fit.data = None
    return fit


def fit_likelihood(d: Dataset, family, learners, penalty: Union[float, Sequence[float]],
                   mstop: int = 100, keep_data: bool = True) -> ModelFit:
    """Likelihood-based boosting with one penalized Fisher-scoring step per candidate.

    For every learner the candidate update is
    ``(X'WX + penalty_j I)^-1 X'u`` at the current predictor; the candidate
    with the smallest loss (largest likelihood) after its update is applied
    in full. ``penalty`` may be one value or one per learner.
    """
    if mstop < 0:
        raise ConfigError("mstop must be >= 0")
    for bl in learners:
        kind = bl.learner.kind if isinstance(bl, Design) else bl.kind
        if kind == "pspline":
            raise ConfigError("the likelihood engine supports linear and categorical learners only")
    pen = np.broadcast_to(np.asarray(penalty, dtype=float), (len(learners),)).copy()
    if np.any(pen < 0):
        raise ConfigError("penalty must be >= 0")
    fit = _start(d, family, learners, 1.0, "likelihood", penalties=pen)
    _advance(fit, mstop)
    if not keep_data:
        fit.data = None
    return fit


def equivalent_penalties(designs: Sequence[Design], nu: float) -> np.ndarray:
    """Per-learner penalties ``x'x (1 - nu) / nu`` that make a Gaussian
    likelihood step equal to a gradient step of length ``nu``.

    Exact for single-column learners; wider learners use the mean diagonal
    of ``X'X`` as a heuristic.
    """
    if not 0 < nu <= 1:
        raise ConfigError("nu must lie in (0, 1]")
    return np.array([np.mean(np.diag(ds.gram())) * (1 - nu) / nu for ds in designs])


def _link_from_bases(offset: float, coefs, bases, n: int) -> np.ndarray:
    f = np.full(n, offset)
    for B, c in zip(bases, coefs):
        if np.any(c):
            f = f + B @ c
    return f


def predict(fit: ModelFit, newdata: Optional[Dataset] = None, scale: str = "link",
            bases: Optional[list] = None) -> np.ndarray:
    """Predictor ``offset + sum_j h_j(x)`` on the link or response scale.

    ``bases`` may hold precomputed design matrices of ``newdata``, one per
    learner.
    """
    if scale not in ("link", "response"):
        raise ConfigError("scale must be 'link' or 'response'")
    if newdata is None:
        newdata = fit.data
        if newdata is None:
            raise DataError("no data to predict on")
    if bases is None:
        bases = [ds.basis(newdata) if np.any(c) else None for ds, c in zip(fit.designs, fit.coefs)]
    f = _link_from_bases(fit.offset, fit.coefs, bases, newdata.rows)
    return fit.family.inverse_link(f) if scale == "response" else f


def set_mstop(fit: ModelFit, m: int) -> ModelFit:
    """Return a copy of ``fit`` with ``m`` iterations.

    Fewer iterations replay the stored history; more continue fitting from
    the stored state, which requires the training data.
    """
    if m < 0:
        raise ConfigError("mstop must be >= 0")
    if m > fit.mstop:
        if fit.data is None:
            raise DataError("cannot continue fitting: training data was not retained")
        new = replace(fit, coefs=[c.copy() for c in fit.coefs], history=list(fit.history),
                      f=fit.f.copy())
        new._stepper = fit._stepper
        return _advance(new, m - fit.mstop)
    new = replace(
        fit, coefs=[np.zeros(ds.width) for ds in fit.designs], history=[],
        f=None if fit.f is None else np.full(fit.f.shape, fit.offset),
    )
    new._stepper = fit._stepper
    if new.f is not None and new._stepper is None:
        new._stepper = fit.stepper()
    for step in fit.history[:m]:
        _apply(new, step, None)
    return new


def varimp(fit: ModelFit) -> np.ndarray:
    """Training-risk reduction attributed to each learner."""
    risk = fit.risk
    out = np.zeros(len(fit.designs))
    for m, step in enumerate(fit.history):
        out[step.selected] += risk[m] - risk[m + 1]
    return out


def selection_frequencies(fit: ModelFit) -> np.ndarray:
    counts = np.bincount(fit.selected, minlength=len(fit.designs))
    return counts / max(fit.mstop, 1)


@dataclass(frozen=True)
class BoostSpec:
    """Everything needed to fit a model except the number of iterations.

    For the likelihood engine ``penalty="nu"`` derives per-learner penalties
    from ``nu`` via :func:`equivalent_penalties` on the data being fitted.
    """

    family: Union[Family, str]
    learners: tuple
    nu: float = 0.1
    engine: str = "gradient"
    penalty: Optional[Union[float, tuple, str]] = None

    def __post_init__(self):
        object.__setattr__(self, "learners", tuple(self.learners))
        object.__setattr__(self, "family", get_family(self.family))
        if self.engine not in ENGINES:
            raise ConfigError(f"unknown engine {self.engine!r}")
        if self.engine == "likelihood" and self.penalty is None:
            raise ConfigError("the likelihood engine needs a penalty")

    def fit(self, d: Dataset, mstop: int, keep_data: bool = True) -> ModelFit:
        if self.engine == "gradient":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ComplexityWarning)
                return fit_gradient(d, self.family, self.learners, self.nu, mstop, keep_data=keep_data)
        learners = self.learners
        penalty = self.penalty
        if isinstance(penalty, str):
            if penalty != "nu":
                raise ConfigError(f"unknown penalty rule {penalty!r}")
            learners = _as_designs(d, learners)
            penalty = equivalent_penalties(learners, self.nu)
        return fit_likelihood(d, self.family, learners, penalty, mstop, keep_data=keep_data)
