"""Cyclic boosting of a Gaussian location-scale model.

The mean ``mu`` (identity link) and the standard deviation ``sigma`` (log
link) each get their own additive predictor and their own stopping
iteration. Iterations alternate: one step on ``mu`` with ``sigma`` held
fixed, then one step on ``log sigma`` with ``mu`` held fixed. Once one
predictor has used up its iterations the other carries on alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .data import Dataset, ResamplingPlan, make_folds
from .engine import Stepper, _as_designs, _link_from_bases
from .exceptions import BoostError, ConfigError, DataError, NumericalError
from .learners import Design
from .tuning import _check_grid, parallel_map

_HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def gaussian_nll(y, mu, log_sigma) -> np.ndarray:
    """Per-observation negative log-likelihood of ``N(mu, exp(log_sigma)**2)``."""
    r = np.asarray(y, dtype=float) - mu
    return log_sigma + 0.5 * r * r * np.exp(-2.0 * log_sigma) + _HALF_LOG_2PI


def mu_gradient(y, mu, log_sigma) -> np.ndarray:
    """Negative derivative of the NLL with respect to ``mu``."""
    return (np.asarray(y, dtype=float) - mu) * np.exp(-2.0 * log_sigma)


def sigma_gradient(y, mu, log_sigma) -> np.ndarray:
    """Negative derivative of the NLL with respect to ``log sigma``."""
    r = np.asarray(y, dtype=float) - mu
    return r * r * np.exp(-2.0 * log_sigma) - 1.0


@dataclass(frozen=True)
class LssStep:
    predictor: str
    selected: int
    coef: np.ndarray
    nll: float


@dataclass
class LssFit:
    """Two additive predictors, one for ``mu`` and one for ``log sigma``.

    ``nll`` holds the summed training NLL at the start and after every
    sub-step, in the order the sub-steps were taken.
    """

    designs_mu: List[Design]
    designs_sigma: List[Design]
    offset_mu: float
    offset_sigma: float
    nu: float
    coefs_mu: List[np.ndarray]
    coefs_sigma: List[np.ndarray]
    history: List[LssStep] = field(default_factory=list)
    initial_nll: float = 0.0
    eta_mu: Optional[np.ndarray] = None
    eta_sigma: Optional[np.ndarray] = None
    _steppers: dict = field(default_factory=dict, repr=False)

    @property
    def mstop_mu(self) -> int:
        return sum(s.predictor == "mu" for s in self.history)

    @property
    def mstop_sigma(self) -> int:
        return sum(s.predictor == "sigma" for s in self.history)

    @property
    def nll(self) -> np.ndarray:
        return np.array([self.initial_nll] + [s.nll for s in self.history])

    def selected(self, predictor: str) -> list:
        return [s.selected for s in self.history if s.predictor == predictor]

    def copy(self) -> "LssFit":
        return LssFit(
            self.designs_mu, self.designs_sigma, self.offset_mu, self.offset_sigma, self.nu,
            [c.copy() for c in self.coefs_mu], [c.copy() for c in self.coefs_sigma],
            list(self.history), self.initial_nll,
            None if self.eta_mu is None else self.eta_mu.copy(),
            None if self.eta_sigma is None else self.eta_sigma.copy(),
            self._steppers,
        )

    def _stepper(self, predictor: str) -> Stepper:
        if predictor not in self._steppers:
            ds = self.designs_mu if predictor == "mu" else self.designs_sigma
            self._steppers[predictor] = Stepper(ds)
        return self._steppers[predictor]


def _lss_start(d: Dataset, learners_mu, learners_sigma, nu) -> LssFit:
    if d.response is None:
        raise DataError("dataset has no response")
    y = d.response
    sd = float(np.std(y))
    if not sd > 0:
        raise DataError("response is constant; log sd offset undefined")
    off_mu, off_sigma = float(np.mean(y)), math.log(sd)
    dm = _as_designs(d, learners_mu) if learners_mu else []
    dsig = _as_designs(d, learners_sigma) if learners_sigma else []
    eta_mu, eta_sigma = np.full(d.rows, off_mu), np.full(d.rows, off_sigma)
    return LssFit(
        dm, dsig, off_mu, off_sigma, nu,
        [np.zeros(x.width) for x in dm], [np.zeros(x.width) for x in dsig],
        initial_nll=float(np.sum(gaussian_nll(y, eta_mu, eta_sigma))),
        eta_mu=eta_mu, eta_sigma=eta_sigma,
    )


def _lss_step(fit: LssFit, y: np.ndarray, predictor: str) -> None:
    st = fit._stepper(predictor)
    if predictor == "mu":
        u = mu_gradient(y, fit.eta_mu, fit.eta_sigma)
    else:
        u = sigma_gradient(y, fit.eta_mu, fit.eta_sigma)
    j, coef, _ = st.best(u)
    delta = fit.nu * st.fitted(j, coef)
    if predictor == "mu":
        fit.coefs_mu[j] = fit.coefs_mu[j] + fit.nu * coef
        fit.eta_mu = fit.eta_mu + delta
    else:
        fit.coefs_sigma[j] = fit.coefs_sigma[j] + fit.nu * coef
        fit.eta_sigma = fit.eta_sigma + delta
    nll = float(np.sum(gaussian_nll(y, fit.eta_mu, fit.eta_sigma)))
    if not math.isfinite(nll):
        raise NumericalError(f"non-finite likelihood at {predictor} step {len(fit.history) + 1}")
    fit.history.append(LssStep(predictor, j, coef, nll))


def _run(fit: LssFit, y, mu_steps: int, sigma_steps: int, start: int = 0) -> LssFit:
    # iteration m (1-based, counted from the very start) updates mu if m <= mu_steps, then sigma
    for m in range(start + 1, max(mu_steps, sigma_steps) + 1):
        if m <= mu_steps:
            _lss_step(fit, y, "mu")
        if m <= sigma_steps:
            _lss_step(fit, y, "sigma")
    return fit


def fit_lss(d: Dataset, learners_mu, learners_sigma, nu: float = 0.1,
            mstop_mu: int = 100, mstop_sigma: int = 100) -> LssFit:
    """Fit the Gaussian location-scale model by cyclic component-wise boosting.

    Parameters
    ----------
    learners_mu, learners_sigma : list of BaseLearner
        Candidates for each predictor; may be empty if the matching mstop is 0.
    nu : float
        Step length shared by both predictors.
    mstop_mu, mstop_sigma : int
        Iterations for each predictor.
    """
    if not 0 < nu <= 1:
        raise ConfigError("nu must lie in (0, 1]")
    if mstop_mu < 0 or mstop_sigma < 0:
        raise ConfigError("mstops must be >= 0")
    if mstop_mu > 0 and not learners_mu:
        raise ConfigError("mstop_mu > 0 needs learners for mu")
    if mstop_sigma > 0 and not learners_sigma:
        raise ConfigError("mstop_sigma > 0 needs learners for sigma")
    fit = _lss_start(d, learners_mu, learners_sigma, nu)
    return _run(fit, d.response, mstop_mu, mstop_sigma)


def predict_lss(fit: LssFit, newdata: Dataset, bases: Optional[tuple] = None):
    """Return ``(mu, sigma)`` on ``newdata``; ``sigma`` is always positive."""
    if bases is None:
        bases = (
            [x.basis(newdata) if np.any(c) else None for x, c in zip(fit.designs_mu, fit.coefs_mu)],
            [x.basis(newdata) if np.any(c) else None for x, c in zip(fit.designs_sigma, fit.coefs_sigma)],
        )
    mu = _link_from_bases(fit.offset_mu, fit.coefs_mu, bases[0], newdata.rows)
    eta = _link_from_bases(fit.offset_sigma, fit.coefs_sigma, bases[1], newdata.rows)
    return mu, np.exp(eta)


def lss_test_risk(fit: LssFit, test: Dataset, bases: Optional[tuple] = None) -> float:
    """Mean Gaussian NLL of ``fit`` on ``test``."""
    mu, sigma = predict_lss(fit, test, bases)
    return float(np.mean(gaussian_nll(test.response, mu, np.log(sigma))))


@dataclass(frozen=True)
class LssSpec:
    learners_mu: tuple
    learners_sigma: tuple
    nu: float = 0.1


@dataclass(frozen=True)
class LssTuneResult:
    mstop_mu: int
    mstop_sigma: int
    surface: np.ndarray
    grid_mu: tuple
    grid_sigma: tuple
    risks: np.ndarray


def _fold_surface(d: Dataset, spec: LssSpec, grid_mu, grid_sigma, fold_id, train, test):
    try:
        tr, te = d.subset(train), d.subset(test)
        y = tr.response
        base = _lss_start(tr, spec.learners_mu, spec.learners_sigma, spec.nu)
        bases = ([x.basis(te) for x in base.designs_mu], [x.basis(te) for x in base.designs_sigma])
        out = np.empty((len(grid_mu), len(grid_sigma)))
        # a fit at (a, b) runs min(a, b) joint iterations, then one predictor alone;
        # checkpoint the joint path at every needed min and branch from there
        mins = sorted({min(a, b) for a in grid_mu for b in grid_sigma})
        state, at = base, 0
        for k in mins:
            state = _run(state, y, k, k, start=at)
            at = k
            for ia, a in enumerate(grid_mu):
                if a == k:
                    branch = state.copy()
                    done = k
                    for ib, b in enumerate(grid_sigma):
                        if b >= k:
                            branch = _run(branch, y, k, b, start=done)
                            done = b
                            out[ia, ib] = lss_test_risk(branch, te, bases)
            for ib, b in enumerate(grid_sigma):
                if b == k:
                    branch = state.copy()
                    done = k
                    for ia, a in enumerate(grid_mu):
                        if a > k:
                            branch = _run(branch, y, a, k, start=done)
                            done = a
                            out[ia, ib] = lss_test_risk(branch, te, bases)
        return out
    except BoostError as e:
        raise type(e)(f"fold {fold_id}: {e}") from e


def tune_lss(d: Dataset, spec: LssSpec, plan: Optional[ResamplingPlan] = None,
             grid_mu: Sequence[int] = tuple(range(0, 101, 10)),
             grid_sigma: Sequence[int] = tuple(range(0, 101, 10)),
             jobs: Optional[int] = None) -> LssTuneResult:
    """Choose ``(mstop_mu, mstop_sigma)`` by resampled out-of-sample NLL.

    Every grid pair is evaluated on every fold. Ties prefer the smaller
    total ``mstop_mu + mstop_sigma``, then the smaller ``mstop_mu``.
    """
    plan = plan or ResamplingPlan()
    grid_mu, grid_sigma = _check_grid(grid_mu), _check_grid(grid_sigma)
    if d.response is None:
        raise DataError("dataset has no response")
    folds = make_folds(d, plan)
    risks = np.stack(parallel_map(
        lambda it: _fold_surface(d, spec, grid_mu, grid_sigma, it[0], *it[1]),
        enumerate(folds), jobs))
    surface = risks.mean(axis=0)
    best = min(
        ((surface[a, b], grid_mu[a] + grid_sigma[b], grid_mu[a], grid_sigma[b])
         for a in range(len(grid_mu)) for b in range(len(grid_sigma))),
    )
    return LssTuneResult(best[2], best[3], surface, grid_mu, grid_sigma, risks)
