"""Loss functions (families) for gradient and likelihood-based boosting.

Each family works on the link scale ``f``: identity for Gaussian, logit for
Binomial (``y`` in {0, 1}) and log for Poisson. Losses are negative
log-likelihoods up to terms that do not depend on ``f``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit, logit

from .exceptions import ConfigError, DataError, NumericalError


class Family:
    name = "family"
    link = "identity"

    def check_response(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise DataError(f"{self.name}: response must be finite")
        return y

    def loss(self, y, f):
        raise NotImplementedError

    def negative_gradient(self, y, f):
        raise NotImplementedError

    def offset(self, y) -> float:
        raise NotImplementedError

    def fisher_weight(self, f):
        raise NotImplementedError

    def inverse_link(self, f):
        return np.asarray(f, dtype=float)

    def risk(self, y, f) -> float:
        """Empirical risk: summed loss."""
        return float(np.sum(self.loss(y, f)))

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other)

    def __hash__(self):
        return hash(type(self))


def _finite(f):
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise NumericalError("non-finite predictor value")
    return f


class Gaussian(Family):
    """Squared error with a factor 1/2, so the negative gradient is the residual."""

    name = "gaussian"
    link = "identity"

    def loss(self, y, f):
        return 0.5 * (np.asarray(y, dtype=float) - f) ** 2

    def negative_gradient(self, y, f):
        return np.asarray(y, dtype=float) - _finite(f)

    def offset(self, y):
        return float(np.mean(self.check_response(y)))

    def fisher_weight(self, f):
        return np.ones_like(np.asarray(f, dtype=float))


class Binomial(Family):
    name = "binomial"
    link = "logit"

    def check_response(self, y):
        y = super().check_response(y)
        if not np.all((y == 0) | (y == 1)):
            raise DataError("binomial response must be coded 0/1")
        return y

    def loss(self, y, f):
        f = np.asarray(f, dtype=float)
        # log(1 + e^f) without overflow
        return -(np.asarray(y, dtype=float) * f - np.logaddexp(0.0, f))

    def negative_gradient(self, y, f):
        return np.asarray(y, dtype=float) - expit(_finite(f))

    def offset(self, y):
        y = self.check_response(y)
        p = y.mean()
        if p <= 0 or p >= 1:
            raise DataError("binomial response is degenerate (all 0 or all 1)")
        return float(logit(p))

    def fisher_weight(self, f):
        p = expit(np.asarray(f, dtype=float))
        return p * (1.0 - p)

    def inverse_link(self, f):
        return expit(np.asarray(f, dtype=float))


class Poisson(Family):
    name = "poisson"
    link = "log"

    def check_response(self, y):
        y = super().check_response(y)
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise DataError("poisson response must be non-negative integers")
        return y

    def loss(self, y, f):
        f = np.asarray(f, dtype=float)
        with np.errstate(over="ignore"):
            return -(np.asarray(y, dtype=float) * f - np.exp(f))

    def negative_gradient(self, y, f):
        return np.asarray(y, dtype=float) - np.exp(_finite(f))

    def offset(self, y):
        m = self.check_response(y).mean()
        if m <= 0:
            raise DataError("poisson response is all zero; offset log(mean) undefined")
        return float(np.log(m))

    def fisher_weight(self, f):
        return np.exp(np.asarray(f, dtype=float))

    def inverse_link(self, f):
        return np.exp(np.asarray(f, dtype=float))


FAMILIES = {"gaussian": Gaussian, "binomial": Binomial, "poisson": Poisson}


def get_family(name) -> Family:
    if isinstance(name, Family):
        return name
    try:
        return FAMILIES[str(name).lower()]()
    except KeyError:
        raise ConfigError(f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
