"""Base-learners: design matrices, penalized least squares and df calibration.

Three kinds are supported:

``linear``
    One or more numeric columns, optionally with an intercept column,
    unpenalized (``K = 0``).
``categorical``
    Full dummy coding of a factor (one column per level) with a ridge
    penalty ``K = I``.
``pspline``
    B-spline basis on equidistant knots with a difference penalty
    ``K = D'D``.

A :class:`BaseLearner` is the user-facing description; :func:`build_design`
binds it to a dataset and returns a :class:`Design`, which also carries what
is needed to evaluate the learner on new data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.interpolate import BSpline

from .data import Dataset
from .exceptions import ConfigError, DataError, NumericalError

KINDS = ("linear", "categorical", "pspline")

DF_TOL = 1e-6
LOG10_LAMBDA_RANGE = (-10.0, 12.0)
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class BaseLearner:
    """Description of one candidate effect.

    Parameters
    ----------
    columns : str or tuple of str
        Target column(s). ``categorical`` and ``pspline`` take exactly one.
    kind : {"linear", "categorical", "pspline"}
    intercept : bool
        Add an all-ones column (linear only).
    degree, n_knots, diff_order : int
        Spline degree, number of interior knots and difference-penalty order.
    lam : float
        Penalty weight. Ignored when ``df`` is given.
    df : float, optional
        Target degrees of freedom; ``lam`` is then calibrated on the data.
    name : str, optional
        Label used in outputs; defaults to ``kind(columns)``.
    """

    columns: tuple
    kind: str = "linear"
    intercept: bool = False
    degree: int = 3
    n_knots: int = 20
    diff_order: int = 2
    lam: float = 0.0
    df: Optional[float] = None
    name: Optional[str] = None

    def __post_init__(self):
        cols = (self.columns,) if isinstance(self.columns, str) else tuple(self.columns)
        object.__setattr__(self, "columns", cols)
        if not cols:
            raise ConfigError("base-learner needs at least one column")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown base-learner kind {self.kind!r}")
        if self.kind != "linear" and len(cols) != 1:
            raise ConfigError(f"{self.kind} base-learner takes exactly one column")
        if self.intercept and self.kind != "linear":
            raise ConfigError("intercept only applies to linear base-learners")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.df is not None and not self.df > 0:
            raise ConfigError("df must be positive")
        if self.kind == "pspline":
            if self.degree < 1:
                raise ConfigError("spline degree must be >= 1")
            if self.diff_order not in (1, 2):
                raise ConfigError("diff_order must be 1 or 2")
            if self.n_knots < self.diff_order:
                raise ConfigError("n_knots must be >= diff_order")
        if self.name is None:
            args = ",".join(cols + (("intercept",) if self.intercept else ()))
            object.__setattr__(self, "name", f"{self.kind}({args})")

    @classmethod
    def linear(cls, *columns, intercept=False, name=None):
        return cls(tuple(columns), "linear", intercept=intercept, name=name)

    @classmethod
    def categorical(cls, column, lam=0.0, df=None, name=None):
        return cls((column,), "categorical", lam=lam, df=df, name=name)

    @classmethod
    def pspline(cls, column, df=4.0, degree=3, n_knots=20, diff_order=2, lam=0.0, name=None):
        return cls((column,), "pspline", degree=degree, n_knots=n_knots,
                   diff_order=diff_order, lam=lam, df=df, name=name)

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns), "kind": self.kind, "intercept": self.intercept,
            "degree": self.degree, "n_knots": self.n_knots, "diff_order": self.diff_order,
            "lam": self.lam, "df": self.df, "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BaseLearner":
        d = dict(d)
        d["columns"] = tuple(d["columns"])
        return cls(**d)


def difference_matrix(n: int, order: int) -> np.ndarray:
    """``order``-th order difference operator, shape ``(n - order, n)``."""
    return np.diff(np.eye(n), n=order, axis=0)


def spline_knots(lo: float, hi: float, n_knots: int, degree: int) -> np.ndarray:
    """Full knot vector: ``n_knots`` equidistant interior knots in ``(lo, hi)``
    plus ``degree + 1`` equidistant boundary knots on each side."""
    h = (hi - lo) / (n_knots + 1)
    knots = lo + h * np.arange(-degree, n_knots + degree + 2)
    knots[degree], knots[-degree - 1] = lo, hi
    return knots


@dataclass
class Design:
    """A base-learner bound to training data.

    ``X`` is the design matrix and ``K`` the penalty matrix; ``lam`` is the
    (possibly calibrated) penalty weight. ``knots``/``bounds`` (splines) and
    ``n_levels`` (factors) let :meth:`basis` rebuild the design on new data.
    """

    learner: BaseLearner
    X: np.ndarray
    K: np.ndarray
    lam: float = 0.0
    knots: Optional[np.ndarray] = None
    bounds: Optional[tuple] = None
    n_levels: int = 0
    _chol: Optional[tuple] = field(default=None, repr=False)

    @property
    def width(self) -> int:
        return self.X.shape[1]

    @property
    def name(self) -> str:
        return self.learner.name

    def gram(self) -> np.ndarray:
        return self.X.T @ self.X

    def system(self, lam: Optional[float] = None) -> np.ndarray:
        lam = self.lam if lam is None else lam
        return self.gram() + lam * self.K

    def factor(self):
        """Cholesky factor of ``X'X + lam K``, computed once and cached."""
        if self._chol is None:
            unpenalized = self.lam == 0 or not np.any(self.K)
            self._chol = _cholesky(self.system(), self.name, unpenalized)
        return self._chol

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self.factor(), rhs)

    def basis(self, d: Dataset) -> np.ndarray:
        """Design matrix of this learner evaluated on ``d``."""
        bl = self.learner
        if bl.kind == "linear":
            X = np.column_stack([_numeric_column(d, c) for c in bl.columns])
            if bl.intercept:
                X = np.column_stack([np.ones(d.rows), X])
            return X
        if bl.kind == "categorical":
            codes = _categorical_codes(d, bl.columns[0])
            if codes.size and codes.max() >= self.n_levels:
                raise DataError(f"unseen level in column {bl.columns[0]!r}")
            return np.eye(self.n_levels)[codes]
        return bspline_basis(_numeric_column(d, bl.columns[0]), self.knots, bl.degree, self.bounds)

    def to_dict(self) -> dict:
        return {
            "learner": self.learner.to_dict(),
            "lam": self.lam,
            "knots": None if self.knots is None else self.knots.tolist(),
            "bounds": None if self.bounds is None else list(self.bounds),
            "n_levels": self.n_levels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Design":
        """Rebuild an evaluation-only design (no training matrix)."""
        bl = BaseLearner.from_dict(d["learner"])
        return cls(
            learner=bl, X=np.empty((0, 0)), K=np.empty((0, 0)), lam=d["lam"],
            knots=None if d["knots"] is None else np.asarray(d["knots"], dtype=float),
            bounds=None if d["bounds"] is None else tuple(d["bounds"]),
            n_levels=d["n_levels"],
        )


def _cholesky(A: np.ndarray, name: str, check_rank: bool = True):
    try:
        c = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError:
        raise NumericalError(
            f"base-learner {name}: singular penalized system; the design is collinear, "
            "set df or a positive lam to add a ridge penalty"
        ) from None
    diag = np.diag(c[0]) ** 2
    if check_rank and diag.min() <= 1e-13 * diag.max():
        raise NumericalError(
            f"base-learner {name}: numerically singular penalized system; "
            "set df or a positive lam to add a ridge penalty"
        )
    return c


def _numeric_column(d: Dataset, name: str) -> np.ndarray:
    spec = d.spec(name)
    if spec.kind != "numeric":
        raise DataError(f"column {name!r} is categorical; expected numeric")
    return d.column(name)


def _categorical_codes(d: Dataset, name: str) -> np.ndarray:
    spec = d.spec(name)
    if spec.kind != "categorical":
        raise DataError(f"column {name!r} is numeric; expected categorical")
    return d.column(name).astype(int)


def bspline_basis(x, knots, degree, bounds) -> np.ndarray:
    """Evaluate all B-spline basis functions at ``x``.

    Outside ``bounds`` each basis function is continued linearly from its
    value and slope at the nearest boundary.
    """
    x = np.asarray(x, dtype=float)
    nb = len(knots) - degree - 1
    spl = BSpline(knots, np.eye(nb), degree, extrapolate=True)
    lo, hi = bounds
    out = np.empty((x.size, nb))
    inside = (x >= lo) & (x <= hi)
    if inside.any():
        out[inside] = spl(x[inside])
    for edge, mask in ((lo, x < lo), (hi, x > hi)):
        if mask.any():
            val = spl(np.array([edge]))[0]
            slope = spl.derivative()(np.array([edge]))[0]
            out[mask] = val + (x[mask] - edge)[:, None] * slope
    return out


def build_design(bl: BaseLearner, d: Dataset) -> Design:
    """Bind ``bl`` to ``d``: build ``X`` and ``K`` and calibrate ``lam`` if ``df`` is set."""
    for c in bl.columns:
        d.column_index(c)
    if bl.kind == "linear":
        X = np.column_stack([_numeric_column(d, c) for c in bl.columns])
        if bl.intercept:
            X = np.column_stack([np.ones(d.rows), X])
        design = Design(bl, X, np.zeros((X.shape[1], X.shape[1])))
    elif bl.kind == "categorical":
        spec = d.spec(bl.columns[0])
        codes = _categorical_codes(d, bl.columns[0])
        X = np.eye(spec.n_levels)[codes]
        design = Design(bl, X, np.eye(spec.n_levels), n_levels=spec.n_levels)
    else:
        x = _numeric_column(d, bl.columns[0])
        lo, hi = float(x.min()), float(x.max())
        if not hi > lo:
            raise DataError(f"column {bl.columns[0]!r} is constant; cannot place spline knots")
        knots = spline_knots(lo, hi, bl.n_knots, bl.degree)
        X = bspline_basis(x, knots, bl.degree, (lo, hi))
        D = difference_matrix(X.shape[1], bl.diff_order)
        design = Design(bl, X, D.T @ D, knots=knots, bounds=(lo, hi))
    design.lam = calibrate_lambda(design, bl.df) if bl.df is not None else float(bl.lam)
    return design


@dataclass
class FittedComponent:
    learner_id: int
    coefficients: np.ndarray
    rss: float


def fit_to_target(design: Design, u, learner_id: int = 0) -> FittedComponent:
    """Penalized least-squares fit ``(X'X + lam K)^-1 X'u`` of one learner to ``u``."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] != design.X.shape[0]:
        raise DataError(f"target length {u.shape[0]} != design rows {design.X.shape[0]}")
    coef = design.solve(design.X.T @ u)
    r = u - design.X @ coef
    return FittedComponent(learner_id, coef, float(r @ r))


def evaluate(component: FittedComponent, design: Design, newdata: Dataset) -> np.ndarray:
    return design.basis(newdata) @ component.coefficients


def _smoother_trace_terms(G: np.ndarray, K: np.ndarray, lam: float):
    # with S = X A^-1 X', A = G + lam K, G = X'X:
    # tr(S) = tr(A^-1 G), tr(S'S) = tr((A^-1 G)^2)
    A = G + lam * K
    try:
        c = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError:
        raise NumericalError(f"singular system X'X + lam K at lam={lam:g}") from None
    M = linalg.cho_solve(c, G)
    return np.trace(M), np.sum(M * M.T)


def df_of_lambda(design: Design, lam: float, G: Optional[np.ndarray] = None) -> float:
    """Degrees of freedom ``trace(2S - S'S)`` of the learner at penalty ``lam``.

    Evaluated on the ``width x width`` system; ``S`` itself is never formed.
    """
    if lam < 0:
        raise ConfigError("lam must be >= 0")
    G = design.gram() if G is None else G
    tr, tr2 = _smoother_trace_terms(G, design.K, lam)
    return float(2.0 * tr - tr2)


def null_space_dim(K: np.ndarray) -> int:
    if not K.size:
        return 0
    ev = np.linalg.eigvalsh(K)
    return int(np.sum(ev <= 1e-9 * max(ev.max(), 1.0)))


def calibrate_lambda(design: Design, df_target: float) -> float:
    """Penalty weight giving ``df_target`` degrees of freedom.

    Bisects on ``log10(lam)`` over ``[-10, 12]``; df is decreasing in ``lam``.
    """
    G = design.gram()
    name = design.name
    null_dim = null_space_dim(design.K)
    try:
        df0 = df_of_lambda(design, 0.0, G)
    except NumericalError:
        df0 = None
    if df0 is not None and abs(df0 - df_target) <= DF_TOL:
        return 0.0
    lo, hi = LOG10_LAMBDA_RANGE
    df_hi_lam = df_of_lambda(design, 10.0 ** hi, G)
    df_lo_lam = df_of_lambda(design, 10.0 ** lo, G)
    upper = df0 if df0 is not None else df_lo_lam
    if not (df_target > null_dim and df_target <= upper + DF_TOL) or not np.any(design.K):
        raise ConfigError(
            f"base-learner {name}: df={df_target:g} is not attainable; "
            f"attainable interval is ({max(null_dim, df_hi_lam):.6g}, {upper:.6g}]"
        )
    if df_target >= df_lo_lam:
        return 10.0 ** lo
    if df_target < df_hi_lam - DF_TOL:
        raise ConfigError(
            f"base-learner {name}: df={df_target:g} needs lam > 1e12; "
            f"attainable interval is [{df_hi_lam:.6g}, {upper:.6g}]"
        )
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        val = df_of_lambda(design, 10.0 ** mid, G)
        if abs(val - df_target) <= DF_TOL:
            return 10.0 ** mid
        if val > df_target:
            lo = mid
        else:
            hi = mid
    return 10.0 ** (0.5 * (lo + hi))


def design_df(design: Design) -> float:
    return df_of_lambda(design, design.lam)
