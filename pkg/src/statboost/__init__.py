"""Component-wise boosting for structured additive regression models."""

from .data import (ColumnSpec, Dataset, ResamplingPlan, apply_scaling, half_subsamples,
                   load_csv, make_folds, standardize)
from .engine import (BoostSpec, ModelFit, equivalent_penalties, fit_gradient, fit_likelihood,
                     selection_frequencies,
                     predict, set_mstop, varimp)
from .exceptions import BoostError, ComplexityWarning, ConfigError, DataError, NumericalError
from .families import Binomial, Family, Gaussian, Poisson, get_family
from .learners import (BaseLearner, Design, FittedComponent, build_design, calibrate_lambda,
                       df_of_lambda, evaluate, fit_to_target)
from .lss import (LssFit, LssSpec, fit_lss, gaussian_nll, lss_test_risk, mu_gradient, predict_lss,
                  sigma_gradient, tune_lss)
from .paths import PathMatrix, arc_length, coefficient_path, diagonal_dominance
from .stability import StabSelResult, pfer_bound, stabsel, stable_set, threshold_for_pfer
from .tuning import RiskGrid, cvrisk, select_mstop, tune_grid2

__version__ = "0.1.0"
