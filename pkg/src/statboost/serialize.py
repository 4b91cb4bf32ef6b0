"""JSON and CSV export of fitted models."""

from __future__ import annotations

import csv
import json

import numpy as np

from .data import ColumnSpec
from .engine import ModelFit, Step
from .families import get_family
from .learners import Design
from .lss import LssFit, LssStep
from .paths import PathMatrix


def _floats(a) -> list:
    return [float(v) for v in np.ravel(a)]


def model_to_dict(fit: ModelFit, columns=()) -> dict:
    return {
        "type": "boost",
        "family": fit.family.name,
        "engine": fit.engine,
        "nu": fit.nu,
        "offset": fit.offset,
        "mstop": fit.mstop,
        "seed": fit.seed,
        "penalties": None if fit.penalties is None else _floats(fit.penalties),
        "columns": [c.to_dict() for c in columns],
        "learners": [ds.to_dict() for ds in fit.designs],
        "coefficients": {ds.name: _floats(c) for ds, c in zip(fit.designs, fit.coefs)},
        "history": {
            "initial_risk": fit.initial_risk,
            "selected": [s.selected for s in fit.history],
            "coef": [_floats(s.coef) for s in fit.history],
            "risk": [s.risk for s in fit.history],
        },
    }


def model_from_dict(d: dict) -> tuple:
    """Rebuild ``(ModelFit, columns)``; the fit can predict but not continue."""
    designs = [Design.from_dict(x) for x in d["learners"]]
    h = d["history"]
    fit = ModelFit(
        family=get_family(d["family"]), designs=designs, offset=d["offset"], nu=d["nu"],
        engine=d["engine"],
        coefs=[np.array(d["coefficients"][ds.name], dtype=float) for ds in designs],
        history=[Step(j, np.array(c, dtype=float), r)
                 for j, c, r in zip(h["selected"], h["coef"], h["risk"])],
        initial_risk=h["initial_risk"],
        penalties=None if d["penalties"] is None else np.array(d["penalties"]),
        seed=d["seed"],
    )
    return fit, [ColumnSpec.from_dict(c) for c in d["columns"]]


def lss_to_dict(fit: LssFit, columns=()) -> dict:
    return {
        "type": "lss",
        "nu": fit.nu,
        "offset_mu": fit.offset_mu,
        "offset_sigma": fit.offset_sigma,
        "mstop_mu": fit.mstop_mu,
        "mstop_sigma": fit.mstop_sigma,
        "columns": [c.to_dict() for c in columns],
        "learners_mu": [x.to_dict() for x in fit.designs_mu],
        "learners_sigma": [x.to_dict() for x in fit.designs_sigma],
        "coefficients_mu": {x.name: _floats(c) for x, c in zip(fit.designs_mu, fit.coefs_mu)},
        "coefficients_sigma": {x.name: _floats(c) for x, c in zip(fit.designs_sigma, fit.coefs_sigma)},
        "history": {
            "initial_nll": fit.initial_nll,
            "predictor": [s.predictor for s in fit.history],
            "selected": [s.selected for s in fit.history],
            "coef": [_floats(s.coef) for s in fit.history],
            "nll": [s.nll for s in fit.history],
        },
    }


def lss_from_dict(d: dict) -> tuple:
    dm = [Design.from_dict(x) for x in d["learners_mu"]]
    dsig = [Design.from_dict(x) for x in d["learners_sigma"]]
    h = d["history"]
    fit = LssFit(
        dm, dsig, d["offset_mu"], d["offset_sigma"], d["nu"],
        [np.array(d["coefficients_mu"][x.name], dtype=float) for x in dm],
        [np.array(d["coefficients_sigma"][x.name], dtype=float) for x in dsig],
        [LssStep(p, j, np.array(c, dtype=float), v)
         for p, j, c, v in zip(h["predictor"], h["selected"], h["coef"], h["nll"])],
        h["initial_nll"],
    )
    return fit, [ColumnSpec.from_dict(c) for c in d["columns"]]


def dumps(obj: dict) -> str:
    return json.dumps(obj, indent=2) + "\n"


def write_path_csv(path: PathMatrix, filename) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration"] + list(path.labels))
        for m, row in enumerate(path.values):
            w.writerow([m] + [repr(float(v)) for v in row])


def write_risk_csv(fit: ModelFit, filename) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "risk", "selected"])
        w.writerow([0, repr(float(fit.initial_risk)), ""])
        for m, s in enumerate(fit.history, start=1):
            w.writerow([m, repr(float(s.risk)), fit.designs[s.selected].name])


def write_columns_csv(filename, header, columns) -> None:
    with open(filename, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([repr(float(v)) for v in row])
