"""Command-line interface.

Subcommands: fit, cv, tune2, stabsel, lss, predict, diagnose. Settings come
from flags and/or one JSON config file (``--config``); flags win. Every run
writes ``effective_config.json`` to the output directory, echoing all
resolved settings. Errors print one JSON line to stderr and exit with
2 (configuration), 3 (data) or 4 (numerical failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np

from .data import ResamplingPlan, load_csv, standardize
from .engine import BoostSpec, predict
from .exceptions import BoostError, ConfigError
from .learners import BaseLearner
from .lss import LssSpec, fit_lss, predict_lss, tune_lss
from .paths import arc_length, coefficient_path, diagonal_dominance
from .serialize import (
    dumps, lss_from_dict, lss_to_dict, model_from_dict, model_to_dict,
    write_columns_csv, write_path_csv, write_risk_csv,
)
from .stability import stabsel
from .tuning import cvrisk, default_jobs, select_mstop, tune_grid2

SUBCOMMANDS = ("fit", "cv", "tune2", "stabsel", "lss", "predict", "diagnose")
KIND_ALIASES = {"linear": "linear", "bols": "linear", "linear_int": "linear_int",
                "spline": "pspline", "pspline": "pspline", "bbs": "pspline",
                "categorical": "categorical", "factor": "categorical"}


@dataclass
class RunConfig:
    subcommand: str
    data: Optional[str] = None
    response: Optional[str] = None
    family: str = "gaussian"
    engine: str = "gradient"
    penalty: Optional[float] = None
    learners: List[str] = field(default_factory=list)
    learners_sigma: List[str] = field(default_factory=list)
    df: float = 4.0
    nu: float = 0.1
    mstop: int = 100
    mstop_sigma: int = 100
    grid: str = "0:100"
    grid_sigma: str = "0:100:10"
    nu_grid: str = "0.1"
    tune: bool = False
    resampling: str = "subsample"
    folds: int = 10
    fraction: float = 0.5
    resamples: int = 25
    q: Optional[int] = None
    stab_B: int = 100
    pi_thr: Optional[float] = None
    pfer: Optional[float] = None
    iteration_cap: Optional[int] = None
    model: Optional[str] = None
    scale: str = "link"
    standardize: bool = True
    seed: int = 0
    jobs: Optional[int] = None
    out: str = "."

    def plan(self) -> ResamplingPlan:
        if self.resampling == "kfold":
            return ResamplingPlan.kfold_plan(self.folds, self.seed)
        if self.resampling == "bootstrap":
            return ResamplingPlan.bootstrap_plan(self.resamples, self.seed)
        return ResamplingPlan.subsample_plan(self.fraction, self.resamples, self.seed)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _grid(text: str) -> list:
    """``"a:b"`` or ``"a:b:step"`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            parts = [int(v) for v in text.split(":")]
            lo, hi = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            if step < 1:
                raise ValueError
            return list(range(lo, hi + 1, step))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use 'lo:hi[:step]' or a comma list") from None


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="statboost", description="Component-wise boosting of additive models.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    S = argparse.SUPPRESS
    p.add_argument("--config", default=None, help="JSON file with settings; flags override it")
    p.add_argument("--data", default=S)
    p.add_argument("--response", default=S)
    p.add_argument("--family", default=S, choices=("gaussian", "binomial", "poisson"))
    p.add_argument("--engine", default=S, choices=("gradient", "likelihood"))
    p.add_argument("--penalty", type=float, default=S,
                   help="likelihood engine penalty; default derives it from --nu")
    p.add_argument("--learner", dest="learners", action="append", default=S,
                   help="COLUMN[:KIND[:DF]], KIND one of linear, linear_int, spline, categorical; repeatable")
    p.add_argument("--learner-sigma", dest="learners_sigma", action="append", default=S)
    p.add_argument("--df", type=float, default=S, help="default df for spline and factor learners")
    p.add_argument("--nu", type=float, default=S)
    p.add_argument("--mstop", type=int, default=S)
    p.add_argument("--mstop-sigma", type=int, default=S)
    p.add_argument("--grid", default=S)
    p.add_argument("--grid-sigma", default=S)
    p.add_argument("--nu-grid", default=S)
    p.add_argument("--tune", action="store_true", default=S, help="lss: tune both mstops first")
    p.add_argument("--resampling", default=S, choices=("subsample", "kfold", "bootstrap"))
    p.add_argument("--folds", type=int, default=S)
    p.add_argument("--fraction", type=float, default=S)
    p.add_argument("--resamples", type=int, default=S)
    p.add_argument("--q", type=int, default=S)
    p.add_argument("--stab-B", dest="stab_B", type=int, default=S)
    p.add_argument("--pi-thr", dest="pi_thr", type=float, default=S)
    p.add_argument("--pfer", type=float, default=S)
    p.add_argument("--iteration-cap", type=int, default=S)
    p.add_argument("--model", default=S)
    p.add_argument("--scale", default=S, choices=("link", "response"))
    p.add_argument("--no-standardize", dest="standardize", action="store_false", default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--jobs", type=int, default=S)
    p.add_argument("--out", default=S)
    return p


def parse_config(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    values = {}
    if args.get("config"):
        path = Path(args["config"])
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            values = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path}: {e}") from None
        known = set(RunConfig.__dataclass_fields__)
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.pop("subcommand", None)
    for k, v in args.items():
        if k != "config":
            values[k] = v
    cfg = RunConfig(**values)
    if cfg.jobs is None:
        cfg.jobs = default_jobs()
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.subcommand == "stabsel":
        if (cfg.pi_thr is None) == (cfg.pfer is None):
            raise ConfigError("stabsel needs exactly one of --pi-thr and --pfer")
        if cfg.q is None:
            raise ConfigError("stabsel needs --q")
    elif cfg.pi_thr is not None and cfg.pfer is not None:
        raise ConfigError("--pi-thr and --pfer are mutually exclusive")
    if cfg.subcommand == "predict":
        if not cfg.model:
            raise ConfigError("predict needs --model")
        if not Path(cfg.model).is_file():
            raise ConfigError(f"model file not found: {cfg.model}")
    elif not cfg.response:
        raise ConfigError("missing --response")
    if not cfg.data:
        raise ConfigError("missing --data")
    if not Path(cfg.data).is_file():
        raise ConfigError(f"data file not found: {cfg.data}")
    if not 0 < cfg.nu <= 1:
        raise ConfigError("--nu must lie in (0, 1]")
    if cfg.mstop < 0 or cfg.mstop_sigma < 0:
        raise ConfigError("mstop must be >= 0")
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    for spec in list(cfg.learners) + list(cfg.learners_sigma):
        _parse_learner_text(spec, cfg.df)


def _parse_learner_text(text: str, default_df: float):
    parts = text.split(":")
    if not parts[0] or len(parts) > 3:
        raise ConfigError(f"bad learner spec {text!r}; use COLUMN[:KIND[:DF]]")
    kind = KIND_ALIASES.get(parts[1] if len(parts) > 1 else "linear")
    if kind is None:
        raise ConfigError(f"unknown learner kind in {text!r}")
    df = None
    if len(parts) == 3:
        try:
            df = float(parts[2])
        except ValueError:
            raise ConfigError(f"bad df in learner spec {text!r}") from None
    return parts[0], kind, df


def _learners(cfg: RunConfig, d, texts, numeric_kind="linear") -> list:
    """Learner list from specs, or one default learner per covariate."""
    if not texts:
        texts = [c.name + (":categorical" if c.kind == "categorical" else ":" + numeric_kind)
                 for c in d.columns]
    parsed = [_parse_learner_text(t, cfg.df) for t in texts]
    has_spline = any(k == "pspline" for _, k, _ in parsed)
    out = []
    for col, kind, df in parsed:
        d.column_index(col)
        if kind in ("linear", "linear_int"):
            out.append(BaseLearner.linear(col, intercept=kind == "linear_int"))
        elif kind == "pspline":
            out.append(BaseLearner.pspline(col, df=df if df is not None else cfg.df))
        else:
            # factors get the spline df when mixed with splines, else 1 like a linear term
            common = cfg.df if has_spline else 1.0
            out.append(BaseLearner.categorical(col, df=df if df is not None else common))
    return out


def _load(cfg: RunConfig):
    d = load_csv(cfg.data, cfg.response)
    if cfg.standardize and any(c.kind == "numeric" for c in d.columns):
        d = standardize(d)
    return d


def _spec(cfg: RunConfig, d) -> BoostSpec:
    penalty = None
    if cfg.engine == "likelihood":
        penalty = cfg.penalty if cfg.penalty is not None else "nu"
    return BoostSpec(cfg.family, tuple(_learners(cfg, d, cfg.learners)), cfg.nu, cfg.engine, penalty)


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def _run_fit(cfg, out):
    d = _load(cfg)
    spec = _spec(cfg, d)
    fit = spec.fit(d, cfg.mstop)
    fit.seed = cfg.seed
    _write(out, "model.json", dumps(model_to_dict(fit, d.columns)))
    write_path_csv(coefficient_path(fit), out / "path.csv")
    write_risk_csv(fit, out / "risk.csv")
    return {"mstop": fit.mstop, "selected": sorted({fit.names[j] for j in fit.selected})}


def _run_cv(cfg, out):
    d = _load(cfg)
    rg = cvrisk(d, _spec(cfg, d), cfg.plan(), _grid(cfg.grid), cfg.jobs)
    rg.to_csv(out / "riskgrid.csv")
    return {"mstop": select_mstop(rg)}


def _run_tune2(cfg, out):
    d = _load(cfg)
    res = tune_grid2(d, _spec(cfg, d), cfg.plan(), _float_list(cfg.nu_grid), _grid(cfg.grid), cfg.jobs)
    res.riskgrids[res.nu_grid.index(res.nu)].to_csv(out / "riskgrid.csv")
    write_columns_csv(out / "surface.csv", ["mstop"] + [repr(v) for v in res.nu_grid],
                      [res.mstop_grid] + list(res.surface))
    return {"nu": res.nu, "mstop": res.mstop}


def _run_stabsel(cfg, out):
    d = _load(cfg)
    res = stabsel(d, _spec(cfg, d), cfg.q, cfg.stab_B, cfg.pi_thr, cfg.pfer, cfg.seed,
                  cfg.iteration_cap, cfg.jobs)
    _write(out, "stabsel.json", res.to_json() + "\n")
    _write(out, "stabsel.txt", res.ranking_table())
    return {"stable": list(res.stable.names), "pi_thr": res.pi_thr, "pfer": res.pfer}


def _run_lss(cfg, out):
    d = _load(cfg)
    # intercepts let each predictor move its level away from the offset
    lm = _learners(cfg, d, cfg.learners, "linear_int")
    ls = _learners(cfg, d, cfg.learners_sigma or cfg.learners, "linear_int")
    m_mu, m_sigma = cfg.mstop, cfg.mstop_sigma
    result = {}
    if cfg.tune:
        res = tune_lss(d, LssSpec(tuple(lm), tuple(ls), cfg.nu), cfg.plan(),
                       _grid(cfg.grid), _grid(cfg.grid_sigma), cfg.jobs)
        m_mu, m_sigma = res.mstop_mu, res.mstop_sigma
        write_columns_csv(out / "surface.csv", ["mstop_sigma"] + [str(a) for a in res.grid_mu],
                          [res.grid_sigma] + list(res.surface))
    fit = fit_lss(d, lm, ls, cfg.nu, m_mu, m_sigma)
    _write(out, "model.json", dumps(lss_to_dict(fit, d.columns)))
    result.update(mstop_mu=m_mu, mstop_sigma=m_sigma)
    return result


def _run_predict(cfg, out):
    blob = json.loads(Path(cfg.model).read_text())
    if blob.get("type") == "lss":
        fit, columns = lss_from_dict(blob)
        d = load_csv(cfg.data, None, schema=columns)
        mu, sigma = predict_lss(fit, d)
        write_columns_csv(out / "predictions.csv", ["mu", "sigma"], [mu, sigma])
    else:
        fit, columns = model_from_dict(blob)
        d = load_csv(cfg.data, None, schema=columns)
        pred = predict(fit, d, cfg.scale)
        write_columns_csv(out / "predictions.csv", ["prediction"], [pred])
    return {"rows": d.rows}


def _run_diagnose(cfg, out):
    d = _load(cfg)
    report = {}
    numeric = [c for c in d.columns if c.kind == "numeric"]
    if len(numeric) >= 1:
        report["diagonal_dominance"] = diagonal_dominance(d).to_dict()
    if cfg.model:
        fit, _ = model_from_dict(json.loads(Path(cfg.model).read_text()))
    else:
        fit = _spec(cfg, d).fit(d, cfg.mstop)
    report["arc_length"] = arc_length(coefficient_path(fit))
    report["l1_norm"] = float(sum(np.abs(c).sum() for c in fit.coefs))
    report["mstop"] = fit.mstop
    _write(out, "diagnose.json", json.dumps(report, indent=2) + "\n")
    return report


RUNNERS = {"fit": _run_fit, "cv": _run_cv, "tune2": _run_tune2, "stabsel": _run_stabsel,
           "lss": _run_lss, "predict": _run_predict, "diagnose": _run_diagnose}


def effective_config(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("jobs")  # output never depends on the worker count
    return d


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write(out, "effective_config.json", json.dumps(effective_config(cfg), indent=2) + "\n")
    result = RUNNERS[cfg.subcommand](cfg, out)
    with open(out / "run.log", "a") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {cfg.subcommand} ok jobs={cfg.jobs}\n")
    print(json.dumps(result, sort_keys=True))
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except BoostError as e:
        print(json.dumps({"error": type(e).__name__, "code": e.exit_code, "message": str(e)}),
              file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
