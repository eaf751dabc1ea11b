"""Command-line interface.

Commands: ``simulate``, ``fit``, ``reproduce-table2``, ``reproduce-table3``,
``fit-inflation``. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .datagen import generate_example1, generate_example2, replicate
from .dataio import (
    INFLATION_PREDICTORS,
    INFLATION_RESPONSE,
    DataError,
    emit_results,
    fixture_path,
    load_csv,
    read_table,
    standardize,
    validate_inflation_schema,
    version_string,
    write_csv,
    write_dataset,
)
from .dists import ParameterDomainError
from .priors import Hyperparameters, PriorKind, preset
from .sampler import McmcConfig, SamplerError, compute_rmse, run_chain

log = logging.getLogger("dynspike")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("simulate", "fit", "reproduce-table2", "reproduce-table3", "fit-inflation")
PRIOR_NAMES = {"nmig": "NMIG", "ng": "NG", "laplace": "Laplace"}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    profile: str = ""
    prior: str = "nmig"
    iters: int = 0
    burn: int = -1
    seed: int = 1
    thin: int = 1
    out: str = "results"
    data: str = ""
    truth: str = ""
    response: str = "y"
    predictors: list = field(default_factory=list)
    standardize: bool = False
    original_scale: bool = False
    generator: str = "example1"
    reps: int = 5
    q: int = 6
    full: bool = False
    save_draws: bool = False
    hyper: dict = field(default_factory=dict)

    def hyperparameters(self) -> Hyperparameters:
        try:
            return preset(self.profile).with_overrides(**self.hyper)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid hyperparameters: {exc}") from exc

    def mcmc(self, seed=None, prior=None) -> McmcConfig:
        try:
            return McmcConfig(n_iter=self.iters, n_burn=self.burn, seed=self.seed if seed is None else seed,
                              kind=prior or self.prior, hp=self.hyperparameters(), thin=self.thin,
                              save_paths=self.save_draws)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


# defaults per command: profile, iterations, burn-in
_COMMAND_DEFAULTS = {
    "simulate": ("example1", 10_000, 5_000),
    "fit": ("example1", 10_000, 5_000),
    "reproduce-table2": ("example1", 10_000, 5_000),
    "reproduce-table3": ("example2", 4_000, 2_000),
    "fit-inflation": ("inflation", 20_000, 10_000),
}

_HYPER_NAMES = {f.name for f in fields(Hyperparameters)}
_RUN_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key, value, target):
    """Convert a config-file string to the type of ``target``."""
    if not isinstance(value, str):
        return value
    try:
        if isinstance(target, bool):
            low = value.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if isinstance(target, int):
            return int(value)
        if isinstance(target, float):
            return float(value)
        if isinstance(target, list):
            return [v.strip() for v in value.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"config key '{key}': cannot parse {value!r}") from None
    return value


def read_config_file(path) -> dict:
    """Flat key/value settings from an INI-style file (``[run]`` section optional) or a run.json."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    if path.suffix == ".json":
        try:
            rec = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return dict(rec.get("config", rec))
    text = path.read_text(encoding="utf-8")
    if not text.lstrip().startswith("["):
        text = "[run]\n" + text
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    out = {}
    for section in cp.sections():
        for k, v in cp.items(section):
            out[k] = v
    return out


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command)
    settings = read_config_file(args.config) if args.config else {}
    hyper = dict(settings.pop("hyper", {}) or {})
    for key, value in settings.items():
        if key in ("command", "version"):
            continue
        if key in _HYPER_NAMES:
            default = getattr(Hyperparameters(), key)
            hyper[key] = value if key == "slab_weight" else _coerce(key, value, float(default))
        elif key in _RUN_FIELDS:
            setattr(cfg, key, _coerce(key, value, getattr(cfg, key)))
        else:
            raise ConfigError(f"unknown config key '{key}'")
    for key in ("prior", "iters", "burn", "seed", "out", "data", "truth", "response", "generator", "reps", "q",
                "thin", "profile"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    for key in ("save_draws", "standardize", "original_scale", "full"):
        if getattr(args, key, False):
            setattr(cfg, key, True)
    if getattr(args, "predictors", None):
        cfg.predictors = [p.strip() for p in args.predictors.split(",") if p.strip()]
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        if k not in _HYPER_NAMES:
            raise ConfigError(f"unknown hyperparameter '{k}'")
        hyper[k] = v if k == "slab_weight" else _coerce(k, v, 0.0)
    cfg.hyper = hyper

    profile, iters, burn = _COMMAND_DEFAULTS[cfg.command]
    if cfg.command == "reproduce-table3" and cfg.full:
        iters, burn = 10_000, 5_000
        if getattr(args, "q", None) is None and "q" not in settings:
            cfg.q = 10
    cfg.profile = cfg.profile or profile
    cfg.iters = cfg.iters or iters
    if cfg.burn < 0:
        cfg.burn = min(burn, cfg.iters // 2) if cfg.iters != iters else burn
    try:
        PriorKind.parse(cfg.prior)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.burn >= cfg.iters:
        raise ConfigError(f"burn-in ({cfg.burn}) must be smaller than the number of iterations ({cfg.iters})")
    if cfg.generator not in ("example1", "example2"):
        raise ConfigError(f"unknown generator {cfg.generator!r}")
    if cfg.data and not Path(cfg.data).exists():
        raise ConfigError(f"data file {cfg.data} does not exist")
    if cfg.truth and not Path(cfg.truth).exists():
        raise ConfigError(f"truth file {cfg.truth} does not exist")
    if cfg.q < 2:
        raise ConfigError("q must be at least 2")
    cfg.hyperparameters()
    return cfg


def _record(cfg: RunConfig, **extra) -> dict:
    return {"command": cfg.command, "config": asdict(cfg), "version": version_string(), **extra}


def _progress(n_iter):
    step = max(n_iter // 10, 1)
    start = time.perf_counter()

    def cb(it, state):
        if (it + 1) % step == 0:
            log.info("iteration %d/%d (%.1fs)", it + 1, n_iter, time.perf_counter() - start)

    return cb


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig) -> list:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.generator == "example1":
        written = write_dataset(generate_example1(cfg.seed), out)
    else:
        _, datasets = generate_example2(cfg.seed, q=cfg.q)
        written = []
        for d in datasets:
            written += write_dataset(d, out, stem=f"equation{d.meta['equation']}")
    p = out / "run.json"
    p.write_text(json.dumps(_record(cfg), indent=2, sort_keys=True), encoding="utf-8")
    return written + [p]


def _fit_dataset(cfg: RunConfig, data, truth=None, transform=None):
    mc = cfg.mcmc()
    summary = run_chain(data, mc, callback=_progress(mc.n_iter))
    return emit_results(summary, cfg.out, _record(cfg), truth=truth, transform=transform)


def cmd_fit(cfg: RunConfig) -> list:
    if cfg.data:
        data = load_csv(cfg.data, cfg.response, cfg.predictors or None)
        truth = None
        if cfg.truth:
            header, body = read_table(cfg.truth)
            if body.shape != data.X.shape:
                raise DataError(f"truth file has shape {body.shape}, expected {data.X.shape}")
            truth = body
    else:
        data = generate_example1(cfg.seed)
        truth = data.truth
    transform = None
    if cfg.standardize:
        data, transform = standardize(data)
        if truth is not None:
            truth = truth / transform.coefficient_factor()
    return _fit_dataset(cfg, data, truth=truth, transform=transform if cfg.original_scale else None)


def _priors(cfg: RunConfig, explicit: bool):
    return [cfg.prior] if explicit else list(PRIOR_NAMES)


def cmd_table2(cfg: RunConfig, explicit_prior: bool) -> list:
    datasets = replicate(generate_example1, cfg.reps, cfg.seed)
    per_rep = []
    table = []
    for prior in _priors(cfg, explicit_prior):
        med, mean = [], []
        for i, d in enumerate(datasets):
            s = run_chain(d, cfg.mcmc(seed=cfg.seed * 1000 + i, prior=prior))
            med.append(compute_rmse(s.beta_median, d.truth))
            mean.append(compute_rmse(s.beta_mean, d.truth))
            per_rep.append([PRIOR_NAMES[prior], i + 1, mean[-1], med[-1]])
            log.info("%s replication %d: rmse(mean)=%.4f rmse(median)=%.4f", prior, i + 1, mean[-1], med[-1])
        table.append([PRIOR_NAMES[prior], float(np.mean(mean)), float(np.mean(med))])
    return _write_table(cfg, "table2", table, per_rep, ["prior", "replication", "rmse_mean", "rmse_median"])


def cmd_table3(cfg: RunConfig, explicit_prior: bool) -> list:
    _, datasets = generate_example2(cfg.seed, q=cfg.q)
    per_eq = []
    table = []
    for prior in _priors(cfg, explicit_prior):
        err_mean, err_med, n = 0.0, 0.0, 0
        for d in datasets:
            s = run_chain(d, cfg.mcmc(seed=cfg.seed * 1000 + d.meta["equation"], prior=prior))
            err_mean += float(np.sum((s.beta_mean - d.truth) ** 2))
            err_med += float(np.sum((s.beta_median - d.truth) ** 2))
            n += d.truth.size
            per_eq.append([PRIOR_NAMES[prior], d.meta["equation"], compute_rmse(s.beta_mean, d.truth),
                           compute_rmse(s.beta_median, d.truth)])
            log.info("%s equation %d done", prior, d.meta["equation"])
        table.append([PRIOR_NAMES[prior], float(np.sqrt(err_mean / n)), float(np.sqrt(err_med / n))])
    return _write_table(cfg, "table3", table, per_eq, ["prior", "equation", "rmse_mean", "rmse_median"])


def _write_table(cfg, stem, table, detail, detail_header):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    p1 = out / f"{stem}.csv"
    write_csv(p1, ["prior", "rmse_mean", "rmse_median"], table)
    p2 = out / f"{stem}_detail.csv"
    write_csv(p2, detail_header, detail)
    p3 = out / "run.json"
    p3.write_text(json.dumps(_record(cfg, table=table), indent=2, sort_keys=True), encoding="utf-8")
    for row in table:
        print(f"{row[0]:8s} rmse(mean)={row[1]:.4f} rmse(median)={row[2]:.4f}")
    return [p1, p2, p3]


def cmd_inflation(cfg: RunConfig) -> list:
    path = Path(cfg.data) if cfg.data else fixture_path()
    header, _ = read_table(path)
    validate_inflation_schema(header)
    response = cfg.response if cfg.response != "y" else INFLATION_RESPONSE
    data = load_csv(path, response, list(INFLATION_PREDICTORS))
    data, transform = standardize(data)
    cfg.data = str(path)
    return _fit_dataset(cfg, data, transform=transform if cfg.original_scale else None)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--prior", choices=list(PRIOR_NAMES), default=None)
    common.add_argument("--iters", type=int, default=None, help="total MCMC iterations")
    common.add_argument("--burn", type=int, default=None, help="burn-in iterations")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--thin", type=int, default=None)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--config", default=None, help="key = value settings file or a previous run.json")
    common.add_argument("--profile", choices=["example1", "example2", "inflation"], default=None,
                        help="hyperparameter preset")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one hyperparameter")
    common.add_argument("--save-draws", action="store_true", help="write raw draws to OUT/draws/")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="dynspike", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="write a synthetic dataset")
    s.add_argument("--generator", choices=["example1", "example2"], default=None)
    s.add_argument("--q", type=int, default=None, help="number of series (example2)")

    f = sub.add_parser("fit", parents=[common], help="fit a CSV (or a fresh example-1 dataset)")
    f.add_argument("--data", default=None)
    f.add_argument("--truth", default=None, help="CSV of true coefficient paths for RMSE")
    f.add_argument("--response", default=None)
    f.add_argument("--predictors", default=None, help="comma-separated predictor columns")
    f.add_argument("--standardize", action="store_true")
    f.add_argument("--original-scale", action="store_true", help="also emit back-transformed summaries")

    t2 = sub.add_parser("reproduce-table2", parents=[common], help="example-1 RMSE table")
    t2.add_argument("--reps", type=int, default=None)

    t3 = sub.add_parser("reproduce-table3", parents=[common], help="example-2 RMSE table")
    t3.add_argument("--q", type=int, default=None)
    t3.add_argument("--full", action="store_true", help="q=10 and 10,000 iterations")

    fi = sub.add_parser("fit-inflation", parents=[common], help="inflation pipeline (bundled fixture by default)")
    fi.add_argument("--data", default=None)
    fi.add_argument("--response", default=None)
    fi.add_argument("--original-scale", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        if cfg.command == "simulate":
            written = cmd_simulate(cfg)
        elif cfg.command == "fit":
            written = cmd_fit(cfg)
        elif cfg.command == "reproduce-table2":
            written = cmd_table2(cfg, args.prior is not None)
        elif cfg.command == "reproduce-table3":
            written = cmd_table3(cfg, args.prior is not None)
        else:
            written = cmd_inflation(cfg)
    except (ConfigError, ParameterDomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SamplerError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in written:
        log.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
