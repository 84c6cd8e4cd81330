"""Subcommands of fkm.py.

Every command takes the parsed arguments and the UserSettings, writes its
artifacts plus a RunManifest, and returns a summary dictionary that fkm.py
prints as one JSON line.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import psutil

from lib import __version__, fkm_core, metrics, results_io
from lib.dataset import load_csv, normalize_time, save_csv
from lib.errors import ConfigError, SchemaError
from lib.log_setup import logger
from lib.model_selection import select_lambda
from lib.simulation import RandomEffect, SimConfig, generate, population_centers
from lib.workers import derive_seed, ordered_map, resolve_workers


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    seed: int = None
    elapsed_ms: float = 0.0
    artifacts: list = field(default_factory=list)
    version: str = __version__
    peak_rss_mb: float = 0.0

    def write(self, path):
        self.peak_rss_mb = psutil.Process().memory_info().rss / 2 ** 20
        self.artifacts = [str(a) for a in self.artifacts]
        results_io.write_json(asdict(self), path)
        return path


class Timer:
    def __init__(self):
        self.started = time.perf_counter()

    @property
    def ms(self):
        return (time.perf_counter() - self.started) * 1000.0


def pick(value, settings, key, kind="str"):
    """Command line value, or the setting under key when the option was not given."""
    if value is not None:
        return value
    getter = {"str": settings.get_str, "int": settings.get_int, "float": settings.get_float,
              "floats": settings.get_float_list}[kind]
    return getter(key)


def fit_config_from(args, settings, section="fit"):
    config = fkm_core.FitConfig(
        k=pick(getattr(args, "k", None), settings, (section, "k"), "int"),
        basis_kind=pick(getattr(args, "basis", None), settings, (section, "basis")),
        nbasis=pick(getattr(args, "nbasis", None), settings, (section, "nbasis"), "int"),
        order=pick(getattr(args, "order", None), settings, (section, "order"), "int") or 4,
        lambdas=tuple(pick(getattr(args, "lambdas", None), settings, (section, "lambda"), "floats")),
        weight_scheme=pick(getattr(args, "weight", None), settings, (section, "weight_scheme")),
        restarts=pick(getattr(args, "restarts", None), settings, (section, "restarts"), "int"),
        max_iter=pick(getattr(args, "max_iter", None), settings, (section, "max_iter"), "int"),
        seed=pick(getattr(args, "seed", None), settings, (section, "seed"), "int"),
    )
    return config.validate()


def random_effect_from(args, settings):
    value = pick(getattr(args, "random_effect", None), settings, ("simulation", "random_effect")) or "subject"
    try:
        return RandomEffect(value).value
    except ValueError:
        raise ConfigError(f"unknown random effect {value!r}; expected 'subject' or 'term'")


def workers_from(args, settings):
    requested = args.workers if args.workers is not None else settings.get_int(("runtime", "workers"))
    return resolve_workers(requested or None)


def _domain(args):
    if (args.t_lo is None) != (args.t_hi is None):
        raise ConfigError("--t-lo and --t-hi must be given together")
    return None if args.t_lo is None else (args.t_lo, args.t_hi)


def _columns(args):
    return args.id_col, args.time_col, args.value_col


def cmd_fit(args, settings):
    timer = Timer()
    config = fit_config_from(args, settings)
    ds = load_csv(args.input, _columns(args), truth_col=args.truth_column, domain=_domain(args))
    unit, transform = normalize_time(ds)
    result = fkm_core.fit(unit, config, transform, workers=workers_from(args, settings))

    out_dir = Path(args.out_dir)
    data = results_io.fit_result_to_dict(result, config, ds.ids)
    summary = {"k": config.k, "empirical_loss": result.empirical_loss, "converged": result.converged,
               "iterations": result.iterations, "restart_index": result.restart_index}
    if ds.truth is not None:
        scores = {"ccr": metrics.ccr(ds.truth, result.labels),
                  "ari": metrics.adjusted_rand_index(ds.truth, result.labels)}
        data["truth"] = {"column": args.truth_column, **scores}
        summary.update(scores)

    artifacts = [results_io.write_json(data, out_dir / "fit_result.json"),
                 results_io.write_labels(ds.ids, result.labels, out_dir / "labels.csv")]
    if args.centers_grid:
        grid = np.linspace(transform.t_lo, transform.t_hi, int(args.centers_grid))
        artifacts.append(results_io.write_centers_grid(grid, fkm_core.evaluate_centers(result.model, grid),
                                                       out_dir / "centers.csv"))
        slopes, curvatures = (fkm_core.center_derivatives(result.model, grid, d) for d in (1, 2))
        artifacts.append(results_io.write_center_derivatives(grid, slopes, curvatures,
                                                             out_dir / "center_derivatives.csv"))

    logger.info(f"Fit {args.input}: K={config.k}, loss {result.empirical_loss:.6g}, "
                f"sizes {np.bincount(result.labels, minlength=config.k).tolist()}")
    RunManifest("fit", {"input": str(args.input), **config.to_dict()}, config.seed, timer.ms,
                artifacts).write(out_dir / "manifest.json")
    return summary


def cmd_predict(args, settings):
    timer = Timer()
    model = results_io.model_from_dict(results_io.read_json(args.model))
    domain = _domain(args) or (model.transform.t_lo, model.transform.t_hi)
    ds = load_csv(args.input, _columns(args), domain=domain)
    labels = [fkm_core.predict(model, s) for s in ds.subjects]

    out = Path(args.out)
    artifacts = [results_io.write_labels(ds.ids, labels, out)]
    RunManifest("predict", {"model": str(args.model), "input": str(args.input)}, None, timer.ms,
                artifacts).write(out.with_name(out.stem + "_manifest.json"))
    return {"n": ds.n, "cluster_sizes": np.bincount(labels, minlength=model.k).tolist()}


def cmd_simulate(args, settings):
    timer = Timer()
    cfg = SimConfig(args.n, args.ntp, args.sigma, pick(args.seed, settings, ("fit", "seed"), "int"),
                    random_effect=random_effect_from(args, settings)).validate()
    ds, labels = generate(cfg)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_csv(ds, out)
    labels_path = out.with_name(out.stem + "_labels.csv")
    results_io.write_labels(ds.ids, labels, labels_path)
    RunManifest("simulate", cfg.to_dict(), cfg.seed, timer.ms,
                [out, labels_path]).write(out.with_name(out.stem + "_manifest.json"))
    return {"n": ds.n, "observations": int(ds.n_obs.sum()), "out": str(out)}


def cmd_evaluate(args, settings):
    timer = Timer()
    truth = results_io.read_labels(args.true)
    pred = results_io.read_labels(args.pred)
    if set(truth.index) != set(pred.index):
        missing = sorted(set(truth.index) ^ set(pred.index))
        raise SchemaError(f"label files cover different subjects, e.g. {missing[0]!r}")
    pred = pred.loc[truth.index]
    scores = {"ccr": metrics.ccr(truth.to_numpy(), pred.to_numpy()),
              "ari": metrics.adjusted_rand_index(truth.to_numpy(), pred.to_numpy())}
    if args.out:
        out = Path(args.out)
        results_io.write_json(scores, out)
        RunManifest("evaluate", {"true": str(args.true), "pred": str(args.pred)}, None, timer.ms,
                    [out]).write(out.with_name(out.stem + "_manifest.json"))
    return scores


def cmd_center_distance(args, settings):
    timer = Timer()
    grid = pick(args.grid, settings, ("metrics", "hausdorff_grid"), "int") or metrics.DEFAULT_HAUSDORFF_GRID
    distance = metrics.hausdorff_centers(results_io.load_center_curves(args.a),
                                         results_io.load_center_curves(args.b), grid)
    result = {"hausdorff": distance, "grid": grid}
    if args.out:
        out = Path(args.out)
        results_io.write_json(result, out)
        RunManifest("center-distance", {"a": str(args.a), "b": str(args.b), "grid": grid}, None, timer.ms,
                    [out]).write(out.with_name(out.stem + "_manifest.json"))
    return result


def cmd_select_lambda(args, settings):
    timer = Timer()
    config = fit_config_from(args, settings)
    candidates = pick(args.candidates, settings, ("selection", "candidates"), "floats")
    replicates = pick(args.replicates, settings, ("selection", "replicates"), "int")
    restarts = pick(args.selection_restarts, settings, ("selection", "restarts"), "int")
    ds = load_csv(args.input, _columns(args), domain=_domain(args))
    unit, _ = normalize_time(ds)
    selection = select_lambda(unit, config, candidates, replicates, config.seed, restarts=restarts,
                              workers=workers_from(args, settings))

    out_dir = Path(args.out_dir)
    table = pd.DataFrame({"lambda": selection.candidates, "instability": selection.instability})
    artifacts = [results_io.write_json(selection.to_dict(), out_dir / "selection.json"),
                 results_io.write_csv(table, out_dir / "selection.csv")]
    RunManifest("select-lambda", {"input": str(args.input), **config.to_dict(), "candidates": list(candidates),
                                  "replicates": replicates, "selection_restarts": restarts},
                config.seed, timer.ms, artifacts).write(out_dir / "manifest.json")
    return {"chosen": selection.chosen, "instability": selection.instability.tolist()}


def _population(settings, seed, random_effect, n_large=None, grid_size=None):
    n_large = n_large or settings.get_int(("simulation", "n_large"))
    grid_size = grid_size or settings.get_int(("simulation", "grid_size"))
    restarts = settings.get_int(("simulation", "population_restarts"), 50)
    cfg = SimConfig(2, 2, 0.0, seed, random_effect=random_effect)
    return population_centers(cfg, n_large, grid_size, restarts), {"nlarge": n_large, "grid": grid_size,
                                                                   "population_restarts": restarts,
                                                                   "random_effect": random_effect}


def cmd_population_centers(args, settings):
    timer = Timer()
    seed = pick(args.seed, settings, ("fit", "seed"), "int")
    (grid, centers), echo = _population(settings, seed, random_effect_from(args, settings), args.nlarge, args.grid)

    out = Path(args.out)
    artifacts = [results_io.write_centers_grid(grid, centers, out),
                 results_io.write_centers_json(grid, centers, out.with_suffix(".json"))]
    RunManifest("population-centers", echo, seed, timer.ms,
                artifacts).write(out.with_name(out.stem + "_manifest.json"))
    return {"grid": len(grid), "out": str(out)}


def _benchmark_rep(task):
    cell, rep, config, seed, random_effect, population = task
    n, ntp, sigma = cell
    data_seed = derive_seed(seed, n, round(ntp * 1000), round(sigma * 1000), rep)
    ds, truth = generate(SimConfig(n, ntp, sigma, data_seed, random_effect=random_effect))
    fit_config = fkm_core.FitConfig(**{**config, "seed": derive_seed(data_seed, 1)})
    result = fkm_core.fit(ds, fit_config)

    row = {"n": n, "ntp": ntp, "sigma": sigma, "rep": rep, "seed": data_seed,
           "ccr": metrics.ccr(truth, result.labels),
           "ari": metrics.adjusted_rand_index(truth, result.labels),
           "empirical_loss": result.empirical_loss, "iterations": result.iterations,
           "converged": result.converged, "elapsed_ms": result.elapsed_ms}
    centers = None
    if population is not None:
        grid, reference = population
        centers = fkm_core.evaluate_centers(result.model, grid)
        row["hausdorff"] = metrics.hausdorff_sampled(centers, reference)
    logger.info(f"Benchmark n={n} ntp={ntp:g} sigma={sigma:g} rep {rep}: CCR {row['ccr']:.1f}, "
                f"ARI {row['ari']:.3f}, {row['elapsed_ms']:.0f} ms")
    return row, centers


def summarize(rows):
    frame = pd.DataFrame(rows)
    grouped = frame.groupby(["n", "ntp", "sigma"], sort=False)
    summary = grouped.agg(reps=("rep", "size"), mean_ccr=("ccr", "mean"), median_ccr=("ccr", "median"),
                          sd_ccr=("ccr", "std"), mean_ari=("ari", "mean"), median_ari=("ari", "median"),
                          converged=("converged", "mean"), median_ms=("elapsed_ms", "median"))
    # a single replicate has no spread
    summary["sd_ccr"] = summary["sd_ccr"].fillna(0.0)
    if "hausdorff" in frame.columns:
        summary["median_hausdorff"] = grouped["hausdorff"].median()
    return summary.reset_index()


def cmd_benchmark(args, settings):
    timer = Timer()
    seed = pick(args.seed, settings, ("fit", "seed"), "int")
    if args.reps < 1:
        raise ConfigError(f"reps must be >= 1, got {args.reps}")
    config = fkm_core.FitConfig(
        k=2,
        basis_kind=pick(args.basis, settings, ("fit", "basis")),
        nbasis=pick(args.nbasis, settings, ("fit", "nbasis"), "int"),
        order=settings.get_int(("fit", "order"), 4),
        lambdas=tuple(pick(args.lambdas, settings, ("fit", "lambda"), "floats")),
        restarts=pick(args.restarts, settings, ("fit", "restarts"), "int"),
        weight_scheme=settings.get_str(("fit", "weight_scheme"), "subj"),
        max_iter=settings.get_int(("fit", "max_iter"), 100),
        seed=seed,
    ).validate()
    random_effect = random_effect_from(args, settings)
    config_echo = config.to_dict()
    fit_kwargs = asdict(config)

    population = None
    if args.consistency or args.centers_out:
        (grid, centers), _ = _population(settings, seed, random_effect)
        population = (grid, centers)

    cells = list(itertools.product(args.n, args.ntp, args.sigma))
    for n, ntp, sigma in cells:
        SimConfig(n, ntp, sigma, seed, random_effect=random_effect).validate()
    tasks = [(cell, rep, fit_kwargs, seed, random_effect, population) for cell in cells for rep in range(args.reps)]
    outcomes = ordered_map(_benchmark_rep, tasks, workers_from(args, settings))
    rows = [row for row, _ in outcomes]
    if not args.consistency:
        for row in rows:
            row.pop("hausdorff", None)

    out_dir = Path(args.out_dir)
    summary = summarize(rows)
    artifacts = [results_io.write_csv(pd.DataFrame(rows), out_dir / "benchmark_reps.csv"),
                 results_io.write_csv(summary, out_dir / "benchmark_summary.csv"),
                 results_io.write_json({"config": config_echo, "reps": args.reps, "random_effect": random_effect,
                                        "summary": summary.to_dict(orient="records")},
                                       out_dir / "benchmark.json")]
    if args.centers_out:
        grid, reference = population
        long_rows = []
        for (row, centers) in outcomes:
            for k, curve in enumerate(centers):
                long_rows.append(pd.DataFrame({"n": row["n"], "ntp": row["ntp"], "sigma": row["sigma"],
                                               "rep": row["rep"], "cluster": k + 1, "t": grid, "value": curve}))
        artifacts.append(results_io.write_csv(pd.concat(long_rows, ignore_index=True),
                                              out_dir / "benchmark_centers.csv"))
        artifacts.append(results_io.write_centers_grid(grid, reference, out_dir / "population_centers.csv"))

    RunManifest("benchmark", {**config_echo, "cells": [list(c) for c in cells], "reps": args.reps,
                              "random_effect": random_effect, "consistency": bool(args.consistency)},
                seed, timer.ms, artifacts).write(out_dir / "manifest.json")
    return {"cells": summary.drop(columns=["median_ms"]).to_dict(orient="records")}


def cmd_timing(args, settings):
    timer = Timer()
    seed = pick(args.seed, settings, ("fit", "seed"), "int")
    if args.samples < 1:
        raise ConfigError(f"samples must be >= 1, got {args.samples}")
    config = fkm_core.FitConfig(
        k=2,
        basis_kind=pick(args.basis, settings, ("fit", "basis")),
        nbasis=pick(args.nbasis, settings, ("fit", "nbasis"), "int"),
        weight_scheme=settings.get_str(("fit", "weight_scheme"), "subj"),
        restarts=1,
        seed=seed,
    ).validate()
    random_effect = random_effect_from(args, settings)

    rows = []
    # serial on purpose: concurrent fits would distort the wall clock
    for n in args.n_list:
        for sample in range(args.samples):
            data_seed = derive_seed(seed, n, sample)
            ds, _ = generate(SimConfig(n, args.ntp, args.sigma, data_seed, random_effect=random_effect))
            result = fkm_core.fit(ds, fkm_core.FitConfig(**{**asdict(config), "seed": derive_seed(data_seed, 1)}))
            rows.append({"n": n, "sample": sample, "elapsed_ms": result.elapsed_ms})
            logger.info(f"Timing n={n} sample {sample}: {result.elapsed_ms:.1f} ms")

    frame = pd.DataFrame(rows)
    table = frame.groupby("n", sort=False)["elapsed_ms"].agg(["median", "min", "max"]).reset_index()
    table.columns = ["n", "median_ms", "min_ms", "max_ms"]
    out_dir = Path(args.out_dir)
    artifacts = [results_io.write_csv(frame, out_dir / "timing.csv"),
                 results_io.write_json({"config": config.to_dict(), "ntp": args.ntp, "sigma": args.sigma,
                                        "samples": args.samples, "timing_ms": table.to_dict(orient="records")},
                                       out_dir / "timing.json")]
    RunManifest("timing", {**config.to_dict(), "n_list": args.n_list, "ntp": args.ntp, "sigma": args.sigma,
                           "samples": args.samples, "random_effect": random_effect},
                seed, timer.ms, artifacts).write(out_dir / "manifest.json")
    return {"n": list(args.n_list), "samples": args.samples}


def cmd_settings(args, settings):
    """Show the effective settings, optionally after resetting them or assigning single values."""
    if args.reset:
        settings.reset_to_default()
        logger.info(f"Restored {settings.CONFIG_FILE} from the defaults")
    for key, value in args.assignments or ():
        settings[key] = value
        logger.info(f"Setting {'/'.join(key)} = {value}")
    # validate before saving
    fit_config_from(None, settings)
    random_effect_from(None, settings)
    settings.save_changes()
    return {"file": settings.CONFIG_FILE, "settings": settings.flat()}


COMMANDS = {
    "fit": cmd_fit,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "center-distance": cmd_center_distance,
    "select-lambda": cmd_select_lambda,
    "population-centers": cmd_population_centers,
    "benchmark": cmd_benchmark,
    "timing": cmd_timing,
    "settings": cmd_settings,
}
