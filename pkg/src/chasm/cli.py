"""Command-line entry points: detection, simulation, benchmarking, bias tables.

Stream files are CSV (one observation per row, optional header), per-step
records are JSONL, configs and manifests are JSON.  Floats in CSV output are
written with 17 significant digits so runs can be diffed byte for byte.
Exit codes: 0 on success, 2 on usage or malformed input, 3 on numerical
failure.
"""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bias import BiasExperiment, run_bias
from .errors import NumericsError
from .metrics import EvalConfig, Outcome, arl, classify_single, prf_single
from .pipeline import AbortedRun, ChasmDetector, DetectorConfig
from .synthetic import DATASETS, NoiseSpec, VarModel, make_dataset, rotation_transition

FLOAT_FMT = "%.17g"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return FLOAT_FMT % value
    return str(value)


def _resolve_jobs(jobs: int | None) -> int:
    if jobs is not None:
        return max(1, jobs)
    env = os.environ.get("CHASM_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericsError as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(3)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _read_stream_csv(path: str) -> np.ndarray:
    """Parse a numeric CSV stream, reporting the first offending line."""
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, cells in enumerate(reader, start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                if lineno == 1:
                    continue  # header row
                raise ValueError(f"{path}: non-numeric value on line {lineno}")
            if not all(math.isfinite(v) for v in values):
                raise ValueError(f"{path}: non-finite value on line {lineno}")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise ValueError(
                    f"{path}: line {lineno} has {len(values)} columns, expected {width}"
                )
            rows.append(values)
    if not rows:
        raise ValueError(f"{path}: no observations found")
    return np.asarray(rows, dtype=np.float64)


def _load_json(path: str):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def _record_line(record) -> str:
    return json.dumps(
        {
            "t": record.t,
            "statistic": record.statistic,
            "alarm": record.alarm,
            "segment": record.segment,
        }
    )


def _write_manifest(outdir: Path, payload: dict):
    payload = {"tool_version": __version__, **payload}
    (outdir / "manifest.json").write_text(json.dumps(payload, indent=2) + "\n")


@click.group()
@click.version_option(version=__version__)
def main():
    """Streaming changepoint detection benchmark tool."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "output_path", required=True, type=click.Path(dir_okay=False))
@_guarded
def detect(input_path, config_path, output_path):
    """Run the detector over a CSV stream and write per-step JSONL records."""
    config = DetectorConfig.from_dict(_load_json(config_path))
    stream = _read_stream_csv(input_path)
    detector = ChasmDetector(stream.shape[1], config)
    try:
        records, _ = detector.run(stream)
    except AbortedRun as exc:
        with open(output_path, "w") as fh:
            for record in exc.records:
                fh.write(_record_line(record) + "\n")
        click.echo(f"numerical failure after {len(exc.records)} records: {exc}", err=True)
        sys.exit(3)
    with open(output_path, "w") as fh:
        for record in records:
            fh.write(_record_line(record) + "\n")


def _noise_payload(noise: NoiseSpec) -> dict:
    return {
        "kind": noise.kind,
        "nu": noise.nu,
        "contamination": noise.contamination,
        "covariance": noise.covariance.tolist(),
    }


@main.command()
@click.option("--dataset", required=True, type=click.Choice(DATASETS))
@click.option("--reps", default=1000, show_default=True, type=int,
              help="Replications; the full protocol uses 1000, desk runs less.")
@click.option("--variant", default="arl1", show_default=True, type=click.Choice(["arl1", "arl0"]))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--output", "outdir", required=True, type=click.Path(file_okay=False))
@_guarded
def simulate(dataset, reps, variant, seed, outdir):
    """Generate benchmark replications: one CSV per stream plus a manifest."""
    started = time.time()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    replications = make_dataset(dataset, reps, variant, seed)
    entries = []
    for rep in replications:
        name = f"rep_{rep.index:04d}.csv"
        np.savetxt(outdir / name, rep.stream, delimiter=",", fmt=FLOAT_FMT)
        entries.append(
            {
                "file": name,
                "index": rep.index,
                "dim": rep.model.dim,
                "length": rep.model.length,
                "tau": rep.model.tau,
                "bin": rep.bin_value,
                "theta0": rep.model.theta0.tolist(),
                "theta1": rep.model.theta1.tolist(),
                "noise": _noise_payload(rep.model.noise),
            }
        )
    _write_manifest(
        outdir,
        {
            "subcommand": "simulate",
            "dataset": dataset,
            "variant": variant,
            "seed": seed,
            "reps": reps,
            "duration_seconds": time.time() - started,
            "replications": entries,
        },
    )


_WORKER: dict = {}


def _benchmark_init(data_dir: str):
    data_dir = Path(data_dir)
    manifest = json.loads((data_dir / "manifest.json").read_text())
    streams = []
    for entry in manifest["replications"]:
        stream = np.loadtxt(data_dir / entry["file"], delimiter=",", ndmin=2)
        streams.append((stream, entry["tau"]))
    _WORKER["streams"] = streams
    _WORKER["variant"] = manifest.get("variant", "arl1")


def _benchmark_eval(config_dict: dict) -> dict:
    config = DetectorConfig.from_dict(config_dict)
    eval_cfg = EvalConfig()
    streams = _WORKER["streams"]
    variant = _WORKER["variant"]
    outcomes = []
    delays = []
    first_alarms = []
    for stream, tau in streams:
        detector = ChasmDetector(stream.shape[1], config)
        tau_hat = detector.first_alarm(stream)
        first_alarms.append(tau_hat)
        if tau is not None:
            outcome = classify_single(tau, tau_hat, eval_cfg)
            outcomes.append(outcome.value)
            if outcome is Outcome.TP:
                delays.append(tau_hat - tau)
    row: dict = config.to_dict()  # resolved config, defaults included
    row["n_reps"] = len(streams)
    if variant == "arl1":
        enum_outcomes = [Outcome(o) for o in outcomes]
        precision, recall, f1 = prf_single(enum_outcomes, len(streams))
        counts = {o.value: sum(1 for e in enum_outcomes if e is o) for o in Outcome}
        delay_result = arl(delays, "delay")
        row.update(
            tp=counts["tp"],
            fp=counts["fp"],
            fn_late=counts["fn_late"],
            fn_none=counts["fn_none"],
            precision=precision,
            recall=recall,
            f1=f1,
            arl1=delay_result.value,
            arl0=None,
            arl0_censored_fraction=None,
        )
        row["_outcomes"] = outcomes
    else:
        horizon = max(stream.shape[0] for stream, _ in streams)
        in_control = arl(first_alarms, "in_control", censor_at=horizon)
        row.update(
            tp=None,
            fp=None,
            fn_late=None,
            fn_none=None,
            precision=None,
            recall=None,
            f1=None,
            arl1=None,
            arl0=in_control.value,
            arl0_censored_fraction=in_control.censored_fraction,
        )
        row["_outcomes"] = []
    return row


_METRIC_COLUMNS = [
    "n_reps",
    "tp",
    "fp",
    "fn_late",
    "fn_none",
    "precision",
    "recall",
    "f1",
    "arl0",
    "arl0_censored_fraction",
    "arl1",
]


def _bootstrap_f1(outcomes: list[str], n_boot: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    labels = np.asarray(outcomes)
    n = labels.shape[0]
    scores = np.empty(n_boot)
    for b in range(n_boot):
        sample = labels[rng.integers(0, n, n)]
        enum_sample = [Outcome(o) for o in sample]
        _, _, scores[b] = prf_single(enum_sample, n)
    return {
        "replicates": n_boot,
        "f1_mean": float(scores.mean()),
        "f1_std": float(scores.std(ddof=1)) if n_boot > 1 else 0.0,
        "f1_p2.5": float(np.percentile(scores, 2.5)),
        "f1_p97.5": float(np.percentile(scores, 97.5)),
    }


@main.command()
@click.option("--input", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--grid", "grid_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", default=None, type=int, help="Worker count; CHASM_JOBS is the fallback.")
@click.option("--bootstrap", default=0, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@_guarded
def benchmark(data_dir, grid_path, outdir, jobs, bootstrap, seed):
    """Evaluate a grid of detector configs over a simulated data set."""
    started = time.time()
    data_dir = Path(data_dir)
    if not (data_dir / "manifest.json").exists():
        raise ValueError(f"{data_dir}: no manifest.json; run `chasm simulate` first")
    grid_raw = _load_json(grid_path)
    if not isinstance(grid_raw, list) or not grid_raw:
        raise ValueError(f"{grid_path}: expected a non-empty JSON array of configs")
    for entry in grid_raw:
        DetectorConfig.from_dict(entry)  # validate the whole grid up front
    jobs = _resolve_jobs(jobs)
    if jobs <= 1 or len(grid_raw) == 1:
        _benchmark_init(str(data_dir))
        rows = [_benchmark_eval(entry) for entry in grid_raw]
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_benchmark_init, initargs=(str(data_dir),)
        ) as pool:
            rows = list(pool.map(_benchmark_eval, grid_raw))
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config_columns = list(DetectorConfig.__dataclass_fields__)
    with open(outdir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(config_columns + _METRIC_COLUMNS)
        for row in rows:
            writer.writerow(
                [_fmt(row.get(c)) for c in config_columns]
                + [_fmt(row.get(c)) for c in _METRIC_COLUMNS]
            )
    scored = [r for r in rows if r.get("f1") is not None]
    best = None
    if scored:
        best_row = max(scored, key=lambda r: r["f1"])
        best = {k: v for k, v in best_row.items() if not k.startswith("_")}
        if bootstrap > 0:
            best["bootstrap"] = _bootstrap_f1(best_row["_outcomes"], bootstrap, seed)
        (outdir / "best.json").write_text(json.dumps(best, indent=2) + "\n")
    _write_manifest(
        outdir,
        {
            "subcommand": "benchmark",
            "input": str(data_dir),
            "grid_file": str(grid_path),
            "grid": [DetectorConfig.from_dict(entry).to_dict() for entry in grid_raw],
            "seed": seed,
            "jobs": jobs,
            "best_f1": None if best is None else best["f1"],
            "duration_seconds": time.time() - started,
        },
    )


def _bias_experiment(config: dict, seed: int) -> BiasExperiment:
    known = {"rhos", "checkpoints", "n_mc", "model"}
    unknown = set(config) - known
    if unknown:
        raise ValueError(f"unknown bias config keys: {sorted(unknown)}")
    kwargs: dict = {"seed": seed}
    if "rhos" in config:
        kwargs["rhos"] = tuple(config["rhos"])
    if "checkpoints" in config:
        kwargs["checkpoints"] = tuple(config["checkpoints"])
    if "n_mc" in config:
        kwargs["n_mc"] = int(config["n_mc"])
    if "model" in config:
        spec = config["model"]
        theta = rotation_transition(float(spec["a"]), float(spec["b"]))
        length = (kwargs.get("checkpoints") or BiasExperiment().checkpoints)[-1] + 1
        noise = NoiseSpec("gaussian", covariance=np.eye(2))
        kwargs["model"] = VarModel(2, theta, theta, noise, None, length)
    return BiasExperiment(**kwargs)


@main.command()
@click.option("--config", "config_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", "outdir", required=True, type=click.Path(file_okay=False))
@click.option("--jobs", default=None, type=int, help="Worker count; CHASM_JOBS is the fallback.")
@click.option("--seed", default=0, show_default=True, type=int)
@_guarded
def bias(config_path, outdir, jobs, seed):
    """Tabulate the estimator bias norm over forgetting factors and horizons."""
    started = time.time()
    config = _load_json(config_path) if config_path else {}
    experiment = _bias_experiment(config, seed)
    points = run_bias(experiment, jobs=_resolve_jobs(jobs))
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "bias.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rho", "n", "bias_norm", "stderr"])
        for point in points:
            writer.writerow(
                [_fmt(point.rho), point.n, _fmt(point.bias_norm), _fmt(point.stderr)]
            )
    model = experiment.resolved_model()
    _write_manifest(
        outdir,
        {
            "subcommand": "bias",
            "seed": seed,
            "rhos": list(experiment.rhos),
            "checkpoints": list(experiment.checkpoints),
            "n_mc": experiment.n_mc,
            "model": {
                "theta": model.theta0.tolist(),
                "noise_kind": model.noise.kind,
                "noise_covariance": model.noise.covariance.tolist(),
            },
            "duration_seconds": time.time() - started,
        },
    )


if __name__ == "__main__":
    main()
