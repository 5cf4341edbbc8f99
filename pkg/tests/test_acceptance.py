"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.  The Monte Carlo criteria parallelise over the
available cores and stay inside their stated wall-clock budgets.
"""

import json
import math
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from click.testing import CliRunner

import chasm
from chasm.bias import BiasExperiment, run_bias
from chasm.cli import main as cli_main
from chasm.metrics import Outcome, classify_single, prf_single
from chasm.pipeline import ChasmDetector, DetectorConfig
from chasm.synthetic import NoiseSpec, VarModel, make_dataset, simulate

from test_dynamics import batch_solution, relative_error
from test_mewma import augmented_statistic, stacked_real_statistic, synthetic_state
from test_spectrum import brute_force_assignment

JOBS = 2

TABLE_GRID = [
    {"rho": rho, "rank": 2, "alpha": alpha, "threshold": threshold}
    for rho in (0.95, 0.98, 0.99, 1.0)
    for alpha, threshold in (
        (0.08, 8), (0.08, 10), (0.09, 10), (0.09, 12), (0.10, 10),
        (0.10, 12), (0.12, 12), (0.12, 14), (0.15, 14), (0.15, 15),
        (0.18, 15), (0.18, 18), (0.20, 18), (0.20, 20), (0.25, 20),
        (0.25, 22), (0.30, 25), (0.30, 28), (0.35, 25), (0.35, 28),
    )
]


def report(number, name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} ({name}): {detail}")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def test_criterion_01_estimator_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for rho in (1.0, 0.99, 0.95, 0.9):
        for _ in range(100):
            dim = int(rng.integers(1, 6))
            length = int(rng.integers(dim + 2, 65))
            xs = rng.standard_normal((length, dim))
            est = chasm.DynamicsEstimator(dim, rho=rho, epsilon=1e-6 * dim)
            est.extend(xs)
            oracle = batch_solution(xs, rho, 1e-6 * dim)
            worst = max(worst, relative_error(est.theta, oracle))
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-8 and elapsed < 10.0
    report(1, "estimator vs batch oracle", ok,
           f"400 cases, worst relative error {worst:.3e}, {elapsed:.1f}s")


def test_criterion_02_alignment_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(102)
    exact = 0
    for _ in range(200):
        r = int(rng.integers(2, 7))
        cost = rng.standard_normal((r, r)) ** 2
        perm = chasm.solve_assignment(cost)
        objective = math.fsum(cost[i, perm.mapping[i]] for i in range(r))
        best, _ = brute_force_assignment(cost)
        if objective == best:
            exact += 1
    elapsed = time.perf_counter() - started
    ok = exact == 200 and elapsed < 5.0
    report(2, "assignment vs enumeration", ok,
           f"{exact}/200 instances exactly optimal, {elapsed:.1f}s")


def test_criterion_03_statistic_oracle():
    started = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    negatives = 0
    for _ in range(1000):
        state = synthetic_state(rng, rank=int(rng.integers(1, 5)))
        direct = augmented_statistic(state)
        got = state.statistic()
        worst = max(worst, abs(got - direct) / max(abs(direct), 1e-300))
        if got < 0.0:
            negatives += 1
    elapsed = time.perf_counter() - started
    ok = worst <= 1e-10 and negatives == 0 and elapsed < 5.0
    report(3, "statistic vs augmented inverse", ok,
           f"1000 states, worst relative error {worst:.3e}, "
           f"{negatives} negatives, {elapsed:.1f}s")


def test_criterion_04_proper_case_reduction():
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(200):
        state = synthetic_state(rng, rank=int(rng.integers(1, 5)))
        state.sigma_tilde[:] = 0.0
        load = state.effective_ridge
        schur_inv = np.linalg.inv(state.sigma + load * np.eye(state.rank))
        coupling = -schur_inv @ state.sigma_tilde @ np.linalg.inv(
            state.sigma.conj() + load * np.eye(state.rank)
        )
        assert np.array_equal(coupling, np.zeros_like(coupling))
        stacked = stacked_real_statistic(state)
        worst = max(worst, abs(state.statistic() - stacked) / max(abs(stacked), 1e-300))
    ok = worst <= 1e-9
    report(4, "proper case equals real chart", ok,
           f"200 states, coupling exactly zero, worst relative error {worst:.3e}")


def test_criterion_05_bias_rates():
    started = time.perf_counter()
    checkpoints = (250, 500, 1000, 2000, 4000)
    exp = BiasExperiment(rhos=(1.0, 0.99, 0.95), checkpoints=checkpoints, n_mc=5000, seed=0)
    points = run_bias(exp, jobs=JOBS)
    by_rho = {}
    for point in points:
        by_rho.setdefault(point.rho, {})[point.n] = point.bias_norm
    ns = np.asarray(checkpoints, dtype=float)
    slope = np.polyfit(np.log(ns), np.log([by_rho[1.0][n] for n in checkpoints]), 1)[0]
    plateau_change = (
        abs(by_rho[0.95][4000] - by_rho[0.95][2000]) / by_rho[0.95][2000]
    )
    ordered = by_rho[0.99][4000] < by_rho[0.95][4000]
    elapsed = time.perf_counter() - started
    ok = -1.4 <= slope <= -0.6 and plateau_change <= 0.25 and ordered and elapsed < 600.0
    report(5, "bias decay and saturation", ok,
           f"slope {slope:.2f}, plateau change {plateau_change:.1%}, "
           f"plateau(.99)={by_rho[0.99][4000]:.4f} < plateau(.95)={by_rho[0.95][4000]:.4f}, "
           f"{elapsed:.0f}s at 5000 replications")


def test_criterion_06_detection_quality(tmp_path):
    started = time.perf_counter()
    runner = CliRunner()
    data_dir = tmp_path / "gaussian100"
    result = runner.invoke(
        cli_main,
        ["simulate", "--dataset", "gaussian", "--reps", "100", "--seed", "2026",
         "--output", str(data_dir)],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    grid_path = tmp_path / "grid.json"
    grid_path.write_text(json.dumps(TABLE_GRID))
    bench_dir = tmp_path / "bench"
    result = runner.invoke(
        cli_main,
        ["benchmark", "--input", str(data_dir), "--grid", str(grid_path),
         "--output", str(bench_dir), "--jobs", str(JOBS)],
        catch_exceptions=False,
    )
    assert result.exit_code == 0
    best = json.loads((bench_dir / "best.json").read_text())
    elapsed = time.perf_counter() - started
    ok = best["f1"] >= 0.60 and elapsed < 300.0
    report(6, "benchmark detection quality", ok,
           f"best F1 {best['f1']:.3f} at rho={best['rho']}, alpha={best['alpha']}, "
           f"h={best['threshold']} over {len(TABLE_GRID)} configs x 100 reps, {elapsed:.0f}s")


_RHO_SENSITIVITY = {"streams": None}


def _rho_sensitivity_init(seed, n_streams):
    reps = make_dataset("gaussian", n_streams, "arl0", seed)
    _RHO_SENSITIVITY["streams"] = [rep.stream for rep in reps]


def _rho_sensitivity_task(args):
    rho, start, stop = args
    config = DetectorConfig(rho=rho, rank=2, alpha=0.18, threshold=15.0)
    out = []
    for stream in _RHO_SENSITIVITY["streams"][start:stop]:
        first = ChasmDetector(2, config).first_alarm(stream)
        out.append(stream.shape[0] if first is None else first)
    return rho, start, out


def test_criterion_07_rho_sensitivity():
    started = time.perf_counter()
    n_streams = 200
    tasks = [
        (rho, start, min(start + 25, n_streams))
        for rho in (0.95, 1.0)
        for start in range(0, n_streams, 25)
    ]
    with ProcessPoolExecutor(
        max_workers=JOBS, initializer=_rho_sensitivity_init, initargs=(404, n_streams)
    ) as pool:
        results = list(pool.map(_rho_sensitivity_task, tasks))
    means = {}
    for rho in (0.95, 1.0):
        values = [v for r, _, chunk in results if r == rho for v in chunk]
        assert len(values) == n_streams
        means[rho] = float(np.mean(values))
    elapsed = time.perf_counter() - started
    ok = means[0.95] <= means[1.0] and elapsed < 600.0
    report(7, "forgetting shortens in-control runs", ok,
           f"mean time to false alarm {means[0.95]:.0f} (rho=.95) vs "
           f"{means[1.0]:.0f} (rho=1.0) over 200 streams, {elapsed:.0f}s")


def test_criterion_08_marginal_equivalence():
    report_data = chasm.marginal_equivalence_demo(theta=0.7, length=100_000, seed=404)
    expected = report_data.expected_variance
    cov_error = max(
        np.abs(report_data.cov_diag - expected * np.eye(2)).max(),
        np.abs(report_data.cov_rotation - expected * np.eye(2)).max(),
    )
    ok = (
        abs(expected - 1.9608) < 1e-3
        and cov_error <= 0.05 * expected
        and report_data.spectral_separation > 0.5
    )
    report(8, "matched marginals, distinct spectra", ok,
           f"covariance error {cov_error:.3f} (5% of {expected:.4f} allowed), "
           f"spectral separation {report_data.spectral_separation:.3f}")


def test_criterion_09_metric_arithmetic():
    fixture = [
        (200, 210), (150, 150), (200, 250), (200, 251), (200, 199),
        (120, 100), (250, None), (130, 165), (270, 400), (200, 140),
    ]
    outcomes = [classify_single(tau, tau_hat) for tau, tau_hat in fixture]
    counts = {o: sum(1 for x in outcomes if x is o) for o in Outcome}
    precision, recall, f1 = prf_single(outcomes, len(fixture))
    expected_counts = {Outcome.TP: 4, Outcome.FP: 3, Outcome.FN_LATE: 2, Outcome.FN_NONE: 1}
    expected_p = 4 / 9
    expected_r = 4 / 10
    expected_f1 = 2 * expected_p * expected_r / (expected_p + expected_r)
    ok = (
        counts == expected_counts
        and precision == expected_p
        and recall == expected_r
        and f1 == expected_f1
    )
    report(9, "metric arithmetic on fixed fixture", ok,
           f"counts {[counts[o] for o in Outcome]}, "
           f"P={precision:.4f} R={recall:.4f} F1={f1:.4f} (exact)")


def _measure_peak(stream, config, warm=50):
    # settle per-run allocations before tracing so the peak reflects the
    # steady-state footprint rather than first-call effects
    detector = ChasmDetector(stream.shape[1], config)
    for row in stream[:warm]:
        detector.step(row)
    tracemalloc.start()
    for row in stream[warm:]:
        detector.step(row)
    peak = tracemalloc.get_traced_memory()[1]
    tracemalloc.stop()
    return peak


def test_criterion_10_streaming_contract():
    config = DetectorConfig(rho=0.99, threshold=1e9)
    model = VarModel(
        2,
        chasm.rotation_transition(0.5, 0.3),
        chasm.rotation_transition(0.5, 0.3),
        NoiseSpec("gaussian", covariance=np.eye(2)),
        None,
        100_000,
    )
    stream = simulate(model, np.random.default_rng(1010))
    ChasmDetector(2, config).run(stream[:200])  # warm the compiled kernels

    _measure_peak(stream[:1_000], config)  # throwaway to settle the tracer
    peak_short = _measure_peak(stream[:1_000], config)
    peak_long = _measure_peak(stream, config)
    memory_ratio = abs(peak_long - peak_short) / max(peak_long, peak_short)

    def timed_steps(n):
        detector = ChasmDetector(2, config)
        for row in stream[:500]:
            detector.step(row)
        started = time.perf_counter()
        for row in stream[500 : 500 + n]:
            detector.step(row)
        return time.perf_counter() - started

    timed_steps(3_000)  # throwaway
    time_short = timed_steps(3_000)
    time_long = timed_steps(30_000)
    time_ratio = time_long / time_short
    ok = memory_ratio <= 0.05 and time_ratio < 12.0
    report(10, "constant memory and step latency", ok,
           f"peak heap {peak_short / 1024:.0f}KiB vs {peak_long / 1024:.0f}KiB "
           f"(within {memory_ratio:.1%}), 10x length took {time_ratio:.1f}x time")
