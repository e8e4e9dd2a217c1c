"""Experiment runners behind ``adaquery run``.

Each experiment kind has a trial function producing one CSV row and a
summarizer turning the rows into metrics and threshold checks. Trial i draws
its randomness from the i-th child of ``SeedSequence(seed)``, so rows do not
depend on ``--jobs`` or on completion order. Wall-clock figures go to the
JSON summary only; the CSV stays byte-identical across reruns.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .config import SCHEMA_VERSION, ExperimentConfig
from .errors import BudgetExhaustedError, SampleSizeWarning
from .harness import (
    KnownDistribution,
    coin_workload,
    exact_query_mean,
    interact,
    majority_attack,
    make_mechanism,
    non_adaptive_attack,
    random_balanced_query,
    random_biased_query,
    session_errors,
)
from .optimize import GdConfig, gd_answer, gd_answer_boosted, gradient_oracle, quadratic_loss
from .privacy import amplify_with_replacement, amplify_without_replacement
from .queries import Dataset
from .scq import ScqConfig, answer_scq_many, counting_subsample_size, expected_scq_answer
from .sqmech import required_subsample_size

FAILED = "budget-exhausted"


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# -- trial functions ---------------------------------------------------------
# Each takes (params, rng, index) and returns a dict keyed by the kind's columns.


def _workload(p, rng):
    if p["workload"] == "coin":
        return non_adaptive_attack(coin_workload(p["universe_size"], p["k"], p["alpha"], rng))
    return majority_attack(p["universe_size"], p["k"], rng)


def _accuracy_trial(mechanism: str):
    def trial(p, rng, index):
        dist = KnownDistribution.uniform(p["universe_size"])
        data = dist.sample(p["n"], rng)
        options = {"replacement": p["replacement"]} if "replacement" in p else {}
        mech = make_mechanism(mechanism, data, p["k"], rng, p["alpha"], p["beta"], **options)
        state = interact(mech, _workload(p, rng))
        errors = session_errors(state, dist)
        examined = {r.samples_examined for r in mech.transcript.records}
        row = {
            "max_error": float(errors.max()),
            "final_error": float(errors[-1]),
            "samples_examined": examined.pop() if len(examined) == 1 else -1,
            "failed": bool(errors.max() > p["alpha"]),
        }
        if mechanism == "scq":
            ell = mech.ell
            row["honest"] = all(abs(a * ell - round(a * ell)) < 1e-9 for a in state.answers)
        return row
    return trial


def _scq_trial(p, rng, index):
    flips = p["flip_probs"]
    flip = flips[index % len(flips)]
    data = Dataset(rng.integers(0, p["universe_size"], size=p["n"]), universe_size=p["universe_size"])
    q = random_biased_query(p["universe_size"], rng.random(), rng, name="scq")
    ones = int(q(data.points).sum())
    cfg = ScqConfig(alpha=0.5, beta=0.5, k=p["calls"], flip_prob=flip)
    bits = answer_scq_many(data, q, cfg, cfg.ledger(), rng, p["calls"])
    expected = expected_scq_answer(ones, p["n"], flip)
    stderr = math.sqrt(expected * (1 - expected) / p["calls"])
    z = (bits.mean() - expected) / stderr if stderr > 0 else 0.0
    return {"dataset": index // len(flips), "flip_prob": flip, "ones": ones,
            "empirical_mean": float(bits.mean()), "expected_mean": expected, "z": float(z)}


def _attack_trial(p, rng, index):
    dist = KnownDistribution.uniform(p["universe_size"])
    data = dist.sample(p["n"], rng)
    naive_rng, mech_rng = rng.spawn(2)
    errors = []
    for kind, r in (("naive-empirical", naive_rng), (p["mechanism"], mech_rng)):
        mech = make_mechanism(kind, data, p["k"], r, p["alpha"], p["beta"])
        state = interact(mech, majority_attack(p["universe_size"], p["k"], r))
        errors.append(abs(state.answers[-1] - exact_query_mean(dist, state.queries[-1])))
    return {"naive_error": errors[0], "mechanism_error": errors[1]}


def _gd_trial(mode: str):
    def trial(p, rng, index):
        loss = quadratic_loss(p["d"])
        points = np.clip(p["center"] + p["spread"] * rng.standard_normal((p["n"], p["d"])), 0.0, 1.0)
        data = Dataset(points)
        if p["T"] > 0:
            cfg = GdConfig(k=1, T=p["T"], ell=p["ell"], alpha=p["alpha"], beta=p["beta"], mode=mode)
        else:
            cfg = GdConfig.for_loss(loss, p["alpha"], p["ell"], mode, beta=p["beta"])
        sq = gradient_oracle(data, loss, cfg, p["oracle_alpha"], rng, boosted=p["boosted"])
        x = gd_answer_boosted(loss, cfg, sq) if p["boosted"] else gd_answer(loss, cfg, sq)
        excess = loss.excess_loss(points, x)
        return {"T": cfg.T, "oracle_calls": len(sq.transcript.records), "excess_loss": excess,
                "failed": bool(excess > p["alpha"])}
    return trial


def _bench_trial(p, rng, index):
    """Time k queries of each mechanism at every n; returns rows for this repetition."""
    dist = KnownDistribution.uniform(p["universe_size"])
    rows = []
    for n in p["n_values"]:
        data = dist.sample(n, rng)
        queries = [random_balanced_query(p["universe_size"], rng, name=f"b{i}") for i in range(p["k"])]
        for kind in ("alg1", "naive-empirical"):
            mech = make_mechanism(kind, data, p["k"], rng, p["alpha"], p["beta"])
            before = sum(q.eval_count for q in queries)
            start = time.perf_counter_ns()
            for q in queries:
                mech.answer(q)
            elapsed = time.perf_counter_ns() - start
            examined = {r.samples_examined for r in mech.transcript.records}
            rows.append({
                "n": n, "mechanism": kind, "queries": len(queries),
                "samples_examined": examined.pop() if len(examined) == 1 else -1,
                "points_evaluated": sum(q.eval_count for q in queries) - before,
                "_ns_per_query": elapsed / len(queries),
            })
    return rows


def amplification_rows(p) -> list[dict]:
    rows = []
    n = p["n"]
    for eps in p["eps_values"]:
        for ratio in p["ratios"]:
            ell = max(1, round(ratio * n))
            without = amplify_without_replacement(eps, ell, n)
            with_ = amplify_with_replacement(eps, ell, n)
            bound = 2 * ell / n * eps
            rows.append({"eps": eps, "ratio": ratio, "n": n, "ell": ell, "without_replacement": without,
                         "with_replacement": with_, "bound": bound,
                         "within_bound": bool(eps > 1 or (without <= bound and with_ <= bound))})
    return rows


# -- summaries ---------------------------------------------------------------


def _describe(values) -> dict:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {}
    return {"mean": float(v.mean()), "q05": float(np.quantile(v, 0.05)),
            "q50": float(np.quantile(v, 0.5)), "q95": float(np.quantile(v, 0.95))}


def _check(value, op: str, threshold) -> dict:
    passed = value <= threshold if op == "<=" else value >= threshold if op == ">=" else value == threshold
    return {"value": value, "op": op, "threshold": threshold, "passed": bool(passed)}


def _ok(rows):
    return [r for r in rows if r["status"] == "ok"]


def _summarize_accuracy(rows, cfg):
    ok = _ok(rows)
    failure_rate = sum(1 for r in rows if r["status"] != "ok" or r["failed"]) / len(rows)
    metrics = {"failure_rate": failure_rate, "max_error": _describe([r["max_error"] for r in ok]),
               "budget_exhausted_trials": len(rows) - len(ok)}
    if cfg.kind == "counting-via-scq":
        ell = counting_subsample_size(cfg.params["alpha"], cfg.params["beta"], cfg.params["k"])
    else:
        ell = required_subsample_size(cfg.params["alpha"], cfg.params["beta"], cfg.params["k"])
    metrics["ell"] = ell
    checks = {
        "failure_rate": _check(failure_rate, "<=", cfg.checks["max_failure_rate"]),
        "samples_examined": _check(all(r["samples_examined"] == ell for r in ok), "==", True),
    }
    if cfg.kind == "counting-via-scq":
        checks["honest"] = _check(all(r["honest"] for r in ok), "==", True)
    return metrics, checks


def _summarize_scq(rows, cfg):
    ok = _ok(rows)
    within = sum(abs(r["z"]) <= cfg.checks["z_limit"] for r in ok) / len(rows)
    metrics = {"within_rate": within, "abs_z": _describe([abs(r["z"]) for r in ok])}
    return metrics, {"within_rate": _check(within, ">=", cfg.checks["min_within_rate"])}


def _summarize_attack(rows, cfg):
    ok = _ok(rows)
    sep = sum(r["naive_error"] > r["mechanism_error"] for r in ok) / len(rows)
    above = sum(r["naive_error"] > cfg.checks["naive_threshold"] for r in ok) / len(rows)
    metrics = {"separation_rate": sep, "naive_above_rate": above,
               "naive_error": _describe([r["naive_error"] for r in ok]),
               "mechanism_error": _describe([r["mechanism_error"] for r in ok])}
    checks = {"separation_rate": _check(sep, ">=", cfg.checks["min_separation_rate"]),
              "naive_above_rate": _check(above, ">=", cfg.checks["min_naive_above_rate"])}
    return metrics, checks


def _summarize_gd(rows, cfg):
    ok = _ok(rows)
    excess = [r["excess_loss"] for r in ok]
    mean_excess = float(np.mean(excess)) if excess else math.inf
    failure = sum(1 for r in rows if r["status"] != "ok" or r["failed"]) / len(rows)
    metrics = {"mean_excess_loss": mean_excess, "excess_loss": _describe(excess), "failure_rate": failure,
               "T": ok[0]["T"] if ok else None}
    checks = {"mean_excess_loss": _check(mean_excess, "<=", cfg.checks["max_mean_excess"])}
    if not cfg.params["boosted"] and ok:
        expected_calls = ok[0]["T"] * cfg.params["d"]
        checks["oracle_calls"] = _check(all(r["oracle_calls"] == expected_calls for r in ok), "==", True)
    return metrics, checks


def _summarize_bench(rows, cfg, timings):
    n_values = cfg.params["n_values"]
    metrics, checks = {"ns_per_query": {}}, {}
    for kind in ("alg1", "naive-empirical"):
        med = {n: float(np.median(timings[(kind, n)])) for n in n_values}
        metrics["ns_per_query"][kind] = {str(n): med[n] for n in n_values}
        metrics[f"{kind}_growth"] = med[max(n_values)] / med[min(n_values)]
    ell = required_subsample_size(cfg.params["alpha"], cfg.params["beta"], cfg.params["k"])
    checks["alg1_samples_examined"] = _check(
        all(r["samples_examined"] == ell for r in rows if r["mechanism"] == "alg1"), "==", True)
    checks["naive_samples_examined"] = _check(
        all(r["samples_examined"] == r["n"] for r in rows if r["mechanism"] == "naive-empirical"), "==", True)
    checks["alg1_growth"] = _check(metrics["alg1_growth"], "<=", cfg.checks["max_alg1_growth"])
    checks["naive_growth"] = _check(metrics["naive-empirical_growth"], ">=", cfg.checks["min_naive_growth"])
    return metrics, checks


def _summarize_amplification(rows, cfg):
    ok = all(r["within_bound"] for r in rows)
    return {"rows": len(rows)}, {"within_bound": _check(ok, "==", True)}


@dataclass(frozen=True)
class Experiment:
    columns: tuple
    trial: Callable
    summarize: Callable


EXPERIMENTS = {
    "sq-accuracy": Experiment(("max_error", "final_error", "samples_examined", "failed"),
                              _accuracy_trial("alg1"), _summarize_accuracy),
    "counting-via-scq": Experiment(("max_error", "final_error", "samples_examined", "honest", "failed"),
                                   _accuracy_trial("scq"), _summarize_accuracy),
    "scq-accuracy": Experiment(("dataset", "flip_prob", "ones", "empirical_mean", "expected_mean", "z"),
                               _scq_trial, _summarize_scq),
    "attack": Experiment(("naive_error", "mechanism_error"), _attack_trial, _summarize_attack),
    "gd-convex": Experiment(("T", "oracle_calls", "excess_loss", "failed"), _gd_trial("convex"), _summarize_gd),
    "gd-strongly-convex": Experiment(("T", "oracle_calls", "excess_loss", "failed"),
                                     _gd_trial("strongly-convex"), _summarize_gd),
}
BENCH_COLUMNS = ("trial", "n", "mechanism", "queries", "samples_examined", "points_evaluated")
AMPLIFICATION_COLUMNS = ("eps", "ratio", "n", "ell", "without_replacement", "with_replacement", "bound",
                         "within_bound")


def run_trial(kind: str, params: dict, seed_seq: np.random.SeedSequence, index: int) -> dict:
    """One trial with its own generator; budget exhaustion marks the trial failed."""
    rng = np.random.default_rng(seed_seq)
    experiment = EXPERIMENTS[kind]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SampleSizeWarning)
        try:
            row = experiment.trial(params, rng, index)
            status = "ok"
        except BudgetExhaustedError:
            row, status = {}, FAILED
    return {"trial": index, "status": status, **{c: row.get(c, "") for c in experiment.columns}}


def _run_trial_args(args):
    return run_trial(*args)


def _map_trials(cfg: ExperimentConfig, jobs: int) -> list[dict]:
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    tasks = [(cfg.kind, cfg.params, s, i) for i, s in enumerate(seeds)]
    if jobs <= 1 or cfg.trials == 1:
        return [run_trial(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # map yields in submission order, so rows stay in trial order.
        return list(pool.map(_run_trial_args, tasks, chunksize=max(1, cfg.trials // (4 * jobs))))


def render_csv(cfg: ExperimentConfig, columns, rows) -> str:
    buf = io.StringIO()
    buf.write("# adaquery experiment\n")
    buf.write(f"# schema_version = {SCHEMA_VERSION}\n")
    for key, value in cfg.items():
        if isinstance(value, tuple):
            value = ",".join(_fmt(v) for v in value)
        buf.write(f"# {key} = {_fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


@dataclass
class RunResult:
    csv_path: Path
    json_path: Path
    summary: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.summary["checks"].values())


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Run every trial, write ``<output>.csv`` and ``<output>.json``, and return the summary."""
    start = time.perf_counter()
    if cfg.kind == "bench-timing":
        # Timing runs serially: parallel workers would contend for the same cores.
        seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
        rows, timings = [], {}
        for i, s in enumerate(seeds):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", SampleSizeWarning)
                bench_rows = _bench_trial(cfg.params, np.random.default_rng(s), i)
            for row in bench_rows:
                timings.setdefault((row["mechanism"], row["n"]), []).append(row.pop("_ns_per_query"))
                rows.append({"trial": i, **row})
        columns = BENCH_COLUMNS
        metrics, checks = _summarize_bench(rows, cfg, timings)
    elif cfg.kind == "amplification-table":
        rows = amplification_rows(cfg.params)
        columns = AMPLIFICATION_COLUMNS
        metrics, checks = _summarize_amplification(rows, cfg)
    else:
        rows = _map_trials(cfg, jobs)
        columns = ("trial", "status") + EXPERIMENTS[cfg.kind].columns
        metrics, checks = EXPERIMENTS[cfg.kind].summarize(rows, cfg)

    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out.with_name(out.name + ".csv"), out.with_name(out.name + ".json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_csv(cfg, columns, rows))
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.as_dict(),
        "csv": str(csv_path),
        "rows": len(rows),
        "metrics": metrics,
        "checks": checks,
        "passed": all(c["passed"] for c in checks.values()),
        "wall_clock_seconds": time.perf_counter() - start,
    }
    with open(json_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(json.dumps(summary, sort_keys=True, indent=2, default=_json_default) + "\n")
    return RunResult(csv_path, json_path, summary)
