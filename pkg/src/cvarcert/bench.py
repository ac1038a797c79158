"""Monte Carlo comparison of the validators on synthetic markets.

One replication draws fresh folds, calibrates the budget from the training
fold, runs a method's full phase I (weights + candidate menu) and phase II
(validation and selection), and scores the selected portfolio on the test
fold: the empirical test CVaR, the robust left-hand side at the selected
radius, and the feasibility flag (robust LHS within budget).  Wall-clock
runtime covers the two phases only, never data generation or scoring.

Replication seeds are derived from (master seed, method, scenario, rep),
so results are reproducible row by row regardless of worker count, and
adding a method never shifts another method's draws.
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from cvarcert.config import BenchmarkConfig
from cvarcert.ratio import compute_weights, fit_ratio_model, split_early_late
from cvarcert.risk import PortfolioWeights, WeightedSample, robust_lhs, weighted_cvar
from cvarcert.simulate import calibrate_gamma, make_scenario
from cvarcert.solver import generate_candidates, solve_reformulation, training_cost_vector
from cvarcert.validator import (
    ValidatorParams,
    iw_cv_select,
    iw_plugin_select,
    old_ngs_validate,
    validate_and_select,
)

logger = logging.getLogger(__name__)

METHODS = ("NEW", "OLD_NGS", "IW_CV", "IW_PLUGIN")
_METHOD_IDS = {name: i for i, name in enumerate(METHODS)}
CLI_METHOD_NAMES = {"new": "NEW", "old-ngs": "OLD_NGS", "iw-cv": "IW_CV", "iw-plugin": "IW_PLUGIN"}

RAW_COLUMNS = (
    "method",
    "scenario",
    "rep",
    "abstained",
    "feasible",
    "objective",
    "test_cvar",
    "robust_lhs",
    "delta_selected",
    "runtime_seconds",
)

SUMMARY_COLUMNS = (
    "method",
    "scenario",
    "feasibility",
    "objective",
    "test_cvar",
    "lhs",
    "delta",
    "runtime_median",
    "reps",
    "abstention_rate",
)


@dataclass(eq=False)
class ReplicationResult:
    method: str
    scenario: int
    rep: int
    abstained: bool
    feasible: bool
    objective: float
    test_cvar: float
    robust_lhs: float
    delta_selected: float
    runtime_seconds: float


@dataclass(eq=False)
class SummaryRow:
    method: str
    scenario: int
    feasibility: float
    objective: float
    test_cvar: float
    lhs: float
    delta: float
    runtime_median: float
    reps: int
    abstention_rate: float


@dataclass(eq=False)
class SummaryTable:
    rows: list[SummaryRow]


def replication_seed(master_seed: int, method: str, scenario: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(master_seed), _METHOD_IDS[method], int(scenario), int(rep)))


def run_replication(method: str, scenario: int, config: BenchmarkConfig, rep_seed) -> ReplicationResult:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    base = rep_seed if isinstance(rep_seed, np.random.SeedSequence) else np.random.SeedSequence(rep_seed)
    rep = int(base.entropy[-1]) if isinstance(base.entropy, (tuple, list)) else 0

    sc = config.scenario
    train_series, val_series, test_series = make_scenario(scenario, sc, base)
    gamma = config.gamma if config.gamma is not None else calibrate_gamma(train_series, sc.alpha, config.gamma_margin)

    cand_seed = np.random.SeedSequence(entropy=base.entropy, spawn_key=base.spawn_key + (10,))
    mult_seed = np.random.SeedSequence(entropy=base.entropy, spawn_key=base.spawn_key + (11,))
    params = ValidatorParams(
        alpha=sc.alpha,
        beta=sc.beta,
        gamma=gamma,
        block_length=config.validator.block_length,
        bootstrap_draws=config.validator.bootstrap_draws,
        delta_min=config.validator.delta_min,
        delta_max=config.validator.delta_max,
        n_eff_min=config.validator.n_eff_min,
        multiplier_seed=mult_seed,
        k_folds=config.validator.k_folds,
        cv_fallback=config.validator.cv_fallback,
    )
    grid = config.candidates.grid()

    started = time.perf_counter()
    if method == "OLD_NGS":
        train_sample = WeightedSample.uniform(train_series)
        val_sample = WeightedSample.uniform(val_series)
    else:
        early, late = split_early_late(val_series, sc.recent_fraction)
        model = fit_ratio_model(
            early,
            late,
            clip_lo=config.weights.clip_lo,
            clip_hi=config.weights.clip_hi,
            l2_penalty=config.weights.l2_penalty,
        )
        val_sample = compute_weights(model, val_series)
        blend = config.candidates.train_weight_blend
        transported = compute_weights(model, train_series).w
        w_train = blend / train_series.n + (1.0 - blend) * transported
        train_sample = WeightedSample(train_series, w_train / w_train.sum())

    if method == "IW_CV":
        def builder(sample: WeightedSample, delta: float) -> PortfolioWeights | None:
            sol = solve_reformulation(sample, delta, sc.alpha, gamma, training_cost_vector(sample))
            return PortfolioWeights(sol.x) if sol.status == "optimal" else None

        report = iw_cv_select(builder, train_sample, val_sample, grid, params)
    else:
        menu = generate_candidates(
            train_sample,
            grid,
            config.candidates.n_dirichlet,
            sc.alpha,
            gamma,
            cand_seed,
            dirichlet_concentration=config.candidates.dirichlet_concentration,
            min_risk_anchor=config.candidates.min_risk_anchor,
        )
        if method == "NEW":
            report = validate_and_select(menu, val_sample, params)
        elif method == "OLD_NGS":
            report = old_ngs_validate(menu, val_series, params)
        else:  # IW_PLUGIN
            report = iw_plugin_select(menu, val_sample, params)
    runtime = time.perf_counter() - started

    if report.decision.kind != "selected":
        return ReplicationResult(
            method=method,
            scenario=scenario,
            rep=rep,
            abstained=True,
            feasible=False,
            objective=float("nan"),
            test_cvar=float("nan"),
            robust_lhs=float("nan"),
            delta_selected=float("nan"),
            runtime_seconds=runtime,
        )

    x_sel = report.selected_x
    delta_sel = float(report.decision.delta_star)
    c_train = training_cost_vector(train_sample)
    test_cvar = weighted_cvar(WeightedSample.uniform(test_series), x_sel, sc.alpha).h_w
    lhs = robust_lhs(test_cvar, delta_sel, sc.alpha, x_sel)
    return ReplicationResult(
        method=method,
        scenario=scenario,
        rep=rep,
        abstained=False,
        feasible=bool(lhs <= gamma),
        objective=float(c_train @ x_sel.x),
        test_cvar=float(test_cvar),
        robust_lhs=float(lhs),
        delta_selected=delta_sel,
        runtime_seconds=runtime,
    )


def _run_one(task) -> ReplicationResult:
    method, scenario, rep, master_seed, config = task
    return run_replication(method, scenario, config, replication_seed(master_seed, method, scenario, rep))


def _run_one_safe(task):
    try:
        return _run_one(task)
    except Exception as exc:  # noqa: BLE001 - replication failures are recorded, not fatal
        return (task[0], task[1], task[2], repr(exc))


def run_benchmark(
    config: BenchmarkConfig,
    reps: int,
    methods: tuple[str, ...] = ("NEW", "OLD_NGS"),
    scenarios: tuple[int, ...] = (1, 2),
    master_seed: int = 0,
    parallelism: int = 1,
    out_dir: str | Path | None = None,
) -> tuple[SummaryTable, list[ReplicationResult]]:
    """Run the full grid of (method, scenario, rep) and aggregate.

    Failed replications are logged, counted, and excluded; the failure
    count is printed at the end.  Raw rows are canonically sorted by
    (method, scenario, rep) so parallel and serial runs emit identical
    files apart from the runtime column.
    """
    if reps < 1:
        raise ValueError("need at least one replication")
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    tasks = [
        (method, scenario, rep, master_seed, config)
        for method in methods
        for scenario in scenarios
        for rep in range(reps)
    ]
    results: list[ReplicationResult] = []
    failures = 0
    if parallelism > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            outcomes = list(pool.map(_run_one_safe, tasks, chunksize=1))
    else:
        outcomes = [_run_one_safe(task) for task in tasks]
    for outcome in outcomes:
        if isinstance(outcome, ReplicationResult):
            results.append(outcome)
        else:
            failures += 1
            logger.error("replication failed: method=%s scenario=%s rep=%s: %s", *outcome)
    results.sort(key=lambda r: (r.method, r.scenario, r.rep))
    if failures:
        print(f"excluded {failures} failed replication(s)")

    summary = summarize(results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "raw.csv").write_text(raw_csv_text(results))
        (out / "summary.md").write_text(emit_report(summary, "markdown"))
        (out / "summary.csv").write_text(emit_report(summary, "csv"))
    return summary, results


def summarize(results: list[ReplicationResult]) -> SummaryTable:
    """Aggregate per (method, scenario); abstentions only count toward
    the abstention rate, never toward the means."""
    keys = sorted({(r.method, r.scenario) for r in results})
    rows = []
    for method, scenario in keys:
        group = [r for r in results if r.method == method and r.scenario == scenario]
        active = [r for r in group if not r.abstained]
        def _mean(vals):
            return float(np.mean(vals)) if vals else float("nan")
        rows.append(
            SummaryRow(
                method=method,
                scenario=scenario,
                feasibility=_mean([float(r.feasible) for r in active]),
                objective=_mean([r.objective for r in active]),
                test_cvar=_mean([r.test_cvar for r in active]),
                lhs=_mean([r.robust_lhs for r in active]),
                delta=_mean([r.delta_selected for r in active]),
                runtime_median=float(np.median([r.runtime_seconds for r in group])),
                reps=len(group),
                abstention_rate=float(np.mean([float(r.abstained) for r in group])),
            )
        )
    return SummaryTable(rows=rows)


def _fmt(x: float) -> str:
    return repr(float(x))


def raw_csv_text(results: list[ReplicationResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RAW_COLUMNS)
    for r in results:
        writer.writerow(
            [
                r.method,
                r.scenario,
                r.rep,
                int(r.abstained),
                int(r.feasible),
                _fmt(r.objective),
                _fmt(r.test_cvar),
                _fmt(r.robust_lhs),
                _fmt(r.delta_selected),
                _fmt(r.runtime_seconds),
            ]
        )
    return buf.getvalue()


def load_raw_csv(path) -> list[ReplicationResult]:
    results = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            results.append(
                ReplicationResult(
                    method=rec["method"],
                    scenario=int(rec["scenario"]),
                    rep=int(rec["rep"]),
                    abstained=bool(int(rec["abstained"])),
                    feasible=bool(int(rec["feasible"])),
                    objective=float(rec["objective"]),
                    test_cvar=float(rec["test_cvar"]),
                    robust_lhs=float(rec["robust_lhs"]),
                    delta_selected=float(rec["delta_selected"]),
                    runtime_seconds=float(rec["runtime_seconds"]),
                )
            )
    return results


def emit_report(summary: SummaryTable, format: str = "markdown") -> str:
    """Serialize the summary; markdown follows the benchmark table layout
    Feas., Obj., CVaR, LHS, delta, Runtime."""
    if not summary.rows:
        raise ValueError("empty summary: nothing to report")
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in summary.rows:
            writer.writerow(
                [
                    row.method,
                    row.scenario,
                    _fmt(row.feasibility),
                    _fmt(row.objective),
                    _fmt(row.test_cvar),
                    _fmt(row.lhs),
                    _fmt(row.delta),
                    _fmt(row.runtime_median),
                    row.reps,
                    _fmt(row.abstention_rate),
                ]
            )
        return buf.getvalue()
    if format != "markdown":
        raise ValueError(f"unknown report format {format!r}")

    lines = []
    for scenario in sorted({row.scenario for row in summary.rows}):
        lines.append(f"## Scenario {scenario}")
        lines.append("")
        lines.append("| Method | Feas. | Obj. | CVaR | LHS | delta | Runtime (s) | Abstain | R |")
        lines.append("|---|---|---|---|---|---|---|---|---|")
        for row in summary.rows:
            if row.scenario != scenario:
                continue
            lines.append(
                "| {m} | {f} | {o} | {c} | {l} | {d} | {r} | {a} | {n} |".format(
                    m=row.method,
                    f=_fmt(row.feasibility),
                    o=_fmt(row.objective),
                    c=_fmt(row.test_cvar),
                    l=_fmt(row.lhs),
                    d=_fmt(row.delta),
                    r=_fmt(row.runtime_median),
                    a=_fmt(row.abstention_rate),
                    n=row.reps,
                )
            )
        lines.append("")
    return "\n".join(lines)
