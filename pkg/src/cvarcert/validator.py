"""Feasibility validation of candidate portfolios on a holdout fold.

Pipeline, run once per candidate menu:

1. weighted CVaR map on the (possibly reweighted) validation sample:
   breakpoint t_w, value h_w, dispersion sigma_w, scores phi_i;
2. contiguous blocks of length b (remainder discarded) and centered block
   sums  S_kj = sum_{i in B_k} w_i (phi_ij - h_wj);
3. Gaussian multiplier bootstrap of the normalized supremum
       T = max_j  sqrt(n_eff) * sum_k eps_k S_kj / sigma_j,
   whose (1-beta)-quantile q_hat gives a simultaneous upper band;
4. per-candidate analytical radius
       delta*(x) = clip(alpha [gamma - h_w - q_hat sigma_w / sqrt(n_eff)]+
                        / ||x||_2 ; delta_min, delta_max)
   and validated bound U(x) = h_w + q_hat sigma_w / sqrt(n_eff)
                              + (delta*/alpha) ||x||_2;
5. keep candidates with U <= gamma, select the smallest delta*, ties by
   objective; abstain when nothing passes or n_eff collapses.

With uniform weights and b = 1 the pipeline reduces exactly (bitwise,
given a shared multiplier seed) to the i.i.d. normalized-supremum
validator, which is also the OLD-NGS baseline.  The importance-weighted
plug-in baseline skips the bootstrap entirely (q_hat = 0).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from cvarcert.risk import (
    SIGMA_FLOOR,
    CvarEstimate,
    PortfolioWeights,
    ReturnSeries,
    WeightedSample,
    cvar_from_losses,
    portfolio_losses,
    weighted_cvar,
)
from cvarcert.solver import Candidate

logger = logging.getLogger(__name__)

_BOOTSTRAP_CHUNK = 4096


@dataclass(frozen=True)
class ValidatorParams:
    alpha: float = 0.05
    beta: float = 0.1
    gamma: float = 0.05
    block_length: int | None = None     # None: round(n^(1/3))
    bootstrap_draws: int = 800
    delta_min: float = 1e-3
    delta_max: float = 2e-2
    n_eff_min: float = 30.0
    multiplier_seed: object = 0  # anything np.random.default_rng accepts
    # cross-validation baseline knobs
    k_folds: int = 5
    cv_fallback: bool = True


@dataclass(eq=False)
class BlockPartition:
    """K contiguous index ranges of length b covering the series head."""

    n: int
    b: int
    ranges: list[tuple[int, int]] = field(init=False)
    discarded_tail: int = field(init=False)

    def __post_init__(self) -> None:
        if self.b < 1 or self.b > self.n:
            raise ValueError(f"block length must lie in [1, n], got b={self.b}, n={self.n}")
        k = self.n // self.b
        self.ranges = [(i * self.b, (i + 1) * self.b) for i in range(k)]
        self.discarded_tail = self.n - k * self.b

    @property
    def n_blocks(self) -> int:
        return len(self.ranges)


def default_block_length(n: int) -> int:
    return max(1, int(np.floor(n ** (1.0 / 3.0) + 0.5)))


@dataclass(eq=False)
class GsCalibration:
    q_hat: float
    bootstrap_draws: int
    block_sums: np.ndarray  # K x p
    multiplier_seed: int | None


@dataclass(eq=False)
class CandidateReport:
    candidate_id: int
    t_w: float
    h_w: float
    sigma_w: float
    delta_star: float
    upper_bound: float
    feasible: bool


@dataclass(eq=False)
class Decision:
    kind: str                      # "selected" or "abstain"
    candidate_id: int | None = None
    delta_star: float | None = None
    reason: str | None = None


@dataclass(eq=False)
class ValidationReport:
    per_candidate: list[CandidateReport]
    q_hat: float
    n_eff: float
    decision: Decision
    selected_x: PortfolioWeights | None = None


def candidate_scores(sample: WeightedSample, x: PortfolioWeights, alpha: float) -> CvarEstimate:
    """Weighted CVaR map for one candidate (value, dispersion, scores)."""
    return weighted_cvar(sample, x, alpha)


def block_sums(partition: BlockPartition, w: np.ndarray, scores: np.ndarray, h_w: float) -> np.ndarray:
    """Centered block sums S_k = sum_{i in B_k} w_i (phi_i - h_w)."""
    if partition.n != scores.shape[0] or partition.n != w.shape[0]:
        raise ValueError("partition was built over a different sample length")
    contrib = w * (scores - h_w)
    k, b = partition.n_blocks, partition.b
    return contrib[: k * b].reshape(k, b).sum(axis=1)


def gs_quantile(
    block_sums_matrix: np.ndarray,
    sigma_w: np.ndarray,
    n_eff: float,
    draws: int,
    beta: float,
    seed,
) -> float:
    """(1-beta)-quantile of the bootstrap supremum statistic.

    Draws i.i.d. standard-normal multiplier vectors per replicate and takes
    the ceil(B(1-beta))-th order statistic of
    T = max_j sqrt(n_eff) sum_k eps_k S_kj / sigma_j.  Replicate r uses the
    r-th contiguous row of the seeded stream, so the draws do not depend on
    chunking or execution order.
    """
    if draws < 100:
        raise ValueError(f"need at least 100 bootstrap draws, got {draws}")
    s = np.atleast_2d(np.asarray(block_sums_matrix, dtype=float))
    if s.ndim != 2:
        raise ValueError("block sums must be a K x p matrix")
    n_blocks, p = s.shape
    if p == 0:
        raise ValueError("empty candidate menu")
    sigma = np.maximum(np.asarray(sigma_w, dtype=float).ravel(), SIGMA_FLOOR)
    if sigma.shape[0] != p:
        raise ValueError("sigma vector length must match the number of candidates")

    scaled = s * (np.sqrt(n_eff) / sigma)[None, :]
    rng = np.random.default_rng(seed)
    t_stats = np.empty(draws)
    done = 0
    while done < draws:
        m = min(_BOOTSTRAP_CHUNK, draws - done)
        eps = rng.standard_normal((m, n_blocks))
        t_stats[done: done + m] = (eps @ scaled).max(axis=1)
        done += m
    k = int(np.ceil(draws * (1.0 - beta)))
    return float(np.sort(t_stats)[k - 1])


def analytical_radius(
    h_w: float,
    sigma_w: float,
    q_hat: float,
    n_eff: float,
    gamma: float,
    alpha: float,
    norm2: float,
    delta_min: float,
    delta_max: float,
) -> float:
    """Largest radius whose margin fits the remaining budget slack, clipped."""
    if norm2 <= 0:
        raise ValueError("norm2 must be positive")
    if delta_min > delta_max:
        raise ValueError("delta_min must not exceed delta_max")
    slack = gamma - h_w - q_hat * max(sigma_w, SIGMA_FLOOR) / np.sqrt(n_eff)
    raw = alpha * max(slack, 0.0) / norm2
    return float(min(max(raw, delta_min), delta_max))


def validated_upper_bound(
    h_w: float,
    sigma_w: float,
    q_hat: float,
    n_eff: float,
    delta: float,
    alpha: float,
    norm2: float,
) -> float:
    """Simultaneous upper band on the robust CVaR at radius delta."""
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    return float(h_w + q_hat * max(sigma_w, SIGMA_FLOOR) / np.sqrt(n_eff) + (delta / alpha) * norm2)


def validate_and_select(
    menu: Sequence[Candidate],
    val: WeightedSample,
    params: ValidatorParams,
    q_hat_override: float | None = None,
) -> ValidationReport:
    """Run the full band calibration, feasibility filter, and selection."""
    if not menu:
        raise ValueError("empty candidate menu")
    alpha = params.alpha
    n = val.n
    b = params.block_length if params.block_length is not None else default_block_length(n)
    partition = BlockPartition(n=n, b=b)

    estimates = [candidate_scores(val, cand.x, alpha) for cand in menu]
    sigma = np.array([est.sigma_w for est in estimates])

    if q_hat_override is None:
        s_matrix = np.column_stack(
            [block_sums(partition, val.w, est.scores, est.h_w) for est in estimates]
        )
        q_hat = gs_quantile(
            s_matrix, sigma, val.n_eff, params.bootstrap_draws, params.beta, params.multiplier_seed
        )
    else:
        q_hat = q_hat_override

    rows: list[CandidateReport] = []
    for j, (cand, est) in enumerate(zip(menu, estimates)):
        delta_star = analytical_radius(
            est.h_w, est.sigma_w, q_hat, val.n_eff, params.gamma, alpha,
            cand.norm2, params.delta_min, params.delta_max,
        )
        upper = validated_upper_bound(
            est.h_w, est.sigma_w, q_hat, val.n_eff, delta_star, alpha, cand.norm2
        )
        rows.append(
            CandidateReport(
                candidate_id=j,
                t_w=est.t_w,
                h_w=est.h_w,
                sigma_w=est.sigma_w,
                delta_star=delta_star,
                upper_bound=upper,
                feasible=bool(upper <= params.gamma + 1e-9),
            )
        )

    selected_x = None
    if val.n_eff < params.n_eff_min:
        decision = Decision(kind="abstain", reason="n_eff_collapse")
    else:
        feasible = [row for row in rows if row.feasible]
        if not feasible:
            decision = Decision(kind="abstain", reason="empty_feasible_set")
        else:
            chosen = min(
                feasible, key=lambda row: (row.delta_star, menu[row.candidate_id].objective)
            )
            decision = Decision(
                kind="selected", candidate_id=chosen.candidate_id, delta_star=chosen.delta_star
            )
            selected_x = menu[chosen.candidate_id].x
    return ValidationReport(
        per_candidate=rows, q_hat=q_hat, n_eff=val.n_eff, decision=decision, selected_x=selected_x
    )


def old_ngs_validate(
    menu: Sequence[Candidate], val_series: ReturnSeries, params: ValidatorParams
) -> ValidationReport:
    """I.i.d. baseline: uniform weights and unit blocks, same pipeline."""
    uniform = WeightedSample.uniform(val_series)
    return validate_and_select(menu, uniform, replace(params, block_length=1))


def iw_plugin_select(
    menu: Sequence[Candidate], val: WeightedSample, params: ValidatorParams
) -> ValidationReport:
    """Importance-weighted plug-in baseline: no band, q_hat forced to zero."""
    return validate_and_select(menu, val, params, q_hat_override=0.0)


def contiguous_folds(n: int, k_folds: int) -> list[tuple[int, int]]:
    """Split [0, n) into K contiguous blocks, the last taking the remainder."""
    if k_folds < 2:
        raise ValueError(f"need at least 2 folds, got {k_folds}")
    if n < k_folds:
        raise ValueError("fewer validation rows than folds")
    size = n // k_folds
    return [(i * size, (i + 1) * size if i < k_folds - 1 else n) for i in range(k_folds)]


def iw_cv_select(
    menu_builder: Callable[[WeightedSample, float], PortfolioWeights | None],
    train: WeightedSample,
    val: WeightedSample,
    delta_grid: np.ndarray,
    params: ValidatorParams,
) -> ValidationReport:
    """Radius selection by K-fold cross-validation over a grid.

    Folds are contiguous time blocks of the validation sample.  For each
    grid radius and each fold, ``menu_builder`` re-solves the candidate on
    the per-fold training set (the training sample plus the retained
    validation rows) and the robust left-hand side is evaluated on the
    held-out fold with weights renormalized inside it.  The smallest radius
    whose cross-fold mean fits the budget wins; if none qualifies, falls
    back to the largest grid radius (or abstains when fallback is off).
    The chosen radius is then re-solved on the full training sample.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.size == 0:
        raise ValueError("empty radius grid")
    folds = contiguous_folds(val.n, params.k_folds)
    alpha = params.alpha

    chosen_delta: float | None = None
    for delta in delta_grid:
        fold_lhs = []
        for lo, hi in folds:
            keep = np.ones(val.n, dtype=bool)
            keep[lo:hi] = False
            solve_data = np.vstack([train.series.data, val.series.data[keep]])
            n_keep = int(keep.sum())
            scale_train = train.n / (train.n + n_keep)
            w_solve = np.concatenate(
                [train.w * scale_train, _renormalized(val.w[keep]) * (1.0 - scale_train)]
            )
            solve_sample = WeightedSample(ReturnSeries(solve_data, origin="train"), w_solve)
            x = menu_builder(solve_sample, float(delta))
            if x is None:
                fold_lhs.append(np.inf)
                continue
            hold = ReturnSeries(val.series.data[lo:hi], origin="validation")
            hold_sample = WeightedSample(hold, _renormalized(val.w[lo:hi]))
            _, h_fold = cvar_from_losses(portfolio_losses(hold, x), hold_sample.w, alpha)
            fold_lhs.append(h_fold + (delta / alpha) * x.norm2)
        if np.mean(fold_lhs) <= params.gamma:
            chosen_delta = float(delta)
            break

    if chosen_delta is None:
        if not params.cv_fallback:
            return ValidationReport(
                per_candidate=[],
                q_hat=0.0,
                n_eff=val.n_eff,
                decision=Decision(kind="abstain", reason="empty_feasible_set"),
            )
        chosen_delta = float(delta_grid[-1])

    x_final = menu_builder(train, chosen_delta)
    if x_final is None:
        return ValidationReport(
            per_candidate=[],
            q_hat=0.0,
            n_eff=val.n_eff,
            decision=Decision(kind="abstain", reason="final_solve_failed"),
        )
    est = candidate_scores(val, x_final, alpha)
    upper = est.h_w + (chosen_delta / alpha) * x_final.norm2
    row = CandidateReport(
        candidate_id=0,
        t_w=est.t_w,
        h_w=est.h_w,
        sigma_w=est.sigma_w,
        delta_star=chosen_delta,
        upper_bound=upper,
        feasible=bool(upper <= params.gamma + 1e-9),
    )
    return ValidationReport(
        per_candidate=[row],
        q_hat=0.0,
        n_eff=val.n_eff,
        decision=Decision(kind="selected", candidate_id=0, delta_star=chosen_delta),
        selected_x=x_final,
    )


def _renormalized(w: np.ndarray) -> np.ndarray:
    total = w.sum()
    if total <= 0:
        return np.full(w.shape[0], 1.0 / max(w.shape[0], 1))
    return w / total


def write_validation_report(report: ValidationReport, path) -> None:
    """One CSV row per candidate plus a final decision row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["row", "candidate_id", "t_w", "h_w", "sigma_w", "delta_star", "upper_bound", "feasible"]
        )
        for row in report.per_candidate:
            writer.writerow(
                [
                    "candidate",
                    row.candidate_id,
                    repr(row.t_w),
                    repr(row.h_w),
                    repr(row.sigma_w),
                    repr(row.delta_star),
                    repr(row.upper_bound),
                    int(row.feasible),
                ]
            )
        d = report.decision
        writer.writerow(
            [
                "decision",
                d.candidate_id if d.candidate_id is not None else "",
                "",
                "",
                "",
                repr(d.delta_star) if d.delta_star is not None else "",
                d.kind if d.reason is None else f"{d.kind}:{d.reason}",
                "",
            ]
        )
