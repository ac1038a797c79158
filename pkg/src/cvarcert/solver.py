"""Candidate generation by solving the robust CVaR program over the simplex.

For a Wasserstein radius ``delta`` the robust constraint admits the
finite-dimensional form

    Z = { x : delta*v + sum_i w_i z_i <= alpha*r,
              r <= z_i + gamma + xi_i @ x,
              ||x||_2 <= v,  v, r, z_i >= 0,  x in simplex }

which (eliminating v, r, z at their tightest values) reduces to the single
constraint  weighted_cvar(losses(x), alpha) + (delta/alpha)*||x||_2 <= gamma.
The objective c @ x is linear, so the solve is an exact-penalty projected
subgradient descent over the simplex followed by a deterministic
feasible-direction polish; the returned point is certified against the
explicit Z constraints with v = ||x||_2 and r = gamma - t_w recovered from
the CVaR breakpoint.

Menus combine one candidate per grid radius (infeasible radii are skipped
with a warning) with a small Dirichlet menu for diversity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from cvarcert.risk import PortfolioWeights, WeightedSample

logger = logging.getLogger(__name__)

CERT_TOL = 1e-6
SUBGRAD_ITERATIONS = 5000
SUBGRAD_STEP0 = 0.1
PENALTY_FACTOR = 100.0
FEAS_TOL = 1e-9
DEDUP_TOL = 1e-6


@dataclass(eq=False)
class ReformulationSolution:
    x: np.ndarray
    v: float
    r: float
    z: np.ndarray
    status: str  # one of {"optimal", "infeasible", "max_iter"}
    objective: float
    robust_gap: float  # robust constraint value minus gamma at x


@dataclass(eq=False)
class Candidate:
    """A menu entry: simplex point plus generation metadata."""

    x: PortfolioWeights
    provenance: str           # "grid" or "dirichlet"
    provenance_value: float   # grid radius, or dirichlet draw index
    objective: float
    norm2: float

    def __post_init__(self) -> None:
        if abs(self.norm2 - self.x.norm2) > 1e-10:
            raise ValueError("cached norm2 disagrees with the allocation vector")


def training_cost_vector(sample: WeightedSample) -> np.ndarray:
    """Weighted negative mean return, the linear objective of the solve."""
    if sample.n < 1:
        raise ValueError("empty training sample")
    return -(sample.w @ sample.series.data)


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.shape[0] + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _quantile_breakpoint(losses: np.ndarray, w: np.ndarray, alpha: float) -> float:
    """Lean weighted-quantile breakpoint for the solver hot loop.

    Assumes positive normalized weights (the solve inputs); the public
    :func:`cvarcert.risk.cvar_from_losses` carries the validated version.
    """
    order = np.argsort(-losses)
    cum = np.cumsum(w[order])
    tol = 1e-12
    k = int(np.searchsorted(cum, alpha - tol, side="left"))
    n = losses.shape[0]
    k = min(k, n - 1)
    while k + 1 < n and cum[k] <= alpha + tol:
        k += 1
    return float(losses[order[k]])


def _robust_gap(x: np.ndarray, data: np.ndarray, w: np.ndarray, delta: float, alpha: float, gamma: float):
    """Constraint value h_w + (delta/alpha)||x|| - gamma, plus the breakpoint."""
    losses = -data @ x
    t_w = _quantile_breakpoint(losses, w, alpha)
    h_w = t_w + float(w @ np.maximum(losses - t_w, 0.0)) / alpha
    gap = h_w + (delta / alpha) * float(np.sqrt(x @ x)) - gamma
    return gap, t_w, losses


def _polish(
    x: np.ndarray,
    c: np.ndarray,
    data: np.ndarray,
    w: np.ndarray,
    delta: float,
    alpha: float,
    gamma: float,
) -> np.ndarray:
    """Feasible-direction descent for the linear objective.

    From a feasible point, line searches along the projected negative cost
    direction with step doubling/halving, accepting only feasible improving
    moves.  The path Proj(x - s*c) is piecewise linear and the constraint is
    convex along it, so the bisection locates the binding boundary (or walks
    to the optimal vertex when the constraint is slack).
    """
    obj = float(c @ x)
    step = 0.25
    for _ in range(80):
        if step < 1e-10:
            break
        trial = project_simplex(x - step * c / max(np.linalg.norm(c), 1e-300))
        gap, _, _ = _robust_gap(trial, data, w, delta, alpha, gamma)
        trial_obj = float(c @ trial)
        if gap <= FEAS_TOL and trial_obj < obj - 1e-16:
            x, obj = trial, trial_obj
            step *= 2.0
        else:
            step *= 0.5
    return x


def solve_reformulation(
    sample: WeightedSample,
    delta: float,
    alpha: float,
    gamma: float,
    c: np.ndarray,
) -> ReformulationSolution:
    """Minimize c @ x over the robust CVaR constraint set.

    Exact-penalty subgradient phase (rho = 100 ||c||_2, steps eta0/sqrt(k),
    normalized directions) tracks the best feasible iterate; the polish phase
    then pushes it along the descent direction to the constraint boundary.
    Status is "infeasible" when no iterate came within CERT_TOL of
    feasibility, "max_iter" when near-feasible points were seen but none
    passed the tolerance.
    """
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    data = sample.series.data
    w = sample.w
    c = np.asarray(c, dtype=float)
    d = data.shape[1]
    rho = PENALTY_FACTOR * max(float(np.linalg.norm(c)), 1e-12)

    x = np.full(d, 1.0 / d)
    best_feas_x: np.ndarray | None = None
    best_feas_obj = np.inf
    min_gap = np.inf
    best_pen_x = x.copy()
    best_pen_val = np.inf

    inv_alpha = 1.0 / alpha
    for k in range(1, SUBGRAD_ITERATIONS + 1):
        gap, t_w, losses = _robust_gap(x, data, w, delta, alpha, gamma)
        obj = float(c @ x)
        if gap <= FEAS_TOL and obj < best_feas_obj:
            best_feas_obj, best_feas_x = obj, x.copy()
        min_gap = min(min_gap, gap)
        pen_val = obj + rho * max(gap, 0.0)
        if pen_val < best_pen_val:
            best_pen_val, best_pen_x = pen_val, x.copy()

        g = c.copy()
        if gap > 0.0:
            tail = losses > t_w
            sub_cvar = -inv_alpha * ((w * tail) @ data)
            sub_norm = (delta * inv_alpha) * x / max(np.linalg.norm(x), 1e-300)
            g += rho * (sub_cvar + sub_norm)
        gn = float(np.linalg.norm(g))
        if gn < 1e-300:
            break
        x = project_simplex(x - (SUBGRAD_STEP0 / np.sqrt(k)) * (g / gn))

    if best_feas_x is None:
        status = "infeasible" if min_gap > CERT_TOL else "max_iter"
        x_out = best_pen_x
    else:
        status = "optimal"
        x_out = _polish(best_feas_x, c, data, w, delta, alpha, gamma)

    gap, t_w, losses = _robust_gap(x_out, data, w, delta, alpha, gamma)
    v = float(np.linalg.norm(x_out))
    r = gamma - t_w
    z = np.maximum(r - gamma + losses, 0.0)  # equals (losses - t_w)+
    sol = ReformulationSolution(
        x=x_out, v=v, r=r, z=z, status=status, objective=float(c @ x_out), robust_gap=gap
    )
    if status == "optimal":
        certify_z_constraints(sol, sample, delta, alpha, gamma, tol=CERT_TOL)
    return sol


def certify_z_constraints(
    sol: ReformulationSolution,
    sample: WeightedSample,
    delta: float,
    alpha: float,
    gamma: float,
    tol: float = CERT_TOL,
) -> None:
    """Check the explicit Z constraints at (x, v, r, z); raise on violation."""
    x, v, r, z = sol.x, sol.v, sol.r, sol.z
    data, w = sample.series.data, sample.w
    checks = {
        "epigraph": delta * v + float(w @ z) - alpha * r,
        "pointwise": float(np.max(r - z - gamma - data @ x)),
        "norm_cone": float(np.linalg.norm(x)) - v,
        "v_nonneg": -v,
        "r_nonneg": -r,
        "z_nonneg": float(-z.min()) if z.size else 0.0,
        "simplex_sum": abs(float(x.sum()) - 1.0),
        "simplex_nonneg": float(-x.min()),
    }
    bad = {name: val for name, val in checks.items() if val > tol}
    if bad:
        raise RuntimeError(f"certificate violated beyond {tol}: {bad}")


def minimize_robust_cvar(
    sample: WeightedSample, delta: float, alpha: float, iterations: int = 2500
) -> np.ndarray:
    """Most defensive simplex point: argmin of cvar + (delta/alpha)||x||_2.

    Projected subgradient with normalized diminishing steps and best-iterate
    tracking; accuracy needs are mild since the result only anchors the
    candidate menu at its low-risk end.
    """
    data, w = sample.series.data, sample.w
    d = data.shape[1]
    x = np.full(d, 1.0 / d)
    best_x, best_val = x.copy(), np.inf
    inv_alpha = 1.0 / alpha
    for k in range(1, iterations + 1):
        gap, t_w, losses = _robust_gap(x, data, w, delta, alpha, 0.0)
        if gap < best_val:
            best_val, best_x = gap, x.copy()
        tail = losses > t_w
        g = -inv_alpha * ((w * tail) @ data) + (delta * inv_alpha) * x / max(np.linalg.norm(x), 1e-300)
        gn = float(np.linalg.norm(g))
        if gn < 1e-300:
            break
        x = project_simplex(x - (SUBGRAD_STEP0 / np.sqrt(k)) * (g / gn))
    return best_x


def generate_candidates(
    train: WeightedSample,
    delta_grid: np.ndarray,
    n_dirichlet: int,
    alpha: float,
    gamma: float,
    seed,
    dirichlet_concentration: float = 1.0,
    min_risk_anchor: bool = False,
) -> list[Candidate]:
    """Solve the grid radii and append a random Dirichlet menu.

    Grid radii whose training problem is infeasible (or that stall without
    a feasible iterate) are skipped with a warning.  Candidates closer than
    DEDUP_TOL in max-norm are deduplicated, keeping the earliest.  With
    ``min_risk_anchor`` the menu additionally carries the minimizer of the
    robust CVaR itself, so its defensive end never depends on where the
    grid happens to stop.
    """
    delta_grid = np.asarray(delta_grid, dtype=float)
    if delta_grid.size and (np.any(np.diff(delta_grid) < 0) or np.any(delta_grid < 0)):
        raise ValueError("delta_grid must be sorted ascending with nonnegative entries")
    c = training_cost_vector(train)
    menu: list[Candidate] = []

    def _push(x_arr: np.ndarray, provenance: str, value: float) -> None:
        for existing in menu:
            if np.max(np.abs(existing.x.x - x_arr)) < DEDUP_TOL:
                return
        pw = PortfolioWeights(x_arr)
        menu.append(
            Candidate(
                x=pw,
                provenance=provenance,
                provenance_value=value,
                objective=float(c @ pw.x),
                norm2=pw.norm2,
            )
        )

    for delta in delta_grid:
        sol = solve_reformulation(train, float(delta), alpha, gamma, c)
        if sol.status != "optimal":
            logger.warning("skipping radius %.6g: solve status %s", delta, sol.status)
            continue
        _push(sol.x, "grid", float(delta))

    if min_risk_anchor:
        anchor_delta = float(delta_grid[0]) if delta_grid.size else 0.0
        _push(minimize_robust_cvar(train, anchor_delta, alpha), "min_risk", anchor_delta)

    rng = np.random.default_rng(seed)
    for j in range(n_dirichlet):
        _push(rng.dirichlet(np.full(train.d, dirichlet_concentration)), "dirichlet", float(j))

    if not menu:
        raise RuntimeError("candidate menu is empty: all grid radii infeasible and no Dirichlet draws")
    return menu
