"""Independent brute-force oracles shared by the test modules.

Everything here deliberately avoids the library's quantile shortcut: the
RU objective is evaluated directly on grids and breakpoints so the tests
check the fast path against a slow, transparent one.
"""
from __future__ import annotations

import numpy as np


def ru_objective(t: np.ndarray | float, losses: np.ndarray, w: np.ndarray, alpha: float) -> np.ndarray:
    """Rockafellar-Uryasev objective t + (1/alpha) * sum_i w_i (l_i - t)+."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pos = np.maximum(losses[None, :] - t[:, None], 0.0)
    return t + (pos @ w) / alpha


def brute_force_cvar(losses: np.ndarray, w: np.ndarray, alpha: float, n_grid: int = 10_000) -> float:
    """Minimum of the RU objective over all breakpoints plus a fine t grid."""
    losses = np.asarray(losses, dtype=float)
    w = np.asarray(w, dtype=float)
    lo, hi = losses.min(), losses.max()
    grid = np.linspace(lo, hi, n_grid) if hi > lo else np.array([lo])
    candidates = np.concatenate([losses, grid])
    return float(ru_objective(candidates, losses, w, alpha).min())


def classical_cvar_sort_average(losses: np.ndarray, alpha: float) -> float:
    """Uniform-weight empirical CVaR by direct sort-and-average.

    Averages the top ``alpha`` fraction of losses, taking a fractional
    share of the boundary order statistic when ``alpha * n`` is not an
    integer.  Independent of the RU minimization route.
    """
    losses = np.sort(np.asarray(losses, dtype=float))[::-1]
    n = losses.shape[0]
    an = alpha * n
    m = int(np.floor(an))
    total = losses[:m].sum()
    if m < n and an - m > 1e-12:
        total += (an - m) * losses[m]
    return float(total / an)
