"""Weighted CVaR estimation and the robust constraint left-hand side.

Losses are always ``l_i = -xi_i @ x`` (loss = negative portfolio return);
every other module reuses :func:`portfolio_losses` so the sign convention
lives in exactly one place.

The weighted CVaR at level ``alpha`` is the Rockafellar-Uryasev minimum

    min_t  t + (1/alpha) * sum_i w_i * max(l_i - t, 0)

which is attained at a weighted quantile breakpoint of the losses.  The
estimator also returns the per-observation scores

    phi_i = t_w + (1/alpha) * max(l_i - t_w, 0)

whose weighted mean is the CVaR value and whose weighted dispersion feeds
the validation band.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Floor applied to score dispersions wherever they appear as a denominator,
# so constant-loss candidates cannot divide by zero.
SIGMA_FLOOR = 1e-12

_WEIGHT_SUM_TOL = 1e-10
_SIMPLEX_TOL = 1e-9


@dataclass(eq=False)
class ReturnSeries:
    """Time-ordered n x d matrix of per-period asset returns.

    Row order is time order; no operation in this package permutes it.
    """

    data: np.ndarray
    origin: str = "train"  # one of {"train", "validation", "test"}

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim == 1:
            self.data = self.data[:, None]
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ValueError(f"return matrix must be n x d with n,d >= 1, got shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("return matrix contains non-finite entries")
        if self.origin not in ("train", "validation", "test"):
            raise ValueError(f"unknown origin tag {self.origin!r}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass(eq=False)
class PortfolioWeights:
    """Long-only allocation vector on the unit simplex."""

    x: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float).ravel()
        if np.any(x < -1e-12):
            raise ValueError(f"allocation has negative entries below tolerance: min {x.min():.3e}")
        x = np.maximum(x, 0.0)
        if abs(x.sum() - 1.0) > _SIMPLEX_TOL:
            raise ValueError(f"allocations must sum to 1 within {_SIMPLEX_TOL}, got {x.sum()!r}")
        self.x = x

    @property
    def d(self) -> int:
        return self.x.shape[0]

    @property
    def norm2(self) -> float:
        return float(np.linalg.norm(self.x))


def effective_sample_size(w: np.ndarray) -> float:
    """Effective number of unit-weight observations, ``1 / sum(w_i^2)``."""
    w = np.asarray(w, dtype=float).ravel()
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.sum() - 1.0) > _WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1 within {_WEIGHT_SUM_TOL}, got {w.sum()!r}")
    return float(1.0 / np.sum(w * w))


@dataclass(eq=False)
class WeightedSample:
    """A return series paired with normalized probability weights."""

    series: ReturnSeries
    w: np.ndarray
    n_eff: float = field(init=False)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=float).ravel()
        if self.w.shape[0] != self.series.n:
            raise ValueError(f"weight vector length {self.w.shape[0]} != series length {self.series.n}")
        self.n_eff = effective_sample_size(self.w)

    @property
    def n(self) -> int:
        return self.series.n

    @property
    def d(self) -> int:
        return self.series.d

    @classmethod
    def uniform(cls, series: ReturnSeries) -> "WeightedSample":
        return cls(series, np.full(series.n, 1.0 / series.n))


@dataclass(eq=False)
class CvarEstimate:
    """Weighted Rockafellar-Uryasev CVaR with its score vector.

    ``h_w = sum_i w_i phi_i`` and ``sigma_w^2 = sum_i w_i (phi_i - h_w)^2``;
    ``h_w >= t_w`` always holds because the positive part is nonnegative.
    """

    t_w: float
    h_w: float
    sigma_w: float
    scores: np.ndarray


def portfolio_losses(series: ReturnSeries, x: PortfolioWeights) -> np.ndarray:
    """Per-period losses ``-xi_t @ x`` for a portfolio on a return series."""
    if series.d != x.d:
        raise ValueError(f"dimension mismatch: series has d={series.d}, portfolio has d={x.d}")
    return -series.data @ x.x


def cvar_from_losses(losses: np.ndarray, w: np.ndarray, alpha: float) -> tuple[float, float]:
    """Exact minimizer and minimum of the weighted RU objective.

    Sorts losses descending and accumulates weight mass from the top; the
    quantile breakpoint is the first loss at which the mass reaches
    ``alpha``.  When several breakpoints minimize (mass hits ``alpha``
    exactly, or zero-weight points sit just below), the smallest minimizing
    breakpoint is returned; the CVaR value is invariant to that choice.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0,1), got {alpha}")
    losses = np.asarray(losses, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if losses.shape != w.shape:
        raise ValueError("losses and weights must have equal length")
    total = w.sum()
    if total <= 0.0:
        raise ValueError("weights are all zero")

    order = np.argsort(losses)[::-1]  # descending
    sorted_losses = losses[order]
    cum = np.cumsum(w[order]) / total

    tol = 1e-12
    k = int(np.searchsorted(cum, alpha - tol, side="left"))
    k = min(k, losses.shape[0] - 1)
    # Extend past exact-alpha plateaus and zero-weight points: every further
    # breakpoint whose strictly-above mass is still <= alpha also minimizes.
    while k + 1 < losses.shape[0] and cum[k] <= alpha + tol:
        k += 1
    t_w = float(sorted_losses[k])
    h_w = t_w + float(np.sum(w * np.maximum(losses - t_w, 0.0))) / (alpha * total)
    return t_w, h_w


def weighted_cvar(sample: WeightedSample, x: PortfolioWeights, alpha: float) -> CvarEstimate:
    """Weighted CVaR of portfolio losses, with scores and dispersion."""
    losses = portfolio_losses(sample.series, x)
    t_w, _ = cvar_from_losses(losses, sample.w, alpha)
    scores = t_w + np.maximum(losses - t_w, 0.0) / alpha
    h_w = float(sample.w @ scores)
    sigma_w = float(np.sqrt(np.sum(sample.w * (scores - h_w) ** 2)))
    return CvarEstimate(t_w=t_w, h_w=h_w, sigma_w=sigma_w, scores=scores)


def robust_lhs(cvar_value: float, delta: float, alpha: float, x: PortfolioWeights | np.ndarray) -> float:
    """Worst-case CVaR bound over a Wasserstein ball of radius ``delta``.

    Kantorovich-Rubinstein duality turns the ball into the deterministic
    margin ``(delta / alpha) * ||x||_2`` added to the nominal CVaR.
    """
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    norm2 = x.norm2 if isinstance(x, PortfolioWeights) else float(np.linalg.norm(np.asarray(x, dtype=float)))
    return float(cvar_value + (delta / alpha) * norm2)
