"""Density-ratio weights for a time-ordered validation fold.

The recent ("late") window of the validation sample proxies the deployment
law, the remainder ("early") proxies the historical law.  A regularized
logistic classifier separates the two; each validation row then receives
odds ``p(late|xi) / (1 - p(late|xi))`` which are clipped and normalized
into probability weights.  Clipping bounds the weights away from 0 and
infinity, so the normalized weights always satisfy

    clip_lo / (n * clip_hi)  <=  w_i  <=  clip_hi / (n * clip_lo).

Training is full-batch gradient descent with zero initialization and a
step size set from a curvature bound, so the fit is deterministic.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from cvarcert.risk import ReturnSeries, WeightedSample

logger = logging.getLogger(__name__)

# Penalty strength is calibrated so that on shift-free data the learned
# weights stay within half of uniform (a weaker penalty lets sampling noise
# in the classifier tilt the weights well past that).
L2_PENALTY = 0.1
GRAD_TOL = 1e-8
MAX_ITER = 10_000


@dataclass(eq=False)
class RatioModel:
    """Fitted odds model plus the preprocessing needed to score new rows."""

    coefficients: np.ndarray       # length d, zeros for dropped columns
    intercept: float
    clip_lo: float
    clip_hi: float
    feature_means: np.ndarray      # pooled early+late standardization
    feature_stds: np.ndarray       # 1.0 placeholder for dropped columns
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (self.clip_lo > 0 and self.clip_hi >= self.clip_lo):
            raise ValueError(f"need 0 < clip_lo <= clip_hi, got [{self.clip_lo}, {self.clip_hi}]")
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("non-finite coefficients")

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]

    def log_odds(self, data: np.ndarray) -> np.ndarray:
        z = (np.asarray(data, dtype=float) - self.feature_means) / self.feature_stds
        return self.intercept + z @ self.coefficients

    def to_text(self) -> str:
        """Flat structured-text record for debugging runs."""
        return json.dumps(
            {
                "coefficients": self.coefficients.tolist(),
                "intercept": self.intercept,
                "clip_lo": self.clip_lo,
                "clip_hi": self.clip_hi,
                "feature_means": self.feature_means.tolist(),
                "feature_stds": self.feature_stds.tolist(),
                "training_meta": self.training_meta,
            },
            indent=1,
        )

    @classmethod
    def from_text(cls, text: str) -> "RatioModel":
        rec = json.loads(text)
        return cls(
            coefficients=np.asarray(rec["coefficients"], dtype=float),
            intercept=float(rec["intercept"]),
            clip_lo=float(rec["clip_lo"]),
            clip_hi=float(rec["clip_hi"]),
            feature_means=np.asarray(rec["feature_means"], dtype=float),
            feature_stds=np.asarray(rec["feature_stds"], dtype=float),
            training_meta=dict(rec["training_meta"]),
        )


def split_early_late(series: ReturnSeries, recent_fraction: float) -> tuple[ReturnSeries, ReturnSeries]:
    """Split a time-ordered series into its early part and last-m rows."""
    if not 0.0 < recent_fraction < 1.0:
        raise ValueError(f"recent_fraction must lie in (0,1), got {recent_fraction}")
    n = series.n
    m = int(np.floor(n * recent_fraction + 0.5))
    if m < 10 or n - m < 10:
        raise ValueError(
            f"recent_fraction={recent_fraction} leaves a window under 10 points "
            f"(early={n - m}, late={m})"
        )
    early = ReturnSeries(series.data[: n - m].copy(), origin=series.origin)
    late = ReturnSeries(series.data[n - m:].copy(), origin=series.origin)
    return early, late


def fit_ratio_model(
    early: ReturnSeries,
    late: ReturnSeries,
    clip_lo: float = 0.1,
    clip_hi: float = 10.0,
    l2_penalty: float = L2_PENALTY,
    max_iter: int = MAX_ITER,
    grad_tol: float = GRAD_TOL,
) -> RatioModel:
    """Fit the late-vs-early logistic classifier.

    Full-batch gradient descent on the mean cross-entropy with an L2
    penalty on the coefficients (the intercept is unpenalized, so duplicated
    early/late data yields zero coefficients and intercept logit(m/n)).
    Stops when the gradient norm drops below ``grad_tol`` or after
    ``max_iter`` iterations.  Zero-variance columns are dropped with a
    warning before standardization; they would otherwise produce a
    non-finite loss.
    """
    if early.d != late.d:
        raise ValueError(f"early/late dimension mismatch: {early.d} vs {late.d}")
    X = np.vstack([early.data, late.data])
    y = np.concatenate([np.zeros(early.n), np.ones(late.n)])
    n, d = X.shape

    means = X.mean(axis=0)
    stds = X.std(axis=0)
    keep = stds > 1e-12
    if not np.all(keep):
        dropped = np.flatnonzero(~keep).tolist()
        logger.warning("dropping zero-variance feature columns %s from ratio model", dropped)
    stds_safe = np.where(keep, stds, 1.0)
    Z = (X - means) / stds_safe
    Z = Z[:, keep]
    dk = Z.shape[1]

    # Step size from the curvature bound of the penalized mean cross-entropy:
    # hessian <= (1/4) Z'Z/n + l2 * I.
    gram = Z.T @ Z / n
    lipschitz = 0.25 * float(np.linalg.eigvalsh(gram)[-1]) + l2_penalty if dk else l2_penalty
    # Intercept curvature is at most 1/4.
    step = 1.0 / max(lipschitz, 0.25)

    beta = np.zeros(dk)
    b0 = 0.0
    iterations = 0
    for iterations in range(1, max_iter + 1):
        p = expit(b0 + Z @ beta)
        resid = p - y
        grad_beta = Z.T @ resid / n + l2_penalty * beta
        grad_b0 = float(resid.mean())
        gnorm = float(np.sqrt(np.sum(grad_beta**2) + grad_b0**2))
        if gnorm < grad_tol:
            break
        beta -= step * grad_beta
        b0 -= step * grad_b0

    p = expit(b0 + Z @ beta)
    eps = 1e-15
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)) + 0.5 * l2_penalty * beta @ beta)
    if not np.isfinite(loss):
        raise ValueError("non-finite training loss; degenerate inputs")

    coefficients = np.zeros(d)
    coefficients[keep] = beta
    return RatioModel(
        coefficients=coefficients,
        intercept=float(b0),
        clip_lo=clip_lo,
        clip_hi=clip_hi,
        feature_means=means,
        feature_stds=stds_safe,
        training_meta={
            "m": late.n,
            "n2": n,
            "iterations": iterations,
            "final_loss": loss,
        },
    )


def normalize_odds(odds: np.ndarray, clip_lo: float, clip_hi: float) -> np.ndarray:
    """Clip raw odds to [clip_lo, clip_hi] and normalize to sum to one."""
    clipped = np.clip(np.asarray(odds, dtype=float), clip_lo, clip_hi)
    return clipped / clipped.sum()


def compute_weights(model: RatioModel, series: ReturnSeries) -> WeightedSample:
    """Score a series with the ratio model and return its weighted sample."""
    if series.d != model.d:
        raise ValueError(f"series dimension {series.d} incompatible with model dimension {model.d}")
    odds = np.exp(np.clip(model.log_odds(series.data), -700.0, 700.0))
    w = normalize_odds(odds, model.clip_lo, model.clip_hi)
    return WeightedSample(series, w)
