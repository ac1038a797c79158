"""CVaR-constrained portfolio selection with validated Wasserstein robustness.

Two-phase workflow: a candidate menu is generated by solving the robust
CVaR reformulation over a radius grid (:mod:`cvarcert.solver`), then each
candidate is screened on a time-ordered holdout with density-ratio weights
and a block multiplier bootstrap band (:mod:`cvarcert.validator`).  The
:mod:`cvarcert.bench` module runs the Monte Carlo comparison of validators
on synthetic autoregressive markets (:mod:`cvarcert.simulate`).
"""
from cvarcert.risk import (
    CvarEstimate,
    PortfolioWeights,
    ReturnSeries,
    WeightedSample,
    effective_sample_size,
    portfolio_losses,
    robust_lhs,
    weighted_cvar,
)

__all__ = [
    "CvarEstimate",
    "PortfolioWeights",
    "ReturnSeries",
    "WeightedSample",
    "effective_sample_size",
    "portfolio_losses",
    "robust_lhs",
    "weighted_cvar",
]

__version__ = "0.1.0"
