"""Synthetic market generator: stationary Gaussian VAR(1) returns.

returns follow  xi_t = mu + phi * (xi_{t-1} - mu) + eps_t  with
eps_t ~ N(0, Sigma) (Sigma is the innovation covariance) and a stationary
start xi_1 ~ N(mu, Sigma / (1 - phi^2)), so there is no burn-in.

Scenario 1 draws every fold from the source law P.  Scenario 2 keeps
training on P, builds the validation fold as early-P rows followed by
late-Q rows (time order preserved, so the recent window carries the
shifted law), and draws the test fold from Q, where Q deteriorates the
mean, inflates volatility, and strengthens persistence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from cvarcert.risk import PortfolioWeights, ReturnSeries, WeightedSample, weighted_cvar

FOLD_STREAMS = {"train": 0, "val_early": 1, "val_late": 2, "test": 3}


@dataclass(frozen=True)
class ShiftConfig:
    """How the deployment law Q differs from the source law P."""

    delta_mu: float = 0.012          # per-asset mean deterioration
    vol_multiplier: float = 1.7      # Sigma_Q = vol_multiplier^2 * Sigma_P
    phi_q: float = 0.45


@dataclass(frozen=True)
class ScenarioConfig:
    d: int = 8
    mu: tuple[float, ...] = field(default=None)   # type: ignore[assignment]
    vols: tuple[float, ...] = field(default=None)  # type: ignore[assignment]
    pairwise_corr: float = 0.3
    phi: float = 0.3
    shift: ShiftConfig = field(default_factory=ShiftConfig)
    n_train: int = 1000
    n_val: int = 1200
    n_test: int = 15000
    alpha: float = 0.05
    beta: float = 0.1
    recent_fraction: float = 0.25

    def __post_init__(self) -> None:
        if self.mu is None:
            object.__setattr__(self, "mu", tuple(np.linspace(2e-4, 1e-3, self.d)))
        if self.vols is None:
            object.__setattr__(self, "vols", tuple(np.linspace(0.005, 0.08, self.d)))
        if len(self.mu) != self.d or len(self.vols) != self.d:
            raise ValueError("mu and vols must have length d")
        if not abs(self.phi) < 1 or not abs(self.shift.phi_q) < 1:
            raise ValueError("autoregression coefficients must satisfy |phi| < 1")

    @property
    def mu_p(self) -> np.ndarray:
        return np.asarray(self.mu, dtype=float)

    @property
    def sigma_p(self) -> np.ndarray:
        sig = np.asarray(self.vols, dtype=float)
        corr = self.pairwise_corr * np.ones((self.d, self.d)) + (1 - self.pairwise_corr) * np.eye(self.d)
        return np.outer(sig, sig) * corr

    @property
    def mu_q(self) -> np.ndarray:
        return self.mu_p - self.shift.delta_mu

    @property
    def sigma_q(self) -> np.ndarray:
        return self.shift.vol_multiplier**2 * self.sigma_p


def simulate_var1(mu: np.ndarray, sigma: np.ndarray, phi: float, n: int, seed, origin: str = "train") -> ReturnSeries:
    """Draw n observations of the stationary VAR(1) process."""
    if not abs(phi) < 1:
        raise ValueError(f"need |phi| < 1 for stationarity, got {phi}")
    mu = np.asarray(mu, dtype=float).ravel()
    sigma = np.asarray(sigma, dtype=float)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance is not positive definite") from exc

    rng = np.random.default_rng(seed)
    d = mu.shape[0]
    dev0 = (rng.standard_normal(d) @ chol.T) / np.sqrt(1.0 - phi * phi)
    dev = np.empty((n, d))
    dev[0] = dev0
    if n > 1:
        innov = rng.standard_normal((n - 1, d)) @ chol.T
        dev[1:] = lfilter([1.0], [1.0, -phi], innov, axis=0, zi=(phi * dev0)[None, :])[0]
    return ReturnSeries(dev + mu, origin=origin)


def _stream(rep_seed, name: str) -> np.random.SeedSequence:
    base = rep_seed if isinstance(rep_seed, np.random.SeedSequence) else np.random.SeedSequence(rep_seed)
    return np.random.SeedSequence(entropy=base.entropy, spawn_key=base.spawn_key + (FOLD_STREAMS[name],))


def make_scenario(scenario_id: int, config: ScenarioConfig, rep_seed) -> tuple[ReturnSeries, ReturnSeries, ReturnSeries]:
    """Generate (train, validation, test) folds for one replication.

    Fold streams are independent functions of (rep_seed, fold), so adding
    or reordering folds never shifts another fold's draws.
    """
    if scenario_id not in (1, 2):
        raise ValueError(f"scenario must be 1 or 2, got {scenario_id}")
    train = simulate_var1(
        config.mu_p, config.sigma_p, config.phi, config.n_train, _stream(rep_seed, "train"), "train"
    )
    if scenario_id == 1:
        val = simulate_var1(
            config.mu_p, config.sigma_p, config.phi, config.n_val, _stream(rep_seed, "val_early"), "validation"
        )
        test = simulate_var1(
            config.mu_p, config.sigma_p, config.phi, config.n_test, _stream(rep_seed, "test"), "test"
        )
        return train, val, test

    m = int(np.floor(config.n_val * config.recent_fraction + 0.5))
    early = simulate_var1(
        config.mu_p, config.sigma_p, config.phi, config.n_val - m, _stream(rep_seed, "val_early"), "validation"
    )
    late = simulate_var1(
        config.mu_q, config.sigma_q, config.shift.phi_q, m, _stream(rep_seed, "val_late"), "validation"
    )
    val = ReturnSeries(np.vstack([early.data, late.data]), origin="validation")
    test = simulate_var1(
        config.mu_q, config.sigma_q, config.shift.phi_q, config.n_test, _stream(rep_seed, "test"), "test"
    )
    return train, val, test


def calibrate_gamma(train: ReturnSeries, alpha: float, margin: float = 0.10) -> float:
    """Risk budget from the equal-weight portfolio's empirical CVaR."""
    if train.n < 1:
        raise ValueError("empty training series")
    equal = PortfolioWeights(np.full(train.d, 1.0 / train.d))
    est = weighted_cvar(WeightedSample.uniform(train), equal, alpha)
    return float((1.0 + margin) * est.h_w)


def dump_csv(series: ReturnSeries, path) -> None:
    """Write a fold as CSV with header t, asset_1..asset_d."""
    header = "t," + ",".join(f"asset_{j + 1}" for j in range(series.d))
    rows = np.column_stack([np.arange(1, series.n + 1), series.data])
    np.savetxt(path, rows, delimiter=",", header=header, comments="", fmt="%.17g")
