"""Learning deployment-law weights from a time-ordered validation fold.

The recent window proxies the deployment law.  Without a shift the
classifier finds nothing and the weights stay near uniform; with a mean
deterioration in the recent window the odds concentrate the weight mass
there and the effective sample size drops accordingly.
"""
import numpy as np

from cvarcert.ratio import compute_weights, fit_ratio_model, split_early_late
from cvarcert.risk import ReturnSeries

rng = np.random.default_rng(11)
n, d, m = 1200, 8, 300
sig = np.linspace(0.005, 0.03, d)
corr = 0.3 * np.ones((d, d)) + 0.7 * np.eye(d)
chol = np.linalg.cholesky(np.outer(sig, sig) * corr)
mu = np.linspace(2e-4, 1e-3, d)


def make_validation(shifted: bool) -> ReturnSeries:
    early = rng.standard_normal((n - m, d)) @ chol.T + mu
    late = rng.standard_normal((m, d)) @ chol.T + mu
    if shifted:
        late = 1.7 * (late - mu) + mu - 0.012  # vol inflation + mean deterioration
    return ReturnSeries(np.vstack([early, late]), origin="validation")


for shifted in (False, True):
    series = make_validation(shifted)
    early, late = split_early_late(series, 0.25)
    model = fit_ratio_model(early, late)
    sample = compute_weights(model, series)
    late_mass = sample.w[-m:].sum()
    print(f"shifted={shifted}:")
    print(f"  intercept {model.intercept:+.3f} (baseline log-odds of the late window)")
    print(f"  late-window weight mass {late_mass:.2f} (uniform would be {m / n:.2f})")
    print(f"  effective sample size {sample.n_eff:.0f} of {n}")
    print(f"  weight range [{sample.w.min():.2e}, {sample.w.max():.2e}]")

# the model serializes to a flat text record for debugging runs
print("\nmodel record:")
print(model.to_text())
