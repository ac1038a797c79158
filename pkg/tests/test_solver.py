import numpy as np
import pytest
from numpy.testing import assert_allclose

from cvarcert.risk import (
    PortfolioWeights,
    ReturnSeries,
    WeightedSample,
    cvar_from_losses,
    robust_lhs,
)
from cvarcert.solver import (
    Candidate,
    certify_z_constraints,
    generate_candidates,
    project_simplex,
    solve_reformulation,
    training_cost_vector,
)

ALPHA = 0.05


def _random_sample(rng, n, d, origin="train"):
    sig = rng.uniform(0.005, 0.04, size=d)
    data = rng.standard_normal((n, d)) * sig + rng.uniform(-0.001, 0.003, size=d)
    w = rng.dirichlet(np.full(n, 5.0)) if rng.random() < 0.5 else np.full(n, 1.0 / n)
    return WeightedSample(ReturnSeries(data, origin=origin), w)


def _oracle_d2(sample, delta, alpha, gamma, c, step=1e-4):
    """Sweep x1 over a fine grid of the 2-asset simplex."""
    x1 = np.arange(0.0, 1.0 + step / 2, step)
    best = np.inf
    data, w = sample.series.data, sample.w
    for v in x1:
        x = np.array([v, 1.0 - v])
        _, h = cvar_from_losses(-data @ x, w, alpha)
        if h + (delta / alpha) * np.linalg.norm(x) <= gamma + 1e-12:
            best = min(best, float(c @ x))
    return best


class TestTrainingCostVector:
    def test_constant_returns(self):
        series = ReturnSeries(np.tile([0.01, 0.02], (6, 1)))
        c = training_cost_vector(WeightedSample.uniform(series))
        assert_allclose(c, [-0.01, -0.02], atol=1e-15)

    def test_point_mass(self):
        series = ReturnSeries(np.array([[1.0, 0.0], [0.0, 1.0]]))
        c = training_cost_vector(WeightedSample(series, np.array([1.0, 0.0])))
        assert_allclose(c, [-1.0, 0.0], atol=0)

    def test_matches_direct_weighted_mean(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            sample = _random_sample(rng, int(rng.integers(5, 60)), int(rng.integers(2, 6)))
            direct = -sum(wi * row for wi, row in zip(sample.w, sample.series.data))
            assert_allclose(training_cost_vector(sample), direct, atol=1e-12)


class TestProjectSimplex:
    def test_projection_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            v = rng.normal(0, 3, size=rng.integers(1, 12))
            p = project_simplex(v)
            assert_allclose(p.sum(), 1.0, atol=1e-12)
            assert np.all(p >= 0)
            # projection of a simplex point is itself
            q = rng.dirichlet(np.ones(5))
            assert_allclose(project_simplex(q), q, atol=1e-12)


class TestSolveReformulation:
    def test_unconstrained_linear_objective_hits_best_vertex(self):
        rng = np.random.default_rng(3)
        sample = _random_sample(rng, 60, 5)
        c = training_cost_vector(sample)
        sol = solve_reformulation(sample, 0.0, ALPHA, 1e6, c)
        assert sol.status == "optimal"
        vertex = np.zeros(5)
        vertex[np.argmin(c)] = 1.0
        assert sol.objective <= float(c @ vertex) + 1e-6
        assert_allclose(sol.x, vertex, atol=1e-4)

    def test_matches_1d_grid_oracle_on_two_assets(self):
        rng = np.random.default_rng(4)
        for trial in range(12):
            n = int(rng.integers(10, 41))
            sample = _random_sample(rng, n, 2)
            c = training_cost_vector(sample)
            delta = float(rng.choice([0.0, 1e-3, 5e-3]))
            eq = np.array([0.5, 0.5])
            _, h_eq = cvar_from_losses(-sample.series.data @ eq, sample.w, ALPHA)
            gamma = (h_eq + (delta / ALPHA) * np.linalg.norm(eq)) * float(rng.uniform(1.0, 1.4))
            oracle = _oracle_d2(sample, delta, ALPHA, gamma, c)
            sol = solve_reformulation(sample, delta, ALPHA, gamma, c)
            assert sol.status == "optimal", trial
            assert abs(sol.objective - oracle) < 1e-4, (trial, sol.objective, oracle)

    def test_objective_monotone_in_delta(self):
        rng = np.random.default_rng(5)
        sample = _random_sample(rng, 80, 2)
        c = training_cost_vector(sample)
        eq = np.array([0.5, 0.5])
        _, h_eq = cvar_from_losses(-sample.series.data @ eq, sample.w, ALPHA)
        delta_max = 2e-3
        # equal weight stays feasible across the whole radius range
        gamma = 1.05 * (h_eq + (delta_max / ALPHA) * 1.0)
        objectives = []
        for delta in np.linspace(0.0, delta_max, 10):
            sol = solve_reformulation(sample, float(delta), ALPHA, gamma, c)
            assert sol.status == "optimal"
            objectives.append(sol.objective)
        diffs = np.diff(objectives)
        assert np.all(diffs >= -1e-7), objectives

    def test_optimal_solutions_are_certified(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            sample = _random_sample(rng, int(rng.integers(20, 80)), int(rng.integers(2, 8)))
            c = training_cost_vector(sample)
            eq = np.full(sample.d, 1.0 / sample.d)
            _, h_eq = cvar_from_losses(-sample.series.data @ eq, sample.w, ALPHA)
            delta = float(rng.uniform(0, 2e-3))
            gamma = (h_eq + (delta / ALPHA) * np.linalg.norm(eq)) * 1.05
            sol = solve_reformulation(sample, delta, ALPHA, gamma, c)
            assert sol.status == "optimal"
            certify_z_constraints(sol, sample, delta, ALPHA, gamma)  # raises on violation

    def test_infeasible_budget_reported(self):
        rng = np.random.default_rng(7)
        sample = _random_sample(rng, 40, 3)
        c = training_cost_vector(sample)
        sol = solve_reformulation(sample, 1e-3, ALPHA, -10.0, c)
        assert sol.status == "infeasible"

    def test_input_validation(self):
        rng = np.random.default_rng(8)
        sample = _random_sample(rng, 20, 2)
        c = training_cost_vector(sample)
        with pytest.raises(ValueError):
            solve_reformulation(sample, -0.1, ALPHA, 0.1, c)
        with pytest.raises(ValueError):
            solve_reformulation(sample, 0.1, 1.5, 0.1, c)


class TestFormulationEquivalence:
    def test_inner_lp_feasibility_matches_reduced_constraint(self):
        # For fixed x, a feasible (v, r, z) for the explicit constraint set
        # exists iff weighted_cvar + (delta/alpha)||x|| <= gamma.  The LP
        # side is brute-forced over r on breakpoints plus a fine grid, with
        # v = ||x|| and z at its pointwise minimum.
        rng = np.random.default_rng(9)
        agree = 0
        for _ in range(200):
            n = int(rng.integers(5, 41))
            d = int(rng.integers(2, 5))
            sample = _random_sample(rng, n, d)
            x = rng.dirichlet(np.ones(d))
            delta = float(rng.uniform(0, 5e-3))
            losses = -sample.series.data @ x
            _, h = cvar_from_losses(losses, sample.w, ALPHA)
            margin = (delta / ALPHA) * np.linalg.norm(x)
            gamma = float(h + margin + rng.normal(0, 0.01))
            reduced_feasible = h + margin <= gamma + 1e-12

            r_breaks = np.maximum(gamma - losses, 0.0)
            r_grid = np.concatenate([r_breaks, np.linspace(0.0, max(r_breaks.max(), 1.0) * 1.5, 2000)])
            z = np.maximum(r_grid[:, None] - gamma + losses[None, :], 0.0)
            lhs = delta * np.linalg.norm(x) + z @ sample.w - ALPHA * r_grid
            lp_feasible = bool(np.any(lhs <= 1e-10))

            if abs(h + margin - gamma) < 1e-9:
                continue  # boundary case: both sides are tolerance-sensitive
            assert reduced_feasible == lp_feasible
            agree += 1
        assert agree > 150


class TestGenerateCandidates:
    def test_degenerate_menu_single_saa_candidate(self):
        rng = np.random.default_rng(10)
        sample = _random_sample(rng, 50, 3)
        c = training_cost_vector(sample)
        eq = np.full(3, 1.0 / 3)
        _, h_eq = cvar_from_losses(-sample.series.data @ eq, sample.w, ALPHA)
        menu = generate_candidates(sample, np.array([0.0]), 0, ALPHA, 1.2 * h_eq, seed=0)
        assert len(menu) == 1
        assert menu[0].provenance == "grid"
        assert menu[0].provenance_value == 0.0

    def test_dirichlet_menu_on_simplex(self):
        rng = np.random.default_rng(11)
        sample = _random_sample(rng, 30, 4)
        menu = generate_candidates(sample, np.array([]), 5, ALPHA, 0.05, seed=42)
        assert len(menu) == 5
        for cand in menu:
            assert cand.provenance == "dirichlet"
            assert_allclose(cand.x.x.sum(), 1.0, atol=1e-9)
            assert np.all(cand.x.x >= 0)
            assert_allclose(cand.norm2, np.linalg.norm(cand.x.x), atol=1e-12)
            assert 1.0 / 2 <= cand.norm2 <= 1.0 + 1e-12

    def test_infeasible_radii_skipped_with_warning(self, caplog):
        rng = np.random.default_rng(12)
        sample = _random_sample(rng, 40, 3)
        eq = np.full(3, 1.0 / 3)
        _, h_eq = cvar_from_losses(-sample.series.data @ eq, sample.w, ALPHA)
        # huge radii are infeasible for any budget near the nominal CVaR
        grid = np.array([0.0, 5.0])
        with caplog.at_level("WARNING", logger="cvarcert.solver"):
            menu = generate_candidates(sample, grid, 0, ALPHA, 1.3 * h_eq, seed=0)
        assert "skipping radius" in caplog.text
        assert len(menu) == 1

    def test_duplicate_candidates_removed(self):
        rng = np.random.default_rng(13)
        sample = _random_sample(rng, 40, 3)
        c = training_cost_vector(sample)
        # two zero radii produce identical solutions; the dedup keeps one
        menu = generate_candidates(sample, np.array([0.0, 0.0]), 0, ALPHA, 10.0, seed=0)
        assert len(menu) == 1

    def test_empty_menu_raises(self):
        rng = np.random.default_rng(14)
        sample = _random_sample(rng, 40, 3)
        with pytest.raises(RuntimeError, match="empty"):
            generate_candidates(sample, np.array([1e-3]), 0, ALPHA, -5.0, seed=0)

    def test_unsorted_grid_rejected(self):
        rng = np.random.default_rng(15)
        sample = _random_sample(rng, 20, 2)
        with pytest.raises(ValueError, match="sorted"):
            generate_candidates(sample, np.array([1e-2, 1e-3]), 0, ALPHA, 0.1, seed=0)

    @pytest.mark.slow
    def test_grid_norms_weakly_decrease_with_delta(self):
        # Robustness spreads allocations: larger radii should not concentrate
        # the portfolio.  Statistical tendency, asserted over 100 seeds on a
        # mild-dispersion market (with strongly heterogeneous vols the
        # optimum concentrates on the safest asset instead, and the grid is
        # scaled so several radii stay feasible under the 10% budget slack).
        d = 8
        sig = np.linspace(0.008, 0.02, d)
        corr = 0.3 * np.ones((d, d)) + 0.7 * np.eye(d)
        cov = np.outer(sig, sig) * corr
        chol = np.linalg.cholesky(cov)
        mu = np.linspace(2e-4, 1e-3, d)
        grid = np.array([1e-4, 2e-4, 4e-4, 6e-4])
        hits = 0
        total = 0
        for s in range(100):
            rng = np.random.default_rng(3000 + s)
            data = rng.standard_normal((400, d)) @ chol.T + mu
            sample = WeightedSample.uniform(ReturnSeries(data))
            eq = np.full(d, 1.0 / d)
            _, h_eq = cvar_from_losses(-data @ eq, sample.w, ALPHA)
            gamma = 1.1 * h_eq
            try:
                menu = generate_candidates(sample, grid, 0, ALPHA, gamma, seed=s)
            except RuntimeError:
                continue
            norms = [cand.norm2 for cand in menu if cand.provenance == "grid"]
            if len(norms) < 2:
                continue
            total += 1
            if all(b <= a + 1e-6 for a, b in zip(norms, norms[1:])):
                hits += 1
        assert total >= 50
        assert hits / total >= 0.8, (hits, total)
