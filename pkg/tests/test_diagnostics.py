import numpy as np
import pytest

from mfl.diagnostics import (
    auto_rate_window,
    check_entropy_envelope,
    entropy_envelope_constants,
    fit_exponential_rate,
    fit_rate_auto,
    paired_seed_comparison,
    particle_grid_discrepancy,
    sandwich_check,
    talagrand_particle_check,
)
from mfl.dynamics import Trace, TraceRow
from mfl.entropy import grid_entropy, grid_kl
from mfl.functionals import CosineSeriesKernel, KernelMMDObjective, cosine_potential, lsi_lower_bound
from mfl.grid_oracle import (
    FixedPointConfig,
    PdeConfig,
    gibbs_fixed_point,
    solve_mfl,
    stable_dt,
)
from mfl.measures import (
    ParticleEnsemble,
    grid_from_density_fn,
    normalize_grid,
    sample_from_grid,
    torus,
    uniform_grid,
)
from mfl.presets import kmmd_1d_objective

TWO_PI = 2.0 * np.pi
T1 = torus(1)


class TestFitExponentialRate:
    def test_exact_exponential(self):
        t = np.linspace(0, 5, 50)
        fit = fit_exponential_rate(list(zip(t, 3.0 * np.exp(-2.0 * t))))
        assert fit.rate == pytest.approx(2.0, abs=1e-10)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-10)

    def test_noisy_exponential(self):
        rng = np.random.default_rng(0)
        t = np.linspace(0, 5, 50)
        gap = 3.0 * np.exp(-2.0 * t) * (1 + 0.01 * rng.standard_normal(50))
        fit = fit_exponential_rate(list(zip(t, gap)))
        assert fit.rate == pytest.approx(2.0, abs=0.05)

    def test_constant_series(self):
        t = np.linspace(0, 5, 20)
        fit = fit_exponential_rate(list(zip(t, np.full(20, 0.7))))
        assert fit.rate == 0.0
        assert fit.r_squared == 0.0

    def test_nonpositive_gap_rejected(self):
        pts = [(0.0, 1.0), (1.0, 0.5), (2.0, 0.0), (3.0, 0.1), (4.0, 0.05)]
        with pytest.raises(ValueError, match="nonpositive"):
            fit_exponential_rate(pts)

    def test_too_few_points(self):
        with pytest.raises(ValueError, match="at least 5"):
            fit_exponential_rate([(0.0, 1.0), (1.0, 0.5)])

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        t = np.linspace(0, 4, 30)
        gap = np.exp(-1.3 * t) * (1 + 0.005 * rng.standard_normal(30))
        a = fit_exponential_rate(list(zip(t, gap)))
        b = fit_exponential_rate(list(zip(t, 17.5 * gap)))
        assert a.rate == pytest.approx(b.rate, rel=1e-12)
        assert a.r_squared == pytest.approx(b.r_squared, rel=1e-9)


class TestAutoWindow:
    def test_trims_burn_in_and_plateau(self):
        t = np.linspace(0, 30, 301)
        gap = np.exp(-t) + 1e-8  # decays then floors near 1e-8
        window = auto_rate_window(list(zip(t, gap)))
        gaps = np.array([g for _, g in window])
        assert gaps.max() <= 0.1 * gap[0]
        assert gaps.min() >= 1e-6 * gap[0]
        fit = fit_rate_auto(list(zip(t, gap)))
        assert fit.rate == pytest.approx(1.0, rel=0.05)

    def test_no_band_points(self):
        with pytest.raises(ValueError, match="band"):
            auto_rate_window([(0.0, 1.0), (1.0, 0.99), (2.0, 0.98)])


@pytest.fixture(scope="module")
def grid_run():
    obj = kmmd_1d_objective(64)
    p0 = uniform_grid(T1, 64)
    tau = 0.1
    cfg = PdeConfig(grid=p0, dt=stable_dt(obj, p0, tau), t_end=8.0,
                    tau=tau, record_every=200)
    frames = solve_mfl(cfg, obj)
    mu_star = gibbs_fixed_point(
        obj, tau, p0, FixedPointConfig(damping=0.2, tol=1e-13, max_iter=20000))
    return obj, tau, frames, mu_star


class TestSandwichCheck:
    def test_at_optimum_all_zero(self, grid_run):
        obj, tau, _, mu_star = grid_run
        rep = sandwich_check(mu_star, obj, tau, mu_star)
        assert abs(rep.lower) <= 1e-9
        assert abs(rep.mid) <= 1e-9
        assert abs(rep.upper) <= 1e-9

    def test_linear_objective_lower_equals_mid(self):
        obj = cosine_potential(1.0, T1)
        tau = 0.5
        mu_star = gibbs_fixed_point(obj, tau, uniform_grid(T1, 64),
                                    FixedPointConfig(damping=1.0, tol=1e-14))
        rng = np.random.default_rng(2)
        mu = normalize_grid(T1, 64, rng.random(64) + 0.3)
        rep = sandwich_check(mu, obj, tau, mu_star)
        assert rep.lower == pytest.approx(rep.mid, abs=1e-10)
        assert rep.upper == pytest.approx(rep.mid, abs=1e-10)

    def test_random_smooth_states_bracketed(self, grid_run):
        obj, tau, _, mu_star = grid_run
        rng = np.random.default_rng(3)
        for _ in range(20):
            phase = rng.uniform(0, TWO_PI)
            amp = rng.uniform(0.2, 2.0)
            mu = grid_from_density_fn(
                T1, 64, lambda x: np.exp(amp * np.cos(x[:, 0] - phase)))
            rep = sandwich_check(mu, obj, tau, mu_star)
            assert rep.slack_lower >= -1e-9
            assert rep.slack_upper >= -1e-9


class TestTalagrandCheck:
    def test_zero_distance_holds(self):
        rng = np.random.default_rng(4)
        mu = ParticleEnsemble(T1, rng.uniform(0, TWO_PI, (20, 1)))
        rep = talagrand_particle_check(mu, mu, rho=0.5, kl_grid=0.1)
        assert rep.w2sq == 0.0
        assert rep.holds
        assert rep.bound >= 0.0

    def test_frames_hold(self, grid_run):
        obj, tau, frames, mu_star = grid_run
        rho = lsi_lower_bound(obj, tau)
        star_samples = sample_from_grid(mu_star, 50, seed=11)
        for fr in frames[1:]:
            mu = sample_from_grid(fr.grid, 50, seed=13)
            rep = talagrand_particle_check(
                mu, star_samples, rho=rho, kl_grid=grid_kl(fr.grid, mu_star))
            assert rep.holds

    def test_rho_validation(self):
        mu = ParticleEnsemble(T1, np.zeros((2, 1)))
        with pytest.raises(ValueError, match="rho"):
            talagrand_particle_check(mu, mu, rho=0.0, kl_grid=0.1)


def _trace_with_final_g(g):
    return Trace(rows=[TraceRow(0, 0.0, g, 0.0, g, 0.0)])


class TestPairedSeedComparison:
    def test_identical_sets_tie(self):
        traces = [_trace_with_final_g(v) for v in (1.0, 2.0, 3.0)]
        cmp = paired_seed_comparison(traces, traces)
        assert (cmp.wins_a, cmp.wins_b, cmp.ties) == (0, 0, 3)
        assert cmp.median_a == cmp.median_b == 2.0

    def test_dominance(self):
        a = [_trace_with_final_g(v) for v in (0.1, 0.2, 0.3)]
        b = [_trace_with_final_g(v) for v in (1.0, 1.1, 1.2)]
        cmp = paired_seed_comparison(a, b)
        assert cmp.wins_a == 3 and cmp.wins_b == 0

    def test_length_mismatch(self):
        a = [_trace_with_final_g(0.0)]
        with pytest.raises(ValueError, match="pair"):
            paired_seed_comparison(a, a * 2)

    def test_unknown_metric(self):
        a = [_trace_with_final_g(0.0)]
        with pytest.raises(ValueError, match="metric"):
            paired_seed_comparison(a, a, metric="final_H")


class TestParticleGridDiscrepancy:
    def test_sampling_rate(self, kmmd1d):
        p = two_bump = grid_from_density_fn(
            T1, 64, lambda x: np.exp(2 * np.cos(x[:, 0])))
        meds = {}
        for m in (100, 1000):
            vals = [particle_grid_discrepancy(sample_from_grid(p, m, seed=s), p, kmmd1d)
                    for s in range(20)]
            meds[m] = np.median(vals)
        assert meds[1000] < meds[100] / 3.0

    def test_point_mass_agreement(self, kmmd1d):
        masses = np.zeros(64)
        masses[7] = 1.0
        from mfl.measures import GridDensity
        p = GridDensity(T1, 64, masses)
        center = p.axis_centers()[7]
        mu = ParticleEnsemble(T1, np.array([[center]]))
        assert particle_grid_discrepancy(mu, p, kmmd1d) <= 1e-20

    def test_uniform_fluctuation_band(self, kmmd1d):
        u = uniform_grid(T1, 64)
        rng = np.random.default_rng(5)
        for m in (100, 400):
            vals = []
            for s in range(10):
                mu = ParticleEnsemble(T1, rng.uniform(0, TWO_PI, (m, 1)))
                vals.append(particle_grid_discrepancy(mu, u, kmmd1d))
            # E[MMD^2] = (E k(x,x) - E k(x,x')) / m <= f(0)/m
            assert np.median(vals) <= 3.9 / m * 3.0

    def test_type_check(self, quad2d):
        u = uniform_grid(T1, 8)
        mu = ParticleEnsemble(T1, np.zeros((1, 1)))
        with pytest.raises(TypeError):
            particle_grid_discrepancy(mu, u, quad2d)


class TestEntropyEnvelope:
    def test_frames_below_envelope(self, grid_run):
        obj, tau, frames, _ = grid_run
        c1, c2 = entropy_envelope_constants(obj, tau0=tau)
        slacks = check_entropy_envelope(frames, c1, c2)
        assert all(s >= 0.0 for s in slacks)
