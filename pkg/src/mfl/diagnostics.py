"""Quantitative checks tying the runs back to the theory.

All functions here are pure analysis over immutable traces, frames and
ensembles: exponential-rate fits of free-energy gaps, the two-sided
relative-entropy bracket around the optimality gap, a transport-cost
consistency check, paired seed comparisons and particle-vs-grid agreement.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trace
from .entropy import grid_entropy, grid_kl
from .functionals import KernelMMDObjective, ObjectiveContract
from .grid_oracle import GridFrame, gibbs_grid
from .measures import GridDensity, ParticleEnsemble, w2_exact


# ---------------------------------------------------------------------------
# exponential-rate fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    rate: float
    r_squared: float
    window: tuple[float, float]
    intercept: float = 0.0
    n_points: int = 0


def fit_exponential_rate(series: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares line through (t, log gap); rate is minus the slope.

    Requires at least 5 points, all gaps positive (a nonpositive gap means
    the window reaches the plateau and must be trimmed first).  A constant
    series has zero total variance; its r^2 is reported as 0.
    """
    pts = np.asarray(list(series), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 5:
        raise ValueError("need at least 5 (t, gap) points")
    t, gap = pts[:, 0], pts[:, 1]
    if np.any(gap <= 0):
        raise ValueError("nonpositive gap in window; shrink the window")
    y = np.log(gap)
    window = (float(t[0]), float(t[-1]))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        # flat series: zero slope, r^2 undefined and reported as 0
        return RateFit(rate=0.0, r_squared=0.0, window=window,
                       intercept=float(y[0]), n_points=len(t))
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    r_sq = 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(
        rate=float(-slope),
        r_squared=max(0.0, min(1.0, r_sq)),
        window=window,
        intercept=float(intercept),
        n_points=len(t),
    )


def auto_rate_window(series: Sequence[tuple[float, float]],
                     lo_frac: float = 1e-6,
                     hi_frac: float = 1e-1) -> list[tuple[float, float]]:
    """Longest contiguous run with gap in [lo_frac, hi_frac] * initial gap.

    Cuts away both the burn-in (gap still near its initial value) and the
    plateau (gap at noise level), where a log-linear fit is meaningless.
    """
    pts = np.asarray(list(series), dtype=float)
    g0 = pts[0, 1]
    if g0 <= 0:
        raise ValueError("initial gap must be positive")
    ok = (pts[:, 1] > 0) & (pts[:, 1] >= lo_frac * g0) & (pts[:, 1] <= hi_frac * g0)
    best_start, best_len, start = 0, 0, None
    for i, flag in enumerate(np.append(ok, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start > best_len:
                best_start, best_len = start, i - start
            start = None
    if best_len == 0:
        raise ValueError("no points inside the fitting band")
    return [tuple(p) for p in pts[best_start : best_start + best_len]]


def fit_rate_auto(series: Sequence[tuple[float, float]]) -> RateFit:
    return fit_exponential_rate(auto_rate_window(series))


# ---------------------------------------------------------------------------
# entropy bracket around the optimality gap
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    """tau*KL(mu|mu*) <= F(mu)-F(mu*) <= tau*KL(mu|nu); slacks may be
    negative, in which case the finding is the violation itself."""

    lower: float
    mid: float
    upper: float
    slack_lower: float
    slack_upper: float


def sandwich_check(mu: GridDensity, obj: ObjectiveContract, tau: float,
                   mu_star: GridDensity) -> SandwichReport:
    if tau <= 0:
        raise ValueError("tau must be > 0")
    nu = gibbs_grid(obj, mu, tau, mu)
    f_mu = obj.value_grid(mu) + tau * grid_entropy(mu)
    f_star = obj.value_grid(mu_star) + tau * grid_entropy(mu_star)
    lower = tau * grid_kl(mu, mu_star)
    upper = tau * grid_kl(mu, nu)
    mid = f_mu - f_star
    return SandwichReport(
        lower=lower,
        mid=mid,
        upper=upper,
        slack_lower=mid - lower,
        slack_upper=upper - mid,
    )


# ---------------------------------------------------------------------------
# transport-cost consistency (quadratic transport vs relative entropy)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TransportCheck:
    w2sq: float
    bound: float
    holds: bool
    mc_margin: float


def talagrand_particle_check(mu: ParticleEnsemble,
                             mu_star_samples: ParticleEnsemble,
                             rho: float, kl_grid: float,
                             n_boot: int = 100,
                             seed: int = 0) -> TransportCheck:
    """Check W2^2(mu, mu*) <= (2/rho) KL(mu|mu*) on particle discretizations.

    ``kl_grid`` comes from matched grid discretizations, ``rho`` from the
    closed-form log-Sobolev bound.  Particle discretization noise must not
    produce false violations, so the comparison carries a Monte-Carlo
    margin of 3 bootstrap standard errors of w2^2 under resampling of mu.
    """
    if rho <= 0:
        raise ValueError("rho must be > 0")
    w2, _ = w2_exact(mu, mu_star_samples)
    w2sq = w2**2
    rng = np.random.Generator(np.random.Philox(key=seed))
    boots = np.empty(n_boot)
    for b in range(n_boot):
        idx = rng.integers(0, mu.m, size=mu.m)
        resampled = mu.with_positions(mu.positions[idx])
        boots[b] = w2_exact(resampled, mu_star_samples)[0] ** 2
    margin = 3.0 * float(boots.std(ddof=1))
    bound = 2.0 * kl_grid / rho
    return TransportCheck(
        w2sq=float(w2sq), bound=float(bound),
        holds=bool(w2sq <= bound + margin), mc_margin=margin,
    )


# ---------------------------------------------------------------------------
# seed-paired comparison of two run families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PairedComparison:
    wins_a: int
    wins_b: int
    ties: int
    median_a: float
    median_b: float


def paired_seed_comparison(traces_a: Sequence[Trace], traces_b: Sequence[Trace],
                           metric: str = "final_G") -> PairedComparison:
    """Per-seed comparison of terminal objective values (lower wins)."""
    if metric != "final_G":
        raise ValueError(f"unsupported metric {metric!r}")
    if len(traces_a) != len(traces_b):
        raise ValueError("trace lists must pair up seed by seed")
    a = np.array([tr.final.g for tr in traces_a])
    b = np.array([tr.final.g for tr in traces_b])
    return PairedComparison(
        wins_a=int(np.sum(a < b)),
        wins_b=int(np.sum(b < a)),
        ties=int(np.sum(a == b)),
        median_a=float(np.median(a)),
        median_b=float(np.median(b)),
    )


# ---------------------------------------------------------------------------
# particle-vs-grid agreement
# ---------------------------------------------------------------------------

def particle_grid_discrepancy(mu: ParticleEnsemble, p: GridDensity,
                              obj: KernelMMDObjective) -> float:
    """Squared kernel discrepancy between an empirical measure and a grid.

    Closed form through the kernel's Fourier coefficients; goes to zero at
    rate O(1/m) in expectation when the particles are drawn from p, which
    is how the particle runs are checked against the grid reference.
    """
    if not isinstance(obj, KernelMMDObjective):
        raise TypeError("particle_grid_discrepancy needs a kernel objective")
    if mu.domain != p.domain:
        raise ValueError("domain mismatch")
    return obj.discrepancy_sq(mu, p)


# ---------------------------------------------------------------------------
# affine entropy envelope  -H <= C1 * F + C2
# ---------------------------------------------------------------------------

def entropy_envelope_constants(obj: ObjectiveContract, tau0: float) -> tuple[float, float]:
    """Constants (C1, C2) with -H(mu) <= C1 F_tau(mu) + C2 for tau <= tau0.

    On the torus this follows from boundedness: -H <= d log(period) for
    every density, and F >= -tau0 * d * log(period) because the objective
    is nonnegative there.  (C1, C2) = (1, (1 + tau0) d log(period)).
    """
    if not obj.domain.is_torus:
        raise ValueError("envelope constants implemented for torus objectives")
    d_log_vol = obj.domain.dim * float(np.log(obj.domain.period))
    return 1.0, (1.0 + tau0) * d_log_vol


def check_entropy_envelope(frames: Iterable[GridFrame], c1: float,
                           c2: float) -> list[float]:
    """Slack of the envelope per frame (negative slack = violation)."""
    return [c1 * fr.f + c2 - (-fr.h) for fr in frames]
