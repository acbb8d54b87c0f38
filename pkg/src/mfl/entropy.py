"""Entropy and divergence functionals.

Sign convention used everywhere in this package:

    H(mu) = int log(dmu/dx) dmu,

i.e. MINUS the differential entropy, so that the free energy G + tau*H is
minimized.  The uniform distribution is the H-minimizer on the torus.
Nearest-neighbor estimates of differential entropy are negated at this
boundary; mixing the two conventions is the classic bug this module is
built to avoid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .measures import GridDensity, ParticleEnsemble, geodesic_displacement

EULER_GAMMA = float(np.euler_gamma)

#: densities are floored here before logs in Fisher computations; smooth
#: inputs are unaffected to machine precision
DENSITY_FLOOR = 1e-300


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    m_used: int


def unit_ball_volume(d: int) -> float:
    return float(np.exp(0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0)))


def _nn_distances(mu: ParticleEnsemble) -> np.ndarray:
    """Distance from each particle to its nearest neighbor (geodesic)."""
    pos = mu.positions
    m = pos.shape[0]
    out = np.empty(m)
    block = max(1, int(2**22 // max(1, m * mu.dim)))  # ~32 MB working set
    for start in range(0, m, block):
        stop = min(start + block, m)
        disp = geodesic_displacement(pos[start:stop, None, :], pos[None, :, :], mu.domain)
        dist_sq = np.sum(disp * disp, axis=-1)
        rows = np.arange(stop - start)
        dist_sq[rows, np.arange(start, stop)] = np.inf
        out[start:stop] = np.sqrt(dist_sq.min(axis=1))
    return out


def knn_entropy(mu: ParticleEnsemble, jitter_seed: int = 0) -> EntropyEstimate:
    """1-nearest-neighbor entropy estimate, in the package sign convention.

    Computes the classic first-neighbor estimate of differential entropy

        Hdiff = (d/m) sum_i log rho_i + log(m-1) + gamma + log V_d

    with rho_i the geodesic distance from particle i to its nearest
    neighbor and V_d the unit-ball volume, and returns -Hdiff.  Duplicate
    points (rho_i = 0) are perturbed by a 1e-12 jitter keyed by
    ``jitter_seed`` before estimation, since log rho diverges at zero.
    """
    if mu.m < 2:
        raise ValueError("knn_entropy needs at least 2 particles")
    rho = _nn_distances(mu)
    if np.any(rho == 0.0):
        rng = np.random.Generator(np.random.Philox(key=jitter_seed))
        jitter = 1e-12 * rng.standard_normal(mu.positions.shape)
        dup = rho == 0.0
        pos = np.array(mu.positions)
        pos[dup] += jitter[dup]
        rho = _nn_distances(mu.with_positions(pos))
    d = mu.dim
    h_diff = (
        d * float(np.mean(np.log(rho)))
        + float(np.log(mu.m - 1))
        + EULER_GAMMA
        + float(np.log(unit_ball_volume(d)))
    )
    return EntropyEstimate(value=-h_diff, m_used=mu.m)


def grid_entropy(p: GridDensity) -> float:
    """sum over cells of mass * log(density), with 0 log 0 = 0."""
    mass = p.values.ravel()
    pos = mass > 0.0
    return float(np.sum(mass[pos] * np.log(mass[pos] / p.cell_volume)))


def grid_kl(p: GridDensity, q: GridDensity) -> float:
    """Relative entropy sum p log(p/q) between matched grids; >= 0.

    Summed cell by cell as p log(p/q) - p + q.  The correction terms
    cancel exactly (both masses sum to 1) but make every summand
    nonnegative, so rounding can never push the result below zero.
    """
    _check_same_grid(p, q)
    pm = p.values.ravel()
    qm = q.values.ravel()
    pos = pm > 0.0
    if np.any(qm[pos] == 0.0):
        raise ValueError("grid_kl: q vanishes where p has mass")
    safe_q = np.where(qm > 0.0, qm, 1.0)
    log_ratio = np.log(np.where(pos, pm, 1.0) / safe_q)
    terms = np.where(pos, pm * log_ratio - pm + qm, qm)
    return float(np.sum(terms))


def grid_fisher(p: GridDensity, q: GridDensity) -> float:
    """Relative Fisher information sum p |grad log(p/q)|^2 on the grid.

    The log-ratio gradient uses centered differences with periodic
    wrap-around; both densities are floored at 1e-300 before the logs.
    """
    _check_same_grid(p, q)
    log_ratio = np.log(np.maximum(p.values, DENSITY_FLOOR)) - np.log(
        np.maximum(q.values, DENSITY_FLOOR)
    )
    dx = p.spacing
    total = 0.0
    for axis in range(p.dim):
        grad = (np.roll(log_ratio, -1, axis=axis) - np.roll(log_ratio, 1, axis=axis)) / (
            2.0 * dx
        )
        total += float(np.sum(p.values * grad * grad))
    return total


def _check_same_grid(p: GridDensity, q: GridDensity) -> None:
    if p.domain != q.domain or p.pts_per_axis != q.pts_per_axis:
        raise ValueError("grid mismatch")
