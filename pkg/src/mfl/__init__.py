"""Noisy particle gradient descent over probability measures.

Minimizes convex functionals G plus an entropy term tau*H by moving an
interacting particle cloud with noisy gradient steps; an independent grid
solver for the matching drift-diffusion flow, entropy estimators,
temperature schedules and diagnostics verify the convergence behavior.
"""

from .dynamics import (
    ConstantSchedule,
    LogarithmicSchedule,
    PolynomialSchedule,
    RunConfig,
    Trace,
    npgd_step,
    run,
    schedule_eval,
)
from .entropy import EntropyEstimate, grid_entropy, grid_fisher, grid_kl, knn_entropy
from .errors import ConfigError, DivergedError, FixedPointError, MflError
from .functionals import (
    CosineSeriesKernel,
    KernelMMDObjective,
    LinearPotentialObjective,
    ObjectiveContract,
    TwoLayerNNObjective,
    cosine_potential,
    finite_diff_particle_grad,
    gibbs_log_density_unnorm,
    lsi_lower_bound,
    quadratic_potential,
)
from .grid_oracle import (
    FixedPointConfig,
    GridFrame,
    PdeConfig,
    drift_field,
    fokker_planck_step,
    gibbs_fixed_point,
    gibbs_grid,
    solve_mfl,
    stable_dt,
)
from .diagnostics import (
    PairedComparison,
    RateFit,
    SandwichReport,
    fit_exponential_rate,
    fit_rate_auto,
    paired_seed_comparison,
    particle_grid_discrepancy,
    sandwich_check,
    talagrand_particle_check,
)
from .measures import (
    Domain,
    GridDensity,
    ParticleEnsemble,
    TransportPlan,
    WeightedAtoms,
    euclidean,
    geodesic_displacement,
    load_snapshot,
    mix,
    normalize_grid,
    sample_from_grid,
    save_snapshot,
    second_moment,
    torus,
    uniform_grid,
    w2_exact,
    wrap,
)

__version__ = "0.1.0"
