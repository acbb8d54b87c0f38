"""Noisy particle gradient descent.

One step of the recursion moves every particle against the first-variation
gradient evaluated at the PRE-step empirical measure (a simultaneous
update: the measure is frozen while all particles move) and adds Gaussian
noise scaled by sqrt(2 * eta * tau):

    X_i  <-  X_i - eta * grad V[mu_hat](X_i) + sqrt(2 eta tau) * Z_i.

Noise is generated from a counter-based Philox stream keyed by
(seed, step index), with the (particle, coordinate) entry taken from a
fixed position of the per-step block.  Draws therefore never depend on
execution order or thread count, and any (seed, step) pair can be replayed
in isolation.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .entropy import knn_entropy
from .errors import DivergedError
from .functionals import ObjectiveContract
from .measures import Domain, ParticleEnsemble, load_snapshot

#: Euclidean coordinates beyond this guard abort the run as diverged
DIVERGENCE_GUARD = 1e12

_INIT_COUNTER_BLOCK = 1 << 192  # reserved Philox counter block for draws
                                # outside the per-step noise stream


# ---------------------------------------------------------------------------
# temperature schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantSchedule:
    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


@dataclass(frozen=True)
class LogarithmicSchedule:
    """tau_t = alpha / log(t + t0); requires t0 > 1 so tau_0 is finite."""

    alpha: float
    t0: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.t0 <= 1:
            raise ValueError("t0 must be > 1")


@dataclass(frozen=True)
class PolynomialSchedule:
    """tau_t = c (t+1)^{-beta} while t < cutoff, then exactly 0."""

    c: float
    beta: float
    cutoff: float

    def __post_init__(self):
        if self.c < 0 or self.beta < 0 or self.cutoff < 0:
            raise ValueError("c, beta, cutoff must be >= 0")


TemperatureSchedule = Union[ConstantSchedule, LogarithmicSchedule, PolynomialSchedule]


def schedule_eval(schedule: TemperatureSchedule, t: float) -> float:
    """Temperature at step (or continuous time) t >= 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if isinstance(schedule, ConstantSchedule):
        return schedule.tau
    if isinstance(schedule, LogarithmicSchedule):
        return float(schedule.alpha / np.log(t + schedule.t0))
    if isinstance(schedule, PolynomialSchedule):
        if t >= schedule.cutoff:
            return 0.0
        return float(schedule.c * (t + 1.0) ** (-schedule.beta))
    raise TypeError(f"unknown schedule type {type(schedule).__name__}")


def schedule_max(schedule: TemperatureSchedule) -> float:
    """Upper bound on tau_t over t >= 0 (schedules are nonincreasing)."""
    return schedule_eval(schedule, 0)


# ---------------------------------------------------------------------------
# noise
# ---------------------------------------------------------------------------

def noise_block(seed: int, step_index: int, m: int, dim: int) -> np.ndarray:
    """Standard normal block for one step, keyed by (seed, step).

    Entry (i, c) is the draw for particle i, coordinate c.  Each step owns
    a disjoint 2^128-wide counter range, so streams never overlap.
    """
    bg = np.random.Philox(key=seed, counter=step_index << 128)
    return np.random.Generator(bg).standard_normal((m, dim))


def init_generator(seed: int) -> np.random.Generator:
    """Generator for initialization draws, disjoint from all step blocks."""
    return np.random.Generator(np.random.Philox(key=seed, counter=_INIT_COUNTER_BLOCK))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def npgd_step(ensemble: ParticleEnsemble, obj: ObjectiveContract, eta: float,
              tau: float, step_index: int, seed: int,
              noise: Optional[np.ndarray] = None) -> ParticleEnsemble:
    """One simultaneous update of all particles.

    ``noise``, when given, substitutes the keyed standard-normal block
    (used by tests that need to permute or replay draws explicitly).
    Raises DivergedError with the offending particle index on non-finite
    gradients or runaway Euclidean coordinates.
    """
    if eta <= 0:
        raise ValueError("eta must be > 0")
    if tau < 0:
        raise ValueError("tau must be >= 0")
    grad = obj.fv_grad_many(ensemble, ensemble.positions)
    bad = ~np.isfinite(grad).all(axis=1)
    if bad.any():
        raise DivergedError(step_index, int(np.argmax(bad)), "non-finite gradient")
    new = ensemble.positions - eta * grad
    if tau > 0:
        if noise is None:
            noise = noise_block(seed, step_index, ensemble.m, ensemble.dim)
        new = new + np.sqrt(2.0 * eta * tau) * noise
    if not ensemble.domain.is_torus:
        runaway = (np.abs(new) > DIVERGENCE_GUARD).any(axis=1)
        if runaway.any():
            raise DivergedError(step_index, int(np.argmax(runaway)), "coordinate guard")
    return ensemble.with_positions(new)


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    m: int
    eta: float
    steps: int
    schedule: TemperatureSchedule
    seed: int
    init: Union[str, ParticleEnsemble] = "uniform"
    checkpoint_every: int = 10

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.eta <= 0:
            raise ValueError("eta must be > 0")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


@dataclass(frozen=True)
class TraceRow:
    step: int
    tau: float
    g: float
    h: float
    f: float
    wall_ms: float


@dataclass(frozen=True)
class Trace:
    rows: list[TraceRow]
    snapshots: dict[int, ParticleEnsemble] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]


def make_initial(domain: Domain, m: int, init: Union[str, ParticleEnsemble],
                 seed: int) -> ParticleEnsemble:
    """Draw the initial ensemble: uniform-on-torus, gaussian(sigma), or a
    snapshot file ("snapshot:<path>"); an explicit ensemble passes through."""
    if isinstance(init, ParticleEnsemble):
        if init.domain != domain:
            raise ValueError("initial snapshot domain mismatch")
        return init
    rng = init_generator(seed)
    if init == "uniform":
        if not domain.is_torus:
            raise ValueError("uniform init requires a torus domain")
        return ParticleEnsemble(domain, rng.random((m, domain.dim)) * domain.period)
    if init.startswith("gaussian:"):
        sigma = float(init.split(":", 1)[1])
        if sigma <= 0:
            raise ValueError("gaussian init needs sigma > 0")
        return ParticleEnsemble(domain, sigma * rng.standard_normal((m, domain.dim)))
    if init.startswith("snapshot:"):
        snap = load_snapshot(init.split(":", 1)[1])
        if not isinstance(snap, ParticleEnsemble):
            raise ValueError("snapshot init must be a particle snapshot")
        if snap.domain != domain:
            raise ValueError("initial snapshot domain mismatch")
        return snap
    raise ValueError(f"unknown init spec {init!r}")


def _record(rows, step, tau, obj, ensemble, seed, t_start) -> None:
    g = float(obj.value(ensemble))
    h = knn_entropy(ensemble, jitter_seed=seed).value if ensemble.m >= 2 else float("nan")
    wall_ms = (time.perf_counter() - t_start) * 1e3
    rows.append(TraceRow(step, float(tau), g, h, float(g + tau * h), wall_ms))


def run(config: RunConfig, obj: ObjectiveContract) -> Trace:
    """Execute the recursion for config.steps steps.

    Rows are recorded at step 0, every checkpoint_every steps, and at the
    final step; the tau column reproduces the schedule exactly.  Identical
    seeds give identical traces.
    """
    ensemble = make_initial(obj.domain, config.m, config.init, config.seed)
    t_start = time.perf_counter()
    rows: list[TraceRow] = []
    snapshots: dict[int, ParticleEnsemble] = {}
    _record(rows, 0, schedule_eval(config.schedule, 0), obj, ensemble, config.seed, t_start)
    snapshots[0] = ensemble
    for k in range(config.steps):
        tau_k = schedule_eval(config.schedule, k)
        ensemble = npgd_step(ensemble, obj, config.eta, tau_k, k, config.seed)
        step = k + 1
        if step % config.checkpoint_every == 0 or step == config.steps:
            _record(rows, step, schedule_eval(config.schedule, step), obj,
                    ensemble, config.seed, t_start)
            snapshots[step] = ensemble
    return Trace(rows=rows, snapshots=snapshots)


# ---------------------------------------------------------------------------
# trace CSV (header: step,tau,G,H,F,wall_ms)
# ---------------------------------------------------------------------------

TRACE_HEADER = "step,tau,G,H,F,wall_ms"


def format_trace_csv(trace: Trace, deterministic_timing: bool = True) -> str:
    """Render a trace as CSV.

    With ``deterministic_timing`` (the default for persisted artifacts) the
    wall_ms column is written as 0 so that re-runs of the same seeds are
    byte-identical; measured timings stay available on the in-memory rows.
    """
    lines = [TRACE_HEADER]
    for r in trace.rows:
        wall = 0.0 if deterministic_timing else r.wall_ms
        lines.append(
            f"{r.step},{r.tau!r},{r.g!r},{r.h!r},{r.f!r},{wall!r}"
        )
    return "\n".join(lines) + "\n"


def parse_trace_csv(text: str) -> Trace:
    lines = text.strip().splitlines()
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError(f"bad trace header: {lines[0] if lines else '<empty>'!r}")
    rows = []
    for idx, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 6:
            raise ValueError(f"trace row {idx}: expected 6 fields, got {len(parts)}")
        try:
            rows.append(TraceRow(int(parts[0]), *[float(v) for v in parts[1:]]))
        except ValueError as exc:
            raise ValueError(f"trace row {idx}: {exc}") from None
    return Trace(rows=rows)
