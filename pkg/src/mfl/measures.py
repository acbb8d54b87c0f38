"""Ambient geometry and measure representations.

Positions live either in flat Euclidean space R^d or on the flat torus
(R/(period Z))^d.  Probability measures come in three concrete forms:

* :class:`ParticleEnsemble` -- m equally weighted atoms (the empirical
  measure (1/m) sum_i delta_{X_i}),
* :class:`GridDensity` -- cell masses on a uniform torus grid (mass =
  density times cell volume, stored pre-multiplied so the masses sum to 1),
* :class:`WeightedAtoms` -- general finite atomic measures, used for
  mixtures of ensembles and for treating a grid as atoms at cell centers.

Every type is an immutable value after construction; operations are pure
functions, so anything here may be shared freely across threads.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

TWO_PI = 2.0 * np.pi

#: hard cap on exact-assignment problem size (cost is O(m^3))
W2_MAX_SIZE = 512


@dataclass(frozen=True)
class Domain:
    """Euclidean or periodic ambient space of dimension ``dim``."""

    kind: str  # "euclidean" | "torus"
    dim: int
    period: float = TWO_PI

    def __post_init__(self):
        if self.kind not in ("euclidean", "torus"):
            raise ValueError(f"unknown domain kind: {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "torus" and not self.period > 0:
            raise ValueError("period must be > 0")

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"


def euclidean(dim: int) -> Domain:
    return Domain("euclidean", dim)


def torus(dim: int, period: float = TWO_PI) -> Domain:
    return Domain("torus", dim, period)


def wrap(x: np.ndarray, domain: Domain) -> np.ndarray:
    """Reduce torus coordinates into [0, period); identity on Euclidean space.

    Accepts any array whose last axis has length ``domain.dim`` (or scalars
    for d=1 convenience).  Rejects non-finite input.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("wrap: input has non-finite entries")
    if not domain.is_torus:
        return x
    reduced = np.mod(x, domain.period)
    # np.mod of a tiny negative rounds to the period itself; fold it back
    return np.where(reduced >= domain.period, 0.0, reduced)


def geodesic_displacement(x: np.ndarray, y: np.ndarray, domain: Domain) -> np.ndarray:
    """Signed shortest displacement from ``x`` to ``y``, per coordinate.

    Euclidean: ``y - x``.  Torus: each coordinate reduced into
    (-period/2, period/2], with the antipodal tie broken deterministically
    to +period/2 so downstream gradients and transport plans are
    reproducible.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("geodesic_displacement: non-finite input")
    if not domain.is_torus:
        return y - x
    half = 0.5 * domain.period
    delta = np.mod(y - x, domain.period)
    return np.where(delta > half, delta - domain.period, delta)


def geodesic_distance_sq(x: np.ndarray, y: np.ndarray, domain: Domain) -> np.ndarray:
    d = geodesic_displacement(x, y, domain)
    return np.sum(d * d, axis=-1)


@dataclass(frozen=True)
class ParticleEnsemble:
    """m equally weighted particle positions (rows of an m x d matrix)."""

    domain: Domain
    positions: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[1] != self.domain.dim:
            raise ValueError(
                f"positions must be (m, {self.domain.dim}), got {pos.shape}"
            )
        if pos.shape[0] < 1:
            raise ValueError("ensemble needs at least one particle")
        pos = wrap(pos, self.domain).copy()
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def m(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def with_positions(self, positions: np.ndarray) -> "ParticleEnsemble":
        return ParticleEnsemble(self.domain, positions)


@dataclass(frozen=True)
class WeightedAtoms:
    """Finite atomic measure: positions with nonnegative weights summing to 1."""

    domain: Domain
    positions: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pos.shape[0] != w.shape[0]:
            raise ValueError("positions and weights length mismatch")
        if np.any(w < -1e-15):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1")
        pos = wrap(pos, self.domain).copy()
        pos.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)


def mix(a, b, t: float) -> WeightedAtoms:
    """The mixture (1-t)*a + t*b of two atomic measures on a common domain."""
    pa, wa = atoms_of(a)
    pb, wb = atoms_of(b)
    if a.domain != b.domain:
        raise ValueError("mix: domain mismatch")
    if not 0.0 <= t <= 1.0:
        raise ValueError("mix: t must lie in [0, 1]")
    return WeightedAtoms(
        a.domain,
        np.vstack([pa, pb]),
        np.concatenate([(1.0 - t) * wa, t * wb]),
    )


@dataclass(frozen=True)
class GridDensity:
    """Probability masses on a uniform torus grid, cell-centered.

    Cell j (per axis) is centered at j * period / n and carries the mass of
    its cell, so ``values`` sums to 1 and the density in cell j is
    ``values[j] / cell_volume``.  Divergence-form updates in the PDE solver
    conserve the total mass exactly because they move mass between cells.
    """

    domain: Domain
    pts_per_axis: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not self.domain.is_torus:
            raise ValueError("GridDensity requires a torus domain")
        if self.pts_per_axis < 1:
            raise ValueError("pts_per_axis must be >= 1")
        vals = np.asarray(self.values, dtype=float)
        shape = (self.pts_per_axis,) * self.domain.dim
        vals = vals.reshape(shape).copy()
        if np.any(vals < 0):
            raise ValueError("grid masses must be nonnegative")
        total = vals.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"grid masses must sum to 1 (got {total!r})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def spacing(self) -> float:
        return self.domain.period / self.pts_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    def axis_centers(self) -> np.ndarray:
        return np.arange(self.pts_per_axis) * self.spacing

    def cell_centers(self) -> np.ndarray:
        """All cell centers as an (n^d, d) array, row-major cell order."""
        axes = [self.axis_centers()] * self.dim
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)

    def with_values(self, values: np.ndarray) -> "GridDensity":
        return GridDensity(self.domain, self.pts_per_axis, values)


def normalize_grid(domain: Domain, pts_per_axis: int, raw: np.ndarray) -> GridDensity:
    """Build a GridDensity from unnormalized nonnegative cell weights."""
    raw = np.asarray(raw, dtype=float)
    total = raw.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError("cannot normalize: total weight is not positive")
    return GridDensity(domain, pts_per_axis, raw / total)


def uniform_grid(domain: Domain, pts_per_axis: int) -> GridDensity:
    n_cells = pts_per_axis ** domain.dim
    return GridDensity(domain, pts_per_axis, np.full(n_cells, 1.0 / n_cells))


def grid_from_density_fn(domain: Domain, pts_per_axis: int, fn) -> GridDensity:
    """Sample a (possibly unnormalized) density at cell centers and normalize."""
    probe = uniform_grid(domain, pts_per_axis)
    vals = np.asarray(fn(probe.cell_centers()), dtype=float).reshape(
        (pts_per_axis,) * domain.dim
    )
    return normalize_grid(domain, pts_per_axis, vals)


def atoms_of(measure) -> tuple[np.ndarray, np.ndarray]:
    """View any supported measure as (positions, weights) atoms.

    A grid density becomes atoms at cell centers.  For kernels with finite
    frequency content this midpoint view is an exact quadrature.
    """
    if isinstance(measure, ParticleEnsemble):
        w = np.full(measure.m, 1.0 / measure.m)
        return measure.positions, w
    if isinstance(measure, WeightedAtoms):
        return measure.positions, measure.weights
    if isinstance(measure, GridDensity):
        return measure.cell_centers(), measure.values.ravel()
    raise TypeError(f"unsupported measure type: {type(measure).__name__}")


def second_moment(mu) -> float:
    """Mean squared distance to the origin.

    Euclidean measures use |x|^2; torus measures use the squared geodesic
    distance to the origin cell, which keeps the quantity bounded.
    """
    pos, w = atoms_of(mu)
    dom = mu.domain
    disp = geodesic_displacement(np.zeros(dom.dim), pos, dom)
    return float(np.sum(w * np.sum(disp * disp, axis=-1)))


@dataclass(frozen=True)
class TransportPlan:
    """Equal-mass assignment: source particle i pairs with target ``permutation[i]``."""

    permutation: np.ndarray = field(repr=False)

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=int).copy()
        if sorted(perm.tolist()) != list(range(len(perm))):
            raise ValueError("permutation must be a bijection on {0..m-1}")
        perm.setflags(write=False)
        object.__setattr__(self, "permutation", perm)


def _pairwise_sq_dist(a: ParticleEnsemble, b: ParticleEnsemble) -> np.ndarray:
    disp = geodesic_displacement(
        a.positions[:, None, :], b.positions[None, :, :], a.domain
    )
    return np.sum(disp * disp, axis=-1)


def w2_exact(a: ParticleEnsemble, b: ParticleEnsemble) -> tuple[float, TransportPlan]:
    """Exact quadratic-cost transport distance between equal-size ensembles.

    Solves the assignment problem on the squared geodesic cost matrix and
    returns (W2, optimal plan), where W2^2 is the minimal mean squared
    displacement.  Exact but O(m^3): refuses m > 512.
    """
    if a.domain != b.domain:
        raise ValueError("w2_exact: domain mismatch")
    if a.m != b.m:
        raise ValueError(f"w2_exact: size mismatch ({a.m} vs {b.m})")
    if a.m > W2_MAX_SIZE:
        raise ValueError(f"w2_exact: m={a.m} exceeds capacity {W2_MAX_SIZE}")
    cost = _pairwise_sq_dist(a, b)
    rows, cols = linear_sum_assignment(cost)
    w2sq = float(cost[rows, cols].mean())
    perm = np.empty(a.m, dtype=int)
    perm[rows] = cols
    return float(np.sqrt(max(w2sq, 0.0))), TransportPlan(perm)


def w2_bruteforce(a: ParticleEnsemble, b: ParticleEnsemble) -> float:
    """Enumerate all m! assignments; test oracle for small m only."""
    if a.m != b.m or a.m > 8:
        raise ValueError("w2_bruteforce: equal sizes with m <= 8 required")
    cost = _pairwise_sq_dist(a, b)
    best = min(
        sum(cost[i, p[i]] for i in range(a.m))
        for p in itertools.permutations(range(a.m))
    )
    return float(np.sqrt(best / a.m))


def sample_from_grid(p: GridDensity, m: int, seed: int) -> ParticleEnsemble:
    """Draw m particles from a grid density (cell by mass, uniform within)."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    masses = p.values.ravel()
    idx = rng.choice(masses.size, size=m, p=masses / masses.sum())
    centers = p.cell_centers()[idx]
    jitter = (rng.random((m, p.dim)) - 0.5) * p.spacing
    return ParticleEnsemble(p.domain, centers + jitter)


# ---------------------------------------------------------------------------
# snapshot files
#
# Particle snapshot: header "m d domain period", then m rows of d floats.
# Grid snapshot: header "n_g d period", then n_g^d masses in row-major order.
# Floats are written with repr(), i.e. shortest decimal that round-trips.
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def format_particle_snapshot(ensemble: ParticleEnsemble) -> str:
    dom = ensemble.domain
    period = dom.period if dom.is_torus else 0.0
    lines = [f"{ensemble.m} {ensemble.dim} {dom.kind} {_fmt(period)}"]
    for row in ensemble.positions:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def parse_particle_snapshot(text: str) -> ParticleEnsemble:
    lines = text.strip().splitlines()
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError("particle snapshot header must be 'm d domain period'")
    m, d, kind, period = int(head[0]), int(head[1]), head[2], float(head[3])
    dom = Domain(kind, d, period) if kind == "torus" else Domain(kind, d)
    rows = [[float(v) for v in ln.split()] for ln in lines[1 : 1 + m]]
    pos = np.array(rows, dtype=float).reshape(m, d)
    return ParticleEnsemble(dom, pos)


def format_grid_snapshot(grid: GridDensity) -> str:
    lines = [f"{grid.pts_per_axis} {grid.dim} {_fmt(grid.domain.period)}"]
    lines.extend(_fmt(v) for v in grid.values.ravel())
    return "\n".join(lines) + "\n"


def parse_grid_snapshot(text: str) -> GridDensity:
    tokens = text.split()
    n_g, d, period = int(tokens[0]), int(tokens[1]), float(tokens[2])
    vals = np.array([float(t) for t in tokens[3 : 3 + n_g**d]], dtype=float)
    return GridDensity(torus(d, period), n_g, vals)


def save_snapshot(path, measure) -> None:
    if isinstance(measure, ParticleEnsemble):
        text = format_particle_snapshot(measure)
    elif isinstance(measure, GridDensity):
        text = format_grid_snapshot(measure)
    else:
        raise TypeError("save_snapshot supports ParticleEnsemble and GridDensity")
    with open(path, "w") as fh:
        fh.write(text)


def load_snapshot(path):
    """Load either snapshot kind, telling them apart by the header shape."""
    with open(path) as fh:
        text = fh.read()
    head = text.strip().splitlines()[0].split()
    if len(head) == 4:
        return parse_particle_snapshot(text)
    if len(head) == 3:
        return parse_grid_snapshot(text)
    raise ValueError(f"unrecognized snapshot header: {head!r}")
