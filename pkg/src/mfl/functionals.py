"""Convex objectives over probability measures.

Each objective G supplies, besides its value on atomic measures, its
first variation: the function V[mu] such that the directional derivative
of G at mu toward nu equals  int V[mu] d(nu - mu).  V[mu] plays the role
of a gradient over measures; its pointwise gradient grad V[mu](x) drives
both the particle recursion and the grid solver.

Shipped families:

* ``LinearPotentialObjective``  G(mu) = int V dmu          (V[mu] = V)
* ``KernelMMDObjective``        squared kernel discrepancy to a target
                                under a cosine-series kernel on the torus,
                                V[mu](x) = int k(x, y) d(mu - nu)(y)
* ``TwoLayerNNObjective``       empirical loss of an infinite-width
                                two-layer network with bounded features
                                plus weight decay,
                                V[mu](x) = E ell'(y, yhat(z)) Phi(z, x)
                                           + (lam/2) |x|^2

The cosine-series kernel has finitely many frequencies, so every integral
against it reduces to a short Fourier sum; the kernel objective computes
values, first variations and gradients through that exact spectral form.
All objectives are immutable after construction and safe to share.
Summations are fixed-order numpy reductions, so results do not depend on
any caller-side threading.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .measures import (
    Domain,
    GridDensity,
    ParticleEnsemble,
    atoms_of,
    euclidean,
)

TORUS_LSI_BASE = 1.0 + 2.0 * np.pi  # uniform measure on the 2*pi torus
                                    # satisfies LSI(1 / ((1+2pi) d))


# ---------------------------------------------------------------------------
# cosine-series kernel
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CosineSeriesKernel:
    """Translation-invariant product kernel on the torus.

    Per-dimension profile f(t) = 1 + sum_{k=1}^{n} 2/(1+k) cos(k t); the
    full kernel is k(x, y) = prod_i f(x_i - y_i).  All Fourier coefficients
    are nonnegative, hence the kernel is positive semi-definite (but not
    strictly so: frequencies above n are cut off).

    ``coefficients`` overrides the default a_0..a_n (n_freq + 1 values, all
    nonnegative); handy for degenerate cases like a constant kernel.
    """

    n_freq: int = 5
    coefficients: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.n_freq < 1:
            raise ValueError("n_freq must be >= 1")
        if self.coefficients is not None:
            if len(self.coefficients) != self.n_freq + 1:
                raise ValueError("coefficients must have n_freq + 1 entries")
            if any(c < 0 for c in self.coefficients):
                raise ValueError("coefficients must be nonnegative")

    @property
    def coeffs(self) -> np.ndarray:
        """Cosine coefficients a_0..a_n with a_0 = 1, a_k = 2/(1+k)."""
        if self.coefficients is not None:
            return np.asarray(self.coefficients, dtype=float)
        a = 2.0 / (2.0 + np.arange(self.n_freq, dtype=float))
        return np.concatenate([[1.0], a])

    @property
    def freqs(self) -> np.ndarray:
        """Symmetric frequency range -n..n used by the spectral form."""
        return np.arange(-self.n_freq, self.n_freq + 1)

    @property
    def half_coeffs(self) -> np.ndarray:
        """Coefficients b_k of k = sum_k b_k e^{i k t}, indexed by -n..n."""
        a = self.coeffs
        b = a[np.abs(self.freqs)].astype(float)
        b[self.freqs != 0] *= 0.5
        return b

    def profile(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        ks = np.arange(self.n_freq + 1)
        return np.tensordot(self.coeffs, np.cos(np.multiply.outer(ks, theta)), axes=1)

    def profile_deriv(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        ks = np.arange(self.n_freq + 1)
        return -np.tensordot(
            self.coeffs * ks, np.sin(np.multiply.outer(ks, theta)), axes=1
        )

    def matrix(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gram matrix k(x_i, y_j); relies on periodicity, no wrapping needed."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        diff = x[:, None, :] - y[None, :, :]
        return np.prod(self.profile(diff), axis=-1)

    def profile_extrema(self, n_points: int = 100_000) -> tuple[float, float]:
        """(min, max) of the per-dimension profile by dense grid search."""
        theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
        vals = self.profile(theta)
        return float(vals.min()), float(vals.max())

    def extrema(self, dim: int, n_points: int = 100_000) -> tuple[float, float]:
        """(inf k, sup k) of the d-dimensional product kernel.

        The product is multilinear in the per-dimension factors, so its
        extremes over the box [min f, max f]^d sit at the vertices; both
        vertex values are attained by actual angles, which makes the
        combination exact even when f changes sign.
        """
        lo, hi = self.profile_extrema(n_points)
        vertex = np.array([lo, hi])
        prods = vertex
        for _ in range(dim - 1):
            prods = np.multiply.outer(prods, vertex).ravel()
        return float(prods.min()), float(prods.max())

    def half_coeffs_nd(self, dim: int) -> np.ndarray:
        """Tensor of b coefficients for the d-dimensional product kernel."""
        b = self.half_coeffs
        out = b
        for _ in range(dim - 1):
            out = np.multiply.outer(out, b)
        return out


# --- short Fourier sums against the kernel --------------------------------

_EINSUM_ATOMS = {1: "p,pa->a", 2: "p,pa,pb->ab", 3: "p,pa,pb,pc->abc"}
_EINSUM_EVAL = {1: "a,pa->p", 2: "ab,pa,pb->p", 3: "abc,pa,pb,pc->p"}


def _phases(freqs: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """exp(i k x) for every point coordinate and frequency: (points, freqs)."""
    return np.exp(1j * np.multiply.outer(coords, freqs.astype(float)))


def fourier_of_atoms(kernel: CosineSeriesKernel, positions: np.ndarray,
                     weights: np.ndarray) -> np.ndarray:
    """A(kappa) = sum_p w_p e^{i kappa . x_p} on the full frequency grid."""
    positions = np.atleast_2d(positions)
    d = positions.shape[1]
    ph = [_phases(kernel.freqs, positions[:, a]) for a in range(d)]
    return np.einsum(_EINSUM_ATOMS[d], weights.astype(complex), *ph)


def trig_eval(kernel: CosineSeriesKernel, coeffs: np.ndarray,
              points: np.ndarray) -> np.ndarray:
    """Evaluate Re sum_kappa C_kappa e^{i kappa . x} at scattered points."""
    points = np.atleast_2d(points)
    d = points.shape[1]
    ph = [_phases(kernel.freqs, points[:, a]) for a in range(d)]
    return np.einsum(_EINSUM_EVAL[d], coeffs, *ph).real


def trig_grad(kernel: CosineSeriesKernel, coeffs: np.ndarray,
              points: np.ndarray) -> np.ndarray:
    """Gradient of the trigonometric polynomial at scattered points."""
    points = np.atleast_2d(points)
    d = points.shape[1]
    ph = [_phases(kernel.freqs, points[:, a]) for a in range(d)]
    ik = 1j * kernel.freqs.astype(float)
    out = np.empty_like(points)
    for axis in range(d):
        factors = [ph[a] * ik if a == axis else ph[a] for a in range(d)]
        out[:, axis] = np.einsum(_EINSUM_EVAL[d], coeffs, *factors).real
    return out


def trig_eval_axes(kernel: CosineSeriesKernel, coeffs: np.ndarray,
                   axis_coords: list[np.ndarray],
                   deriv_axis: Optional[int] = None) -> np.ndarray:
    """Evaluate the polynomial (or one partial derivative) on a product grid.

    Returns an array of shape (len(axis_coords[0]), ..., len(axis_coords[-1])).
    """
    d = len(axis_coords)
    ik = 1j * kernel.freqs.astype(float)
    ph = []
    for a in range(d):
        p = _phases(kernel.freqs, np.asarray(axis_coords[a], dtype=float))
        if a == deriv_axis:
            p = p * ik
        ph.append(p)
    if d == 1:
        return (ph[0] @ coeffs).real
    if d == 2:
        return (ph[0] @ coeffs @ ph[1].T).real
    raise NotImplementedError("product-grid evaluation supports d <= 2")


# ---------------------------------------------------------------------------
# objective contract
# ---------------------------------------------------------------------------

class ObjectiveContract:
    """Capability set shared by all objectives.

    ``fv_value`` is defined up to an additive constant; every subclass
    documents (and fixes) its constant so values are deterministic.
    ``fv_grad`` is the exact pointwise gradient of that ``fv_value``.
    """

    domain: Domain
    lipschitz_L: Optional[float] = None

    @property
    def supports_grid(self) -> bool:
        return False

    def value(self, mu) -> float:
        raise NotImplementedError

    def value_grid(self, p: GridDensity) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no grid support")

    def fv_value_many(self, mu, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fv_grad_many(self, mu, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fv_value(self, mu, x: np.ndarray) -> float:
        return float(self.fv_value_many(mu, np.atleast_2d(np.asarray(x, float)))[0])

    def fv_grad(self, mu, x: np.ndarray) -> np.ndarray:
        return self.fv_grad_many(mu, np.atleast_2d(np.asarray(x, float)))[0]

    def _check_measure(self, mu) -> None:
        if mu.domain != self.domain:
            raise ValueError(
                f"measure domain {mu.domain} does not match objective "
                f"domain {self.domain}"
            )


class LinearPotentialObjective(ObjectiveContract):
    """G(mu) = int V dmu for a fixed smooth potential V.

    The first variation is V itself, independently of mu, so particles do
    not interact: the dynamics reduces to independent single-particle
    updates.  The additive constant is fixed by using V verbatim.
    """

    def __init__(self, domain: Domain, potential: Callable, gradient: Callable,
                 name: str = "linear",
                 quadratic_lam: Optional[float] = None,
                 oscillation: Optional[float] = None,
                 lipschitz_L: Optional[float] = None):
        self.domain = domain
        self.potential = potential
        self.gradient = gradient
        self.name = name
        self.quadratic_lam = quadratic_lam
        self.oscillation = oscillation
        self.lipschitz_L = lipschitz_L

    @property
    def supports_grid(self) -> bool:
        return self.domain.is_torus

    def value(self, mu) -> float:
        self._check_measure(mu)
        pos, w = atoms_of(mu)
        return float(np.dot(w, self.potential(pos)))

    def value_grid(self, p: GridDensity) -> float:
        if not self.supports_grid:
            raise NotImplementedError("Euclidean potential has no grid support")
        return self.value(p)

    def fv_value_many(self, mu, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.potential(np.atleast_2d(points)), dtype=float)

    def fv_grad_many(self, mu, points: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient(np.atleast_2d(points)), dtype=float)


def quadratic_potential(lam: float, dim: int) -> LinearPotentialObjective:
    """V(x) = lam |x|^2 / 2 on R^d; the noisy recursion is then an OU chain."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    return LinearPotentialObjective(
        euclidean(dim),
        potential=lambda x: 0.5 * lam * np.sum(x * x, axis=-1),
        gradient=lambda x: lam * x,
        name="quadratic",
        quadratic_lam=lam,
        lipschitz_L=lam,
    )


def cosine_potential(amplitude: float, domain: Domain) -> LinearPotentialObjective:
    """V(x) = a sum_i cos(x_i) on the torus."""
    if not domain.is_torus:
        raise ValueError("cosine potential lives on the torus")
    return LinearPotentialObjective(
        domain,
        potential=lambda x: amplitude * np.sum(np.cos(x), axis=-1),
        gradient=lambda x: -amplitude * np.sin(x),
        name="cosine",
        oscillation=2.0 * abs(amplitude) * domain.dim,
        lipschitz_L=abs(amplitude),
    )


class KernelMMDObjective(ObjectiveContract):
    """Half the squared kernel discrepancy between mu and a fixed target nu.

    G(mu) = 1/2 iint k d(mu-nu) d(mu-nu)
          = 1/2 sum_kappa b_kappa |A_mu(kappa) - A_nu(kappa)|^2,

    where A are Fourier coefficients of the measures and b the kernel's
    (nonnegative) coefficients.  G >= 0 with G(nu) = 0, and G is convex.
    First variation (no additive shift):  V[mu](x) = int k(x,.) d(mu-nu).
    """

    def __init__(self, kernel: CosineSeriesKernel, target):
        if not target.domain.is_torus:
            raise ValueError("kernel objective requires a torus target")
        if abs(target.domain.period - 2.0 * np.pi) > 1e-12:
            raise ValueError("cosine-series kernel assumes period 2*pi")
        self.kernel = kernel
        self.target = target
        self.domain = target.domain
        pos, w = atoms_of(target)
        self._target_fourier = fourier_of_atoms(kernel, pos, w)
        # grad V is L-Lipschitz with L bounded through the second derivative
        # of the profile: |f''| <= sum a_k k^2, combined across dimensions.
        a = kernel.coeffs
        ks = np.arange(kernel.n_freq + 1)
        f_sup = float(np.sum(np.abs(a)))
        fpp_sup = float(np.sum(a * ks**2))
        self.lipschitz_L = 2.0 * self.domain.dim * fpp_sup * f_sup ** (self.domain.dim - 1)

    @property
    def supports_grid(self) -> bool:
        return True

    def _alpha_fourier(self, mu) -> np.ndarray:
        """Fourier coefficients of mu - nu."""
        self._check_measure(mu)
        pos, w = atoms_of(mu)
        return fourier_of_atoms(self.kernel, pos, w) - self._target_fourier

    def first_variation_coeffs(self, mu) -> np.ndarray:
        """Spectral coefficients C with V[mu](x) = Re sum C_kappa e^{i kappa x}."""
        return self.kernel.half_coeffs_nd(self.domain.dim) * np.conj(
            self._alpha_fourier(mu)
        )

    def value(self, mu) -> float:
        alpha = self._alpha_fourier(mu)
        b = self.kernel.half_coeffs_nd(self.domain.dim)
        return float(0.5 * np.sum(b * np.abs(alpha) ** 2))

    def value_grid(self, p: GridDensity) -> float:
        return self.value(p)

    def fv_value_many(self, mu, points: np.ndarray) -> np.ndarray:
        return trig_eval(self.kernel, self.first_variation_coeffs(mu), points)

    def fv_grad_many(self, mu, points: np.ndarray) -> np.ndarray:
        return trig_grad(self.kernel, self.first_variation_coeffs(mu), points)

    def discrepancy_sq(self, mu, other) -> float:
        """Squared kernel discrepancy between two measures (not halved)."""
        pos_a, w_a = atoms_of(mu)
        pos_b, w_b = atoms_of(other)
        diff = fourier_of_atoms(self.kernel, pos_a, w_a) - fourier_of_atoms(
            self.kernel, pos_b, w_b
        )
        b = self.kernel.half_coeffs_nd(self.domain.dim)
        return float(np.sum(b * np.abs(diff) ** 2))


class TwoLayerNNObjective(ObjectiveContract):
    """Regularized empirical risk of a mean-field two-layer network.

    G(mu) = (1/N) sum_j ell(y_j, yhat_j(mu)) + (lam/2) int |x|^2 dmu,
    with predictions yhat_j(mu) = int Phi(z_j, x) dmu(x) and the bounded
    smooth feature Phi(z, x) = K tanh(x . [z; 1] / K), so |Phi| <= K.

    First variation (constant fixed by this exact expression):
    V[mu](x) = (1/N) sum_j ell'(y_j, yhat_j(mu)) Phi(z_j, x) + (lam/2)|x|^2.
    """

    def __init__(self, data_z: np.ndarray, data_y: np.ndarray, loss: str = "square",
                 weight_decay: float = 0.1, feature_bound: float = 1.0):
        data_z = np.atleast_2d(np.asarray(data_z, dtype=float))
        data_y = np.asarray(data_y, dtype=float)
        if data_z.shape[0] != data_y.shape[0]:
            raise ValueError("data_z and data_y length mismatch")
        if loss not in ("square", "logistic"):
            raise ValueError(f"unknown loss {loss!r}")
        if weight_decay <= 0:
            raise ValueError("weight_decay must be > 0")
        if feature_bound <= 0:
            raise ValueError("feature_bound must be > 0")
        self.data_z = data_z
        self.data_y = data_y
        self.loss = loss
        self.weight_decay = weight_decay
        self.feature_bound = feature_bound
        self.domain = euclidean(data_z.shape[1] + 1)
        # inputs with an appended bias coordinate, shape (N, d)
        self._zt = np.hstack([data_z, np.ones((data_z.shape[0], 1))])

    @property
    def n_data(self) -> int:
        return self.data_y.shape[0]

    @property
    def label_bound(self) -> float:
        """max_j |y_j|; stands in for the almost-sure label bound."""
        return float(np.max(np.abs(self.data_y)))

    def features(self, points: np.ndarray) -> np.ndarray:
        """Phi(z_j, x_i) as an (points, N) matrix."""
        k = self.feature_bound
        return k * np.tanh(np.atleast_2d(points) @ self._zt.T / k)

    def predictions(self, mu) -> np.ndarray:
        pos, w = atoms_of(mu)
        return w @ self.features(pos)

    def _loss_vals(self, yhat: np.ndarray) -> np.ndarray:
        if self.loss == "square":
            return 0.5 * (self.data_y - yhat) ** 2
        return np.logaddexp(0.0, -self.data_y * yhat)

    def _loss_deriv(self, yhat: np.ndarray) -> np.ndarray:
        if self.loss == "square":
            return yhat - self.data_y
        return -self.data_y / (1.0 + np.exp(self.data_y * yhat))

    def value(self, mu) -> float:
        self._check_measure(mu)
        pos, w = atoms_of(mu)
        yhat = w @ self.features(pos)
        reg = 0.5 * self.weight_decay * np.dot(w, np.sum(pos * pos, axis=-1))
        return float(np.mean(self._loss_vals(yhat)) + reg)

    def fv_value_many(self, mu, points: np.ndarray) -> np.ndarray:
        self._check_measure(mu)
        points = np.atleast_2d(points)
        lp = self._loss_deriv(self.predictions(mu))
        data_term = self.features(points) @ lp / self.n_data
        return data_term + 0.5 * self.weight_decay * np.sum(points * points, axis=-1)

    def fv_grad_many(self, mu, points: np.ndarray) -> np.ndarray:
        self._check_measure(mu)
        points = np.atleast_2d(points)
        lp = self._loss_deriv(self.predictions(mu))
        u = points @ self._zt.T / self.feature_bound
        dphi = 1.0 - np.tanh(u) ** 2  # (points, N); times zt gives grad Phi
        return (dphi * lp) @ self._zt / self.n_data + self.weight_decay * points


# ---------------------------------------------------------------------------
# derived quantities
# ---------------------------------------------------------------------------

def finite_diff_particle_grad(obj: ObjectiveContract, mu: ParticleEnsemble,
                              i: int, h: float = 1e-5) -> np.ndarray:
    """Central finite difference of m * G_m with respect to particle i.

    Independent check of the identity  m grad_{X_i} G_m = grad V[mu](X_i)
    linking the two update rules; deliberately routed through ``value``
    only, never through ``fv_grad``.
    """
    if not 0 < h <= 1e-4:
        raise ValueError("h must lie in (0, 1e-4]")
    if not 0 <= i < mu.m:
        raise ValueError(f"particle index {i} out of range")
    out = np.empty(mu.dim)
    base = np.array(mu.positions)
    for c in range(mu.dim):
        for sign in (1.0, -1.0):
            pos = base.copy()
            pos[i, c] += sign * h
            val = obj.value(mu.with_positions(pos))
            if sign > 0:
                plus = val
            else:
                minus = val
        out[c] = mu.m * (plus - minus) / (2.0 * h)
    return out


def gibbs_log_density_unnorm(obj: ObjectiveContract, mu, tau: float,
                             x: np.ndarray) -> np.ndarray:
    """log of the unnormalized Gibbs density e^{-V[mu]/tau} at x.

    The normalizing constant is a grid computation; see the grid oracle.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    vals = -obj.fv_value_many(mu, pts) / tau
    return float(vals[0]) if np.asarray(x).ndim <= 1 else vals


def lsi_lower_bound(obj: ObjectiveContract, tau: float) -> Optional[float]:
    """Closed-form lower bound on the uniform log-Sobolev constant rho_tau.

    Returns None when no bound is available for the objective family
    (a distinct signal, not an error).  Bounds used:

    * quadratic potential lam|x|^2/2:  lam / tau            (curvature)
    * bounded perturbations of a base measure with known constant:
      rho_base * exp(inf psi - sup psi)                     (perturbation)
      -- torus kernel objective: base is the uniform measure on the
         2*pi torus with constant 1/((1+2pi) d) and the perturbation
         oscillation is bounded by sup k - inf k;
      -- two-layer network: base is the weight-decay Gaussian with
         constant lam/tau and oscillation 2K (logistic) or
         2K(K + K') with K' = max |y| (square loss).
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    if isinstance(obj, KernelMMDObjective):
        inf_k, sup_k = obj.kernel.extrema(obj.domain.dim)
        base = 1.0 / (TORUS_LSI_BASE * obj.domain.dim)
        return base * float(np.exp((inf_k - sup_k) / tau))
    if isinstance(obj, TwoLayerNNObjective):
        k = obj.feature_bound
        osc = 2.0 * k if obj.loss == "logistic" else 2.0 * k * (k + obj.label_bound)
        return (obj.weight_decay / tau) * float(np.exp(-osc / tau))
    if isinstance(obj, LinearPotentialObjective):
        if obj.quadratic_lam is not None:
            return obj.quadratic_lam / tau
        if obj.oscillation is not None and obj.domain.is_torus:
            base = 1.0 / (TORUS_LSI_BASE * obj.domain.dim)
            return base * float(np.exp(-obj.oscillation / tau))
    return None
