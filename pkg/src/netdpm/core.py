"""Domain types and mixture-density algebra.

Everything here is pure: given the same inputs the same values come out,
and no function mutates its arguments.  Densities are evaluated in log
space wherever underflow is a realistic concern (statistics on the
normal-quantile scale can sit 10+ standard deviations from a component
mean).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, log_ndtr, logsumexp, ndtr, ndtri

from .errors import DomainError, InvalidStateError, NumericalError

DEFAULT_QUADRATURE_NODES = 40

_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StatisticsVector:
    """Per-feature statistics on the normal-quantile scale.

    Attributes
    ----------
    values : ndarray, shape (n,)
        One finite statistic per feature.
    feature_ids : tuple of str
        Unique identifier per feature, aligned with ``values``.
    """

    values: np.ndarray
    feature_ids: tuple[str, ...]

    def __init__(self, values, feature_ids=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise DomainError("statistics must be a nonempty 1-d array")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DomainError(f"non-finite statistic at index {bad}")
        if feature_ids is None:
            width = len(str(values.size))
            feature_ids = tuple(f"f{i + 1:0{width}d}" for i in range(values.size))
        else:
            feature_ids = tuple(str(f) for f in feature_ids)
        if len(feature_ids) != values.size:
            raise DomainError("feature_ids length does not match values")
        if len(set(feature_ids)) != len(feature_ids):
            raise DomainError("feature_ids must be unique")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_ids", feature_ids)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class MixtureComponent:
    """One Gaussian component: mean, variance and a weight in [0, 1]."""

    mean: float
    variance: float
    weight: float

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.variance)
                and np.isfinite(self.weight)):
            raise DomainError("component parameters must be finite")
        if self.variance <= 0.0:
            raise DomainError(f"component variance must be positive, got {self.variance}")
        if not 0.0 <= self.weight <= 1.0:
            raise DomainError(f"component weight must lie in [0, 1], got {self.weight}")


@dataclass(frozen=True)
class BasePrior:
    """Normal × inverse-gamma base measure, one parameter set per class.

    Class 0 holds the unselected (null) features, class 1 the selected
    ones.  ``gamma``/``xi2`` parameterize the normal prior on a component
    mean, ``alpha``/``beta`` the inverse-gamma prior on its variance, and
    ``tau`` is the per-class concentration controlling how readily new
    components are opened.
    """

    gamma: tuple[float, float]
    xi2: tuple[float, float]
    alpha: tuple[float, float]
    beta: tuple[float, float]
    tau: tuple[float, float]

    def __post_init__(self):
        for name in ("gamma", "xi2", "alpha", "beta", "tau"):
            vals = getattr(self, name)
            if len(vals) != 2 or not all(np.isfinite(v) for v in vals):
                raise DomainError(f"{name} must hold one finite value per class")
            object.__setattr__(self, name, (float(vals[0]), float(vals[1])))
        for name in ("xi2", "alpha", "beta", "tau"):
            if min(getattr(self, name)) <= 0.0:
                raise DomainError(f"{name} entries must be strictly positive")

    @classmethod
    def from_class_moments(cls, r, labels, *, beta=10.0, tau=(10.0, 2.0)):
        """Build the default prior from a preliminary two-class split.

        Per class the normal prior is centered at the class mean with the
        class variance, the inverse-gamma shape is ``var/xi2 + 1`` (hence 2
        under this construction) and the scale defaults to 10.  A class
        with fewer than two members falls back to the pooled moments.
        """
        r = np.asarray(r, dtype=np.float64)
        labels = np.asarray(labels)
        pooled_mean = float(np.mean(r))
        pooled_var = max(float(np.var(r)), 1e-8)
        gamma, xi2, alpha = [], [], []
        for k in (0, 1):
            rk = r[labels == k]
            if rk.size >= 2 and np.var(rk) > 0:
                mk, vk = float(np.mean(rk)), max(float(np.var(rk)), 1e-8)
            else:
                mk, vk = pooled_mean, pooled_var
            gamma.append(mk)
            xi2.append(vk)
            alpha.append(vk / vk + 1.0)
        return cls(gamma=tuple(gamma), xi2=tuple(xi2), alpha=tuple(alpha),
                   beta=(float(beta), float(beta)), tau=(float(tau[0]), float(tau[1])))

    @classmethod
    def pooled(cls, r, *, beta=10.0, tau=1.0):
        """Single-class prior from pooled data moments, duplicated per slot."""
        r = np.asarray(r, dtype=np.float64)
        m = float(np.mean(r))
        v = max(float(np.var(r)), 1e-8)
        a = v / v + 1.0
        return cls(gamma=(m, m), xi2=(v, v), alpha=(a, a),
                   beta=(float(beta), float(beta)), tau=(float(tau), float(tau)))


@dataclass(frozen=True)
class IsingPriorConfig:
    """Sparsity and smoothness parameters of the network label prior.

    ``pi0`` is the prior mass on "unselected" (so the selected mass is
    ``1 - pi0``); ``rho`` holds the per-class smoothness coefficients.
    ``omega`` optionally overrides the per-node weights carried by the
    network (both default to all ones).
    """

    pi0: float
    rho: tuple[float, float]
    omega: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 < self.pi0 < 1.0:
            raise DomainError(f"pi0 must lie strictly inside (0, 1), got {self.pi0}")
        if len(self.rho) != 2 or min(self.rho) < 0.0:
            raise DomainError("rho must hold two nonnegative values")
        object.__setattr__(self, "rho", (float(self.rho[0]), float(self.rho[1])))
        if self.omega is not None:
            om = np.asarray(self.omega, dtype=np.float64)
            if om.ndim != 1 or np.any(om <= 0.0) or not np.all(np.isfinite(om)):
                raise DomainError("omega overrides must be finite and strictly positive")
            object.__setattr__(self, "omega", om)

    @property
    def pi1(self) -> float:
        return 1.0 - self.pi0


@dataclass(frozen=True)
class MixtureState:
    """Ordered two-class mixture with per-feature assignments.

    Components are stored in a single mean-ordered list; the first
    ``n_class0`` belong to the unselected class.  ``assignments`` holds
    each feature's position in that list and ``labels`` the implied class
    bit.  Component weights are within-class (each class sums to one).
    """

    components: tuple[MixtureComponent, ...]
    n_class0: int
    assignments: np.ndarray
    labels: np.ndarray

    def __init__(self, components, n_class0, assignments, labels):
        components = tuple(components)
        assignments = np.asarray(assignments, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.uint8)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "n_class0", int(n_class0))
        object.__setattr__(self, "assignments", assignments)
        object.__setattr__(self, "labels", labels)
        self.validate()

    def validate(self):
        k = len(self.components)
        if not 0 <= self.n_class0 <= k:
            raise InvalidStateError("class split outside component range")
        means = np.array([c.mean for c in self.components])
        if k > 1 and not np.all(np.diff(means) > 0):
            raise InvalidStateError("component means must be strictly increasing")
        if self.assignments.size != self.labels.size:
            raise InvalidStateError("assignments and labels differ in length")
        if self.assignments.size:
            if self.assignments.min() < 0 or self.assignments.max() >= k:
                raise InvalidStateError("assignment index out of range")
            implied = (self.assignments >= self.n_class0).astype(np.uint8)
            if not np.array_equal(implied, self.labels):
                raise InvalidStateError("labels inconsistent with assignment classes")

    @property
    def component_indices(self) -> np.ndarray:
        """Signed component indices: class 0 ends at 0, class 1 starts at 1."""
        return np.arange(len(self.components)) - self.n_class0 + 1

    def occupancy(self) -> np.ndarray:
        """Members per component, recomputed from assignments."""
        return np.bincount(self.assignments, minlength=len(self.components))

    def class_sizes(self) -> tuple[int, int]:
        m1 = int(self.labels.sum())
        return self.labels.size - m1, m1

    def class_components(self, k: int) -> tuple[MixtureComponent, ...]:
        if k == 0:
            return self.components[: self.n_class0]
        return self.components[self.n_class0:]


@dataclass(frozen=True)
class SelectionReport:
    """Per-feature selection probabilities with hard labels.

    ``subnetworks``/``isolated_selected`` are filled once a network is
    available (see :func:`netdpm.network.extract_subnetworks`).
    """

    feature_ids: tuple[str, ...]
    probabilities: np.ndarray
    selected: np.ndarray
    subnetworks: Optional[tuple] = None
    isolated_selected: Optional[tuple[int, ...]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=np.float64)
        sel = np.asarray(self.selected, dtype=bool)
        if probs.shape != (len(self.feature_ids),) or sel.shape != probs.shape:
            raise InvalidStateError("report arrays must align with feature_ids")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise InvalidStateError("selection probabilities must lie in [0, 1]")
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "selected", sel)
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))

    def selected_ids(self) -> tuple[str, ...]:
        return tuple(f for f, s in zip(self.feature_ids, self.selected) if s)


def hard_labels(probabilities, rule="mode", threshold=0.5) -> np.ndarray:
    """Hard selection from probabilities.

    ``mode`` selects strictly above one half; ``threshold`` selects
    strictly above the supplied cut.  A feature sitting exactly on the cut
    stays unselected.
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    if rule == "mode":
        cut = 0.5
    elif rule == "threshold":
        cut = float(threshold)
    else:
        raise DomainError(f"unknown labeling rule {rule!r}")
    return probs > cut


# ---------------------------------------------------------------------------
# p-value transform
# ---------------------------------------------------------------------------

def transform_pvalues(p, feature_ids=None) -> StatisticsVector:
    """Map p-values to normal-quantile statistics ``r = -ndtri(p)``.

    Small p-values become large positive statistics, so p-values must lie
    strictly inside (0, 1); values at the boundary carry tail information
    this transform cannot represent and are rejected rather than clamped.
    """
    p = np.asarray(p, dtype=np.float64)
    bad = ~((p > 0.0) & (p < 1.0))
    if np.any(bad):
        idx = int(np.flatnonzero(bad)[0])
        raise DomainError(
            f"p-value at index {idx} is {p.flat[idx]!r}; "
            "must lie strictly inside (0, 1)"
        )
    return StatisticsVector(-ndtri(p), feature_ids)


# ---------------------------------------------------------------------------
# Mixture densities
# ---------------------------------------------------------------------------

def _component_arrays(comps: Sequence[MixtureComponent]):
    means = np.array([c.mean for c in comps], dtype=np.float64)
    variances = np.array([c.variance for c in comps], dtype=np.float64)
    weights = np.array([c.weight for c in comps], dtype=np.float64)
    return means, variances, weights


def log_normal_mixture(r, means, variances, weights):
    """Log density of a finite normal mixture at ``r`` (scalar or array).

    Weights need not be normalized; the value is log(sum_g w_g N(r; m_g, v_g)).
    """
    r = np.asarray(r, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    variances = np.asarray(variances, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    x = np.atleast_1d(r)[:, None]
    log_terms = (
        -0.5 * (_LOG_2PI + np.log(variances)[None, :])
        - 0.5 * (x - means[None, :]) ** 2 / variances[None, :]
    )
    with np.errstate(divide="ignore"):
        log_w = np.where(weights > 0, np.log(np.maximum(weights, 1e-300)), -np.inf)
    out = logsumexp(log_terms + log_w[None, :], axis=1)
    return out if np.ndim(r) else float(out[0])


def class_density(r, comps: Sequence[MixtureComponent]):
    """Density of one class mixture: sum_g q_g N(r; mean_g, var_g).

    Component weights must already be normalized within the class.
    """
    if len(comps) == 0:
        raise InvalidStateError("class density requires at least one component")
    means, variances, weights = _component_arrays(comps)
    if abs(weights.sum() - 1.0) > 1e-12:
        raise DomainError(f"class weights sum to {weights.sum()!r}, expected 1")
    return np.exp(log_normal_mixture(r, means, variances, weights))


def marginal_density(r, state: MixtureState, p0: float):
    """Two-group marginal ``p0 f0(r) + (1 - p0) f1(r)`` from a mixture state."""
    if not 0.0 <= p0 <= 1.0:
        raise DomainError(f"p0 must lie in [0, 1], got {p0}")
    out = 0.0
    for k, pk in ((0, p0), (1, 1.0 - p0)):
        if pk == 0.0:
            continue
        comps = state.class_components(k)
        out = out + pk * class_density(r, comps)
    return out


# ---------------------------------------------------------------------------
# Conjugate component updates
# ---------------------------------------------------------------------------

def conjugate_mean_update(comp_data, variance, prior: BasePrior, k: int):
    """Normal full-conditional parameters for a component mean.

    Returns ``(posterior_mean, posterior_variance)`` given the component's
    current variance and the statistics currently assigned to it; with no
    data it reduces to the class prior.
    """
    if variance <= 0.0:
        raise DomainError("component variance must be positive")
    data = np.asarray(comp_data, dtype=np.float64)
    gamma, xi2 = prior.gamma[k], prior.xi2[k]
    denom = variance + xi2 * data.size
    post_mean = (variance * gamma + xi2 * data.sum()) / denom
    post_var = variance * xi2 / denom
    return float(post_mean), float(post_var)


def conjugate_variance_update(comp_data, mean, prior: BasePrior, k: int):
    """Inverse-gamma full-conditional ``(shape, scale)`` for a component variance."""
    data = np.asarray(comp_data, dtype=np.float64)
    shape = prior.alpha[k] + 0.5 * data.size
    scale = prior.beta[k] + 0.5 * float(np.sum((data - mean) ** 2))
    return float(shape), float(scale)


# ---------------------------------------------------------------------------
# New-component marginal (prior predictive of a single statistic)
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gauss_hermite(nodes: int):
    x, w = np.polynomial.hermite.hermgauss(nodes)
    return x, np.log(w)


def log_new_component_marginal(r, gamma, xi2, alpha, beta,
                               nodes=DEFAULT_QUADRATURE_NODES):
    """Log prior-predictive density of a statistic under a fresh component.

    Integrates the normal likelihood over the normal × inverse-gamma base
    measure.  The variance integrates away in closed form; the mean
    integral is evaluated by Gauss-Hermite quadrature after centering and
    scaling by the mean prior, which places the nodes where the prior
    mass sits.  Vectorized over ``r``.
    """
    if nodes < 10:
        raise DomainError(f"quadrature needs at least 10 nodes, got {nodes}")
    r = np.asarray(r, dtype=np.float64)
    xi = np.sqrt(xi2)
    x, log_w = _gauss_hermite(int(nodes))
    mu = gamma + np.sqrt(2.0) * xi * x
    dev = np.atleast_1d(r)[:, None] - mu[None, :]
    log_kernel = -(alpha + 0.5) * np.log(beta + 0.5 * dev * dev)
    log_integral = logsumexp(log_w[None, :] + log_kernel, axis=1)
    log_const = (
        gammaln(alpha + 0.5) - gammaln(alpha) + alpha * np.log(beta)
        + 0.5 * np.log(2.0) - _LOG_2PI
    )
    out = log_const + log_integral
    if not np.all(np.isfinite(out)):
        bad = int(np.flatnonzero(~np.isfinite(out))[0])
        raise NumericalError(
            "new-component marginal is non-finite at "
            f"r={np.atleast_1d(r)[bad]!r} with gamma={gamma}, xi2={xi2}, "
            f"alpha={alpha}, beta={beta}, nodes={nodes}"
        )
    return out if np.ndim(r) else float(out[0])


def new_component_marginal(r, prior: BasePrior, k: int,
                           nodes=DEFAULT_QUADRATURE_NODES):
    """Prior-predictive density of ``r`` for a new class-``k`` component."""
    return np.exp(log_new_component_marginal(
        r, prior.gamma[k], prior.xi2[k], prior.alpha[k], prior.beta[k], nodes))


# ---------------------------------------------------------------------------
# Truncated-normal sampling (order-restricted mean updates)
# ---------------------------------------------------------------------------

def truncated_normal(rng, mean, sd, lower=-np.inf, upper=np.inf):
    """One draw from N(mean, sd^2) restricted to the open interval.

    Uses inverse-CDF sampling through whichever tail keeps the CDF values
    well separated, so intervals far from the mean stay usable.
    """
    if not lower < upper:
        raise DomainError(f"empty truncation interval ({lower}, {upper})")
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    u = rng.random()
    if a > 0.0:
        # right tail: work with upper-tail probabilities
        pa, pb = ndtr(-a), ndtr(-b)
        p = pb + u * (pa - pb)
        x = mean - sd * ndtri(p) if p > 0.0 else lower
    elif b < 0.0:
        pa, pb = ndtr(a), ndtr(b)
        p = pa + u * (pb - pa)
        x = mean + sd * ndtri(p) if p > 0.0 else upper
    else:
        pa, pb = ndtr(a), ndtr(b)
        x = mean + sd * ndtri(pa + u * (pb - pa))
    # keep strictly inside the interval even when the draw lands on a bound
    if x <= lower:
        x = np.nextafter(lower, upper)
    if x >= upper:
        x = np.nextafter(upper, lower)
    return float(x)
