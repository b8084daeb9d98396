"""Gibbs samplers over network-coupled mixtures.

Three engines share the conjugate machinery from :mod:`netdpm.core`:

* ``net_dpm1_run`` - the infinite-mixture sampler: features move between
  occupied components of either class or open fresh components, with
  open-component mass given by the prior-predictive integral.
* ``net_dpm2_run`` - the finite-mixture sampler with per-class component
  counts fixed up front.
* ``std_dpm_run`` - a plain mixture-of-normals fit with no network and no
  classes, used for initialization and to guide the fast approximation.

A chain is strictly sequential; every run is reproducible bit-for-bit
from its integer seed.  Component means obey a strict global ordering
(all unselected-class means below all selected-class means): mean updates
are drawn truncated to the interval between neighboring means, and new
components are inserted at their mean-sorted position subject to the
class boundary.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (
    BasePrior,
    IsingPriorConfig,
    MixtureComponent,
    MixtureState,
    SelectionReport,
    StatisticsVector,
    hard_labels,
    log_new_component_marginal,
    truncated_normal,
)
from .errors import ConfigError, DomainError, InvalidStateError, NumericalError
from .hodc import OrderedDensitySet
from .network import FeatureNetwork

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, retention and seeding knobs."""

    iterations: int = 10000
    burn_in: int = 2000
    thin: int = 1
    seed: int = 0
    quadrature_nodes: int = 40

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ConfigError("thin must be at least 1")
        if self.quadrature_nodes < 10:
            raise ConfigError("quadrature_nodes must be at least 10")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in + self.thin - 1) // self.thin


@dataclass
class PosteriorDraws:
    """Retained draws of a network-coupled chain."""

    feature_ids: tuple[str, ...]
    tallies: np.ndarray
    snapshots: int
    states: list[MixtureState]
    config: SamplerConfig
    log_pseudo_likelihood: Optional[float] = None

    def inclusion_probabilities(self) -> np.ndarray:
        if self.snapshots < 1:
            raise InvalidStateError("no retained draws")
        return self.tallies / float(self.snapshots)


def posterior_summary(draws: PosteriorDraws, rule: str = "mode",
                      threshold: float = 0.5) -> SelectionReport:
    """Per-feature inclusion probabilities and hard labels from a chain."""
    probs = draws.inclusion_probabilities()
    return SelectionReport(
        feature_ids=draws.feature_ids,
        probabilities=probs,
        selected=hard_labels(probs, rule=rule, threshold=threshold),
        metadata={
            "rule": rule,
            "threshold": 0.5 if rule == "mode" else float(threshold),
            "snapshots": draws.snapshots,
            "iterations": draws.config.iterations,
            "burn_in": draws.config.burn_in,
            "seed": draws.config.seed,
        },
    )


# ---------------------------------------------------------------------------
# Shared chain internals
# ---------------------------------------------------------------------------

def _as_values(r) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(r, StatisticsVector):
        return r.values, r.feature_ids
    r = np.asarray(r, dtype=np.float64)
    return r, StatisticsVector(r).feature_ids


def _neighbor_pair_weights(net: FeatureNetwork, omega: np.ndarray):
    """Per-node arrays of (omega_i + omega_j) / 2 aligned with neighbor slices."""
    out = []
    for i in range(net.n):
        nbrs = net.neighbors(i)
        out.append(0.5 * (omega[i] + omega[nbrs]))
    return out


def _initial_labels(r: np.ndarray, fixed: np.ndarray) -> np.ndarray:
    z = (r > np.quantile(r, 0.8)).astype(np.uint8)
    z[fixed] = 1
    return z


def _fixed_mask(n: int, fixed) -> np.ndarray:
    mask = np.zeros(n, dtype=bool)
    if fixed is not None:
        idx = np.asarray(fixed, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DomainError("fixed feature index out of range")
        mask[idx] = True
    return mask


def _initial_components(r, z, counts_per_class, prior):
    """Strictly ordered starting components and nearest-mean assignments."""
    means, variances = [], []
    for k in (0, 1):
        lk = counts_per_class[k]
        rk = r[z == k]
        if rk.size:
            center = float(np.mean(rk))
            spread = float(np.var(rk))
        else:
            center = prior.gamma[k]
            spread = prior.xi2[k]
        spread = max(spread, 1e-2)
        if lk == 1:
            mk = [center]
        else:
            qs = np.linspace(0.15, 0.85, lk)
            if rk.size >= 2:
                mk = list(np.quantile(rk, qs))
            else:
                mk = list(center + (qs - 0.5) * 2.0 * math.sqrt(spread))
        means.extend(mk)
        variances.extend([spread] * lk)
    for t in range(1, len(means)):
        if means[t] <= means[t - 1]:
            means[t] = means[t - 1] + 1e-3 * (1.0 + abs(means[t - 1]))
    n0 = counts_per_class[0]
    pos = np.empty(r.size, dtype=np.int64)
    for i in range(r.size):
        if z[i] == 0:
            cand = range(0, n0)
        else:
            cand = range(n0, len(means))
        pos[i] = min(cand, key=lambda t: abs(r[i] - means[t]))
    return means, variances, pos


class _NetChain:
    """Mutable state shared by the two network-coupled samplers."""

    def __init__(self, r, net, prior, ising, cfg, fixed, infinite,
                 class_counts=None):
        self.values, self.feature_ids = _as_values(r)
        n = self.values.size
        if net.n != n:
            raise DomainError("network size does not match the statistics")
        self.net = net
        self.prior = prior
        self.ising = ising
        self.cfg = cfg
        self.infinite = infinite
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))

        omega = ising.omega if ising.omega is not None else net.omega
        if omega.shape != (n,):
            raise DomainError("omega length does not match the data")
        net_eff = net if ising.omega is None else net.with_omega(omega)
        self.omega = omega
        self.pair_w = _neighbor_pair_weights(net_eff, omega)
        self.total_w = np.array([w.sum() for w in self.pair_w])
        self.eta = np.stack([net_eff.omega_tilde * math.log(ising.pi0),
                             net_eff.omega_tilde * math.log(ising.pi1)], axis=1)

        self.fixed = _fixed_mask(n, fixed)
        self.z = _initial_labels(self.values, self.fixed)
        if class_counts is None:
            class_counts = (1 if np.any(self.z == 0) else 0,
                            1 if np.any(self.z == 1) else 0)
        self.means, self.variances, self.pos = _initial_components(
            self.values, self.z, class_counts, prior)
        self.n0 = class_counts[0]
        self.counts = list(np.bincount(self.pos, minlength=len(self.means)))
        self.m1 = int(self.z.sum())
        self.s1 = np.zeros(n)
        for i in range(n):
            nbrs = net.neighbors(i)
            self.s1[i] = np.sum(self.pair_w[i] * (self.z[nbrs] == 1))

        # the prior-predictive factor depends only on (r_i, class): cache it
        self.log_marg = np.stack(
            [log_new_component_marginal(self.values, prior.gamma[k], prior.xi2[k],
                                        prior.alpha[k], prior.beta[k],
                                        cfg.quadrature_nodes)
             for k in (0, 1)], axis=1)

    # -- bookkeeping ------------------------------------------------------

    def _set_label(self, i, k_new):
        k_old = int(self.z[i])
        if k_old == k_new:
            return
        delta = 1.0 if k_new == 1 else -1.0
        nbrs = self.net.neighbors(i)
        for j, w in zip(nbrs, self.pair_w[i]):
            self.s1[j] += delta * w
        self.m1 += 1 if k_new == 1 else -1
        self.z[i] = k_new

    def _delete_component(self, t):
        del self.means[t]
        del self.variances[t]
        del self.counts[t]
        self.pos[self.pos > t] -= 1
        if t < self.n0:
            self.n0 -= 1

    def _insert_component(self, k, mean, variance):
        lo = 0 if k == 0 else self.n0
        hi = self.n0 if k == 0 else len(self.means)
        s = lo + bisect_right(self.means[lo:hi], mean)
        self.means.insert(s, mean)
        self.variances.insert(s, variance)
        self.counts.insert(s, 0)
        self.pos[self.pos >= s] += 1
        if k == 0:
            self.n0 += 1
        return s

    def _class_bounds(self, k):
        """Open interval the mean of a new class-k component must land in."""
        if k == 0:
            hi = self.means[self.n0] if self.n0 < len(self.means) else math.inf
            return -math.inf, hi
        lo = self.means[self.n0 - 1] if self.n0 > 0 else -math.inf
        return lo, math.inf

    def _birth(self, i, k):
        """Component parameters from the base posterior given one statistic."""
        ri = self.values[i]
        alpha, beta = self.prior.alpha[k], self.prior.beta[k]
        gamma, xi2 = self.prior.gamma[k], self.prior.xi2[k]
        variance = beta / self.rng.standard_gamma(alpha + 0.5)
        denom = variance + xi2
        pm = (variance * gamma + xi2 * ri) / denom
        sd = math.sqrt(variance * xi2 / denom)
        lo, hi = self._class_bounds(k)
        mean = None
        for _ in range(20):
            cand = pm + sd * self.rng.standard_normal()
            if lo < cand < hi:
                mean = cand
                break
        if mean is None:
            mean = truncated_normal(self.rng, pm, sd, lo, hi)
        return mean, variance

    # -- sweep ------------------------------------------------------------

    def _site_update(self, i, sweep):
        # detach feature i
        t_old = int(self.pos[i])
        self.counts[t_old] -= 1
        if self.infinite and self.counts[t_old] == 0:
            self._delete_component(t_old)
        k_cur = int(self.z[i])
        m1_exc = self.m1 - k_cur
        m0_exc = (self.values.size - 1) - m1_exc

        means = np.asarray(self.means)
        variances = np.asarray(self.variances)
        counts = np.asarray(self.counts, dtype=np.float64)
        kvec = (np.arange(means.size) >= self.n0).astype(np.int64)

        tau = self.prior.tau
        log_denom = (math.log(tau[0] + m0_exc), math.log(tau[1] + m1_exc))
        s1 = self.s1[i]
        s0 = self.total_w[i] - s1
        prior_term = (self.eta[i, 0] + self.ising.rho[0] * s0,
                      self.eta[i, 1] + self.ising.rho[1] * s1)

        loglik = -0.5 * (_LOG_2PI + np.log(variances)
                         + (self.values[i] - means) ** 2 / variances)
        if self.infinite:
            with np.errstate(divide="ignore"):
                occ = np.log(counts)
        else:
            l0 = max(self.n0, 1)
            l1 = max(means.size - self.n0, 1)
            occ = np.log(counts + np.where(kvec == 0, tau[0] / l0, tau[1] / l1))
        logw = occ + loglik
        logw += np.where(kvec == 0,
                         prior_term[0] - log_denom[0],
                         prior_term[1] - log_denom[1])

        if self.fixed[i]:
            logw = np.where(kvec == 1, logw, -np.inf)
        if self.infinite:
            extra = []
            for k in (0, 1):
                if self.fixed[i] and k == 0:
                    extra.append(-np.inf)
                else:
                    extra.append(math.log(tau[k]) - log_denom[k]
                                 + prior_term[k] + self.log_marg[i, k])
            logw = np.concatenate([logw, extra])

        top = np.max(logw)
        if not np.isfinite(top):
            raise NumericalError(
                f"all candidate weights vanished at iteration {sweep}, feature {i}")
        w = np.exp(logw - top)
        total = w.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise NumericalError(
                f"degenerate candidate weights at iteration {sweep}, feature {i}")
        u = self.rng.random() * total
        choice = int(np.searchsorted(np.cumsum(w), u, side="right"))
        choice = min(choice, logw.size - 1)

        if self.infinite and choice >= means.size:
            k_new = choice - means.size
            mean, variance = self._birth(i, k_new)
            t_new = self._insert_component(k_new, mean, variance)
        else:
            t_new = choice
            k_new = int(kvec[t_new])
        self.counts[t_new] += 1
        self.pos[i] = t_new
        self._set_label(i, k_new)

    def _refresh_components(self):
        k_count = len(self.means)
        sums = np.bincount(self.pos, weights=self.values, minlength=k_count)
        sqs = np.bincount(self.pos, weights=self.values ** 2, minlength=k_count)
        counts = np.bincount(self.pos, minlength=k_count)
        for t in range(k_count):
            k = 1 if t >= self.n0 else 0
            gamma, xi2 = self.prior.gamma[k], self.prior.xi2[k]
            alpha, beta = self.prior.alpha[k], self.prior.beta[k]
            v = self.variances[t]
            n_t = counts[t]
            denom = v + xi2 * n_t
            pm = (v * gamma + xi2 * sums[t]) / denom
            sd = math.sqrt(v * xi2 / denom)
            lo = self.means[t - 1] if t > 0 else -math.inf
            hi = self.means[t + 1] if t < k_count - 1 else math.inf
            self.means[t] = truncated_normal(self.rng, pm, sd, lo, hi)
            ssq = sqs[t] - 2.0 * self.means[t] * sums[t] + n_t * self.means[t] ** 2
            shape = alpha + 0.5 * n_t
            scale = beta + 0.5 * max(ssq, 0.0)
            self.variances[t] = scale / self.rng.standard_gamma(shape)

    def _check_consistency(self):
        counts = np.bincount(self.pos, minlength=len(self.means))
        if list(counts) != self.counts:
            raise InvalidStateError("component occupancy drifted from assignments")
        if int(self.z.sum()) != self.m1:
            raise InvalidStateError("class size drifted from labels")
        if not np.array_equal(self.z, (self.pos >= self.n0).astype(np.uint8)):
            raise InvalidStateError("labels inconsistent with component classes")
        if len(self.means) > 1 and not np.all(np.diff(self.means) > 0):
            raise InvalidStateError("component means lost their ordering")

    def _snapshot(self) -> MixtureState:
        m1 = self.m1
        m0 = self.values.size - m1
        comps = []
        for t, (mean, var, cnt) in enumerate(zip(self.means, self.variances, self.counts)):
            mk = m0 if t < self.n0 else m1
            weight = cnt / mk if mk > 0 else 0.0
            comps.append(MixtureComponent(mean=mean, variance=var, weight=weight))
        return MixtureState(components=comps, n_class0=self.n0,
                            assignments=self.pos.copy(), labels=self.z.copy())

    def _label_pseudo_likelihood(self):
        """Sum_i log p(z_i | rest) with the class mixture marginalized over g."""
        total = 0.0
        means = np.asarray(self.means)
        variances = np.asarray(self.variances)
        counts = np.asarray(self.counts, dtype=np.float64)
        kvec = np.arange(means.size) >= self.n0
        for i in range(self.values.size):
            if self.fixed[i]:
                continue
            loglik = -0.5 * (_LOG_2PI + np.log(variances)
                             + (self.values[i] - means) ** 2 / variances)
            s1 = self.s1[i]
            s0 = self.total_w[i] - s1
            side = []
            for k in (0, 1):
                sel = kvec if k == 1 else ~kvec
                if not np.any(sel):
                    side.append(-np.inf)
                    continue
                with np.errstate(divide="ignore"):
                    lk = np.log(counts[sel] + 1e-300) + loglik[sel]
                prior_term = self.eta[i, k] + self.ising.rho[k] * (s1 if k else s0)
                side.append(prior_term + _logsumexp(lk))
            hi = max(side)
            lse = hi + math.log(math.exp(side[0] - hi) + math.exp(side[1] - hi))
            total += side[int(self.z[i])] - lse
        return total

    def run(self, keep_states=True, track_pseudo=False) -> PosteriorDraws:
        n = self.values.size
        tallies = np.zeros(n, dtype=np.int64)
        states: list[MixtureState] = []
        snapshots = 0
        pseudo = 0.0
        cfg = self.cfg
        for sweep in range(cfg.iterations):
            for i in self.rng.permutation(n):
                self._site_update(int(i), sweep)
            self._refresh_components()
            if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0:
                self._check_consistency()
                snapshots += 1
                tallies += self.z
                if keep_states:
                    states.append(self._snapshot())
                if track_pseudo:
                    pseudo += self._label_pseudo_likelihood()
        return PosteriorDraws(
            feature_ids=self.feature_ids,
            tallies=tallies,
            snapshots=snapshots,
            states=states,
            config=cfg,
            log_pseudo_likelihood=(pseudo / snapshots if track_pseudo else None),
        )


def _logsumexp(arr):
    hi = np.max(arr)
    if not np.isfinite(hi):
        return -np.inf
    return float(hi + np.log(np.sum(np.exp(arr - hi))))


# ---------------------------------------------------------------------------
# Public sampler entry points
# ---------------------------------------------------------------------------

def net_dpm1_run(r, net: FeatureNetwork, prior: BasePrior,
                 ising: IsingPriorConfig, cfg: SamplerConfig,
                 fixed=None, *, keep_states=True,
                 track_pseudo=False) -> PosteriorDraws:
    """Infinite-mixture sampler: joint (component, class) moves per feature.

    Every sweep resamples each non-pinned feature over all occupied
    components of both classes plus a fresh component per class, then
    refreshes component parameters under the global mean ordering.
    Emptied components are dropped immediately so occupancy counts stay
    exact.  ``fixed`` lists features pinned to the selected class.
    """
    chain = _NetChain(r, net, prior, ising, cfg, fixed, infinite=True)
    return chain.run(keep_states=keep_states, track_pseudo=track_pseudo)


def net_dpm2_run(r, net: FeatureNetwork, prior: BasePrior,
                 ising: IsingPriorConfig, l0: int, l1: int,
                 cfg: SamplerConfig, fixed=None, *, keep_states=True,
                 track_pseudo=False) -> PosteriorDraws:
    """Finite-mixture sampler with ``l0`` + ``l1`` components held fixed.

    Empty components stay in the state (their occupancy prior mass is
    ``tau_k / L_k``) and keep drawing parameters from the base measure, so
    the component count never changes.
    """
    if l0 < 1 or l1 < 1:
        raise ConfigError("each class needs at least one component")
    chain = _NetChain(r, net, prior, ising, cfg, fixed, infinite=False,
                      class_counts=(int(l0), int(l1)))
    return chain.run(keep_states=keep_states, track_pseudo=track_pseudo)


class StdDpmDraws(Sequence):
    """Retained mixture draws of the plain (network-free) sampler.

    Behaves as a sequence of :class:`OrderedDensitySet`; ``assignments``
    holds, per retained draw, each feature's component index within the
    corresponding mean-sorted draw.
    """

    def __init__(self, feature_ids, draws, assignments, config):
        self.feature_ids = tuple(feature_ids)
        self._draws = list(draws)
        self.assignments = list(assignments)
        self.config = config

    def __len__(self) -> int:
        return len(self._draws)

    def __getitem__(self, idx):
        return self._draws[idx]


def std_dpm_run(r, prior: Optional[BasePrior] = None,
                cfg: SamplerConfig = SamplerConfig()) -> StdDpmDraws:
    """Plain mixture-of-normals fit of the pooled statistic density.

    No classes, no network: features move between occupied components or
    open fresh ones under a single pooled base measure (derived from the
    data moments when ``prior`` is omitted).  Each retained draw exports
    the occupied components sorted by mean with empirical weights
    ``count / n``.
    """
    values, feature_ids = _as_values(r)
    n = values.size
    if prior is None:
        prior = BasePrior.pooled(values)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    tau = prior.tau[0]
    gamma, xi2 = prior.gamma[0], prior.xi2[0]
    alpha, beta = prior.alpha[0], prior.beta[0]

    log_marg = log_new_component_marginal(values, gamma, xi2, alpha, beta,
                                          cfg.quadrature_nodes)
    log_tau = math.log(tau)

    means = [float(np.mean(values))]
    variances = [max(float(np.var(values)), 1e-2)]
    counts = [n]
    pos = np.zeros(n, dtype=np.int64)

    draws: list[OrderedDensitySet] = []
    assignments: list[np.ndarray] = []

    for sweep in range(cfg.iterations):
        for i in rng.permutation(n):
            i = int(i)
            t_old = int(pos[i])
            counts[t_old] -= 1
            if counts[t_old] == 0:
                del means[t_old]
                del variances[t_old]
                del counts[t_old]
                pos[pos > t_old] -= 1

            mu = np.asarray(means)
            var = np.asarray(variances)
            occ = np.asarray(counts, dtype=np.float64)
            logw = np.log(occ) - 0.5 * (_LOG_2PI + np.log(var)
                                        + (values[i] - mu) ** 2 / var)
            logw = np.append(logw, log_tau + log_marg[i])
            top = np.max(logw)
            w = np.exp(logw - top)
            total = w.sum()
            if not np.isfinite(total) or total <= 0.0:
                raise NumericalError(
                    f"degenerate candidate weights at iteration {sweep}, feature {i}")
            u = rng.random() * total
            choice = int(np.searchsorted(np.cumsum(w), u, side="right"))
            choice = min(choice, logw.size - 1)
            if choice == len(means):
                variance = beta / rng.standard_gamma(alpha + 0.5)
                denom = variance + xi2
                pm = (variance * gamma + xi2 * values[i]) / denom
                mean = pm + math.sqrt(variance * xi2 / denom) * rng.standard_normal()
                means.append(mean)
                variances.append(variance)
                counts.append(0)
            counts[choice] += 1
            pos[i] = choice

        k_count = len(means)
        sums = np.bincount(pos, weights=values, minlength=k_count)
        sqs = np.bincount(pos, weights=values ** 2, minlength=k_count)
        occ = np.bincount(pos, minlength=k_count)
        for t in range(k_count):
            v = variances[t]
            denom = v + xi2 * occ[t]
            pm = (v * gamma + xi2 * sums[t]) / denom
            means[t] = pm + math.sqrt(v * xi2 / denom) * rng.standard_normal()
            ssq = sqs[t] - 2.0 * means[t] * sums[t] + occ[t] * means[t] ** 2
            variances[t] = (beta + 0.5 * max(ssq, 0.0)) / rng.standard_gamma(
                alpha + 0.5 * occ[t])

        if sweep >= cfg.burn_in and (sweep - cfg.burn_in) % cfg.thin == 0:
            order = np.argsort(means)
            mu = np.asarray(means)[order]
            # strictly increasing means are required downstream; exact ties
            # have probability zero but guard against float coincidences
            for t in range(1, mu.size):
                if mu[t] <= mu[t - 1]:
                    mu[t] = np.nextafter(mu[t - 1], np.inf)
            draws.append(OrderedDensitySet(
                means=mu,
                variances=np.asarray(variances)[order],
                weights=np.asarray(counts, dtype=np.float64)[order] / n,
            ))
            rank = np.empty(len(order), dtype=np.int64)
            rank[order] = np.arange(len(order))
            assignments.append(rank[pos])

    return StdDpmDraws(feature_ids, draws, assignments, cfg)
