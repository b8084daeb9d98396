"""Fast label-only inference guided by a plain mixture fit.

A plain mixture fit supplies posterior density draws; each draw is split
into an unselected/selected density pair by ordered density clustering.
Labels are then Gibbs-sampled with the pair held fixed, which costs
O(edges) per sweep, and the per-feature inclusion probabilities are
averaged over the pairs with equal weight.  The averaged probabilities
are known to understate label uncertainty relative to the full sampler;
they are reported as-is.

Hyperparameter model averaging runs any sampler across a grid of
(sparsity, smoothness) settings and combines the per-feature
probabilities, uniformly by default.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from multiprocessing import get_context
from typing import Callable, Optional, Sequence

import numpy as np

from ._gibbs import label_gibbs, pair_weights_csr, seed_to_uint64
from .core import IsingPriorConfig, SelectionReport, hard_labels, log_normal_mixture
from .errors import ConfigError, DomainError
from .hodc import OrderedDensitySet, hodc_run
from .network import FeatureNetwork, extract_subnetworks
from .samplers import SamplerConfig, StdDpmDraws, _as_values

DEFAULT_GUIDED_DRAWS = 50


@dataclass(frozen=True)
class GuidedDensityPair:
    """One unselected/selected density split of a mixture draw.

    Both sides hold renormalized component weights and every unselected
    mean sits below every selected mean.
    """

    phi0: OrderedDensitySet
    phi1: OrderedDensitySet
    source: int = 0

    def __post_init__(self):
        if self.phi0.means[-1] >= self.phi1.means[0]:
            raise DomainError("unselected means must all sit below selected means")

    def log_densities(self, r) -> tuple[np.ndarray, np.ndarray]:
        """(log phi0(r), log phi1(r)), vectorized over r."""
        out = []
        for side in (self.phi0, self.phi1):
            w = side.weights / side.weights.sum()
            out.append(log_normal_mixture(r, side.means, side.variances, w))
        return out[0], out[1]


def build_guided_pairs(std_draws: Sequence[OrderedDensitySet],
                       v: int = DEFAULT_GUIDED_DRAWS) -> list[GuidedDensityPair]:
    """Split ``v`` evenly spaced draws into guided density pairs.

    Draws with a single component admit no split and are skipped with a
    warning.
    """
    if v < 1:
        raise ConfigError("v must be at least 1")
    if v > len(std_draws):
        raise ConfigError(f"v={v} exceeds the {len(std_draws)} available draws")
    picks = np.round(np.linspace(0, len(std_draws) - 1, v)).astype(int)
    pairs = []
    for idx in picks:
        draw = std_draws[int(idx)]
        if len(draw) < 2:
            warnings.warn(f"draw {idx} has a single component; skipped", stacklevel=2)
            continue
        low, high = hodc_run(draw).final_split()
        pairs.append(GuidedDensityPair(
            phi0=OrderedDensitySet(*draw.subset(list(low))),
            phi1=OrderedDensitySet(*draw.subset(list(high))),
            source=int(idx),
        ))
    return pairs


def _kernel_inputs(net: FeatureNetwork, ising: IsingPriorConfig):
    omega = ising.omega if ising.omega is not None else net.omega
    net_eff = net if ising.omega is None else net.with_omega(omega)
    pair_w = pair_weights_csr(net_eff, omega)
    eta0 = net_eff.omega_tilde * math.log(ising.pi0)
    eta1 = net_eff.omega_tilde * math.log(ising.pi1)
    return pair_w, eta0, eta1


def net_dpm3_run(r, net: FeatureNetwork, pairs: Sequence[GuidedDensityPair],
                 ising: IsingPriorConfig, cfg: SamplerConfig,
                 fixed=None, *, track_pseudo=False) -> SelectionReport:
    """Label-only Gibbs per density pair, averaged with equal weights.

    Each pair runs an independent chain whose site conditional multiplies
    the pair density at the feature's statistic with the network label
    prior; pinned features stay selected throughout.
    """
    values, feature_ids = _as_values(r)
    n = values.size
    if net.n != n:
        raise DomainError("network size does not match the statistics")
    if len(pairs) == 0:
        raise DomainError("at least one guided density pair is required")

    pair_w, eta0, eta1 = _kernel_inputs(net, ising)
    fixed_mask = np.zeros(n, dtype=bool)
    if fixed is not None:
        idx = np.asarray(fixed, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise DomainError("fixed feature index out of range")
        fixed_mask[idx] = True

    z_init = (values > np.quantile(values, 0.8)).astype(np.uint8)
    z_init[fixed_mask] = 1

    seeds = np.random.SeedSequence(cfg.seed).spawn(len(pairs))
    probs = np.zeros(n)
    pseudo_scores = []
    for v, (pair, ss) in enumerate(zip(pairs, seeds)):
        log_f0, log_f1 = pair.log_densities(values)
        tally, snapshots, pseudo_sum, _ = label_gibbs(
            np.ascontiguousarray(log_f0), np.ascontiguousarray(log_f1),
            net.indptr, net.indices, pair_w, eta0, eta1,
            float(ising.rho[0]), float(ising.rho[1]),
            fixed_mask, z_init.copy(),
            cfg.iterations, cfg.burn_in, cfg.thin,
            seed_to_uint64(ss), track_pseudo,
        )
        probs += tally / float(snapshots)
        if track_pseudo:
            pseudo_scores.append(pseudo_sum / snapshots)
    probs /= len(pairs)
    probs[fixed_mask] = 1.0

    selected = hard_labels(probs, rule="mode")
    subnets, isolated = extract_subnetworks(selected, net)
    metadata = {
        "method": "net-dpm-3",
        "pairs": len(pairs),
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
        "seed": cfg.seed,
        "pi0": ising.pi0,
        "rho": ising.rho,
        "fixed": sorted(int(i) for i in np.flatnonzero(fixed_mask)),
    }
    if track_pseudo:
        metadata["log_pseudo_likelihood"] = float(np.mean(pseudo_scores))
    return SelectionReport(feature_ids=feature_ids, probabilities=probs,
                           selected=selected, subnetworks=tuple(subnets),
                           isolated_selected=tuple(isolated), metadata=metadata)


# ---------------------------------------------------------------------------
# Hyperparameter model averaging
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperGrid:
    """Grid of (sparsity, smoothness) settings with combination weights."""

    pi0_values: tuple[float, ...]
    rho_pairs: tuple[tuple[float, float], ...]
    weights: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not self.pi0_values or not self.rho_pairs:
            raise ConfigError("grid must contain at least one point")
        for p in self.pi0_values:
            if not 0.0 < p < 1.0:
                raise ConfigError(f"pi0 grid value {p} outside (0, 1)")
        for pair in self.rho_pairs:
            if len(pair) != 2 or min(pair) < 0:
                raise ConfigError(f"invalid rho pair {pair!r}")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.size != len(self.points()) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ConfigError("weights must be nonnegative and sum to 1 over grid points")

    def points(self) -> list[tuple[float, tuple[float, float]]]:
        return [(p, (float(r0), float(r1)))
                for p in self.pi0_values for (r0, r1) in self.rho_pairs]

    @classmethod
    def single(cls, pi0: float, rho: tuple[float, float]) -> "HyperGrid":
        return cls(pi0_values=(float(pi0),), rho_pairs=((float(rho[0]), float(rho[1])),))

    @classmethod
    def default(cls) -> "HyperGrid":
        """The demonstration grid: four sparsity levels crossed with all
        ordered smoothness pairs from {0.5, 1, 5, 10, 15}."""
        levels = (0.5, 1.0, 5.0, 10.0, 15.0)
        rho_pairs = tuple((a, b) for a in levels for b in levels if a < b)
        return cls(pi0_values=(0.75, 0.8, 0.85, 0.9), rho_pairs=rho_pairs)


def _run_point(payload):
    run_point, pi0, rho, seed = payload
    return run_point(pi0, rho, seed)


def model_average(run_point: Callable, grid: HyperGrid, *, seed: int = 0,
                  threads: int = 1, weighting: str = "uniform") -> SelectionReport:
    """Combine per-feature probabilities across a hyperparameter grid.

    ``run_point(pi0, rho, seed)`` must return a :class:`SelectionReport`
    for a single grid point (it must be picklable when ``threads > 1``).
    ``weighting`` is ``"uniform"`` or ``"pseudo"``; the latter weights by
    ``exp`` of the per-feature-normalized chain log pseudo-likelihood and
    has no counterpart in the reference method, so it is flagged in the
    report metadata.
    """
    points = grid.points()
    seeds = [int(s.generate_state(1, np.uint64)[0])
             for s in np.random.SeedSequence(seed).spawn(len(points))]
    payloads = [(run_point, p, r, s) for (p, r), s in zip(points, seeds)]

    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=threads,
                                 mp_context=get_context("fork")) as pool:
            reports = list(pool.map(_run_point, payloads))
    else:
        reports = [_run_point(p) for p in payloads]

    if any(g.metadata.get("failed") for g in reports):
        bad = next(g for g in reports if g.metadata.get("failed"))
        raise ConfigError(f"grid point failed: {bad.metadata}")

    if grid.weights is not None:
        weights = np.asarray(grid.weights, dtype=np.float64)
    elif weighting == "uniform":
        weights = np.full(len(points), 1.0 / len(points))
    elif weighting == "pseudo":
        scores = []
        for rep in reports:
            s = rep.metadata.get("log_pseudo_likelihood")
            if s is None:
                raise ConfigError("pseudo weighting requires samplers run with "
                                  "pseudo-likelihood tracking")
            scores.append(s / len(rep.feature_ids))
        scores = np.asarray(scores)
        w = np.exp(scores - scores.max())
        weights = w / w.sum()
    else:
        raise ConfigError(f"unknown weighting {weighting!r}")

    probs = np.zeros(len(reports[0].feature_ids))
    for w, rep in zip(weights, reports):
        probs += w * rep.probabilities
    metadata = {
        "grid": [(p, r) for p, r in points],
        "grid_weights": [float(w) for w in weights],
        "weighting": weighting,
        "seed": seed,
    }
    if weighting == "pseudo":
        metadata["non_paper_weighting"] = True
    return SelectionReport(
        feature_ids=reports[0].feature_ids,
        probabilities=probs,
        selected=hard_labels(probs, rule="mode"),
        metadata=metadata,
    )


# ---------------------------------------------------------------------------
# Baseline selection and seeding helpers
# ---------------------------------------------------------------------------

def std_dpm_hodc_select(std_draws: StdDpmDraws) -> SelectionReport:
    """Selection probabilities from a plain mixture fit.

    Per retained draw the components split into two ordered groups; a
    feature counts as selected when its component falls in the upper
    group.  Draws with a single component select nothing.
    """
    if len(std_draws) == 0:
        raise DomainError("no retained draws")
    n = len(std_draws.feature_ids)
    tally = np.zeros(n)
    for draw, assign in zip(std_draws, std_draws.assignments):
        if len(draw) < 2:
            continue
        low, _high = hodc_run(draw).final_split()
        boundary = max(low)
        tally += assign > boundary
    probs = tally / len(std_draws)
    return SelectionReport(
        feature_ids=std_draws.feature_ids,
        probabilities=probs,
        selected=hard_labels(probs, rule="mode"),
        metadata={"method": "std-dpm", "snapshots": len(std_draws),
                  "seed": std_draws.config.seed},
    )


def pick_sure_selected(std_report: SelectionReport, net: FeatureNetwork,
                       count: int, statistics=None) -> list[int]:
    """Features with the most selected neighbors in a baseline report.

    Ties break toward the larger statistic (when given), then the lower
    index.  Returns ``count`` feature indices.
    """
    if count < 0:
        raise DomainError("count must be nonnegative")
    if count == 0:
        return []
    selected = np.asarray(std_report.selected, dtype=bool)
    if selected.shape != (net.n,):
        raise DomainError("report length does not match the network")
    values = None
    if statistics is not None:
        values, _ = _as_values(statistics)
    links = np.array([int(np.sum(selected[net.neighbors(i)])) for i in range(net.n)])
    order = sorted(
        range(net.n),
        key=lambda i: (-links[i], -(values[i] if values is not None else 0.0), i),
    )
    return order[:count]
