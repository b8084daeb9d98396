"""Ground-truth generation and selection scoring.

Covers the two benchmark designs: labels drawn from the network prior on
a scale-free graph with class-conditional statistics (gene-level
metrics), and a small designed subnetwork embedded in a scale-free
background with fixed labels (subnetwork-level metrics).  Replicate
pipelines at the bottom are plain top-level functions so they can run in
worker processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ._gibbs import ising_batch, pair_weights_csr
from .core import IsingPriorConfig, SelectionReport, StatisticsVector
from .errors import ConfigError, DomainError
from .fastapprox import (
    GuidedDensityPair,
    HyperGrid,
    build_guided_pairs,
    model_average,
    net_dpm3_run,
    pick_sure_selected,
    std_dpm_hodc_select,
)
from .network import FeatureNetwork, build_network, extract_subnetworks
from .samplers import SamplerConfig, std_dpm_run

# ---------------------------------------------------------------------------
# Network generation
# ---------------------------------------------------------------------------

def generate_scale_free(n: int, attach_edges: int, seed: int = 0) -> FeatureNetwork:
    """Preferential-attachment graph: new nodes link to ``attach_edges``
    distinct existing nodes with probability proportional to degree."""
    if n < 2:
        raise DomainError("a scale-free network needs at least two nodes")
    if not 1 <= attach_edges < n:
        raise DomainError("attach_edges must satisfy 1 <= attach_edges < n")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    edges = []
    repeated: list[int] = []
    targets = list(range(attach_edges))
    for new in range(attach_edges, n):
        for t in targets:
            edges.append((new, t))
        repeated.extend(targets)
        repeated.extend([new] * attach_edges)
        if new + 1 < n:
            chosen: set[int] = set()
            while len(chosen) < attach_edges:
                chosen.add(repeated[int(rng.integers(len(repeated)))])
            targets = sorted(chosen)
    ids = tuple(f"g{i + 1}" for i in range(n))
    return build_network(n, edges, ids=ids)


# ---------------------------------------------------------------------------
# Label sampling from the network prior
# ---------------------------------------------------------------------------

def _ising_kernel_args(net: FeatureNetwork, cfg: IsingPriorConfig):
    omega = cfg.omega if cfg.omega is not None else net.omega
    net_eff = net if cfg.omega is None else net.with_omega(omega)
    pair_w = pair_weights_csr(net_eff, omega)
    eta0 = net_eff.omega_tilde * math.log(cfg.pi0)
    eta1 = net_eff.omega_tilde * math.log(cfg.pi1)
    return pair_w, eta0, eta1


def sample_ising_labels(net: FeatureNetwork, cfg: IsingPriorConfig,
                        sweeps: int = 500, seed: int = 0) -> np.ndarray:
    """One label configuration from the network prior via Gibbs sweeps."""
    return sample_ising_labels_batch(net, cfg, sweeps, 1, seed)[0]


def sample_ising_labels_batch(net: FeatureNetwork, cfg: IsingPriorConfig,
                              sweeps: int, n_replicates: int,
                              seed: int = 0) -> np.ndarray:
    """Independent label configurations, one row per replicate."""
    if sweeps < 1:
        raise DomainError("sweeps must be at least 1")
    pair_w, eta0, eta1 = _ising_kernel_args(net, cfg)
    seeds = np.random.SeedSequence(seed).generate_state(n_replicates, np.uint64)
    return ising_batch(net.indptr, net.indices, pair_w, eta0, eta1,
                       float(cfg.rho[0]), float(cfg.rho[1]),
                       float(cfg.pi1), int(sweeps), seeds)


# ---------------------------------------------------------------------------
# Class-conditional statistic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionSpec:
    """One class-conditional distribution for generated statistics.

    ``gaussian-mixture`` components are (weight, mean, variance) triples,
    ``gamma-mixture`` components are (weight, shape, rate) triples, and
    ``empirical`` resamples the supplied values with replacement.
    """

    kind: str
    components: Optional[tuple[tuple[float, float, float], ...]] = None
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind in ("gaussian-mixture", "gamma-mixture"):
            if not self.components:
                raise ConfigError(f"{self.kind} requires mixture components")
            comps = tuple((float(w), float(a), float(b)) for w, a, b in self.components)
            object.__setattr__(self, "components", comps)
            weights = np.array([c[0] for c in comps])
            if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-9:
                raise ConfigError("mixture weights must be positive and sum to 1")
            if self.kind == "gaussian-mixture" and any(c[2] <= 0 for c in comps):
                raise ConfigError("gaussian variances must be positive")
            if self.kind == "gamma-mixture" and any(c[1] <= 0 or c[2] <= 0 for c in comps):
                raise ConfigError("gamma shapes and rates must be positive")
        elif self.kind == "empirical":
            samples = np.asarray(self.samples, dtype=np.float64)
            if samples.ndim != 1 or samples.size < 1 or not np.all(np.isfinite(samples)):
                raise ConfigError("empirical spec needs a nonempty finite sample")
            object.__setattr__(self, "samples", samples)
        else:
            raise ConfigError(f"unknown distribution kind {self.kind!r}")

    @classmethod
    def gaussian(cls, components) -> "DistributionSpec":
        return cls(kind="gaussian-mixture", components=tuple(components))

    @classmethod
    def gamma(cls, components) -> "DistributionSpec":
        return cls(kind="gamma-mixture", components=tuple(components))

    @classmethod
    def empirical(cls, samples) -> "DistributionSpec":
        return cls(kind="empirical", samples=np.asarray(samples, dtype=np.float64))

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "empirical":
            return rng.choice(self.samples, size=size, replace=True)
        weights = np.array([c[0] for c in self.components])
        pick = rng.choice(len(weights), size=size, p=weights)
        out = np.empty(size)
        for idx, (_, a, b) in enumerate(self.components):
            mask = pick == idx
            count = int(mask.sum())
            if not count:
                continue
            if self.kind == "gaussian-mixture":
                out[mask] = rng.normal(a, math.sqrt(b), size=count)
            else:
                out[mask] = rng.gamma(shape=a, scale=1.0 / b, size=count)
        return out

    def describe(self) -> dict:
        if self.kind == "empirical":
            return {"kind": self.kind, "n_samples": int(self.samples.size)}
        return {"kind": self.kind, "components": [list(c) for c in self.components]}


@dataclass(frozen=True)
class DataSpec:
    """Null and alternative distributions for one simulated data set."""

    null: DistributionSpec
    alternative: DistributionSpec
    name: str = ""


NULL_STANDARD_NORMAL = DistributionSpec.gaussian(((1.0, 0.0, 1.0),))
GAUSSIAN_ALTERNATIVE = DistributionSpec.gaussian(((0.4, 3.0, 1.0), (0.6, 2.0, 0.5)))
GAMMA_ALTERNATIVE = DistributionSpec.gamma(((0.4, 5.0, 2.0), (0.6, 6.0, 3.0)))

GAUSSIAN_DATA = DataSpec(null=NULL_STANDARD_NORMAL, alternative=GAUSSIAN_ALTERNATIVE,
                         name="gaussian")
GAMMA_DATA = DataSpec(null=NULL_STANDARD_NORMAL, alternative=GAMMA_ALTERNATIVE,
                      name="gamma")


def generate_statistics(labels, spec: DataSpec, seed: int = 0,
                        feature_ids=None) -> StatisticsVector:
    """Draw one statistic per feature from its class-conditional spec."""
    labels = np.asarray(labels)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    values = np.empty(labels.size)
    for k, dist in ((0, spec.null), (1, spec.alternative)):
        mask = labels == k
        count = int(mask.sum())
        if count:
            values[mask] = dist.draw(rng, count)
    return StatisticsVector(values, feature_ids)


# ---------------------------------------------------------------------------
# Ground truth containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroundTruth:
    """A network, its true labels and (optionally) the scored subnetwork."""

    network: FeatureNetwork
    labels: np.ndarray
    target_subnetwork: Optional[frozenset[int]] = None
    generator_spec: dict = field(default_factory=dict)

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.uint8)
        if labels.shape != (self.network.n,):
            raise DomainError("labels length does not match the network")
        object.__setattr__(self, "labels", labels)
        if self.target_subnetwork is not None:
            target = frozenset(int(i) for i in self.target_subnetwork)
            if not target or min(target) < 0 or max(target) >= self.network.n:
                raise DomainError("target subnetwork references unknown nodes")
            mask = np.zeros(self.network.n, dtype=bool)
            mask[list(target)] = True
            comps, isolated = extract_subnetworks(mask, self.network)
            if len(comps) != 1 or isolated or set(comps[0].node_ids) != target:
                raise DomainError("target subnetwork must be induced-connected")
            object.__setattr__(self, "target_subnetwork", target)


DEFAULT_DESIGNED_EDGES = ((1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7),
                          (7, 8), (8, 9), (9, 10), (10, 11))
DEFAULT_BRIDGE_PORTS = (5, 6, 11)
DEFAULT_DESIGNED_SELECTED = (1, 2, 3, 4, 5, 8, 9, 10)
DEFAULT_TARGET_NODES = (1, 2, 3, 4, 5)


def build_designed_network(subnetwork_edges, scale_free_n: int,
                           bridge_edges: int, seed: int = 0, *,
                           ports=None, attach_edges: int = 1) -> FeatureNetwork:
    """Designed subnetwork joined to a scale-free background.

    The designed part keeps its 1-based node numbering at the front of
    the combined network; ``bridge_edges`` cross edges run from the port
    nodes (cycled in order) to distinct random background nodes.
    """
    edges = [(int(a), int(b)) for a, b in subnetwork_edges]
    m = max(max(a, b) for a, b in edges)
    if min(min(a, b) for a, b in edges) < 1:
        raise ConfigError("designed nodes are numbered from 1")
    adj = {i: set() for i in range(1, m + 1)}
    for a, b in edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = {1}
    stack = [1]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != m:
        raise ConfigError("designed subnetwork must be connected")
    if bridge_edges < 1:
        raise ConfigError("at least one bridge edge is required")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    sf_seed = int(rng.integers(2 ** 63))
    background = generate_scale_free(scale_free_n, attach_edges, seed=sf_seed)

    combined = [(a - 1, b - 1) for a, b in edges]
    combined.extend((int(a) + m, int(b) + m) for a, b in background.edges)
    if ports is None:
        ports = tuple(sorted(rng.choice(np.arange(1, m + 1), size=min(bridge_edges, m),
                                        replace=False)))
    anchors = rng.choice(scale_free_n, size=bridge_edges, replace=False)
    for e in range(bridge_edges):
        port = int(ports[e % len(ports)]) - 1
        combined.append((port, int(anchors[e]) + m))

    n = m + scale_free_n
    ids = tuple(f"g{i + 1}" for i in range(n))
    return build_network(n, combined, ids=ids)


def simulation2_ground_truth(seed: int = 0, *, scale_free_n: int = 83,
                             bridge_edges: int = 3,
                             attach_edges: int = 1) -> GroundTruth:
    """The designed-subnetwork benchmark: 11 designed nodes (eight of them
    truly selected, target nodes 1-5) plus a scale-free background."""
    net = build_designed_network(DEFAULT_DESIGNED_EDGES, scale_free_n,
                                 bridge_edges, seed, ports=DEFAULT_BRIDGE_PORTS,
                                 attach_edges=attach_edges)
    labels = np.zeros(net.n, dtype=np.uint8)
    labels[[i - 1 for i in DEFAULT_DESIGNED_SELECTED]] = 1
    target = frozenset(i - 1 for i in DEFAULT_TARGET_NODES)
    return GroundTruth(network=net, labels=labels, target_subnetwork=target,
                       generator_spec={"design": "designed-subnetwork",
                                       "scale_free_n": scale_free_n,
                                       "bridge_edges": bridge_edges,
                                       "attach_edges": attach_edges,
                                       "seed": seed})


def simulation1_ground_truth(n: int = 1000, *, attach_edges: int = 1,
                             pi0: float = 0.8, rho=(5.0, 10.0),
                             sweeps: int = 500, seed: int = 0) -> GroundTruth:
    """Scale-free network with labels drawn from the network prior."""
    root = np.random.SeedSequence(seed)
    net_seed, label_seed = [int(s.generate_state(1, np.uint64)[0]) for s in root.spawn(2)]
    net = generate_scale_free(n, attach_edges, seed=net_seed)
    cfg = IsingPriorConfig(pi0=pi0, rho=(float(rho[0]), float(rho[1])))
    labels = sample_ising_labels(net, cfg, sweeps=sweeps, seed=label_seed)
    return GroundTruth(network=net, labels=labels,
                       generator_spec={"design": "ising-scale-free", "n": n,
                                       "attach_edges": attach_edges, "pi0": pi0,
                                       "rho": list(rho), "sweeps": sweeps,
                                       "seed": seed})


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionMetrics:
    """Gene- and subnetwork-level selection accuracy.

    Subnetwork fields are per-replicate indicators until aggregated:
    ``subnet_exact`` marks a selected component equal to the target,
    ``subnet_larger`` one strictly containing it (plus a target-adjacent
    extra), and ``subnet_fdr`` is larger / (exact + larger) with 0/0 = 0.
    """

    gene_tpr: float
    gene_fpr: float
    gene_fdr: float
    subnet_exact: float = 0.0
    subnet_larger: float = 0.0
    subnet_fdr: float = 0.0
    counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("gene_tpr", "gene_fpr", "gene_fdr",
                     "subnet_exact", "subnet_larger", "subnet_fdr"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")


def _safe_ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def score_selection(truth: GroundTruth, report: SelectionReport) -> SelectionMetrics:
    """Gene metrics from hard labels plus subnetwork recovery indicators."""
    selected = np.asarray(report.selected, dtype=bool)
    if selected.shape != truth.labels.shape:
        raise DomainError("report length does not match the ground truth")
    true_pos = truth.labels == 1
    tp = int(np.sum(selected & true_pos))
    fp = int(np.sum(selected & ~true_pos))
    fn = int(np.sum(~selected & true_pos))
    tn = int(np.sum(~selected & ~true_pos))

    exact = 0.0
    larger = 0.0
    if truth.target_subnetwork is not None:
        target = truth.target_subnetwork
        comps, _ = extract_subnetworks(selected, truth.network)
        neighborhood = set()
        for t in target:
            neighborhood.update(int(j) for j in truth.network.neighbors(t))
        neighborhood -= set(target)
        for comp in comps:
            nodes = set(comp.node_ids)
            if nodes == target:
                exact = 1.0
            elif nodes > target and (nodes & neighborhood):
                larger = 1.0

    return SelectionMetrics(
        gene_tpr=_safe_ratio(tp, tp + fn),
        gene_fpr=_safe_ratio(fp, fp + tn),
        gene_fdr=_safe_ratio(fp, fp + tp),
        subnet_exact=exact,
        subnet_larger=larger,
        subnet_fdr=_safe_ratio(larger, exact + larger),
        counts={"tp": tp, "fp": fp, "fn": fn, "tn": tn},
    )


def aggregate_metrics(metrics: Sequence[SelectionMetrics]) -> SelectionMetrics:
    """Average gene metrics and pool subnetwork indicators across replicates."""
    if not metrics:
        raise DomainError("nothing to aggregate")
    exact = sum(m.subnet_exact for m in metrics)
    larger = sum(m.subnet_larger for m in metrics)
    reps = len(metrics)
    return SelectionMetrics(
        gene_tpr=float(np.mean([m.gene_tpr for m in metrics])),
        gene_fpr=float(np.mean([m.gene_fpr for m in metrics])),
        gene_fdr=float(np.mean([m.gene_fdr for m in metrics])),
        subnet_exact=exact / reps,
        subnet_larger=larger / reps,
        subnet_fdr=_safe_ratio(larger, exact + larger),
        counts={"replicates": reps},
    )


# ---------------------------------------------------------------------------
# Replicate pipelines (picklable for worker pools)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BenchmarkConfig:
    """Sampler sizes and hyper grid for the replicate pipelines."""

    std_config: SamplerConfig = SamplerConfig(iterations=1500, burn_in=500)
    dpm3_config: SamplerConfig = SamplerConfig(iterations=3000, burn_in=1000)
    guided_draws: int = 20
    grid: HyperGrid = HyperGrid(pi0_values=(0.85, 0.9),
                                rho_pairs=((1.0, 5.0), (5.0, 10.0)))
    sure_selected: int = 1


def _dpm3_point(r, net, pairs, cfg, fixed, pi0, rho, seed):
    ising = IsingPriorConfig(pi0=pi0, rho=rho)
    return net_dpm3_run(r, net, pairs, ising, replace(cfg, seed=seed), fixed)


def run_guided_selection(statistics: StatisticsVector, net: FeatureNetwork,
                         bench: BenchmarkConfig, seed: int,
                         threads: int = 1):
    """Plain fit, guided pairs, then grid-averaged label Gibbs.

    Returns ``(net_dpm3_report, std_report)`` sharing the same plain fit.
    """
    root = np.random.SeedSequence(seed)
    std_seed, avg_seed = [int(s.generate_state(1, np.uint64)[0]) for s in root.spawn(2)]
    std_draws = std_dpm_run(statistics, cfg=replace(bench.std_config, seed=std_seed))
    std_report = std_dpm_hodc_select(std_draws)
    pairs = build_guided_pairs(std_draws, min(bench.guided_draws, len(std_draws)))
    fixed = pick_sure_selected(std_report, net, bench.sure_selected, statistics)

    from functools import partial
    point = partial(_dpm3_point, statistics.values, net, pairs,
                    bench.dpm3_config, fixed)
    averaged = model_average(point, bench.grid, seed=avg_seed, threads=threads)
    subnets, isolated = extract_subnetworks(averaged.selected, net)
    averaged = replace(averaged, subnetworks=tuple(subnets),
                       isolated_selected=tuple(isolated))
    return averaged, std_report


def run_subnetwork_replicate(spec: DataSpec, seed: int,
                             bench: BenchmarkConfig = BenchmarkConfig()):
    """One designed-subnetwork replicate; returns metrics per method."""
    root = np.random.SeedSequence(seed)
    truth_seed, data_seed, run_seed = [
        int(s.generate_state(1, np.uint64)[0]) for s in root.spawn(3)]
    truth = simulation2_ground_truth(truth_seed)
    statistics = generate_statistics(truth.labels, spec, seed=data_seed,
                                     feature_ids=truth.network.ids)
    net_report, std_report = run_guided_selection(statistics, truth.network,
                                                  bench, run_seed)
    return {
        "net-dpm-3": score_selection(truth, net_report),
        "std-dpm": score_selection(truth, std_report),
    }


def run_gene_replicate(spec: DataSpec, seed: int, *, n: int = 300,
                       pi0: float = 0.8, rho=(5.0, 10.0),
                       bench: BenchmarkConfig = BenchmarkConfig(),
                       threads: int = 1):
    """One gene-level replicate on a prior-labeled scale-free network."""
    root = np.random.SeedSequence(seed)
    truth_seed, data_seed, run_seed = [
        int(s.generate_state(1, np.uint64)[0]) for s in root.spawn(3)]
    truth = simulation1_ground_truth(n, pi0=pi0, rho=rho, seed=truth_seed)
    statistics = generate_statistics(truth.labels, spec, seed=data_seed,
                                     feature_ids=truth.network.ids)
    net_report, std_report = run_guided_selection(statistics, truth.network,
                                                  bench, run_seed, threads=threads)
    return {
        "net-dpm-3": score_selection(truth, net_report),
        "std-dpm": score_selection(truth, std_report),
    }
