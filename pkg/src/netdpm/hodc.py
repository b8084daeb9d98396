"""Hierarchical ordered density clustering (HODC).

Greedy agglomeration of mean-ordered Gaussian components: at every step
the two *adjacent* clusters whose renormalized mixtures are closest in
squared-L2 density distance merge, until exactly two clusters remain.
The final pair is the unselected/selected split and its sizes estimate
the per-class component counts.

The L2 distance between two Gaussian mixtures has a closed form through
the product identity  int N(x; m1, v1) N(x; m2, v2) dx = N(m1 - m2; 0, v1 + v2),
so no numerical integration happens here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import MixtureComponent
from .errors import DomainError, InvalidStateError


@dataclass(frozen=True)
class OrderedDensitySet:
    """Gaussian components sorted by strictly increasing mean.

    Weights must be positive but need not sum to one; every cluster
    mixture built from a subset renormalizes internally.
    """

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray

    def __init__(self, means, variances, weights):
        means = np.asarray(means, dtype=np.float64)
        variances = np.asarray(variances, dtype=np.float64)
        weights = np.asarray(weights, dtype=np.float64)
        if not (means.shape == variances.shape == weights.shape) or means.ndim != 1:
            raise DomainError("means, variances and weights must be equal-length 1-d arrays")
        if means.size < 1:
            raise DomainError("at least one component is required")
        if means.size > 1 and not np.all(np.diff(means) > 0):
            raise DomainError("component means must be strictly increasing")
        if np.any(variances <= 0):
            raise DomainError("component variances must be positive")
        if np.any(weights <= 0):
            raise DomainError("component weights must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_components(cls, comps: Sequence[MixtureComponent]):
        order = np.argsort([c.mean for c in comps])
        return cls([comps[i].mean for i in order],
                   [comps[i].variance for i in order],
                   [comps[i].weight for i in order])

    def __len__(self) -> int:
        return self.means.size

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return self.means[idx], self.variances[idx], self.weights[idx]


def _as_triple(obj):
    if isinstance(obj, OrderedDensitySet):
        return obj.means, obj.variances, obj.weights
    means, variances, weights = obj
    return (np.asarray(means, dtype=np.float64),
            np.asarray(variances, dtype=np.float64),
            np.asarray(weights, dtype=np.float64))


def _cross_mass(m1, v1, w1, m2, v2, w2) -> float:
    """sum_ij w1_i w2_j int N(.; m1_i, v1_i) N(.; m2_j, v2_j)."""
    dm = m1[:, None] - m2[None, :]
    vv = v1[:, None] + v2[None, :]
    return float(np.sum(w1[:, None] * w2[None, :]
                        * np.exp(-0.5 * dm * dm / vv) / np.sqrt(2.0 * np.pi * vv)))


def mixture_l2_distance(a, b) -> float:
    """Squared-L2 distance between two renormalized Gaussian mixtures.

    ``a`` and ``b`` are ``(means, variances, weights)`` triples or
    :class:`OrderedDensitySet` instances; weights are renormalized within
    each mixture before the distance is evaluated.
    """
    m1, v1, w1 = _as_triple(a)
    m2, v2, w2 = _as_triple(b)
    if m1.size == 0 or m2.size == 0:
        raise DomainError("mixture subsets must be nonempty")
    w1 = w1 / w1.sum()
    w2 = w2 / w2.sum()
    d = (_cross_mass(m1, v1, w1, m1, v1, w1)
         - 2.0 * _cross_mass(m1, v1, w1, m2, v2, w2)
         + _cross_mass(m2, v2, w2, m2, v2, w2))
    return max(d, 0.0)


@dataclass(frozen=True)
class HODCPartition:
    """Full merge history: one partition per completed step.

    Each partition is a tuple of clusters, each cluster a tuple of
    component indices contiguous in the mean order.  ``steps`` excludes
    the all-singleton start; for a two-component input it is empty and
    the split is the pair of singletons.
    """

    n_components: int
    steps: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        expected = self.n_components - 1
        for m, part in enumerate(self.steps, start=1):
            if len(part) != self.n_components - m:
                raise InvalidStateError("cluster count must drop by one per step")
            flat = [i for cluster in part for i in cluster]
            if flat != list(range(self.n_components)):
                raise InvalidStateError("clusters must stay contiguous and partition the index set")
        if self.steps and len(self.steps[-1]) != 2:
            raise InvalidStateError("merge history must end at two clusters")

    @property
    def initial(self) -> tuple[tuple[int, ...], ...]:
        return tuple((i,) for i in range(self.n_components))

    def final_split(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """The terminal (lower, upper) cluster pair, ordered by mean."""
        part = self.steps[-1] if self.steps else self.initial
        return part[0], part[1]

    def split_sizes(self) -> tuple[int, int]:
        low, high = self.final_split()
        return len(low), len(high)


def hodc_run(p: OrderedDensitySet) -> HODCPartition:
    """Run the ordered agglomeration until two clusters remain.

    Ties on the minimal adjacent distance merge the leftmost pair.  Only
    distances adjacent to the previous merge are recomputed, which is
    equivalent to full recomputation since all other adjacent pairs are
    untouched.
    """
    size = len(p)
    if size < 2:
        raise DomainError("clustering needs at least two components")
    clusters = [[i] for i in range(size)]
    gaps = [mixture_l2_distance(p.subset(clusters[l]), p.subset(clusters[l + 1]))
            for l in range(size - 1)]
    steps = []
    while len(clusters) > 2:
        best = int(np.argmin(gaps))  # argmin takes the first = leftmost on ties
        clusters[best] = clusters[best] + clusters[best + 1]
        del clusters[best + 1]
        del gaps[best]
        if best > 0:
            gaps[best - 1] = mixture_l2_distance(
                p.subset(clusters[best - 1]), p.subset(clusters[best]))
        if best < len(clusters) - 1:
            gaps[best] = mixture_l2_distance(
                p.subset(clusters[best]), p.subset(clusters[best + 1]))
        steps.append(tuple(tuple(c) for c in clusters))
    return HODCPartition(n_components=size, steps=tuple(steps))


def estimate_component_counts(draws: Sequence[OrderedDensitySet]) -> tuple[int, int]:
    """Average the per-draw split sizes into (L0, L1) component counts.

    Each usable draw contributes the sizes of its terminal HODC split;
    single-component draws carry no split and are skipped.  The averages
    round half up and never drop below one.
    """
    if len(draws) < 1:
        raise DomainError("at least one draw is required")
    sizes = []
    for v, draw in enumerate(draws):
        if len(draw) < 2:
            warnings.warn(f"draw {v} has a single component; skipped", stacklevel=2)
            continue
        sizes.append(hodc_run(draw).split_sizes())
    if not sizes:
        warnings.warn("no draw had two or more components; defaulting to (1, 1)",
                      stacklevel=2)
        return 1, 1
    avg = np.mean(np.asarray(sizes, dtype=np.float64), axis=0)
    low = max(1, int(np.floor(avg[0] + 0.5)))
    high = max(1, int(np.floor(avg[1] + 0.5)))
    return low, high
