"""Feature network: adjacency bookkeeping, Ising label prior, subnetworks.

The adjacency is stored compressed (sorted neighbor arrays) so Gibbs
sweeps touch memory sequentially.  The label prior couples connected
features: per configuration ``z`` the unnormalized log mass is

    sum_i wtilde_i log(pi_{z_i})
      + sum_{edges {i,j}, z_i = z_j = k} rho_k (omega_i + omega_j) / 2,

i.e. every unordered edge contributes once, with the average of its two
node weights.  With unit node weights this reduces to the familiar
"rho per agreeing edge" form, and the single-site conditionals used by
all samplers are the exact full conditionals of this mass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import IsingPriorConfig
from .errors import DomainError, IngestionError, InvalidStateError


@dataclass(frozen=True)
class FeatureNetwork:
    """Undirected feature graph with per-node weights.

    ``indptr``/``indices`` hold the compressed adjacency; ``edges`` lists
    every unordered edge once as ``(i, j)`` with ``i < j``.  ``omega`` are
    the node weights and ``omega_tilde`` the derived prior-balance terms:
    the mean neighbor weight, or the node's own weight when isolated.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    edges: np.ndarray
    omega: np.ndarray
    omega_tilde: np.ndarray
    ids: Optional[tuple[str, ...]] = None

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def with_omega(self, omega) -> "FeatureNetwork":
        """Same topology with different node weights (recomputes balance terms)."""
        return build_network(self.n, [tuple(e) for e in self.edges],
                             omega=omega, ids=self.ids)


def build_network(n: int, edge_pairs: Iterable[tuple[int, int]],
                  omega=None, ids=None) -> FeatureNetwork:
    """Assemble a network from integer index pairs.

    Duplicate rows and reversed duplicates collapse to one edge; self
    loops are dropped with a warning since the label prior ignores them.
    """
    if n < 1:
        raise DomainError("network needs at least one node")
    dedup = set()
    for a, b in edge_pairs:
        a, b = int(a), int(b)
        if not (0 <= a < n and 0 <= b < n):
            raise DomainError(f"edge ({a}, {b}) references a node outside 0..{n - 1}")
        if a == b:
            warnings.warn(f"ignoring self-loop on node {a}", stacklevel=2)
            continue
        dedup.add((min(a, b), max(a, b)))
    edges = np.array(sorted(dedup), dtype=np.int64).reshape(-1, 2)

    if omega is None:
        omega = np.ones(n, dtype=np.float64)
    else:
        omega = np.asarray(omega, dtype=np.float64)
        if omega.shape != (n,):
            raise DomainError("omega must hold one weight per node")
        if np.any(omega <= 0.0) or not np.all(np.isfinite(omega)):
            raise DomainError("node weights must be finite and strictly positive")

    counts = np.zeros(n, dtype=np.int64)
    for a, b in edges:
        counts[a] += 1
        counts[b] += 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    indices = np.empty(edges.shape[0] * 2, dtype=np.int64)
    cursor = indptr[:-1].copy()
    for a, b in edges:
        indices[cursor[a]] = b
        cursor[a] += 1
        indices[cursor[b]] = a
        cursor[b] += 1
    for i in range(n):
        indices[indptr[i]:indptr[i + 1]].sort()

    degree = np.diff(indptr)
    omega_tilde = omega.copy()
    has_nbrs = degree > 0
    sums = np.zeros(n, dtype=np.float64)
    np.add.at(sums, edges[:, 0], omega[edges[:, 1]])
    np.add.at(sums, edges[:, 1], omega[edges[:, 0]])
    omega_tilde[has_nbrs] = sums[has_nbrs] / degree[has_nbrs]

    if ids is not None:
        ids = tuple(str(s) for s in ids)
        if len(ids) != n:
            raise DomainError("ids must hold one entry per node")
    return FeatureNetwork(n=n, indptr=indptr, indices=indices, edges=edges,
                          omega=omega, omega_tilde=omega_tilde, ids=ids)


def load_network(edge_rows, feature_ids, weights=None) -> FeatureNetwork:
    """Resolve string edge rows against the statistics' feature ids.

    ``edge_rows`` yields ``(id_a, id_b)`` pairs (a third per-row value, if
    present, is validated as positive and otherwise ignored: adjacency is
    binary).  Node weights come through ``weights``, a mapping from
    feature id to a positive weight; missing ids default to 1.
    """
    feature_ids = [str(f) for f in feature_ids]
    index = {f: i for i, f in enumerate(feature_ids)}
    n = len(feature_ids)

    pairs = []
    unknown = []
    for row in edge_rows:
        a, b = str(row[0]), str(row[1])
        if len(row) > 2 and row[2] is not None:
            w = float(row[2])
            if w <= 0.0:
                raise DomainError(f"nonpositive edge-row weight {w} on ({a}, {b})")
        for name in (a, b):
            if name not in index:
                unknown.append(name)
        if a in index and b in index:
            pairs.append((index[a], index[b]))
    if unknown:
        listing = ", ".join(sorted(set(unknown))[:20])
        raise IngestionError(f"edge list references unknown feature ids: {listing}")

    omega = np.ones(n, dtype=np.float64)
    if weights:
        stray = sorted(set(weights) - set(feature_ids))
        if stray:
            raise IngestionError(f"weights reference unknown feature ids: {', '.join(stray[:20])}")
        for name, w in weights.items():
            w = float(w)
            if w <= 0.0 or not np.isfinite(w):
                raise DomainError(f"node weight for {name} must be positive, got {w}")
            omega[index[name]] = w

    return build_network(n, pairs, omega=omega, ids=feature_ids)


# ---------------------------------------------------------------------------
# Ising prior
# ---------------------------------------------------------------------------

def _effective_omega(net: FeatureNetwork, cfg: IsingPriorConfig):
    if cfg.omega is None:
        return net.omega, net.omega_tilde
    if cfg.omega.shape != (net.n,):
        raise DomainError("omega override length does not match the network")
    tmp = net.with_omega(cfg.omega)
    return tmp.omega, tmp.omega_tilde


def ising_log_prior(z, net: FeatureNetwork, cfg: IsingPriorConfig) -> float:
    """Unnormalized log prior mass of a label configuration."""
    z = np.asarray(z)
    if z.shape != (net.n,):
        raise DomainError("label vector length does not match the network")
    omega, omega_tilde = _effective_omega(net, cfg)
    log_pi = np.where(z == 1, np.log(cfg.pi1), np.log(cfg.pi0))
    total = float(np.sum(omega_tilde * log_pi))
    if net.n_edges:
        a = net.edges[:, 0]
        b = net.edges[:, 1]
        same = z[a] == z[b]
        rho_edge = np.where(z[a] == 1, cfg.rho[1], cfg.rho[0])
        pair_w = 0.5 * (omega[a] + omega[b])
        total += float(np.sum(same * rho_edge * pair_w))
    return total


def ising_neighbor_scores(i: int, z, net: FeatureNetwork, omega) -> tuple[float, float]:
    """Edge-weight totals of node ``i``'s neighbors per class."""
    s = [0.0, 0.0]
    for j in net.neighbors(i):
        s[int(z[j])] += 0.5 * (omega[i] + omega[j])
    return s[0], s[1]


def ising_conditional(i: int, z, net: FeatureNetwork, cfg: IsingPriorConfig) -> float:
    """P(z_i = 1 | all other labels) under the network label prior.

    ``z`` is the full label vector; the entry at ``i`` is ignored.
    """
    if not 0 <= i < net.n:
        raise DomainError(f"node index {i} outside 0..{net.n - 1}")
    omega, omega_tilde = _effective_omega(net, cfg)
    s0, s1 = ising_neighbor_scores(i, z, net, omega)
    a0 = omega_tilde[i] * np.log(cfg.pi0) + cfg.rho[0] * s0
    a1 = omega_tilde[i] * np.log(cfg.pi1) + cfg.rho[1] * s1
    d = a0 - a1
    if d > 0:
        return float(np.exp(-d) / (1.0 + np.exp(-d)))
    return float(1.0 / (1.0 + np.exp(d)))


def ising_flip_delta(i: int, z, net: FeatureNetwork, cfg: IsingPriorConfig) -> float:
    """Change in :func:`ising_log_prior` when flipping ``z[i]``, in O(degree)."""
    omega, omega_tilde = _effective_omega(net, cfg)
    s0, s1 = ising_neighbor_scores(i, z, net, omega)
    scores = (s0, s1)
    log_pi = (np.log(cfg.pi0), np.log(cfg.pi1))
    k_old = int(z[i])
    k_new = 1 - k_old
    return (omega_tilde[i] * log_pi[k_new] + cfg.rho[k_new] * scores[k_new]) - (
        omega_tilde[i] * log_pi[k_old] + cfg.rho[k_old] * scores[k_old])


# ---------------------------------------------------------------------------
# Subnetwork extraction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Subnetwork:
    """A connected component of the selected-feature induced subgraph."""

    node_ids: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.node_ids) < 2:
            raise InvalidStateError("a subnetwork needs at least two nodes")

    def __len__(self) -> int:
        return len(self.node_ids)


def extract_subnetworks(selected, net: FeatureNetwork):
    """Connected components of the selected-node induced subgraph.

    Returns ``(subnetworks, isolated_selected)``: components with at least
    two nodes sorted by size descending (ties by smallest node index), and
    the selected nodes with no selected neighbor.
    """
    selected = np.asarray(selected).astype(bool)
    if selected.shape != (net.n,):
        raise DomainError("selection mask length does not match the network")
    seen = np.zeros(net.n, dtype=bool)
    components = []
    isolated = []
    for start in np.flatnonzero(selected):
        if seen[start]:
            continue
        seen[start] = True
        stack = [int(start)]
        nodes = []
        while stack:
            u = stack.pop()
            nodes.append(u)
            for v in net.neighbors(u):
                if selected[v] and not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        if len(nodes) == 1:
            isolated.append(nodes[0])
        else:
            nodes = tuple(sorted(nodes))
            members = set(nodes)
            comp_edges = tuple(
                (int(a), int(b)) for a, b in net.edges
                if int(a) in members and int(b) in members
            )
            components.append(Subnetwork(node_ids=nodes, edges=comp_edges))
    components.sort(key=lambda c: (-len(c.node_ids), c.node_ids[0]))
    return components, sorted(isolated)
