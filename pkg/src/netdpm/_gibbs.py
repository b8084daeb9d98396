"""Hot Gibbs loops, JIT-compiled.

The kernels carry their own counter-based RNG (splitmix64) so chains are
reproducible bit-for-bit from an integer seed, independent of global RNG
state and safe to run concurrently.  Label sweeps visit sites in a fresh
random permutation each sweep.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(inline="always")
def _next_uniform(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    z = z ^ (z >> np.uint64(31))
    return state, (z >> np.uint64(11)) * _INV53


@njit(inline="always")
def _shuffle(order, state):
    for t in range(order.shape[0] - 1, 0, -1):
        state, u = _next_uniform(state)
        j = int(u * (t + 1))
        if j > t:
            j = t
        tmp = order[t]
        order[t] = order[j]
        order[j] = tmp
    return state


@njit(inline="always")
def _site_logits(i, z, indptr, indices, pair_w, log_f0, log_f1,
                 eta0, eta1, rho0, rho1):
    s0 = 0.0
    s1 = 0.0
    for e in range(indptr[i], indptr[i + 1]):
        if z[indices[e]] == 1:
            s1 += pair_w[e]
        else:
            s0 += pair_w[e]
    a0 = log_f0[i] + eta0[i] + rho0 * s0
    a1 = log_f1[i] + eta1[i] + rho1 * s1
    return a0, a1


@njit(cache=True, nogil=True)
def label_gibbs(log_f0, log_f1, indptr, indices, pair_w, eta0, eta1,
                rho0, rho1, fixed, z, sweeps, burn_in, thin, seed,
                track_pseudo):
    """Binary-label Gibbs sweep with per-class data and prior terms.

    ``eta_k[i]`` is the node's sparsity term (balance weight times
    log class probability); ``pair_w`` aligns with the adjacency entries.
    Returns inclusion tallies over retained sweeps, the retained count,
    the summed log pseudo-likelihood (0 unless tracked) and the final
    labels.
    """
    n = z.shape[0]
    tally = np.zeros(n, dtype=np.int64)
    order = np.arange(n)
    state = np.uint64(seed)
    state, _ = _next_uniform(state)
    snapshots = 0
    pseudo_sum = 0.0
    for sweep in range(sweeps):
        state = _shuffle(order, state)
        for t in range(n):
            i = order[t]
            if fixed[i]:
                continue
            a0, a1 = _site_logits(i, z, indptr, indices, pair_w,
                                  log_f0, log_f1, eta0, eta1, rho0, rho1)
            d = a0 - a1
            if d > 35.0:
                p1 = 0.0
            elif d < -35.0:
                p1 = 1.0
            else:
                p1 = 1.0 / (1.0 + np.exp(d))
            state, u = _next_uniform(state)
            z[i] = 1 if u < p1 else 0
        if sweep >= burn_in and (sweep - burn_in) % thin == 0:
            snapshots += 1
            for i in range(n):
                tally[i] += z[i]
            if track_pseudo:
                for i in range(n):
                    if fixed[i]:
                        continue
                    a0, a1 = _site_logits(i, z, indptr, indices, pair_w,
                                          log_f0, log_f1, eta0, eta1,
                                          rho0, rho1)
                    d = a0 - a1 if z[i] == 1 else a1 - a0
                    # log p(z_i current | rest) = -log(1 + exp(d))
                    if d > 35.0:
                        pseudo_sum -= d
                    elif d > -35.0:
                        pseudo_sum -= np.log(1.0 + np.exp(d))
    return tally, snapshots, pseudo_sum, z


@njit(cache=True, nogil=True)
def ising_batch(indptr, indices, pair_w, eta0, eta1, rho0, rho1,
                p1_init, sweeps, seeds):
    """Independent label-prior replicates; returns final states (R, n)."""
    n = indptr.shape[0] - 1
    reps = seeds.shape[0]
    out = np.empty((reps, n), dtype=np.uint8)
    zeros = np.zeros(n, dtype=np.float64)
    order = np.arange(n)
    for rep in range(reps):
        state = seeds[rep]
        state, _ = _next_uniform(state)
        z = out[rep]
        for i in range(n):
            state, u = _next_uniform(state)
            z[i] = 1 if u < p1_init else 0
        for _ in range(sweeps):
            state = _shuffle(order, state)
            for t in range(n):
                i = order[t]
                a0, a1 = _site_logits(i, z, indptr, indices, pair_w,
                                      zeros, zeros, eta0, eta1, rho0, rho1)
                d = a0 - a1
                if d > 35.0:
                    p1 = 0.0
                elif d < -35.0:
                    p1 = 1.0
                else:
                    p1 = 1.0 / (1.0 + np.exp(d))
                state, u = _next_uniform(state)
                z[i] = 1 if u < p1 else 0
    return out


def pair_weights_csr(net, omega):
    """Per-adjacency-entry interaction weights (omega_i + omega_j) / 2."""
    n = net.n
    out = np.empty(net.indices.shape[0], dtype=np.float64)
    for i in range(n):
        lo, hi = net.indptr[i], net.indptr[i + 1]
        out[lo:hi] = 0.5 * (omega[i] + omega[net.indices[lo:hi]])
    return out


def seed_to_uint64(seed_sequence) -> np.uint64:
    """One kernel seed from a numpy SeedSequence."""
    return np.uint64(seed_sequence.generate_state(1, np.uint64)[0])
