"""Recurrence matrices, Louvain/consensus community detection and element-centric similarity."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .seeding import derive_seed, make_rng

MOVE_TOL = 1e-12
MAX_CONSENSUS_ITER = 50


class ConsensusWarning(RuntimeWarning):
    """Consensus clustering stopped before the co-classification matrix became binary."""


def relabel(labels) -> np.ndarray:
    """Map community ids to 0..k-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv].astype(np.int64)


def recurrence_matrix(sig) -> np.ndarray:
    """Frame-by-frame Pearson correlation of a T x F signal matrix.

    Pairs involving a zero-variance frame get correlation 0; the diagonal is 1.
    """
    sig = np.asarray(sig, dtype=float)
    if sig.ndim != 2 or sig.shape[1] < 2:
        raise ValueError("recurrence needs at least 2 features per frame")
    if sig.shape[0] < 3:
        raise ValueError("recurrence needs at least 3 frames")
    centered = sig - sig.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    flat = norms == 0
    if np.any(flat):
        warnings.warn(f"{int(flat.sum())} zero-variance frames; their correlations set to 0",
                      RuntimeWarning, stacklevel=2)
    unit = np.divide(centered, norms[:, None], out=np.zeros_like(centered), where=~flat[:, None])
    r = unit @ unit.T
    r = np.clip(0.5 * (r + r.T), -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    return r


def percentile_nearest_rank(values, pct: float) -> float:
    v = np.sort(np.asarray(values, dtype=float).ravel())
    rank = max(1, math.ceil(round(pct / 100.0 * v.size, 9)))
    return float(v[rank - 1])


def binarize_percentile(r, pct: float = 95.0) -> np.ndarray:
    """1 where an off-diagonal entry is strictly above the nearest-rank percentile, else 0."""
    r = np.asarray(r, dtype=float)
    if not 0 < pct < 100:
        raise ValueError(f"percentile must lie in (0, 100), got {pct}")
    iu = np.triu_indices(r.shape[0], k=1)
    upper = r[iu]
    if upper.size == 0 or np.all(upper == upper[0]):
        raise ValueError("degenerate threshold")
    thr = percentile_nearest_rank(upper, pct)
    out = np.zeros_like(r)
    out[iu] = (upper > thr).astype(float)
    return out + out.T


def modularity(adj, labels) -> float:
    """Newman-Girvan modularity at resolution 1 (self-loops counted once on the diagonal)."""
    a = np.asarray(adj, dtype=float)
    labels = np.asarray(labels)
    m2 = a.sum()
    if m2 == 0:
        return 0.0
    k = a.sum(axis=1)
    _, inv = np.unique(labels, return_inverse=True)
    onehot = np.zeros((a.shape[0], inv.max() + 1))
    onehot[np.arange(a.shape[0]), inv] = 1.0
    internal = np.einsum("ic,ij,jc->", onehot, a, onehot)
    tot = onehot.T @ k
    return float(internal / m2 - np.sum(tot ** 2) / m2 ** 2)


DENSE_DEGREE = 48


def _adjacency_lists(a: np.ndarray):
    nbrs = []
    for i in range(a.shape[0]):
        idx = np.flatnonzero(a[i])
        idx = idx[idx != i]
        nbrs.append(list(zip(idx.tolist(), a[i, idx].tolist())))
    return nbrs


def _local_moves(a, order, comm, m2):
    """Greedy single-node moves until no move raises modularity; edits ``comm`` in place.

    Besides neighbouring communities a node may also move to an empty one.
    Candidate communities are scanned in increasing id order.  Returns True if
    any node moved.
    """
    n = a.shape[0]
    k = a.sum(axis=1)
    dense = np.count_nonzero(a) > DENSE_DEGREE * n
    if dense:
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        comm_arr = np.asarray(comm, dtype=np.int64)
        tot_arr = np.bincount(comm_arr, weights=k, minlength=n)
    else:
        nbrs = _adjacency_lists(a)
    k = k.tolist()
    tot = [0.0] * n
    size = [0] * n
    for i in range(n):
        tot[comm[i]] += k[i]
        size[comm[i]] += 1
    free = [c for c in range(n - 1, -1, -1) if size[c] == 0]
    tol = MOVE_TOL * m2
    any_move = False
    while True:
        moved = False
        for i in order:
            ci = comm[i]
            ki = k[i]
            tot[ci] -= ki
            size[ci] -= 1
            if dense:
                row = off[i]
                links = np.bincount(comm_arr, weights=row, minlength=n)
                present = links > 0
                tot_arr[ci] -= ki
                gains = links - tot_arr * ki / m2
                stay = gains[ci]
                gains[~present] = -np.inf
                gains[ci] = -np.inf
                c = int(np.argmax(gains))
                best, best_gain = (c, gains[c]) if gains[c] > stay + tol else (ci, stay)
            else:
                links = {}
                for j, w in nbrs[i]:
                    c = comm[j]
                    links[c] = links.get(c, 0.0) + w
                best = ci
                best_gain = links.get(ci, 0.0) - tot[ci] * ki / m2
                for c in sorted(links):
                    if c == ci:
                        continue
                    g = links[c] - tot[c] * ki / m2
                    if g > best_gain + tol:
                        best, best_gain = c, g
            if best == ci and size[ci] > 0 and best_gain < -tol and free:
                best = free.pop()
            tot[best] += ki
            size[best] += 1
            if dense:
                tot_arr[best] += ki
                comm_arr[i] = best
            if best != ci:
                comm[i] = best
                moved = True
                any_move = True
                if size[ci] == 0:
                    tot[ci] = 0.0
                    if dense:
                        tot_arr[ci] = 0.0
                    free.append(ci)
        if not moved:
            return any_move


def louvain(adj, seed: int = 0) -> np.ndarray:
    """Louvain modularity maximisation with a seeded node visit order.

    Levels alternate greedy local moves with community aggregation until a
    level moves nothing; a last round of local moves on the input graph
    guarantees no single-node move can improve the result.
    """
    a = np.asarray(adj, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape != (n, n):
        raise ValueError("adjacency must be square")
    if np.any(a < 0):
        raise ValueError("louvain needs nonnegative weights")
    a = a.copy()
    np.fill_diagonal(a, 0.0)
    m2 = float(a.sum())
    if m2 == 0:
        return np.arange(n, dtype=np.int64)
    rng = make_rng(seed)
    membership = np.arange(n)
    level = a
    while True:
        order = rng.permutation(level.shape[0]).tolist()
        comm = list(range(level.shape[0]))
        moved = _local_moves(level, order, comm, m2)
        comm = relabel(comm)
        membership = comm[membership]
        if not moved or comm.max() + 1 == level.shape[0]:
            break
        onehot = np.zeros((level.shape[0], comm.max() + 1))
        onehot[np.arange(level.shape[0]), comm] = 1.0
        level = onehot.T @ level @ onehot
    comm = membership.tolist()
    order = rng.permutation(n).tolist()
    _local_moves(a, order, comm, m2)
    return relabel(comm)


def coclassification(partitions) -> np.ndarray:
    """Fraction of partitions placing each pair of elements together (zero diagonal)."""
    parts = np.asarray(partitions)
    d = np.zeros((parts.shape[1], parts.shape[1]))
    for p in parts:
        d += p[:, None] == p[None, :]
    d /= parts.shape[0]
    np.fill_diagonal(d, 0.0)
    return d


def consensus_cluster(adj, n_runs: int = 100, seed: int = 0,
                      max_iter: int = MAX_CONSENSUS_ITER) -> np.ndarray:
    """Consensus Louvain partition.

    Louvain is run ``n_runs`` times; the co-classification frequencies become
    the next input graph until every frequency is 0 or 1.  If that does not
    happen within ``max_iter`` rounds a :class:`ConsensusWarning` is issued and
    the last partition returned.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    current = np.asarray(adj, dtype=float)
    parts = None
    for it in range(max_iter):
        parts = [louvain(current, derive_seed(seed, it, r)) for r in range(n_runs)]
        d = coclassification(parts)
        if np.all((d == 0) | (d == 1)):
            return parts[0]
        current = d
    warnings.warn(f"consensus not reached after {max_iter} iterations", ConsensusWarning, stacklevel=2)
    return parts[-1]


def element_centric_similarity(p1, p2, alpha: float = 0.9) -> float:
    """Mean per-element agreement of cluster-induced affinity vectors.

    For element i, a_i(j) = alpha/|C(i)| on its cluster C(i) plus (1 - alpha)
    at j = i; S_i = 1 - sum_j |a1_i(j) - a2_i(j)| / (2 alpha).  Evaluated in
    closed form from the contingency table.
    """
    p1 = np.asarray(p1)
    p2 = np.asarray(p2)
    if p1.shape != p2.shape:
        raise ValueError(f"partition lengths differ: {p1.shape[0]} vs {p2.shape[0]}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if p1.size == 0:
        raise ValueError("empty partitions")
    _, l1 = np.unique(p1, return_inverse=True)
    _, l2 = np.unique(p2, return_inverse=True)
    table = np.zeros((l1.max() + 1, l2.max() + 1))
    np.add.at(table, (l1, l2), 1.0)
    n1 = table.sum(axis=1)[l1]
    n2 = table.sum(axis=0)[l2]
    both = table[l1, l2]
    a1 = alpha / n1
    a2 = alpha / n2
    dist = both * np.abs(a1 - a2) + (n1 - both) * a1 + (n2 - both) * a2
    scores = 1.0 - dist / (2.0 * alpha)
    return float(np.clip(scores.mean(), 0.0, 1.0))


@dataclass
class BootstrapResult:
    mean: float
    std: float
    per_sample: list = field(default_factory=list)
    partitions: list = field(default_factory=list, repr=False)
    samples: list = field(default_factory=list, repr=False)


def cluster_signal(sig, pct: float = 95.0, n_runs: int = 100, seed: int = 0) -> np.ndarray:
    """recurrence -> percentile binarization -> consensus Louvain."""
    return consensus_cluster(binarize_percentile(recurrence_matrix(sig), pct), n_runs, seed)


def bootstrap_ecs(recordings, truth, n_boot: int = 10, sample_size: int | None = None,
                  seed: int = 0, pct: float = 95.0, n_runs: int = 100,
                  alpha: float = 0.9) -> BootstrapResult:
    """ECS against ``truth`` of consensus partitions on resampled recording sets.

    Every resample draws ``sample_size`` recordings without replacement
    (resample ``b`` uses seed ``seed + b``) and stacks them feature-wise.
    """
    if not recordings:
        raise ValueError("no recordings to bootstrap")
    sample_size = len(recordings) if sample_size is None else sample_size
    if not 1 <= sample_size <= len(recordings):
        raise ValueError(f"sample_size must lie in [1, {len(recordings)}]")
    truth = np.asarray(truth)
    scores, parts, samples = [], [], []
    for b in range(n_boot):
        rng = make_rng(seed + b)
        pick = np.sort(rng.choice(len(recordings), size=sample_size, replace=False))
        sig = np.hstack([np.asarray(recordings[i], dtype=float) for i in pick])
        part = cluster_signal(sig, pct, n_runs, derive_seed(seed + b, "consensus"))
        scores.append(element_centric_similarity(part, truth, alpha))
        parts.append(part)
        samples.append(pick.tolist())
    s = np.asarray(scores)
    return BootstrapResult(float(s.mean()), float(s.std()), scores, parts, samples)


def permutation_null(partitions, truth, n_perm: int = 100, seed: int = 0, alpha: float = 0.9):
    """ECS of each partition against frame-permuted copies of ``truth``; returns (mean, std, values)."""
    rng = make_rng(seed)
    truth = np.asarray(truth)
    vals = []
    for part in partitions:
        for _ in range(n_perm):
            vals.append(element_centric_similarity(part, rng.permutation(truth), alpha))
    v = np.asarray(vals)
    return float(v.mean()), float(v.std()), vals
