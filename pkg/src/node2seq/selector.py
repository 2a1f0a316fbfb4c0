"""Neighbor ordering: plain ranking and adaptive non-local selection.

Two code paths produce the same sequences:

* per-node functions (:func:`rank_neighbors`, :func:`select_nodes`) that work
  on one centre node and return a :class:`NeighborSequence`;
* batched functions (:func:`rank_all`, :func:`select_all`) that order every
  node at once and return flat ``(ptr, idx)`` arrays, CSR style.

All orderings sort by score descending and break exact ties by ascending
node id.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SelectorConfig:
    beta: float = 0.0
    ell: int = 2
    enabled: bool = False

    def __post_init__(self):
        if self.ell < 1:
            raise ValueError(f"ell must be >= 1, got {self.ell}")


@dataclass
class NeighborSequence:
    center: int
    indices: np.ndarray
    scores: np.ndarray
    n_local: int = -1       # length of the above-threshold local segment
    n_nonlocal: int = 0     # length of the non-local segment that follows it

    def __len__(self) -> int:
        return int(self.indices.size)


def _order(scores: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    return nodes[np.lexsort((nodes, -scores[nodes]))]


def rank_neighbors(
    scores: np.ndarray, candidates: Iterable[int], center: int = -1
) -> NeighborSequence:
    """Sort ``candidates`` by ``scores[j]`` descending, ties by node id."""
    scores = np.asarray(scores, dtype=np.float64)
    cand = np.unique(np.fromiter(candidates, dtype=np.int64))
    if cand.size == 0:
        raise ValueError(f"node {center} has no candidates to rank")
    if cand[0] < 0 or cand[-1] >= scores.size:
        raise ValueError(f"candidate ids must lie in [0, {scores.size})")
    idx = _order(scores, cand)
    return NeighborSequence(center, idx, scores[idx], n_local=idx.size)


def select_nodes(
    scores: np.ndarray,
    one_hop: Iterable[int],
    within_ell: Iterable[int],
    cfg: SelectorConfig,
    center: int = -1,
) -> NeighborSequence:
    """Swap below-threshold local nodes for the best non-local ones.

    The output always holds ``k = |one_hop|`` nodes: locals scoring strictly
    above ``cfg.beta`` (best first), then the top-scoring nodes of
    ``within_ell - one_hop``, then, if that pool ran dry, the rejected locals
    best first.
    """
    scores = np.asarray(scores, dtype=np.float64)
    local = np.unique(np.fromiter(one_hop, dtype=np.int64))
    if local.size == 0:
        raise ValueError(f"node {center} has an empty 1-hop set")
    pool = np.setdiff1d(np.fromiter(within_ell, dtype=np.int64), local)
    k = local.size
    passing = scores[local] > cfg.beta
    kept = _order(scores, local[passing])
    need = k - kept.size
    far = _order(scores, pool)[:need]
    refill = _order(scores, local[~passing])[: need - far.size]
    idx = np.concatenate([kept, far, refill])
    return NeighborSequence(center, idx, scores[idx], n_local=kept.size, n_nonlocal=far.size)


# --------------------------------------------------------------------------
# batched
# --------------------------------------------------------------------------


def pair_scores(xbar: np.ndarray, pattern: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row ids, column ids and dot-product scores for every stored pair."""
    rows = np.repeat(np.arange(pattern.shape[0]), np.diff(pattern.indptr))
    cols = pattern.indices.astype(np.int64)
    s = np.einsum("ij,ij->i", xbar[rows], xbar[cols])
    return rows, cols, s


def rank_all(xbar: np.ndarray, adj_self: sp.csr_matrix) -> tuple[np.ndarray, np.ndarray]:
    """Rank every node's self-looped 1-hop neighborhood."""
    rows, cols, s = pair_scores(xbar, adj_self)
    order = np.lexsort((cols, -s, rows))
    return adj_self.indptr.astype(np.int64), cols[order]


def _rank_in_group(keys: np.ndarray) -> np.ndarray:
    """0-based position of each element inside its run of equal sorted keys."""
    n = keys.size
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, keys[1:] != keys[:-1]])
    run_len = np.diff(np.r_[starts, n])
    return np.arange(n) - np.repeat(starts, run_len)


def select_all(
    xbar: np.ndarray,
    adj_self: sp.csr_matrix,
    reach: sp.csr_matrix,
    beta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Batched :func:`select_nodes` for every node.

    ``reach`` is the within-ell pattern (it must contain ``adj_self``).
    """
    n = adj_self.shape[0]
    rows, cols, s = pair_scores(xbar, reach)
    local_keys = np.repeat(np.arange(n, dtype=np.int64), np.diff(adj_self.indptr)) * n + adj_self.indices
    is_local = np.isin(rows * n + cols, local_keys, assume_unique=True)
    # 0: local above threshold, 1: non-local pool, 2: rejected local
    cat = np.where(is_local, np.where(s > beta, 0, 2), 1).astype(np.int64)
    order = np.lexsort((cols, -s, cat, rows))
    rows, cols, cat = rows[order], cols[order], cat[order]
    pos = _rank_in_group(rows * 3 + cat)

    k = np.diff(adj_self.indptr).astype(np.int64)
    m = np.bincount(rows[cat == 0], minlength=n)
    pool = np.bincount(rows[cat == 1], minlength=n)
    take_far = np.minimum(pool, k - m)
    take_refill = k - m - take_far
    keep = (cat == 0) | ((cat == 1) & (pos < take_far[rows])) | ((cat == 2) & (pos < take_refill[rows]))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(k, out=ptr[1:])
    return ptr, cols[keep]
