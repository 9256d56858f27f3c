"""Two-phase modularity optimization (local moves, then aggregation).

The optimizer works on a weighted symmetric CSR matrix whose diagonal holds
intra-node weight of aggregated nodes (counted twice, i.e. ``A_ii = sum of
A_jk`` over the members).  Node strength is the full row sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateInputError
from .store import GraphSnapshot

DEFAULT_DELTA = 0.04
_EPS = 1e-12


@dataclass
class CommunityPartition:
    """Community label per dense node index of one snapshot.

    Labels are canonical: communities are numbered in order of their
    smallest member index.
    """

    labels: np.ndarray
    modularity: float
    delta: float
    node_ids: np.ndarray
    edge_count: int
    snapshot_index: int = 0

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def n_communities(self) -> int:
        return int(self.labels.max()) + 1 if len(self.labels) else 0

    @property
    def assignment(self) -> dict[int, int]:
        return dict(zip(self.node_ids.tolist(), self.labels.tolist()))

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_communities)

    def members(self) -> list[np.ndarray]:
        """Dense member indices of every community, in label order."""
        order = np.argsort(self.labels, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)


def canonical_labels(labels) -> np.ndarray:
    """Relabel so communities are numbered by first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse.ravel()]


def modularity(adj: sp.spmatrix | GraphSnapshot, labels) -> float:
    """``Q = sum_c (e_c / m - (d_c / 2m)^2)`` for an undirected (weighted) graph."""
    if isinstance(adj, GraphSnapshot):
        adj = adj.adjacency
    adj = sp.csr_matrix(adj, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    two_m = float(adj.sum())
    if two_m == 0:
        return 0.0
    coo = adj.tocoo()
    same = labels[coo.row] == labels[coo.col]
    inside = float(coo.data[same].sum())
    strength = np.asarray(adj.sum(axis=1)).ravel()
    tot = np.bincount(labels, weights=strength)
    return inside / two_m - float((tot / two_m) @ (tot / two_m))


def _local_moves(indptr, indices, weights, strength, two_m, comm, order, delta,
                 audit=None) -> float:
    """Sweep nodes in ``order`` moving each to its best neighbouring community.

    Sweeps repeat while a sweep's modularity gain is at least ``delta``.
    Returns the total gain.  ``audit(comm)`` is called after every move when
    given and must see a strictly larger modularity each time.
    """
    tot = [0.0] * len(comm)
    for i, c in enumerate(comm):
        tot[c] += strength[i]
    total = 0.0
    last_q = audit(comm) if audit else None
    while True:
        sweep = 0.0
        moves = 0
        for i in order:
            ci = comm[i]
            ki = strength[i]
            neigh: dict[int, float] = {}
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:
                    c = comm[j]
                    neigh[c] = neigh.get(c, 0.0) + weights[p]
            tot[ci] -= ki
            base = neigh.get(ci, 0.0) - tot[ci] * ki / two_m
            best, best_gain = ci, base
            for c, w in neigh.items():
                g = w - tot[c] * ki / two_m
                if g > best_gain + _EPS:
                    best, best_gain = c, g
            tot[best] += ki
            if best != ci:
                comm[i] = best
                sweep += 2.0 * (best_gain - base) / two_m
                moves += 1
                if audit:
                    q = audit(comm)
                    if not q > last_q:
                        raise AssertionError(f"move of node {i} did not increase modularity")
                    last_q = q
        total += sweep
        if moves == 0 or sweep < delta:
            return total


def _aggregate(adj: sp.csr_matrix, comm: np.ndarray, k: int) -> sp.csr_matrix:
    P = sp.csr_matrix((np.ones(len(comm)), (np.arange(len(comm)), comm)), shape=(len(comm), k))
    out = (P.T @ adj @ P).tocsr()
    out.sort_indices()
    return out


def louvain(snapshot: GraphSnapshot, delta: float = DEFAULT_DELTA, seed: int = 0,
            init: CommunityPartition | None = None, audit: bool = False,
            snapshot_index: int = 0, warm: str = "dissolve") -> CommunityPartition:
    """Partition ``snapshot`` by modularity optimization.

    Each pass runs local-move sweeps and then aggregates communities into
    single nodes; optimization stops after the first pass whose total
    modularity gain is below ``delta``.  Node visit order is a seeded
    permutation.

    With ``init`` from an earlier snapshot of the same log, communities that
    no new edge touches keep their assignment; members of touched
    communities and new nodes restart as singletons.  If nothing changed
    since ``init`` it is returned as is.  ``warm="bootstrap"`` keeps every
    old node's ``init`` label instead and only new nodes start alone.

    ``audit=True`` re-evaluates modularity after every move (slow).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if warm not in ("dissolve", "bootstrap"):
        raise ValueError(f"unknown warm start {warm!r}")
    n = snapshot.node_count
    if n == 0:
        raise DegenerateInputError("empty snapshot")
    if init is not None:
        if init.node_count > n or init.edge_count > snapshot.edge_count:
            raise ValueError("init partition is not from an earlier snapshot of this log")
        if init.node_count == n and init.edge_count == snapshot.edge_count:
            return CommunityPartition(init.labels.copy(), init.modularity, delta,
                                      snapshot.node_ids, snapshot.edge_count, snapshot_index)
    rng = np.random.default_rng(seed)
    base_adj = snapshot.adjacency.astype(float)
    two_m = float(base_adj.sum())

    if init is None:
        start = np.arange(n)
    else:
        old = init.node_count
        dirty = np.zeros(init.n_communities, dtype=bool)
        new_u = snapshot.edge_u[init.edge_count:]
        new_v = snapshot.edge_v[init.edge_count:]
        touched = np.concatenate([new_u, new_v])
        touched = touched[touched < old]
        if warm == "dissolve":
            dirty[init.labels[touched]] = True
        start = np.empty(n, dtype=np.int64)
        start[:old] = init.labels
        restart = np.concatenate([np.flatnonzero(dirty[init.labels]), np.arange(old, n)])
        start[restart] = init.n_communities + np.arange(len(restart))
        start = canonical_labels(start)

    if two_m == 0:
        labels = canonical_labels(start)
        return CommunityPartition(labels, 0.0, delta, snapshot.node_ids, snapshot.edge_count,
                                  snapshot_index)

    node_to_level = start.copy()  # original node -> node of current level
    adj = _aggregate(base_adj, start, int(start.max()) + 1)
    comm = list(range(adj.shape[0]))
    while True:
        strength = np.asarray(adj.sum(axis=1)).ravel().tolist()
        order = rng.permutation(adj.shape[0]).tolist()
        audit_fn = None
        if audit:
            level_map = node_to_level
            audit_fn = lambda c: modularity(base_adj, np.asarray(c)[level_map])  # noqa: E731
        gain = _local_moves(adj.indptr.tolist(), adj.indices.tolist(), adj.data.tolist(),
                            strength, two_m, comm, order, delta, audit_fn)
        c = canonical_labels(comm)
        k = int(c.max()) + 1
        node_to_level = c[node_to_level]
        if gain < delta or k == adj.shape[0]:
            break
        adj = _aggregate(adj, c, k)
        comm = list(range(k))
    labels = canonical_labels(node_to_level)
    return CommunityPartition(labels, modularity(base_adj, labels), delta, snapshot.node_ids,
                              snapshot.edge_count, snapshot_index)
