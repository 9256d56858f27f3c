"""Network-level metric time series over a snapshot series.

Growth counts, average degree, sampled average path length, average
clustering coefficient and degree assortativity.  All functions are read-only
over immutable snapshots.
"""

from __future__ import annotations

import csv
import enum
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ._bfs import bfs_distances
from .errors import DegenerateInputError, DynGraphError
from .store import GraphSnapshot


class Metric(enum.Enum):
    NewNodes = "NewNodes"
    NewEdges = "NewEdges"
    RelativeGrowth = "RelativeGrowth"
    AvgDegree = "AvgDegree"
    AvgPathLength = "AvgPathLength"
    AvgClustering = "AvgClustering"
    Assortativity = "Assortativity"


@dataclass
class MetricSeries:
    """Points ``(day, value)`` of one metric.

    ``flags`` marks points whose value is undefined (stored as NaN); ``subject``
    distinguishes node and edge variants of the growth metrics.
    """

    metric: Metric
    days: np.ndarray
    values: np.ndarray
    flags: np.ndarray = field(default=None)
    subject: str = ""

    def __post_init__(self):
        self.days = np.asarray(self.days, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        if self.flags is None:
            self.flags = np.isnan(self.values)
        else:
            self.flags = np.asarray(self.flags, dtype=bool)

    @property
    def name(self) -> str:
        return f"{self.metric.value}:{self.subject}" if self.subject else self.metric.value

    @property
    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.days.tolist(), self.values.tolist()))

    def __len__(self) -> int:
        return len(self.days)

    def rows(self):
        for d, val, flag in zip(self.days.tolist(), self.values.tolist(), self.flags.tolist()):
            yield d, self.name, "" if flag else repr(float(val)), int(flag)


def write_series_csv(series: Sequence[MetricSeries], fh) -> None:
    """Write ``day,metric,value,flag`` rows; flagged points have an empty value."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["day", "metric", "value", "flag"])
    for s in series:
        w.writerows(s.rows())


class Growth(NamedTuple):
    new_nodes: MetricSeries
    new_edges: MetricSeries
    relative_nodes: MetricSeries
    relative_edges: MetricSeries


def _growth_from_sizes(days, nodes, edges) -> Growth:
    days = np.asarray(days)[1:]
    out = []
    rel = []
    for sizes, subject in ((np.asarray(nodes, float), "nodes"), (np.asarray(edges, float), "edges")):
        new = np.diff(sizes)
        prev = sizes[:-1]
        zero = prev == 0
        ratio = np.divide(new, prev, out=np.zeros_like(new), where=~zero)
        out.append(MetricSeries(Metric.NewNodes if subject == "nodes" else Metric.NewEdges,
                                days, new, np.zeros(len(new), bool)))
        # zero previous size: value 0, flagged
        rel.append(MetricSeries(Metric.RelativeGrowth, days, ratio, zero, subject=subject))
    return Growth(out[0], out[1], rel[0], rel[1])


def growth_series(snapshots: Sequence[GraphSnapshot]) -> Growth:
    """Per-interval new node/edge counts and growth relative to the previous size."""
    if len(snapshots) < 2:
        raise DegenerateInputError("growth needs at least two snapshots")
    return _growth_from_sizes([s.day for s in snapshots],
                              [s.node_count for s in snapshots],
                              [s.edge_count for s in snapshots])


def avg_degree(snapshot: GraphSnapshot) -> float:
    if snapshot.node_count == 0:
        raise DegenerateInputError("empty graph")
    return 2.0 * snapshot.edge_count / snapshot.node_count


def largest_component(snapshot: GraphSnapshot) -> np.ndarray:
    """Dense indices of the largest connected component (lowest label on ties)."""
    if snapshot.node_count == 0:
        raise DegenerateInputError("empty graph")
    _, labels = connected_components(snapshot.adjacency, directed=False)
    sizes = np.bincount(labels)
    return np.flatnonzero(labels == np.argmax(sizes))


def avg_path_length(snapshot: GraphSnapshot, sample_size: int = 1000, seed: int = 0) -> float:
    """Sampled average shortest-path length inside the largest connected component.

    Sources are drawn uniformly without replacement from the component; each
    contributes the mean BFS distance to every other component node.  With
    ``sample_size`` at least the component size the result is exact.
    """
    comp = largest_component(snapshot)
    if comp.size < 2:
        raise DegenerateInputError("degenerate component")
    rng = np.random.default_rng(seed)
    if sample_size >= comp.size:
        sources = comp
    else:
        sources = rng.choice(comp, size=sample_size, replace=False)
    adj = snapshot.adjacency
    means = np.empty(len(sources))
    for i, s in enumerate(sources):
        dist = bfs_distances(adj, [s])
        means[i] = dist[comp].sum() / (comp.size - 1)
    return float(means.mean())


def triangle_counts(snapshot: GraphSnapshot, block_nnz: int = 20_000_000) -> np.ndarray:
    """Number of triangles through each node.

    Edges are oriented from lower to higher (degree, index) rank so every
    triangle a<b<c is seen once; products are evaluated in row blocks to
    bound memory.
    """
    n = snapshot.node_count
    tri = np.zeros(n, dtype=np.int64)
    if snapshot.edge_count == 0:
        return tri
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((np.arange(n), snapshot.degree))] = np.arange(n)
    a, b = snapshot.edge_u.astype(np.int64), snapshot.edge_v.astype(np.int64)
    swap = rank[a] > rank[b]
    lo = np.where(swap, b, a)
    hi = np.where(swap, a, b)
    L = sp.csr_matrix((np.ones(len(lo), np.int64), (lo, hi)), shape=(n, n))
    Lt = L.T.tocsr()
    outdeg = np.diff(L.indptr)
    # rows are processed in blocks whose estimated product size stays under budget
    for left in (L, Lt):
        row_cost = np.bincount(np.repeat(np.arange(n), np.diff(left.indptr)),
                               weights=outdeg[left.indices], minlength=n).astype(np.int64)
        bounds = _blocks(np.cumsum(row_cost), block_nnz)
        for r0, r1 in bounds:
            blk = left[r0:r1]
            prod = (blk @ L).multiply(L[r0:r1])
            if left is L:
                # (L L) o L: row = lowest vertex, column = highest vertex
                tri[r0:r1] += np.asarray(prod.sum(axis=1)).ravel()
                tri += np.asarray(prod.sum(axis=0)).ravel()
            else:
                # (L^T L) o L: row = middle vertex
                tri[r0:r1] += np.asarray(prod.sum(axis=1)).ravel()
    return tri


def _blocks(cum_cost: np.ndarray, budget: int):
    n = len(cum_cost)
    r0 = 0
    while r0 < n:
        base = cum_cost[r0 - 1] if r0 else 0
        r1 = int(np.searchsorted(cum_cost, base + budget, side="right"))
        r1 = max(r1, r0 + 1)
        yield r0, min(r1, n)
        r0 = r1


def local_clustering(snapshot: GraphSnapshot) -> np.ndarray:
    """Local clustering coefficient per node; 0 for degree below 2."""
    tri = triangle_counts(snapshot).astype(float)
    deg = snapshot.degree.astype(float)
    pairs = deg * (deg - 1) / 2.0
    return np.divide(tri, pairs, out=np.zeros_like(tri), where=pairs > 0)


def avg_clustering(snapshot: GraphSnapshot, include_low_degree: bool = True) -> float:
    """Mean local clustering coefficient.

    Nodes of degree < 2 count as 0 by default; with
    ``include_low_degree=False`` they are left out of the mean instead.
    """
    if snapshot.node_count == 0:
        return 0.0
    cc = local_clustering(snapshot)
    if not include_low_degree:
        cc = cc[snapshot.degree >= 2]
        if cc.size == 0:
            return 0.0
    return float(cc.mean())


def assortativity(snapshot: GraphSnapshot) -> float:
    """Pearson correlation of endpoint degrees over both orientations of every edge."""
    if snapshot.edge_count == 0:
        raise DegenerateInputError("undefined assortativity: no edges")
    deg = snapshot.degree.astype(float)
    x = np.concatenate([deg[snapshot.edge_u], deg[snapshot.edge_v]])
    y = np.concatenate([deg[snapshot.edge_v], deg[snapshot.edge_u]])
    xc = x - x.mean()
    var = float(xc @ xc)
    if var <= 0.0:
        raise DegenerateInputError("undefined assortativity: zero degree variance")
    yc = y - y.mean()
    return float((xc @ yc) / np.sqrt(var * float(yc @ yc)))


def _guarded(fn, *args, **kwargs) -> float:
    try:
        return fn(*args, **kwargs)
    except DynGraphError:
        return float("nan")


def metric_series(snapshots: Iterable[GraphSnapshot], path_sample: int = 1000, seed: int = 0,
                  path_every: int = 1, include_low_degree: bool = True,
                  threads: int = 1) -> dict[Metric, list[MetricSeries]]:
    """All seven metric series over ``snapshots``.

    Snapshots are consumed in order and released after use, so an iterator
    keeps at most ``threads`` of them alive.  Path length is computed on
    every ``path_every``-th snapshot only.  Values that are undefined on a
    snapshot are flagged rather than raised.
    """
    def per_snapshot(k_snap):
        k, snap = k_snap
        row = (
            snap.day, snap.node_count, snap.edge_count,
            _guarded(avg_degree, snap),
            _guarded(avg_clustering, snap, include_low_degree),
            _guarded(assortativity, snap),
            _guarded(avg_path_length, snap, path_sample, seed + k) if k % path_every == 0 else None,
        )
        snap.drop_cache()
        return row

    rows = []
    numbered = enumerate(snapshots)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while chunk := list(itertools.islice(numbered, threads)):
                rows.extend(pool.map(per_snapshot, chunk))
    else:
        rows = [per_snapshot(ks) for ks in numbered]

    days = [r[0] for r in rows]
    out: dict[Metric, list[MetricSeries]] = {}
    if len(rows) >= 2:
        g = _growth_from_sizes(days, [r[1] for r in rows], [r[2] for r in rows])
        out[Metric.NewNodes] = [g.new_nodes]
        out[Metric.NewEdges] = [g.new_edges]
        out[Metric.RelativeGrowth] = [g.relative_nodes, g.relative_edges]
    else:
        empty = np.zeros(0)
        out[Metric.NewNodes] = [MetricSeries(Metric.NewNodes, empty, empty)]
        out[Metric.NewEdges] = [MetricSeries(Metric.NewEdges, empty, empty)]
        out[Metric.RelativeGrowth] = [MetricSeries(Metric.RelativeGrowth, empty, empty, subject=s)
                                      for s in ("nodes", "edges")]
    out[Metric.AvgDegree] = [MetricSeries(Metric.AvgDegree, days, [r[3] for r in rows])]
    out[Metric.AvgClustering] = [MetricSeries(Metric.AvgClustering, days, [r[4] for r in rows])]
    out[Metric.Assortativity] = [MetricSeries(Metric.Assortativity, days, [r[5] for r in rows])]
    pl = [(d, r[6]) for d, r in zip(days, rows) if r[6] is not None]
    out[Metric.AvgPathLength] = [MetricSeries(Metric.AvgPathLength, [p[0] for p in pl],
                                              [p[1] for p in pl])]
    return out
