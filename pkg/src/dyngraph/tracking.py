"""Community lineages across a snapshot series.

Communities of consecutive partitions are linked by Jaccard similarity of
their member sets.  Each community's best successor and best predecessor
(highest Jaccard above a floor) define candidate links; links are matched
greedily by decreasing similarity into continuations, and the leftovers
become births by split, deaths by merge, or plain births and dissolutions.
"""

from __future__ import annotations

import enum
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateInputError
from .louvain import DEFAULT_DELTA, CommunityPartition, louvain
from .store import EventLog, GraphSnapshot

DEFAULT_MIN_SIZE = 10
DEFAULT_FLOOR = 0.1


class EventType(enum.Enum):
    Birth = "Birth"
    Death = "Death"
    Merge = "Merge"
    Split = "Split"
    Dissolve = "Dissolve"  # death without a merge: below floor or min_size


@dataclass(frozen=True)
class EvolutionEvent:
    kind: EventType
    snapshot: int
    other: int | None = None  # lineage merged into / split from

    def as_dict(self) -> dict:
        d = {"kind": self.kind.value, "snapshot": self.snapshot}
        if self.other is not None:
            d["other"] = self.other
        return d


@dataclass(frozen=True)
class CommunityMatch:
    source: tuple[int, int]  # (snapshot, community label)
    target: tuple[int, int]
    jaccard: float


@dataclass
class CommunityTimeline:
    """One lineage: its community label and members at every snapshot it lives in."""

    lineage_id: int
    birth: int
    labels: dict[int, int] = field(default_factory=dict)
    members: dict[int, np.ndarray] = field(default_factory=dict)
    events: list[EvolutionEvent] = field(default_factory=list)
    death: int | None = None

    @property
    def last_alive(self) -> int:
        return max(self.labels)

    @property
    def lifetime(self) -> int:
        """Snapshots between birth and the last snapshot the lineage is alive in."""
        return self.last_alive - self.birth

    @property
    def censored(self) -> bool:
        """Alive at the end of the data rather than dead."""
        return self.death is None

    def sizes(self) -> list[int]:
        return [len(self.members[k]) for k in sorted(self.members)]

    def to_json(self) -> str:
        return json.dumps({
            "lineage_id": self.lineage_id,
            "birth": self.birth,
            "death": self.death,
            "events": [e.as_dict() for e in self.events],
            "sizes": self.sizes(),
        }, sort_keys=True)


@dataclass
class Transition:
    """Matching outcome between snapshot ``index`` and ``index + 1``."""

    index: int
    matches: list[CommunityMatch]
    continuations: list[tuple[int, int, float]]
    merges: list[tuple[int, list[int]]]  # successor label, predecessors pointing at it
    splits: list[tuple[int, list[int]]]  # predecessor label, successors pointing at it


@dataclass
class Tracking:
    partitions: list[CommunityPartition]
    timelines: list[CommunityTimeline]
    transitions: list[Transition]
    days: list[int]
    min_size: int

    def write_timelines(self, fh) -> None:
        for t in self.timelines:
            fh.write(t.to_json() + "\n")


def jaccard(a: Iterable, b: Iterable) -> float:
    a, b = set(a), set(b)
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def _overlaps(prev: CommunityPartition, cur: CommunityPartition):
    """Sparse intersection counts between communities of two partitions of one log."""
    n = prev.node_count
    inter = sp.coo_matrix((np.ones(n), (prev.labels, cur.labels[:n])),
                          shape=(prev.n_communities, cur.n_communities)).tocsr()
    inter.sum_duplicates()
    return inter.tocoo()


def match_partitions(prev: CommunityPartition, cur: CommunityPartition, index: int,
                     min_size: int = DEFAULT_MIN_SIZE, floor: float = DEFAULT_FLOOR) -> Transition:
    """Best-link matching between two consecutive partitions.

    Only communities of at least ``min_size`` members take part.  Ties in
    similarity go to the larger community, then to the lower label.
    """
    sa, sb = prev.sizes(), cur.sizes()
    inter = _overlaps(prev, cur)
    a, b, c = inter.row, inter.col, inter.data
    keep = (sa[a] >= min_size) & (sb[b] >= min_size)
    a, b, c = a[keep], b[keep], c[keep]
    j = c / (sa[a] + sb[b] - c)
    ok = j >= floor
    a, b, j = a[ok], b[ok], j[ok]
    matches = [CommunityMatch((index, int(x)), (index + 1, int(y)), float(z))
               for x, y, z in zip(a, b, j)]

    best_succ: dict[int, tuple] = {}
    best_pred: dict[int, tuple] = {}
    for x, y, z in zip(a.tolist(), b.tolist(), j.tolist()):
        key_s = (z, int(sb[y]), -y)
        if x not in best_succ or key_s > best_succ[x][0]:
            best_succ[x] = (key_s, y)
        key_p = (z, int(sa[x]), -x)
        if y not in best_pred or key_p > best_pred[y][0]:
            best_pred[y] = (key_p, x)
    s_of = {x: v[1] for x, v in best_succ.items()}
    p_of = {y: v[1] for y, v in best_pred.items()}
    jac = {(x, y): z for x, y, z in zip(a.tolist(), b.tolist(), j.tolist())}

    links = set((x, y) for x, y in s_of.items()) | set((x, y) for y, x in p_of.items())
    order = sorted(links, key=lambda l: (-jac[l], -int(sb[l[1]]), -int(sa[l[0]]), l[0], l[1]))
    used_a: set[int] = set()
    used_b: set[int] = set()
    cont = []
    for x, y in order:
        if x not in used_a and y not in used_b:
            used_a.add(x)
            used_b.add(y)
            cont.append((x, y, jac[(x, y)]))

    merges, splits = {}, {}
    for x, y in s_of.items():
        merges.setdefault(y, []).append(x)
    for y, x in p_of.items():
        splits.setdefault(x, []).append(y)
    return Transition(index, matches, cont,
                      sorted((y, sorted(xs)) for y, xs in merges.items() if len(xs) >= 2),
                      sorted((x, sorted(ys)) for x, ys in splits.items() if len(ys) >= 2))


def track(snapshots: Sequence[GraphSnapshot], delta: float = DEFAULT_DELTA, seed: int = 0,
          min_size: int = DEFAULT_MIN_SIZE, floor: float = DEFAULT_FLOOR,
          partitions: Sequence[CommunityPartition] | None = None) -> Tracking:
    """Detect communities on every snapshot and follow them as lineages.

    Each snapshot's partition is bootstrapped from the previous one.  Events
    are stamped with the later snapshot of a transition.  Lineages present
    in the first snapshot have no Birth event.  Precomputed ``partitions``
    may be passed to skip detection.
    """
    if len(snapshots) < 2:
        raise DegenerateInputError("tracking needs at least two snapshots")
    if partitions is None:
        partitions = []
        prev = None
        for k, snap in enumerate(snapshots):
            prev = louvain(snap, delta, seed + k, init=prev, snapshot_index=k)
            partitions.append(prev)
    partitions = list(partitions)

    timelines: list[CommunityTimeline] = []
    current: dict[int, CommunityTimeline] = {}  # label in latest partition -> lineage

    def members_of(part, snap, label):
        return snap.node_ids[part.labels == label]

    def open_lineage(k, label):
        t = CommunityTimeline(len(timelines), k)
        timelines.append(t)
        return t

    p0, s0 = partitions[0], snapshots[0]
    for label in np.flatnonzero(p0.sizes() >= min_size).tolist():
        t = open_lineage(0, label)
        t.labels[0] = label
        t.members[0] = members_of(p0, s0, label)
        current[label] = t

    transitions = []
    for k in range(1, len(partitions)):
        tr = match_partitions(partitions[k - 1], partitions[k], k - 1, min_size, floor)
        transitions.append(tr)
        part, snap = partitions[k], snapshots[k]
        nxt: dict[int, CommunityTimeline] = {}
        cont_a = {x: y for x, y, _ in tr.continuations}
        cont_b = {y: x for x, y, _ in tr.continuations}
        split_from = {y: x for x, ys in tr.splits for y in ys}
        merge_into = {x: y for y, xs in tr.merges for x in xs}
        sizes = part.sizes()
        for y in np.flatnonzero(sizes >= min_size).tolist():
            if y in cont_b and cont_b[y] in current:
                t = current[cont_b[y]]
            else:
                t = open_lineage(k, y)
                t.events.append(EvolutionEvent(EventType.Birth, k))
                x = split_from.get(y)
                if x is not None and x in current:
                    t.events.append(EvolutionEvent(EventType.Split, k, current[x].lineage_id))
            t.labels[k] = y
            t.members[k] = members_of(part, snap, y)
            nxt[y] = t
        for x, t in current.items():
            if x in cont_a:
                continue
            t.death = k
            y = merge_into.get(x)
            if y is not None and y in nxt:
                t.events.append(EvolutionEvent(EventType.Merge, k, nxt[y].lineage_id))
                t.events.append(EvolutionEvent(EventType.Death, k))
            else:
                t.events.append(EvolutionEvent(EventType.Dissolve, k))
        current = nxt
    return Tracking(partitions, timelines, transitions, [s.day for s in snapshots], min_size)


# --------------------------------------------------------------------------
# parameter sweep and statistics

@dataclass
class SweepResult:
    delta: float
    modularity: np.ndarray
    similarity: np.ndarray  # mean Jaccard of continuations per transition
    sizes: dict[int, np.ndarray]

    @property
    def mean_similarity(self) -> float:
        s = self.similarity[~np.isnan(self.similarity)]
        return float(s.mean()) if s.size else float("nan")


def delta_sweep(snapshots: Sequence[GraphSnapshot], deltas: Sequence[float], seed: int = 0,
                min_size: int = DEFAULT_MIN_SIZE, floor: float = DEFAULT_FLOOR,
                size_snapshots: Sequence[int] | None = None,
                threads: int = 1) -> dict[float, SweepResult]:
    """Modularity, continuation similarity and community sizes for each ``delta``.

    ``size_snapshots`` selects which snapshots' size distributions to keep
    (default: the last one).
    """
    if not deltas:
        raise ValueError("deltas must be non-empty")
    pick = list(size_snapshots) if size_snapshots is not None else [len(snapshots) - 1]

    def run(delta):
        parts = []
        prev = None
        for k, snap in enumerate(snapshots):
            prev = louvain(snap, delta, seed + k, init=prev, snapshot_index=k)
            parts.append(prev)
        sims = []
        for k in range(1, len(parts)):
            tr = match_partitions(parts[k - 1], parts[k], k - 1, min_size, floor)
            sims.append(np.mean([z for _, _, z in tr.continuations]) if tr.continuations
                        else np.nan)
        return SweepResult(delta, np.array([p.modularity for p in parts]), np.array(sims),
                           {k: np.sort(parts[k].sizes())[::-1] for k in pick})

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, deltas))
    else:
        results = [run(d) for d in deltas]
    return {d: r for d, r in zip(deltas, results)}


@dataclass
class CommunityStats:
    days: list[int]
    sizes: list[np.ndarray]  # tracked community sizes per snapshot, descending
    top5_coverage: np.ndarray
    lifetimes: np.ndarray  # snapshots, lineages that died
    censored_lifetimes: np.ndarray  # lineages alive at the end

    def size_histogram(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Counts over power-of-two size bins ``[2^i, 2^(i+1))`` at snapshot ``k``."""
        s = self.sizes[k]
        if s.size == 0:
            return np.zeros(0, int), np.zeros(0, int)
        bins = np.floor(np.log2(s)).astype(int)
        counts = np.bincount(bins)
        return 2 ** np.arange(len(counts)), counts


def community_stats(tracking: Tracking, snapshots: Sequence[GraphSnapshot]) -> CommunityStats:
    """Size distributions, coverage of the five largest communities, and lifetimes."""
    sizes, cover = [], []
    for part, snap in zip(tracking.partitions, snapshots):
        s = np.sort(part.sizes())[::-1]
        cover.append(s[:5].sum() / snap.node_count if snap.node_count else 0.0)
        sizes.append(s[s >= tracking.min_size])
    dead = [t.lifetime for t in tracking.timelines if not t.censored]
    alive = [t.lifetime for t in tracking.timelines if t.censored]
    return CommunityStats(tracking.days, sizes, np.array(cover), np.array(dead, dtype=int),
                          np.array(alive, dtype=int))


@dataclass
class RatioCDF:
    merge_ratios: np.ndarray
    split_ratios: np.ndarray

    @property
    def merge_empty(self) -> bool:
        return self.merge_ratios.size == 0

    @property
    def split_empty(self) -> bool:
        return self.split_ratios.size == 0


def _second_over_first(sizes) -> float:
    s = sorted(sizes, reverse=True)
    return s[1] / s[0]


def size_ratio_analysis(tracking: Tracking) -> RatioCDF:
    """Second-largest over largest size for every merge (predecessors) and split (successors).

    Ratios come back sorted so they read directly as empirical CDFs; an
    empty array flags the absence of that event kind.
    """
    m, s = [], []
    for tr in tracking.transitions:
        before = tracking.partitions[tr.index].sizes()
        after = tracking.partitions[tr.index + 1].sizes()
        for _, preds in tr.merges:
            m.append(_second_over_first(before[preds]))
        for _, succ in tr.splits:
            s.append(_second_over_first(after[succ]))
    return RatioCDF(np.sort(np.array(m, dtype=float)), np.sort(np.array(s, dtype=float)))


def ecdf(values) -> tuple[np.ndarray, np.ndarray]:
    """Sorted values and their cumulative fractions."""
    x = np.sort(np.asarray(values, dtype=float))
    return x, np.arange(1, x.size + 1) / max(x.size, 1)


@dataclass
class ImpactBundle:
    community_gaps: np.ndarray
    noncommunity_gaps: np.ndarray
    lifetimes_by_band: dict[str, np.ndarray]
    in_degree_ratio: np.ndarray  # per member of a tracked community at the last snapshot


def _membership_at(tracking: Tracking, snapshots: Sequence[GraphSnapshot], times, nodes):
    """Tracked-community label (or -1) of ``nodes`` at ``times``.

    Membership comes from the snapshot containing the time (the first cut at
    or after it); times past the last cut use the last snapshot.
    """
    cuts = np.array([s.cut_time for s in snapshots])
    k = np.minimum(np.searchsorted(cuts, times, side="left"), len(cuts) - 1)
    out = np.full(len(nodes), -1, dtype=np.int64)
    for snap_k in np.unique(k[k >= 0]).tolist():
        part = tracking.partitions[snap_k]
        tracked = part.sizes() >= tracking.min_size
        sel = np.flatnonzero((k == snap_k) & (nodes < part.node_count))
        lab = part.labels[nodes[sel]]
        out[sel] = np.where(tracked[lab], lab, -1)
    return out, k


def community_impact(tracking: Tracking, log: EventLog, snapshots: Sequence[GraphSnapshot],
                     bands: Sequence[tuple[int, int]] = ((10, 100), (100, 1000), (1000, 10**9))
                     ) -> ImpactBundle:
    """Behaviour of community members versus everyone else.

    * edge inter-arrival gaps, split by whether the user belonged to a
      tracked community when the later edge of the gap was created;
    * user lifetime (last edge time minus join time), grouped by the size of
      the user's community at the last edge (``"none"`` outside communities);
    * in-degree ratio of members at the last snapshot: edges inside their
      own community over their degree.
    """
    node = np.concatenate([log.edge_u, log.edge_v]).astype(np.int64)
    t = np.concatenate([log.edge_time, log.edge_time])
    order = np.lexsort((t, node))
    node, t = node[order], t[order]
    same = node[1:] == node[:-1]
    gaps = (t[1:] - t[:-1])[same]
    g_node, g_time = node[1:][same], t[1:][same]
    label, _ = _membership_at(tracking, snapshots, g_time, g_node)
    in_comm = label >= 0

    # lifetimes
    last = np.full(log.node_count, -1, dtype=np.int64)
    np.maximum.at(last, node, t)
    has = np.flatnonzero(last >= 0)
    life = last[has] - log.node_time[has]
    lab, k = _membership_at(tracking, snapshots, last[has], has)
    size = np.zeros(len(has), dtype=np.int64)
    for snap_k in np.unique(k[lab >= 0]).tolist():
        sel = (k == snap_k) & (lab >= 0)
        size[sel] = tracking.partitions[snap_k].sizes()[lab[sel]]
    by_band = {"none": np.sort(life[lab < 0])}
    for lo, hi in bands:
        sel = (lab >= 0) & (size >= lo) & (size < hi)
        by_band[f"[{lo},{hi})"] = np.sort(life[sel])

    # in-degree ratio at the last snapshot
    part, snap = tracking.partitions[-1], snapshots[-1]
    tracked = part.sizes() >= tracking.min_size
    u, v = snap.edge_u, snap.edge_v
    inside = part.labels[u] == part.labels[v]
    internal = np.bincount(np.concatenate([u[inside], v[inside]]), minlength=snap.node_count)
    members = np.flatnonzero(tracked[part.labels] & (snap.degree > 0))
    ratio = internal[members] / snap.degree[members]
    return ImpactBundle(np.sort(gaps[in_comm]), np.sort(gaps[~in_comm]), by_band, ratio)
