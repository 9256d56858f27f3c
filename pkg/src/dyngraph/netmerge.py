"""Two networks merging into one.

Users who joined before the merge day carry the origin of their network
(``A`` or ``B``); everyone joining on or after it is ``New``.  Post-merge
edges are classified as internal to one origin, external (across origins),
or touching a new user.  A user is *active* on day ``d`` when they create an
edge within ``t`` days starting at ``d``.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._bfs import bfs_distances
from .errors import DegenerateInputError, DynGraphError
from .store import SECONDS_PER_DAY, EventLog

ACTIVITY_DAYS = 94
ORIGIN_A, ORIGIN_B, ORIGIN_NEW, ORIGIN_UNKNOWN = 0, 1, 2, -1
ORIGIN_NAMES = {ORIGIN_A: "A", ORIGIN_B: "B", ORIGIN_NEW: "New"}


class EdgeClass(enum.IntEnum):
    Internal_A = 0
    Internal_B = 1
    External = 2
    ToNew = 3


class UnknownOriginError(DynGraphError, ValueError):
    pass


@dataclass
class MergeScenario:
    """Origin code per dense node index of ``log`` plus the merge day."""

    merge_day: int
    origin: np.ndarray
    activity_threshold_days: int = ACTIVITY_DAYS

    @classmethod
    def from_log(cls, log: EventLog, merge_day: int,
                 activity_threshold_days: int = ACTIVITY_DAYS,
                 id_ranges: dict[str, tuple[int, int]] | None = None,
                 tags: tuple[str, str] = ("A", "B"), strict: bool = False) -> "MergeScenario":
        """Origins from the network column, or from inclusive ``id_ranges`` per origin.

        Nodes joining on or after ``merge_day`` are New.  A pre-merge node
        with no origin raises in ``strict`` mode and is otherwise left unknown.
        """
        n = log.node_count
        origin = np.full(n, ORIGIN_UNKNOWN, dtype=np.int8)
        if id_ranges:
            ids = log.node_ids
            for code, name in ((ORIGIN_A, "A"), (ORIGIN_B, "B")):
                if name in id_ranges:
                    lo, hi = id_ranges[name]
                    origin[(ids >= lo) & (ids <= hi)] = code
        else:
            nets = list(log.networks)
            for code, tag in ((ORIGIN_A, tags[0]), (ORIGIN_B, tags[1])):
                if tag in nets:
                    origin[log.node_net == nets.index(tag)] = code
        join_day = log.day_of(log.node_time)
        origin[join_day >= merge_day] = ORIGIN_NEW
        unknown = np.flatnonzero(origin == ORIGIN_UNKNOWN)
        if strict and unknown.size:
            raise UnknownOriginError(f"node {int(log.node_ids[unknown[0]])} has no origin")
        return cls(merge_day, origin, activity_threshold_days)

    def merge_time(self, log: EventLog) -> int:
        return log.t0 + self.merge_day * SECONDS_PER_DAY

    def members(self, code: int) -> np.ndarray:
        return np.flatnonzero(self.origin == code)


def _check_span(log: EventLog, scenario: MergeScenario) -> int:
    last_day = int(log.day_of(log.last_time))
    if not 0 <= scenario.merge_day <= last_day:
        raise DegenerateInputError(f"merge day {scenario.merge_day} outside log span 0..{last_day}")
    return last_day


def edge_classes(log: EventLog, scenario: MergeScenario) -> np.ndarray:
    """Class code per edge; -1 for pre-merge edges and edges touching unknown origins."""
    ou = scenario.origin[log.edge_u]
    ov = scenario.origin[log.edge_v]
    cls = np.full(log.edge_count, -1, dtype=np.int8)
    post = log.edge_time >= scenario.merge_time(log)
    known = (ou != ORIGIN_UNKNOWN) & (ov != ORIGIN_UNKNOWN)
    sel = post & known
    cls[sel & (ou == ORIGIN_A) & (ov == ORIGIN_A)] = EdgeClass.Internal_A
    cls[sel & (ou == ORIGIN_B) & (ov == ORIGIN_B)] = EdgeClass.Internal_B
    cls[sel & (ou != ov) & (ou != ORIGIN_NEW) & (ov != ORIGIN_NEW)] = EdgeClass.External
    cls[sel & ((ou == ORIGIN_NEW) | (ov == ORIGIN_NEW))] = EdgeClass.ToNew
    return cls


@dataclass
class EdgeClassCounts:
    days: np.ndarray  # days since the merge
    counts: dict[EdgeClass, np.ndarray]
    totals: np.ndarray  # all post-merge edges per day
    unclassified: int = 0


def classify_edges(log: EventLog, scenario: MergeScenario, strict: bool = False) -> EdgeClassCounts:
    """Per-day counts of post-merge edges by class."""
    last_day = _check_span(log, scenario)
    cls = edge_classes(log, scenario)
    day = log.day_of(log.edge_time) - scenario.merge_day
    post = log.edge_time >= scenario.merge_time(log)
    unclassified = int(np.sum(post & (cls < 0)))
    if strict and unclassified:
        raise UnknownOriginError(f"{unclassified} post-merge edges touch nodes of unknown origin")
    n_days = last_day - scenario.merge_day + 1
    counts = {c: np.bincount(day[cls == c], minlength=n_days)[:n_days] for c in EdgeClass}
    totals = np.bincount(day[post], minlength=n_days)[:n_days]
    return EdgeClassCounts(np.arange(n_days), counts, totals, unclassified)


@dataclass
class ActivitySeries:
    days: np.ndarray
    active: dict[str, np.ndarray]  # origin name -> active users per day
    population: dict[str, np.ndarray]  # users of that origin existing on the day
    backward: bool = False


def activity_series(log: EventLog, scenario: MergeScenario, edge_class_filter=None,
                    backward: bool = False) -> ActivitySeries:
    """Active users per origin and day since the merge.

    Forward-looking (default): active on day ``d`` iff the user is an
    endpoint of a (filtered) edge created on days ``[d, d + t)``; the series
    stops ``t - 1`` days before the last day of data, the last day whose
    window is fully observed.  ``backward=True`` uses days ``(d - t, d]``
    instead and covers every post-merge day.  ``edge_class_filter`` is an
    :class:`EdgeClass` or a collection of them.
    """
    last_day = _check_span(log, scenario)
    t = scenario.activity_threshold_days
    rel_last = last_day - scenario.merge_day
    n_days = rel_last + 1 if backward else rel_last - t + 2
    if n_days <= 0:
        return ActivitySeries(np.zeros(0, int), {}, {}, backward)
    edge_day = log.day_of(log.edge_time) - scenario.merge_day
    keep = np.ones(log.edge_count, bool)
    if edge_class_filter is not None:
        wanted = [edge_class_filter] if isinstance(edge_class_filter, EdgeClass) else list(edge_class_filter)
        keep = np.isin(edge_classes(log, scenario), [int(c) for c in wanted])
    user = np.concatenate([log.edge_u[keep], log.edge_v[keep]]).astype(np.int64)
    eday = np.concatenate([edge_day[keep], edge_day[keep]])
    order = np.lexsort((eday, user))
    user, eday = user[order], eday[order]
    # each edge day e covers d in [e - t + 1, e] (forward) or [e, e + t - 1] (backward);
    # overlapping covers of one user are merged into segments
    lo = eday if backward else eday - t + 1
    hi = eday + t - 1 if backward else eday
    join_rel = log.day_of(log.node_time) - scenario.merge_day
    lo = np.maximum(lo, np.maximum(join_rel[user], 0))
    # lo and hi are non-decreasing within a user, so a gap starts a new segment
    new_seg = np.ones(len(user), bool)
    new_seg[1:] = (user[1:] != user[:-1]) | (lo[1:] > hi[:-1] + 1)
    starts = np.flatnonzero(new_seg)
    ends = np.append(starts[1:], len(user)) - 1
    seg_user, seg_lo, seg_hi = user[starts], lo[starts], hi[ends]
    seg_lo = np.clip(seg_lo, 0, n_days)
    seg_hi = np.clip(seg_hi + 1, 0, n_days)
    ok = seg_hi > seg_lo
    days = np.arange(n_days)
    active, population = {}, {}
    for code, name in ORIGIN_NAMES.items():
        sel = ok & (scenario.origin[seg_user] == code)
        diff = np.bincount(seg_lo[sel], minlength=n_days + 1)[: n_days + 1].astype(np.int64)
        diff -= np.bincount(seg_hi[sel], minlength=n_days + 1)[: n_days + 1]
        active[name] = np.cumsum(diff)[:n_days]
        members = scenario.origin == code
        joins = np.clip(join_rel[members], 0, None)
        population[name] = np.searchsorted(np.sort(joins), days, side="right")
    return ActivitySeries(days, active, population, backward)


@dataclass
class DuplicateEstimate:
    inactive_a: float
    inactive_b: float

    @property
    def lower_bound(self) -> float:
        return self.inactive_a + self.inactive_b


def duplicate_estimate(log: EventLog, scenario: MergeScenario) -> DuplicateEstimate:
    """Fraction of each origin's pre-merge users inactive on the merge day."""
    act = activity_series(log, scenario)
    if len(act.days) == 0:
        raise DegenerateInputError("log ends before the first full activity window")
    out = []
    for code, name in ((ORIGIN_A, "A"), (ORIGIN_B, "B")):
        n = int(np.sum(scenario.origin == code))
        out.append(1.0 - act.active[name][0] / n if n else float("nan"))
    return DuplicateEstimate(*out)


@dataclass
class RatioSeries:
    days: np.ndarray
    values: dict[str, np.ndarray]
    flags: dict[str, np.ndarray] = field(default_factory=dict)


def edge_ratio_series(log: EventLog, scenario: MergeScenario) -> RatioSeries:
    """Daily internal/external and new/external ratios, per origin and combined.

    Days without external edges are flagged and carry NaN.
    """
    c = classify_edges(log, scenario)
    cls = edge_classes(log, scenario)
    day = log.day_of(log.edge_time) - scenario.merge_day
    n_days = len(c.days)
    ou = scenario.origin[log.edge_u]
    ov = scenario.origin[log.edge_v]
    to_new = cls == EdgeClass.ToNew
    new_a = to_new & ((ou == ORIGIN_A) | (ov == ORIGIN_A))
    new_b = to_new & ((ou == ORIGIN_B) | (ov == ORIGIN_B))
    num = {
        "internal/external:A": c.counts[EdgeClass.Internal_A],
        "internal/external:B": c.counts[EdgeClass.Internal_B],
        "internal/external:all": c.counts[EdgeClass.Internal_A] + c.counts[EdgeClass.Internal_B],
        "new/external:A": np.bincount(day[new_a], minlength=n_days)[:n_days],
        "new/external:B": np.bincount(day[new_b], minlength=n_days)[:n_days],
        "new/external:all": c.counts[EdgeClass.ToNew],
    }
    ext = c.counts[EdgeClass.External].astype(float)
    zero = ext == 0
    values = {k: np.divide(v.astype(float), ext, out=np.full(n_days, np.nan), where=~zero)
              for k, v in num.items()}
    return RatioSeries(c.days, values, {k: zero.copy() for k in num})


@dataclass
class DistanceResult:
    day: int
    mean_a_to_b: float
    mean_b_to_a: float
    unreachable_a: int
    unreachable_b: int
    sampled_a: int
    sampled_b: int


def _restricted_adjacency(log: EventLog, scenario: MergeScenario, cut: int) -> sp.csr_matrix:
    n = log.node_count
    e = int(np.searchsorted(log.edge_time, cut, side="right"))
    u, v = log.edge_u[:e], log.edge_v[:e]
    keep = (scenario.origin[u] <= ORIGIN_B) & (scenario.origin[v] <= ORIGIN_B) \
        & (scenario.origin[u] >= 0) & (scenario.origin[v] >= 0)
    u, v = u[keep], v[keep]
    data = np.ones(2 * len(u), dtype=np.int8)
    return sp.csr_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))


def _sample(pool: np.ndarray, size: int, rng) -> np.ndarray:
    if size >= len(pool):
        return pool
    return np.sort(rng.choice(pool, size=size, replace=False))


def cross_network_distance(log: EventLog, scenario: MergeScenario, day: int,
                           sample_size: int = 1000, seed: int = 0) -> DistanceResult:
    """Mean hop distance from sampled users of one origin to the nearest user of the other.

    Uses the graph at the end of ``merge_day + day`` restricted to pre-merge
    users and the edges among them.  Unreachable sources are excluded from
    the means and counted; a mean with no reachable source is NaN.
    """
    a, b = scenario.members(ORIGIN_A), scenario.members(ORIGIN_B)
    if a.size == 0 or b.size == 0:
        raise DegenerateInputError("both origins must be non-empty")
    cut = log.t0 + (scenario.merge_day + day + 1) * SECONDS_PER_DAY - 1
    adj = _restricted_adjacency(log, scenario, cut)
    if adj.nnz == 0 and a.size + b.size == 0:
        raise DegenerateInputError("empty restricted graph")
    rng = np.random.default_rng(seed)
    src_a = _sample(a, sample_size, rng)
    src_b = _sample(b, sample_size, rng)
    restricted = scenario.origin <= ORIGIN_B
    restricted &= scenario.origin >= 0
    to_b = bfs_distances(adj, b, mask=restricted)[src_a]
    to_a = bfs_distances(adj, a, mask=restricted)[src_b]

    def mean(d):
        ok = d >= 0
        return (float(d[ok].mean()) if ok.any() else float("nan")), int((~ok).sum())

    ma, ua = mean(to_b)
    mb, ub = mean(to_a)
    return DistanceResult(day, ma, mb, ua, ub, len(src_a), len(src_b))


def distance_series(log: EventLog, scenario: MergeScenario, days, sample_size: int = 1000,
                    seed: int = 0) -> list[DistanceResult]:
    """:func:`cross_network_distance` on each day with one fixed source sample."""
    return [cross_network_distance(log, scenario, d, sample_size, seed) for d in days]


def write_rows(rows, fh) -> None:
    """``day,origin,metric,value,flag,unreachable_count`` rows; NaN becomes an empty flagged value."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["day", "origin", "metric", "value", "flag", "unreachable_count"])
    for day, origin, metric, value, unreachable in rows:
        bad = value is None or (isinstance(value, float) and np.isnan(value))
        w.writerow([day, origin, metric, "" if bad else repr(value), int(bad),
                    "" if unreachable is None else unreachable])
