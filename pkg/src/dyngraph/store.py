"""Event ingestion, replay, and snapshot materialization.

An event stream is a sequence of node-creation and edge-creation records.
Events are stored column-wise in numpy arrays; nodes get a dense index in
creation order, so the nodes (and edges) present at any cut-off time are a
prefix of the corresponding arrays.  A :class:`GraphSnapshot` is therefore a
cheap, immutable view over the shared log plus its own degree vector.
"""

from __future__ import annotations

import enum
import gzip
import io
import json
import os
from array import array
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateInputError, IngestError

SECONDS_PER_DAY = 86400

_NODE = 0
_EDGE = 1


class EventKind(enum.Enum):
    NodeCreate = "N"
    EdgeCreate = "E"


@dataclass(frozen=True)
class EventRecord:
    timestamp: int
    kind: EventKind
    u: int
    v: int | None = None
    network: str | None = None

    def __post_init__(self):
        if self.kind is EventKind.EdgeCreate:
            if self.v is None:
                raise ValueError("edge event needs two endpoints")
            if self.u == self.v:
                raise ValueError(f"self-loop on node {self.u}")
        elif self.v is not None:
            raise ValueError("node event takes a single node id")

    def to_line(self) -> str:
        parts = [str(self.timestamp), self.kind.value, str(self.u)]
        if self.v is not None:
            parts.append(str(self.v))
        if self.network is not None:
            parts.append(self.network)
        return ",".join(parts)


@dataclass
class IngestStats:
    lines_read: int = 0
    comment_lines: int = 0
    events: int = 0
    node_events: int = 0
    edge_events: int = 0
    duplicates_dropped: int = 0
    duplicate_nodes_dropped: int = 0
    implicit_nodes: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


class EventLog:
    """Validated, time-ordered event log.

    Columns are read-only numpy arrays: ``time``, ``kind`` (0 node, 1 edge),
    ``u``, ``v`` (undefined for node events) and ``net`` (index into
    ``networks``, -1 when untagged).  Derived per-node and per-edge arrays use
    dense node indices assigned in creation order.
    """

    def __init__(self, time, kind, u, v, net, networks=(), stats=None):
        self.time = _frozen(np.asarray(time, dtype=np.int64))
        self.kind = _frozen(np.asarray(kind, dtype=np.int8))
        self.u = _frozen(np.asarray(u, dtype=np.int64))
        self.v = _frozen(np.asarray(v, dtype=np.int64))
        self.net = _frozen(np.asarray(net, dtype=np.int8))
        self.networks = tuple(networks)
        self.stats = stats if stats is not None else IngestStats(events=len(self.time))

        is_node = self.kind == _NODE
        is_edge = ~is_node
        self.node_ids = _frozen(self.u[is_node])
        self.node_time = _frozen(self.time[is_node])
        self.node_net = _frozen(self.net[is_node])
        self.edge_time = _frozen(self.time[is_edge])
        self.edge_net = _frozen(self.net[is_edge])

        self._id_order = np.argsort(self.node_ids, kind="stable")
        self._sorted_ids = self.node_ids[self._id_order]
        if len(self._sorted_ids) > 1 and np.any(self._sorted_ids[1:] == self._sorted_ids[:-1]):
            raise IngestError("node created twice")
        idx_dtype = np.int32 if len(self.node_ids) < 2**31 - 1 else np.int64
        self.edge_u = _frozen(self.index_of(self.u[is_edge]).astype(idx_dtype))
        self.edge_v = _frozen(self.index_of(self.v[is_edge]).astype(idx_dtype))

    # construction helpers -------------------------------------------------

    @classmethod
    def from_records(cls, records: Iterable[EventRecord], mode: str = "lenient") -> "EventLog":
        cols = _Columns()
        for i, rec in enumerate(records, start=1):
            cols.add(rec.timestamp, _NODE if rec.kind is EventKind.NodeCreate else _EDGE,
                     rec.u, -1 if rec.v is None else rec.v, rec.network, i)
        return _finalize(cols, mode, IngestStats(lines_read=len(cols.time)))

    # accessors --------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.time)

    def __iter__(self) -> Iterator[EventRecord]:
        for t, k, a, b, n in zip(self.time.tolist(), self.kind.tolist(), self.u.tolist(),
                                 self.v.tolist(), self.net.tolist()):
            tag = self.networks[n] if n >= 0 else None
            if k == _NODE:
                yield EventRecord(t, EventKind.NodeCreate, a, None, tag)
            else:
                yield EventRecord(t, EventKind.EdgeCreate, a, b, tag)

    @property
    def node_count(self) -> int:
        return len(self.node_ids)

    @property
    def edge_count(self) -> int:
        return len(self.edge_time)

    @property
    def t0(self) -> int:
        if len(self.time) == 0:
            raise DegenerateInputError("empty event log")
        return int(self.time[0])

    @property
    def last_time(self) -> int:
        if len(self.time) == 0:
            raise DegenerateInputError("empty event log")
        return int(self.time[-1])

    def day_of(self, t):
        """Day index of timestamp(s) ``t``; day 0 starts at the first event."""
        return (np.asarray(t, dtype=np.int64) - self.t0) // SECONDS_PER_DAY

    def end_of_day(self, day: int) -> int:
        """Last second belonging to day ``day``."""
        return self.t0 + (int(day) + 1) * SECONDS_PER_DAY - 1

    def index_of(self, ids) -> np.ndarray:
        """Map node ids to dense indices; raises KeyError for unknown ids."""
        ids = np.asarray(ids, dtype=np.int64)
        if self._sorted_ids.size == 0:
            if ids.size:
                raise KeyError("unknown node id")
            return ids.copy()
        pos = np.searchsorted(self._sorted_ids, ids)
        pos = np.minimum(pos, len(self._sorted_ids) - 1)
        if np.any(self._sorted_ids[pos] != ids):
            bad = ids[self._sorted_ids[pos] != ids]
            raise KeyError(f"unknown node id {int(bad.flat[0])}")
        return self._id_order[pos]

    def node_network(self) -> list:
        """Origin tag per dense node index (None when untagged)."""
        return [self.networks[n] if n >= 0 else None for n in self.node_net.tolist()]

    def to_lines(self) -> Iterator[str]:
        for rec in self:
            yield rec.to_line()

    def write(self, path) -> None:
        path = Path(path)
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "wt", encoding="utf-8") as fh:
            for line in self.to_lines():
                fh.write(line)
                fh.write("\n")


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


class _Columns:
    def __init__(self):
        self.time = array("q")
        self.kind = array("b")
        self.u = array("q")
        self.v = array("q")
        self.net = array("b")
        self.line = array("q")
        self.networks: dict[str, int] = {}

    def add(self, t, k, a, b, tag, line):
        self.time.append(t)
        self.kind.append(k)
        self.u.append(a)
        self.v.append(b)
        if tag is None:
            self.net.append(-1)
        else:
            code = self.networks.get(tag)
            if code is None:
                if len(self.networks) >= 127:
                    raise IngestError("too many distinct network tags", line)
                code = self.networks[tag] = len(self.networks)
            self.net.append(code)
        self.line.append(line)


def _open_source(source):
    """Yield text lines from a path, bytes, or (binary or text) stream."""
    if isinstance(source, (str, os.PathLike)):
        path = Path(source)
        if path.suffix == ".gz":
            with gzip.open(path, "rt", encoding="utf-8") as fh:
                yield from fh
        else:
            with open(path, encoding="utf-8") as fh:
                yield from fh
        return
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    for line in source:
        if isinstance(line, (bytes, bytearray)):
            line = line.decode("utf-8")
        yield line


def ingest(source, mode: str = "lenient") -> EventLog:
    """Parse an event stream into a validated, time-ordered :class:`EventLog`.

    Parameters
    ----------
    source : path, bytes, or iterable of lines
        One event per line, ``timestamp,N,node[,network]`` or
        ``timestamp,E,u,v[,network]``.  ``#`` lines are comments.  Paths
        ending in ``.gz`` are read through gzip.
    mode : {"lenient", "strict"}
        In strict mode an edge may only reference nodes created earlier; in
        lenient mode missing endpoints are created at the edge's timestamp.

    Returns
    -------
    EventLog
        Events sorted stably by timestamp, with ingestion counters in
        ``log.stats``.
    """
    if mode not in ("lenient", "strict"):
        raise ValueError(f"unknown mode {mode!r}")
    cols = _Columns()
    stats = IngestStats()
    for lineno, raw in enumerate(_open_source(source), start=1):
        stats.lines_read += 1
        line = raw.strip()
        if not line or line.startswith("#"):
            stats.comment_lines += 1
            continue
        parts = line.split(",")
        try:
            t = int(parts[0])
        except ValueError:
            raise IngestError(f"unparseable timestamp {parts[0]!r}", lineno) from None
        if len(parts) < 3:
            raise IngestError("expected at least 3 fields", lineno)
        kind = parts[1].strip()
        try:
            if kind == "N":
                if len(parts) > 4:
                    raise IngestError("node event has too many fields", lineno)
                a = int(parts[2])
                tag = parts[3].strip() if len(parts) == 4 and parts[3].strip() else None
                cols.add(t, _NODE, a, -1, tag, lineno)
            elif kind == "E":
                if len(parts) < 4 or len(parts) > 5:
                    raise IngestError("edge event needs 4 or 5 fields", lineno)
                a = int(parts[2])
                b = int(parts[3])
                if a == b:
                    raise IngestError(f"self-loop on node {a}", lineno)
                tag = parts[4].strip() if len(parts) == 5 and parts[4].strip() else None
                cols.add(t, _EDGE, a, b, tag, lineno)
            else:
                raise IngestError(f"unknown event kind {kind!r}", lineno)
        except (ValueError, OverflowError) as exc:
            if isinstance(exc, IngestError):
                raise
            raise IngestError(f"bad node id ({exc})", lineno) from None
    return _finalize(cols, mode, stats)


def _finalize(cols: _Columns, mode: str, stats: IngestStats) -> EventLog:
    time = np.frombuffer(cols.time, dtype=np.int64) if len(cols.time) else np.zeros(0, np.int64)
    kind = np.frombuffer(cols.kind, dtype=np.int8) if len(cols.kind) else np.zeros(0, np.int8)
    u = np.frombuffer(cols.u, dtype=np.int64) if len(cols.u) else np.zeros(0, np.int64)
    v = np.frombuffer(cols.v, dtype=np.int64) if len(cols.v) else np.zeros(0, np.int64)
    net = np.frombuffer(cols.net, dtype=np.int8) if len(cols.net) else np.zeros(0, np.int8)
    line = np.frombuffer(cols.line, dtype=np.int64) if len(cols.line) else np.zeros(0, np.int64)
    networks = sorted(cols.networks, key=cols.networks.get)

    order = np.argsort(time, kind="stable")
    time, kind, u, v, net, line = (a[order] for a in (time, kind, u, v, net, line))
    n = len(time)
    keep = np.ones(n, dtype=bool)

    # duplicate edges: keep the first occurrence of each unordered pair
    epos = np.flatnonzero(kind == _EDGE)
    lo = np.minimum(u[epos], v[epos])
    hi = np.maximum(u[epos], v[epos])
    srt = np.lexsort((epos, hi, lo))
    same = (lo[srt][1:] == lo[srt][:-1]) & (hi[srt][1:] == hi[srt][:-1])
    keep[epos[srt][1:][same]] = False
    stats.duplicates_dropped = int(same.sum())

    # first appearance of every node id among the retained events
    npos = np.flatnonzero(kind == _NODE)
    epos = epos[keep[epos]]
    ids = np.concatenate([u[npos], u[epos], v[epos]])
    pos = np.concatenate([npos, epos, epos])
    is_node_event = np.concatenate([np.ones(len(npos), bool), np.zeros(2 * len(epos), bool)])
    # implicit creations for one edge: u before v
    sub = np.concatenate([np.zeros(len(npos), np.int8), np.zeros(len(epos), np.int8),
                          np.ones(len(epos), np.int8)])
    srt = np.lexsort((sub, pos, ids))
    ids_s = ids[srt]
    first = np.ones(len(ids_s), dtype=bool)
    first[1:] = ids_s[1:] != ids_s[:-1]
    first_idx = srt[first]

    # NodeCreate events that are not a node's first appearance are duplicates
    node_first = np.zeros(len(ids), dtype=bool)
    node_first[first_idx] = True
    dup_nodes = npos[~node_first[: len(npos)]]
    keep[dup_nodes] = False
    stats.duplicate_nodes_dropped = int(len(dup_nodes))

    implicit = first_idx[~is_node_event[first_idx]]
    if len(implicit) and mode == "strict":
        bad = implicit[np.argmin(pos[implicit])]
        raise IngestError(f"edge references unknown node {int(ids[bad])}", int(line[pos[bad]]))
    stats.implicit_nodes = int(len(implicit))

    kept = np.flatnonzero(keep)
    imp_pos = pos[implicit]
    sort_key = np.concatenate([kept * 3 + 2, imp_pos * 3 + sub[implicit]])
    final_order = np.argsort(sort_key, kind="stable")
    n_imp = len(implicit)
    f_time = np.concatenate([time[kept], time[imp_pos]])[final_order]
    f_kind = np.concatenate([kind[kept], np.zeros(n_imp, np.int8)])[final_order]
    f_u = np.concatenate([u[kept], ids[implicit]])[final_order]
    f_v = np.concatenate([v[kept], np.full(n_imp, -1, np.int64)])[final_order]
    f_net = np.concatenate([net[kept], net[imp_pos]])[final_order]

    stats.events = int(len(f_time))
    stats.node_events = int(np.sum(f_kind == _NODE))
    stats.edge_events = stats.events - stats.node_events
    return EventLog(f_time, f_kind, f_u, f_v, f_net, networks, stats)


class GraphSnapshot:
    """Immutable undirected simple graph induced by all events up to ``cut_time``.

    Node-level arrays are indexed by dense node index (creation order).
    """

    def __init__(self, log: EventLog, cut_time: int, node_count: int, edge_count: int,
                 degree: np.ndarray):
        self.log = log
        self.cut_time = int(cut_time)
        self.node_count = int(node_count)
        self.edge_count = int(edge_count)
        self.degree = _frozen(degree)

    def __repr__(self) -> str:
        return (f"GraphSnapshot(cut_time={self.cut_time}, nodes={self.node_count}, "
                f"edges={self.edge_count})")

    @property
    def day(self) -> int:
        return int(self.log.day_of(self.cut_time))

    @property
    def node_ids(self) -> np.ndarray:
        return self.log.node_ids[: self.node_count]

    @property
    def join_time(self) -> np.ndarray:
        return self.log.node_time[: self.node_count]

    @property
    def edge_u(self) -> np.ndarray:
        return self.log.edge_u[: self.edge_count]

    @property
    def edge_v(self) -> np.ndarray:
        return self.log.edge_v[: self.edge_count]

    @property
    def edge_time(self) -> np.ndarray:
        return self.log.edge_time[: self.edge_count]

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency in CSR form, built on first access."""
        n = self.node_count
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        data = np.ones(len(rows), dtype=np.int8)
        adj = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        adj.sort_indices()
        return adj

    def drop_cache(self) -> None:
        self.__dict__.pop("adjacency", None)

    def neighbors(self, node_id: int) -> np.ndarray:
        i = int(self.log.index_of([node_id])[0])
        if i >= self.node_count:
            raise KeyError(f"node {node_id} not present at cut {self.cut_time}")
        adj = self.adjacency
        return self.node_ids[adj.indices[adj.indptr[i]: adj.indptr[i + 1]]]

    def edges(self) -> Iterator[tuple[int, int]]:
        ids = self.node_ids
        for a, b in zip(ids[self.edge_u].tolist(), ids[self.edge_v].tolist()):
            yield a, b

    def audit(self) -> None:
        """Walk the snapshot and raise AssertionError if an invariant is broken."""
        adj = self.adjacency
        assert (adj != adj.T).nnz == 0, "adjacency not symmetric"
        assert adj.diagonal().sum() == 0, "self-loop present"
        assert adj.data.max(initial=0) <= 1, "duplicate edge"
        assert int(self.degree.sum()) == 2 * self.edge_count, "degree sum mismatch"
        assert np.array_equal(np.asarray(adj.sum(axis=1)).ravel(), self.degree)
        assert self.node_count == 0 or self.join_time.max() <= self.cut_time
        assert self.edge_count == 0 or self.edge_time.max() <= self.cut_time


def snapshot_at(log: EventLog, cut_time: int) -> GraphSnapshot:
    """Materialize the graph of all nodes and edges created at or before ``cut_time``."""
    if len(log) == 0:
        raise DegenerateInputError("empty event log")
    if cut_time < log.t0:
        raise ValueError(f"cut_time {cut_time} precedes first event {log.t0}")
    n = int(np.searchsorted(log.node_time, cut_time, side="right"))
    m = int(np.searchsorted(log.edge_time, cut_time, side="right"))
    degree = np.bincount(np.concatenate([log.edge_u[:m], log.edge_v[:m]]), minlength=n)
    return GraphSnapshot(log, cut_time, n, m, degree.astype(np.int64))


def series_cuts(log: EventLog, start: int, cadence: int, end: int | None = None) -> list[int]:
    if cadence <= 0:
        raise ValueError("cadence must be positive")
    if start < log.t0:
        raise ValueError(f"start {start} precedes first event {log.t0}")
    end = log.last_time if end is None else end
    count = (end - start) // cadence + 1
    return [start + k * cadence for k in range(max(count, 1))]


def iter_snapshot_series(log: EventLog, start: int, cadence: int,
                         end: int | None = None) -> Iterator[GraphSnapshot]:
    """Yield snapshots at ``start, start+cadence, ...`` up to the last event (or ``end``).

    Each snapshot's degree vector is the previous one plus the degree delta
    of the edges created in between.
    """
    if len(log) == 0:
        raise DegenerateInputError("empty event log")
    prev_n = prev_m = 0
    degree = np.zeros(0, dtype=np.int64)
    for cut in series_cuts(log, start, cadence, end):
        n = int(np.searchsorted(log.node_time, cut, side="right"))
        m = int(np.searchsorted(log.edge_time, cut, side="right"))
        delta = np.bincount(np.concatenate([log.edge_u[prev_m:m], log.edge_v[prev_m:m]]),
                            minlength=n)
        degree = np.concatenate([degree, np.zeros(n - prev_n, dtype=np.int64)]) + delta
        prev_n, prev_m = n, m
        yield GraphSnapshot(log, cut, n, m, degree)


def snapshot_series(log: EventLog, start: int, cadence: int,
                    end: int | None = None) -> list[GraphSnapshot]:
    return list(iter_snapshot_series(log, start, cadence, end))


def iter_daily_series(log: EventLog, cadence_days: int = 1,
                      start_day: int = 0) -> Iterator[GraphSnapshot]:
    """Snapshots at the end of day ``start_day`` and every ``cadence_days`` after,
    the last one covering the final event."""
    if len(log) == 0:
        raise DegenerateInputError("empty event log")
    last_day = int(log.day_of(log.last_time))
    return iter_snapshot_series(log, log.end_of_day(start_day), cadence_days * SECONDS_PER_DAY,
                                end=log.end_of_day(last_day + cadence_days - 1))


def daily_series(log: EventLog, cadence_days: int = 1, start_day: int = 0) -> list[GraphSnapshot]:
    return list(iter_daily_series(log, cadence_days, start_day))
