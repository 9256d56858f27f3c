"""Synthetic dynamic graphs with known ground truth.

Three generators:

* :func:`generate_growth` -- exponential node growth where every edge picks
  its destination preferentially (proportional to degree) with probability
  ``beta(n)`` and uniformly at random otherwise; existing nodes optionally
  keep creating edges with power-law distributed gaps.
* :func:`generate_planted` -- a planted partition whose blocks grow, merge and
  split on a schedule.
* :func:`generate_two_network` -- two independently grown networks that merge
  on a given day, after which edges are drawn by class (internal, external,
  to new users) and a fraction of one network's users goes silent.
"""

from __future__ import annotations

import heapq
import json
import random
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DynGraphError
from .store import SECONDS_PER_DAY, IngestStats, _Columns, _finalize

DEFAULT_START = 1_000_000_000


class ConfigError(DynGraphError, ValueError):
    pass


@dataclass
class SynthConfig:
    """Parameters of :func:`generate_growth`.

    ``beta`` is the preferential share of destinations; with ``beta_decay``
    set to ``eta`` it becomes ``beta * n**-eta`` for edge count ``n``.
    A fraction ``activity_fraction`` of nodes keeps creating edges after
    joining, with gaps of ``k * activity_unit`` seconds where ``k`` follows a
    zeta law with exponent ``inter_arrival_exponent``.
    """

    days: int = 200
    initial_nodes: int = 100
    daily_node_growth: float = 1.02
    edges_per_new_node: int = 1
    beta: float = 1.0
    beta_decay: float = 0.0
    activity_fraction: float = 0.0
    inter_arrival_exponent: float = 2.2
    activity_unit: int = 3600
    max_edges: int | None = None
    seed: int = 0
    start_time: int = DEFAULT_START

    def validate(self) -> None:
        if self.daily_node_growth <= 1.0:
            raise ConfigError("daily_node_growth must exceed 1")
        if self.edges_per_new_node < 1:
            raise ConfigError("edges_per_new_node must be at least 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ConfigError("beta must lie in [0, 1]")
        if self.beta_decay < 0:
            raise ConfigError("beta_decay must be non-negative")
        if not 0.0 <= self.activity_fraction <= 1.0:
            raise ConfigError("activity_fraction must lie in [0, 1]")
        if self.activity_fraction > 0 and self.inter_arrival_exponent <= 1.0:
            raise ConfigError("inter_arrival_exponent must exceed 1")
        if self.initial_nodes < 2 or self.days < 1 or self.activity_unit < 1:
            raise ConfigError("need initial_nodes >= 2, days >= 1, activity_unit >= 1")

    def beta_at(self, n_edges: int) -> float:
        if self.beta_decay == 0:
            return self.beta
        return min(1.0, self.beta * max(n_edges, 1) ** (-self.beta_decay))


@dataclass
class GrowthTruth:
    config: SynthConfig
    edge_beta: np.ndarray
    edge_preferential: np.ndarray
    edge_source: np.ndarray
    active: np.ndarray
    daily_nodes: list[int]

    def to_json(self) -> str:
        return json.dumps({
            "config": asdict(self.config),
            "edges": int(len(self.edge_beta)),
            "nodes": int(len(self.active)),
            "active_nodes": int(self.active.sum()),
            "preferential_edges": int(self.edge_preferential.sum()),
            "mean_beta": float(self.edge_beta.mean()) if len(self.edge_beta) else None,
            "daily_nodes": self.daily_nodes,
        }, sort_keys=True)


def _rng_pair(seed: int, label: str):
    """Independent numpy and stdlib generators derived from ``(seed, label)``."""
    ss = np.random.SeedSequence([seed, *label.encode()])
    np_rng = np.random.default_rng(ss)
    py_rng = random.Random(int(ss.generate_state(2, np.uint64)[0]))
    return np_rng, py_rng


class _Buffered:
    """Batched zeta draws from numpy for use inside Python loops."""

    def __init__(self, rng: np.random.Generator, exponent: float, batch: int = 65536):
        self.rng, self.exponent, self.batch = rng, exponent, batch
        self.buf: list[int] = []

    def next(self) -> int:
        if not self.buf:
            self.buf = self.rng.zipf(self.exponent, self.batch).tolist()[::-1]
        return self.buf.pop()


class AttachmentSampler:
    """Mutable graph with O(1) degree-proportional and uniform node sampling.

    Degree-proportional draws pick a uniform slot of the endpoint list (each
    edge stores both of its ends), which selects node ``x`` with
    probability ``deg(x) / 2E`` without any tree updates.
    """

    def __init__(self, py_rng: random.Random):
        self.rng = py_rng
        self.endpoints: list[int] = []  # each edge contributes both ends
        self.n = 0
        self.edges: set[int] = set()

    def add_node(self) -> int:
        self.n += 1
        return self.n - 1

    def key(self, a: int, b: int) -> int:
        return (a << 32) | b if a < b else (b << 32) | a

    def has(self, a: int, b: int) -> bool:
        return self.key(a, b) in self.edges

    def add_edge(self, a: int, b: int) -> None:
        self.edges.add(self.key(a, b))
        self.endpoints.append(a)
        self.endpoints.append(b)

    @classmethod
    def from_edges(cls, n: int, edges, seed: int = 0) -> "AttachmentSampler":
        g = cls(random.Random(seed))
        g.n = n
        for a, b in edges:
            g.add_edge(int(a), int(b))
        return g

    def pick(self, preferential: bool, limit: int) -> int:
        """Node below index ``limit``, proportional to degree or uniform."""
        if preferential and self.endpoints:
            while True:
                x = self.endpoints[int(self.rng.random() * len(self.endpoints))]
                if x < limit:
                    return x
        return int(self.rng.random() * limit)


def generate_growth(config: SynthConfig, tag: str | None = None, id_offset: int = 0):
    """Grow a network by daily node arrivals and mixed attachment.

    Returns ``(log, truth)``.  Day 0 holds the initial nodes; on each later
    day ``Poisson(N * (g - 1))`` nodes arrive at uniformly random seconds and
    immediately create ``m`` edges.  Every edge chooses its destination
    preferentially with probability ``beta(n)``, otherwise uniformly.
    """
    config.validate()
    np_rng, rng = _rng_pair(config.seed, "growth")
    cols = _Columns()
    g = AttachmentSampler(rng)
    edge_beta: list[float] = []
    edge_pref: list[bool] = []
    edge_src: list[int] = []
    active: list[bool] = []
    daily = []
    gaps = _Buffered(np_rng, config.inter_arrival_exponent) if config.activity_fraction > 0 else None
    pending: list[tuple[int, int, int]] = []  # (time, seq, node)
    seq = 0
    max_edges = config.max_edges if config.max_edges is not None else float("inf")
    n_edges = 0
    line = 0

    def emit_node(t):
        nonlocal line
        line += 1
        u = g.add_node()
        cols.add(t, 0, u + id_offset, -1, tag, line)
        return u

    def emit_edge(t, src, limit):
        """One edge from ``src`` to a destination below ``limit``; False if none found."""
        nonlocal line, n_edges
        b = config.beta_at(n_edges)
        for _ in range(16):
            pref = rng.random() < b
            dst = g.pick(pref, limit)
            if dst != src and not g.has(src, dst):
                break
        else:
            return False
        g.add_edge(src, dst)
        line += 1
        cols.add(t, 1, src + id_offset, dst + id_offset, tag, line)
        edge_beta.append(b)
        edge_pref.append(pref)
        edge_src.append(src)
        n_edges += 1
        return True

    def join(t):
        nonlocal seq
        u = emit_node(t)
        is_active = gaps is not None and rng.random() < config.activity_fraction
        active.append(is_active)
        if is_active:
            seq += 1
            heapq.heappush(pending, (t + gaps.next() * config.activity_unit, seq, u))
        return u

    t0 = config.start_time
    for _ in range(config.initial_nodes):
        join(t0)
    daily.append(config.initial_nodes)

    for day in range(1, config.days):
        if n_edges >= max_edges:
            break
        day_start = t0 + day * SECONDS_PER_DAY
        day_end = day_start + SECONDS_PER_DAY
        k = int(np_rng.poisson(g.n * (config.daily_node_growth - 1.0)))
        arrivals = sorted(int(x) for x in np_rng.integers(day_start, day_end, size=k))
        daily.append(k)
        ai = 0
        while n_edges < max_edges:
            next_arrival = arrivals[ai] if ai < len(arrivals) else day_end
            if pending and pending[0][0] < min(next_arrival, day_end):
                t, _, u = heapq.heappop(pending)
                emit_edge(t, u, g.n)
                seq += 1
                heapq.heappush(pending, (t + gaps.next() * config.activity_unit, seq, u))
                continue
            if ai >= len(arrivals):
                break
            t = arrivals[ai]
            ai += 1
            limit = g.n
            u = join(t)
            for _ in range(config.edges_per_new_node):
                if n_edges >= max_edges:
                    break
                emit_edge(t, u, limit)

    log = _finalize(cols, "strict", IngestStats(lines_read=line))
    truth = GrowthTruth(config, np.array(edge_beta), np.array(edge_pref, dtype=bool),
                        np.array(edge_src, dtype=np.int64) + id_offset,
                        np.array(active, dtype=bool), daily)
    return log, truth


# --------------------------------------------------------------------------
# planted dynamic partitions

@dataclass
class MergeBlocks:
    at: int
    a: int
    b: int


@dataclass
class SplitBlock:
    at: int
    block: int
    ratio: float = 0.5


@dataclass
class PlantedScript:
    """Schedule for :func:`generate_planted`.

    Blocks are labelled by their index in ``block_sizes``.  Every snapshot
    each live block gains ``round(growth * size)`` members.  A split hands
    each part ``split_growth`` times its own size in fresh members that link
    only inside the part, which is what lets the two parts separate in a
    creation-only stream.  ``background_nodes`` belong to no block and link
    with density ``p_out`` only.
    """

    block_sizes: Sequence[int]
    p_in: float
    p_out: float
    events: Sequence[MergeBlocks | SplitBlock] = ()
    growth: float = 0.0
    split_growth: float = 2.0
    background_nodes: int = 0
    seed: int = 0

    def validate(self, n_snapshots: int) -> None:
        if not (0 < self.p_out < self.p_in <= 1):
            raise ConfigError("need 0 < p_out < p_in <= 1")
        for ev in self.events:
            if not 0 < ev.at < n_snapshots:
                raise ConfigError(f"event at snapshot {ev.at} outside 1..{n_snapshots - 1}")
            if isinstance(ev, SplitBlock) and not 0 < ev.ratio < 1:
                raise ConfigError("split ratio must lie in (0, 1)")


@dataclass
class PlantedTruth:
    cut_times: list[int]
    blocks: list[dict[int, int]]  # per snapshot: node id -> block label
    events: list[tuple[str, int, tuple[int, ...]]] = field(default_factory=list)

    def members(self, k: int) -> dict[int, set[int]]:
        out: dict[int, set[int]] = {}
        for node, b in self.blocks[k].items():
            out.setdefault(b, set()).add(node)
        return out

    def to_json(self) -> str:
        return json.dumps({
            "cut_times": self.cut_times,
            "events": self.events,
            "blocks": [{str(k): v for k, v in b.items()} for b in self.blocks],
        }, sort_keys=True)


def generate_planted(script: PlantedScript, days: int, cadence: int = 1):
    """Event stream realizing a scheduled sequence of planted partitions.

    Snapshot ``k`` covers days ``[k * cadence, (k + 1) * cadence)``; its cut
    time is the last second of that range.  The first node is created at
    the very start, so ``daily_series(log, cadence)`` reproduces the cuts as
    long as the final snapshot has events.  Returns ``(log, truth)``.
    """
    n_snap = days // cadence
    if n_snap < 1:
        raise ConfigError("days must cover at least one cadence")
    script.validate(n_snap)
    np_rng, rng = _rng_pair(script.seed, "planted")
    t0 = DEFAULT_START
    span = cadence * SECONDS_PER_DAY

    block_of: dict[int, int] = {}
    members: dict[int, list[int]] = {}
    background: list[int] = []
    edges: set[tuple[int, int]] = set()
    events: list[tuple[int, int, int, int]] = []  # (time, kind, u, v)
    next_id = 0
    next_label = len(script.block_sizes)
    cut_times = []
    truth_blocks = []
    realized = []
    by_time: dict[int, list] = {}
    for ev in script.events:
        by_time.setdefault(ev.at, []).append(ev)

    def add_edge(a, b, t):
        key = (a, b) if a < b else (b, a)
        if key not in edges:
            edges.add(key)
            events.append((t, 1, a, b))

    def new_node(t, label):
        nonlocal next_id
        u = next_id
        next_id += 1
        events.append((t, 0, u, -1))
        if label is None:
            background.append(u)
        else:
            block_of[u] = label
            members.setdefault(label, [])
        return u

    def connect(u, t):
        """Link a fresh node to earlier nodes with the planted densities."""
        lab = block_of.get(u)
        for other_lab, mem in members.items():
            p = script.p_in if other_lab == lab else script.p_out
            for x in mem:
                if rng.random() < p:
                    add_edge(u, x, t)
        for x in background:
            if rng.random() < script.p_out:
                add_edge(u, x, t)

    def times(k, count):
        start = t0 + k * span
        out = sorted(int(x) for x in np_rng.integers(start, start + span, size=count))
        if k == 0 and out:
            out[0] = start  # day boundaries of the log then match the snapshot cuts
        return out

    for k in range(n_snap):
        if k == 0:
            total = sum(script.block_sizes) + script.background_nodes
            labels = [b for b, s in enumerate(script.block_sizes) for _ in range(s)]
            labels += [None] * script.background_nodes
            rng.shuffle(labels)
            for t, lab in zip(times(0, total), labels):
                u = new_node(t, lab)
                connect(u, t)
                if lab is not None:
                    members[lab].append(u)
        else:
            split_parts: dict[int, list[int]] = {}
            for ev in by_time.get(k, ()):
                start = t0 + k * span
                if isinstance(ev, MergeBlocks):
                    a, b = ev.a, ev.b
                    p_fill = (script.p_in - script.p_out) / (1 - script.p_out)
                    for x in members[a]:
                        for y in members[b]:
                            if rng.random() < p_fill:
                                add_edge(x, y, start)
                    keep, gone = (a, b) if len(members[a]) >= len(members[b]) else (b, a)
                    for y in members[gone]:
                        block_of[y] = keep
                    members[keep].extend(members.pop(gone))
                    realized.append(("merge", k, (keep, gone)))
                else:
                    mem = list(members[ev.block])
                    rng.shuffle(mem)
                    cut = int(round(len(mem) * ev.ratio))
                    new_lab = next_label
                    next_label += 1
                    members[ev.block] = mem[:cut]
                    members[new_lab] = mem[cut:]
                    for y in mem[cut:]:
                        block_of[y] = new_lab
                    split_parts[ev.block] = mem[:cut]
                    split_parts[new_lab] = mem[cut:]
                    realized.append(("split", k, (ev.block, new_lab)))
            # arrivals: regular growth plus split reinforcement
            plan = []
            for lab, mem in members.items():
                extra = int(round(script.growth * len(mem)))
                if lab in split_parts:
                    extra += int(round(script.split_growth * len(split_parts[lab])))
                plan += [lab] * extra
            rng.shuffle(plan)
            for t, lab in zip(times(k, len(plan)), plan):
                u = new_node(t, lab)
                connect(u, t)
                members[lab].append(u)
        cut_times.append(t0 + (k + 1) * span - 1)
        truth_blocks.append(dict(block_of))

    events.sort(key=lambda e: e[0])
    cols = _Columns()
    for i, (t, kind, a, b) in enumerate(events, start=1):
        cols.add(t, kind, a, b, None, i)
    log = _finalize(cols, "strict", IngestStats(lines_read=len(events)))
    return log, PlantedTruth(cut_times, truth_blocks, realized)


# --------------------------------------------------------------------------
# two merging networks

@dataclass
class Mixing:
    """Daily post-merge edge volumes.

    ``internal_rate`` edges per day inside each origin network and
    ``external_rate`` across them; ``external_growth`` multiplies the
    external rate every day.  New users arrive at ``new_users`` per day,
    growing by ``new_growth`` per day, each creating ``new_rate`` edges to
    pre-merge users.
    """

    internal_rate: float = 50.0
    external_rate: float = 20.0
    new_rate: float = 2.0
    new_users: float = 5.0
    new_growth: float = 1.05
    external_growth: float = 1.0

    def validate(self) -> None:
        for name in ("internal_rate", "external_rate", "new_rate", "new_users"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.new_growth <= 0 or self.external_growth <= 0:
            raise ConfigError("growth factors must be positive")


@dataclass
class TwoNetworkTruth:
    merge_day: int
    merge_time: int
    origin: dict[int, str]
    duplicates: set[int]
    daily_class_counts: list[dict[str, int]]

    def to_json(self) -> str:
        return json.dumps({
            "merge_day": self.merge_day,
            "merge_time": self.merge_time,
            "duplicates": sorted(self.duplicates),
            "daily_class_counts": self.daily_class_counts,
        }, sort_keys=True)


def generate_two_network(config_a: SynthConfig, config_b: SynthConfig, merge_day: int,
                         mixing: Mixing, duplicate_fraction: float, post_days: int = 150,
                         seed: int = 0):
    """Two networks grown separately, merged on ``merge_day``.

    Network B starts ``merge_day - config_b.days`` days after A.  Node ids of
    B are offset so they never collide with A.  Events carry origin tags
    ``"A"``/``"B"``; users joining on or after the merge day are tagged
    ``"N"``.  Returns ``(log, truth)``.
    """
    mixing.validate()
    if not 0 <= duplicate_fraction < 1:
        raise ConfigError("duplicate_fraction must lie in [0, 1)")
    if config_a.days > merge_day or config_b.days > merge_day:
        raise ConfigError("pre-merge growth must fit before the merge day")
    start = DEFAULT_START
    ca = SynthConfig(**{**asdict(config_a), "start_time": start + (merge_day - config_a.days) * SECONDS_PER_DAY})
    cb = SynthConfig(**{**asdict(config_b), "start_time": start + (merge_day - config_b.days) * SECONDS_PER_DAY})
    log_a, _ = generate_growth(ca, tag="A")
    offset = 1 << 40
    log_b, _ = generate_growth(cb, tag="B", id_offset=offset)
    np_rng, rng = _rng_pair(seed, "two-network")

    a_ids = log_a.node_ids.tolist()
    b_ids = log_b.node_ids.tolist()
    origin = {x: "A" for x in a_ids}
    origin.update({x: "B" for x in b_ids})
    n_dup = int(round(duplicate_fraction * len(b_ids)))
    dup = set(rng.sample(b_ids, n_dup))
    live = {"A": a_ids, "B": [x for x in b_ids if x not in dup]}
    edges: set[tuple[int, int]] = set()
    for lg in (log_a, log_b):
        ids = lg.node_ids
        for a, b in zip(ids[lg.edge_u].tolist(), ids[lg.edge_v].tolist()):
            edges.add((min(a, b), max(a, b)))

    post: list[tuple[int, int, int, int, str]] = []
    merge_time = start + merge_day * SECONDS_PER_DAY
    new_ids: list[int] = []
    next_new = 2 * offset
    counts = []

    def try_edge(t, pick_a, pick_b, tag):
        for _ in range(16):
            a, b = pick_a(), pick_b()
            key = (min(a, b), max(a, b))
            if a != b and key not in edges:
                edges.add(key)
                post.append((t, 1, a, b, tag))
                return True
        return False

    def uniform(pool):
        return lambda: pool[int(rng.random() * len(pool))]

    both = live["A"] + live["B"]
    for d in range(post_days):
        day_start = merge_time + d * SECONDS_PER_DAY
        stamp = lambda: day_start + int(rng.random() * SECONDS_PER_DAY)
        c = {"Internal_A": 0, "Internal_B": 0, "External": 0, "ToNew": 0}
        for net in ("A", "B"):
            for _ in range(int(np_rng.poisson(mixing.internal_rate))):
                c[f"Internal_{net}"] += try_edge(stamp(), uniform(live[net]), uniform(live[net]), net)
        ext = mixing.external_rate * mixing.external_growth ** d
        for _ in range(int(np_rng.poisson(ext))):
            c["External"] += try_edge(stamp(), uniform(live["A"]), uniform(live["B"]), None)
        arrivals = int(np_rng.poisson(mixing.new_users * mixing.new_growth ** d))
        for _ in range(arrivals):
            t = stamp()
            u = next_new
            next_new += 1
            post.append((t, 0, u, -1, "N"))
            new_ids.append(u)
            for _ in range(int(np_rng.poisson(mixing.new_rate))):
                c["ToNew"] += try_edge(t, lambda: u, uniform(both), "N")
        counts.append(c)

    cols = _Columns()
    line = 0
    streams = [(lg, tag) for lg, tag in ((log_a, "A"), (log_b, "B"))]
    merged = []
    for lg, tag in streams:
        for t, k, a, b in zip(lg.time.tolist(), lg.kind.tolist(), lg.u.tolist(), lg.v.tolist()):
            merged.append((t, k, a, b, tag))
    merged.sort(key=lambda e: e[0])
    post.sort(key=lambda e: (e[0], e[1]))
    for t, k, a, b, tag in merged + post:
        line += 1
        cols.add(t, k, a, b, tag, line)
    log = _finalize(cols, "strict", IngestStats(lines_read=line))
    for u in new_ids:
        origin[u] = "New"
    return log, TwoNetworkTruth(merge_day, merge_time, origin, dup, counts)


# --------------------------------------------------------------------------
# scripted inputs for the merge predictor

def scripted_merge_features(n_rows: int = 2000, seed: int = 0, label_noise: float = 0.05):
    """Feature rows whose label depends on the size acceleration indicator.

    Rows with a decelerating size (second-order indicator -1) merge in the
    next snapshot; a ``label_noise`` share of labels is flipped.  All other
    columns are noise.  Returns ``(X, y, age)`` with columns ordered as
    :data:`dyngraph.merge.FEATURE_NAMES`.
    """
    rng = np.random.default_rng(seed)
    y = rng.random(n_rows) < 0.5
    size = rng.integers(10, 200, n_rows).astype(float)
    ratio = rng.uniform(0.1, 0.5, n_rows)
    sim = rng.uniform(0.2, 1.0, n_rows)
    std = rng.exponential(2.0, (n_rows, 3))
    first = rng.integers(-1, 2, (n_rows, 3)).astype(float)
    second = rng.integers(-1, 2, (n_rows, 3)).astype(float)
    second[:, 0] = np.where(y, -1.0, rng.choice([0.0, 1.0], n_rows))
    age = rng.integers(1, 30, n_rows)
    X = np.column_stack([size, ratio, sim, std, first, second, age.astype(float)])
    flip = rng.random(n_rows) < label_noise
    y = np.where(flip, ~y, y)
    return X, y.astype(bool), age


def scripted_destination_cases(n_cases: int = 200, candidates: int = 4, tie_driven: bool = True,
                               seed: int = 0):
    """Small graphs where a subject community merges into one of several candidates.

    Each case is ``(adjacency_pairs, assignment, subject, realized)``: the
    subject clique is smaller than every candidate and has a distinct number of cross edges to every candidate
    clique; the realized destination is the strongest tie when
    ``tie_driven`` and a uniformly random candidate otherwise.
    """
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(n_cases):
        # the subject is the smallest community so it is the one absorbed
        sizes = np.concatenate([rng.integers(4, 6, 1), rng.integers(6, 10, candidates)])
        assignment = np.repeat(np.arange(candidates + 1), sizes)
        start = np.concatenate([[0], np.cumsum(sizes)])
        pairs = []
        for c in range(candidates + 1):
            nodes = range(start[c], start[c + 1])
            pairs += [(a, b) for a in nodes for b in nodes if a < b]
        ties = rng.permutation(np.arange(1, candidates + 1))
        subject_nodes = np.arange(start[0], start[1])
        for c, k in zip(range(1, candidates + 1), ties.tolist()):
            cand_nodes = np.arange(start[c], start[c + 1])
            chosen = rng.choice(len(subject_nodes) * len(cand_nodes), size=k, replace=False)
            for x in chosen.tolist():
                pairs.append((int(subject_nodes[x // len(cand_nodes)]),
                              int(cand_nodes[x % len(cand_nodes)])))
        strongest = 1 + int(np.argmax(ties))
        realized = strongest if tie_driven else int(rng.integers(1, candidates + 1))
        cases.append((pairs, assignment, 0, realized))
    return cases

