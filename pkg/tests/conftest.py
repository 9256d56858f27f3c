import networkx as nx
import numpy as np
import pytest

from dyngraph.edges import Policy, choice_bits
from dyngraph.store import SECONDS_PER_DAY, ingest, snapshot_at

DAY = SECONDS_PER_DAY


def log_from(events, mode="strict"):
    """Build a log from ``(t, u)`` node tuples and ``(t, u, v)`` edge tuples."""
    lines = []
    for ev in events:
        if len(ev) == 2:
            lines.append(f"{ev[0]},N,{ev[1]}")
        else:
            lines.append(f"{ev[0]},E,{ev[1]},{ev[2]}")
    return ingest(lines, mode)


def graph_log(n, edges, t=0):
    """All nodes then all edges at one timestamp."""
    return log_from([(t, i) for i in range(n)] + [(t, a, b) for a, b in edges])


def graph_snapshot(n, edges):
    log = graph_log(n, edges)
    return snapshot_at(log, log.last_time)


def random_edges(rng, n, p):
    iu = np.triu_indices(n, 1)
    keep = rng.random(len(iu[0])) < p
    return list(zip(iu[0][keep].tolist(), iu[1][keep].tolist()))


def set_partitions(n):
    """All partitions of range(n) as restricted growth strings."""
    def rec(prefix, top):
        if len(prefix) == n:
            yield list(prefix)
            return
        for c in range(top + 2):
            yield from rec(prefix + [c], max(top, c))
    yield from rec([0], 0)


def exhaustive_max_q(n, edges):
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    best = -1.0
    for labels in set_partitions(n):
        comms = [set(np.flatnonzero(np.array(labels) == c)) for c in range(max(labels) + 1)]
        best = max(best, nx.community.modularity(g, comms))
    return best


TWO_TRIANGLES = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]


def brute_force_profile(log, at, window, policy, seed):
    """Replay one edge at a time, counting nodes per degree before every step."""
    bits = choice_bits(seed, log.edge_count)
    deg = {}
    hits, exposure = {}, {}
    node_pos = 0
    kinds = log.kind.tolist()
    us, vs = log.u.tolist(), log.v.tolist()
    step = 0
    for k, a, b in zip(kinds, us, vs):
        if k == 0:
            deg[a] = 0
            node_pos += 1
            continue
        step += 1
        if step > at:
            break
        if step > at - window:
            for d in deg.values():
                exposure[d] = exposure.get(d, 0) + 1
            da, db = deg[a], deg[b]
            pick = db if bits[step - 1] else da
            if policy is Policy.HigherDegree and da != db:
                pick = max(da, db)
            hits[pick] = hits.get(pick, 0) + 1
        deg[a] += 1
        deg[b] += 1
    return {d: hits.get(d, 0) / e for d, e in exposure.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
