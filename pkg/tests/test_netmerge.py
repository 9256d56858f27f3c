import io

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dyngraph.errors import DegenerateInputError
from dyngraph.netmerge import (ORIGIN_A, ORIGIN_B, ORIGIN_NEW, ORIGIN_UNKNOWN, EdgeClass,
                               MergeScenario, UnknownOriginError, activity_series,
                               classify_edges, cross_network_distance, duplicate_estimate,
                               edge_classes, edge_ratio_series, write_rows)
from dyngraph.store import ingest
from dyngraph.synth import Mixing, SynthConfig, generate_two_network

from conftest import DAY

MERGE = 10


def _log(nodes, edges, tail_day=None):
    """``nodes``: (day, id, tag); ``edges``: (day, u, v).  Times are whole days."""
    lines = [f"{d * DAY},N,{u},{tag}" for d, u, tag in nodes]
    lines += [f"{d * DAY + 1},E,{u},{v}" for d, u, v in edges]
    if tail_day is not None:
        lines.append(f"{tail_day * DAY},N,999999,N")
    lines.sort(key=lambda s: int(s.split(",")[0]))
    return ingest(lines, "strict")


def _two_groups(a=5, b=5, extra_nodes=(), edges=(), tail_day=None):
    nodes = [(0, i, "A") for i in range(a)] + [(0, 100 + i, "B") for i in range(b)]
    return _log(nodes + list(extra_nodes), edges, tail_day)


def test_origins_from_tags_and_join_day():
    log = _two_groups(extra_nodes=[(MERGE, 500, "N"), (MERGE - 1, 7, "A")])
    sc = MergeScenario.from_log(log, MERGE)
    idx = {int(x): i for i, x in enumerate(log.node_ids)}
    assert sc.origin[idx[0]] == ORIGIN_A
    assert sc.origin[idx[100]] == ORIGIN_B
    assert sc.origin[idx[500]] == ORIGIN_NEW
    assert sc.origin[idx[7]] == ORIGIN_A


def test_origins_from_id_ranges():
    log = _log([(0, 1, "x"), (0, 50, "x"), (0, 77, "x")], [])
    sc = MergeScenario.from_log(log, 0, id_ranges={"A": (0, 9), "B": (40, 60)})
    assert sc.origin.tolist() == [ORIGIN_NEW] * 3  # everyone joined on the merge day
    sc = MergeScenario.from_log(_log([(0, 1, "x"), (0, 50, "x"), (0, 77, "x"), (5, 2, "x")], []),
                                5, id_ranges={"A": (0, 9), "B": (40, 60)})
    assert sc.origin.tolist() == [ORIGIN_A, ORIGIN_B, ORIGIN_UNKNOWN, ORIGIN_NEW]
    with pytest.raises(UnknownOriginError):
        MergeScenario.from_log(_log([(0, 77, "x"), (5, 2, "x")], []), 5,
                               id_ranges={"A": (0, 9)}, strict=True)


def test_edge_class_rules():
    log = _two_groups(extra_nodes=[(MERGE, 500, "N")],
                      edges=[(MERGE - 1, 0, 1), (MERGE, 0, 1 + 1), (MERGE, 100, 101),
                             (MERGE, 0, 100), (MERGE, 0, 500), (MERGE, 100, 500)])
    sc = MergeScenario.from_log(log, MERGE)
    assert edge_classes(log, sc).tolist() == [-1, EdgeClass.Internal_A, EdgeClass.Internal_B,
                                              EdgeClass.External, EdgeClass.ToNew, EdgeClass.ToNew]
    c = classify_edges(log, sc)
    assert c.totals.tolist() == [5]
    assert {k.name: int(v.sum()) for k, v in c.counts.items()} == {
        "Internal_A": 1, "Internal_B": 1, "External": 1, "ToNew": 2}


def test_unknown_origin_edges_counted_or_raised():
    log = _log([(0, 1, "A"), (0, 2, "Q")], [(MERGE, 1, 2)])
    sc = MergeScenario.from_log(log, MERGE)
    assert classify_edges(log, sc).unclassified == 1
    with pytest.raises(UnknownOriginError):
        classify_edges(log, sc, strict=True)


def test_merge_day_outside_span():
    log = _two_groups(edges=[(3, 0, 1)])
    with pytest.raises(DegenerateInputError):
        classify_edges(log, MergeScenario.from_log(log, 40))


def test_activity_window_arithmetic():
    # last edge of user 0 on merge day + 10, window 94: active on days 0..10 only
    log = _two_groups(edges=[(MERGE + 10, 0, 1)], tail_day=MERGE + 300)
    sc = MergeScenario.from_log(log, MERGE, activity_threshold_days=94)
    act = activity_series(log, sc)
    assert len(act.days) == 300 - 94 + 2
    a = act.active["A"]
    assert a[:11].tolist() == [2] * 11
    assert not a[11:].any()
    assert act.active["B"].sum() == 0
    assert act.population["A"][0] == 5


def test_backward_activity_window():
    log = _two_groups(edges=[(MERGE + 10, 0, 1)], tail_day=MERGE + 300)
    sc = MergeScenario.from_log(log, MERGE, activity_threshold_days=94)
    a = activity_series(log, sc, backward=True).active["A"]
    assert len(a) == 301
    assert np.flatnonzero(a).tolist() == list(range(10, 10 + 94))


def test_activity_scan_oracle(rng):
    nodes = [(0, i, "A") for i in range(30)] + [(0, 100 + i, "B") for i in range(30)]
    nodes += [(MERGE + d, 500 + d, "N") for d in range(20)]
    ids = [n[1] for n in nodes]
    join = {n[1]: n[0] for n in nodes}
    edges = set()
    for _ in range(300):
        u, v = rng.choice(ids, 2, replace=False).tolist()
        d = int(rng.integers(max(join[u], join[v]), MERGE + 60))
        edges.add((d, min(u, v), max(u, v)))
    edges = sorted({(d, u, v) for d, u, v in edges if (u, v) not in
                    {(u2, v2) for d2, u2, v2 in edges if d2 < d}})
    log = _log(nodes, edges)
    t = 7
    sc = MergeScenario.from_log(log, MERGE, activity_threshold_days=t)
    act = activity_series(log, sc)
    origin_of = {u: ("New" if join[u] >= MERGE else tag) for _, u, tag in nodes}
    last = max(d for d, _, _ in edges)
    for d in range(len(act.days)):
        for name in ("A", "B", "New"):
            expect = {x for e_day, u, v in edges if MERGE + d <= e_day < MERGE + d + t
                      for x in (u, v) if origin_of[x] == name and join[x] <= MERGE + d}
            assert act.active[name][d] == len(expect)
    assert len(act.days) == last - MERGE - t + 2


def test_edge_class_filter_is_monotone(rng):
    nodes = [(0, i, "A") for i in range(20)] + [(0, 100 + i, "B") for i in range(20)]
    pairs = {tuple(sorted(rng.choice(list(range(20)) + list(range(100, 120)), 2, replace=False).tolist()))
             for _ in range(200)}
    edges = [(MERGE + int(rng.integers(0, 30)), u, v) for u, v in pairs]
    log = _log(nodes, edges)
    sc = MergeScenario.from_log(log, MERGE, activity_threshold_days=5)
    full = activity_series(log, sc)
    ext = activity_series(log, sc, edge_class_filter=EdgeClass.External)
    both = activity_series(log, sc, edge_class_filter=[EdgeClass.External, EdgeClass.Internal_A])
    for name in ("A", "B"):
        assert np.all(ext.active[name] <= both.active[name])
        assert np.all(both.active[name] <= full.active[name])


def test_duplicates_inactive_users():
    # 20% of B never act after the merge
    edges = [(MERGE + 1, 100 + i, 100 + i + 1) for i in range(0, 8, 2)]
    edges += [(MERGE + 1, i, i + 1) for i in range(0, 10, 2)]
    log = _two_groups(a=10, b=10, edges=edges, tail_day=MERGE + 100)
    sc = MergeScenario.from_log(log, MERGE)
    est = duplicate_estimate(log, sc)
    assert est.inactive_a == 0.0
    assert est.inactive_b == pytest.approx(0.2)
    assert est.lower_bound == pytest.approx(0.2)


def test_no_post_merge_edges_means_inactive():
    log = _two_groups(edges=[(1, 0, 1)], tail_day=MERGE + 100)
    est = duplicate_estimate(log, MergeScenario.from_log(log, MERGE))
    assert est.inactive_a == 1.0 and est.inactive_b == 1.0


def test_duplicate_estimate_needs_full_window():
    log = _two_groups(edges=[(MERGE, 0, 100)])
    with pytest.raises(DegenerateInputError):
        duplicate_estimate(log, MergeScenario.from_log(log, MERGE))


def test_ratio_values_and_flags():
    edges = [(MERGE, i, i + 1) for i in range(0, 20, 2)]  # 10 internal A
    edges += [(MERGE, i, 100 + i) for i in range(5)]  # 5 external
    edges += [(MERGE + 1, 0, 1 + 2)]  # internal only on the second day
    log = _two_groups(a=21, b=10, edges=edges)
    r = edge_ratio_series(log, MergeScenario.from_log(log, MERGE))
    assert r.values["internal/external:A"][0] == 2.0
    assert r.values["internal/external:all"][0] == 2.0
    assert r.values["internal/external:B"][0] == 0.0
    assert r.flags["internal/external:A"].tolist() == [False, True]
    assert np.isnan(r.values["internal/external:A"][1])


def test_distance_single_external_edge():
    edges = [(0, i, i + 1) for i in range(4)] + [(0, 100 + i, 101 + i) for i in range(4)]
    edges += [(MERGE, 0, 100)]
    log = _two_groups(edges=edges)
    sc = MergeScenario.from_log(log, MERGE)
    before = cross_network_distance(log, sc, -1)
    assert before.unreachable_a == 5 and np.isnan(before.mean_a_to_b)
    after = cross_network_distance(log, sc, 0)
    # path A: 0-1-2-3-4, external edge 0-100: distances to B are 1..5
    assert after.mean_a_to_b == pytest.approx(3.0)
    assert after.unreachable_a == 0 and after.sampled_a == 5


def test_distance_excludes_new_users():
    log = _two_groups(extra_nodes=[(MERGE, 500, "N")],
                      edges=[(MERGE, 0, 500), (MERGE, 100, 500)])
    sc = MergeScenario.from_log(log, MERGE)
    res = cross_network_distance(log, sc, 0)
    assert res.unreachable_a == 5 and res.unreachable_b == 5


def test_distance_matches_networkx(rng):
    nodes = [(0, i, "A") for i in range(40)] + [(0, 100 + i, "B") for i in range(40)]
    ids = [n[1] for n in nodes]
    pairs = {tuple(sorted(rng.choice(ids, 2, replace=False).tolist())) for _ in range(90)}
    edges = [(MERGE + int(rng.integers(-5, 5)), u, v) for u, v in pairs]
    log = _log(nodes, edges)
    sc = MergeScenario.from_log(log, MERGE)
    res = cross_network_distance(log, sc, 2, sample_size=10_000)
    g = nx.Graph()
    g.add_nodes_from(ids)
    g.add_edges_from((u, v) for d, u, v in edges if d <= MERGE + 2)
    dist = nx.multi_source_dijkstra_path_length(g, set(range(100, 140)))
    reach = [dist[i] for i in range(40) if i in dist]
    assert res.unreachable_a == 40 - len(reach)
    if reach:
        assert res.mean_a_to_b == pytest.approx(np.mean(reach))


def test_generator_class_counts_match_truth():
    ca = SynthConfig(days=30, initial_nodes=100, daily_node_growth=1.02, edges_per_new_node=2, seed=1)
    cb = SynthConfig(days=20, initial_nodes=80, daily_node_growth=1.02, edges_per_new_node=2, seed=2)
    log, truth = generate_two_network(ca, cb, 30, Mixing(30, 10, 2, 2, 1.02, 1.0), 0.2,
                                      post_days=20, seed=0)
    sc = MergeScenario.from_log(log, 30, strict=True)
    c = classify_edges(log, sc, strict=True)
    for name in ("Internal_A", "Internal_B", "External", "ToNew"):
        expect = sum(day[name] for day in truth.daily_class_counts)
        got = int(c.counts[EdgeClass[name]].sum())
        assert abs(got - expect) <= 0.05 * expect


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 3)),
                min_size=1, max_size=40))
def test_classes_partition_post_merge_edges(raw):
    ids = list(range(4)) + list(range(100, 104)) + [500, 501]
    nodes = [(0, i, "A") for i in range(4)] + [(0, 100 + i, "B") for i in range(4)]
    nodes += [(MERGE, 500, "N"), (MERGE, 501, "N")]
    seen = set()
    edges = []
    for a, b, d in raw:
        u, v = sorted((ids[a], ids[b]))
        if u != v and (u, v) not in seen:
            seen.add((u, v))
            edges.append((MERGE - 1 + d if u < 500 and v < 500 else MERGE + d, u, v))
    log = _log(nodes, edges)
    c = classify_edges(log, MergeScenario.from_log(log, MERGE))
    assert np.array_equal(sum(c.counts.values()), c.totals)


def test_write_rows_flags_nan():
    buf = io.StringIO()
    write_rows([(0, "A", "x", float("nan"), 3), (1, "A", "x", 1.5, 0)], buf)
    lines = buf.getvalue().splitlines()
    assert lines[1] == "0,A,x,,1,3"
    assert lines[2].startswith("1,A,x,1.5,0")
