import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from dyngraph.store import daily_series, ingest
from dyngraph.synth import (AttachmentSampler, ConfigError, MergeBlocks, Mixing, PlantedScript,
                            SplitBlock, SynthConfig, generate_growth, generate_planted,
                            generate_two_network, scripted_merge_features)
from dyngraph.tracking import jaccard, track

from conftest import DAY


def test_growth_is_deterministic():
    cfg = SynthConfig(days=30, initial_nodes=50, activity_fraction=0.3, seed=4)
    a = list(generate_growth(cfg)[0].to_lines())
    b = list(generate_growth(cfg)[0].to_lines())
    c = list(generate_growth(SynthConfig(days=30, initial_nodes=50, activity_fraction=0.3,
                                         seed=5))[0].to_lines())
    assert a == b
    assert a != c


def test_generated_stream_passes_strict_ingest():
    log, truth = generate_growth(SynthConfig(days=40, initial_nodes=30, edges_per_new_node=2,
                                             activity_fraction=0.5, seed=1), tag="A")
    back = ingest(list(log.to_lines()), "strict")
    assert back.stats.events == len(log)
    np.testing.assert_array_equal(back.time, log.time)
    np.testing.assert_array_equal(back.node_ids, log.node_ids)
    assert back.edge_count == len(truth.edge_beta)
    assert set(back.networks) == {"A"}


def test_attachment_sampler_degree_proportional():
    edges = [(0, i) for i in range(1, 6)] + [(1, 2), (3, 4)]
    g = AttachmentSampler.from_edges(7, edges, seed=3)
    deg = np.bincount(np.ravel(edges), minlength=7)
    draws = np.bincount([g.pick(True, 7) for _ in range(100_000)], minlength=7)
    keep = deg > 0
    expected = deg[keep] / deg.sum() * 100_000
    assert stats.chisquare(draws[keep], expected).pvalue > 1e-3
    assert draws[6] == 0


def test_attachment_sampler_uniform_and_limit():
    g = AttachmentSampler.from_edges(5, [(0, 1)], seed=1)
    draws = np.bincount([g.pick(False, 5) for _ in range(50_000)], minlength=5)
    assert stats.chisquare(draws).pvalue > 1e-3
    assert {g.pick(True, 1) for _ in range(100)} == {0}


def test_preferential_share_follows_beta():
    _, truth = generate_growth(SynthConfig(days=60, initial_nodes=200, beta=0.3, seed=2))
    n = len(truth.edge_preferential)
    share = truth.edge_preferential.mean()
    assert abs(share - 0.3) <= 4 * np.sqrt(0.3 * 0.7 / n)


def test_beta_decay_schedule():
    cfg = SynthConfig(beta=1.0, beta_decay=0.15)
    assert cfg.beta_at(1) == 1.0
    assert cfg.beta_at(10_000) == pytest.approx(10_000 ** -0.15)
    _, truth = generate_growth(SynthConfig(days=40, initial_nodes=100, beta_decay=0.15, seed=1))
    assert np.all(np.diff(truth.edge_beta) <= 0)


def test_preferential_growth_has_bigger_hubs():
    base = dict(days=150, initial_nodes=50, daily_node_growth=1.03, seed=6)
    pa, _ = generate_growth(SynthConfig(beta=1.0, **base))
    un, _ = generate_growth(SynthConfig(beta=0.0, **base))
    deg_pa = np.bincount(np.concatenate([pa.edge_u, pa.edge_v]))
    deg_un = np.bincount(np.concatenate([un.edge_u, un.edge_v]))
    assert deg_pa.max() > 3 * deg_un.max()


def test_node_growth_rate():
    # Poisson jitter compounds from the first days; a large start keeps it near 1%
    cfg = SynthConfig(days=200, initial_nodes=10_000, daily_node_growth=1.01, seed=3)
    log, truth = generate_growth(cfg)
    for expected in (10_000 * 1.01 ** 199, 10_000 * 1.01 ** 200):
        assert abs(log.node_count - expected) <= 0.05 * expected
    assert sum(truth.daily_nodes) == log.node_count
    days = log.day_of(log.node_time)
    assert days.max() == 199


def test_max_edges_caps_stream():
    log, _ = generate_growth(SynthConfig(days=400, initial_nodes=100, daily_node_growth=1.05,
                                         max_edges=500, seed=1))
    assert log.edge_count == 500


def test_inter_arrival_gaps_are_whole_units():
    cfg = SynthConfig(days=10, initial_nodes=20, activity_fraction=1.0, activity_unit=600, seed=2)
    log, truth = generate_growth(cfg)
    # initial nodes only ever create edges through activity, at offsets of whole units
    initial = np.flatnonzero(truth.edge_source < 20)
    assert initial.size > 0
    assert np.all((log.edge_time[initial] - cfg.start_time) % 600 == 0)


@pytest.mark.parametrize("bad", [
    dict(daily_node_growth=1.0), dict(edges_per_new_node=0), dict(beta=1.5), dict(beta_decay=-1),
    dict(activity_fraction=2.0), dict(activity_fraction=0.5, inter_arrival_exponent=1.0),
    dict(initial_nodes=1),
])
def test_growth_config_validation(bad):
    with pytest.raises(ConfigError):
        generate_growth(SynthConfig(**bad))


def test_planted_partition_constant_without_events():
    sc = PlantedScript([30, 30, 30], 0.4, 0.02, growth=0.1, seed=2)
    log, truth = generate_planted(sc, 4)
    for k in range(1, 4):
        prev, cur = truth.blocks[k - 1], truth.blocks[k]
        assert all(cur[u] == b for u, b in prev.items())
    assert len(daily_series(log)) == 4
    assert [log.end_of_day(d) for d in range(4)] == truth.cut_times


def test_planted_densities():
    sc = PlantedScript([60, 60], 0.3, 0.02, seed=3)
    log, truth = generate_planted(sc, 1)
    blk = truth.blocks[0]
    ids = log.node_ids
    same = np.array([blk[int(ids[u])] == blk[int(ids[v])] for u, v in zip(log.edge_u, log.edge_v)])
    n_in, n_out = 2 * 60 * 59 / 2, 60 * 60
    assert abs(same.sum() / n_in - 0.3) < 0.03
    assert abs((~same).sum() / n_out - 0.02) < 0.01


def test_planted_merge_fills_cross_density():
    sc = PlantedScript([60, 60, 60], 0.3, 0.02, events=[MergeBlocks(1, 0, 1)], seed=4)
    log, truth = generate_planted(sc, 2)
    assert truth.events == [("merge", 1, (0, 1))]
    blk0 = truth.blocks[0]
    ids = log.node_ids
    cross = sum(1 for u, v in zip(log.edge_u, log.edge_v)
                if {blk0.get(int(ids[u])), blk0.get(int(ids[v]))} == {0, 1})
    assert abs(cross / 3600 - 0.3) < 0.03
    assert set(truth.blocks[1].values()) == {0, 2}


def test_planted_tracking_round_trip():
    sc = PlantedScript([50] * 4, 0.3, 0.01, events=[MergeBlocks(4, 0, 1), SplitBlock(8, 2, 0.5)],
                       growth=0.05, seed=3)
    log, truth = generate_planted(sc, 12)
    snaps = daily_series(log)
    tr = track(snaps, seed=0)
    for k in (0, 6, 11):
        found = tr.partitions[k].labels
        ids = snaps[k].node_ids
        for members in truth.members(k).values():
            idx = np.flatnonzero(np.isin(ids, list(members)))
            best = max(jaccard(idx, np.flatnonzero(found == c)) for c in np.unique(found[idx]))
            assert best >= 0.9


def test_planted_script_validation():
    with pytest.raises(ConfigError):
        generate_planted(PlantedScript([10], 0.1, 0.2), 3)
    with pytest.raises(ConfigError):
        generate_planted(PlantedScript([10, 10], 0.3, 0.01, events=[MergeBlocks(5, 0, 1)]), 3)
    with pytest.raises(ConfigError):
        generate_planted(PlantedScript([10, 10], 0.3, 0.01, events=[SplitBlock(1, 0, 1.0)]), 3)


def test_two_network_truth():
    ca = SynthConfig(days=30, initial_nodes=100, seed=1)
    cb = SynthConfig(days=20, initial_nodes=80, seed=2)
    log, truth = generate_two_network(ca, cb, 30, Mixing(20, 10, 2, 2, 1.02), 0.25,
                                      post_days=30, seed=0)
    assert set(log.networks) == {"A", "B", "N"}
    n_b = sum(1 for o in truth.origin.values() if o == "B")
    assert len(truth.duplicates) == round(0.25 * n_b)
    assert all(truth.origin[d] == "B" for d in truth.duplicates)
    ids = log.node_ids
    post = log.edge_time >= truth.merge_time
    ends = set(ids[log.edge_u[post]].tolist()) | set(ids[log.edge_v[post]].tolist())
    assert not ends & truth.duplicates
    # B starts later than A, both end at the merge
    b_first = min(t for t, x in zip(log.node_time, ids) if truth.origin.get(int(x)) == "B")
    assert b_first == log.t0 + 10 * DAY
    assert log.day_of(log.last_time) == 59


def test_two_network_validation():
    with pytest.raises(ConfigError):
        generate_two_network(SynthConfig(days=40), SynthConfig(days=10), 30, Mixing(), 0.1)
    with pytest.raises(ConfigError):
        generate_two_network(SynthConfig(days=10), SynthConfig(days=10), 30, Mixing(), 1.0)
    with pytest.raises(ConfigError):
        generate_two_network(SynthConfig(days=10), SynthConfig(days=10), 30,
                             Mixing(external_rate=-1), 0.1)


def test_scripted_merge_features_rule():
    X, y, age = scripted_merge_features(1000, seed=0, label_noise=0.0)
    assert X.shape == (1000, 13)
    assert np.all(X[y, 9] == -1)
    assert np.all(X[~y, 9] >= 0)
    np.testing.assert_array_equal(X[:, 12], age)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sampler_picks_existing_nodes(seed):
    r = random.Random(seed)
    n = r.randint(2, 30)
    edges = {(a, b) for a, b in ((r.randrange(n), r.randrange(n)) for _ in range(3 * n)) if a < b}
    g = AttachmentSampler.from_edges(n, sorted(edges), seed=seed)
    limit = r.randint(1, n)
    for pref in (True, False):
        x = g.pick(pref and any(a < limit for e in edges for a in e), limit)
        assert 0 <= x < limit
