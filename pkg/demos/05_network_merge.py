"""
Two networks merging
====================

Network A grows for 200 days and network B for 150; on day 200 they merge.
28% of B's users are duplicates that never act again.  After the merge,
edges form inside each network, across them, and to a growing stream of
new users.
"""

import numpy as np

from dyngraph import (EdgeClass, MergeScenario, Mixing, SynthConfig, activity_series,
                      classify_edges, distance_series, duplicate_estimate, edge_ratio_series,
                      generate_two_network)

ca = SynthConfig(days=200, initial_nodes=500, daily_node_growth=1.02, edges_per_new_node=2, seed=1)
cb = SynthConfig(days=150, initial_nodes=300, daily_node_growth=1.02, edges_per_new_node=2, seed=2)
mixing = Mixing(internal_rate=150, external_rate=60, new_rate=3, new_users=3, new_growth=1.05)
log, truth = generate_two_network(ca, cb, 200, mixing, duplicate_fraction=0.28, post_days=150)

scenario = MergeScenario.from_log(log, merge_day=200, strict=True)

# users inactive for the 94 days after the merge
dup = duplicate_estimate(log, scenario)
print(f"inactive on the merge day: A {dup.inactive_a:.3f}, B {dup.inactive_b:.3f} (planted 0.28)")

act = activity_series(log, scenario)
print("active B users, every 10 days:", act.active["B"][::10])

counts = classify_edges(log, scenario)
print({c.name: int(counts.counts[c].sum()) for c in EdgeClass})

# edges to new users overtake edges across the two old networks
ratio = edge_ratio_series(log, scenario).values["new/external:all"]
print("new/external ratio, every 15 days:", np.round(ratio[::15], 2))

# the two old networks draw closer, then level off
for r in distance_series(log, scenario, days=[0, 10, 50, 100, 149], sample_size=500):
    print(f"day {r.day:3d}: A->B {r.mean_a_to_b:.2f} hops, B->A {r.mean_b_to_a:.2f} hops")
