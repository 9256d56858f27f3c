"""
Edge creation dynamics
======================

Inter-arrival gaps of a node's edges, how activity is spread over a node's
lifetime, and how strongly new edges prefer high-degree destinations.
"""

import numpy as np

from dyngraph import (Policy, SynthConfig, alpha_series, edge_probability_profile, fit_alpha,
                      generate_growth, inter_arrival_histogram, lifetime_activity_profile,
                      minimal_age_attribution)

HOUR = 3600

# every node keeps creating edges with zeta(2.0) gaps measured in hours
cfg = SynthConfig(days=30, initial_nodes=1500, daily_node_growth=1.01, activity_fraction=1.0,
                  inter_arrival_exponent=2.0, activity_unit=HOUR, seed=3)
log, _ = generate_growth(cfg)

# a single bucket spanning the whole log; gaps measured in hours
hist = inter_arrival_histogram(log, age_bucket_width=10**9, unit=HOUR)
print("fitted inter-arrival exponent:", round(hist[0].fitted_exponent, 3), "(generator: 2.0)")

# activity over normalized lifetime and the age of the younger endpoint;
# the log spans 30 days, so ask for 10 days of history instead of 30
prof = lifetime_activity_profile(log, min_history=10 * 86400, min_degree=5)
print("lifetime profile:", np.round(prof, 3))
days, shares = minimal_age_attribution(log)
# columns: younger endpoint at most 1, 10 and 30 days old
for d, row in list(zip(days, shares))[::10]:
    print(f"day {d:2d} minimal-age shares {np.round(row, 3).tolist()}")

# preferential attachment strength: pure PA against uniform destinations
base = dict(days=400, initial_nodes=1000, daily_node_growth=1.05, max_edges=200_000,
            activity_fraction=1.0, activity_unit=20 * 86400, seed=1)
for beta in (1.0, 0.0):
    log, _ = generate_growth(SynthConfig(beta=beta, **base))
    series = alpha_series(log, window=50_000, start_edges=50_000, log_bins=5)
    print(f"beta={beta}:",
          {p.name: np.round(s.alphas, 2).tolist() for p, s in series.items()})

# the profile behind one fit
prof = edge_probability_profile(log, log.edge_count, Policy.RandomEndpoint, window=50_000,
                                log_bins=5)
fit = fit_alpha(prof)
print(f"last window: alpha={fit.alpha:.3f} over {fit.points} degree bins")
