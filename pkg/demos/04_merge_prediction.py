"""
Predicting merges
=================

Per-community features (size, in-degree ratio, self-similarity and their
change indicators) feed a linear SVM that predicts whether a community
merges at the next snapshot.  The destination of a merge is predicted as
the community it has the most edges to.
"""

import numpy as np

from dyngraph import (FEATURE_NAMES, MergeBlocks, PlantedScript, case_hit_rate, daily_series,
                      destination_hit_rate, extract_features, generate_planted,
                      scripted_destination_cases, scripted_merge_features, track,
                      train_classifier)

# features from a tracked planted run with several merges
script = PlantedScript([30] * 8, 0.3, 0.01, growth=0.05, seed=1,
                       events=[MergeBlocks(3, 0, 1), MergeBlocks(5, 2, 3), MergeBlocks(8, 5, 6)])
log, _ = generate_planted(script, days=10)
snaps = daily_series(log)
tracking = track(snaps, min_size=5, seed=0)
table = extract_features(tracking, snaps)
print(f"{len(table)} rows, {int(table.y.sum())} followed by a merge")
print({k: float(v) for k, v in zip(FEATURE_NAMES, np.round(table.X[np.argmax(table.y)], 3))})
# planted merges ignore pre-merge ties, so the strongest tie is a guess here
print("destination hit rate on tracked merges:", destination_hit_rate(tracking, snaps).rate)

# a larger scripted table where decelerating size growth precedes a merge
X, y, age = scripted_merge_features(2000, seed=0)
model, report = train_classifier(X, y, folds=5, age=age)
print(f"cross-validated accuracy: merge {report.merge_accuracy:.3f}, "
      f"no merge {report.no_merge_accuracy:.3f}")
top = np.argsort(-np.abs(model.weights))[:3]
print("largest weights:", [(FEATURE_NAMES[i], round(float(model.weights[i]), 2)) for i in top])

# without signal the classifier drops to chance
_, null = train_classifier(X, np.random.default_rng(0).permutation(y), folds=5)
print(f"permuted labels: {null.merge_accuracy:.3f} / {null.no_merge_accuracy:.3f}")

# strongest tie: perfect when merges follow ties, chance when they do not
print("tie-driven:", case_hit_rate(scripted_destination_cases(200, seed=1)).rate)
print("random:", case_hit_rate(scripted_destination_cases(400, tie_driven=False, seed=2)).rate)
