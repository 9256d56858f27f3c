"""Analytics for dynamic graphs built from timestamped node and edge creations."""

__version__ = "0.1.0"

from .errors import DegenerateInputError, DynGraphError, IngestError, InsufficientDataError
from .store import (EventKind, EventLog, EventRecord, GraphSnapshot, daily_series, ingest,
                    iter_daily_series, iter_snapshot_series, snapshot_at, snapshot_series)
from .metrics import (Metric, MetricSeries, assortativity, avg_clustering, avg_degree,
                      avg_path_length, growth_series, metric_series)
from .powerlaw import fit_power_law
from .edges import (Policy, alpha_series, edge_probability_profile, fit_alpha,
                    inter_arrival_histogram, lifetime_activity_profile, minimal_age_attribution)
from .louvain import CommunityPartition, louvain, modularity
from .tracking import (community_impact, community_stats, delta_sweep, size_ratio_analysis,
                       track)
from .merge import (FEATURE_NAMES, LinearSVM, case_hit_rate, destination_hit_rate,
                    extract_features, fit_svm, predict_destination, strongest_tie,
                    train_classifier)
from .netmerge import (EdgeClass, MergeScenario, activity_series, classify_edges,
                       cross_network_distance, distance_series, duplicate_estimate,
                       edge_ratio_series)
from .synth import (MergeBlocks, Mixing, PlantedScript, SplitBlock, SynthConfig,
                    generate_growth, generate_planted, generate_two_network,
                    scripted_destination_cases, scripted_merge_features)

__all__ = [
    "activity_series",
    "alpha_series",
    "assortativity",
    "avg_clustering",
    "avg_degree",
    "avg_path_length",
    "case_hit_rate",
    "classify_edges",
    "community_impact",
    "community_stats",
    "CommunityPartition",
    "cross_network_distance",
    "daily_series",
    "DegenerateInputError",
    "delta_sweep",
    "destination_hit_rate",
    "distance_series",
    "duplicate_estimate",
    "DynGraphError",
    "edge_probability_profile",
    "edge_ratio_series",
    "EdgeClass",
    "EventKind",
    "EventLog",
    "EventRecord",
    "extract_features",
    "FEATURE_NAMES",
    "fit_alpha",
    "fit_power_law",
    "fit_svm",
    "generate_growth",
    "generate_planted",
    "generate_two_network",
    "GraphSnapshot",
    "growth_series",
    "ingest",
    "IngestError",
    "InsufficientDataError",
    "inter_arrival_histogram",
    "iter_daily_series",
    "iter_snapshot_series",
    "lifetime_activity_profile",
    "LinearSVM",
    "louvain",
    "MergeBlocks",
    "MergeScenario",
    "Metric",
    "metric_series",
    "MetricSeries",
    "minimal_age_attribution",
    "Mixing",
    "modularity",
    "PlantedScript",
    "Policy",
    "predict_destination",
    "scripted_destination_cases",
    "scripted_merge_features",
    "size_ratio_analysis",
    "snapshot_at",
    "snapshot_series",
    "SplitBlock",
    "strongest_tie",
    "SynthConfig",
    "track",
    "train_classifier",
]
