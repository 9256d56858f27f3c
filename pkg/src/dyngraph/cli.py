"""Command-line pipelines over event logs.

Every run writes ``<subcommand>.<report>.csv`` (or ``.json``/``.jsonl``)
files plus ``manifest.json`` into the output directory.  Settings resolve in
order: built-in defaults, ``--config`` key=value file, ``DGL_*`` environment
variables, command-line flags.  ``--from-manifest`` replays a previous run.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .edges import (Policy, alpha_series, edge_probability_profile,
                    inter_arrival_histogram, lifetime_activity_profile, minimal_age_attribution,
                    write_alpha_csv)
from .errors import DynGraphError
from .merge import destination_hit_rate, extract_features, train_classifier
from .metrics import Metric, metric_series, write_series_csv
from .netmerge import (EdgeClass, MergeScenario, activity_series, classify_edges,
                       distance_series, duplicate_estimate, edge_ratio_series, write_rows)
from .store import SECONDS_PER_DAY, ingest, iter_daily_series
from .synth import (Mixing, MergeBlocks, PlantedScript, SplitBlock, SynthConfig,
                    generate_growth, generate_planted, generate_two_network)
from .tracking import community_stats, delta_sweep, size_ratio_analysis, track

SUBCOMMANDS = ("ingest", "snapshot", "metrics", "edgedyn", "pa-fit", "communities",
               "predict-merge", "netmerge", "synth")


class ConfigError(DynGraphError, ValueError):
    pass


@dataclass
class RunConfig:
    input: str = ""
    out: str = "reports"
    mode: str = "lenient"
    seed: int = 0
    threads: int = 1
    cadence_days: int = 1
    start_day: int = 0
    # metrics
    path_sample: int = 1000
    path_every: int = 3
    exclude_low_degree: bool = False
    # edge dynamics
    age_bucket_days: int = 30
    gap_unit: int = 1
    window: int = 5000
    start_edges: int = 600_000
    log_bins: int = 0
    profile_at: int = 0
    # communities
    delta: float = 0.04
    deltas: str = ""
    min_size: int = 10
    floor: float = 0.1
    track_from_day: int = 0
    feature_window: int = 5
    folds: int = 5
    # netmerge
    merge_day: int = -1
    activity_days: int = 94
    distance_sample: int = 1000
    distance_every: int = 1
    id_range_a: str = ""
    id_range_b: str = ""
    # synth
    kind: str = "growth"
    days: int = 200
    initial_nodes: int = 100
    growth: float = 1.02
    edges_per_node: int = 1
    beta: float = 1.0
    beta_decay: float = 0.0
    activity_fraction: float = 0.0
    gamma: float = 2.2
    activity_unit: int = 3600
    max_edges: int = 0
    blocks: str = "50,50,50,50"
    p_in: float = 0.3
    p_out: float = 0.01
    script: str = ""
    block_growth: float = 0.05
    days_b: int = 100
    initial_nodes_b: int = 100
    post_days: int = 150
    internal_rate: float = 50.0
    external_rate: float = 20.0
    external_growth: float = 1.0
    new_rate: float = 2.0
    new_users: float = 5.0
    new_growth: float = 1.05
    duplicate_fraction: float = 0.0

    @classmethod
    def keys(cls) -> dict[str, type]:
        return {f.name: f.type for f in fields(cls)}

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


_TYPES = {"int": int, "float": float, "bool": bool, "str": str}


def _coerce(key: str, value):
    kind = RunConfig.keys()[key]
    kind = _TYPES.get(kind, kind) if isinstance(kind, str) else kind
    if kind is bool:
        if isinstance(value, bool):
            return value
        if str(value).lower() in ("1", "true", "yes", "on"):
            return True
        if str(value).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: not a boolean: {value!r}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {kind.__name__}") from None


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RunConfig.keys():
            raise ConfigError(f"{path}:{n}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(file_values: dict, env: dict, cli_values: dict) -> RunConfig:
    values = {}
    values.update(file_values)
    for key in RunConfig.keys():
        env_key = "DGL_" + key.upper()
        if env_key in env:
            values[key] = env[env_key]
    values.update({k: v for k, v in cli_values.items() if v is not None})
    return RunConfig(**{k: _coerce(k, v) for k, v in values.items()})


def stage_seed(root: int, label: str) -> int:
    """Stable per-stage seed derived from the root seed and a label."""
    digest = hashlib.sha256(f"{root}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "little")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Reports:
    """Report files written to a temporary name and renamed into place."""

    def __init__(self, out: Path, subcommand: str):
        self.out = out
        self.subcommand = subcommand
        self.written: list[str] = []

    @contextlib.contextmanager
    def open(self, name: str):
        self.out.mkdir(parents=True, exist_ok=True)
        final = self.out / f"{self.subcommand}.{name}"
        fd, tmp = tempfile.mkstemp(dir=self.out, prefix=".tmp-", suffix=final.suffix)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                yield fh
            os.replace(tmp, final)
        except BaseException:
            with contextlib.suppress(FileNotFoundError):
                os.unlink(tmp)
            raise
        self.written.append(final.name)

    def json(self, name: str, obj) -> None:
        with self.open(name) as fh:
            fh.write(json.dumps(_finite(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


def _finite(obj):
    """Replace NaN and infinities by None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _load(cfg: RunConfig):
    return ingest(cfg.input, cfg.mode)


def _snapshots(cfg: RunConfig, log, start_day: int | None = None):
    return iter_daily_series(log, cfg.cadence_days, cfg.start_day if start_day is None else start_day)


# --------------------------------------------------------------------------
# stages

def run_ingest(cfg, rep):
    log = _load(cfg)
    rep.json("stats.json", log.stats.to_dict())


def run_snapshot(cfg, rep):
    log = _load(cfg)
    with rep.open("sizes.csv") as fh:
        fh.write("day,cut_time,node_count,edge_count,avg_degree\n")
        for s in _snapshots(cfg, log):
            avg = 2 * s.edge_count / s.node_count if s.node_count else 0.0
            fh.write(f"{s.day},{s.cut_time},{s.node_count},{s.edge_count},{avg!r}\n")


def run_metrics(cfg, rep):
    log = _load(cfg)
    series = metric_series(_snapshots(cfg, log), cfg.path_sample, stage_seed(cfg.seed, "metrics"),
                           cfg.path_every, not cfg.exclude_low_degree, cfg.threads)
    for metric in Metric:
        with rep.open(f"{metric.value}.csv") as fh:
            write_series_csv(series[metric], fh)


def run_edgedyn(cfg, rep):
    log = _load(cfg)
    hist = inter_arrival_histogram(log, cfg.age_bucket_days * SECONDS_PER_DAY, unit=cfg.gap_unit)
    with rep.open("interarrival.csv") as fh:
        fh.write("bucket,exponent,ks,gaps\n")
        for h in hist:
            exp = "" if not h.fitted else repr(h.fitted_exponent)
            ks = "" if not h.fitted else repr(h.fit_error)
            fh.write(f"{h.bucket},{exp},{ks},{len(h.gaps)}\n")
    try:
        prof = lifetime_activity_profile(log)
    except DynGraphError:
        prof = np.zeros(0)
    with rep.open("lifetime.csv") as fh:
        fh.write("bin,mass\n")
        for i, m in enumerate(prof.tolist()):
            fh.write(f"{i},{m!r}\n")
    days, frac = minimal_age_attribution(log)
    with rep.open("minimal_age.csv") as fh:
        fh.write("day,le_1d,le_10d,le_30d\n")
        for d, row in zip(days.tolist(), frac.tolist()):
            fh.write(f"{d}," + ",".join(repr(x) for x in row) + "\n")


def run_pa_fit(cfg, rep):
    log = _load(cfg)
    seed = stage_seed(cfg.seed, "pa-fit")
    series = alpha_series(log, cfg.window, cfg.start_edges, seed, cfg.log_bins or None)
    with rep.open("alpha.csv") as fh:
        write_alpha_csv(series, fh)
    if cfg.profile_at:
        with rep.open("profile.csv") as fh:
            fh.write("policy,degree,pe\n")
            for p in Policy:
                prof = edge_probability_profile(log, cfg.profile_at, p, cfg.window, seed,
                                                cfg.log_bins or None)
                for d, pe in zip(prof.degrees.tolist(), prof.pe.tolist()):
                    fh.write(f"{p.value},{d!r},{pe!r}\n")


def _track(cfg, log):
    snaps = list(_snapshots(cfg, log, max(cfg.start_day, cfg.track_from_day)))
    return snaps, track(snaps, cfg.delta, stage_seed(cfg.seed, "louvain"), cfg.min_size, cfg.floor)


def run_communities(cfg, rep):
    log = _load(cfg)
    snaps, tr = _track(cfg, log)
    with rep.open("timelines.jsonl") as fh:
        tr.write_timelines(fh)
    stats = community_stats(tr, snaps)
    with rep.open("modularity.csv") as fh:
        fh.write("day,modularity,communities,tracked,top5_coverage\n")
        for d, part, sizes, cov in zip(tr.days, tr.partitions, stats.sizes, stats.top5_coverage):
            fh.write(f"{d},{part.modularity!r},{part.n_communities},{len(sizes)},{cov!r}\n")
    with rep.open("lifetimes.csv") as fh:
        fh.write("lineage,birth_day,lifetime_snapshots,lifetime_days,censored\n")
        for t in tr.timelines:
            days = tr.days[t.last_alive] - tr.days[t.birth]
            fh.write(f"{t.lineage_id},{tr.days[t.birth]},{t.lifetime},{days},{int(t.censored)}\n")
    ratios = size_ratio_analysis(tr)
    with rep.open("ratios.csv") as fh:
        fh.write("kind,ratio\n")
        for kind, vals in (("merge", ratios.merge_ratios), ("split", ratios.split_ratios)):
            for v in vals.tolist():
                fh.write(f"{kind},{v!r}\n")
    if cfg.deltas:
        deltas = [float(x) for x in cfg.deltas.split(",") if x.strip()]
        sweep = delta_sweep(snaps, deltas, stage_seed(cfg.seed, "louvain"), cfg.min_size,
                            cfg.floor, threads=cfg.threads)
        with rep.open("sweep.csv") as fh:
            fh.write("delta,day,modularity,similarity\n")
            for d, res in sweep.items():
                for k, day in enumerate(tr.days):
                    sim = "" if k == 0 or np.isnan(res.similarity[k - 1]) else repr(float(res.similarity[k - 1]))
                    fh.write(f"{d!r},{day},{float(res.modularity[k])!r},{sim}\n")


def run_predict_merge(cfg, rep):
    log = _load(cfg)
    snaps, tr = _track(cfg, log)
    exclude = None
    if cfg.merge_day >= 0:
        days = np.array(tr.days)
        hit = np.flatnonzero(days >= cfg.merge_day)
        exclude = int(hit[0]) if hit.size else None
    table = extract_features(tr, snaps, cfg.feature_window, exclude)
    with rep.open("features.csv") as fh:
        table.write_csv(fh)
    model, report = train_classifier(table.X, table.y, cfg.folds,
                                     stage_seed(cfg.seed, "svm"), table.age)
    with rep.open("model.json") as fh:
        fh.write(model.to_json() + "\n")
    rep.json("accuracy.json", report.as_dict())
    hr = destination_hit_rate(tr, snaps, stage_seed(cfg.seed, "destination"))
    rep.json("destination.json", {"hits": hr.hits, "total": hr.total,
                                  "rate": None if hr.total == 0 else hr.rate})


def _parse_range(text: str):
    lo, hi = (int(x) for x in text.split(":"))
    return lo, hi


def run_netmerge(cfg, rep):
    if cfg.merge_day < 0:
        raise ConfigError("netmerge needs merge_day")
    log = _load(cfg)
    ranges = {}
    if cfg.id_range_a:
        ranges["A"] = _parse_range(cfg.id_range_a)
    if cfg.id_range_b:
        ranges["B"] = _parse_range(cfg.id_range_b)
    sc = MergeScenario.from_log(log, cfg.merge_day, cfg.activity_days, ranges or None)
    counts = classify_edges(log, sc)
    with rep.open("edges.csv") as fh:
        write_rows([(int(d), "all", c.name, int(counts.counts[c][i]), None)
                    for i, d in enumerate(counts.days) for c in EdgeClass], fh)
    with rep.open("activity.csv") as fh:
        rows = []
        for backward in (False, True):
            act = activity_series(log, sc, backward=backward)
            metric = "active_backward" if backward else "active"
            for name, vals in act.active.items():
                rows += [(int(d), name, metric, int(v), None) for d, v in zip(act.days, vals)]
        write_rows(rows, fh)
    try:
        dup = duplicate_estimate(log, sc)
        dup_obj = {"inactive_a": dup.inactive_a, "inactive_b": dup.inactive_b,
                   "lower_bound": dup.lower_bound}
    except DynGraphError as exc:
        dup_obj = {"error": str(exc)}
    rep.json("duplicates.json", dup_obj)
    ratios = edge_ratio_series(log, sc)
    with rep.open("ratios.csv") as fh:
        rows = []
        for key, vals in ratios.values.items():
            metric, origin = key.split(":")
            rows += [(int(d), origin, metric, float(v), None) for d, v in zip(ratios.days, vals)]
        write_rows(rows, fh)
    dist = distance_series(log, sc, range(0, len(counts.days), cfg.distance_every),
                           cfg.distance_sample, stage_seed(cfg.seed, "distance"))
    with rep.open("distance.csv") as fh:
        rows = []
        for r in dist:
            rows.append((r.day, "A", "distance_to_other", r.mean_a_to_b, r.unreachable_a))
            rows.append((r.day, "B", "distance_to_other", r.mean_b_to_a, r.unreachable_b))
        write_rows(rows, fh)


def _parse_script(text: str):
    events = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if parts[0] == "merge" and len(parts) == 4:
            events.append(MergeBlocks(int(parts[1]), int(parts[2]), int(parts[3])))
        elif parts[0] == "split" and len(parts) in (3, 4):
            ratio = float(parts[3]) if len(parts) == 4 else 0.5
            events.append(SplitBlock(int(parts[1]), int(parts[2]), ratio))
        else:
            raise ConfigError(f"bad script item {item!r}; use merge:AT:A:B or split:AT:BLOCK[:RATIO]")
    return events


def run_synth(cfg, rep):
    seed = stage_seed(cfg.seed, "synth")
    growth = SynthConfig(cfg.days, cfg.initial_nodes, cfg.growth, cfg.edges_per_node, cfg.beta,
                         cfg.beta_decay, cfg.activity_fraction, cfg.gamma, cfg.activity_unit,
                         cfg.max_edges or None, seed)
    if cfg.kind == "growth":
        log, truth = generate_growth(growth)
    elif cfg.kind == "planted":
        script = PlantedScript([int(x) for x in cfg.blocks.split(",")], cfg.p_in, cfg.p_out,
                               _parse_script(cfg.script), cfg.block_growth, seed=seed)
        log, truth = generate_planted(script, cfg.days, cfg.cadence_days)
    elif cfg.kind == "two-network":
        b = dataclasses.replace(growth, days=cfg.days_b, initial_nodes=cfg.initial_nodes_b,
                                seed=stage_seed(cfg.seed, "synth-b"))
        mix = Mixing(cfg.internal_rate, cfg.external_rate, cfg.new_rate, cfg.new_users,
                     cfg.new_growth, cfg.external_growth)
        merge_day = cfg.merge_day if cfg.merge_day >= 0 else cfg.days
        log, truth = generate_two_network(growth, b, merge_day, mix, cfg.duplicate_fraction,
                                          cfg.post_days, stage_seed(cfg.seed, "synth-merge"))
    else:
        raise ConfigError(f"unknown synth kind {cfg.kind!r}")
    with rep.open("events.csv") as fh:
        for line in log.to_lines():
            fh.write(line + "\n")
    with rep.open("truth.json") as fh:
        fh.write(truth.to_json() + "\n")


STAGES = {
    "ingest": run_ingest, "snapshot": run_snapshot, "metrics": run_metrics,
    "edgedyn": run_edgedyn, "pa-fit": run_pa_fit, "communities": run_communities,
    "predict-merge": run_predict_merge, "netmerge": run_netmerge, "synth": run_synth,
}

_OPTIONS = {
    "common": ["out", "seed", "threads"],
    "input": ["input", "mode", "cadence_days", "start_day"],
    "ingest": [],
    "snapshot": [],
    "metrics": ["path_sample", "path_every", "exclude_low_degree"],
    "edgedyn": ["age_bucket_days", "gap_unit"],
    "pa-fit": ["window", "start_edges", "log_bins", "profile_at"],
    "communities": ["delta", "deltas", "min_size", "floor", "track_from_day"],
    "predict-merge": ["delta", "min_size", "floor", "track_from_day", "feature_window",
                      "folds", "merge_day"],
    "netmerge": ["merge_day", "activity_days", "distance_sample", "distance_every",
                 "id_range_a", "id_range_b"],
    "synth": ["kind", "days", "initial_nodes", "growth", "edges_per_node", "beta", "beta_decay",
              "activity_fraction", "gamma", "activity_unit", "max_edges", "blocks", "p_in",
              "p_out", "script", "block_growth", "cadence_days", "days_b", "initial_nodes_b",
              "merge_day", "post_days", "internal_rate", "external_rate", "external_growth",
              "new_rate", "new_users", "new_growth", "duplicate_fraction"],
}

_HELP = {
    "ingest": "validate an event log and report ingestion statistics",
    "snapshot": "node and edge counts of the snapshot series",
    "metrics": "growth, degree, path length, clustering and assortativity series",
    "edgedyn": "inter-arrival fits, lifetime activity and minimal-age attribution",
    "pa-fit": "preferential attachment strength over edge-count windows",
    "communities": "community detection and lineage tracking across snapshots",
    "predict-merge": "merge features, cross-validated classifier and destination hit rate",
    "netmerge": "activity, duplicates, edge classes and distances around a network merge",
    "synth": "generate a synthetic event log with ground truth",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dyngraph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    keys = RunConfig.keys()
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=_HELP[name], description=_HELP[name])
        p.add_argument("--config", help="key=value configuration file")
        p.add_argument("--from-manifest", help="replay the configuration of a manifest.json")
        opts = _OPTIONS["common"] + ([] if name == "synth" else _OPTIONS["input"]) + _OPTIONS[name]
        for key in dict.fromkeys(opts):
            flag = "--" + key.replace("_", "-")
            kind = keys[key]
            kind = _TYPES.get(kind, kind) if isinstance(kind, str) else kind
            default = getattr(RunConfig, key)
            if kind is bool:
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None,
                               help=f"(default {default})")
            else:
                p.add_argument(flag, dest=key, default=None, metavar=key.upper(),
                               help=f"(default {default!r})")
    return parser


def _error(out: Path | None, stage: str, exc: BaseException, **extra) -> int:
    obj = {"stage": stage, "error": type(exc).__name__, "message": str(exc), **extra}
    text = json.dumps(obj, sort_keys=True)
    print(text, file=sys.stderr)
    if out is not None:
        with contextlib.suppress(OSError):
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n", encoding="utf-8")
    return 1 if not isinstance(exc, ConfigError) else 2


def main(argv=None, env=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    env = os.environ if env is None else env
    stage = args.subcommand
    cli_values = {k: v for k, v in vars(args).items() if k in RunConfig.keys()}
    out = Path(cli_values.get("out") or RunConfig.out)
    try:
        file_values = {}
        if args.from_manifest:
            manifest = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
            if manifest.get("subcommand") != stage:
                raise ConfigError(f"manifest is for {manifest.get('subcommand')!r}, not {stage!r}")
            file_values = dict(manifest["config"])
            file_values.pop("out", None)
        if args.config:
            file_values.update(read_config_file(args.config))
        cfg = resolve_config(file_values, env, cli_values)
        out = Path(cfg.out)
        inputs = {}
        if stage != "synth":
            if not cfg.input:
                raise ConfigError("no input path given")
            if not Path(cfg.input).is_file():
                return _error(out, stage, FileNotFoundError(f"input not found: {cfg.input}"),
                              path=cfg.input)
            inputs[cfg.input] = sha256_file(cfg.input)
        if cfg.threads < 1:
            raise ConfigError("threads must be at least 1")
    except (ConfigError, OSError, json.JSONDecodeError, KeyError) as exc:
        return _error(out, stage, exc)

    rep = Reports(out, stage)
    try:
        STAGES[stage](cfg, rep)
    except (DynGraphError, ValueError, OSError) as exc:
        return _error(out, stage, exc)
    config = cfg.as_dict()
    config.pop("out")
    manifest = {"subcommand": stage, "version": __version__, "config": config,
                "inputs": inputs, "outputs": sorted(rep.written)}
    buf = io.StringIO()
    json.dump(manifest, buf, sort_keys=True, indent=2)
    with contextlib.ExitStack() as stack:
        fd, tmp = tempfile.mkstemp(dir=out, prefix=".tmp-", suffix=".json")
        stack.callback(lambda: os.path.exists(tmp) and os.unlink(tmp))
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue() + "\n")
        os.replace(tmp, out / "manifest.json")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
