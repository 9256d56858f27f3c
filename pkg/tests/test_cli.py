import hashlib
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from dyngraph.cli import RunConfig, main, read_config_file, resolve_config, stage_seed
from dyngraph.metrics import Metric

PLANTED = ["--kind", "planted", "--blocks", "30,30,30,30,30,30,30,30", "--days", "10",
           "--script", "merge:3:0:1,merge:5:2:3,split:6:4,merge:8:5:6", "--seed", "1"]
GROWTH = ["--kind", "growth", "--days", "40", "--initial-nodes", "60", "--growth", "1.05",
          "--activity-fraction", "0.3", "--seed", "2"]
TWO = ["--kind", "two-network", "--days", "30", "--days-b", "20", "--initial-nodes", "80",
       "--initial-nodes-b", "60", "--merge-day", "30", "--post-days", "110",
       "--internal-rate", "10", "--external-rate", "5", "--duplicate-fraction", "0.2", "--seed", "3"]


def run(*argv, env=None):
    return main([str(a) for a in argv], env={} if env is None else env)


@pytest.fixture(scope="module")
def synth_logs(tmp_path_factory):
    root = tmp_path_factory.mktemp("synth")
    paths = {}
    for name, args in (("planted", PLANTED), ("growth", GROWTH), ("two", TWO)):
        out = root / name
        assert run("synth", *args, "--out", out) == 0
        paths[name] = out / "synth.events.csv"
    return paths


def test_metrics_writes_every_metric(synth_logs, tmp_path):
    assert run("metrics", "--input", synth_logs["growth"], "--out", tmp_path) == 0
    names = sorted(p.name for p in tmp_path.glob("metrics.*.csv"))
    assert names == sorted(f"metrics.{m.value}.csv" for m in Metric)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["subcommand"] == "metrics"
    assert sorted(manifest["outputs"]) == names
    assert list(manifest["inputs"].values())[0] == (
        hashlib.sha256(synth_logs["growth"].read_bytes()).hexdigest())


STAGE_ARGS = {
    "ingest": ("growth", []),
    "snapshot": ("growth", ["--cadence-days", "5"]),
    "metrics": ("growth", ["--path-sample", "20"]),
    "edgedyn": ("growth", ["--gap-unit", "3600"]),
    "pa-fit": ("growth", ["--window", "200", "--start-edges", "200", "--profile-at", "1000"]),
    "communities": ("planted", ["--deltas", "0.01,0.04", "--min-size", "5"]),
    "predict-merge": ("planted", ["--min-size", "5", "--folds", "2"]),
    "netmerge": ("two", ["--merge-day", "30", "--distance-every", "20"]),
}


@pytest.mark.parametrize("stage", sorted(STAGE_ARGS))
def test_rerun_from_manifest_is_byte_identical(stage, synth_logs, tmp_path):
    log, extra = STAGE_ARGS[stage]
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(stage, "--input", synth_logs[log], "--out", first, *extra) == 0
    assert run(stage, "--from-manifest", first / "manifest.json", "--out", second) == 0
    a = sorted(p.name for p in first.iterdir())
    assert a == sorted(p.name for p in second.iterdir())
    assert len(a) > 1
    for name in a:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name
    for name in a:
        if name.endswith(".json"):
            json.loads((first / name).read_text())  # strict JSON, no NaN literals


def test_synth_rerun_is_byte_identical(tmp_path):
    assert run("synth", *PLANTED, "--out", tmp_path / "a") == 0
    assert run("synth", "--from-manifest", tmp_path / "a" / "manifest.json",
               "--out", tmp_path / "b") == 0
    for name in ("synth.events.csv", "synth.truth.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_input_reports_path(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    code = run("metrics", "--input", missing, "--out", tmp_path / "out")
    assert code != 0
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["path"] == str(missing)
    assert err["stage"] == "metrics"
    on_disk = json.loads((tmp_path / "out" / "error.json").read_text())
    assert on_disk == err


def test_strict_ingest_error_is_machine_readable(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,N,1\n5,E,1,2\n")
    assert run("ingest", "--input", bad, "--mode", "strict", "--out", tmp_path / "o") == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["stage"] == "ingest" and err["message"]


def test_bad_config_value_exit_code(tmp_path, capsys):
    assert run("synth", "--days", "ten", "--out", tmp_path) == 2
    assert "days" in json.loads(capsys.readouterr().err)["message"]


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\nseed = 5\npath-sample = 7\nthreads=2\n")
    file_values = read_config_file(cfg_file)
    cfg = resolve_config(file_values, {"DGL_SEED": "6", "DGL_PATH_EVERY": "9"}, {"seed": "8"})
    assert cfg.seed == 8
    assert cfg.path_every == 9
    assert cfg.path_sample == 7
    assert cfg.threads == 2
    assert cfg.window == RunConfig.window
    cfg = resolve_config(file_values, {"DGL_SEED": "6"}, {"seed": None})
    assert cfg.seed == 6


def test_config_file_errors(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("nonsense_key = 1\n")
    with pytest.raises(ValueError):
        read_config_file(f)
    f.write_text("seed\n")
    with pytest.raises(ValueError):
        read_config_file(f)


def test_env_reaches_main(synth_logs, tmp_path):
    assert run("snapshot", "--input", synth_logs["growth"], "--out", tmp_path,
               env={"DGL_CADENCE_DAYS": "10"}) == 0
    rows = (tmp_path / "snapshot.sizes.csv").read_text().splitlines()
    # the last cut lies past the final event so days 31..39 are covered
    assert [r.split(",")[0] for r in rows[1:]] == ["0", "10", "20", "30", "40"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["cadence_days"] == 10


def test_manifest_for_other_subcommand_rejected(synth_logs, tmp_path):
    assert run("ingest", "--input", synth_logs["growth"], "--out", tmp_path / "a") == 0
    assert run("snapshot", "--from-manifest", tmp_path / "a" / "manifest.json",
               "--out", tmp_path / "b") == 2


def test_failed_stage_leaves_no_partial_report(tmp_path):
    log = tmp_path / "tiny.csv"
    log.write_text("0,N,1\n")
    out = tmp_path / "o"
    assert run("pa-fit", "--input", log, "--out", out) != 0
    assert not [p for p in out.iterdir() if p.name.startswith(".tmp-")]
    assert not list(out.glob("pa-fit.*"))


def test_stage_seed_is_stable():
    assert stage_seed(0, "metrics") == stage_seed(0, "metrics")
    assert stage_seed(0, "metrics") != stage_seed(0, "synth")
    assert stage_seed(1, "metrics") != stage_seed(0, "metrics")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "dyngraph", "ingest", "--input",
                           str(tmp_path / "missing"), "--out", str(tmp_path)],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 1
    assert json.loads(proc.stderr)["error"] == "FileNotFoundError"
    proc = subprocess.run([sys.executable, "-m", "dyngraph", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()


def test_unknown_subcommand_fails():
    with pytest.raises(SystemExit):
        main(["frobnicate"])


def test_reports_names(synth_logs, tmp_path):
    assert run("communities", "--input", synth_logs["planted"], "--out", tmp_path,
               "--min-size", "5") == 0
    names = {p.name for p in Path(tmp_path).iterdir()}
    assert {"communities.timelines.jsonl", "communities.modularity.csv",
            "manifest.json"} <= names
