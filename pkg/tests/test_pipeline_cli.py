import csv
import json
from dataclasses import replace

import numpy as np
import pytest

from pdnnsim.cli import main
from pdnnsim.dataset import DatasetSpec, generate_dataset
from pdnnsim.errors import ConfigError
from pdnnsim.pipeline import SEED_NAMES, PipelineReport, RunConfig, run_pipeline

SMALL = {"iterations": 20, "curve_repeats": 3, "dataset": {"per_class": 27},
         "training": {"epochs": 40}}


def small_config(out_dir, **kw):
    return RunConfig.from_dict({**SMALL, **kw, "paths": {"out_dir": str(out_dir)}})


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = small_config(out)
    return cfg, run_pipeline(cfg), out


def test_outputs_written(small_run):
    _, report, out = small_run
    for name in ("report.json", "eval.json", "v_out.csv", "weights.json", "alignment.json",
                 "chip_state.json", "budget.json", "dataset_eval.csv", "training_loss.csv",
                 "figures/training_loss.png", "figures/alignment_v_sum.png"):
        assert (out / name).is_file(), name
    saved = json.loads((out / "report.json").read_text())
    assert saved["report_hash"] == report.report_hash
    assert 0 <= report.mean_accuracy <= 1
    assert set(report.data["mode_comparison"]) == {"ideal", "physical", "gap"}


def test_second_run_hits_cache_and_matches(small_run):
    cfg, first, _ = small_run
    again = run_pipeline(cfg)
    cacheable = {k for k, hit in first.cached.items() if hit is not None}
    assert {"train", "align", "simulate", "evaluate"} <= cacheable
    assert all(again.cached[k] for k in cacheable)
    assert again.report_hash == first.report_hash


def test_fit_fraction_change_reruns_only_evaluation(small_run):
    cfg, first, out = small_run
    shared = replace(cfg, fit_fraction=0.4, paths={**cfg.paths, "cache_dir": str(out / ".cache")})
    other = run_pipeline(shared, write_outputs=False)
    recomputed = {k for k, hit in other.cached.items() if hit is False}
    assert recomputed == {"evaluate"}
    assert other.report_hash != first.report_hash


def test_fresh_run_elsewhere_is_identical(small_run, tmp_path):
    cfg, first, _ = small_run
    fresh = run_pipeline(cfg.with_overrides(out_dir=tmp_path))
    assert not any(fresh.cached.values())  # None or False everywhere
    assert fresh.report_hash == first.report_hash


def test_named_seeds_distinct_and_overridable():
    seeds = RunConfig().named_seeds()
    assert set(seeds) == set(SEED_NAMES) and len(set(seeds.values())) == len(SEED_NAMES)
    assert RunConfig(seeds={"chip": 5}).named_seeds()["chip"] == 5
    assert RunConfig(seed=1).named_seeds() != seeds


def test_config_hash_ignores_output_location(tmp_path):
    a = RunConfig().with_overrides(out_dir=tmp_path / "a")
    b = RunConfig().with_overrides(out_dir=tmp_path / "b")
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != a.with_overrides(seed=3).config_hash()


@pytest.mark.parametrize("bad", [
    {"bogus": 1},
    {"mode": "quantum"},
    {"iterations": 0},
    {"fit_fraction": 1.0},
    {"devices": {"ring": {"fwhm": -1}}},
    {"optics": {"beam": {"nope": 1}}},
    {"seeds": {"unknown": 1}},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_relative_paths_use_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv("PDNNSIM_ROOT", str(tmp_path))
    assert RunConfig(paths={"out_dir": "x"}).resolve("out_dir") == tmp_path / "x"


def test_plotdata_series(small_run, tmp_path):
    _, report, out = small_run
    assert main(["plotdata", "--report", str(out / "report.json"), "--out-dir", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "accuracy_vs_iteration.csv")))
    assert len(rows) == 20
    acc = np.array([float(r["accuracy"]) for r in rows])
    assert np.allclose([float(r["running_mean"]) for r in rows], np.cumsum(acc) / np.arange(1, 21))
    for r in csv.DictReader(open(tmp_path / "accuracy_vs_samples.csv")):
        assert float(r["min_accuracy"]) <= float(r["mean_accuracy"]) <= float(r["max_accuracy"])
    for name in ("accuracy_vs_iteration.png", "accuracy_vs_samples.png", "confusion.png"):
        assert (tmp_path / "figures" / name).stat().st_size > 0


def test_report_roundtrip(small_run):
    _, report, out = small_run
    back = PipelineReport.load(out / "report.json")
    assert back.report_hash == report.report_hash


# CLI


def test_cli_dataset_deterministic(tmp_path, capsys):
    args = ["dataset", "--classes", "2", "--seed", "7", "--out-dir"]
    assert main(args + [str(tmp_path / "a")]) == 0
    assert main(args + [str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "letters_2class_seed7.csv").read_bytes()
    assert a == (tmp_path / "b" / "letters_2class_seed7.csv").read_bytes()
    assert len(a.splitlines()) == 217


def test_cli_run_and_budget(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(SMALL))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--classes", "2", "--mode", "ideal", "--seed", "2",
                 "--iterations", "10", "--fit-fraction", "0.3", "--out-dir", str(out)]) == 0
    data = json.loads((out / "report.json").read_text())
    assert data["mode"] == "ideal" and data["evaluation"]["iterations"] == 10
    assert data["config"]["fit_fraction"] == 0.3
    capsys.readouterr()
    assert main(["budget"]) == 0
    assert "photocurrent_per_pixel_a" in json.loads(capsys.readouterr().out)


def test_cli_config_errors_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"bogus": 1}))
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    missing = tmp_path / "weights.json"
    bad.write_text(json.dumps({"paths": {"weights": str(missing)}}))
    assert main(["run", "--config", str(bad), "--out-dir", str(tmp_path / "o")]) == 2
    assert main(["plotdata", "--report", str(tmp_path / "nope.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--classes", "3"])
    assert exc.value.code == 2


def test_cli_stage_failure_exit_3(tmp_path):
    # a four-class dataset fed to a two-class run fails inside the dataset stage
    data = tmp_path / "four.csv"
    generate_dataset(DatasetSpec(4, 5, seed=0)).save_csv(data)
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({**SMALL, "paths": {"dataset": str(data)}}))
    assert main(["run", "--config", str(cfg), "--classes", "2", "--out-dir", str(tmp_path / "o")]) == 3
