import csv
import json

import pytest
import yaml

from trafficrl.a3c import TrainConfig, train
from trafficrl.errors import ConfigError, FormatError
from trafficrl.harness import (
    ExperimentSpec,
    exhaustive_plan_search,
    percent_change,
    run_experiment,
    summarize,
    time_average,
    write_rows,
)

SHORT = {"scenario": "single-asym", "seeds": [1, 2], "episode_duration": 900}


def metrics_file(path, delays, densities=None):
    densities = densities or [1.0] * len(delays)
    rows = [["t_sec", "avg_delay_s_per_km", "avg_density_veh_per_km", "delay_X", "density_X"]]
    rows += [[str(90 * (i + 1)), str(d), str(k), str(d), str(k)] for i, (d, k) in enumerate(zip(delays, densities))]
    return write_rows(path, rows)


def test_percent_change_arithmetic():
    assert percent_change(60, 40) == pytest.approx(100 / 3)
    assert percent_change(60, 60) == 0.0


def test_summary_mean_sd_and_change(tmp_path):
    for seed, d in zip((1, 2, 3), (40, 50, 60)):
        metrics_file(tmp_path / f"RL__seed{seed}.csv", [d, d])
        metrics_file(tmp_path / f"FST60__seed{seed}.csv", [75, 75])
    rows = {r.label: r for r in summarize(tmp_path, "FST60")}
    assert rows["RL"].delay_mean == 50 and rows["RL"].delay_sd == pytest.approx(10)
    assert rows["RL"].delay_change_pct == pytest.approx(100 / 3)
    assert rows["FST60"].delay_change_pct == 0.0 and rows["RL"].seeds == 3


def test_mismatched_schema_rejected(tmp_path):
    metrics_file(tmp_path / "A__seed1.csv", [1.0])
    write_rows(tmp_path / "B__seed1.csv", [["t_sec", "avg_delay_s_per_km", "avg_density_veh_per_km"], ["90", "1", "1"]])
    with pytest.raises(FormatError):
        summarize(tmp_path, "A")
    write_rows(tmp_path / "bad.csv", [["x", "y"]])
    with pytest.raises(FormatError):
        time_average(tmp_path / "bad.csv")
    with pytest.raises(FormatError):
        summarize(tmp_path, "Z")


def test_reference_against_itself(tmp_path):
    spec = ExperimentSpec.from_mapping({**SHORT, "reference": "FST60",
                                        "runs": [{"controller": "fst", "period": 60}]})
    run_experiment(spec, tmp_path)
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["controller"] == "FST60" and float(rows[0]["delay_change_pct"]) == 0.0


def test_same_controller_twice_is_identical(tmp_path):
    spec = ExperimentSpec.from_mapping({**SHORT, "runs": [{"label": "a", "controller": "fst", "period": 60},
                                                          {"label": "b", "controller": "fst", "period": 60}]})
    manifest = run_experiment(spec, tmp_path)
    for s in SHORT["seeds"]:
        assert (tmp_path / f"a__seed{s}.csv").read_bytes() == (tmp_path / f"b__seed{s}.csv").read_bytes()
    assert manifest["paired_arrivals"]


def test_longer_fixed_cycle_has_higher_delay(tmp_path):
    spec = ExperimentSpec.from_mapping({"scenario": "single-asym", "seeds": [1, 2, 3], "reference": "FST60",
                                        "runs": [{"controller": "fst", "period": 60},
                                                 {"controller": "fst", "period": 120}]})
    run_experiment(spec, tmp_path)
    rows = {r.label: r for r in summarize(tmp_path, "FST60")}
    assert rows["FST120"].delay_mean > rows["FST60"].delay_mean


def test_rl_and_fst_share_arrivals(tmp_path):
    res = train("single-asym", TrainConfig(hidden=8, total_epochs=5, episode_duration=600), out_dir=tmp_path / "t")
    spec_path = tmp_path / "spec.yaml"
    spec_path.write_text(yaml.safe_dump({**SHORT, "reference": "FST60", "runs": [
        {"controller": "fst", "period": 60},
        {"label": "RL", "controller": "checkpoint", "checkpoint": "t/agent.ckpt"},
    ]}))
    manifest = run_experiment(ExperimentSpec.load(spec_path), tmp_path / "out")
    assert manifest["paired_arrivals"] and manifest["plan_violations"] == []
    assert manifest["rl_plans_checked"] > 0
    saved = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert saved["arrival_digests"]["RL"] == saved["arrival_digests"]["FST60"]
    assert res.checkpoints


def test_fail_fast_on_missing_checkpoint(tmp_path):
    spec = ExperimentSpec.from_mapping({**SHORT, "runs": [{"controller": "fst", "period": 60},
                                                          {"label": "RL", "controller": "checkpoint",
                                                           "checkpoint": "nope.ckpt"}]}, base_dir=tmp_path)
    with pytest.raises(ConfigError, match="nope.ckpt"):
        run_experiment(spec, tmp_path / "out")
    assert not list((tmp_path).glob("out/*.csv"))


def test_bad_specs():
    with pytest.raises(ConfigError):
        ExperimentSpec.from_mapping({"scenario": "single"})
    with pytest.raises(ConfigError):
        ExperimentSpec.from_mapping({"scenario": "single", "runs": [{"controller": "dqn"}]})
    with pytest.raises(ConfigError):
        ExperimentSpec.from_mapping({"scenario": "single", "runs": [{"controller": "fst", "period": 60}] * 2})
    with pytest.raises(ConfigError):
        run_experiment(ExperimentSpec.from_mapping({"scenario": "nowhere", "runs": [{"period": 60}]}), "/tmp/x")


def test_plan_search_on_small_grid():
    res = exhaustive_plan_search("single-asym-det", choices=[20, 60], episode_duration=900)
    assert res.evaluated == 16
    assert res.best_delay == res.ranking[0][0] <= res.ranking[-1][0]
    # the heavy approach should not be the one starved
    assert res.best_plan[0] >= max(res.best_plan[1:])
