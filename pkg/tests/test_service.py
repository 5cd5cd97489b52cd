import json

import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from trafficrl.cli import main
from trafficrl.service.app import app

client = TestClient(app)


def test_health():
    assert client.get("/health").json()["status"] == "ok"


def test_baseline_endpoint(tmp_path):
    r = client.post("/baseline", json={"fst": "FST60", "scenario": "single-asym", "seeds": [1], "out": str(tmp_path)})
    assert r.status_code == 200
    body = r.json()
    assert body["label"] == "FST60" and body["mean_delay"] == pytest.approx(403.75778061212316)
    assert (tmp_path / "FST60__seed1.csv").exists()


def test_domain_errors_become_422():
    r = client.post("/baseline", json={"fst": "0", "scenario": "single"})
    assert r.status_code == 422 and r.json()["kind"] == "ArgumentError"
    r = client.post("/baseline", json={"fst": "60", "scenario": "atlantis"})
    assert r.status_code == 422 and r.json()["kind"] == "ConfigError"


def test_request_validation():
    assert client.post("/evaluate", json={"checkpoint": "x", "scenario": "single", "episodes": 0}).status_code == 422


def test_train_evaluate_summarize_roundtrip(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("total_epochs: 4\nhidden: 8\nepisode_duration: 600\n")
    r = client.post("/train", json={"scenario": "single", "config": str(cfg), "seed": 2, "out": str(tmp_path / "t")})
    assert r.status_code == 200 and list(r.json()["checkpoints"]) == ["agent"]
    r = client.post("/evaluate", json={"checkpoint": str(tmp_path / "t"), "scenario": "single", "episodes": 2,
                                       "out": str(tmp_path / "runs")})
    assert [e["seed"] for e in r.json()["episodes"]] == [1, 2]
    client.post("/baseline", json={"fst": 60, "scenario": "single", "seeds": [1, 2], "out": str(tmp_path / "runs")})
    r = client.post("/summarize", json={"dir": str(tmp_path / "runs"), "reference": "FST60"})
    assert [row["controller"] for row in r.json()["rows"]] == ["FST60", "RL"]


def test_cli_commands_exist():
    result = CliRunner().invoke(main, ["--help"])
    for cmd in ("train", "evaluate", "baseline", "experiment", "summarize"):
        assert cmd in result.output


def test_cli_local_baseline_and_summarize(tmp_path):
    runner = CliRunner()
    out = tmp_path / "runs"
    for fst in ("60", "120"):
        res = runner.invoke(main, ["baseline", "--fst", fst, "--scenario", "single-asym", "--seed", "1",
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
    res = runner.invoke(main, ["summarize", "--dir", str(out), "--reference", "FST60"])
    rows = json.loads(res.output)["rows"]
    assert rows[1]["controller"] == "FST120" and rows[1]["delay_change_pct"] < 0


def test_cli_reports_domain_errors():
    res = CliRunner().invoke(main, ["baseline", "--fst", "0", "--scenario", "single"])
    assert res.exit_code != 0 and "ArgumentError" in res.output


def test_cli_through_server(monkeypatch, tmp_path):
    import httpx

    def fake_post(url, json, timeout):
        path = url.split("http://svc", 1)[1]
        return client.post(path, json=json)

    monkeypatch.setattr(httpx, "post", fake_post)
    spec = tmp_path / "spec.yaml"
    spec.write_text("scenario: single\nseeds: [3]\nepisode_duration: 600\nruns:\n  - {controller: fst, period: 60}\n")
    res = CliRunner().invoke(main, ["--server", "http://svc", "experiment", "--spec", str(spec),
                                    "--out", str(tmp_path / "o")])
    assert res.exit_code == 0, res.output
    body = json.loads(res.output)
    assert body["paired_arrivals"] and body["summary"][0]["controller"] == "FST60"
