import json
import os
import pathlib
import subprocess

import jsonschema
import pytest

BIN = os.environ["ENVFORGE_BIN"]
FIXTURES = pathlib.Path(os.environ["ENVFORGE_FIXTURES"])
SCHEMAS = pathlib.Path(os.environ["ENVFORGE_SCHEMAS"])

# Ports reserved for this suite; the C++ binaries use the ranges below it.
PORT_LO, PORT_HI = 27000, 27499


def run(*args, check_code=None):
    p = subprocess.run([BIN, "--format", "json", *map(str, args)],
                       capture_output=True, text=True, timeout=300)
    if check_code is not None:
        assert p.returncode == check_code, p.stderr
    return p


def output(*args, code=0):
    return json.loads(run(*args, check_code=code).stdout)


def validate(name, doc):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    jsonschema.Draft202012Validator(schema).validate(doc)


def pool_flags(offset=0):
    lo = PORT_LO + offset * 100
    return ["--port-lo", lo, "--port-hi", lo + 99]


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    doc = output("synth", "--tasks", FIXTURES / "tasks.jsonl", "--traces",
                 FIXTURES / "traces.jsonl", "--out", out, *pool_flags(0))
    return out, doc


def test_synth(synth_dir):
    out, doc = synth_dir
    validate("synth", doc)
    assert doc["produced"] == doc["verified"] == 3
    for row in doc["tasks"]:
        assert pathlib.Path(row["path"]).is_dir()
    lines = (out / "attempt_log.jsonl").read_text().splitlines()
    assert len(lines) == 3
    for line in lines:
        validate("attempt_log", json.loads(line))


def test_synth_without_traces_produces_nothing(tmp_path):
    tasks = tmp_path / "tasks.jsonl"
    tasks.write_text('{"id":"orphan","instruction":"Open the settings page."}\n')
    p = run("synth", "--tasks", tasks, "--traces", FIXTURES / "traces.jsonl",
            "--out", tmp_path / "out", *pool_flags(1), check_code=1)
    doc = json.loads(p.stdout)
    validate("synth", doc)
    assert doc["produced"] == 0
    assert doc["tasks"][0]["error"]


def test_verify_reference_and_sabotaged():
    good = output("verify", FIXTURES / "bundles" / "weather", *pool_flags(2))
    validate("verify", good)
    assert good["dynamic_passed"] and good["failure_stage"] == "none"

    p = run("verify", FIXTURES / "bundles" / "weather_sabotaged", *pool_flags(2), check_code=1)
    bad = json.loads(p.stdout)
    validate("verify", bad)
    assert bad["failure_stage"] == "milestone_missed"
    assert not bad["milestones"][-1]["met"]


def test_verify_missing_bundle_is_usage_error(tmp_path):
    assert run("verify", tmp_path / "nope").returncode == 2


def test_rollout_and_latency(tmp_path):
    traj = tmp_path / "traj.jsonl"
    doc = output("rollout", FIXTURES / "bundles" / "weather", "--episodes", 3,
                 "--policy", "golden", "--out", traj, *pool_flags(3))
    validate("rollout", doc)
    assert doc["success_rate"] == 1.0
    rows = [json.loads(l) for l in traj.read_text().splitlines()]
    assert len(rows) == 3
    for row in rows:
        validate("trajectory", row)
        assert row["success"] and row["final_reward"] == 1.0

    lat = output("report", "--kind", "latency", "--input", traj)
    validate("report_latency", lat)
    assert lat["per_interaction_s"]["count"] == len(rows)
    assert lat["excluded"] == 0


def test_rollout_rejects_zero_episodes():
    assert run("rollout", FIXTURES / "bundles" / "weather", "--episodes", 0).returncode == 2


def test_train(tmp_path):
    report = tmp_path / "report.json"
    doc = output("train", "--bundles", FIXTURES / "bundles", "--iterations", 2,
                 "--group-size", 4, "--eval-episodes", 2, "--max-steps", 6,
                 "--out", report, *pool_flags(4))
    validate("train", doc)
    full = json.loads(report.read_text())
    validate("training_report", full)
    assert full["config"]["group_size"] == 4
    assert len(full["iterations"]) == 2
    assert doc["final_success"] == full["final_success"]


def test_train_without_eligible_bundles(tmp_path):
    assert run("train", "--bundles", tmp_path, "--iterations", 1).returncode == 2


def test_report_cost():
    doc = output("report", "--kind", "cost", "--n-envs", 1000, "--rollouts", 12)
    validate("report_cost", doc)
    assert doc["total"] == pytest.approx(27869.28, abs=0.01)
    synth = output("report", "--kind", "cost", "--n-envs", 1000, "--rollouts", 12,
                   "--regime", "synth")
    assert synth["total"] == 0.0


def test_report_attempts(synth_dir):
    out, _ = synth_dir
    doc = output("report", "--kind", "attempts", "--input", out / "attempt_log.jsonl")
    validate("report_attempts", doc)
    assert doc["jobs"] == 3
    assert sum(doc["per_attempt_count"].values()) + doc["fail_count"] == 3


def test_report_alignment():
    doc = output("report", "--kind", "alignment", "--input", FIXTURES / "alignment.csv")
    validate("report_alignment", doc)
    by_label = {c["label"]: c for c in doc["classes"]}
    assert by_label[0]["frac_le_0_6"] == pytest.approx(0.75)
    assert by_label[1]["frac_gt_0_8"] >= 0.75


def test_report_lengths():
    doc = output("report", "--kind", "lengths", "--input", FIXTURES / "lengths.txt")
    validate("report_lengths", doc)
    assert doc["kept"] == 1000 and doc["removed"] == 40
    assert doc["mean"] == pytest.approx(5.63, abs=0.005)
    assert sum(doc["histogram"].values()) == doc["kept"]


def test_unknown_report_kind():
    assert run("report", "--kind", "bogus").returncode == 2


def test_table_format_is_plain_text():
    p = subprocess.run([BIN, "report", "--kind", "cost"], capture_output=True, text=True)
    assert p.returncode == 0
    with pytest.raises(json.JSONDecodeError):
        json.loads(p.stdout)
