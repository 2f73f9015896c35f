import csv
import json

import pytest

from grouptune.cli import EXIT_CONFIG, EXIT_EVALUATOR, EXIT_INVALID, EXIT_IO, main
from grouptune.history import read_history
from grouptune.options import shipped_table_path


@pytest.fixture
def landscape(tmp_path):
    land = tmp_path / "land.json"
    assert main(["make-landscape", "--synthetic", "4x6", "--out", str(land), "--seed", "2",
                 "--redundant", "6"]) == 0
    return land, tmp_path / "land-groups.json"


def synth_args(landscape, out, *extra):
    land, groups = landscape
    return ["tune", "--evaluator", "synthetic", "--landscape", str(land), "--groups", str(groups),
            "--out", str(out), *extra]


# ---------------------------------------------------------------- validate-groups


def test_validate_shipped(capsys):
    assert main(["validate-groups"]) == 0
    assert "15 groups, 206 options" in capsys.readouterr().out


def test_validate_duplicate(tmp_path, capsys):
    doc = json.loads(shipped_table_path().read_text())
    doc["groups"][0]["members"].append({"name": "gcse", "o3_default": True})
    p = tmp_path / "dup.json"
    p.write_text(json.dumps(doc))
    assert main(["validate-groups", str(p)]) == EXIT_INVALID
    assert "gcse" in capsys.readouterr().err


def test_validate_empty_groups(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text('{"compiler_id": "x", "groups": []}')
    assert main(["validate-groups", str(p)]) == EXIT_INVALID


def test_validate_shipped_sizes_enforced(tmp_path, capsys):
    doc = json.loads(shipped_table_path().read_text())
    moved = doc["groups"][0]["members"].pop()
    doc["groups"][1]["members"].append(moved)
    p = tmp_path / "moved.json"
    p.write_text(json.dumps(doc))
    assert main(["validate-groups", str(p)]) == EXIT_INVALID
    assert "sizes" in capsys.readouterr().err


# ---------------------------------------------------------------- tune


def test_tune_synthetic_deterministic(landscape, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(synth_args(landscape, a, "--budget", "60", "--seed", "4")) == 0
    out_a = capsys.readouterr().out
    assert main(synth_args(landscape, b, "--budget", "60", "--seed", "4")) == 0
    out_b = capsys.readouterr().out
    for name in ("history.jsonl", "report.json", "report.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert out_a == out_b
    assert out_a.startswith("-O3 ")
    assert "improvement_pct" in out_a


@pytest.mark.parametrize("alg", ["rio", "global-sa"])
def test_tune_baselines(landscape, tmp_path, alg):
    out = tmp_path / alg
    assert main(synth_args(landscape, out, "--budget", "40", "--algorithm", alg)) == 0
    header, records = read_history(out)
    assert header["algorithm"] == alg and len(records) == 40
    assert all(r.mutated_group is None for r in records)


def test_budget_below_n_init_is_config_error(landscape, tmp_path):
    assert main(synth_args(landscape, tmp_path / "x", "--budget", "5", "--n-init", "10")) == EXIT_CONFIG


def test_missing_paths_are_config_errors(tmp_path):
    assert main(["tune", "--evaluator", "synthetic", "--landscape", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    assert main(["tune", "--evaluator", "compiler"]) == EXIT_CONFIG


def test_config_file_precedence(landscape, tmp_path):
    land, groups = landscape
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"budget": 30, "seed": 9, "evaluator": "synthetic",
                               "landscape": str(land), "groups": str(groups)}))
    out = tmp_path / "s"
    assert main(["tune", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    header, records = read_history(out)
    assert len(records) == 30
    assert header["seed"] == 3


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"bogus": 1}')
    assert main(["tune", "--config", str(cfg)]) == EXIT_CONFIG


def test_tune_with_stub_compiler(stub_cc, stub_bench, tmp_path, capsys):
    doc = {"compiler_id": "stub", "groups": [
        {"index": 1, "description": "g1", "members": [{"name": "a", "o3_default": True},
                                                     {"name": "b", "o3_default": False}]},
        {"index": 2, "description": "g2", "members": [{"name": "c", "o3_default": False}]},
    ]}
    groups = tmp_path / "groups.json"
    groups.write_text(json.dumps(doc))
    manifest = stub_bench(stdout="ok\n", durations=[0], fail_if="-fc", mismatch_if="-fno-a")
    out = tmp_path / "sess"
    rc = main(["tune", "--bench", str(manifest), "--cc", stub_cc, "--groups", str(groups),
               "--budget", "14", "--n-init", "2", "--reps", "2", "--out", str(out), "--seed", "1"])
    assert rc == 0, capsys.readouterr().err
    header, records = read_history(out)
    assert len(records) == 14
    statuses = {r.measurement.status.value for r in records}
    assert "valid" in statuses
    assert statuses <= {"valid", "compile-error", "output-mismatch"}
    assert all(r.timestamp is not None for r in records)
    assert header["config"]["cc"] == stub_cc


def test_env_compiler_override(stub_cc, stub_bench, tmp_path, monkeypatch):
    monkeypatch.setenv("GROUPTUNE_CC", stub_cc)
    doc = {"compiler_id": "stub", "groups": [{"index": 1, "description": "g", "members": [
        {"name": "a", "o3_default": True}, {"name": "b", "o3_default": True}]}]}
    groups = tmp_path / "groups.json"
    groups.write_text(json.dumps(doc))
    out = tmp_path / "s"
    assert main(["tune", "--bench", str(stub_bench()), "--groups", str(groups), "--budget", "4",
                 "--n-init", "2", "--reps", "1", "--out", str(out)]) == 0


def test_missing_compiler_exit_code(stub_bench, tmp_path):
    rc = main(["tune", "--bench", str(stub_bench()), "--cc", "/no/such/cc", "--out", str(tmp_path / "s")])
    assert rc == EXIT_EVALUATOR


# ---------------------------------------------------------------- compare


def test_compare_identical_configs(landscape, tmp_path, capsys):
    land, groups = landscape
    out = tmp_path / "cmp"
    rc = main(["compare", "--evaluator", "synthetic", "--landscape", str(land), "--groups", str(groups),
               "--budget", "60", "--algorithms", "group-tuner", "group-tuner", "--seeds", "5", "--out", str(out)])
    assert rc == 0
    rows = list(csv.reader((out / "compare.csv").open()))
    assert rows[1][:3] == rows[2][:3]
    assert rows[1][4:] == rows[2][4:]


def test_compare_three_algorithms(landscape, tmp_path, capsys):
    land, groups = landscape
    out = tmp_path / "cmp"
    rc = main(["compare", "--evaluator", "synthetic", "--landscape", str(land), "--groups", str(groups),
               "--budget", "100", "--seeds", "1", "2", "--out", str(out)])
    assert rc == 0
    text = capsys.readouterr().out
    for alg in ("group-tuner", "rio", "global-sa"):
        assert alg in text
    rows = list(csv.DictReader((out / "compare.csv").open()))
    assert len(rows) == 6
    assert {"window_0", "window_1"} <= set(rows[0])


def test_compare_single_session_is_usage_error(landscape, tmp_path):
    land, groups = landscape
    rc = main(["compare", "--evaluator", "synthetic", "--landscape", str(land), "--groups", str(groups),
               "--algorithms", "rio", "--seeds", "1", "--out", str(tmp_path / "c")])
    assert rc == EXIT_CONFIG


# ---------------------------------------------------------------- report


def test_report_regeneration_is_identical(landscape, tmp_path):
    out = tmp_path / "s"
    assert main(synth_args(landscape, out, "--budget", "80")) == 0
    before = {n: (out / n).read_bytes() for n in ("report.json", "report.csv")}
    (out / "report.json").unlink()
    (out / "report.csv").unlink()
    assert main(["report", str(out)]) == 0
    assert before == {n: (out / n).read_bytes() for n in ("report.json", "report.csv")}


def test_report_truncated_history(landscape, tmp_path, caplog):
    out = tmp_path / "s"
    assert main(synth_args(landscape, out, "--budget", "80")) == 0
    h = out / "history.jsonl"
    h.write_text(h.read_text()[:-30])
    assert main(["report", str(out)]) == 0
    assert "truncated" in caplog.text
    rep = json.loads((out / "report.json").read_text())
    assert rep["records"] == 79


def test_report_empty_dir(tmp_path):
    assert main(["report", str(tmp_path)]) == EXIT_IO
