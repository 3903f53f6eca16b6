import json

import numpy as np
import pytest

from rsoup.cli import build_parser, main
from rsoup.config import load_config
from rsoup.errors import EXIT_OK, EXIT_USAGE, EXIT_VIOLATION
from rsoup.policy import init_weights, load_checkpoint
from rsoup.report import read_csv, read_json, write_json
from rsoup.seeding import rng_for


def run(*argv):
    return main([str(a) for a in argv])


def events(out):
    return [json.loads(line) for line in (out / "events.jsonl").read_text().splitlines()]


@pytest.fixture
def pipeline(tmp_path, tiny_config):
    """A pretrained tiny PointMass experiment."""
    config = tiny_config()
    out = tmp_path / "run"
    assert run("pretrain", "--config", config, "--out", out) == EXIT_OK
    return config, out


def test_parser_knows_every_command():
    parser = build_parser()
    for name in ("pretrain", "finetune", "rs", "morl", "compare", "quad-verify",
                 "scratch-control", "lmc", "ensemble-audit"):
        assert parser.parse_args([name]).command == name


def test_config_is_required(tmp_path):
    assert run("pretrain", "--out", tmp_path) == EXIT_USAGE


def test_bad_config_exits_with_usage(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("seed: 1\n")
    assert run("pretrain", "--config", bad, "--out", tmp_path / "out") == EXIT_USAGE
    assert not (tmp_path / "out").exists()


def test_pretrain_writes_checkpoint_and_events(pipeline):
    config, out = pipeline
    weights = load_checkpoint(out / "pretrained.ckpt")
    assert weights.arch.hidden_sizes == (4,)
    header, rows = read_csv(out / "pretrain_history.csv")
    assert header == ["update", "scalarized_return", "R0", "R1", "pretrain"] and len(rows) == 2
    kinds = [e["event"] for e in events(out)]
    assert kinds[0] == "command.start" and kinds[-1] == "command.end"
    assert "file.written" in kinds


def test_zero_update_pretrain_is_the_seeded_init(tmp_path, tiny_config):
    config = tiny_config(name="zero.yaml")
    text = config.read_text().replace("pretrain:\n  updates: 2", "pretrain:\n  updates: 0")
    config.write_text(text)
    out = tmp_path / "zero"
    assert run("pretrain", "--config", config, "--out", out) == EXIT_OK
    loaded = load_checkpoint(out / "pretrained.ckpt")
    expected = init_weights(loaded.arch, rng_for(3, "init"))
    assert np.array_equal(loaded.values, expected.values)


def test_seed_flag_overrides_config(tmp_path, tiny_config):
    config = tiny_config()
    run("pretrain", "--config", config, "--out", tmp_path / "a")
    run("pretrain", "--config", config, "--out", tmp_path / "b", "--seed", 4)
    a = (tmp_path / "a" / "pretrained.ckpt").read_bytes()
    b = (tmp_path / "b" / "pretrained.ckpt").read_bytes()
    assert a != b


def test_finetune_needs_pretrained_checkpoint(tmp_path, tiny_config):
    assert run("finetune", "--config", tiny_config(), "--out", tmp_path / "empty") == EXIT_USAGE
    kinds = [e["event"] for e in events(tmp_path / "empty")]
    assert "command.error" in kinds


def test_rs_front_and_reports(pipeline):
    config, out = pipeline
    assert run("rs", "--config", config, "--out", out) == EXIT_OK
    header, rows = read_csv(out / "rs_front.csv")
    assert header == ["lambda", "R0", "R1", "provenance"]
    assert [r[0] for r in rows] == ["0.0", "0.5", "1.0"]
    assert {r[3] for r in rows} == {"RS"}

    front = read_json(out / "rs_front.json")
    assert front["command"] == "rs" and len(front["runs"]) == 2
    assert set(front["init"]) == {"R0", "R1"}
    assert len(front["config_hash"]) == 64

    selection = read_json(out / "selection.json")["selection"]
    assert len(selection) == 3
    for row in selection:
        assert row["selected_test_value"] <= row["best_test_value"] + 1e-12

    lmc_header, lmc_rows = read_csv(out / "lmc_report.csv")
    assert lmc_header[:2] == ["pair", "lambda"] and len(lmc_rows) == 3
    assert float(lmc_rows[0][4]) == 0.0  # endpoint margin
    for rid in ("R0", "R1"):
        assert (out / f"init_interp_{rid}.csv").is_file()
        assert (out / f"expert_{rid}.ckpt").is_file()


PREREQUISITES = {
    "pretrain": [],
    "finetune": ["pretrain"],
    "rs": ["pretrain"],
    "morl": ["pretrain"],
    "compare": ["pretrain", "rs", "morl"],
    "lmc": ["pretrain", "finetune"],
    "ensemble-audit": ["pretrain", "finetune"],
    "scratch-control": [],
    "quad-verify": [],
}


def _run_stage(command, config, out, jobs):
    if command == "quad-verify":
        return run("quad-verify", "--count", 50, "--curve-points", 11, "--out", out)
    if command == "compare":
        return run("compare", "--out", out)
    return run(command, "--config", config, "--out", out, "--jobs", jobs)


def _reports(out):
    return {p.relative_to(out).as_posix(): p.read_bytes()
            for p in sorted(out.rglob("*")) if p.is_file() and p.name != "events.jsonl"}


@pytest.mark.parametrize("command", sorted(PREREQUISITES))
def test_every_command_is_byte_reproducible(tmp_path, tiny_config, command):
    config = tiny_config()
    snapshots = []
    for name, jobs in (("first", 1), ("second", 2)):
        out = tmp_path / name
        for stage in PREREQUISITES[command] + [command]:
            assert _run_stage(stage, config, out, jobs) == EXIT_OK
        snapshots.append(_reports(out))
    assert snapshots[0]
    assert snapshots[0].keys() == snapshots[1].keys()
    for name in snapshots[0]:
        assert snapshots[0][name] == snapshots[1][name], name


def test_morl_vertex_matches_rs_vertex(pipeline):
    config, out = pipeline
    assert run("rs", "--config", config, "--out", out) == EXIT_OK
    assert run("morl", "--config", config, "--out", out) == EXIT_OK
    header, morl_rows = read_csv(out / "morl_front.csv")
    assert header == ["mu", "R0", "R1", "provenance"] and len(morl_rows) == 3
    _, rs_rows = read_csv(out / "rs_front.csv")
    assert morl_rows[0][:3] == rs_rows[0][:3]
    assert morl_rows[-1][:3] == rs_rows[-1][:3]
    assert morl_rows[0][3] == "MORL"


def test_compare_after_rs_and_morl(pipeline):
    config, out = pipeline
    run("rs", "--config", config, "--out", out)
    run("morl", "--config", config, "--out", out)
    assert run("compare", "--out", out) == EXIT_OK
    payload = read_json(out / "comparison.json")
    assert set(payload["deficiency_per_front"]) == {"RS", "MORL"}
    assert payload["config_hash"] == read_json(out / "rs_front.json")["config_hash"]


def _front(path, provenance, points, command):
    write_json(path, {"command": command, "config_hash": "x", "reward_ids": ["R0", "R1"],
                      "points": [{"rewards": {"R0": a, "R1": b}, "provenance": provenance, "coeffs": []}
                                 for a, b in points]})


def test_compare_synthetic_fronts(tmp_path):
    _front(tmp_path / "rs.json", "RS", [(0.0, 0.0)], "rs")
    _front(tmp_path / "morl.json", "MORL", [(0.6, 0.6), (1.0, 0.0), (0.0, 1.0)], "morl")
    code = run("compare", "--rs", tmp_path / "rs.json", "--morl", tmp_path / "morl.json", "--out", tmp_path)
    assert code == EXIT_OK
    payload = read_json(tmp_path / "comparison.json")
    assert payload["deficiency_per_front"]["RS"] == pytest.approx(1.0)
    assert payload["deficiency_per_front"]["MORL"] == pytest.approx(0.64)
    assert payload["normalization"] is None


def test_compare_rejects_mismatched_rewards(tmp_path):
    _front(tmp_path / "rs.json", "RS", [(0.0, 0.0)], "rs")
    write_json(tmp_path / "morl.json", {"reward_ids": ["a", "b"], "points": []})
    code = run("compare", "--rs", tmp_path / "rs.json", "--morl", tmp_path / "morl.json", "--out", tmp_path)
    assert code == EXIT_USAGE


def test_quad_verify_passes_and_catches_a_weakened_bound(tmp_path):
    assert run("quad-verify", "--count", 200, "--out", tmp_path / "ok") == EXIT_OK
    report = read_json(tmp_path / "ok" / "quad_verify.json")
    assert report["ok"] and report["violation_count"] == 0
    header, rows = read_csv(tmp_path / "ok" / "bound_curve.csv")
    assert header[:3] == ["mu_hat", "rs_value", "lmc_lower"] and len(rows) == 101

    code = run("quad-verify", "--count", 100, "--dim-min", 2, "--dim-max", 2, "--bound-scale", 0.5,
               "--out", tmp_path / "bad")
    assert code == EXIT_VIOLATION
    assert read_json(tmp_path / "bad" / "quad_verify.json")["violation_count"] > 0


def test_lmc_and_ensemble_audit(pipeline):
    config, out = pipeline
    assert run("finetune", "--config", config, "--out", out) == EXIT_OK
    assert run("lmc", "--config", config, "--out", out) == EXIT_OK
    lmc = read_json(out / "lmc_report.json")["lmc"]
    assert lmc[0]["pair"] == ["R0", "R1"] and lmc[0]["lambdas"] == [0.0, 0.5, 1.0]

    assert run("ensemble-audit", "--config", config, "--out", out) == EXIT_OK
    audit = read_json(out / "ensemble_audit.json")
    assert audit["gap"] >= 0.0 and len(audit["per_probe"]) == 4
    _, rows = read_csv(out / "ensemble_front.csv")
    assert {r[3] for r in rows} == {"RS", "ensemble"}


def test_scratch_control(tmp_path, tiny_config):
    config = tiny_config()
    out = tmp_path / "control"
    assert run("scratch-control", "--config", config, "--out", out) == EXIT_OK
    payload = read_json(out / "scratch_control.json")
    assert len(payload["seeds"]) == load_config(config).control.seeds
    first = payload["seeds"][0]
    assert first["pretrained"]["lambdas"] == first["scratch"]["lambdas"]
    assert payload["summary"]["scratch_updates"] == 4
    assert set(payload["summary"]["mean_difference"]) == {"R0", "R1"}


def test_out_from_environment(tmp_path, tiny_config, monkeypatch):
    monkeypatch.setenv("RSOUP_OUT", str(tmp_path / "from_env"))
    assert run("pretrain", "--config", tiny_config()) == EXIT_OK
    assert (tmp_path / "from_env" / "pretrained.ckpt").is_file()
