"""Desk-scale experiments on the shipped configs. Opt in with --runslow."""
from pathlib import Path

import numpy as np
import pytest

from rsoup.cli import main
from rsoup.errors import EXIT_OK
from rsoup.pareto import relative_gap
from rsoup.report import read_json

CONFIGS = Path(__file__).parents[1] / "configs"
JOBS = 4

pytestmark = pytest.mark.slow


def run(*argv):
    return main([str(a) for a in argv])


def _pipeline(root: Path, config: Path, seeds) -> dict:
    """pretrain, rs, morl, compare per seed; returns seed -> output dir."""
    outs = {}
    for seed in seeds:
        out = root / f"seed{seed}"
        for command in ("pretrain", "rs", "morl"):
            assert run(command, "--config", config, "--out", out, "--seed", seed, "--jobs", JOBS) == EXIT_OK
        assert run("compare", "--out", out) == EXIT_OK
        outs[seed] = out
    return outs


@pytest.fixture(scope="module")
def pointmass_runs(tmp_path_factory):
    return _pipeline(tmp_path_factory.mktemp("pointmass"), CONFIGS / "pointmass.yaml", range(5))


@pytest.fixture(scope="module")
def tokenseq_runs(tmp_path_factory):
    return _pipeline(tmp_path_factory.mktemp("tokenseq"), CONFIGS / "tokenseq.yaml", range(3))


def test_soup_interpolation_stays_above_the_chord(pointmass_runs):
    within, total = 0, 0
    interior = {}
    for out in pointmass_runs.values():
        (lmc,) = read_json(out / "rs_front.json")["lmc"]
        assert lmc["lambdas"] == pytest.approx(np.linspace(0.0, 1.0, 11).tolist())
        margins = np.array(lmc["margins"])
        linear = np.array(lmc["linear"])
        spread = np.abs(linear[-1] - linear[0])
        within += int((margins >= -0.05 * spread).sum())
        total += margins.size
        for k, rid in enumerate(lmc["reward_ids"]):
            interior.setdefault(rid, []).extend(margins[1:-1, k])
    assert total == 5 * 11 * 2
    assert within >= 0.9 * total
    for rid, values in interior.items():
        assert np.mean(values) > 0.0, rid


def _mean_gap(runs: dict) -> float:
    deficiencies = [read_json(out / "comparison.json")["deficiency_per_front"] for out in runs.values()]
    rs = float(np.mean([d["RS"] for d in deficiencies]))
    morl = float(np.mean([d["MORL"] for d in deficiencies]))
    return relative_gap(rs, morl)


def test_pointmass_soup_front_is_close_to_the_morl_front(pointmass_runs):
    gap = _mean_gap({s: pointmass_runs[s] for s in range(3)})
    assert gap is not None and gap <= 0.15


def test_tokenseq_soup_front_is_close_to_the_morl_front(tokenseq_runs):
    gap = _mean_gap(tokenseq_runs)
    assert gap is not None and gap <= 0.15


def test_selected_soup_is_close_to_the_dedicated_morl_run(pointmass_runs, tmp_path_factory):
    root = tmp_path_factory.mktemp("morl5")
    config = root / "pointmass5.yaml"
    config.write_text((CONFIGS / "pointmass.yaml").read_text().replace("mu_points: 11", "mu_points: 5"))
    selected, dedicated, tolerance = [], [], []
    for seed in range(3):
        out = pointmass_runs[seed]
        dedicated_out = root / f"seed{seed}"
        assert run("morl", "--config", config, "--out", dedicated_out, "--seed", seed, "--jobs", JOBS,
                   "--pretrained", out / "pretrained.ckpt") == EXIT_OK
        ids = read_json(out / "rs_front.json")["reward_ids"]
        rows = read_json(out / "selection.json")["selection"]
        morl = read_json(dedicated_out / "morl_front.json")["points"]
        pooled = read_json(out / "rs_front.json")["points"] + read_json(out / "morl_front.json")["points"]
        values = np.array([[p["rewards"][r] for r in ids] for p in pooled])
        spread = values.max(axis=0) - values.min(axis=0)
        assert [row["mu_hat"][1] for row in rows] == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
        for row in rows:
            mu = np.array(row["mu_hat"])
            (point,) = [p for p in morl if np.allclose(p["coeffs"], mu)]
            selected.append(row["selected_test_value"])
            dedicated.append(float(mu @ np.array([point["rewards"][r] for r in ids])))
            tolerance.append(0.05 * float(mu @ spread))
    selected = np.array(selected).reshape(3, 5).mean(axis=0)
    dedicated = np.array(dedicated).reshape(3, 5).mean(axis=0)
    tolerance = np.array(tolerance).reshape(3, 5).mean(axis=0)
    assert np.all(selected >= dedicated - tolerance)


def test_pretrained_init_beats_scratch_init(tmp_path):
    out = tmp_path / "control"
    assert run("scratch-control", "--config", CONFIGS / "pointmass.yaml", "--out", out, "--jobs", JOBS) == EXIT_OK
    report = read_json(out / "scratch_control.json")
    assert len(report["seeds"]) == 5
    summary = report["summary"]
    for rid, exceeds in summary["pretrained_exceeds_scratch"].items():
        assert exceeds, rid
        assert summary["mean_difference"][rid] > 0.0
