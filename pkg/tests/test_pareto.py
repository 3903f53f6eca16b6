import numpy as np
import pytest

from rsoup.envs import RewardVector
from rsoup.errors import (ArityError, DegenerateRangeError, InvalidUtopiaError,
                          UnsupportedArityError)
from rsoup.pareto import (FrontPoint, NormalizationSpec, compare_fronts, dominates,
                          hypervolume_deficiency, joint_normalization, normalize,
                          pareto_filter, relative_gap)

IDS = ("R0", "R1")


def rv(*values, ids=IDS):
    return RewardVector(ids, values)


def test_dominance():
    assert dominates(rv(1.0, 1.0), rv(0.0, 1.0))
    assert not dominates(rv(1.0, 1.0), rv(1.0, 1.0))
    assert not dominates(rv(1.0, 0.0), rv(0.0, 1.0))
    with pytest.raises(ArityError):
        dominates(rv(1.0, 1.0), rv(1.0, 1.0, ids=("a", "b")))


def test_pareto_filter_keeps_order_and_first_duplicate():
    points = [rv(0.0, 1.0), rv(0.5, 0.5), rv(0.2, 0.2), rv(1.0, 0.0), rv(0.5, 0.5)]
    kept = pareto_filter(points)
    assert kept == [points[0], points[1], points[3]]
    assert pareto_filter([]) == []


def test_pareto_filter_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        # coarse values so that ties and duplicates actually happen
        values = rng.integers(0, 5, size=(n, 2)).astype(float)
        points = [rv(*row) for row in values]
        kept = pareto_filter(points)
        for i, p in enumerate(points):
            dominated = any(dominates(q, p) for q in points)
            duplicate = any(np.array_equal(points[j].values, p.values) for j in range(i))
            assert (p in kept) == (not dominated and not duplicate)


def test_deficiency_hand_examples():
    # a single point at the floor leaves the whole box undominated
    assert hypervolume_deficiency([rv(0.0, 0.0)], utopia=(1.0, 1.0), floor=(0.0, 0.0)) == pytest.approx(1.0)
    # staircase swept right to left: three stacked slabs
    front = [rv(0.2, 0.8), rv(0.6, 0.6), rv(0.8, 0.2)]
    dominated = 0.8 * 0.2 + 0.6 * (0.6 - 0.2) + 0.2 * (0.8 - 0.6)
    assert hypervolume_deficiency(front, (1.0, 1.0), (0.0, 0.0)) == pytest.approx(1.0 - dominated)
    assert hypervolume_deficiency([rv(0.6, 0.6)], (1.0, 1.0), (0.0, 0.0)) == pytest.approx(0.64)


def test_deficiency_default_box_and_errors():
    front = [rv(0.0, 1.0), rv(1.0, 0.0)]
    assert hypervolume_deficiency(front) == pytest.approx(1.0)
    with pytest.raises(InvalidUtopiaError):
        hypervolume_deficiency(front, utopia=(0.5, 0.5), floor=(0.0, 0.0))
    with pytest.raises(UnsupportedArityError):
        hypervolume_deficiency([RewardVector(("a", "b", "c"), [0.0, 0.0, 0.0])])


def test_deficiency_ignores_dominated_points():
    front = [rv(0.2, 0.8), rv(0.8, 0.2)]
    with_junk = front + [rv(0.1, 0.1), rv(0.2, 0.2)]
    box = ((1.0, 1.0), (0.0, 0.0))
    assert hypervolume_deficiency(with_junk, *box) == pytest.approx(hypervolume_deficiency(front, *box))


def _monte_carlo_deficiency(values, rng, samples):
    u = rng.uniform(0.0, 1.0, size=(samples, 2))
    dominated = np.zeros(samples, dtype=bool)
    for x, y in values:
        dominated |= (u[:, 0] <= x) & (u[:, 1] <= y)
    return 1.0 - dominated.mean()


def test_deficiency_matches_monte_carlo():
    rng = np.random.default_rng(5)
    for _ in range(5):
        values = rng.uniform(0.0, 1.0, size=(int(rng.integers(1, 10)), 2))
        exact = hypervolume_deficiency([rv(*row) for row in values], (1.0, 1.0), (0.0, 0.0))
        assert exact == pytest.approx(_monte_carlo_deficiency(values, rng, 1_000_000), abs=3e-3)


@pytest.mark.slow
def test_deficiency_matches_monte_carlo_at_scale():
    rng = np.random.default_rng(6)
    for _ in range(50):
        values = rng.uniform(0.0, 1.0, size=(int(rng.integers(1, 13)), 2))
        exact = hypervolume_deficiency([rv(*row) for row in values], (1.0, 1.0), (0.0, 0.0))
        assert exact == pytest.approx(_monte_carlo_deficiency(values, rng, 10_000_000), abs=1e-3)


def test_normalization_maps_init_to_one_and_worst_to_zero():
    spec = NormalizationSpec(IDS, [2.0, -1.0], [0.0, -3.0])
    out = spec.apply(rv(2.0, -3.0))
    assert out.as_dict() == {"R0": 1.0, "R1": 0.0}
    with pytest.raises(DegenerateRangeError):
        NormalizationSpec(IDS, [1.0, 1.0], [0.0, 1.0])


def test_joint_normalization_falls_back_to_best_point():
    points = [rv(0.0, 4.0), rv(3.0, 1.0)]
    spec = joint_normalization(rv(1.0, 0.5), points)
    assert spec.worst_values.tolist() == [0.0, 1.0]
    # R1: init 0.5 is below the worst point, so the best point (4.0) anchors it
    assert spec.init_values.tolist() == [1.0, 4.0]
    normalized = normalize([FrontPoint(p) for p in points], spec)
    assert normalized[1].rewards.as_dict() == pytest.approx({"R0": 3.0, "R1": 0.0})


def test_compare_fronts_uses_one_shared_box():
    rs = [FrontPoint(rv(0.0, 0.0), "RS")]
    morl = [FrontPoint(rv(0.6, 0.6), "MORL"), FrontPoint(rv(1.0, 0.0), "MORL"), FrontPoint(rv(0.0, 1.0), "MORL")]
    report = compare_fronts({"RS": rs, "MORL": morl})
    assert report.utopia.tolist() == [1.0, 1.0] and report.floor.tolist() == [0.0, 0.0]
    assert report.deficiency["RS"] == pytest.approx(1.0)
    assert report.deficiency["MORL"] == pytest.approx(0.64)
    assert report.relative_gap == pytest.approx((1.0 - 0.64) / 0.64)
    payload = report.to_dict()
    assert [f["name"] for f in payload["fronts"]] == ["RS", "MORL"]
    assert len(payload["fronts"][1]["pareto"]) == 3


def test_compare_front_with_itself_has_zero_gap():
    front = [FrontPoint(rv(0.2, 0.9)), FrontPoint(rv(0.7, 0.3))]
    report = compare_fronts({"RS": front, "MORL": front})
    assert report.relative_gap == 0.0


def test_relative_gap_edge_cases():
    assert relative_gap(0.0, 0.0) == 0.0
    assert relative_gap(1.0, 0.0) is None
    assert relative_gap(1.5, 1.0) == pytest.approx(0.5)
