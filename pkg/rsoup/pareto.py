"""
pareto.py - Dominance, fronts and hypervolume deficiency

    R1 ^
  u1 +.................U        U = utopia
     |  ######         :        # = not dominated by the front
     |  ######(o)......:          -> the deficiency (lower is better)
     |  #######|       :
     |  #######+---(o) :
     |          region :
  f1 +---------------(o)
     f0                u0 --> R0

The staircase under the Pareto points is dominated; the box from the floor
to the utopia minus that staircase is the deficiency. RS and MORL fronts
are always measured against one shared box.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .envs import RewardVector
from .errors import (ArityError, DegenerateRangeError, InvalidUtopiaError,
                     UnsupportedArityError, UsageError)

PROVENANCES = ("RS", "RS-extrapolated", "MORL", "endpoint", "init", "init-interp", "ensemble")


@dataclass(frozen=True, eq=False)
class FrontPoint:
    rewards: RewardVector
    provenance: str = "RS"
    coeffs: tuple = field(default=())  # lambda for RS points, mu for MORL points

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise UsageError(f"Unknown provenance: {self.provenance}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def to_dict(self) -> dict:
        return {"rewards": self.rewards.as_dict(), "provenance": self.provenance,
                "coeffs": list(self.coeffs)}


def _values(point) -> np.ndarray:
    return (point.rewards if isinstance(point, FrontPoint) else point).values


def _ids(point) -> tuple:
    return (point.rewards if isinstance(point, FrontPoint) else point).reward_ids


def _check_same_ids(points) -> tuple:
    ids = _ids(points[0])
    for p in points[1:]:
        if _ids(p) != ids:
            raise ArityError(f"Mixed reward ids: {ids} vs {_ids(p)}")
    return ids


def dominates(a, b) -> bool:
    if _ids(a) != _ids(b):
        raise ArityError(f"Cannot compare rewards {_ids(a)} with {_ids(b)}")
    va, vb = _values(a), _values(b)
    return bool(np.all(va >= vb) and np.any(va > vb))


def pareto_filter(points: list) -> list:
    """Undominated points in input order; exact duplicates keep their first occurrence."""
    if not points:
        return []
    _check_same_ids(points)
    values = [_values(p) for p in points]
    kept = []
    for i, v in enumerate(values):
        if any(np.array_equal(v, values[j]) for j in range(i)):
            continue
        if any(np.all(w >= v) and np.any(w > v) for w in values):
            continue
        kept.append(points[i])
    return kept


@dataclass(frozen=True, eq=False)
class NormalizationSpec:
    reward_ids: tuple
    init_values: np.ndarray
    worst_values: np.ndarray

    def __post_init__(self):
        ids = tuple(self.reward_ids)
        init = np.asarray(self.init_values, dtype=np.float64)
        worst = np.asarray(self.worst_values, dtype=np.float64)
        if init.shape != (len(ids),) or worst.shape != (len(ids),):
            raise ArityError("Normalization needs one init and one worst value per reward")
        same = [r for r, a, b in zip(ids, init, worst) if a == b]
        if same:
            raise DegenerateRangeError(f"init equals worst for rewards {same}")
        object.__setattr__(self, "reward_ids", ids)
        object.__setattr__(self, "init_values", init)
        object.__setattr__(self, "worst_values", worst)

    def apply(self, rewards: RewardVector) -> RewardVector:
        missing = [r for r in rewards.reward_ids if r not in self.reward_ids]
        if missing:
            raise ArityError(f"Normalization does not cover rewards {missing}")
        index = [self.reward_ids.index(r) for r in rewards.reward_ids]
        init, worst = self.init_values[index], self.worst_values[index]
        return RewardVector(rewards.reward_ids, (rewards.values - worst) / (init - worst))

    def to_dict(self) -> dict:
        return {r: {"init": float(a), "worst": float(b)}
                for r, a, b in zip(self.reward_ids, self.init_values, self.worst_values)}


def joint_normalization(init: RewardVector, points: list) -> NormalizationSpec:
    """init -> 1, worst compared point -> 0; a reward where init is no better than the
    worst point is anchored on the best point instead."""
    values = np.stack([_values(p) for p in points])
    worst = values.min(axis=0)
    anchor = init.values.copy()
    below = anchor - worst <= 0.0
    anchor[below] = values.max(axis=0)[below]
    return NormalizationSpec(init.reward_ids, anchor, worst)


def normalize(points: list, spec: NormalizationSpec) -> list:
    """r -> (r - worst) / (init - worst), per reward."""
    out = []
    for p in points:
        if isinstance(p, FrontPoint):
            out.append(replace(p, rewards=spec.apply(p.rewards)))
        else:
            out.append(spec.apply(p))
    return out


def _as_array(point, name: str) -> np.ndarray:
    if isinstance(point, (RewardVector, FrontPoint)):
        return _values(point).astype(np.float64)
    arr = np.asarray(point, dtype=np.float64).reshape(-1)
    if arr.size != 2:
        raise UnsupportedArityError(f"{name} must have 2 coordinates")
    return arr


def hypervolume_deficiency(points: list, utopia=None, floor=None) -> float:
    if not points:
        raise UsageError("hypervolume_deficiency needs at least one point")
    _check_same_ids(points)
    values = np.stack([_values(p) for p in points])
    if values.shape[1] != 2:
        raise UnsupportedArityError(f"Hypervolume is only defined here for 2 rewards, got {values.shape[1]}")
    u = values.max(axis=0) if utopia is None else _as_array(utopia, "utopia")
    f = values.min(axis=0) if floor is None else _as_array(floor, "floor")
    if np.any(values > u):
        raise InvalidUtopiaError(f"Utopia {u.tolist()} does not dominate every point")
    if np.any(f > u):
        raise InvalidUtopiaError(f"Floor {f.tolist()} lies above utopia {u.tolist()}")

    front = np.maximum(np.stack([_values(p) for p in pareto_filter(list(points))]), f)
    # x descending => y ascending along a Pareto staircase.
    front = front[np.lexsort((front[:, 1], -front[:, 0]))]
    dominated, prev_y = 0.0, f[1]
    for x, y in front:
        if y > prev_y:
            dominated += (x - f[0]) * (y - prev_y)
            prev_y = y
    return float((u[0] - f[0]) * (u[1] - f[1]) - dominated)


@dataclass(eq=False)
class ComparisonReport:
    names: tuple
    fronts: dict
    utopia: np.ndarray
    floor: np.ndarray
    deficiency: dict
    relative_gap: float | None
    normalization: NormalizationSpec | None = None

    def to_dict(self) -> dict:
        return {
            "fronts": [{"name": n, "points": [p.to_dict() for p in self.fronts[n]],
                        "pareto": [p.to_dict() for p in pareto_filter(self.fronts[n])]}
                       for n in self.names],
            "utopia": self.utopia.tolist(),
            "floor": self.floor.tolist(),
            "deficiency_per_front": {n: self.deficiency[n] for n in self.names},
            "relative_gap": self.relative_gap,
            "normalization": self.normalization.to_dict() if self.normalization else None,
        }


def relative_gap(first: float, second: float) -> float | None:
    """(first - second) / second; 0 when both are 0, undefined when only second is."""
    if second == 0.0:
        return 0.0 if first == 0.0 else None
    return (first - second) / second


def compare_fronts(fronts: dict, utopia=None, floor=None,
                   normalization: NormalizationSpec | None = None) -> ComparisonReport:
    """Deficiencies of every front in one shared box; relative gap of the first front vs the second."""
    names = tuple(fronts)
    if not names or any(not fronts[n] for n in names):
        raise UsageError("compare_fronts needs nonempty fronts")
    _check_same_ids([p for n in names for p in fronts[n]])
    if normalization is not None:
        fronts = {n: normalize(fronts[n], normalization) for n in names}
    union = np.stack([_values(p) for n in names for p in fronts[n]])
    u = union.max(axis=0) if utopia is None else _as_array(utopia, "utopia")
    f = union.min(axis=0) if floor is None else _as_array(floor, "floor")
    deficiency = {n: hypervolume_deficiency(fronts[n], u, f) for n in names}
    gap = relative_gap(deficiency[names[0]], deficiency[names[1]]) if len(names) > 1 else None
    return ComparisonReport(names, dict(fronts), u, f, deficiency, gap, normalization)
