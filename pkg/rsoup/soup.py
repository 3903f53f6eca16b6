"""
soup.py - Rewarded soups

Fine-tune one expert per proxy reward from a shared init, then slide
through weight space instead of retraining:

    theta_1 (R1 expert) ----+
    theta_2 (R2 expert) ----+--> sum_i lambda_i * theta_i --> evaluate --> front
    ...                     |         lambda in the simplex
    theta_N (RN expert) ----+

    selection:  lambda* = argmax_j  sum_i mu_hat_i * R_i(theta_lambda_j)
    LMC audit:  R_k(theta_lambda) - [(1-lambda) R_k(theta_1) + lambda R_k(theta_2)]
    ensembling: || f(x, theta_lambda) - [(1-lambda) f(x, theta_1) + lambda f(x, theta_2)] ||

Every lambda of a sweep is evaluated on the same episode seeds, so two
points of a front differ only by their weights.

Key insight: "One training per reward; every trade-off in between is free."
"""

import logging
from dataclasses import dataclass

import numpy as np

from .envs import RewardVector, evaluate
from .errors import (ArityError, IncompatibleArchError, InsufficientDataError,
                     ShapeError, UsageError)
from .jobs import JobPool
from .policy import EnsemblePolicy, WeightVector, forward

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-12


# -- SimplexPoint: lambda, mu and mu_hat all live in Delta_N --
@dataclass(frozen=True)
class SimplexPoint:
    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise UsageError("A simplex point needs at least one coefficient")
        if any(not np.isfinite(c) or c < 0.0 for c in coeffs):
            raise UsageError(f"Simplex coefficients must be finite and nonnegative: {coeffs}")
        if abs(sum(coeffs) - 1.0) > SIMPLEX_TOL:
            raise UsageError(f"Simplex coefficients must sum to 1, got {sum(coeffs)!r}")
        object.__setattr__(self, "coeffs", coeffs)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs)

    @classmethod
    def vertex(cls, n: int, i: int) -> "SimplexPoint":
        return cls(tuple(1.0 if k == i else 0.0 for k in range(n)))

    @classmethod
    def barycenter(cls, n: int) -> "SimplexPoint":
        return cls((1.0 / n,) * n)

    @classmethod
    def pair(cls, lam: float) -> "SimplexPoint":
        """(1 - lambda, lambda): lambda is the weight of the second expert."""
        return cls((1.0 - lam, lam))

    def vertex_index(self) -> int | None:
        hits = [i for i, c in enumerate(self.coeffs) if c == 1.0]
        return hits[0] if hits else None


def _coeff_array(lam, allow_extrapolation: bool) -> np.ndarray:
    if isinstance(lam, SimplexPoint):
        return lam.as_array()
    coeffs = np.asarray(lam, dtype=np.float64).reshape(-1)
    if not allow_extrapolation:
        return SimplexPoint(tuple(coeffs)).as_array()
    if not np.all(np.isfinite(coeffs)) or abs(coeffs.sum() - 1.0) > SIMPLEX_TOL:
        raise UsageError(f"Extrapolation coefficients must be finite and sum to 1: {coeffs}")
    return coeffs


def interpolate(experts: list, lam, allow_extrapolation: bool = False) -> WeightVector:
    coeffs = _coeff_array(lam, allow_extrapolation)
    if len(experts) != coeffs.size:
        raise UsageError(f"{len(experts)} experts for {coeffs.size} coefficients")
    arch = experts[0].arch
    if any(e.arch != arch for e in experts[1:]):
        raise IncompatibleArchError("Experts do not share one architecture")
    values = coeffs[0] * experts[0].values
    for c, expert in zip(coeffs[1:], experts[1:]):
        values = values + c * expert.values
    return WeightVector(arch, values)


def sample_simplex(n: int, m: int, rng: np.random.Generator) -> list:
    """m flat-Dirichlet draws on Delta_n via normalized unit-rate exponentials."""
    if n < 1 or m < 1:
        raise UsageError("sample_simplex needs n >= 1 and m >= 1")
    draws = rng.standard_exponential((m, n))
    draws /= draws.sum(axis=1, keepdims=True)
    return [SimplexPoint(tuple(row)) for row in draws]


def lambda_grid(n: int, points: int = 11, samples: int = 50,
                rng: np.random.Generator | None = None) -> list:
    if n == 1:
        return [SimplexPoint((1.0,))]
    if n == 2:
        if points < 2:
            raise UsageError("A pair grid needs at least 2 points")
        return [SimplexPoint.pair(i / (points - 1)) for i in range(points)]
    grid = [SimplexPoint.vertex(n, i) for i in range(n)] + [SimplexPoint.barycenter(n)]
    if samples:
        grid += sample_simplex(n, samples, rng if rng is not None else np.random.default_rng(0))
    return grid


def extrapolation_grid(lo: float, hi: float, points: int) -> list:
    """Pair coefficients (1 - lambda, lambda) for lambda spanning [lo, hi], outside the simplex allowed."""
    return [(1.0 - lam, lam) for lam in np.linspace(lo, hi, points)]


@dataclass(frozen=True, eq=False)
class SoupCandidate:
    lam: object  # SimplexPoint, or a raw coefficient tuple when extrapolating
    weights: WeightVector | None
    eval: RewardVector
    provenance: str = "RS"

    @property
    def coeffs(self) -> tuple:
        return tuple(self.lam.coeffs if isinstance(self.lam, SimplexPoint) else self.lam)


def front_sweep(experts: list, env, grid: list, eval_episodes: int, seed: int,
                reward_ids=None, jobs: int = 1, allow_extrapolation: bool = False,
                provenance: str = "RS") -> list:
    if not grid:
        raise UsageError("front_sweep needs a nonempty grid")
    ids = tuple(reward_ids or env.reward_ids)

    def one(lam):
        weights = interpolate(experts, lam, allow_extrapolation)
        rewards = evaluate(weights, env, eval_episodes, seed).select(ids)
        return SoupCandidate(lam, weights, rewards, provenance)

    return JobPool(jobs).map(one, grid)


def init_sweep(init: WeightVector, expert: WeightVector, env, lambdas, eval_episodes: int,
               seed: int, reward_ids=None, jobs: int = 1) -> list:
    """Interpolate the pretrained weights towards one expert (lambda = expert weight)."""
    grid = [SimplexPoint.pair(float(lam)) for lam in lambdas]
    return front_sweep([init, expert], env, grid, eval_episodes, seed, reward_ids, jobs,
                       provenance="init-interp")


def ensemble_front_sweep(experts: list, env, grid: list, eval_episodes: int, seed: int,
                         reward_ids=None, jobs: int = 1) -> list:
    """Same sweep, but acting from mixed predictions instead of mixed weights."""
    if not grid:
        raise UsageError("ensemble_front_sweep needs a nonempty grid")
    ids = tuple(reward_ids or env.reward_ids)

    def one(lam):
        policy = EnsemblePolicy(tuple(experts), lam.coeffs)
        rewards = evaluate(policy, env, eval_episodes, seed).select(ids)
        return SoupCandidate(lam, None, rewards, "ensemble")

    return JobPool(jobs).map(one, grid)


def _pref_array(user_pref, arity: int) -> np.ndarray:
    pref = user_pref.as_array() if isinstance(user_pref, SimplexPoint) else SimplexPoint(tuple(user_pref)).as_array()
    if pref.size != arity:
        raise ArityError(f"Preference has {pref.size} entries, candidates have {arity} rewards")
    return pref


def scalarized_scores(candidates: list, user_pref) -> np.ndarray:
    pref = _pref_array(user_pref, len(candidates[0].eval))
    return np.array([float(pref @ c.eval.values) for c in candidates])


def select_coefficient(candidates: list, user_pref) -> SoupCandidate:
    """argmax_j sum_i mu_hat_i * eval_j[i]; ties go to the lowest index."""
    if not candidates:
        raise UsageError("select_coefficient needs at least one candidate")
    return candidates[int(np.argmax(scalarized_scores(candidates, user_pref)))]


def naive_coefficient(candidates: list, user_pref) -> SoupCandidate:
    """The lambda = mu_hat heuristic: candidate whose coefficients are nearest to mu_hat."""
    if not candidates:
        raise UsageError("naive_coefficient needs at least one candidate")
    pref = _pref_array(user_pref, len(candidates[0].coeffs))
    dists = [float(np.linalg.norm(np.asarray(c.coeffs) - pref)) for c in candidates]
    return candidates[int(np.argmin(dists))]


# -- LMC audit --
@dataclass(frozen=True, eq=False)
class LmcReport:
    lambdas: tuple
    reward_ids: tuple
    interpolated: np.ndarray  # R_k(theta_lambda), shape (L, K)
    linear: np.ndarray        # (1 - lambda) R_k(theta_1) + lambda R_k(theta_2)

    @property
    def margins(self) -> np.ndarray:
        return self.interpolated - self.linear

    def interior(self) -> np.ndarray:
        return np.array([0.0 < lam < 1.0 for lam in self.lambdas])

    def mean_interior_margin(self) -> dict:
        mask = self.interior()
        if not mask.any():
            raise UsageError("The lambda grid has no interior point")
        return {r: float(self.margins[mask, k].mean()) for k, r in enumerate(self.reward_ids)}

    def to_dict(self) -> dict:
        return {
            "lambdas": [float(lam) for lam in self.lambdas],
            "reward_ids": list(self.reward_ids),
            "interpolated": self.interpolated.tolist(),
            "linear": self.linear.tolist(),
            "margins": self.margins.tolist(),
            "mean_interior_margin": self.mean_interior_margin() if self.interior().any() else None,
        }


def lmc_audit(theta1: WeightVector, theta2: WeightVector, env, lambda_grid, eval_episodes: int,
              seed: int, reward_ids=None, jobs: int = 1) -> LmcReport:
    if theta1.arch != theta2.arch:
        raise IncompatibleArchError("LMC audit needs experts with one architecture")
    lambdas = tuple(float(lam) for lam in lambda_grid)
    if not lambdas or any(not 0.0 <= lam <= 1.0 for lam in lambdas):
        raise UsageError(f"LMC lambdas must lie in [0, 1]: {lambdas}")
    ids = tuple(reward_ids or env.reward_ids)
    r1 = evaluate(theta1, env, eval_episodes, seed).select(ids).values
    r2 = evaluate(theta2, env, eval_episodes, seed).select(ids).values

    def one(lam):
        # Endpoints reuse the expert evaluations, so their margins are exactly 0.
        if lam == 0.0:
            return r1
        if lam == 1.0:
            return r2
        weights = interpolate([theta1, theta2], SimplexPoint.pair(lam))
        return evaluate(weights, env, eval_episodes, seed).select(ids).values

    interpolated = np.stack(JobPool(jobs).map(one, lambdas))
    linear = np.stack([(1.0 - lam) * r1 + lam * r2 for lam in lambdas])
    return LmcReport(lambdas, ids, interpolated, linear)


# -- Weight interpolation vs prediction ensembling --
def ensembling_gap(theta1: WeightVector, theta2: WeightVector, lam: float, probe_inputs) -> tuple:
    probes = [np.asarray(x, dtype=np.float64) for x in probe_inputs]
    if not probes:
        raise UsageError("ensembling_gap needs probe inputs")
    theta_lam = interpolate([theta1, theta2], SimplexPoint.pair(lam))
    details = []
    for x in probes:
        mixed = (1.0 - lam) * forward(theta1, x).params() + lam * forward(theta2, x).params()
        details.append(float(np.linalg.norm(forward(theta_lam, x).params() - mixed)))
    return max(details), details


def loglog_slope(scales, gaps, zero_tol: float = 1e-12) -> float:
    """Least-squares slope of log(gap) on log(scale); gaps <= zero_tol are left out."""
    scales, gaps = np.asarray(scales, dtype=np.float64), np.asarray(gaps, dtype=np.float64)
    keep = gaps > zero_tol
    if keep.sum() < 3:
        raise InsufficientDataError(f"Only {int(keep.sum())} non-zero gaps; need 3 for a slope")
    slope, _ = np.polyfit(np.log(scales[keep]), np.log(gaps[keep]), 1)
    return float(slope)


def scaling_audit(theta1: WeightVector, direction_u, lam: float, scales, probe_inputs,
                  zero_tol: float = 1e-12) -> float:
    scales = np.asarray(sorted(float(s) for s in scales))
    if scales.size < 3 or scales[0] <= 0.0 or scales[-1] / scales[0] < 10.0:
        raise UsageError("scaling_audit needs >= 3 positive scales spanning at least one decade")
    u = np.asarray(direction_u, dtype=np.float64)
    if u.shape != theta1.values.shape:
        raise ShapeError(f"Direction has shape {u.shape}, weights have {theta1.values.shape}")
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise UsageError("Direction must be nonzero")
    u = u / norm
    gaps = [ensembling_gap(theta1, theta1.with_values(theta1.values + s * u), lam, probe_inputs)[0]
            for s in scales]
    logger.debug("scaling gaps: %s", dict(zip(scales.tolist(), gaps)))
    return loglog_slope(scales, gaps, zero_tol)
