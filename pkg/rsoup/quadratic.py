"""
quadratic.py - Quadratic rewards: where the soup can be solved by hand

Each reward is a diagonal concave quadratic

    R_i(theta) = peak_i - sum_j eta_i^j (theta^j - theta_i^j)^2

so for two experts and a user preference mu_hat everything is closed form:

    per dimension   lambda_hat^j = mu eta_2^j / ((1-mu) eta_1^j + mu eta_2^j)
    best uniform    lambda_bar   = sum_j p_j lambda_hat^j / sum_j p_j
                                 = mu D2 / ((1-mu) D1 + mu D2)
    exact gap       dR           = sum_j p_j (lambda_bar - lambda_hat^j)^2
    bound           dR <= mu^2 (1-mu)^2 (M D1 - D2)(M D2 - D1)
                          / ((mu(1-mu)(M-1)^2 + M)((1-mu) D1 + mu D2))

    with p_j = ((1-mu) eta_1^j + mu eta_2^j)(theta_1^j - theta_2^j)^2,
    D1 = R_1(theta_1) - R_1(theta_2), D2 = R_2(theta_2) - R_2(theta_1),
    M  = worst per-dimension curvature ratio.

QuadraticEnv wraps a reward family as a noise-free environment so the soup
and pareto code can be checked against these formulas.

Key insight: "A bound you can evaluate is a bound you can test."
"""

import logging
from dataclasses import dataclass
from typing import ClassVar

import numpy as np

from .envs import RewardVector, Trajectory
from .errors import (ArityError, DegenerateError, InvariantViolation,
                     NotIsotropicError, ShapeError, UsageError)
from .policy import ArchSpec, WeightVector
from .seeding import rng_for
from .soup import SimplexPoint

logger = logging.getLogger(__name__)

FORMULA_TOL = 1e-10
GAP_TOL = 1e-9
EQUAL_DELTA_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QuadraticReward:
    optimum: np.ndarray
    curvature: np.ndarray
    peak: float = 0.0

    def __post_init__(self):
        optimum = np.asarray(self.optimum, dtype=np.float64).reshape(-1)
        curvature = np.asarray(self.curvature, dtype=np.float64).reshape(-1)
        if curvature.size == 1 and optimum.size > 1:
            curvature = np.full(optimum.size, curvature[0])
        if optimum.shape != curvature.shape:
            raise ShapeError(f"optimum has {optimum.size} dims, curvature {curvature.size}")
        if not np.all(curvature > 0.0):
            raise UsageError("Curvatures must be strictly positive")
        object.__setattr__(self, "optimum", optimum)
        object.__setattr__(self, "curvature", curvature)
        object.__setattr__(self, "peak", float(self.peak))

    @property
    def dim(self) -> int:
        return self.optimum.size

    @property
    def isotropic(self) -> bool:
        return bool(np.all(self.curvature == self.curvature[0]))

    def to_dict(self) -> dict:
        return {"optimum": self.optimum.tolist(), "curvature": self.curvature.tolist(), "peak": self.peak}


def _theta(r: QuadraticReward, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size != r.dim:
        raise ShapeError(f"theta has {theta.size} dims, reward has {r.dim}")
    return theta


def eval_quad(r: QuadraticReward, theta) -> float:
    diff = _theta(r, theta) - r.optimum
    return float(r.peak - np.sum(r.curvature * diff * diff))


def grad_quad(r: QuadraticReward, theta) -> np.ndarray:
    return -2.0 * r.curvature * (_theta(r, theta) - r.optimum)


def mixture_value(rewards: list, pref, theta) -> float:
    """sum_i mu_hat_i R_i(theta)."""
    coeffs = pref.coeffs if isinstance(pref, SimplexPoint) else tuple(pref)
    if len(coeffs) != len(rewards):
        raise ArityError(f"{len(coeffs)} weights for {len(rewards)} rewards")
    return float(sum(c * eval_quad(r, theta) for c, r in zip(coeffs, rewards)))


def isotropic_mixture_opt(rewards: list, pref) -> tuple[np.ndarray, SimplexPoint]:
    pref = pref if isinstance(pref, SimplexPoint) else SimplexPoint(tuple(pref))
    if len(pref) != len(rewards):
        raise ArityError(f"{len(pref)} weights for {len(rewards)} rewards")
    if any(r.dim != rewards[0].dim for r in rewards):
        raise ShapeError("Rewards have different dimensions")
    if not all(r.isotropic for r in rewards):
        raise NotIsotropicError("Every reward needs one curvature shared by all dimensions")
    weights = pref.as_array() * np.array([r.curvature[0] for r in rewards])
    total = weights.sum()
    if total == 0.0:
        raise DegenerateError("All mu_hat_i * eta_i are zero")
    hull = weights / total
    theta_hat = sum(h * r.optimum for h, r in zip(hull, rewards))
    return np.asarray(theta_hat, dtype=np.float64), SimplexPoint(tuple(hull))


# -- QuadPair: two experts, each optimal for its own reward --
@dataclass(frozen=True, eq=False)
class QuadPair:
    r1: QuadraticReward
    r2: QuadraticReward

    def __post_init__(self):
        if self.r1.dim != self.r2.dim:
            raise ShapeError(f"Pair dimensions differ: {self.r1.dim} vs {self.r2.dim}")

    @property
    def delta_theta_sq(self) -> np.ndarray:
        diff = self.r1.optimum - self.r2.optimum
        return diff * diff

    @property
    def M(self) -> float:
        ratio = self.r1.curvature / self.r2.curvature
        return float(np.max(np.maximum(ratio, 1.0 / ratio)))

    @property
    def delta1(self) -> float:
        return float(np.sum(self.r1.curvature * self.delta_theta_sq))

    @property
    def delta2(self) -> float:
        return float(np.sum(self.r2.curvature * self.delta_theta_sq))

    @property
    def degenerate(self) -> bool:
        return bool(np.array_equal(self.r1.optimum, self.r2.optimum))

    def value(self, mu_hat: float, theta) -> float:
        """R_mu_hat = (1 - mu_hat) R_1 + mu_hat R_2."""
        return (1.0 - mu_hat) * eval_quad(self.r1, theta) + mu_hat * eval_quad(self.r2, theta)

    def segment(self, lam: float) -> np.ndarray:
        return (1.0 - lam) * self.r1.optimum + lam * self.r2.optimum

    def to_dict(self) -> dict:
        return {"r1": self.r1.to_dict(), "r2": self.r2.to_dict(), "M": self.M,
                "delta1": self.delta1, "delta2": self.delta2}


def _check_mu(mu_hat: float) -> float:
    mu_hat = float(mu_hat)
    if not 0.0 <= mu_hat <= 1.0:
        raise UsageError(f"mu_hat must lie in [0, 1], got {mu_hat}")
    return mu_hat


def _check_pair(pair: QuadPair):
    if pair.degenerate:
        raise DegenerateError("theta_1 = theta_2: every lambda is optimal")


def per_dim_coeffs(pair: QuadPair, mu_hat: float) -> np.ndarray:
    mu = _check_mu(mu_hat)
    return mu * pair.r2.curvature / ((1.0 - mu) * pair.r1.curvature + mu * pair.r2.curvature)


def _p_weights(pair: QuadPair, mu: float) -> np.ndarray:
    return ((1.0 - mu) * pair.r1.curvature + mu * pair.r2.curvature) * pair.delta_theta_sq


def global_optimum(pair: QuadPair, mu_hat: float) -> np.ndarray:
    lam_hat = per_dim_coeffs(pair, mu_hat)
    return (1.0 - lam_hat) * pair.r1.optimum + lam_hat * pair.r2.optimum


def best_uniform_coeff(pair: QuadPair, mu_hat: float) -> float:
    mu = _check_mu(mu_hat)
    _check_pair(pair)
    p = _p_weights(pair, mu)
    weighted = float(np.sum(p * per_dim_coeffs(pair, mu)) / np.sum(p))
    ratio = mu * pair.delta2 / ((1.0 - mu) * pair.delta1 + mu * pair.delta2)
    if abs(weighted - ratio) > FORMULA_TOL:
        raise InvariantViolation(f"lambda_bar formulas disagree: {weighted!r} vs {ratio!r} (mu_hat={mu})")
    return weighted


def exact_gap(pair: QuadPair, mu_hat: float) -> float:
    mu = _check_mu(mu_hat)
    lam_bar = best_uniform_coeff(pair, mu)
    diff = lam_bar - per_dim_coeffs(pair, mu)
    return float(np.sum(_p_weights(pair, mu) * diff * diff))


def bound_value(mu_hat: float, M: float, delta1: float, delta2: float) -> float:
    mu = _check_mu(mu_hat)
    num = mu * mu * (1.0 - mu) ** 2 * (M * delta1 - delta2) * (M * delta2 - delta1)
    den = (mu * (1.0 - mu) * (M - 1.0) ** 2 + M) * ((1.0 - mu) * delta1 + mu * delta2)
    return float(num / den)


def equal_delta_bound(mu_hat: float, M: float, delta: float) -> float:
    """The bound once D1 = D2 = delta."""
    mu = _check_mu(mu_hat)
    s = mu * (1.0 - mu) * (M - 1.0) ** 2
    return float(mu * (1.0 - mu) * s * delta / (s + M))


def gap_bound(pair: QuadPair, mu_hat: float) -> float:
    mu = _check_mu(mu_hat)
    _check_pair(pair)
    bound = bound_value(mu, pair.M, pair.delta1, pair.delta2)
    if abs(pair.delta1 - pair.delta2) <= EQUAL_DELTA_TOL:
        simplified = equal_delta_bound(mu, pair.M, 0.5 * (pair.delta1 + pair.delta2))
        if abs(bound - simplified) > FORMULA_TOL:
            raise InvariantViolation(f"Bound forms disagree: {bound!r} vs {simplified!r} (mu_hat={mu})")
    return bound


def bhatia_davis(pair: QuadPair, mu_hat: float) -> tuple[float, float]:
    """(Var(Lambda), (max - E)(E - min)) for P(Lambda = lambda_hat^j) proportional to p_j."""
    mu = _check_mu(mu_hat)
    p = _p_weights(pair, mu)
    lam_hat = per_dim_coeffs(pair, mu)
    mean = float(np.sum(p * lam_hat) / np.sum(p))
    var = float(np.sum(p * (lam_hat - mean) ** 2) / np.sum(p))
    return var, float((lam_hat.max() - mean) * (mean - lam_hat.min()))


# === SECTION: instance verification ===

def random_pair(rng: np.random.Generator, dim: int, curvature_range=(0.1, 10.0),
                equal_curvature: bool = False) -> QuadPair:
    lo, hi = np.log(curvature_range[0]), np.log(curvature_range[1])
    eta1 = np.exp(rng.uniform(lo, hi, size=dim))
    eta2 = eta1.copy() if equal_curvature else np.exp(rng.uniform(lo, hi, size=dim))
    r1 = QuadraticReward(rng.standard_normal(dim), eta1, float(rng.standard_normal()))
    r2 = QuadraticReward(rng.standard_normal(dim), eta2, float(rng.standard_normal()))
    return QuadPair(r1, r2)


@dataclass(eq=False)
class VerifyReport:
    checks: int = 0
    min_slack: float = float("inf")
    max_slack: float = float("-inf")
    max_bd_slack: float = 0.0
    violations: list = None
    bound_scale: float = 1.0

    def __post_init__(self):
        if self.violations is None:
            self.violations = []

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"checks": self.checks, "min_slack": self.min_slack, "max_slack": self.max_slack,
                "max_bhatia_davis_excess": self.max_bd_slack, "bound_scale": self.bound_scale,
                "violation_count": len(self.violations), "violations": self.violations}


def verify_pair(pair: QuadPair, mu_grid, report: VerifyReport, index: int = 0) -> VerifyReport:
    """Check one instance over a mu_hat grid; problems are recorded, never raised."""
    for mu in mu_grid:
        mu = float(mu)
        problem = None
        try:
            lam_bar = best_uniform_coeff(pair, mu)
            gap = exact_gap(pair, mu)
            bound = report.bound_scale * gap_bound(pair, mu)
        except InvariantViolation as e:
            report.violations.append({"instance": index, "mu_hat": mu, "kind": "formula",
                                      "detail": str(e), "pair": pair.to_dict()})
            continue
        report.checks += 1
        slack = bound - gap
        report.min_slack = min(report.min_slack, slack)
        report.max_slack = max(report.max_slack, slack)
        var, bd = bhatia_davis(pair, mu)
        report.max_bd_slack = max(report.max_bd_slack, var - bd)
        if gap > bound + GAP_TOL:
            problem = "gap_exceeds_bound"
        elif not -EQUAL_DELTA_TOL <= lam_bar <= 1.0 + EQUAL_DELTA_TOL:
            problem = "lambda_bar_outside_unit_interval"
        elif var > bd + EQUAL_DELTA_TOL:
            problem = "bhatia_davis"
        if problem:
            report.violations.append({"instance": index, "mu_hat": mu, "kind": problem, "gap": gap,
                                      "bound": bound, "lambda_bar": lam_bar, "pair": pair.to_dict()})
    return report


def verify_instances(count: int, dim_range=(1, 64), curvature_range=(0.1, 10.0), seed: int = 0,
                     mu_points: int = 21, bound_scale: float = 1.0,
                     equal_curvature: bool = False) -> VerifyReport:
    if count < 1:
        raise UsageError("verify_instances needs count >= 1")
    rng = rng_for(seed, "quadratic")
    mu_grid = np.linspace(0.0, 1.0, mu_points)
    report = VerifyReport(bound_scale=float(bound_scale))
    for index in range(count):
        pair = random_pair(rng, int(rng.integers(dim_range[0], dim_range[1] + 1)),
                           curvature_range, equal_curvature)
        if pair.degenerate:
            continue
        verify_pair(pair, mu_grid, report, index)
    logger.info("quad-verify: %d checks, %d violations, min slack %.3g",
                report.checks, len(report.violations), report.min_slack)
    return report


def bound_curve(M_values, mu_grid) -> tuple[list, list]:
    """Rows of (mu_hat, rs_value, lmc_lower, bound per M) with D1 = D2 = 1 and unit peaks."""
    M_values = [float(m) for m in M_values]
    header = ["mu_hat", "rs_value", "lmc_lower", *(f"bound_M={m!r}" for m in M_values)]
    rows = []
    for mu in mu_grid:
        mu = float(mu)
        lam = mu  # lambda_bar when D1 = D2
        rs_value = (1.0 - mu) * (1.0 - lam * lam) + mu * (1.0 - (1.0 - lam) ** 2)
        lmc_lower = (1.0 - mu) * (1.0 - lam) + mu * lam
        rows.append([mu, rs_value, lmc_lower, *(rs_value + equal_delta_bound(mu, m, 1.0) for m in M_values)])
    return header, rows


# -- QuadraticEnv: the reward family as a noise-free environment --
@dataclass(frozen=True, eq=False)
class QuadraticEnv:
    rewards: tuple
    reward_ids: tuple = ("R0", "R1")

    kind: ClassVar[str] = "quadratic"
    deterministic: ClassVar[bool] = True

    def __post_init__(self):
        object.__setattr__(self, "rewards", tuple(self.rewards))
        object.__setattr__(self, "reward_ids", tuple(self.reward_ids))
        if len(self.rewards) != len(self.reward_ids):
            raise ArityError(f"{len(self.rewards)} rewards for ids {self.reward_ids}")
        if any(r.dim != self.rewards[0].dim for r in self.rewards):
            raise ShapeError("Rewards have different dimensions")

    @property
    def all_reward_ids(self) -> tuple:
        return self.reward_ids

    @property
    def pretrain_id(self) -> str:
        return self.reward_ids[0]

    @property
    def obs_dim(self) -> int:
        return self.rewards[0].dim

    def arch_for(self, **_) -> ArchSpec:
        # theta is the first obs_dim weights; the bias is carried but unused.
        return ArchSpec.gaussian(self.obs_dim, ())

    def check_arch(self, arch: ArchSpec) -> None:
        if arch != self.arch_for():
            raise ShapeError(f"QuadraticEnv needs {self.arch_for().describe()}, got {arch.describe()}")

    def weights_for(self, theta) -> WeightVector:
        theta = np.asarray(theta, dtype=np.float64).reshape(-1)
        return WeightVector(self.arch_for(), np.concatenate([theta, [0.0]]))

    def theta_of(self, weights: WeightVector) -> np.ndarray:
        self.check_arch(weights.arch)
        return weights.values[:self.obs_dim]

    def sample_context(self, rng):
        return None

    def rollout(self, policy, rng=None, greedy=False, context=None):
        theta = self.theta_of(policy)
        return Trajectory(terminal=True), RewardVector(self.reward_ids, [eval_quad(r, theta) for r in self.rewards])
