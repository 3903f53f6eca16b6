"""
trainer.py - REINFORCE with a self-critical baseline

One loop serves three callers: pretraining on the env's pretraining
reward, per-reward fine-tuning (the experts of a soup), and the
mu-weighted MORL runs the soup is compared against.

    for update in range(updates):
        for episode in batch:
            ctx      = env.sample_context(rng)
            traj, R  = env.rollout(theta, rng, context=ctx)      # sampled
            _, R_b   = env.rollout(theta, rng, greedy, ctx)      # baseline
            G - b    = mu . R  -  mu . R_b
        grad  = mean_batch (G - b) * sum_t grad log pi(a_t | obs_t)
        theta = theta + step(grad)                               # ascent

Key insight: "The greedy rollout is the critic you never have to train."
"""

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from tqdm import tqdm

from .envs import RewardVector
from .errors import ArityError, DivergenceError, UsageError
from .jobs import JobPool
from .policy import (ArchSpec, WeightVector, batch_logprob_gradient,
                     entropy_gradient, init_weights)
from .seeding import coeff_tag, derive_seed, rng_for
from .soup import SimplexPoint

logger = logging.getLogger(__name__)

BASELINES = ("self_critical", "batch_mean")
OPTIMIZERS = ("sgd", "adam")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-3
    episodes_per_update: int = 16
    updates: int = 300
    baseline: str = "self_critical"
    seed: int = 0
    entropy_bonus: float = 0.0
    optimizer: str = "sgd"
    adam_betas: tuple = (0.9, 0.999)
    adam_eps: float = 1e-8
    log_every: int = 50
    progress: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0.0:
            raise UsageError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.updates < 0:
            raise UsageError(f"updates must be >= 0, got {self.updates}")
        if self.episodes_per_update < 1:
            raise UsageError("episodes_per_update must be >= 1")
        if self.baseline not in BASELINES:
            raise UsageError(f"Unknown baseline: {self.baseline}")
        if self.optimizer not in OPTIMIZERS:
            raise UsageError(f"Unknown optimizer: {self.optimizer}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return replace(self, seed=int(seed))


# -- RewardWeighting: mu over the experiment's reward ids --
@dataclass(frozen=True)
class RewardWeighting:
    reward_ids: tuple
    coeffs: SimplexPoint

    def __post_init__(self):
        ids = tuple(str(r) for r in self.reward_ids)
        coeffs = self.coeffs if isinstance(self.coeffs, SimplexPoint) else SimplexPoint(tuple(self.coeffs))
        if len(ids) != len(coeffs):
            raise ArityError(f"{len(ids)} reward ids for {len(coeffs)} weights")
        object.__setattr__(self, "reward_ids", ids)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def vertex(cls, reward_ids, reward_id: str) -> "RewardWeighting":
        ids = tuple(reward_ids)
        return cls(ids, SimplexPoint.vertex(len(ids), ids.index(reward_id)))

    def scalarize(self, rewards: RewardVector) -> float:
        return float(sum(c * rewards[r] for r, c in zip(self.reward_ids, self.coeffs)))

    def vertex_id(self) -> str | None:
        index = self.coeffs.vertex_index()
        return None if index is None else self.reward_ids[index]

    def tag(self) -> str:
        return coeff_tag(self.coeffs)


def run_seed(base_seed: int, weighting: RewardWeighting) -> int:
    """Vertex weightings share the fine-tune seed of their reward."""
    rid = weighting.vertex_id()
    return derive_seed(base_seed, f"finetune/{rid}" if rid is not None else f"morl/{weighting.tag()}")


@dataclass(frozen=True, eq=False)
class HistoryRow:
    update: int
    scalarized_return: float
    rewards: RewardVector


@dataclass(eq=False)
class RunRecord:
    final_weights: WeightVector
    weighting: RewardWeighting
    config: TrainConfig
    history: list = field(default_factory=list)
    wall_clock: float = 0.0
    init_distance: float = 0.0
    label: str = ""

    def history_table(self) -> tuple[list, list]:
        ids = self.history[0].rewards.reward_ids if self.history else self.weighting.reward_ids
        header = ["update", "scalarized_return", *ids]
        rows = [[h.update, h.scalarized_return, *(h.rewards[r] for r in ids)] for h in self.history]
        return header, rows


def weight_distance(final: WeightVector, init: WeightVector) -> float:
    """||theta_final - theta_init|| / ||theta_init|| (absolute when the init is all zeros)."""
    diff = float(np.linalg.norm(final.values - init.values))
    norm = float(np.linalg.norm(init.values))
    return diff / norm if norm > 0.0 else diff


# -- Optimizers: both return the ascent step for a gradient --
class SGD:
    def __init__(self, config: TrainConfig, size: int):
        self.lr = config.learning_rate

    def step(self, grad: np.ndarray) -> np.ndarray:
        return self.lr * grad


class Adam:
    def __init__(self, config: TrainConfig, size: int):
        self.lr = config.learning_rate
        self.beta1, self.beta2 = config.adam_betas
        self.eps = config.adam_eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


OPTIMIZER_CLASSES = {"sgd": SGD, "adam": Adam}


@dataclass(frozen=True, eq=False)
class BatchStats:
    mean_return: float
    mean_rewards: RewardVector


def policy_gradient_estimate(weights: WeightVector, env, weighting: RewardWeighting,
                             config: TrainConfig, rng: np.random.Generator):
    """One batch: (gradient of the mean baselined return, batch statistics)."""
    batch = config.episodes_per_update
    trajectories, returns, baselines, vectors = [], [], [], []
    for _ in range(batch):
        context = env.sample_context(rng)
        traj, rewards = env.rollout(weights, rng, greedy=False, context=context)
        g = weighting.scalarize(rewards)
        if config.baseline == "self_critical":
            _, greedy_rewards = env.rollout(weights, rng, greedy=True, context=context)
            baselines.append(weighting.scalarize(greedy_rewards))
        trajectories.append(traj)
        returns.append(g)
        vectors.append(rewards)
    returns = np.array(returns)
    baseline = np.array(baselines) if config.baseline == "self_critical" else np.full(batch, returns.mean())
    advantages = (returns - baseline) / batch

    grad = np.zeros(weights.values.size)
    steps = [(s, advantages[k]) for k, traj in enumerate(trajectories) for s in traj.steps]
    if steps:
        obs = np.stack([s.obs for s, _ in steps])
        actions = [s.action for s, _ in steps]
        grad = batch_logprob_gradient(weights, obs, actions, np.array([a for _, a in steps]))
        if config.entropy_bonus:
            grad = grad + config.entropy_bonus * entropy_gradient(weights, obs) / batch
    return grad, BatchStats(float(returns.mean()), RewardVector.mean(vectors))


def train(init: WeightVector, env, weighting: RewardWeighting, config: TrainConfig,
          label: str = "") -> RunRecord:
    env.check_arch(init.arch)
    rng = np.random.default_rng(config.seed)
    optimizer = OPTIMIZER_CLASSES[config.optimizer](config, init.values.size)
    theta = init.values.copy()
    history = []
    label = label or weighting.tag()
    start = time.perf_counter()
    for update in tqdm(range(config.updates), desc=label, disable=not config.progress, leave=False):
        try:
            grad, stats = policy_gradient_estimate(init.with_values(theta), env, weighting, config, rng)
        except DivergenceError as e:
            raise DivergenceError(f"[{label}] {e}", update=update) from e
        if not np.all(np.isfinite(grad)):
            raise DivergenceError(f"[{label}] non-finite policy gradient", update=update)
        theta = theta + optimizer.step(grad)
        if not np.all(np.isfinite(theta)):
            raise DivergenceError(f"[{label}] non-finite weights", update=update)
        history.append(HistoryRow(update, stats.mean_return, stats.mean_rewards))
        if config.log_every and (update + 1) % config.log_every == 0:
            logger.info("[%s] update %d return=%.4f %s", label, update + 1, stats.mean_return,
                        stats.mean_rewards.as_dict())
    final = init.with_values(theta)
    record = RunRecord(final, weighting, config, history, time.perf_counter() - start,
                       weight_distance(final, init), label)
    logger.debug("[%s] done in %.2fs, weight distance %.4f", label, record.wall_clock, record.init_distance)
    return record


def pretrain_run(arch: ArchSpec, env, config: TrainConfig) -> RunRecord:
    init = init_weights(arch, rng_for(config.seed, "init"))
    weighting = RewardWeighting((env.pretrain_id,), (1.0,))
    return train(init, env, weighting, config.with_seed(derive_seed(config.seed, "pretrain")), "pretrain")


def pretrain(arch: ArchSpec, env, config: TrainConfig) -> WeightVector:
    return pretrain_run(arch, env, config).final_weights


def finetune_experts(init: WeightVector, env, config: TrainConfig, reward_ids=None,
                     jobs: int = 1) -> list:
    """One expert per reward, each from the shared init with its own derived seed."""
    ids = tuple(reward_ids or env.reward_ids)
    return morl_sweep(init, env, [RewardWeighting.vertex(ids, r) for r in ids], config, jobs)


def morl_sweep(init: WeightVector, env, mu_grid: list, config: TrainConfig, jobs: int = 1) -> list:
    if not mu_grid:
        raise UsageError("morl_sweep needs a nonempty mu grid")

    def one(weighting):
        label = weighting.vertex_id() or f"mu=({weighting.tag()})"
        return train(init, env, weighting, config.with_seed(run_seed(config.seed, weighting)), label)

    pool = JobPool(jobs)
    records = pool.map(one, mu_grid, labels=[w.tag() for w in mu_grid])
    for note in pool.drain_notifications():
        logger.debug("run %s %s", note["label"], note["status"])
    return records
