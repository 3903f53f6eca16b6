"""
envs.py - Multi-reward environments

Each environment is an immutable description; a rollout owns its own state
and rng, so any number of rollouts may run at once. A rollout returns the
trajectory (for REINFORCE) and one RewardVector holding every reward the
environment knows about. The experiment's reward set is `env.reward_ids`;
`all_reward_ids` adds the pretraining reward.

    PointMassEnv   risky R0 = sum v  vs  cautious R1 = sum v - sum a^2
                   (any alpha list; pretraining uses alpha = 0.1)
    TokenSeqEnv    precision vs recall of a generated token multiset
                   (pretraining uses their harmonic mean)
    BanditEnv      one-step sanity task for the trainer

    policy --obs--> distribution --action--> dynamics --> reward terms
       ^                                         |
       +-------------- next obs -----------------+
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import ClassVar, Protocol

import numpy as np

from .errors import ArityError, DivergenceError, ShapeError, UsageError
from .policy import ArchSpec, greedy_action, log_prob, sample_and_logprob
from .seeding import episode_rng, rng_for


# -- RewardVector: {R_i(theta)} for one evaluated policy --
@dataclass(frozen=True, eq=False)
class RewardVector:
    reward_ids: tuple
    values: np.ndarray

    def __post_init__(self):
        ids = tuple(str(r) for r in self.reward_ids)
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if len(ids) != values.size:
            raise ArityError(f"{len(ids)} reward ids for {values.size} values")
        if len(set(ids)) != len(ids):
            raise ArityError(f"Duplicate reward ids: {ids}")
        if not np.all(np.isfinite(values)):
            raise DivergenceError(f"Non-finite reward values: {dict(zip(ids, values))}")
        values.setflags(write=False)
        object.__setattr__(self, "reward_ids", ids)
        object.__setattr__(self, "values", values)

    def __getitem__(self, reward_id: str) -> float:
        return float(self.values[self.reward_ids.index(reward_id)])

    def __len__(self) -> int:
        return len(self.reward_ids)

    def select(self, reward_ids) -> "RewardVector":
        missing = [r for r in reward_ids if r not in self.reward_ids]
        if missing:
            raise ArityError(f"Reward ids {missing} not in {self.reward_ids}")
        return RewardVector(tuple(reward_ids), [self[r] for r in reward_ids])

    def as_dict(self) -> dict:
        return {r: float(v) for r, v in zip(self.reward_ids, self.values)}

    @classmethod
    def mean(cls, vectors: list) -> "RewardVector":
        ids = vectors[0].reward_ids
        if any(v.reward_ids != ids for v in vectors):
            raise ArityError("Cannot average reward vectors over different reward ids")
        return cls(ids, np.mean(np.stack([v.values for v in vectors]), axis=0))


@dataclass(frozen=True, eq=False)
class Step:
    obs: np.ndarray
    action: object
    logprob: float


@dataclass(eq=False)
class Trajectory:
    steps: list = field(default_factory=list)
    terminal: bool = False

    def __len__(self) -> int:
        return len(self.steps)

    def observations(self) -> np.ndarray:
        return np.stack([s.obs for s in self.steps])

    def actions(self) -> list:
        return [s.action for s in self.steps]


class Env(Protocol):
    kind: str
    reward_ids: tuple
    all_reward_ids: tuple
    pretrain_id: str
    obs_dim: int

    def check_arch(self, arch: ArchSpec) -> None: ...
    def sample_context(self, rng: np.random.Generator): ...
    def rollout(self, policy, rng: np.random.Generator, greedy: bool = False, context=None): ...


def _act(policy, obs: np.ndarray, rng: np.random.Generator, greedy: bool):
    dist = policy.distribution(obs)
    if greedy:
        action = greedy_action(dist)
        return action, log_prob(dist, action)
    return sample_and_logprob(dist, rng)


# -- PointMass: 1-D velocity control with an action-energy penalty --
@dataclass(frozen=True)
class PointMassEnv:
    horizon: int = 50
    dt: float = 0.1
    friction: float = 0.05
    action_clip: float = 1.0
    alphas: tuple = (("R0", 0.0), ("R1", 1.0))
    pretrain_alpha: float = 0.1
    obs_scale: tuple = (10.0, 2.0)
    init_velocity: float = 0.0

    kind: ClassVar[str] = "pointmass"
    pretrain_id: ClassVar[str] = "pretrain"
    obs_dim: ClassVar[int] = 2
    deterministic: ClassVar[bool] = False

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple((str(r), float(a)) for r, a in self.alphas))
        if self.horizon < 1:
            raise UsageError("horizon must be >= 1")
        if not 0.0 <= self.friction < 1.0:
            raise UsageError("friction must lie in [0, 1)")
        if self.pretrain_id in dict(self.alphas):
            raise UsageError(f"'{self.pretrain_id}' is reserved for the pretraining reward")

    @property
    def reward_ids(self) -> tuple:
        return tuple(r for r, _ in self.alphas)

    @property
    def all_reward_ids(self) -> tuple:
        return self.reward_ids + (self.pretrain_id,)

    def arch_for(self, hidden_sizes=(32, 32), activation="tanh",
                 log_std_mode="fixed", log_std_value=0.0) -> ArchSpec:
        return ArchSpec.gaussian(self.obs_dim, hidden_sizes, action_dim=1, log_std_mode=log_std_mode,
                                 log_std_value=log_std_value, activation=activation)

    def check_arch(self, arch: ArchSpec) -> None:
        if arch.obs_dim != 2 or arch.head != "gaussian" or arch.action_dim != 1:
            raise ShapeError(f"PointMass needs obs_dim=2 and a 1-D gaussian head, got {arch.describe()}")

    def observe(self, position: float, velocity: float) -> np.ndarray:
        return np.array([position / self.obs_scale[0], velocity / self.obs_scale[1]])

    def sample_context(self, rng: np.random.Generator):
        return None

    def probe_observations(self, rng: np.random.Generator, n: int) -> list:
        return [self.observe(rng.uniform(-self.obs_scale[0], self.obs_scale[0]),
                             rng.uniform(-self.obs_scale[1], self.obs_scale[1])) for _ in range(n)]

    def rollout(self, policy, rng, greedy=False, context=None):
        return pointmass_rollout(policy, self, rng, greedy)


def pointmass_rollout(policy, env: PointMassEnv, rng: np.random.Generator, greedy: bool = False):
    x, v = 0.0, float(env.init_velocity)
    velocity_sum, effort = 0.0, 0.0
    traj = Trajectory()
    for _ in range(env.horizon):
        obs = env.observe(x, v)
        action, logprob = _act(policy, obs, rng, greedy)
        action = np.asarray(action, dtype=np.float64)
        if not np.all(np.isfinite(action)):
            raise DivergenceError(f"Non-finite action {action} at step {len(traj)}")
        u = float(np.clip(action[0], -env.action_clip, env.action_clip))
        v = v + env.dt * u - env.friction * v
        x = x + env.dt * v
        velocity_sum += v
        effort += u * u
        traj.steps.append(Step(obs, action, logprob))
    values = [velocity_sum - alpha * effort for _, alpha in env.alphas]
    values.append(velocity_sum - env.pretrain_alpha * effort)
    return traj, RewardVector(env.all_reward_ids, values)


# -- TokenSeq: precision-focused vs recall-focused generation --
def precision_recall(generated, reference) -> tuple[float, float]:
    overlap = sum((Counter(generated) & Counter(reference)).values())
    precision = overlap / len(generated) if generated else 0.0
    recall = overlap / len(reference) if reference else 0.0
    return precision, recall


def harmonic_mean(a: float, b: float) -> float:
    return 2.0 * a * b / (a + b) if a + b > 0.0 else 0.0


@dataclass(frozen=True)
class TokenSeqEnv:
    references: tuple
    vocab_size: int = 20
    max_length: int = 10

    kind: ClassVar[str] = "tokenseq"
    reward_ids: ClassVar[tuple] = ("precision", "recall")
    pretrain_id: ClassVar[str] = "f1"
    deterministic: ClassVar[bool] = False

    def __post_init__(self):
        refs = tuple(tuple(int(t) for t in ref) for ref in self.references)
        if not refs:
            raise UsageError("TokenSeq needs at least one prompt")
        for ref in refs:
            if not ref or any(not 0 <= t < self.vocab_size for t in ref):
                raise UsageError(f"Reference {ref} must be nonempty tokens in [0, {self.vocab_size})")
        object.__setattr__(self, "references", refs)

    @classmethod
    def from_seed(cls, seed: int, vocab_size: int = 20, n_prompts: int = 8,
                  reference_size: int = 6, max_length: int = 10) -> "TokenSeqEnv":
        # References are drawn once per experiment and then frozen.
        rng = rng_for(seed, "references")
        refs = rng.integers(0, vocab_size, size=(n_prompts, reference_size))
        return cls(references=tuple(map(tuple, refs.tolist())), vocab_size=vocab_size,
                   max_length=max_length)

    @property
    def n_prompts(self) -> int:
        return len(self.references)

    @property
    def stop_token(self) -> int:
        return self.vocab_size

    @property
    def obs_dim(self) -> int:
        return self.n_prompts + self.max_length

    @property
    def all_reward_ids(self) -> tuple:
        return self.reward_ids + (self.pretrain_id,)

    def arch_for(self, hidden_sizes=(32, 32), activation="tanh", **_head) -> ArchSpec:
        return ArchSpec.categorical(self.obs_dim, self.vocab_size + 1, hidden_sizes, activation)

    def check_arch(self, arch: ArchSpec) -> None:
        if arch.head != "categorical" or arch.vocab_size != self.vocab_size + 1 or arch.obs_dim != self.obs_dim:
            raise ShapeError(
                f"TokenSeq needs obs_dim={self.obs_dim} and a categorical head over "
                f"{self.vocab_size + 1} tokens, got {arch.describe()}")

    def observe(self, prompt: int, position: int) -> np.ndarray:
        obs = np.zeros(self.obs_dim)
        obs[prompt] = 1.0
        obs[self.n_prompts + position] = 1.0
        return obs

    def sample_context(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.n_prompts))

    def probe_observations(self, rng: np.random.Generator, n: int) -> list:
        return [self.observe(int(rng.integers(self.n_prompts)), int(rng.integers(self.max_length)))
                for _ in range(n)]

    def rollout(self, policy, rng, greedy=False, context=None):
        return tokenseq_rollout(policy, self, rng, greedy, context)


def tokenseq_rollout(policy, env: TokenSeqEnv, rng: np.random.Generator,
                     greedy: bool = False, context: int | None = None):
    prompt = env.sample_context(rng) if context is None else int(context)
    generated, traj = [], Trajectory()
    for position in range(env.max_length):
        obs = env.observe(prompt, position)
        token, logprob = _act(policy, obs, rng, greedy)
        if not np.isfinite(logprob):
            raise DivergenceError(f"Non-finite log-probability at position {position}")
        traj.steps.append(Step(obs, token, logprob))
        if token == env.stop_token:
            traj.terminal = True
            break
        generated.append(token)
    precision, recall = precision_recall(generated, env.references[prompt])
    return traj, RewardVector(env.all_reward_ids, [precision, recall, harmonic_mean(precision, recall)])


# -- Bandit: k arms, one step, constant observation --
@dataclass(frozen=True)
class BanditEnv:
    arm_rewards: tuple = (0.0, 1.0)

    kind: ClassVar[str] = "bandit"
    reward_ids: ClassVar[tuple] = ("reward",)
    all_reward_ids: ClassVar[tuple] = ("reward",)
    pretrain_id: ClassVar[str] = "reward"
    obs_dim: ClassVar[int] = 1
    deterministic: ClassVar[bool] = False

    def arch_for(self, hidden_sizes=(), activation="tanh", **_head) -> ArchSpec:
        return ArchSpec.categorical(1, len(self.arm_rewards), hidden_sizes, activation)

    def check_arch(self, arch: ArchSpec) -> None:
        if arch.head != "categorical" or arch.vocab_size != len(self.arm_rewards) or arch.obs_dim != 1:
            raise ShapeError(f"Bandit needs obs_dim=1 and {len(self.arm_rewards)} logits")

    def sample_context(self, rng):
        return None

    def rollout(self, policy, rng, greedy=False, context=None):
        obs = np.ones(1)
        arm, logprob = _act(policy, obs, rng, greedy)
        traj = Trajectory([Step(obs, arm, logprob)], terminal=True)
        return traj, RewardVector(self.reward_ids, [self.arm_rewards[arm]])


def evaluate(policy, env, n_episodes: int, seed: int, greedy: bool = False) -> RewardVector:
    """Mean RewardVector over n_episodes; episode k always uses episode_rng(seed, k)."""
    if n_episodes < 1:
        raise UsageError("n_episodes must be >= 1")
    if env.deterministic:
        n_episodes = 1
    vectors = [env.rollout(policy, episode_rng(seed, k), greedy)[1] for k in range(n_episodes)]
    return RewardVector.mean(vectors)
