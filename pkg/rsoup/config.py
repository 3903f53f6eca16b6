"""
config.py - Experiment configuration

One YAML file describes a whole experiment. pydantic validates it; a
failure names the field path and, where the YAML has one, the line.

    configs/pointmass.yaml --yaml--> dict --pydantic--> ExperimentConfig
                                                             |
          .env / environment: RSOUP_OUT, RSOUP_JOBS,         |
          RSOUP_LOG_LEVEL  (flag > env var > file > default) |
                                                             v
                                         envs, ArchSpec, TrainConfig, grids

config_hash() fingerprints everything that changes results (not the
output directory, not the job count) and is embedded in every report.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import (BaseModel, ConfigDict, Field, NonNegativeFloat,
                      NonNegativeInt, PositiveFloat, PositiveInt,
                      ValidationError, model_validator)

from .envs import PointMassEnv, TokenSeqEnv
from .errors import ConfigError, UsageError
from .policy import ArchSpec
from .trainer import TrainConfig

ENV_OUT = "RSOUP_OUT"
ENV_JOBS = "RSOUP_JOBS"
ENV_LOG_LEVEL = "RSOUP_LOG_LEVEL"
HASH_EXCLUDE = {"output_dir", "jobs"}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ArchConfig(_Strict):
    hidden_sizes: list[PositiveInt] = Field(default_factory=lambda: [32, 32])
    activation: Literal["tanh", "relu", "identity"] = "tanh"
    log_std_mode: Literal["fixed", "learned"] = "fixed"
    log_std_value: float = 0.0


class PointMassConfig(_Strict):
    kind: Literal["pointmass"]
    horizon: PositiveInt = 50
    dt: PositiveFloat = 0.1
    friction: float = Field(0.05, ge=0.0, lt=1.0)
    action_clip: PositiveFloat = 1.0
    alphas: dict[str, NonNegativeFloat] = Field(default_factory=lambda: {"R0": 0.0, "R1": 1.0},
                                                description="Reward id -> action-energy penalty.")
    pretrain_alpha: NonNegativeFloat = 0.1

    @model_validator(mode="after")
    def check_alphas(self) -> "PointMassConfig":
        if not self.alphas:
            raise ValueError("alphas must name at least one reward")
        if PointMassEnv.pretrain_id in self.alphas:
            raise ValueError(f"'{PointMassEnv.pretrain_id}' is reserved for the pretraining reward")
        return self

    def build(self, seed: int) -> PointMassEnv:
        return PointMassEnv(horizon=self.horizon, dt=self.dt, friction=self.friction,
                            action_clip=self.action_clip, alphas=tuple(self.alphas.items()),
                            pretrain_alpha=self.pretrain_alpha)


class TokenSeqConfig(_Strict):
    kind: Literal["tokenseq"]
    vocab_size: PositiveInt = 20
    n_prompts: PositiveInt = 8
    reference_size: PositiveInt = 6
    max_length: PositiveInt = 10

    def build(self, seed: int) -> TokenSeqEnv:
        return TokenSeqEnv.from_seed(seed, self.vocab_size, self.n_prompts, self.reference_size, self.max_length)


class TrainConfigModel(_Strict):
    learning_rate: PositiveFloat = 3e-3
    episodes_per_update: PositiveInt = 16
    updates: NonNegativeInt = 300
    baseline: Literal["self_critical", "batch_mean"] = "self_critical"
    entropy_bonus: NonNegativeFloat = 0.0
    optimizer: Literal["sgd", "adam"] = "sgd"
    log_every: NonNegativeInt = 50

    def build(self, seed: int, progress: bool = False) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, episodes_per_update=self.episodes_per_update,
                           updates=self.updates, baseline=self.baseline, seed=seed,
                           entropy_bonus=self.entropy_bonus, optimizer=self.optimizer,
                           log_every=self.log_every, progress=progress)


class GridConfig(_Strict):
    lambda_points: int = Field(11, ge=2, description="Pair sweep size, 0..1 inclusive.")
    simplex_samples: NonNegativeInt = Field(50, description="Extra uniform lambdas when N > 2.")
    mu_points: int = Field(11, ge=2, description="MORL grid size per reward pair.")
    selection_points: int = Field(5, ge=2, description="mu_hat grid for the selection report.")
    lmc_points: int = Field(11, ge=3)
    init_interp_points: int = Field(11, ge=2)
    extrapolate: Optional[tuple[float, float]] = None
    extrapolate_points: int = Field(5, ge=2)

    @model_validator(mode="after")
    def check_extrapolate(self) -> "GridConfig":
        if self.extrapolate is not None and self.extrapolate[0] >= self.extrapolate[1]:
            raise ValueError("extrapolate must be [lo, hi] with lo < hi")
        return self


class EvalConfig(_Strict):
    episodes: PositiveInt = 200
    validation_episodes: PositiveInt = 100


class ControlConfig(_Strict):
    seeds: PositiveInt = Field(5, description="Paired seeds for the from-scratch control.")
    probes: PositiveInt = Field(16, description="Probe observations for the ensembling audit.")
    scales: list[PositiveFloat] = Field(default_factory=lambda: [1e-3, 3e-3, 1e-2, 3e-2, 1e-1])
    lam: float = Field(0.5, ge=0.0, le=1.0)


def _default_pretrain() -> TrainConfigModel:
    return TrainConfigModel(updates=1000)


class ExperimentConfig(_Strict):
    """Complete configuration of one rewarded-soup experiment."""
    seed: NonNegativeInt
    env: Annotated[Union[PointMassConfig, TokenSeqConfig], Field(discriminator="kind")]
    arch: ArchConfig = Field(default_factory=ArchConfig)
    pretrain: TrainConfigModel = Field(default_factory=_default_pretrain)
    finetune: TrainConfigModel = Field(default_factory=TrainConfigModel)
    rewards: Optional[list[str]] = Field(None, description="Reward set; defaults to every env reward.")
    grids: GridConfig = Field(default_factory=GridConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    control: ControlConfig = Field(default_factory=ControlConfig)
    output_dir: Path = Path("runs")
    jobs: PositiveInt = 1

    @model_validator(mode="after")
    def check_rewards(self) -> "ExperimentConfig":
        if self.rewards is not None:
            if len(set(self.rewards)) != len(self.rewards):
                raise ValueError(f"reward ids must be unique: {self.rewards}")
            known = self.env_reward_ids()
            unknown = [r for r in self.rewards if r not in known]
            if unknown:
                raise ValueError(f"unknown reward ids {unknown}; env provides {list(known)}")
        return self

    def env_reward_ids(self) -> tuple:
        if isinstance(self.env, PointMassConfig):
            return tuple(self.env.alphas)
        return TokenSeqEnv.reward_ids

    def reward_ids(self) -> tuple:
        return tuple(self.rewards) if self.rewards else self.env_reward_ids()

    def build_env(self):
        return self.env.build(self.seed)

    def build_arch(self, env) -> ArchSpec:
        return env.arch_for(hidden_sizes=tuple(self.arch.hidden_sizes), activation=self.arch.activation,
                            log_std_mode=self.arch.log_std_mode, log_std_value=self.arch.log_std_value)

    @classmethod
    def load_from_yaml(cls, path) -> "ExperimentConfig":
        return load_config(path)


# === SECTION: loading ===

def _yaml_line(node, loc) -> Optional[int]:
    """1-based line of the deepest YAML node reached along a pydantic error location."""
    line = None
    for part in loc:
        if isinstance(node, yaml.MappingNode):
            hit = next(((k, v) for k, v in node.value if k.value == str(part)), None)
            if hit is None:
                continue
            line, node = hit[0].start_mark.line + 1, hit[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
            line = node.start_mark.line + 1
    return line


def _field_path(raw, loc) -> str:
    parts, node = [], raw
    for part in loc:
        if isinstance(node, dict):
            if part in node:
                parts.append(str(part))
                node = node[part]
            elif node.get("kind") == part:
                continue  # discriminator tag, not a key
            else:
                parts.append(str(part))
                node = None
        elif isinstance(node, list) and isinstance(part, int) and part < len(node):
            parts.append(str(part))
            node = node[part]
        else:
            parts.append(str(part))
    return ".".join(parts)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"Config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"{path}: invalid YAML: {getattr(e, 'problem', e)}", line=line) from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        err = e.errors()[0]
        loc = tuple(err["loc"])
        field = _field_path(raw, loc) or "<root>"
        raise ConfigError(f"{path}: {field}: {err['msg']}", field=field,
                          line=_yaml_line(yaml.compose(text), loc)) from e


def config_hash(config: ExperimentConfig) -> str:
    payload = config.model_dump(mode="json", exclude=HASH_EXCLUDE)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def resolve(flag, env_var: str, config_value, cast=str):
    """flag > environment variable > config file value."""
    if flag is not None:
        return cast(flag)
    raw = os.getenv(env_var)
    if raw not in (None, ""):
        try:
            return cast(raw)
        except ValueError as e:
            raise ConfigError(f"{env_var}={raw!r}: {e}", field=env_var) from e
    return config_value
