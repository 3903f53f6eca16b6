"""
policy.py - Policy core

A policy is a fixed architecture plus one flat float64 vector. Everything
downstream (interpolation, checkpoints, gradient steps) is vector arithmetic
on that flat vector; only this module knows how it is carved into layers.

    values = [ W0 (h0 x obs) | b0 | W1 (h1 x h0) | b1 | ... | W_out | b_out | log_std? ]

    obs --> [affine -> act] x len(hidden) --> affine --> head
                                                          |
                            gaussian: mean (+ learned or fixed log-std)
                            categorical: logits over the vocabulary

Gradients of log pi(a|obs) are exact reverse-mode passes written by hand;
the head supplies the output cotangent, the layers pass it back.

Key insight: "If weights are one vector, a soup is one line of numpy."
"""

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, softmax

from .errors import (CheckpointArchError, CheckpointFormatError,
                     CheckpointTruncatedError, DivergenceError, ShapeError)

HEADS = ("gaussian", "categorical")
ACTIVATIONS = ("tanh", "relu", "identity")
LOG_STD_MODES = ("fixed", "learned")
LOG_2PI = float(np.log(2.0 * np.pi))

CHECKPOINT_MAGIC = b"RSOUPCK1"


# -- ArchSpec: the fixed architecture f shared by every interpolated policy --
@dataclass(frozen=True)
class ArchSpec:
    obs_dim: int
    hidden_sizes: tuple[int, ...] = ()
    head: str = "gaussian"
    action_dim: int = 1
    vocab_size: int = 0
    log_std_mode: str = "fixed"
    log_std_value: float = 0.0
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.obs_dim < 1 or any(h < 1 for h in self.hidden_sizes):
            raise ShapeError(f"Layer sizes must be positive: obs_dim={self.obs_dim}, hidden={self.hidden_sizes}")
        if self.head not in HEADS:
            raise ShapeError(f"Unknown head: {self.head}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"Unknown activation: {self.activation}")
        if self.head == "gaussian":
            if self.action_dim < 1:
                raise ShapeError("Gaussian head needs action_dim >= 1")
            if self.log_std_mode not in LOG_STD_MODES:
                raise ShapeError(f"Unknown log-std mode: {self.log_std_mode}")
            if not np.isfinite(self.log_std_value):
                raise ShapeError("log_std_value must be finite")
            object.__setattr__(self, "vocab_size", 0)
        else:
            if self.vocab_size < 2:
                raise ShapeError("Categorical head needs vocab_size >= 2")
            # Gaussian-only fields are pinned so equality stays field-for-field.
            object.__setattr__(self, "action_dim", 0)
            object.__setattr__(self, "log_std_mode", "fixed")
            object.__setattr__(self, "log_std_value", 0.0)
        object.__setattr__(self, "log_std_value", float(self.log_std_value))

    @classmethod
    def gaussian(cls, obs_dim: int, hidden_sizes=(), action_dim: int = 1,
                 log_std_mode: str = "fixed", log_std_value: float = 0.0,
                 activation: str = "tanh") -> "ArchSpec":
        return cls(obs_dim=obs_dim, hidden_sizes=tuple(hidden_sizes), head="gaussian",
                   action_dim=action_dim, log_std_mode=log_std_mode,
                   log_std_value=log_std_value, activation=activation)

    @classmethod
    def categorical(cls, obs_dim: int, vocab_size: int, hidden_sizes=(),
                    activation: str = "tanh") -> "ArchSpec":
        return cls(obs_dim=obs_dim, hidden_sizes=tuple(hidden_sizes), head="categorical",
                   vocab_size=vocab_size, activation=activation)

    @property
    def out_dim(self) -> int:
        return self.action_dim if self.head == "gaussian" else self.vocab_size

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.obs_dim, *self.hidden_sizes, self.out_dim)

    @property
    def learned_log_std(self) -> bool:
        return self.head == "gaussian" and self.log_std_mode == "learned"

    def describe(self) -> str:
        """Canonical key=value text, the checkpoint header."""
        fields = [
            ("obs_dim", str(self.obs_dim)),
            ("hidden_sizes", ",".join(str(h) for h in self.hidden_sizes)),
            ("head", self.head),
            ("action_dim", str(self.action_dim)),
            ("vocab_size", str(self.vocab_size)),
            ("log_std_mode", self.log_std_mode),
            ("log_std_value", repr(self.log_std_value)),
            ("activation", self.activation),
        ]
        return ";".join(f"{k}={v}" for k, v in fields)

    @classmethod
    def parse(cls, text: str) -> "ArchSpec":
        try:
            fields = dict(item.split("=", 1) for item in text.split(";"))
            hidden = fields["hidden_sizes"]
            return cls(
                obs_dim=int(fields["obs_dim"]),
                hidden_sizes=tuple(int(h) for h in hidden.split(",")) if hidden else (),
                head=fields["head"],
                action_dim=int(fields["action_dim"]),
                vocab_size=int(fields["vocab_size"]),
                log_std_mode=fields["log_std_mode"],
                log_std_value=float(fields["log_std_value"]),
                activation=fields["activation"],
            )
        except (KeyError, ValueError) as e:
            raise CheckpointFormatError(f"Unparsable architecture header: {text!r} ({e})") from e


def param_count(arch: ArchSpec) -> int:
    sizes = arch.layer_sizes
    total = sum((n_in + 1) * n_out for n_in, n_out in zip(sizes[:-1], sizes[1:]))
    return total + (arch.action_dim if arch.learned_log_std else 0)


@lru_cache(maxsize=None)
def _layout(arch: ArchSpec) -> tuple:
    """Per layer (W slice, W shape, b slice), then the log-std slice."""
    sizes = arch.layer_sizes
    offset, layers = 0, []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = slice(offset, offset + n_in * n_out)
        offset += n_in * n_out
        b = slice(offset, offset + n_out)
        offset += n_out
        layers.append((w, (n_out, n_in), b))
    log_std = slice(offset, offset + (arch.action_dim if arch.learned_log_std else 0))
    return tuple(layers), log_std


# -- WeightVector: theta --
@dataclass(frozen=True, eq=False)
class WeightVector:
    arch: ArchSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size != param_count(self.arch):
            raise ShapeError(
                f"Weight vector has shape {values.shape}, arch needs ({param_count(self.arch)},)")
        if not np.all(np.isfinite(values)):
            raise DivergenceError("Weight vector contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    def with_values(self, values) -> "WeightVector":
        return WeightVector(self.arch, values)

    def distribution(self, obs) -> "ActionDistribution":
        return forward(self, obs)


# Carrier for d log pi / d theta; same length as the paired WeightVector.values.
GradientVector = np.ndarray


def zero_weights(arch: ArchSpec) -> WeightVector:
    return WeightVector(arch, np.zeros(param_count(arch)))


def init_weights(arch: ArchSpec, rng: np.random.Generator) -> WeightVector:
    """Per-layer uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    values = np.empty(param_count(arch))
    layers, log_std = _layout(arch)
    for w, (n_out, n_in), b in layers:
        bound = 1.0 / np.sqrt(n_in)
        values[w] = rng.uniform(-bound, bound, size=n_out * n_in)
        values[b] = rng.uniform(-bound, bound, size=n_out)
    values[log_std] = arch.log_std_value
    return WeightVector(arch, values)


# -- Action distributions --
@dataclass(frozen=True, eq=False)
class GaussianDist:
    mean: np.ndarray
    log_std: np.ndarray

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def params(self) -> np.ndarray:
        return np.concatenate([self.mean, self.log_std])


@dataclass(frozen=True, eq=False)
class CategoricalDist:
    logits: np.ndarray

    @property
    def probs(self) -> np.ndarray:
        return softmax(self.logits)

    def params(self) -> np.ndarray:
        return self.logits


ActionDistribution = GaussianDist | CategoricalDist


def mix_distributions(dists: list, coeffs) -> ActionDistribution:
    """Coefficient-weighted average of distribution parameters (prediction ensembling)."""
    coeffs = [float(c) for c in coeffs]
    if isinstance(dists[0], GaussianDist):
        mean = sum(c * d.mean for c, d in zip(coeffs, dists))
        log_std = sum(c * d.log_std for c, d in zip(coeffs, dists))
        return GaussianDist(np.asarray(mean, dtype=np.float64), np.asarray(log_std, dtype=np.float64))
    logits = sum(c * d.logits for c, d in zip(coeffs, dists))
    return CategoricalDist(np.asarray(logits, dtype=np.float64))


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z


def _activate_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


def _forward_batch(weights: WeightVector, obs: np.ndarray):
    """Rows of obs through the trunk. Returns (outputs, cache of (input, preact) per layer)."""
    arch, values = weights.arch, weights.values
    layers, _ = _layout(arch)
    x, cache = obs, []
    for i, (w, shape, b) in enumerate(layers):
        z = x @ values[w].reshape(shape).T + values[b]
        cache.append((x, z))
        x = z if i == len(layers) - 1 else _activate(arch.activation, z)
    return x, cache


def _check_obs(arch: ArchSpec, obs, batch: bool = False) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    expected = 2 if batch else 1
    if obs.ndim != expected or obs.shape[-1] != arch.obs_dim:
        raise ShapeError(f"Observation shape {obs.shape} does not match obs_dim={arch.obs_dim}")
    return obs


def _head(weights: WeightVector, out: np.ndarray) -> ActionDistribution:
    arch = weights.arch
    if arch.head == "categorical":
        return CategoricalDist(out.copy())
    _, log_std = _layout(arch)
    if arch.learned_log_std:
        ls = weights.values[log_std].copy()
    else:
        ls = np.full(arch.action_dim, arch.log_std_value)
    return GaussianDist(out.copy(), ls)


def forward(weights: WeightVector, obs) -> ActionDistribution:
    obs = _check_obs(weights.arch, obs)
    out, _ = _forward_batch(weights, obs[None, :])
    return _head(weights, out[0])


def log_prob(dist: ActionDistribution, action) -> float:
    if isinstance(dist, CategoricalDist):
        return float(log_softmax(dist.logits)[int(action)])
    z = (np.asarray(action, dtype=np.float64) - dist.mean) / dist.std
    return float(np.sum(-0.5 * z * z - dist.log_std - 0.5 * LOG_2PI))


def sample_and_logprob(dist: ActionDistribution, rng: np.random.Generator):
    if isinstance(dist, CategoricalDist):
        action = int(rng.choice(dist.logits.size, p=dist.probs))
    else:
        action = dist.mean + dist.std * rng.standard_normal(dist.mean.size)
    return action, log_prob(dist, action)


def greedy_action(dist: ActionDistribution):
    if isinstance(dist, CategoricalDist):
        return int(np.argmax(dist.logits))
    return dist.mean.copy()


def entropy(dist: ActionDistribution) -> float:
    if isinstance(dist, CategoricalDist):
        logp = log_softmax(dist.logits)
        return float(-np.sum(np.exp(logp) * logp))
    return float(np.sum(dist.log_std + 0.5 * (LOG_2PI + 1.0)))


# -- Reverse mode: output cotangent -> flat gradient --
def _backprop(weights: WeightVector, cache: list, d_out: np.ndarray) -> np.ndarray:
    arch, values = weights.arch, weights.values
    layers, _ = _layout(arch)
    grad = np.zeros(values.size)
    delta = d_out
    for i in range(len(layers) - 1, -1, -1):
        w, shape, b = layers[i]
        x, _ = cache[i]
        grad[w] = (delta.T @ x).ravel()
        grad[b] = delta.sum(axis=0)
        if i > 0:
            z_prev = cache[i - 1][1]
            delta = (delta @ values[w].reshape(shape)) * _activate_grad(arch.activation, z_prev, x)
    return grad


def batch_logprob_gradient(weights: WeightVector, obs, actions, coeffs=None) -> GradientVector:
    """sum_k coeffs[k] * grad log pi(actions[k] | obs[k]), one backward pass for the batch."""
    arch = weights.arch
    obs = _check_obs(arch, obs, batch=True)
    n = obs.shape[0]
    coeffs = np.ones(n) if coeffs is None else np.asarray(coeffs, dtype=np.float64)
    out, cache = _forward_batch(weights, obs)
    if arch.head == "categorical":
        logp = log_softmax(out, axis=1)
        d_out = -np.exp(logp)
        d_out[np.arange(n), np.asarray(actions, dtype=np.int64)] += 1.0
        return _backprop(weights, cache, d_out * coeffs[:, None])

    actions = np.asarray(actions, dtype=np.float64).reshape(n, arch.action_dim)
    dist = _head(weights, out[0])
    var = np.exp(2.0 * dist.log_std)
    resid = actions - out
    grad = _backprop(weights, cache, resid / var * coeffs[:, None])
    if arch.learned_log_std:
        _, log_std = _layout(arch)
        grad[log_std] = coeffs @ (resid * resid / var - 1.0)
    return grad


def logprob_gradient(weights: WeightVector, obs, action) -> GradientVector:
    obs = _check_obs(weights.arch, obs)
    return batch_logprob_gradient(weights, obs[None, :], [action])


def entropy_gradient(weights: WeightVector, obs) -> GradientVector:
    """Gradient of the summed entropy over a batch of observations."""
    arch = weights.arch
    obs = _check_obs(arch, obs, batch=True)
    if arch.head == "gaussian":
        grad = np.zeros(param_count(arch))
        if arch.learned_log_std:
            _, log_std = _layout(arch)
            grad[log_std] = float(obs.shape[0])
        return grad
    out, cache = _forward_batch(weights, obs)
    logp = log_softmax(out, axis=1)
    p = np.exp(logp)
    h = -np.sum(p * logp, axis=1, keepdims=True)
    return _backprop(weights, cache, -p * (logp + h))


# -- Ensemble of predictions (acts from mixed distribution parameters) --
@dataclass(frozen=True, eq=False)
class EnsemblePolicy:
    members: tuple
    coeffs: tuple

    @property
    def arch(self) -> ArchSpec:
        return self.members[0].arch

    def distribution(self, obs) -> ActionDistribution:
        return mix_distributions([forward(m, obs) for m in self.members], self.coeffs)


# -- Checkpoints: magic | u64 header len | header | f64 payload | u64 payload bytes --
def save_checkpoint(weights: WeightVector, path) -> Path:
    path = Path(path)
    header = weights.arch.describe().encode("utf-8")
    payload = weights.values.astype("<f8").tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(CHECKPOINT_MAGIC + struct.pack("<Q", len(header)) + header
                     + payload + struct.pack("<Q", len(payload)))
    return path


def load_checkpoint(path, arch: ArchSpec | None = None) -> WeightVector:
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:8] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: not an rsoup checkpoint (bad magic)")
    (header_len,) = struct.unpack_from("<Q", data, 8)
    if 16 + header_len + 8 > len(data):
        raise CheckpointTruncatedError(f"{path}: header runs past end of file")
    try:
        header = data[16:16 + header_len].decode("utf-8")
    except UnicodeDecodeError as e:
        raise CheckpointFormatError(f"{path}: header is not UTF-8") from e
    declared = ArchSpec.parse(header)
    (declared_bytes,) = struct.unpack_from("<Q", data, len(data) - 8)
    payload = data[16 + header_len:-8]
    if len(payload) != declared_bytes or declared_bytes % 8:
        raise CheckpointTruncatedError(
            f"{path}: trailer declares {declared_bytes} payload bytes, file holds {len(payload)}")
    count = declared_bytes // 8
    if count != param_count(declared):
        raise CheckpointArchError(f"{path}: {count} values for an arch of {param_count(declared)}")
    if arch is not None and arch != declared:
        raise CheckpointArchError(f"{path}: expected {arch.describe()}, found {header}")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise CheckpointFormatError(f"{path}: payload holds non-finite values")
    return WeightVector(declared, values)
