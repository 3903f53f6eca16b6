import struct

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from rsoup.errors import (CheckpointArchError, CheckpointFormatError, CheckpointTruncatedError,
                          DivergenceError, ShapeError)
from rsoup.policy import (ArchSpec, EnsemblePolicy, WeightVector, batch_logprob_gradient,
                          entropy, entropy_gradient, forward, greedy_action, init_weights,
                          load_checkpoint, log_prob, logprob_gradient, mix_distributions,
                          param_count, sample_and_logprob, save_checkpoint, zero_weights)


def _fd_gradient(fn, values, eps=1e-6):
    grad = np.zeros_like(values)
    for i in range(values.size):
        up, down = values.copy(), values.copy()
        up[i] += eps
        down[i] -= eps
        grad[i] = (fn(up) - fn(down)) / (2 * eps)
    return grad


def _rel_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-2))


def test_param_count_matches_layer_arithmetic():
    arch = ArchSpec.gaussian(obs_dim=2, hidden_sizes=(32, 32))
    assert param_count(arch) == (2 + 1) * 32 + (32 + 1) * 32 + (32 + 1) * 1
    learned = ArchSpec.gaussian(obs_dim=2, hidden_sizes=(32, 32), log_std_mode="learned")
    assert param_count(learned) == param_count(arch) + 1
    cat = ArchSpec.categorical(obs_dim=5, vocab_size=7)
    assert param_count(cat) == 6 * 7


def test_arch_header_parses_back():
    arch = ArchSpec.gaussian(obs_dim=3, hidden_sizes=(4, 5), log_std_mode="learned", log_std_value=-0.25)
    assert ArchSpec.parse(arch.describe()) == arch
    cat = ArchSpec.categorical(obs_dim=3, vocab_size=4, activation="relu")
    assert ArchSpec.parse(cat.describe()) == cat


def test_bad_arch_is_rejected():
    with pytest.raises(ShapeError):
        ArchSpec.gaussian(obs_dim=0)
    with pytest.raises(ShapeError):
        ArchSpec.categorical(obs_dim=2, vocab_size=1)
    with pytest.raises(ShapeError):
        ArchSpec.gaussian(obs_dim=2, activation="sigmoid")


def test_weight_vector_validates_size_and_finiteness():
    arch = ArchSpec.gaussian(obs_dim=1)
    with pytest.raises(ShapeError):
        WeightVector(arch, np.zeros(3))
    with pytest.raises(DivergenceError):
        WeightVector(arch, [0.0, np.nan])
    w = zero_weights(arch)
    with pytest.raises(ValueError):
        w.values[0] = 1.0


def test_init_weights_are_deterministic_per_rng():
    arch = ArchSpec.gaussian(obs_dim=2, hidden_sizes=(8,))
    a = init_weights(arch, np.random.default_rng(5))
    b = init_weights(arch, np.random.default_rng(5))
    assert np.array_equal(a.values, b.values)
    assert np.all(np.abs(a.values[:16]) <= 1 / np.sqrt(2))


def test_forward_rejects_wrong_observation_shape(tanh_policy):
    with pytest.raises(ShapeError):
        forward(tanh_policy, np.zeros(3))
    with pytest.raises(ShapeError):
        forward(tanh_policy, np.zeros((1, 2)))


def test_single_affine_layer_is_affine():
    arch = ArchSpec.gaussian(obs_dim=2)
    w = WeightVector(arch, [2.0, -1.0, 0.5])
    assert forward(w, [1.0, 3.0]).mean[0] == pytest.approx(2.0 - 3.0 + 0.5)


# -- Log-probabilities against closed forms --
def test_standard_normal_logprob_at_zero():
    arch = ArchSpec.gaussian(obs_dim=1)
    dist = forward(zero_weights(arch), [0.0])
    assert log_prob(dist, [0.0]) == pytest.approx(-0.9189385332046727, abs=1e-12)
    wide = forward(zero_weights(ArchSpec.gaussian(obs_dim=1, action_dim=3)), [0.0])
    assert log_prob(wide, np.zeros(3)) == pytest.approx(3 * -0.9189385332046727, abs=1e-12)


def test_uniform_categorical_logprob_is_log_half():
    dist = forward(zero_weights(ArchSpec.categorical(obs_dim=1, vocab_size=2)), [1.0])
    assert log_prob(dist, 0) == pytest.approx(np.log(0.5), abs=1e-15)
    assert log_prob(dist, 1) == pytest.approx(np.log(0.5), abs=1e-15)


def test_gaussian_logprob_matches_density_quadrature():
    arch = ArchSpec.gaussian(obs_dim=1, log_std_mode="learned")
    rng = np.random.default_rng(5)
    for _ in range(20):
        mu, log_sigma = rng.uniform(-2.0, 2.0), rng.uniform(-1.0, 1.0)
        dist = forward(WeightVector(arch, [0.0, mu, log_sigma]), [0.0])
        action, logp = sample_and_logprob(dist, rng)
        assert logp == log_prob(dist, action)
        assert logp == pytest.approx(norm.logpdf(action[0], mu, np.exp(log_sigma)), abs=1e-10)
        sigma = np.exp(log_sigma)
        mass, _ = quad(lambda a: np.exp(log_prob(dist, [a])), mu - 12 * sigma, mu + 12 * sigma,
                       epsabs=1e-12, epsrel=1e-12, limit=200)
        assert mass == pytest.approx(1.0, abs=1e-10)
        # CDF difference over a small cell against the integrated density
        lo, hi = action[0] - 0.01, action[0] + 0.01
        cell, _ = quad(lambda a: np.exp(log_prob(dist, [a])), lo, hi, epsabs=1e-13, epsrel=1e-12)
        assert cell == pytest.approx(norm.cdf(hi, mu, sigma) - norm.cdf(lo, mu, sigma), abs=1e-10)


def test_categorical_logprobs_sum_to_one():
    arch = ArchSpec.categorical(obs_dim=2, vocab_size=5, hidden_sizes=(3,))
    rng = np.random.default_rng(8)
    w = init_weights(arch, rng)
    dist = forward(w, rng.standard_normal(2))
    assert sum(np.exp(log_prob(dist, k)) for k in range(5)) == pytest.approx(1.0, abs=1e-12)
    action, logp = sample_and_logprob(dist, rng)
    assert 0 <= action < 5 and logp == log_prob(dist, action)


@pytest.mark.parametrize("arch", [
    ArchSpec.gaussian(obs_dim=3, hidden_sizes=(5, 4), log_std_mode="learned", log_std_value=-0.3),
    ArchSpec.gaussian(obs_dim=2, hidden_sizes=(6,), action_dim=2, activation="relu"),
    ArchSpec.categorical(obs_dim=3, vocab_size=4, hidden_sizes=(5, 4)),
])
def test_logprob_gradient_matches_finite_differences(arch):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        w = init_weights(arch, rng)
        obs = rng.standard_normal(arch.obs_dim)
        action, _ = sample_and_logprob(forward(w, obs), rng)
        analytic = logprob_gradient(w, obs, action)
        numeric = _fd_gradient(lambda v: log_prob(forward(w.with_values(v), obs), action), w.values.copy())
        worst = max(worst, _rel_error(analytic, numeric))
    assert worst <= 1e-4


def test_entropy_gradient_matches_finite_differences():
    arch = ArchSpec.categorical(obs_dim=2, vocab_size=3, hidden_sizes=(4,))
    rng = np.random.default_rng(11)
    w = init_weights(arch, rng)
    obs = rng.standard_normal((5, 2))

    def total_entropy(v):
        return sum(entropy(forward(w.with_values(v), o)) for o in obs)

    assert _rel_error(entropy_gradient(w, obs), _fd_gradient(total_entropy, w.values.copy())) <= 1e-4


def test_batch_gradient_is_weighted_sum_of_singles(tanh_policy):
    rng = np.random.default_rng(3)
    obs = rng.standard_normal((6, 2))
    actions = rng.standard_normal((6, 1))
    coeffs = rng.standard_normal(6)
    expected = sum(c * logprob_gradient(tanh_policy, o, a) for c, o, a in zip(coeffs, obs, actions))
    np.testing.assert_allclose(batch_logprob_gradient(tanh_policy, obs, actions, coeffs), expected, atol=1e-12)


def test_greedy_action_is_mode():
    arch = ArchSpec.categorical(obs_dim=1, vocab_size=3)
    w = WeightVector(arch, [0.0, 0.0, 0.0, 0.1, 2.0, -1.0])
    assert greedy_action(forward(w, [1.0])) == 1


def test_mixing_identical_distributions_is_identity(tanh_policy):
    obs = np.array([0.3, -0.2])
    ensemble = EnsemblePolicy((tanh_policy, tanh_policy), (0.25, 0.75))
    np.testing.assert_allclose(ensemble.distribution(obs).mean, forward(tanh_policy, obs).mean, atol=1e-15)
    mixed = mix_distributions([forward(tanh_policy, obs)] * 3, (0.2, 0.3, 0.5))
    np.testing.assert_allclose(mixed.params(), forward(tanh_policy, obs).params(), atol=1e-15)


# -- Checkpoints --
def test_checkpoint_round_trip_is_exact(tmp_path, tanh_policy):
    path = save_checkpoint(tanh_policy, tmp_path / "sub" / "w.ckpt")
    loaded = load_checkpoint(path, tanh_policy.arch)
    assert loaded.arch == tanh_policy.arch
    assert np.array_equal(loaded.values, tanh_policy.values)


def test_truncated_checkpoint(tmp_path, tanh_policy):
    path = save_checkpoint(tanh_policy, tmp_path / "w.ckpt")
    data = path.read_bytes()
    path.write_bytes(data[:-16])
    with pytest.raises(CheckpointTruncatedError):
        load_checkpoint(path)


def test_bad_magic(tmp_path, tanh_policy):
    path = save_checkpoint(tanh_policy, tmp_path / "w.ckpt")
    path.write_bytes(b"NOTACKPT" + path.read_bytes()[8:])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
    (tmp_path / "short.ckpt").write_bytes(b"RSOUP")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(tmp_path / "short.ckpt")


def test_arch_mismatch(tmp_path, tanh_policy):
    path = save_checkpoint(tanh_policy, tmp_path / "w.ckpt")
    with pytest.raises(CheckpointArchError):
        load_checkpoint(path, ArchSpec.gaussian(obs_dim=2, hidden_sizes=(8, 8)))


def test_checkpoint_trailer_is_payload_length(tmp_path, tanh_policy):
    data = save_checkpoint(tanh_policy, tmp_path / "w.ckpt").read_bytes()
    (trailer,) = struct.unpack("<Q", data[-8:])
    assert trailer == 8 * param_count(tanh_policy.arch)


def test_non_finite_payload_is_a_checkpoint_error(tmp_path, tanh_policy):
    path = save_checkpoint(tanh_policy, tmp_path / "w.ckpt")
    data = bytearray(path.read_bytes())
    data[-16:-8] = struct.pack("<d", float("nan"))
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
