import textwrap

import numpy as np
import pytest

from rsoup.policy import ArchSpec, init_weights


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale RL experiments")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tanh_policy(rng):
    arch = ArchSpec.gaussian(obs_dim=2, hidden_sizes=(8, 8), log_std_mode="learned", log_std_value=-0.5)
    return init_weights(arch, rng)


TINY_POINTMASS = """\
seed: 3
env:
  kind: pointmass
  horizon: 5
arch:
  hidden_sizes: [4]
pretrain:
  updates: 2
  episodes_per_update: 2
  log_every: 0
finetune:
  updates: 2
  episodes_per_update: 2
  log_every: 0
grids:
  lambda_points: 3
  mu_points: 3
  selection_points: 3
  lmc_points: 3
  init_interp_points: 3
eval:
  episodes: 3
  validation_episodes: 2
control:
  seeds: 2
  probes: 4
"""


@pytest.fixture
def tiny_config(tmp_path):
    """Writes a tiny PointMass config; pass overrides as extra YAML text."""
    def make(extra: str = "", name: str = "tiny.yaml"):
        path = tmp_path / name
        path.write_text(TINY_POINTMASS + textwrap.dedent(extra))
        return path
    return make
