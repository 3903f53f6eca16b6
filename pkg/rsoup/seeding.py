"""
seeding.py - Named seed derivations

All randomness flows from one experiment seed. Each consumer asks for a
seed by purpose string, so any single run can be reproduced in isolation:

    seed=7 --+-- "init"             -> fresh weights
             +-- "finetune/R0"      -> expert for R0 (and MORL mu=(1,0))
             +-- "morl/0.3,0.7"     -> interior MORL run
             +-- "validation"       -> selection episodes
             +-- "test"             -> reported fronts
"""

import hashlib

import numpy as np


def derive_seed(seed: int, purpose: str) -> int:
    digest = hashlib.blake2b(f"{seed}/{purpose}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def rng_for(seed: int, purpose: str | None = None) -> np.random.Generator:
    return np.random.default_rng(seed if purpose is None else derive_seed(seed, purpose))


def episode_rng(seed: int, episode: int) -> np.random.Generator:
    # Episode k of an evaluation is identical wherever it is replayed.
    return np.random.default_rng([seed, episode])


def coeff_tag(coeffs) -> str:
    return ",".join(repr(float(c)) for c in coeffs)
