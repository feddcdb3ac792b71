"""Shared fixtures: default toy configuration and fuzz-input builders."""

from __future__ import annotations

import numpy as np
import pytest

from invnoise.codec import default_codebook, dyadic_schedule
from invnoise.predictor import PredictorParams, condition_embed
from invnoise.rng import normal_values


@pytest.fixture(scope="session")
def codebook():
    return default_codebook()


@pytest.fixture(scope="session")
def schedule():
    return dyadic_schedule(5)


@pytest.fixture(scope="session")
def params(codebook, schedule):
    return PredictorParams(codebook=codebook, schedule=schedule)


@pytest.fixture(scope="session")
def source_cond(params):
    return condition_embed("red brick house among pines", params)


@pytest.fixture(scope="session")
def target_cond(params):
    return condition_embed("blue glass tower among pines", params)


def random_grid(seed: int, dim: int = 4, size: int = 16, amplitude: float = 0.6) -> np.ndarray:
    """Deterministic fuzz grid: keyed Gaussian field, (d, size, size)."""
    field = normal_values(
        seed,
        99,
        0,
        np.arange(size)[:, None, None],
        np.arange(size)[None, :, None],
        np.arange(dim)[None, None, :],
    )
    return amplitude * np.moveaxis(field, -1, 0)
