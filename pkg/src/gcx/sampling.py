"""Deterministic quasi-random sampling and seed management."""

from __future__ import annotations

from math import log

import numpy as np
from scipy.stats import qmc


def halton(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n scrambled Halton points in [0, 1)^dim."""
    sampler = qmc.Halton(d=dim, scramble=True, seed=rng)
    return sampler.random(n)


def task_rng(master_seed: int, task: int) -> np.random.Generator:
    """Independent generator for one task of a seeded run."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(task)]))


def default_linking_scale(nn: np.ndarray, level_dim: int) -> float:
    """Linking radius for a sample of a level_dim-dimensional set.

    With median nearest-neighbour distance m, a ball of radius
    m (ln n / ln 2)^(1/k) holds about ln n samples, the connectivity
    threshold of a random geometric graph.  On a curve the largest gap is
    twice that radius.  The default is twice the threshold.
    """
    n = len(nn)
    k = max(int(level_dim), 1)
    ratio = max(log(n), 1.0) / log(2.0)
    if k == 1:
        ratio *= 2.0
    return 2.0 * ratio ** (1.0 / k) * float(np.median(nn))
