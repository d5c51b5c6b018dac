"""Shared factories for randomized test instances."""

import numpy as np

from weakot import DiscreteMeasure, make_measure


def random_measure(rng, n=None, d=2, scale=1.0, shift=0.0, weighted=False) -> DiscreteMeasure:
    if n is None:
        n = int(rng.integers(2, 9))
    points = rng.standard_normal((n, d)) * scale + shift
    weights = rng.random(n) + 0.2 if weighted else None
    return make_measure(points, weights)


def random_instance(rng, max_side=8, d=2, weighted=True):
    r = int(rng.integers(1, max_side + 1))
    m = int(rng.integers(1, max_side + 1))
    mu = random_measure(rng, n=r, d=d, weighted=weighted)
    nu = random_measure(rng, n=m, d=d, scale=1.5, shift=0.3, weighted=weighted)
    return mu, nu
