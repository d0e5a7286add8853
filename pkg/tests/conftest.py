"""Shared generators for the property-style tests.

Plain functions, imported by the test modules; pytest puts this
directory on sys.path.
"""

import numpy as np

from cxproj.measures import DiscreteMeasure


def random_measure(rng, n_max=12, d=1, spread=2.0):
    """Random discrete measure with >= 2 atoms and generic weights."""
    n = int(rng.integers(2, n_max + 1))
    atoms = rng.normal(0.0, spread, size=(n, d))
    weights = rng.random(n) + 0.1
    return DiscreteMeasure(atoms if d > 1 else atoms[:, 0], weights / weights.sum())


def random_cx_pair(rng, n_max=12):
    """Random 1-D pair (mu, nu) with mu <=cx nu, exactly by construction.

    nu is arbitrary; mu collapses random groups of nu's atoms onto their
    barycenters, i.e. mu is the law of a conditional expectation of nu,
    which is dominated in the convex order.
    """
    nu = random_measure(rng, n_max=n_max)
    labels = rng.integers(0, int(rng.integers(1, nu.n + 1)), size=nu.n)
    atoms, weights = [], []
    for g in np.unique(labels):
        sel = labels == g
        w = nu.weights[sel].sum()
        atoms.append(float(nu.weights[sel] @ nu.x[sel]) / w)
        weights.append(w)
    mu = DiscreteMeasure(np.array(atoms), np.array(weights))
    return mu, nu
