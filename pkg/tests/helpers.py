"""Shared generators for randomized test instances."""
import numpy as np

from mable_ph.likelihood import prepare
from mable_ph.model import Dataset
from mable_ph.optimizer import empirical_baseline

# Six intervals from Gentleman and Geyer's artificial example; no right censoring.
GG_Y1 = [0.0, 0.0, 0.0, 1.0, 1.0, 2.0]
GG_Y2 = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0]
# log(1/3) + 2 log(2/3) + 2 log(2/3) + log(1/3), the published maximum
GG_LOGLIK = -3.819085
GG_STARTS = {
    "increasing": np.arange(1, 8) / 28.0,
    "uniform": np.full(7, 1 / 7.0),
    "tent": np.array([1, 2, 3, 4, 3, 2, 1]) / 16.0,
}


def gg_dataset():
    return Dataset.from_arrays(GG_Y1, GG_Y2, [1] * 6)


def random_dataset(rng, n, d, tau=None, kinds=("exact", "left", "interval", "right")):
    """Mixed-censoring data on [0, 1] with standard normal covariates.

    Every censoring kind named in ``kinds`` appears at least once when n is
    large enough, so the derivative checks always exercise every branch.
    """
    y1 = np.empty(n)
    y2 = np.empty(n)
    delta = np.ones(n, dtype=int)
    for i in range(n):
        kind = kinds[i % len(kinds)]
        a, b = np.sort(rng.uniform(0.05, 0.95, 2))
        if kind == "exact":
            y1[i] = y2[i] = a
            delta[i] = 0
        elif kind == "left":
            y1[i], y2[i] = 0.0, b
        elif kind == "interval":
            y1[i], y2[i] = a, b
        else:
            y1[i], y2[i] = a, np.inf
    # pin the time scale so rescaled times sit strictly inside (0, 1)
    y2_fin = np.where(np.isinf(y2), 0.0, y2)
    scale = tau if tau is not None else max(y1.max(), y2_fin.max()) * 1.05
    x = rng.standard_normal((n, d))
    return Dataset.from_arrays(y1, y2, delta, x, tau=scale)


def random_instance(rng, n=None, m=None, d=None, tail=None):
    """(prepared data, gamma, p, x0) with x0 the empirical baseline for gamma."""
    n = n if n is not None else int(rng.integers(4, 41))
    m = m if m is not None else int(rng.integers(1, 13))
    d = d if d is not None else int(rng.integers(1, 4))
    tail = bool(rng.integers(2)) if tail is None else tail
    ds = random_dataset(rng, n, d)
    gamma = rng.normal(0.0, 0.5, d)
    p = rng.dirichlet(np.ones(m + 1 + tail))
    x0, _ = empirical_baseline(gamma, ds.x)
    return prepare(ds, m, tail), gamma, p, x0


def central_gradient(f, v, h):
    v = np.asarray(v, dtype=float)
    out = np.empty(len(v))
    for j in range(len(v)):
        e = np.zeros(len(v))
        e[j] = h
        out[j] = (f(v + e) - f(v - e)) / (2 * h)
    return out


def central_jacobian(g, v, h):
    v = np.asarray(v, dtype=float)
    cols = []
    for j in range(len(v)):
        e = np.zeros(len(v))
        e[j] = h
        cols.append((np.asarray(g(v + e)) - np.asarray(g(v - e))) / (2 * h))
    return np.column_stack(cols)
