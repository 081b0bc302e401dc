"""Dense, formula-level re-implementations used as independent oracles.

Nothing here imports the package internals beyond plain data access, so a
bug in the sparse code paths cannot hide behind the same bug in the check.
"""
import math

import numpy as np
from scipy import optimize


def dense(vec, width):
    out = np.zeros(width)
    for k, x in vec.items():
        out[k] = x
    return out


def lp(x, p):
    x = np.abs(np.asarray(x, dtype=float))
    if x.size == 0:
        return 0.0
    if math.isinf(p):
        return float(x.max())
    return float((x**p).sum() ** (1 / p))


def dist_to_span_bruteforce(v, basis, p, starts=20, seed=0):
    """Multi-start Nelder-Mead over the coefficients; an upper bound that is tight in practice."""
    width = 1 + max([v.max_index()] + [b.max_index() for b in basis])
    t = dense(v, width)
    B = np.stack([dense(b, width) for b in basis], axis=1)
    rng = np.random.default_rng(seed)
    best = lp(t, p)
    for _ in range(starts):
        res = optimize.minimize(lambda c: lp(t - B @ c, p), rng.normal(size=B.shape[1]),
                                method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-12, "maxiter": 20000})
        best = min(best, res.fun)
    return best


def glued_value(chain_maps, norm_a, a):
    """phi(a) straight from the shell formula, with chain_maps[i] = s_i as dicts of dense arrays."""
    if norm_a == 0:
        return None
    i = 1
    while norm_a > 2.0**i:
        i += 1
    w2 = (norm_a - 2.0 ** (i - 1)) / 2.0 ** (i - 1)
    w1 = 1 - w2
    return w1 * chain_maps[i][a] + w2 * chain_maps[i + 1][a]


def tau_value(t, directions):
    """tau(t) from the piecewise definition with breakpoints 3, 9, 27, ..."""
    out = np.zeros_like(directions[0])
    start = 0.0
    for k, p in enumerate(directions, start=1):
        end = 3.0**k
        if t <= end:
            return out + (t - start) * p
        out = out + (end - start) * p
        start = end
    raise ValueError("t beyond the last breakpoint")


def repaired_metric(n, rng):
    """Random symmetric matrix pushed through Floyd-Warshall, so it satisfies the triangle inequality."""
    m = rng.uniform(1, 10, size=(n, n))
    m = (m + m.T) / 2
    np.fill_diagonal(m, 0)
    for k in range(n):
        m = np.minimum(m, m[:, [k]] + m[[k], :])
    return m
