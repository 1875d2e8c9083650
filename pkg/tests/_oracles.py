"""Independent reference computations shared by unit and acceptance tests."""

from functools import lru_cache

import numpy as np
from scipy import integrate, stats


@lru_cache(maxsize=None)
def prior_upcrossings(n_paths: int = 10_000, n_points: int = 512, seed: int = 1,
                      a_lambda: float = 16.0, b_lambda: float = 2.2):
    """Zero up-crossing counts of prior GP paths on [0, 1] with lambda ~ Gamma(a, rate b).

    Paths are drawn with sorted lambdas in chunks of 40 that share one
    eigendecomposition (at the chunk mean); within a chunk the lambdas
    differ by well under 1%.
    """
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n_points)
    lams = np.sort(stats.gamma(a_lambda, scale=1.0 / b_lambda).rvs(n_paths, random_state=rng))
    counts = np.empty(n_paths, dtype=int)
    for chunk in np.array_split(np.arange(n_paths), max(n_paths // 40, 1)):
        lam = lams[chunk].mean()
        C = np.exp(-lam**2 * (t[:, None] - t[None, :]) ** 2)
        w, V = np.linalg.eigh(C)
        X = (V * np.sqrt(np.clip(w, 0, None))) @ rng.standard_normal((n_points, chunk.size))
        counts[chunk] = np.sum((X[:-1] < 0) & (X[1:] >= 0), axis=0)
    return counts, lams


def prior_rho_probability(lo: float = 0.28, hi: float = 0.84, a_lambda: float = 16.0, b_lambda: float = 2.2) -> float:
    """P(lo < exp(-lambda^2 / 100) < hi) by 1-d quadrature of the Gamma density."""
    lam_hi = np.sqrt(-np.log(lo)) * 10.0
    lam_lo = np.sqrt(-np.log(hi)) * 10.0
    dens = stats.gamma(a_lambda, scale=1.0 / b_lambda).pdf
    val, _ = integrate.quad(dens, lam_lo, lam_hi, epsabs=1e-13, epsrel=1e-13)
    return val
