"""Low-rank Gaussian process machinery for the log-density field.

The field ``omega`` is represented by its values at ``m`` knots. With the
amplitude ``kappa^2`` integrated out (inverse-gamma prior) the knot values
are multivariate Student-t given the inverse length-scale ``lambda``, and
``lambda`` itself is integrated against a discrete prior supported on a
grid chosen so that successive knot covariances are a fixed KL distance
apart. The grid field is the lambda-averaged predictive-process mean
``sum_g P(g | omega_S) A_g omega_S`` with ``A_g = C_TS C_S^-1``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg, special, stats

logger = logging.getLogger(__name__)

# diagonal nugget added to every knot covariance
JITTER = 1e-10


def make_knots(m: int = 11) -> np.ndarray:
    if m < 2:
        raise ValueError("need at least two knots")
    knots = np.linspace(0.0, 1.0, m)
    knots[0], knots[-1] = 0.0, 1.0
    return knots


def kernel(lam, u, v):
    """Squared-exponential correlation ``exp(-lam^2 (u - v)^2)``."""
    if not np.all(np.asarray(lam) > 0):
        raise ValueError("inverse length-scale must be positive")
    d = np.subtract(u, v)
    return np.exp(-np.square(lam) * d * d)


def lambda_for_correlation(rho: float, distance: float = 0.1) -> float:
    """The ``lam`` with ``kernel(lam, 0, distance) == rho``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    return float(np.sqrt(-np.log(rho)) / distance)


def kernel_matrix(lam: float, a, b, jitter: float = JITTER) -> np.ndarray:
    """Cross-correlation matrix with a nugget wherever ``a_i == b_j``.

    Putting the nugget on coincident points (rather than on the diagonal)
    keeps ``C_TS`` rows at knot locations identical to ``C_S`` rows, so the
    predictive mean interpolates the knot values.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    K = kernel(lam, a[:, None], b[None, :])
    return K + jitter * (a[:, None] == b[None, :])


def gauss_kl(C0, C1) -> float:
    """``KL(N(0, C0) || N(0, C1))`` for symmetric positive definite matrices."""
    C0 = np.atleast_2d(np.asarray(C0, dtype=float))
    C1 = np.atleast_2d(np.asarray(C1, dtype=float))
    if C0.shape != C1.shape or C0.shape[0] != C0.shape[1]:
        raise ValueError("covariances must be square and of equal size")
    try:
        L0 = np.linalg.cholesky(C0)
        L1 = np.linalg.cholesky(C1)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not positive definite") from exc
    X = linalg.solve_triangular(L1, L0, lower=True)
    m = C0.shape[0]
    logdet_ratio = 2.0 * (np.log(np.diag(L1)).sum() - np.log(np.diag(L0)).sum())
    return float(0.5 * (np.sum(X * X) - m + logdet_ratio))


@dataclass(frozen=True)
class LambdaGrid:
    """Discretized inverse length-scale prior with precomputed linear algebra.

    Attributes
    ----------
    lambdas : (G,) increasing support points
    log_weights : (G,) log prior probabilities
    knots : (m,)
    grid : (L,)
    A : (G, L, m) predictive-process projections ``C_TS C_S^-1``
    R : (G, m, m) lower Cholesky factors of ``C_S``
    R_inv : (G, m, m) their inverses, so quadratic forms are one matvec
    log_det : (G,) ``log |C_S|``
    """

    lambdas: np.ndarray
    log_weights: np.ndarray
    knots: np.ndarray
    grid: np.ndarray
    A: np.ndarray
    R: np.ndarray
    R_inv: np.ndarray
    log_det: np.ndarray

    @property
    def size(self) -> int:
        return self.lambdas.size

    @property
    def rhos(self) -> np.ndarray:
        return kernel(self.lambdas, 0.0, 0.1)

    def covariance(self, g: int) -> np.ndarray:
        return kernel_matrix(self.lambdas[g], self.knots, self.knots)

    def save(self, path) -> None:
        np.savez(
            path,
            **{k: getattr(self, k) for k in ("lambdas", "log_weights", "knots", "grid", "A", "R", "R_inv", "log_det")},
        )

    @classmethod
    def load(cls, path) -> "LambdaGrid":
        with np.load(path) as z:
            return cls(**{k: z[k] for k in z.files})


def step_lambdas(
    knots,
    rho_start: float = 0.95,
    rho_stop: float = 0.2,
    kl_step: float = 0.5,
    distance: float = 0.1,
    jitter: float = JITTER,
    max_points: int = 10_000,
) -> np.ndarray:
    """Support points from ``rho_start`` down to ``rho_stop`` in KL steps.

    From the current correlation ``rho`` the candidate starts at
    ``rho_stop`` and is moved halfway back toward ``rho`` until the KL
    divergence from the current knot covariance is at most ``kl_step``.
    The walk ends once a point at or below ``rho_stop`` is accepted.
    """
    knots = np.asarray(knots, dtype=float)
    if not 0 < rho_stop < rho_start < 1:
        raise ValueError("need 0 < rho_stop < rho_start < 1")

    def cov(rho):
        return kernel_matrix(lambda_for_correlation(rho, distance), knots, knots, jitter)

    rhos = [rho_start]
    while rhos[-1] > rho_stop:
        if len(rhos) >= max_points:
            raise RuntimeError(f"lambda grid exceeded {max_points} points; last rho={rhos[-1]}")
        current = rhos[-1]
        C0 = cov(current)
        candidate = rho_stop
        for _ in range(200):
            if gauss_kl(C0, cov(candidate)) <= kl_step:
                break
            candidate = 0.5 * (current + candidate)
        else:
            raise RuntimeError(f"KL step search failed to bracket from rho={current}")
        rhos.append(candidate)
    return np.array([lambda_for_correlation(r, distance) for r in rhos])


def voronoi_log_weights(lambdas, a_lambda: float, b_lambda: float) -> np.ndarray:
    """Gamma(a, rate b) prior mass of each point's cell, cut at geometric midpoints."""
    lambdas = np.asarray(lambdas, dtype=float)
    edges = np.concatenate(([0.0], np.sqrt(lambdas[:-1] * lambdas[1:]), [np.inf]))
    dist = stats.gamma(a_lambda, scale=1.0 / b_lambda)
    lower = dist.cdf(edges[:-1])
    upper = dist.cdf(edges[1:])
    # subtract on the side that keeps precision
    mass = np.where(lower < 0.5, upper - lower, dist.sf(edges[:-1]) - dist.sf(edges[1:]))
    mass = np.maximum(mass, np.finfo(float).tiny)
    return np.log(mass) - np.log(mass.sum())


def build_lambda_grid(
    knots,
    grid,
    a_lambda: float = 16.0,
    b_lambda: float = 2.2,
    rho_start: float = 0.95,
    rho_stop: float = 0.2,
    kl_step: float = 0.5,
    jitter: float = JITTER,
) -> LambdaGrid:
    knots = np.asarray(knots, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(knots) <= 0) or knots[0] != 0.0 or knots[-1] != 1.0:
        raise ValueError("knots must be strictly increasing with endpoints 0 and 1")
    if not (a_lambda > 0 and b_lambda > 0):
        raise ValueError("Gamma prior parameters must be positive")

    lambdas = step_lambdas(knots, rho_start, rho_stop, kl_step, jitter=jitter)
    return lambda_grid_from_support(lambdas, voronoi_log_weights(lambdas, a_lambda, b_lambda), knots, grid, jitter)


def lambda_grid_from_support(lambdas, log_weights, knots, grid, jitter: float = JITTER) -> LambdaGrid:
    """Precompute the per-lambda linear algebra for given support points and log weights."""
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=float))
    log_weights = np.atleast_1d(np.asarray(log_weights, dtype=float))
    knots = np.atleast_1d(np.asarray(knots, dtype=float))
    grid = np.asarray(grid, dtype=float)
    if lambdas.shape != log_weights.shape:
        raise ValueError("lambdas and log_weights must have the same length")
    G, m, L = lambdas.size, knots.size, grid.size
    A = np.empty((G, L, m))
    R = np.empty((G, m, m))
    R_inv = np.empty((G, m, m))
    log_det = np.empty(G)
    on_knot = np.isclose(grid[:, None], knots[None, :], rtol=0, atol=1e-12)
    rows, cols = np.nonzero(on_knot)
    for g, lam in enumerate(lambdas):
        C = kernel_matrix(lam, knots, knots, jitter)
        Rg = np.linalg.cholesky(C)
        R[g] = Rg
        R_inv[g] = linalg.solve_triangular(Rg, np.eye(m), lower=True)
        log_det[g] = 2.0 * np.log(np.diag(Rg)).sum()
        C_ts = kernel_matrix(lam, grid, knots, jitter)
        A[g] = linalg.cho_solve((Rg, True), C_ts.T).T
        # rows at knot locations are the identity up to rounding; make them exact
        A[g][rows] = 0.0
        A[g][rows, cols] = 1.0
    logger.debug("lambda grid: G=%d, lambda in [%.4g, %.4g]", G, lambdas[0], lambdas[-1])
    return LambdaGrid(
        lambdas=lambdas,
        log_weights=log_weights,
        knots=knots,
        grid=grid,
        A=A,
        R=R,
        R_inv=R_inv,
        log_det=log_det,
    )


def cached_lambda_grid(cache_dir, knots, grid, a_lambda=16.0, b_lambda=2.2, **kwargs) -> LambdaGrid:
    """:func:`build_lambda_grid` memoized in ``cache_dir`` as ``.npz`` files."""
    key = json.dumps(
        {
            "knots": np.asarray(knots, dtype=float).round(15).tolist(),
            "grid": np.asarray(grid, dtype=float).round(15).tolist(),
            "a_lambda": float(a_lambda),
            "b_lambda": float(b_lambda),
            **{k: float(v) for k, v in sorted(kwargs.items())},
        },
        sort_keys=True,
    )
    digest = hashlib.sha256(key.encode()).hexdigest()[:16]
    m, L = len(knots), len(grid)
    path = Path(cache_dir) / f"lambda_grid_m{m}_L{L}_a{a_lambda:g}_b{b_lambda:g}_{digest}.npz"
    if path.exists():
        try:
            return LambdaGrid.load(path)
        except (OSError, ValueError, KeyError):
            logger.warning("unreadable lambda-grid cache %s; rebuilding", path)
    lg = build_lambda_grid(knots, grid, a_lambda, b_lambda, **kwargs)
    path.parent.mkdir(parents=True, exist_ok=True)
    lg.save(path)
    return lg


# ---------------------------------------------------------------------------
# marginal prior of the knot values and the predictive projection


def _component_log_densities(omega_S, lgrid: LambdaGrid, a_kappa: float, b_kappa: float):
    omega_S = np.asarray(omega_S, dtype=float)
    m = lgrid.knots.size
    if omega_S.shape != (m,):
        raise ValueError(f"expected {m} knot values, got shape {omega_S.shape}")
    z = lgrid.R_inv @ omega_S
    quad = np.einsum("gi,gi->g", z, z)
    const = special.gammaln(a_kappa + 0.5 * m) - special.gammaln(a_kappa) - 0.5 * m * np.log(2.0 * np.pi * b_kappa)
    return const - 0.5 * lgrid.log_det - (a_kappa + 0.5 * m) * np.log1p(quad / (2.0 * b_kappa))


def marginal_log_prior(omega_S, lgrid: LambdaGrid, a_kappa: float = 1.5, b_kappa: float = 1.5) -> float:
    """Log density of the knot values with ``kappa^2`` and ``lambda`` integrated out."""
    comp = _component_log_densities(omega_S, lgrid, a_kappa, b_kappa)
    return float(special.logsumexp(lgrid.log_weights + comp))


def mixture_weights(omega_S, lgrid: LambdaGrid, a_kappa: float = 1.5, b_kappa: float = 1.5) -> np.ndarray:
    """Posterior probabilities of the lambda support points given the knot values."""
    comp = lgrid.log_weights + _component_log_densities(omega_S, lgrid, a_kappa, b_kappa)
    return np.exp(comp - special.logsumexp(comp))


def predictive_project(omega_S, lgrid: LambdaGrid, a_kappa: float = 1.5, b_kappa: float = 1.5) -> np.ndarray:
    """Lambda-averaged predictive-process values of the field on the grid."""
    w = mixture_weights(omega_S, lgrid, a_kappa, b_kappa)
    return np.einsum("g,glm,m->l", w, lgrid.A, np.asarray(omega_S, dtype=float))
