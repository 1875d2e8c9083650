"""Blocked adaptive random-walk Metropolis.

Each block proposes ``x_b + s_b N(0, Sigma_b)`` where ``Sigma_b`` is a
running covariance estimate of that block and ``log s_b`` is tuned toward
a target acceptance rate (Andrieu & Thoms 2008, Algorithm 4: global
adaptive scaling with running mean and covariance). Adaptation gains
``gamma_t = c (t + t0)^-decay`` (default ``t^-0.6``) vanish, so the kernel settles down.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels

CHUNK = 4096


@dataclass
class SamplerConfig:
    n_iter: int = 50_000
    burn_in: int | None = None
    thin: int = 10
    target_accept: float = 0.15
    adapt_decay: float = 0.6
    adapt_scale: float = 1.0
    adapt_offset: float = 0.0
    init_sd: float = 0.1
    regularization: float = 1e-6
    adapt: bool = True
    seed: int | None = None

    def __post_init__(self):
        if self.burn_in is None:
            self.burn_in = self.n_iter // 5
        if self.n_iter < 1 or self.thin < 1:
            raise ValueError("n_iter and thin must be positive")
        if not 0 <= self.burn_in < self.n_iter:
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iter")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if not 0.5 < self.adapt_decay <= 1:
            raise ValueError("adapt_decay must lie in (0.5, 1]")

    @property
    def n_keep(self) -> int:
        return -(-(self.n_iter - self.burn_in) // self.thin)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PosteriorDraws:
    """Retained states of one chain.

    ``samples`` has one row per retained iteration; ``scale_trace`` holds
    ``log s_b`` every ``thin`` iterations over the whole run.
    """

    samples: np.ndarray
    log_post: np.ndarray
    names: list[str]
    acceptance: np.ndarray
    acceptance_post_burn: np.ndarray
    scale_trace: np.ndarray
    block_names: list[str]
    config: SamplerConfig
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.samples[:, self.names.index(name)]


def default_blocks(dim: int) -> list[np.ndarray]:
    """The (knot values, theta, everything) blocking for ``x = (zeta, tau, omega...)``."""
    if dim <= 2:
        return [np.arange(dim)]
    return [np.arange(2, dim), np.arange(2), np.arange(dim)]


def run_chain(
    target: Callable,
    args: tuple,
    init,
    config: SamplerConfig,
    blocks: Sequence[Sequence[int]] | None = None,
    names: Sequence[str] | None = None,
    block_names: Sequence[str] | None = None,
    rng: np.random.Generator | None = None,
) -> PosteriorDraws:
    """Sample from ``target`` with the blocked adaptive Metropolis kernel.

    Parameters
    ----------
    target : numba-jitted function ``target(x, args) -> float``
        Unnormalized log density. Non-finite values are treated as zero density.
    args : tuple
        Passed through to ``target``.
    init : array_like
        Starting state; ``target(init)`` must be finite.
    blocks : list of index arrays, optional
        Defaults to :func:`default_blocks`.
    rng : numpy Generator, optional
        Source of all randomness; defaults to ``default_rng(config.seed)``.
    """
    x = np.array(init, dtype=float)
    dim = x.size
    lp = float(target(x, args))
    if not math.isfinite(lp):
        raise FloatingPointError(f"initial log posterior is not finite ({lp})")
    if blocks is None:
        blocks = default_blocks(dim)
    blocks = [np.asarray(b, dtype=np.int64) for b in blocks]
    for b in blocks:
        if b.size == 0 or b.min() < 0 or b.max() >= dim:
            raise ValueError("block indices out of range")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n_blocks = len(blocks)
    dmax = max(b.size for b in blocks)
    block_index = np.concatenate(blocks)
    block_ptr = np.concatenate(([0], np.cumsum([b.size for b in blocks]))).astype(np.int64)

    mu = np.zeros((n_blocks, dmax))
    cov = np.zeros((n_blocks, dmax, dmax))
    log_scale = np.empty(n_blocks)
    for k, b in enumerate(blocks):
        mu[k, : b.size] = x[b]
        cov[k, : b.size, : b.size] = config.init_sd**2 * np.eye(b.size)
        log_scale[k] = math.log(2.38 / math.sqrt(b.size))

    n_keep = config.n_keep
    draws = np.empty((n_keep, dim))
    draw_lp = np.empty(n_keep)
    scale_trace = np.empty((config.n_iter // config.thin, n_blocks))
    accept_count = np.zeros(n_blocks, dtype=np.int64)
    accept_post = np.zeros(n_blocks, dtype=np.int64)
    n_stored = 0
    n_traced = 0
    t = 0
    while t < config.n_iter:
        steps = min(CHUNK, config.n_iter - t)
        normals = rng.standard_normal((steps, n_blocks, dmax))
        uniforms = 1.0 - rng.random((steps, n_blocks))
        lp, n_stored, n_traced = _kernels.adaptive_segment(
            target,
            args,
            x,
            lp,
            t,
            steps,
            block_index,
            block_ptr,
            mu,
            cov,
            log_scale,
            normals,
            uniforms,
            config.adapt,
            config.adapt_scale,
            config.adapt_offset,
            config.adapt_decay,
            config.target_accept,
            config.regularization,
            config.burn_in,
            config.thin,
            draws,
            draw_lp,
            n_stored,
            scale_trace,
            n_traced,
            accept_count,
            accept_post,
        )
        t += steps

    if names is None:
        names = [f"x{i}" for i in range(dim)]
    if block_names is None:
        block_names = [f"block{k}" for k in range(n_blocks)]
    return PosteriorDraws(
        samples=draws[:n_stored],
        log_post=draw_lp[:n_stored],
        names=list(names),
        acceptance=accept_count / config.n_iter,
        acceptance_post_burn=accept_post / (config.n_iter - config.burn_in),
        scale_trace=scale_trace[:n_traced],
        block_names=list(block_names),
        config=config,
        meta={"final_log_scale": log_scale.copy(), "final_cov": cov.copy()},
    )


def batch_means_se(values, n_batches: int = 25) -> float:
    """Monte Carlo standard error of the mean by non-overlapping batch means."""
    values = np.asarray(values, dtype=float)
    n = values.size // n_batches * n_batches
    if n < n_batches * 2:
        return float(np.std(values, ddof=1) / math.sqrt(max(values.size, 1)))
    means = values[:n].reshape(n_batches, -1).mean(axis=1)
    return float(np.std(means, ddof=1) / math.sqrt(n_batches))
