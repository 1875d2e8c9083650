"""Compiled inner loops: log posteriors and the adaptive Metropolis segment.

Targets share the calling convention ``target(x, args) -> float`` where
``args`` is a tuple of arrays/scalars; the sampler kernel is specialized
per target function by numba.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LOG_2_OVER_PI = math.log(2.0 / math.pi)
U_EPS = 1e-12
# lambda components with smaller posterior weight are skipped in the projection
WEIGHT_FLOOR = 1e-16


@njit(cache=True)
def _log_prior_theta(zeta, tau):
    a = abs(zeta)
    lp = -a - 2.0 * math.log1p(math.exp(-a))
    if tau > 0:
        log1p_s2 = 2.0 * tau + math.log1p(math.exp(-2.0 * tau))
    else:
        log1p_s2 = math.log1p(math.exp(2.0 * tau))
    return lp + LOG_2_OVER_PI - log1p_s2 + tau


@njit(cache=True)
def gpd_log_posterior(x, args):
    """GPD log likelihood plus the theta prior; ``args = (y, alpha_min)``."""
    y, alpha_min = args
    zeta = x[0]
    tau = x[1]
    if not (math.isfinite(zeta) and math.isfinite(tau)) or zeta > 500.0 or abs(tau) > 500.0:
        return -np.inf
    alpha = alpha_min + (2.0 - alpha_min) * math.exp(zeta / 1.5)
    scale = alpha * math.exp(tau)
    s = 0.0
    for i in range(y.shape[0]):
        s += math.log1p(y[i] / scale)
    return -y.shape[0] * tau - (alpha + 1.0) * s + _log_prior_theta(zeta, tau)


@njit(cache=True)
def knot_prior_and_field(omega, t, A, R_inv, log_det, log_w, a_kappa, b_kappa):
    """Marginal log prior of the knot values and the projected grid field."""
    G = A.shape[0]
    L = A.shape[1]
    m = A.shape[2]
    comp = np.empty(G)
    power = a_kappa + 0.5 * m
    const = math.lgamma(power) - math.lgamma(a_kappa) - 0.5 * m * math.log(2.0 * math.pi * b_kappa)
    top = -np.inf
    for g in range(G):
        q = 0.0
        for i in range(m):
            z = 0.0
            for j in range(i + 1):
                z += R_inv[g, i, j] * omega[j]
            q += z * z
        c = log_w[g] + const - 0.5 * log_det[g] - power * math.log1p(q / (2.0 * b_kappa))
        comp[g] = c
        if c > top:
            top = c
    total = 0.0
    for g in range(G):
        comp[g] = math.exp(comp[g] - top)
        total += comp[g]
    log_prior = top + math.log(total)
    field = np.zeros(L)
    for g in range(G):
        w = comp[g] / total
        if w < WEIGHT_FLOOR:
            continue
        for l in range(L):
            acc = 0.0
            for j in range(m):
                acc += A[g, l, j] * omega[j]
            field[l] += w * acc
    return log_prior, field


@njit(cache=True)
def semi_log_likelihood(zeta, tau, field, y, t, alpha_min):
    """Log likelihood for sorted ``y`` given the grid field (log of unnormalized psi)."""
    alpha = alpha_min + (2.0 - alpha_min) * math.exp(zeta / 1.5)
    scale = alpha * math.exp(tau)
    L = t.shape[0]
    top = field[0]
    for l in range(1, L):
        if field[l] > top:
            top = field[l]
    h = np.empty(L)
    for l in range(L):
        h[l] = math.exp(field[l] - top)
    norm = 0.0
    for l in range(L - 1):
        norm += 0.5 * (t[l + 1] - t[l]) * (h[l] + h[l + 1])
    n = y.shape[0]
    sum_z = 0.0
    sum_log_psi = 0.0
    k = 0
    for i in range(n):
        z = math.log1p(y[i] / scale)
        sum_z += z
        u = -math.expm1(-alpha * z)
        if u < U_EPS:
            u = U_EPS
        elif u > 1.0 - U_EPS:
            u = 1.0 - U_EPS
        # y sorted => u sorted, so the bracketing cell only moves forward
        while k < L - 2 and u > t[k + 1]:
            k += 1
        w = (u - t[k]) / (t[k + 1] - t[k])
        sum_log_psi += math.log(h[k] + w * (h[k + 1] - h[k]))
    return -n * tau - (alpha + 1.0) * sum_z + sum_log_psi - n * math.log(norm)


@njit(cache=True)
def semi_log_posterior(x, args):
    """Full log posterior; ``args = (y, t, A, R_inv, log_det, log_w, a_kappa, b_kappa, alpha_min)``."""
    y, t, A, R_inv, log_det, log_w, a_kappa, b_kappa, alpha_min = args
    zeta = x[0]
    tau = x[1]
    if zeta > 500.0 or abs(tau) > 500.0:
        return -np.inf
    for i in range(x.shape[0]):
        if not math.isfinite(x[i]):
            return -np.inf
    omega = x[2:]
    log_prior_w, field = knot_prior_and_field(omega, t, A, R_inv, log_det, log_w, a_kappa, b_kappa)
    ll = semi_log_likelihood(zeta, tau, field, y, t, alpha_min)
    return ll + log_prior_w + _log_prior_theta(zeta, tau)


@njit(cache=True)
def semi_log_likelihood_only(x, args):
    y, t, A, R_inv, log_det, log_w, a_kappa, b_kappa, alpha_min = args
    omega = x[2:]
    _, field = knot_prior_and_field(omega, t, A, R_inv, log_det, log_w, a_kappa, b_kappa)
    return semi_log_likelihood(x[0], x[1], field, y, t, alpha_min)


@njit(cache=True)
def gaussian_log_density(x, args):
    """Standard normal target, used to check the sampler."""
    (prec,) = args
    s = 0.0
    for i in range(x.shape[0]):
        for j in range(x.shape[0]):
            s += x[i] * prec[i, j] * x[j]
    return -0.5 * s


@njit(cache=True)
def discrete_log_density(x, args):
    """Piecewise-constant target on three unit cells ``[0,1), [1,2), [2,3)``."""
    (log_p,) = args
    v = x[0]
    if v < 0.0 or v >= 3.0:
        return -np.inf
    return log_p[int(v)]


@njit(cache=True)
def adaptive_segment(
    target,
    args,
    x,
    lp,
    t_start,
    n_steps,
    block_index,
    block_ptr,
    mu,
    cov,
    log_scale,
    normals,
    uniforms,
    adapt,
    gamma_scale,
    gamma_offset,
    gamma_decay,
    target_accept,
    reg,
    burn_in,
    thin,
    draws,
    draw_lp,
    n_stored,
    scale_trace,
    n_traced,
    accept_count,
    accept_post,
):
    """Run ``n_steps`` iterations of the blocked adaptive random-walk Metropolis.

    Mutates ``x``, ``mu``, ``cov``, ``log_scale``, the output buffers and
    counters in place; returns ``(lp, n_stored, n_traced)``.
    """
    n_blocks = block_ptr.shape[0] - 1
    dmax = cov.shape[1]
    prop = x.copy()
    step = np.empty(dmax)
    for it in range(n_steps):
        t = t_start + it
        gamma = gamma_scale * (t + 1.0 + gamma_offset) ** (-gamma_decay)
        for b in range(n_blocks):
            lo = block_ptr[b]
            d = block_ptr[b + 1] - lo
            S = cov[b, :d, :d].copy()
            for i in range(d):
                S[i, i] += reg
            chol = np.linalg.cholesky(S)
            s = math.exp(log_scale[b])
            for i in range(d):
                acc = 0.0
                for j in range(i + 1):
                    acc += chol[i, j] * normals[it, b, j]
                step[i] = s * acc
            for i in range(x.shape[0]):
                prop[i] = x[i]
            for i in range(d):
                prop[block_index[lo + i]] += step[i]
            lp_prop = target(prop, args)
            if math.isfinite(lp_prop):
                log_ratio = lp_prop - lp
                accept_prob = 1.0 if log_ratio >= 0.0 else math.exp(log_ratio)
            else:
                log_ratio = -np.inf
                accept_prob = 0.0
            if math.log(uniforms[it, b]) < log_ratio:
                for i in range(d):
                    x[block_index[lo + i]] = prop[block_index[lo + i]]
                lp = lp_prop
                accept_count[b] += 1
                if t >= burn_in:
                    accept_post[b] += 1
            if adapt:
                log_scale[b] += gamma * (accept_prob - target_accept)
                for i in range(d):
                    step[i] = x[block_index[lo + i]] - mu[b, i]
                for i in range(d):
                    for j in range(d):
                        cov[b, i, j] += gamma * (step[i] * step[j] - cov[b, i, j])
                for i in range(d):
                    mu[b, i] += gamma * step[i]
        if (t + 1) % thin == 0:
            for b in range(n_blocks):
                scale_trace[n_traced, b] = log_scale[b]
            n_traced += 1
        if t >= burn_in and (t - burn_in) % thin == 0:
            for i in range(x.shape[0]):
                draws[n_stored, i] = x[i]
            draw_lp[n_stored] = lp
            n_stored += 1
    return lp, n_stored, n_traced
