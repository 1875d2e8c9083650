"""Grid representation of a density on [0, 1] obtained by the logistic transform.

``psi = exp(omega) / int exp(omega)`` is represented by the values
``h_l = exp(omega(t_l))`` on a grid ``0 = t_1 < ... < t_L = 1``. Between grid
points ``h`` is linearly interpolated, and the normalizer is the exact
integral of that interpolant (the trapezoid rule), so the resulting
piecewise-linear density integrates to one exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def make_grid(size: int = 101) -> np.ndarray:
    """Equally spaced grid on [0, 1] with exact endpoints."""
    if size < 2:
        raise ValueError("grid needs at least two points")
    grid = np.linspace(0.0, 1.0, size)
    grid[0], grid[-1] = 0.0, 1.0
    return grid


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least two points")
    if grid[0] != 0.0 or grid[-1] != 1.0:
        raise ValueError("grid endpoints must be exactly 0 and 1")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    return grid


@dataclass(frozen=True)
class GridDensity:
    """Piecewise-linear density on [0, 1].

    Attributes
    ----------
    grid : ndarray of shape (L,)
    h : ndarray of shape (L,)
        Positive unnormalized values, ``exp(omega - max(omega))``.
    norm : float
        Trapezoid integral of ``h``.
    log_shift : float
        The ``max(omega)`` removed before exponentiating, so that
        ``log psi_T = omega_T - log_shift - log(norm)``.
    """

    grid: np.ndarray
    h: np.ndarray
    norm: float
    log_shift: float = 0.0

    @property
    def values(self) -> np.ndarray:
        """``psi`` at the grid points."""
        return self.h / self.norm

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.h) - np.log(self.norm)

    @property
    def cell_mass(self) -> np.ndarray:
        dt = np.diff(self.grid)
        return 0.5 * dt * (self.h[:-1] + self.h[1:]) / self.norm

    def _check_u(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < 0) or np.any(u > 1) or np.any(np.isnan(u)):
            raise ValueError("u must lie in [0, 1]")
        return u

    def pdf(self, u):
        # np.interp searches with a locality hint, so sorted input costs one merge pass
        u = self._check_u(u)
        return np.interp(u, self.grid, self.h) / self.norm

    def logpdf(self, u):
        u = self._check_u(u)
        return np.log(np.interp(u, self.grid, self.h)) - np.log(self.norm)

    def _cell(self, u):
        idx = np.searchsorted(self.grid, u, side="right") - 1
        return np.clip(idx, 0, self.grid.size - 2)

    def _slope(self):
        return np.diff(self.h) / np.diff(self.grid)

    def cdf(self, u):
        """Exact integral of the interpolant from 0 to ``u``."""
        u = self._check_u(u)
        lower = np.concatenate(([0.0], np.cumsum(self.cell_mass)))
        idx = self._cell(u)
        x = u - self.grid[idx]
        part = (self.h[idx] * x + 0.5 * self._slope()[idx] * x * x) / self.norm
        return np.clip(lower[idx] + part, 0.0, 1.0)

    def sf(self, u):
        """``1 - cdf(u)``, accumulated from the right end for accuracy near 1."""
        u = self._check_u(u)
        upper = np.concatenate((np.cumsum(self.cell_mass[::-1])[::-1], [0.0]))
        idx = self._cell(u)
        x = self.grid[idx + 1] - u
        part = (self.h[idx + 1] * x - 0.5 * self._slope()[idx] * x * x) / self.norm
        return np.clip(upper[idx + 1] + part, 0.0, 1.0)

    def quantile(self, q):
        """Inverse of :meth:`cdf`, solving the within-cell quadratic exactly."""
        q = np.asarray(q, dtype=float)
        if np.any(q < 0) or np.any(q > 1) or np.any(np.isnan(q)):
            raise ValueError("q must lie in [0, 1]")
        lower = np.concatenate(([0.0], np.cumsum(self.cell_mass)))
        idx = np.clip(np.searchsorted(lower, q, side="right") - 1, 0, self.grid.size - 2)
        r = np.maximum(q - lower[idx], 0.0) * self.norm
        h0 = self.h[idx]
        s = self._slope()[idx]
        # root of s/2 x^2 + h0 x - r = 0 in rationalized form; exact as s -> 0
        disc = np.maximum(h0 * h0 + 2.0 * s * r, 0.0)
        x = 2.0 * r / (h0 + np.sqrt(disc))
        return np.clip(self.grid[idx] + x, self.grid[idx], self.grid[idx + 1])

    def isf(self, p):
        """Inverse of :meth:`sf`: the ``u`` with upper-tail mass ``p``."""
        p = np.asarray(p, dtype=float)
        if np.any(p < 0) or np.any(p > 1) or np.any(np.isnan(p)):
            raise ValueError("p must lie in [0, 1]")
        upper = np.concatenate((np.cumsum(self.cell_mass[::-1])[::-1], [0.0]))
        # upper is decreasing; find cell l with upper[l+1] <= p <= upper[l]
        idx = self.grid.size - 2 - np.searchsorted(upper[::-1][1:], p, side="left")
        idx = np.clip(idx, 0, self.grid.size - 2)
        r = np.maximum(p - upper[idx + 1], 0.0) * self.norm
        h1 = self.h[idx + 1]
        s = self._slope()[idx]
        disc = np.maximum(h1 * h1 - 2.0 * s * r, 0.0)
        x = 2.0 * r / (h1 + np.sqrt(disc))
        return np.clip(self.grid[idx + 1] - x, self.grid[idx], self.grid[idx + 1])


def logistic_transform(omega_T, grid) -> GridDensity:
    """Build the grid density ``L(omega)`` from values of ``omega`` on ``grid``."""
    grid = _check_grid(grid)
    omega_T = np.asarray(omega_T, dtype=float)
    if omega_T.shape != grid.shape:
        raise ValueError(f"omega has shape {omega_T.shape}, grid has {grid.shape}")
    if not np.all(np.isfinite(omega_T)):
        raise ValueError("omega values must be finite")
    shift = float(omega_T.max())
    h = np.exp(omega_T - shift)
    norm = float(np.sum(0.5 * np.diff(grid) * (h[:-1] + h[1:])))
    return GridDensity(grid=grid, h=h, norm=norm, log_shift=shift)
