"""Cumulative distribution transform against the uniform reference on [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DegenerateError, Measure1D

MODES = ("exact", "linear-interp")


@dataclass(frozen=True)
class QuantileGrid:
    """Midpoint grid ``t_j = (j - 1/2) / n_t``, ``j = 1..n_t``."""

    n_t: int

    def __post_init__(self):
        if int(self.n_t) != self.n_t or self.n_t < 1:
            raise ValueError("n_t must be a positive integer")

    @property
    def samples(self) -> np.ndarray:
        return (np.arange(self.n_t) + 0.5) / self.n_t


def cdf_eval(m: Measure1D, s: float) -> float:
    """``F(s) = mu((-inf, s])``."""
    idx = np.searchsorted(m.atoms, s, side="right")
    return float(m.weights[:idx].sum())


def _cumulative(m: Measure1D) -> np.ndarray:
    total = m.weights.sum()
    if total <= 0:
        raise DegenerateError("measure has zero mass")
    return np.cumsum(m.weights) / total


def quantile_eval(m: Measure1D, t):
    """``inf{s : F(s) > t}`` for ``t`` in (0, 1); first atom whose cumulative weight exceeds ``t``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr <= 0) | (t_arr >= 1)):
        raise ValueError("quantile level must lie in the open interval (0, 1)")
    idx = np.searchsorted(_cumulative(m), t_arr, side="right")
    out = m.atoms[np.minimum(idx, len(m) - 1)]
    return float(out) if np.ndim(t) == 0 else out


def _bin_edges(atoms: np.ndarray) -> np.ndarray:
    if atoms.size == 1:
        return np.array([atoms[0], atoms[0]])
    mids = 0.5 * (atoms[1:] + atoms[:-1])
    return np.concatenate(([atoms[0] - (mids[0] - atoms[0])], mids,
                           [atoms[-1] + (atoms[-1] - mids[-1])]))


def interp_quantile(m: Measure1D, t) -> np.ndarray:
    """Generalized inverse of the piecewise-linear CDF of a binned measure.

    Each atom is read as a bin center; bin edges sit midway between
    neighbouring atoms and the mass of a bin is spread uniformly over it.
    """
    t = np.asarray(t, dtype=float)
    edges = _bin_edges(m.atoms)
    C = np.concatenate(([0.0], _cumulative(m)))
    j = np.clip(np.searchsorted(C, t, side="right"), 1, len(C) - 1)
    lo, hi = C[j - 1], C[j]
    step = np.where(hi > lo, hi - lo, 1.0)
    frac = np.clip((t - lo) / step, 0.0, 1.0)
    return edges[j - 1] + frac * (edges[j] - edges[j - 1])


def cdt_sample(m: Measure1D, grid: QuantileGrid, mode: str = "exact") -> np.ndarray:
    """Sampled CDT ``mu_hat(t_j) = F^{[-1]}(t_j)`` on the midpoint grid."""
    if mode == "exact":
        return quantile_eval(m, grid.samples)
    if mode == "linear-interp":
        return interp_quantile(m, grid.samples)
    raise ValueError(f"unknown CDT mode {mode!r}")


def cdt_matrix(values: np.ndarray, weights: np.ndarray, grid: QuantileGrid) -> np.ndarray:
    """Exact CDTs of many empirical measures sharing one weight vector.

    ``values`` has shape ``(K, n)``: column ``i`` holds the atoms of measure
    ``i``.  Returns the ``(n_t, n)`` table of sampled quantiles.  Equal to
    calling :func:`cdt_sample` per column, without building the measures.
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, axis=0, kind="stable")
    sorted_vals = np.take_along_axis(values, order, axis=0)
    cum = np.cumsum(np.asarray(weights, dtype=float)[order], axis=0)
    t = grid.samples
    out = np.empty((t.size, values.shape[1]))
    K = values.shape[0]
    for i in range(values.shape[1]):
        idx = np.searchsorted(cum[:, i], t, side="right")
        out[:, i] = sorted_vals[np.minimum(idx, K - 1), i]
    return out


def wasserstein2(m1: Measure1D, m2: Measure1D, grid: QuantileGrid, mode: str = "exact") -> float:
    """Midpoint-rule approximation of ``|| mu_hat - nu_hat ||_rho``."""
    d = cdt_sample(m1, grid, mode) - cdt_sample(m2, grid, mode)
    return float(np.sqrt(np.mean(d * d)))
