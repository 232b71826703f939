"""Sobolev-norm distances between measures via truncated Fourier quadrature.

The squared norm of a signed measure lambda is the integral of
|lambda_hat(theta)|^2 (1 + |theta|^2)^gamma over R^d, with gamma < -d/2 so the
weight is integrable; here it is approximated by tensor-product midpoint
quadrature on the ball |theta| <= cutoff.  Transforms use the
exp(-i theta' x) kernel throughout, so valid inputs are Hermitian:
value(-theta) = conj(value(theta)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "FrequencyGrid",
    "default_gamma",
    "sobolev_norm_sq",
    "filter_error",
    "RateFit",
    "rate_fit",
    "slope_confidence",
]


def default_gamma(dimension: int, alpha: float) -> float:
    """Exponent strictly inside the admissible range for the convergence-rate bounds."""
    return -(dimension / 2.0 + 2.0 * alpha) - 0.5


def _symmetric_axis(cutoff: float, spacing: float) -> np.ndarray:
    """Midpoint nodes on [-cutoff, cutoff], exactly symmetric under negation."""
    half = int(round(cutoff / spacing))
    if half < 1:
        raise ValueError("cutoff must exceed spacing")
    positive = (np.arange(half) + 0.5) * spacing
    return np.concatenate([-positive[::-1], positive])


@dataclass(frozen=True)
class FrequencyGrid:
    """Midpoint quadrature nodes on |theta| <= cutoff with the Sobolev weight baked in."""

    nodes: np.ndarray            # (M, d)
    quad_weights: np.ndarray     # (M,)
    gamma: float
    cutoff: float
    spacing: float
    mirror: np.ndarray           # (M,) index of -theta_m
    sobolev_weights: np.ndarray  # (M,) quad weight times (1+|theta|^2)^gamma

    @classmethod
    def build(
        cls,
        dimension: int,
        *,
        alpha: float | None = None,
        gamma: float | None = None,
        cutoff: float = 40.0,
        spacing: float = 0.05,
    ) -> "FrequencyGrid":
        if gamma is None:
            if alpha is None:
                raise ValueError("provide either gamma or alpha for the default rule")
            gamma = default_gamma(dimension, alpha)
        if gamma >= -dimension / 2.0:
            raise ValueError("gamma must be < -d/2 for an integrable weight")
        if dimension not in (1, 2):
            raise ValueError("metric grids support dimensions 1 and 2 only")
        axis = _symmetric_axis(cutoff, spacing)
        m = axis.size
        if dimension == 1:
            nodes = axis.reshape(-1, 1)
            mirror = np.arange(m, dtype=np.int64)[::-1].copy()
        else:
            ii, jj = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
            ii, jj = ii.ravel(), jj.ravel()
            full = np.column_stack([axis[ii], axis[jj]])
            keep = np.einsum("ij,ij->i", full, full) <= cutoff**2
            position = np.full(m * m, -1, dtype=np.int64)
            position[np.flatnonzero(keep)] = np.arange(int(keep.sum()))
            mirror_flat = (m - 1 - ii) * m + (m - 1 - jj)
            nodes = full[keep]
            mirror = position[mirror_flat[keep]]
            # the mask is symmetric under negation, so every mirror is kept
            assert np.all(mirror >= 0)
        quad = np.full(nodes.shape[0], spacing**dimension)
        sob = quad * (1.0 + np.einsum("ij,ij->i", nodes, nodes)) ** gamma
        return cls(
            nodes=nodes,
            quad_weights=quad,
            gamma=float(gamma),
            cutoff=float(cutoff),
            spacing=float(spacing),
            mirror=mirror,
            sobolev_weights=sob,
        )

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def weight_mass(self) -> float:
        """Quadrature value of integral (1+|theta|^2)^gamma over the grid."""
        return float(self.sobolev_weights.sum())


def sobolev_norm_sq(values, grid: FrequencyGrid, hermitian_tol: float = 1e-8) -> float:
    """Quadrature of |values|^2 against the Sobolev weight.

    ``values`` are transform samples on ``grid.nodes`` and must satisfy
    value(-theta) = conj(value(theta)) within ``hermitian_tol``.
    """
    v = np.asarray(values, dtype=complex)
    if v.shape != (grid.node_count,):
        raise ValueError("transform values must match the grid nodes")
    defect = float(np.max(np.abs(v[grid.mirror] - np.conj(v)))) if v.size else 0.0
    if defect > hermitian_tol * max(1.0, float(np.max(np.abs(v)))):
        raise ValueError(f"transform is not Hermitian within tolerance ({defect:.3e})")
    return float(np.sum(grid.sobolev_weights * np.abs(v) ** 2))


def filter_error(values_a, values_b, grid: FrequencyGrid) -> float:
    """Sobolev distance between two transforms sampled on the same grid."""
    a = np.asarray(values_a, dtype=complex)
    b = np.asarray(values_b, dtype=complex)
    if a.shape != b.shape or a.shape != (grid.node_count,):
        raise ValueError("both transforms must be sampled on the identical grid")
    return float(np.sqrt(sobolev_norm_sq(a - b, grid)))


class RateFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


def rate_fit(pairs) -> RateFit:
    """Ordinary least squares of log(error) on log(n) over (n, error) pairs."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
        raise ValueError("rate_fit needs at least 3 (n, error) pairs")
    if np.any(arr <= 0.0):
        raise ValueError("rate_fit requires positive sizes and errors")
    x = np.log(arr[:, 0])
    y = np.log(arr[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RateFit(float(slope), float(intercept), float(np.sqrt(np.mean(resid**2))))


def slope_confidence(pairs, z: float = 1.96) -> tuple[float, float, float]:
    """(slope, ci_low, ci_high) from the OLS standard error of the slope."""
    arr = np.asarray(pairs, dtype=float)
    fit = rate_fit(arr)
    x = np.log(arr[:, 0])
    y = np.log(arr[:, 1])
    resid = y - (fit.slope * x + fit.intercept)
    dof = max(1, x.size - 2)
    se = float(np.sqrt(np.sum(resid**2) / dof / np.sum((x - x.mean()) ** 2)))
    return fit.slope, fit.slope - z * se, fit.slope + z * se
