"""Chart-level model of the degenerate Weil-Petersson tensor.

Per pinching curve the model uses coordinates ``(u_i, theta_i)`` with

    G_uu = 1 + eps u^4,   G_utheta = 0,   G_thetatheta = (1 + eps u^4) u^6 / 4

and orthogonal factors.  ``eps = 0`` is the leading-order representative;
``eps != 0`` selects another member of the same asymptotic classes.
Coordinates are ordered ``[u_1, theta_1, u_2, theta_2, ...]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ChartDegenerateError(ValueError):
    """Raised when a chart operation is requested at or too near a stratum."""


@dataclass(frozen=True)
class ModelMetric:
    genus: int = 2
    epsilon: float = 0.0

    def __post_init__(self):
        if int(self.genus) != self.genus or self.genus < 2:
            raise ValueError("genus must be >= 2")

    @classmethod
    def leading_order(cls, genus: int = 2) -> "ModelMetric":
        return cls(genus, 0.0)

    @classmethod
    def perturbed(cls, epsilon: float, genus: int = 2) -> "ModelMetric":
        return cls(genus, float(epsilon))

    @property
    def curves(self) -> int:
        return 3 * self.genus - 3

    @property
    def dim(self) -> int:
        return 2 * self.curves

    # per-factor profile and its u-derivatives
    def g_uu(self, u, order: int = 0):
        e = self.epsilon
        return [1.0 + e * u**4, 4 * e * u**3, 12 * e * u**2][order]

    def g_tt(self, u, order: int = 0):
        e = self.epsilon
        if order == 0:
            return 0.25 * u**6 + 0.25 * e * u**10
        if order == 1:
            return 1.5 * u**5 + 2.5 * e * u**9
        return 7.5 * u**4 + 22.5 * e * u**8

    def _radii(self, point):
        point = np.asarray(point, dtype=float)
        if point.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} chart coordinates, got {point.shape[-1]}")
        u = point[..., 0::2]
        if np.any(~(u > 0)):
            raise ChartDegenerateError("chart operations need every u_i > 0")
        return u


def metric_tensor(metric: ModelMetric, point) -> np.ndarray:
    """Symmetric ``2(3g-3)`` square tensor at a chart point (broadcasts)."""
    u = metric._radii(point)
    n = metric.dim
    g = np.zeros(u.shape[:-1] + (n, n))
    idx = np.arange(metric.curves)
    g[..., 2 * idx, 2 * idx] = metric.g_uu(u)
    g[..., 2 * idx + 1, 2 * idx + 1] = metric.g_tt(u)
    return g


def metric_derivative(metric: ModelMetric, point) -> np.ndarray:
    """``dG[..., l, i, j] = d G_ij / d x_l`` from the analytic profile."""
    u = metric._radii(point)
    n = metric.dim
    dg = np.zeros(u.shape[:-1] + (n, n, n))
    idx = np.arange(metric.curves)
    dg[..., 2 * idx, 2 * idx, 2 * idx] = metric.g_uu(u, 1)
    dg[..., 2 * idx, 2 * idx + 1, 2 * idx + 1] = metric.g_tt(u, 1)
    return dg


def christoffel_from(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """``Gamma[k, i, j] = 1/2 G^{kl} (G_il,j + G_lj,i - G_ij,l)``."""
    ginv = np.linalg.inv(g)
    dl_gij = dg  # [l, i, j] = d_l G_ij
    dj_gil = np.einsum("...jil->...lij", dg)  # d_j G_il
    di_glj = np.einsum("...ilj->...lij", dg)  # d_i G_lj
    bracket = dj_gil + di_glj - dl_gij
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, bracket)


def christoffel(metric: ModelMetric, point) -> np.ndarray:
    """Christoffel symbols ``Gamma^k_ij`` from analytic tensor derivatives."""
    return christoffel_from(metric_tensor(metric, point), metric_derivative(metric, point))


def factor_christoffel(metric: ModelMetric, u) -> np.ndarray:
    """Christoffel symbols of a single ``(u, theta)`` factor, shape ``(..., 2, 2, 2)``.

    The factors are orthogonal and each block depends only on its own ``u``,
    so these are exactly the diagonal blocks of ``christoffel``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ChartDegenerateError("chart operations need u > 0")
    a, a1 = metric.g_uu(u), metric.g_uu(u, 1)
    b, b1 = metric.g_tt(u), metric.g_tt(u, 1)
    gam = np.zeros(u.shape + (2, 2, 2))
    gam[..., 0, 0, 0] = 0.5 * a1 / a
    gam[..., 0, 1, 1] = -0.5 * b1 / a
    gam[..., 1, 0, 1] = gam[..., 1, 1, 0] = 0.5 * b1 / b
    return gam


def christoffel_fd(metric: ModelMetric, point, rel_step: float = 1e-5) -> np.ndarray:
    """Finite-difference reference: central differences of ``metric_tensor``.

    Step ``h = rel_step * min(u)`` in every coordinate direction.
    """
    point = np.asarray(point, dtype=float)
    u = metric._radii(point)
    h = rel_step * u.min(axis=-1)
    n = metric.dim
    dg = np.empty(point.shape[:-1] + (n, n, n))
    for l in range(n):
        e = np.zeros(n)
        e[l] = 1.0
        step = h[..., None] * e
        dg[..., l, :, :] = (
            metric_tensor(metric, point + step) - metric_tensor(metric, point - step)
        ) / (2 * h[..., None, None])
    return christoffel_from(metric_tensor(metric, point), dg)


def gauss_curvature_factor(metric: ModelMetric, u) -> np.ndarray:
    """Gauss curvature of one factor ``E du^2 + G dtheta^2`` (E, G functions of u).

    ``K = -(1 / (2 sqrt(EG))) d/du (G_u / sqrt(EG))``; for the leading-order
    profile this is ``-6 / u^2``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise ValueError("curvature needs u > 0")
    e, e1 = metric.g_uu(u), metric.g_uu(u, 1)
    g, g1, g2 = metric.g_tt(u), metric.g_tt(u, 1), metric.g_tt(u, 2)
    w = np.sqrt(e * g)
    w1 = 0.5 * (e1 * g + e * g1) / w
    return -(g2 * w - g1 * w1) / (2.0 * w**3)


def loglog_slope(x, y) -> float:
    """Least-squares slope of ``log|y|`` against ``log x``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.abs(np.asarray(y, dtype=float)))
    return float(np.polyfit(lx, ly, 1)[0])


def order_exponents(metric: ModelMetric, u_min: float = 1e-2, u_max: float = 1e-1, n: int = 40):
    """Log-log slopes of ``G_thetatheta`` and ``|Gamma^u_thetatheta|`` in the first factor.

    Other factors sit at ``u = 1``.  Returns ``(slope_G, slope_Gamma)``.
    """
    us = np.geomspace(u_min, u_max, n)
    pts = np.ones((n, metric.dim))
    pts[:, 1::2] = 0.0
    pts[:, 0] = us
    g = metric_tensor(metric, pts)[:, 1, 1]
    gam = christoffel(metric, pts)[:, 0, 1, 1]
    return loglog_slope(us, g), loglog_slope(us, gam)
