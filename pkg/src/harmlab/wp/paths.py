"""Numerical geodesic boundary-value solvers for one model factor.

Two independent routes that use nothing but the metric profile:

* ``relax_path``: endpoint-pinned discrete-path energy minimization
  (damped Newton on the banded Hessian), refined dyadically with Richardson
  extrapolation in ``path_distance``.
* ``grid_distance``: Dijkstra on a dense ``(u, theta)`` grid with a wide
  stencil of primitive offsets.

Both serve as references for the closed-form routines in ``wp.cusp``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from harmlab.wp.metric import ModelMetric

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


def segment_length(metric: ModelMetric, a, b):
    """Length of the straight coordinate segment from ``a`` to ``b`` (arrays ``(..., 2)``)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    du = b[..., 0] - a[..., 0]
    dth = b[..., 1] - a[..., 1]
    u = a[..., 0][..., None] + _GL_X * du[..., None]
    speed = np.sqrt(metric.g_uu(u) * du[..., None] ** 2 + metric.g_tt(u) * dth[..., None] ** 2)
    return np.sum(_GL_W * speed, axis=-1)


def _pin(p, q):
    p = np.array(p, dtype=float)
    q = np.array(q, dtype=float)
    # a cusp endpoint has no twist; any value is the same point
    if p[0] == 0:
        p[1] = q[1] if q[0] > 0 else 0.0
    if q[0] == 0:
        q[1] = p[1]
    return p, q


def _energy_terms(metric, x):
    a, b = x[:-1], x[1:]
    m = 0.5 * (a[:, 0] + b[:, 0])
    du = b[:, 0] - a[:, 0]
    dt = b[:, 1] - a[:, 1]
    return m, du, dt


def _energy(metric, x):
    m, du, dt = _energy_terms(metric, x)
    return np.sum(metric.g_uu(m) * du**2 + metric.g_tt(m) * dt**2)


@dataclass
class RelaxedPath:
    points: np.ndarray
    length: float
    energy: float
    iterations: int


def relax_path(p, q, metric: ModelMetric | None = None, segments: int = 64, init=None,
               max_iter: int = 200) -> RelaxedPath:
    """Minimize ``sum_k |x_{k+1} - x_k|^2_G`` with both ends pinned.

    Each term uses the metric at the segment midpoint.  Damped Newton steps
    solve the block-tridiagonal system in banded form.
    """
    metric = metric or ModelMetric.leading_order()
    p, q = _pin(p, q)
    k = segments
    if init is None:
        t = np.linspace(0.0, 1.0, k + 1)[:, None]
        x = (1 - t) * p + t * q
    else:
        x = np.array(init, dtype=float)
        k = x.shape[0] - 1
    n = 2 * (k - 1)
    lam = 1e-6
    energy = _energy(metric, x)
    it = 0
    for it in range(1, max_iter + 1):
        m, du, dt = _energy_terms(metric, x)
        A, A1, A2 = metric.g_uu(m), metric.g_uu(m, 1), metric.g_uu(m, 2)
        B, B1, B2 = metric.g_tt(m), metric.g_tt(m, 1), metric.g_tt(m, 2)
        common = 0.5 * A1 * du**2 + 0.5 * B1 * dt**2
        # per-term gradient with respect to (a, alpha, b, beta)
        g_a = common - 2 * A * du
        g_b = common + 2 * A * du
        g_al = -2 * B * dt
        g_be = 2 * B * dt
        curv = 0.25 * A2 * du**2 + 0.25 * B2 * dt**2
        h_aa = curv - 2 * A1 * du + 2 * A
        h_bb = curv + 2 * A1 * du + 2 * A
        h_ab = curv - 2 * A
        h_tt = 2 * B
        h_ut = B1 * dt  # d2/(da dbeta) = d2/(db dbeta) = -d2/(da dalpha) = -d2/(db dalpha)
        grad = np.zeros((k + 1, 2))
        np.add.at(grad[:, 0], np.arange(k), g_a)
        np.add.at(grad[:, 0], np.arange(1, k + 1), g_b)
        np.add.at(grad[:, 1], np.arange(k), g_al)
        np.add.at(grad[:, 1], np.arange(1, k + 1), g_be)
        gvec = grad[1:-1].ravel()
        # dense-in-band assembly over the 4x4 term blocks
        H = np.zeros((k + 1, 2, k + 1, 2))
        i = np.arange(k)
        j = i + 1
        H[i, 0, i, 0] += h_aa
        H[j, 0, j, 0] += h_bb
        H[i, 0, j, 0] += h_ab
        H[j, 0, i, 0] += h_ab
        H[i, 1, i, 1] += h_tt
        H[j, 1, j, 1] += h_tt
        H[i, 1, j, 1] -= h_tt
        H[j, 1, i, 1] -= h_tt
        H[i, 0, i, 1] -= h_ut
        H[i, 1, i, 0] -= h_ut
        H[j, 0, j, 1] += h_ut
        H[j, 1, j, 0] += h_ut
        H[i, 0, j, 1] += h_ut
        H[j, 1, i, 0] += h_ut
        H[j, 0, i, 1] -= h_ut
        H[i, 1, j, 0] -= h_ut
        Hm = H[1:-1, :, 1:-1, :].reshape(n, n)
        diag = np.maximum(np.abs(np.diag(Hm)), 1e-300)
        gnorm = np.sqrt(np.sum(gvec**2 / diag))
        if gnorm < 1e-15 * max(energy, 1e-300) ** 0.5:
            break
        accepted = False
        for _ in range(60):
            Hd = Hm + lam * np.diag(diag)
            ab = np.zeros((7, n))
            for off in range(-3, 4):
                d = np.diagonal(Hd, off)
                if off >= 0:
                    ab[3 - off, off:] = d
                else:
                    ab[3 - off, : n + off] = d
            try:
                step = -solve_banded((3, 3), ab, gvec)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = x.copy()
            trial[1:-1] += step.reshape(k - 1, 2)
            if np.all(trial[:, 0] > 0) or np.all(trial[1:-1, 0] >= 0):
                e_new = _energy(metric, trial)
                if e_new <= energy and np.all(trial[1:-1, 0] >= 0):
                    accepted = True
                    break
            lam *= 10
        if not accepted:
            break
        change = energy - e_new
        x, energy = trial, e_new
        lam = max(lam / 10, 1e-12)
        if change <= 1e-16 * energy and np.max(np.abs(step)) < 1e-14:
            break
    length = float(np.sum(segment_length(metric, x[:-1], x[1:])))
    return RelaxedPath(points=x, length=length, energy=float(energy), iterations=it)


def path_distance(p, q, metric: ModelMetric | None = None, segments: int = 16,
                  tol: float = 1e-6, max_segments: int = 4096) -> float:
    """Relaxed-path length refined ``K -> 2K`` until successive values differ
    by less than ``tol`` (relative); returns the Richardson-extrapolated value."""
    metric = metric or ModelMetric.leading_order()
    p, q = _pin(p, q)
    prev = relax_path(p, q, metric, segments)
    k = segments
    while True:
        k2 = 2 * k
        # prolong the previous path as the initial guess
        mid = 0.5 * (prev.points[:-1] + prev.points[1:])
        init = np.empty((k2 + 1, 2))
        init[0::2] = prev.points
        init[1::2] = mid
        cur = relax_path(p, q, metric, init=init)
        extrap = cur.length + (cur.length - prev.length) / 3.0
        scale = max(abs(cur.length), 1e-300)
        if abs(cur.length - prev.length) < tol * scale or k2 >= max_segments:
            return float(extrap)
        prev, k = cur, k2


def _stencil(radius: int):
    offs = []
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            if (di, dj) != (0, 0) and math.gcd(abs(di), abs(dj)) == 1:
                offs.append((di, dj))
    return offs


def _path_window(p, q, metric, budget, margin=0.15):
    # bounding box of a coarse relaxed path, gridded with cells of roughly
    # equal metric size in both directions at the path's median radius
    x = relax_path(p, q, metric, segments=32).points
    lo, hi = x.min(0), x.max(0)
    span = np.maximum(hi - lo, 1e-9)
    u_range = (max(0.0, lo[0] - margin * span[0]), hi[0] + margin * span[0])
    theta_range = (lo[1] - margin * span[1], hi[1] + margin * span[1])
    ubar = max(float(np.median(x[:, 0])), 1e-6)
    len_u = u_range[1] - u_range[0]
    len_t = (theta_range[1] - theta_range[0]) * np.sqrt(metric.g_tt(ubar) / metric.g_uu(ubar))
    h = np.sqrt(len_u * len_t / budget)
    cap = max(15, budget // 15)
    n_u = int(np.clip(len_u / h, 15, cap))
    n_t = int(np.clip(len_t / h, 15, cap))
    return u_range, theta_range, n_u, n_t


def grid_distance(p, q, metric: ModelMetric | None = None, n_u: int = 81, n_theta: int = 81,
                  stencil: int = 6, u_margin: float = 0.25, theta_margin: float = 0.25,
                  u_range=None, theta_range=None, window: str = "fixed", budget: int = 6561):
    """Shortest grid path between ``p`` and a point ``q`` (or a batch of targets).

    Grid lines pass exactly through the endpoints; edge weights are exact
    straight-segment lengths under ``metric``.  Row ``u = 0`` is included
    when the window reaches the cusp, where twists cost nothing.

    ``window="path"`` (single target only) fits the window to a coarse
    relaxed path and spends about ``budget`` nodes on it, sized so cells are
    near-isotropic in the metric; it is far more accurate for pairs whose
    geodesic dips well below both endpoints.
    """
    metric = metric or ModelMetric.leading_order()
    if window == "path":
        if np.ndim(q) > 1:
            raise ValueError("window='path' needs a single target point")
        u_range, theta_range, n_u, n_theta = _path_window(p, q, metric, budget)
    elif window != "fixed":
        raise ValueError("window must be 'fixed' or 'path'")
    p = np.asarray(p, dtype=float)
    qs = np.atleast_2d(np.asarray(q, dtype=float))
    pts = np.vstack([p, qs])
    pts = np.array([_pin(x, pts[0] if x is not pts[0] else pts[1])[0] for x in pts])
    us = pts[:, 0]
    ths = pts[:, 1]
    if u_range is None:
        # geodesics bend toward the cusp, so the window always reaches u = 0
        span = max(us.max() - us.min(), us.max() * 0.5, 1e-12)
        u_range = (0.0, us.max() + u_margin * span)
    if theta_range is None:
        span = max(ths.max() - ths.min(), 1e-12)
        theta_range = (ths.min() - theta_margin * span, ths.max() + theta_margin * span)
    ugrid = np.unique(np.concatenate([np.linspace(*u_range, n_u), us]))
    tgrid = np.unique(np.concatenate([np.linspace(*theta_range, n_theta), ths]))
    nu, nt = ugrid.size, tgrid.size
    rows, cols, wts = [], [], []
    ii, jj = np.meshgrid(np.arange(nu), np.arange(nt), indexing="ij")
    for di, dj in _stencil(stencil):
        i2, j2 = ii + di, jj + dj
        ok = (i2 >= 0) & (i2 < nu) & (j2 >= 0) & (j2 < nt)
        a = np.stack([ugrid[ii[ok]], tgrid[jj[ok]]], -1)
        b = np.stack([ugrid[i2[ok]], tgrid[j2[ok]]], -1)
        w = segment_length(metric, a, b)
        rows.append(ii[ok] * nt + jj[ok])
        cols.append(i2[ok] * nt + j2[ok])
        wts.append(np.maximum(w, 1e-300))
    graph = coo_matrix(
        (np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))), shape=(nu * nt,) * 2
    ).tocsr()

    def node(x):
        return int(np.searchsorted(ugrid, x[0])) * nt + int(np.searchsorted(tgrid, x[1]))

    dist = dijkstra(graph, indices=node(pts[0]))
    out = np.array([dist[node(x)] for x in pts[1:]])
    return out if np.ndim(q) > 1 else float(out[0])
