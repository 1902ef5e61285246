"""Closed-form geodesics of one completed cusp factor.

A cusp factor carries the metric ``du^2 + (u^6 / 4) dtheta^2`` on
``u > 0, theta in R``; the completion adds a single point at ``u = 0`` where
every twist value is identified.  The metric is a warped product with
warping function ``f(u) = u^3 / 2``, so unit-speed geodesics conserve the
Clairaut quantity ``c = f(u)^2 theta'`` and the closest approach to the cusp
is ``u* = (2|c|)^(1/3)``.

Writing ``u = u* (1 + Y^2)^(1/6)`` turns the twist swept from the turning
point and the arc length from the turning point into

    twist(Y) = (2/3) J(Y) / u*^2
    arc(Y)   = sqrt(u^6 - u*^6) / u^2 - u* (2/3) J(Y)

with ``J(Y) = int_0^Y (1 + y^2)^(-4/3) dy``, an incomplete beta function.
Every routine here is vectorized and broadcasts over leading axes of
``(..., 2)`` coordinate arrays ``[u, theta]``.  Points with ``u == 0`` carry
``theta = nan``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import beta, betainc

J_MAX = 0.5 * beta(0.5, 5.0 / 6.0)

_RADIAL, _TURNING, _MONOTONE = 0, 1, 2


def _j(q):
    """``J`` as a function of ``q = Y^2``."""
    return J_MAX * betainc(0.5, 5.0 / 6.0, q / (1.0 + q))


def _jtail(q):
    """``J_MAX - J`` without cancellation for large ``q``."""
    return J_MAX * betainc(5.0 / 6.0, 0.5, 1.0 / (1.0 + q))


def _q_from_log_ratio(log_ratio):
    # Y^2 = (u / u*)^6 - 1, clipped so that expm1 stays finite
    return np.expm1(6.0 * np.minimum(log_ratio, 110.0))


_GL8_X, _GL8_W = np.polynomial.legendre.leggauss(8)


def _j_increment(q1, dq):
    """``J(Y2) - J(Y1)`` by Gauss-Legendre quadrature, for ``Y2`` close to ``Y1``.

    ``dq = Y2^2 - Y1^2`` is passed separately so that nearly equal radii do
    not lose the difference to cancellation.
    """
    y1 = np.sqrt(q1)
    y2 = np.sqrt(np.maximum(q1 + dq, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        dy = np.where(y1 + y2 > 0, dq / (y1 + y2), 0.0)
    y = y1[..., None] + 0.5 * dy[..., None] * (_GL8_X + 1.0)
    return 0.5 * dy * np.sum(_GL8_W * (1.0 + y * y) ** (-4.0 / 3.0), axis=-1)


def _twist_sum(q1, q2, same_side, dq=None):
    """Stable ``J(Y1) + J(Y2)`` or, where ``same_side``, ``J(Y2) - J(Y1)``.

    ``dq``, if given, is an accurate ``q2 - q1``; close pairs then use
    quadrature instead of differencing two nearly equal values.
    """
    total = _j(q1) + _j(q2)
    tail_diff = _jtail(q1) - _jtail(q2)
    head_diff = _j(q2) - _j(q1)
    use_tail = np.minimum(q1, q2) > 1.0
    diff = np.where(use_tail, tail_diff, head_diff)
    if dq is not None:
        # the integrand varies on the scale sqrt(1 + Y^2)
        close = np.abs(dq) <= 0.5 * (1.0 + q1)
        if np.any(close & same_side):
            diff = np.where(close, _j_increment(q1, dq), diff)
    return np.where(same_side, diff, total)


@dataclass(frozen=True)
class CuspGeodesic:
    """Solved geodesic data for a batch of endpoint pairs.

    ``kind`` is 0 for radial segments (constant twist or through the cusp),
    1 when the geodesic passes a turning point strictly between the ends, and
    2 when ``u`` is monotone along it.  ``u_star`` is the turning radius
    (0 for radial kinds) and ``direction`` the sign of the twist increment.
    ``q_p`` and ``q_q`` hold ``Y^2 = (u / u*)^6 - 1`` at the two ends, kept
    separately because recomputing them from ``u_star`` loses accuracy when
    an end sits near the turning radius.
    """

    p: np.ndarray
    q: np.ndarray
    kind: np.ndarray
    u_star: np.ndarray
    direction: np.ndarray
    length: np.ndarray
    q_p: np.ndarray
    q_q: np.ndarray


def _twist_residual(v, m, big, log_target, turning, log_ratio):
    """``log twist - log target`` and its derivative in ``v = log Y`` at the smaller radius.

    ``Y_m^2 = (m / u*)^6 - 1``; working in ``log Y_m`` keeps the residual
    smooth where the turning point approaches the smaller endpoint.
    """
    q_m = np.exp(np.minimum(2.0 * v, 1400.0))
    lp = np.log1p(q_m)
    q_big = np.expm1(np.minimum(6.0 * log_ratio + lp, 700.0))
    s = _twist_sum(q_m, q_big, ~turning, (1.0 + q_m) * np.expm1(6.0 * log_ratio))
    y_m = np.sqrt(q_m)
    y_big = np.sqrt(q_big)
    # dJ/dv for each endpoint: (1 + Y^2)^(-4/3) dY/dv
    dj_m = (1.0 + q_m) ** (-4.0 / 3.0) * y_m
    with np.errstate(divide="ignore", invalid="ignore"):
        dy_big = np.where(y_big > 0, (1.0 + q_big) * q_m / ((1.0 + q_m) * y_big), 0.0)
    dj_big = (1.0 + q_big) ** (-4.0 / 3.0) * dy_big
    ds = np.where(turning, dj_m + dj_big, dj_big - dj_m)
    # z = log(u*/m) = -log1p(q_m) / 6
    z = -lp / 6.0
    dz = -q_m / (3.0 * (1.0 + q_m))
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log((2.0 / 3.0) * s) - 2.0 * z - 2.0 * np.log(m) - log_target
        slope = ds / s - 2.0 * dz
    return value, slope


def _bracketed_root(func, lo, hi, f_lo, f_hi, args, x0=None, max_iter=200, exp_bisect=False):
    """Vectorized safeguarded Newton on sign-changing brackets.

    ``func`` returns ``(value, derivative)``.  A Newton step is taken when it
    stays inside the bracket and the previous step shrank fast enough;
    otherwise the element bisects, in ``exp(x)`` when ``exp_bisect`` is set.
    Elements stop once the predicted step or the bracket drops below
    ``1e-12`` (relative to ``max(|x|, 1)``).
    """
    lo, hi, f_lo, f_hi = (np.array(x, dtype=float) for x in (lo, hi, f_lo, f_hi))
    # orient so that f(lo) < 0 < f(hi)
    swap = f_lo > 0
    lo, hi = np.where(swap, hi, lo), np.where(swap, lo, hi)
    done = (f_lo == 0) | (f_hi == 0)
    start = 0.5 * (lo + hi) if x0 is None else np.array(x0, dtype=float)
    x = np.where(f_lo == 0, np.where(swap, hi, lo), np.where(f_hi == 0, np.where(swap, lo, hi), start))
    step_old = np.abs(hi - lo)
    active = ~done
    idx = np.flatnonzero(active)
    fx, dfx = func(x[idx], *_take(args, idx))
    fval = np.zeros_like(x)
    dval = np.ones_like(x)
    fval[idx], dval[idx] = fx, dfx
    neg = fx < 0
    lo[idx] = np.where(neg, x[idx], lo[idx])
    hi[idx] = np.where(neg, hi[idx], x[idx])
    active[idx] = fx != 0
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xs, f, df, a, b = x[idx], fval[idx], dval[idx], lo[idx], hi[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = xs - f / df
        ok = (
            np.isfinite(newton)
            & ((newton - a) * (newton - b) <= 0)
            & (np.abs(2 * f) <= np.abs(step_old[idx] * df))
        )
        if exp_bisect:
            top, bot = np.maximum(a, b), np.minimum(a, b)
            mid = top + np.log(0.5 * (1.0 + np.exp(bot - top)))
        else:
            mid = 0.5 * (a + b)
        xn = np.where(ok, newton, mid)
        step_old[idx] = np.abs(xn - xs)
        fn, dfn = func(xn, *_take(args, idx))
        neg = fn < 0
        lo[idx] = np.where(neg, xn, a)
        hi[idx] = np.where(neg, b, xn)
        x[idx], fval[idx], dval[idx] = xn, fn, dfn
        # the residual has a rounding floor near 1e-13, so steps below this are noise
        tol = 1e-12 * np.maximum(np.abs(xn), 1.0)
        # a predicted Newton step below tolerance ends the element too
        small = np.abs(fn) <= tol * np.abs(dfn)
        active[idx] = ~small & (np.abs(hi[idx] - lo[idx]) > tol) & (step_old[idx] > tol)
    return x


def _take(args, idx):
    return tuple(np.asarray(v)[idx] if np.ndim(v) else v for v in args)


def _solve_clairaut(a, b, delta):
    """Turning radius and branch for positive radii and positive twist gap."""
    m = np.minimum(a, b)
    big = np.maximum(a, b)
    log_ratio = np.log(big / m)
    q_switch = _q_from_log_ratio(log_ratio)
    delta_switch = (2.0 / 3.0) * _j(q_switch) / m**2
    turning = delta >= delta_switch
    args = (m, big, np.log(delta), turning, log_ratio)

    # The twist is increasing in v on the turning branch and decreasing on
    # the monotone one.  v_lo sits at Y_m ~ 1e-17, i.e. u* = m to rounding.
    sign = np.where(turning, 1.0, -1.0)
    v_lo = np.full(m.shape, -40.0)
    f_lo, s_lo = _twist_residual(v_lo, *args)
    # a gap this close to the switch value puts the turning point at m
    at_lo = sign * f_lo >= 0
    # small-gap asymptotics (u* << m) give the starting guess and the upper bracket
    coef = 0.4 * (m**-5.0 - big**-5.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        guess = np.where(
            turning,
            np.sqrt(4.0 * J_MAX / (3.0 * delta)),
            np.cbrt(delta / np.where(coef > 0, coef, 1.0)),
        )
        v_guess = 0.5 * np.log(np.expm1(6.0 * np.log(m / np.minimum(guess, m))))
    v_guess = np.where(np.isfinite(v_guess), v_guess, 0.0)
    v_hi = np.maximum(v_guess, v_lo + 1.0) + 1.0
    for _ in range(200):
        f_hi = _twist_residual(v_hi, *args)[0]
        bad = (sign * f_hi < 0) & ~at_lo
        if not bad.any():
            break
        v_hi = np.where(bad, v_hi + 2.0, v_hi)
    # near the switch the residual is affine in Y_m = exp(v); extrapolate from v_lo
    with np.errstate(divide="ignore", invalid="ignore"):
        v_near = v_lo + np.log(1.0 - f_lo / s_lo)
    inside = (v_guess > v_lo) & (v_guess < v_hi)
    v_guess = np.where(inside, v_guess, 0.5 * (v_lo + v_hi))
    v_near = np.where(np.isfinite(v_near), np.clip(v_near, v_lo, v_hi), v_guess)
    todo = np.flatnonzero(~at_lo)
    f_far = np.abs(_twist_residual(v_guess[todo], *_take(args, todo))[0])
    f_near = np.abs(_twist_residual(v_near[todo], *_take(args, todo))[0])
    v0 = v_guess.copy()
    v0[todo] = np.where(f_near < f_far, v_near[todo], v_guess[todo])
    v = np.full(m.shape, -np.inf)
    if todo.size:
        v[todo] = _bracketed_root(
            _twist_residual, v_lo[todo], v_hi[todo], f_lo[todo], f_hi[todo],
            _take(args, todo), x0=v0[todo], exp_bisect=True,
        )
    q_m = np.exp(2.0 * v)
    u_star = m * np.exp(-np.log1p(q_m) / 6.0)
    return u_star, turning, q_m


def _q_at(x, m, q_m):
    """``Y^2`` at radius ``x >= m`` from its value at ``m``."""
    return q_m + (1.0 + q_m) * np.expm1(6.0 * np.log(x / m))


def _g(u, u_star):
    """``sqrt(u^6 - u*^6) / u^2`` evaluated without cancellation."""
    r6 = -np.expm1(6.0 * np.log(u_star / u))
    return u * np.sqrt(np.maximum(r6, 0.0))


def _g_from_q(u, q):
    # written so that q = inf (u* -> 0) gives u and q = 0 gives 0
    with np.errstate(divide="ignore"):
        return u / np.sqrt(1.0 + 1.0 / q)


def solve(p, q) -> CuspGeodesic:
    """Solve the boundary-value problem between coordinate arrays ``p`` and ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)
    shape = p.shape[:-1]
    a = p[..., 0].ravel()
    b = q[..., 0].ravel()
    dtheta = (q[..., 1] - p[..., 1]).ravel()
    n = a.size

    kind = np.zeros(n, dtype=int)
    u_star = np.zeros(n)
    length = np.abs(a - b)
    direction = np.where(dtheta < 0, -1.0, 1.0)
    q_a = np.zeros(n)
    q_b = np.zeros(n)

    clair = (a > 0) & (b > 0) & (np.nan_to_num(dtheta) != 0)
    if clair.any():
        ac, bc = a[clair], b[clair]
        dc = np.abs(dtheta[clair])
        # bracket probes may overflow at extreme v; those values never survive
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            us, turning, q_m = _solve_clairaut(ac, bc, dc)
        m = np.minimum(ac, bc)
        qa, qb = _q_at(ac, m, q_m), _q_at(bc, m, q_m)
        q_a[clair], q_b[clair] = qa, qb
        ga, gb = _g_from_q(ac, qa), _g_from_q(bc, qb)
        length_c = np.where(turning, ga + gb, np.abs(gb - ga)) - us**3 * dc
        kind[clair] = np.where(turning, _TURNING, _MONOTONE)
        u_star[clair] = us
        length[clair] = np.maximum(length_c, 0.0)

    return CuspGeodesic(
        p=p.reshape(-1, 2),
        q=q.reshape(-1, 2),
        kind=kind.reshape(shape),
        u_star=u_star.reshape(shape),
        direction=direction.reshape(shape),
        length=length.reshape(shape),
        q_p=q_a.reshape(shape),
        q_q=q_b.reshape(shape),
    )


def distance(p, q):
    """Length of the minimizing geodesic between ``p`` and ``q``."""
    return solve(p, q).length


def _arc(u, u_star):
    """Arc length from the turning radius out to radius ``u``."""
    q = _q_from_log_ratio(np.log(u / u_star))
    return _g(u, u_star) - u_star * (2.0 / 3.0) * _j(q)


def _invert_arc(arc, u_star):
    """Radius reached after travelling ``arc`` outward from the turning radius.

    Newton on ``ell(Y) = arc / u*`` with ``ell'(Y) = (1/3)(1+Y^2)^(-1/3)``;
    ``ell`` is concave and increasing so iterates approach from the left.
    """
    target = arc / u_star
    y = np.zeros_like(target)
    for _ in range(200):
        q = y * y
        ell = y * (1.0 + q) ** (-1.0 / 3.0) - (2.0 / 3.0) * _j(q)
        step = (target - ell) * 3.0 * (1.0 + q) ** (1.0 / 3.0)
        y_new = np.maximum(y + step, 0.0)
        done = np.abs(y_new - y) <= 1e-15 * np.maximum(y_new, 1.0)
        y = y_new
        if done.all():
            break
    return y


def geodesic_point(p, q, t):
    """Point at fraction ``t`` of the way from ``p`` to ``q`` (constant speed)."""
    geo = solve(p, q)
    shape = geo.length.shape
    t = np.broadcast_to(np.asarray(t, dtype=float), shape).ravel()
    a, alpha = geo.p[:, 0], geo.p[:, 1]
    b, beta_ = geo.q[:, 0], geo.q[:, 1]
    kind = geo.kind.ravel()
    out = np.empty((a.size, 2))

    radial = kind == _RADIAL
    if radial.any():
        ar, br, tr = a[radial], b[radial], t[radial]
        u = ar + tr * (br - ar)
        # constant-twist segment, or a leg into / out of the cusp point
        theta = np.where(ar > 0, alpha[radial], beta_[radial])
        out[radial, 0] = u
        out[radial, 1] = np.where(u > 0, theta, np.nan)
        out[radial & (t == 0)] = geo.p[radial & (t == 0)]
        out[radial & (t == 1)] = geo.q[radial & (t == 1)]

    curved = ~radial
    if curved.any():
        ac, bc, tc = a[curved], b[curved], t[curved]
        us = geo.u_star.ravel()[curved]
        dirc = geo.direction.ravel()[curved]
        turning = kind[curved] == _TURNING
        arc_a, arc_b = _arc(ac, us), _arc(bc, us)
        # signed arc coordinate, turning radius at 0
        out_going = bc > ac
        s_a = np.where(turning | ~out_going, -arc_a, arc_a)
        s_b = np.where(turning | out_going, arc_b, -arc_b)
        s = s_a + tc * (s_b - s_a)
        y = _invert_arc(np.abs(s), us)
        q_s = y * y
        u = us * (1.0 + q_s) ** (1.0 / 6.0)
        q_a = _q_from_log_ratio(np.log(ac / us))
        # twist travelled from the start: sign(s) J(Y_s) - sign(s_a) J(Y_a)
        same_side = np.sign(s) == np.sign(s_a)
        j_part = _twist_sum(q_a, q_s, same_side)
        # on the same side the travel is |J(Y_s) - J(Y_a)| toward or away from
        # the turning point; _twist_sum returns J(Y_s) - J(Y_a)
        j_travel = np.where(same_side, np.sign(s) * j_part, j_part)
        theta = alpha[curved] + dirc * (2.0 / 3.0) * j_travel / us**2
        out[curved, 0] = u
        out[curved, 1] = theta
        ends0 = tc == 0
        ends1 = tc == 1
        idx = np.flatnonzero(curved)
        out[idx[ends0]] = geo.p[idx[ends0]]
        out[idx[ends1]] = geo.q[idx[ends1]]
    return out.reshape(shape + (2,))


def distance_gradient(p, q):
    """Gradient of ``d(p, q)`` with respect to the coordinates of ``p``.

    Returns ``(length, d_du, d_dtheta)``.  The twist component equals minus
    the signed Clairaut constant; it vanishes for radial geodesics and when
    ``p`` is the cusp point (where the twist coordinate is meaningless).
    """
    geo = solve(p, q)
    a = geo.p[:, 0].reshape(geo.length.shape)
    b = geo.q[:, 0].reshape(geo.length.shape)
    kind = geo.kind
    us = geo.u_star
    with np.errstate(divide="ignore"):
        speed_u = 1.0 / np.sqrt(1.0 + 1.0 / geo.q_p)
    # du/ds at p along the direction of travel
    outward = (kind == _MONOTONE) & (b > a)
    du_ds = np.where(kind == _TURNING, -speed_u, np.where(outward, speed_u, -speed_u))
    radial = kind == _RADIAL
    du_ds = np.where(radial, np.sign(b - a), du_ds)
    clairaut = np.where(radial, 0.0, geo.direction * us**3 / 2.0)
    return geo.length, -du_ds, -clairaut
