"""Lattice boundary-value problems used by the refinement studies."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from harmlab.domain import as_values, grid
from harmlab.npc.spaces import CuspFactor
from harmlab.solver import Schedule, boundary_map, minimize, pde_residual, prolong, subsolution_check, with_pinned
from harmlab.wp.metric import ModelMetric


def sor_factor(n: int) -> float:
    """Near-optimal over-relaxation for an ``n`` by ``n`` lattice."""
    return 2.0 / (1.0 + np.sin(np.pi / (n - 1)))


@dataclass(frozen=True)
class ProfileHarmonicMap:
    """Exact harmonic map into one cusp factor, ``(U(xi), k eta)``.

    ``(xi, eta)`` are the unit-square coordinates rotated by ``angle``.
    The twist is linear, so harmonicity reduces to the profile equation
    ``U'' = (3/4) k^2 U^5``, integrated numerically to near machine
    precision.  Because the map is smooth up to the boundary, lattice
    residuals decay cleanly under refinement (no corner singularities).
    """

    slope: float = 1.0
    u0: float = 0.5
    du0: float = 0.1
    angle: float = 0.4
    _sol: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        k = self.slope
        sol = solve_ivp(lambda s, y: [y[1], 0.75 * k * k * y[0] ** 5], (-0.5, 1.5), [self.u0, self.du0],
                        rtol=1e-13, atol=1e-15, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"profile integration failed: {sol.message}")
        object.__setattr__(self, "_sol", sol)

    def __call__(self, x, y):
        c, s = np.cos(self.angle), np.sin(self.angle)
        xi, eta = c * x + s * y, -s * x + c * y
        return np.stack([self._sol.sol(xi)[0], self.slope * eta], -1)


@dataclass(frozen=True)
class NearStratumData:
    """Boundary data ``(a0 + a1 x, k y (1 + x))``; small ``a0`` pushes the
    minimizer's radius toward the stratum along the edge ``x = 0``."""

    a0: float = 0.01
    a1: float = 0.4
    k: float = 2.0

    def __call__(self, x, y):
        return np.stack([self.a0 + self.a1 * x, self.k * y * (1 + x)], -1)


@dataclass
class RefinementLevel:
    size: int
    sweeps: int
    termination: str
    residual: float
    error: float
    constant: float
    min_u: float


def refinement_study(data, sizes=(5, 9, 17), exact: bool = False, tol_move: float = 1e-10,
                     max_sweeps: int = 3000, genus: int = 2) -> list[RefinementLevel]:
    """Solve the Dirichlet problem for ``data`` on successively finer lattices.

    Each level starts from the prolonged previous solution.  ``error`` is the
    max-norm distance to ``data`` in chart coordinates when ``exact`` is set
    (``data`` is then the harmonic map itself), ``nan`` otherwise.
    """
    target = CuspFactor()
    metric = ModelMetric(genus)
    out, prev = [], None
    for n in sizes:
        g = grid(n, n, target)
        base = boundary_map(g, data)
        init = base if prev is None else with_pinned(g, prolong(prev[0], prev[1], g), base)
        sched = Schedule(order="colored", tol_move=tol_move, max_sweeps=max_sweeps, omega=sor_factor(n))
        u, trace = minimize(g, init, sched)
        vals = as_values(g, u)
        residual = float(np.abs(pde_residual(g, u, metric, u_floor=1e-3)).max())
        err = float(np.abs(vals - as_values(g, base)).max()) if exact else float("nan")
        const = subsolution_check(g, u, metric).constant
        out.append(RefinementLevel(n, trace.sweeps, trace.termination, residual, err, const,
                                   float(vals[:, 0].min())))
        prev = (g, u)
    return out
