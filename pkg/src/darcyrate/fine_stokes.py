"""Stokes flow in the perforated square with viscosity scale eps^2 mu.

One factorization is kept per (domain, viscosity) so that the fine solve,
both boundary correctors and the energy probe share it.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .darcy import bind_resolution, boundary_compatibility, resolve_boundary, resolve_forcing
from .errors import IncompatibleBoundaryData, ZeroData, ZeroField
from .geometry import OUTER, PerforatedDomain
from .grid_ops import (
    FaceLayout,
    StaggeredField,
    WallTrace,
    boundary_trace_norm,
    divergence,
    l2_norm,
    sample_faces,
    velocity_gradient,
)
from .saddle import StokesSystem, assemble_stokes

log = logging.getLogger(__name__)

_SYSTEMS: dict = {}


def stokes_system(domain: PerforatedDomain, nu: float) -> StokesSystem:
    """Cached assembled (and, after first use, factored) system for ``domain``."""
    key = (domain.cell.digest(), domain.n_periods, domain.cells_per_period, float(nu))
    if key not in _SYSTEMS:
        # keep at most one large factorization alive
        _SYSTEMS.clear()
        layout = FaceLayout.for_domain(domain)
        _SYSTEMS[key] = assemble_stokes(layout, nu)
    return _SYSTEMS[key]


def clear_cache() -> None:
    _SYSTEMS.clear()


@dataclass
class FineSolution:
    domain: PerforatedDomain = field(repr=False)
    mu: float
    u: StaggeredField = field(repr=False)
    p: np.ndarray = field(repr=False)
    boundary: StaggeredField = field(repr=False)
    residual: float = 0.0
    seconds: float = 0.0
    P: np.ndarray | None = field(default=None, repr=False)

    @property
    def epsilon(self) -> float:
        return self.domain.epsilon

    def gradient(self):
        return velocity_gradient(self.u, self.domain.xkind, self.domain.ykind)

    def gradient_norm(self) -> float:
        return self.gradient().norm()

    def divergence_residual(self) -> float:
        return float(np.abs(divergence(self.u, self.domain.fluid).values).max())

    def pressure_mean(self) -> float:
        return float(self.p[self.domain.fluid].mean())


def dirichlet_data(domain: PerforatedDomain, b) -> StaggeredField:
    """Known-face values: ``b`` on the outer faces and walls, zero on obstacles."""
    n, h = domain.n, domain.h
    if isinstance(b, StaggeredField):
        data = b
    else:
        data = sample_faces(bind_resolution(resolve_boundary(b), n), n, h, False, with_wall=True)
    u = np.where(domain.xkind == OUTER, data.u, 0.0)
    v = np.where(domain.ykind == OUTER, data.v, 0.0)
    wall = data.wall if data.wall is not None else WallTrace.zeros(n)
    return StaggeredField(u, v, h, False, wall)


def _force_field(domain: PerforatedDomain, f) -> StaggeredField | None:
    if f is None:
        return None
    if isinstance(f, StaggeredField):
        return f
    return sample_faces(resolve_forcing(f), domain.n, domain.h, False, with_wall=False)


def solve_stokes(domain: PerforatedDomain, f=None, b=None, mu: float = 1.0, tol: float = 1e-10) -> FineSolution:
    """Solve -eps^2 mu Lap u + grad p = f, div u = 0, u = 0 on obstacles, u = b outside."""
    t0 = time.perf_counter()
    bdata = dirichlet_data(domain, b)
    compat = boundary_compatibility(bdata)
    if abs(compat) > tol:
        raise IncompatibleBoundaryData(f"boundary integral of b.n is {compat:.3e}")
    system = stokes_system(domain, domain.epsilon ** 2 * mu)
    force = _force_field(domain, f)
    u, p, _ = system.solve(force=force, boundary=bdata)
    u.wall = bdata.wall
    sol = FineSolution(domain, mu, u, p, bdata, system.last_residual, time.perf_counter() - t0)
    sol.P = extend_pressure(sol)
    return sol


solve_fine = solve_stokes


def extend_pressure(sol: FineSolution) -> np.ndarray:
    """p on fluid cells; on solid cells the fluid average of the enclosing eps-cell."""
    d = sol.domain
    N, M = d.n_periods, d.cells_per_period
    fluid = d.fluid
    p = np.where(fluid, sol.p, 0.0)
    blocks = p.reshape(N, M, N, M).sum(axis=(1, 3))
    counts = fluid.reshape(N, M, N, M).sum(axis=(1, 3))
    avg = blocks / counts
    fill = np.kron(avg, np.ones((M, M)))
    return np.where(fluid, sol.p, fill)


def poincare_ratio(sol: FineSolution, tol: float = 1e-12) -> float:
    """||u||_{L2} / (eps ||grad u||_{L2}) over the fluid part.

    A velocity whose scaled gradient is below ``tol`` is round-off, and the
    ratio of two round-off norms carries no information.
    """
    g = sol.gradient_norm()
    if sol.epsilon * g <= tol:
        raise ZeroField(f"scaled velocity gradient {sol.epsilon * g:.3e} is at round-off")
    return l2_norm(sol.u) / (sol.epsilon * g)


def _boundary_h1_seminorm(data: StaggeredField) -> float:
    """Tangential-derivative L2 norm of the boundary trace, side by side."""
    h = data.h
    s = 0.0
    # normal components on faces (midpoints along each side)
    for arr in (data.u[0], data.u[-1], data.v[:, 0], data.v[:, -1]):
        s += h * ((np.diff(arr) / h) ** 2).sum()
    if data.wall is not None:
        for side in ("south", "north", "west", "east"):
            arr = getattr(data.wall, side)
            s += h * ((np.diff(arr) / h) ** 2).sum()
    return float(np.sqrt(s))


def boundary_h_half(data: StaggeredField) -> float:
    """Interpolation bound ||h||_{L2}^{1/2} ||h||_{H1}^{1/2} on the boundary."""
    l2 = boundary_trace_norm(data)
    h1 = np.sqrt(l2 ** 2 + _boundary_h1_seminorm(data) ** 2)
    return float(np.sqrt(l2 * h1))


def energy_probe(domain: PerforatedDomain, f=None, h_data=None, mu: float = 1.0) -> float:
    """(eps||grad u|| + ||u|| + ||p||) / (||f|| + ||h||_{L2(bdry)} + eps ||h||_{H^1/2(bdry)})."""
    sol = solve_stokes(domain, f, h_data, mu)
    force = _force_field(domain, f)
    bdata = sol.boundary
    f_norm = 0.0 if force is None else l2_norm(force)
    denom = f_norm + boundary_trace_norm(bdata) + domain.epsilon * boundary_h_half(bdata)
    if denom == 0.0:
        raise ZeroData("forcing and boundary data both vanish")
    num = domain.epsilon * sol.gradient_norm() + l2_norm(sol.u) + l2_norm(sol.p, domain.fluid, domain.h)
    return num / denom
