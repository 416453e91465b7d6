"""Two-scale approximation and its correctors on the perforated grid.

Cell quantities are sampled on the fine grid by exact index mapping: fine
index ``i`` reads cell index ``i mod M``.  The macroscopic factor
``G = f - grad p0`` comes from :class:`darcy.HomogenizedSolution`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate

from .cell_problems import CellSolution
from .darcy import HomogenizedSolution, _ops
from .errors import KernelTooSmall, ResolutionMismatch
from .fine_stokes import FineSolution, dirichlet_data, stokes_system
from .geometry import OUTER, PerforatedDomain
from .grid_ops import (
    StaggeredField,
    WallTrace,
    boundary_flux,
    boundary_trace_norm,
    divergence,
    l2_norm,
    velocity_gradient,
)

log = logging.getLogger(__name__)


def _check_resolution(cellsol: CellSolution, domain: PerforatedDomain) -> None:
    if cellsol.m != domain.cells_per_period:
        raise ResolutionMismatch(f"cell solved at M={cellsol.m}, domain uses M={domain.cells_per_period}")
    if cellsol.cell.digest() != domain.cell.digest():
        raise ResolutionMismatch("cell solution and domain use different geometries")


def _tile_x(a: np.ndarray, n: int) -> np.ndarray:
    """Periodic x-face array (M, M) sampled on (n+1, n) fine x-faces."""
    m = a.shape[0]
    return a[np.ix_(np.arange(n + 1) % m, np.arange(n) % m)]


def _tile_y(a: np.ndarray, n: int) -> np.ndarray:
    m = a.shape[0]
    return a[np.ix_(np.arange(n) % m, np.arange(n + 1) % m)]


def _tile(a: np.ndarray, rows: int, cols: int) -> np.ndarray:
    m = a.shape[0]
    return a[np.ix_(np.arange(rows) % m, np.arange(cols) % m)]


def _wall_samples(field_u: np.ndarray, field_v: np.ndarray, n: int):
    """Periodic field traces at the outer wall points.

    The line y = 0 falls midway between cell rows M-1 and 0, so the x-face
    value there is the average of those two rows; likewise for x = 0.
    """
    m = field_u.shape[0]
    idx = np.arange(n + 1) % m
    tu = 0.5 * (field_u[idx, m - 1] + field_u[idx, 0])
    tv = 0.5 * (field_v[m - 1, idx] + field_v[0, idx])
    return tu, tv


def oscillating_velocity(cellsol: CellSolution, hs: HomogenizedSolution, domain: PerforatedDomain) -> StaggeredField:
    """u_osc = mu^-1 sum_j W_j(x/eps) G_j(x) on faces and wall points."""
    _check_resolution(cellsol, domain)
    n = domain.n
    if hs.n != n:
        raise ResolutionMismatch(f"homogenized grid n={hs.n} differs from fine grid n={n}")
    native, off = hs.G_faces()
    W = cellsol.W
    u = _tile_x(W[0].u, n) * native.u + _tile_x(W[1].u, n) * off.u
    v = _tile_y(W[0].v, n) * off.v + _tile_y(W[1].v, n) * native.v
    u = np.where((domain.xkind == 0) | (domain.xkind == OUTER), u, 0.0)
    v = np.where((domain.ykind == 0) | (domain.ykind == OUTER), v, 0.0)
    G = hs.G_nodes()
    t0u, t0v = _wall_samples(W[0].u, W[0].v, n)
    t1u, t1v = _wall_samples(W[1].u, W[1].v, n)
    wall = WallTrace(
        t0u * G[0][:, 0] + t1u * G[1][:, 0],
        t0u * G[0][:, -1] + t1u * G[1][:, -1],
        t0v * G[0][0, :] + t1v * G[1][0, :],
        t0v * G[0][-1, :] + t1v * G[1][-1, :],
    )
    return StaggeredField(u, v, domain.h, False, wall).scaled(1.0 / hs.mu)


# ---------------------------------------------------------------------------
# smoothing and cut-off


def mollifier_kernel(epsilon: float, h: float) -> np.ndarray:
    """Discrete bump (1 - |y|^2/r^2)^3 on radius r = eps/8, unit mass."""
    r = epsilon / 8.0
    if r < 2.0 * h - 1e-12 * h:
        raise KernelTooSmall(f"kernel radius {r:.3g} is below two grid spacings ({2 * h:.3g})")
    k = int(np.ceil(r / h))
    off = np.arange(-k, k + 1) * h
    X, Y = np.meshgrid(off, off, indexing="ij")
    s = 1.0 - (X**2 + Y**2) / r**2
    w = np.where(s > 0, s, 0.0) ** 3
    return w / w.sum()


def mollify(values: np.ndarray, epsilon: float, h: float) -> np.ndarray:
    """Convolve cell-centred values with the kernel; near the boundary the
    sum runs over available samples and is renormalized."""
    w = mollifier_kernel(epsilon, h)
    num = correlate(values, w, mode="constant", cval=0.0)
    den = correlate(np.ones_like(values), w, mode="constant", cval=0.0)
    return num / den


def cutoff_fn(x, y, epsilon: float):
    d = np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))
    return np.clip((d - 2.0 * epsilon) / epsilon, 0.0, 1.0)


def cutoff(domain: PerforatedDomain, epsilon: float | None = None) -> np.ndarray:
    """Ramp from 0 at distance 2 eps to 1 at 3 eps, at cell centres."""
    eps = domain.epsilon if epsilon is None else epsilon
    x, y = domain.centers()
    return cutoff_fn(x, y, eps)


def _cutoff_faces(domain: PerforatedDomain, epsilon: float):
    n, h = domain.n, domain.h
    xi = np.arange(n + 1) * h
    c = (np.arange(n) + 0.5) * h
    XU, YU = np.meshgrid(xi, c, indexing="ij")
    XV, YV = np.meshgrid(c, xi, indexing="ij")
    return cutoff_fn(XU, YU, epsilon), cutoff_fn(XV, YV, epsilon)


def build_phi_eps(cellsol: CellSolution, hs: HomogenizedSolution, domain: PerforatedDomain,
                  epsilon: float | None = None) -> StaggeredField:
    """Phi^j = eps eta chi_{lk}^j(x/eps) d_l S_eps(G_k) on j-faces."""
    _check_resolution(cellsol, domain)
    eps = domain.epsilon if epsilon is None else epsilon
    n, h = domain.n, domain.h
    Gc = hs.G_centers()
    SG = [mollify(Gc[k], eps, h).ravel() for k in range(2)]
    ops = _ops(n)
    # d_l S(G_k) on x-faces and on y-faces
    dx_on_x = [(ops.Gx @ s).reshape(n + 1, n) for s in SG]
    dy_on_x = [(ops.Tx @ s).reshape(n + 1, n) for s in SG]
    dx_on_y = [(ops.Ty @ s).reshape(n, n + 1) for s in SG]
    dy_on_y = [(ops.Gy @ s).reshape(n, n + 1) for s in SG]
    eta_u, eta_v = _cutoff_faces(domain, eps)
    u = np.zeros((n + 1, n))
    v = np.zeros((n, n + 1))
    for l in range(2):
        for k in range(2):
            chi = cellsol.chi[l, k]
            du = dx_on_x[k] if l == 0 else dy_on_x[k]
            dv = dx_on_y[k] if l == 0 else dy_on_y[k]
            u += _tile_x(chi.u, n) * du
            v += _tile_y(chi.v, n) * dv
    u = eps * eta_u * np.where(domain.xkind == 0, u, 0.0)
    v = eps * eta_v * np.where(domain.ykind == 0, v, 0.0)
    return StaggeredField(u, v, h, False, WallTrace.zeros(n))


def divergence_repair(phi: StaggeredField, u_osc: StaggeredField, domain: PerforatedDomain) -> float:
    d = divergence(phi + u_osc, domain.fluid)
    return l2_norm(d)


# ---------------------------------------------------------------------------
# boundary correctors


def _outer_only(domain: PerforatedDomain, f: StaggeredField, wall: WallTrace) -> StaggeredField:
    u = np.where(domain.xkind == OUTER, f.u, 0.0)
    v = np.where(domain.ykind == OUTER, f.v, 0.0)
    return StaggeredField(u, v, domain.h, False, wall)


def boundary_mismatch(domain: PerforatedDomain, u_osc: StaggeredField, b: StaggeredField) -> StaggeredField:
    """b - u_osc restricted to the outer faces and wall points."""
    if not isinstance(b, StaggeredField):
        b = dirichlet_data(domain, b)
    diff = b - u_osc
    return _outer_only(domain, diff, diff.wall)


def tangential_data(domain: PerforatedDomain, mismatch: StaggeredField) -> StaggeredField:
    z = StaggeredField(np.zeros_like(mismatch.u), np.zeros_like(mismatch.v), domain.h, False, None)
    return _outer_only(domain, z, mismatch.wall)


def gamma_constant(mismatch: StaggeredField) -> float:
    """gamma = |boundary|^-1 times the boundary integral of (b - u_osc) . n."""
    return boundary_flux(mismatch) / 4.0


def normal_data(domain: PerforatedDomain, mismatch: StaggeredField, gamma: float) -> StaggeredField:
    u = np.zeros_like(mismatch.u)
    v = np.zeros_like(mismatch.v)
    # ((b - u_osc) . n - gamma) n on each side; n_x = -1 west, +1 east
    u[0] = mismatch.u[0] + gamma
    u[-1] = mismatch.u[-1] - gamma
    v[:, 0] = mismatch.v[:, 0] + gamma
    v[:, -1] = mismatch.v[:, -1] - gamma
    return StaggeredField(u, v, domain.h, False, WallTrace.zeros(domain.n))


def _homogeneous_solve(domain: PerforatedDomain, data: StaggeredField, mu: float):
    system = stokes_system(domain, domain.epsilon ** 2 * mu)
    vel, q, _ = system.solve(boundary=data)
    vel.wall = data.wall
    return vel, q, system.last_residual


def tangential_corrector(domain, cellsol, hs, b, u_osc=None):
    """(Psi_t, q_t) with Psi_t = tangential part of b - u_osc on the outer boundary."""
    u_osc = oscillating_velocity(cellsol, hs, domain) if u_osc is None else u_osc
    data = tangential_data(domain, boundary_mismatch(domain, u_osc, b))
    psi, q, _ = _homogeneous_solve(domain, data, hs.mu)
    return psi, q


def normal_corrector(domain, cellsol, hs, b, u_osc=None):
    """(Psi_n, q_n, gamma) with Psi_n = ((b - u_osc) . n - gamma) n on the outer boundary."""
    u_osc = oscillating_velocity(cellsol, hs, domain) if u_osc is None else u_osc
    mismatch = boundary_mismatch(domain, u_osc, b)
    gamma = gamma_constant(mismatch)
    data = normal_data(domain, mismatch, gamma)
    psi, q, _ = _homogeneous_solve(domain, data, hs.mu)
    return psi, q, gamma


@dataclass
class CorrectorSet:
    u_osc: StaggeredField = field(repr=False)
    phi: StaggeredField = field(repr=False)
    psi_t: StaggeredField = field(repr=False)
    q_t: np.ndarray = field(repr=False)
    psi_n: StaggeredField = field(repr=False)
    q_n: np.ndarray = field(repr=False)
    gamma: float
    eta: np.ndarray = field(repr=False)
    tangential: StaggeredField = field(repr=False)
    normal: StaggeredField = field(repr=False)
    mismatch: StaggeredField = field(repr=False)
    residuals: dict = field(default_factory=dict)
    v: StaggeredField | None = field(default=None, repr=False)
    q: np.ndarray | None = field(default=None, repr=False)


def build_correctors(domain: PerforatedDomain, cellsol: CellSolution, hs: HomogenizedSolution, b) -> CorrectorSet:
    """All correctors for one fine grid; the boundary solves share one factorization."""
    u_osc = oscillating_velocity(cellsol, hs, domain)
    phi = build_phi_eps(cellsol, hs, domain)
    mismatch = boundary_mismatch(domain, u_osc, b)
    gamma = gamma_constant(mismatch)
    tdata = tangential_data(domain, mismatch)
    ndata = normal_data(domain, mismatch, gamma)
    psi_t, q_t, rt = _homogeneous_solve(domain, tdata, hs.mu)
    psi_n, q_n, rn = _homogeneous_solve(domain, ndata, hs.mu)
    return CorrectorSet(u_osc, phi, psi_t, q_t, psi_n, q_n, gamma, cutoff(domain), tdata, ndata, mismatch,
                        {"psi_t": rt, "psi_n": rn})


def pressure_oscillation(cellsol: CellSolution, hs: HomogenizedSolution, domain: PerforatedDomain) -> np.ndarray:
    """pi(x/eps) . G at cell centres."""
    n = domain.n
    Gc = hs.G_centers()
    return sum(_tile(cellsol.pi[j], n, n) * Gc[j] for j in range(2))


def residual_field(fine: FineSolution, cs: CorrectorSet, cellsol: CellSolution, hs: HomogenizedSolution):
    """v = u - (u_osc + Phi + Psi_t + Psi_n) and the matching pressure residual."""
    domain = fine.domain
    _check_resolution(cellsol, domain)
    v = fine.u - (cs.u_osc + cs.phi + cs.psi_t + cs.psi_n)
    q = fine.p - hs.p0 - cs.q_t - cs.q_n - domain.epsilon * pressure_oscillation(cellsol, hs, domain)
    q = np.where(domain.fluid, q, 0.0)
    cs.v, cs.q = v, q
    return v, q


def trace_discrepancy(fine: FineSolution, u_osc: StaggeredField) -> float:
    """Boundary L2 norm of u_eps - u_osc, normal and tangential parts."""
    return boundary_trace_norm(fine.u - u_osc, tangential=True)


def oscillating_gradient(cellsol: CellSolution, hs: HomogenizedSolution, domain: PerforatedDomain):
    """(grad W)(x/eps) G at the staggered gradient locations, as a dict of arrays."""
    n = domain.n
    lay = cellsol.layout
    gW = [velocity_gradient(w, lay.xkind, lay.ykind) for w in cellsol.W]
    Gc = hs.G_centers()
    Gn = hs.G_nodes()
    out = {}
    for name, G, shape in (("dudx", Gc, (n, n)), ("dvdy", Gc, (n, n)),
                           ("dudy", Gn, (n + 1, n + 1)), ("dvdx", Gn, (n + 1, n + 1))):
        out[name] = sum(_tile(getattr(gW[j], name), *shape) * G[j] for j in range(2)) / hs.mu
    return out
