"""Homogenized Neumann problem for p0 and the Darcy velocity.

The pressure is cell-centred on the same uniform grid as the perforated
problem.  Face fluxes are ``K (f - grad p0)`` with the normal derivative a
two-point difference and the tangential one the average of the adjacent
cells' central differences; on the outer boundary the flux is ``mu b . n``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import IncompatibleBoundaryData, NotSPD
from .grid_ops import StaggeredField, WallTrace, boundary_flux, sample_faces
from .saddle import SparseSystem, solve_linear

log = logging.getLogger(__name__)

VectorFn = Callable[[np.ndarray, np.ndarray], tuple]

PI = np.pi


def _gradient_forcing(x, y):
    return 2.0 * x, -2.0 * y


def _rotation_forcing(x, y):
    return -y, x


def _trig_forcing(x, y):
    return np.sin(PI * y), np.sin(PI * x)


FORCINGS: dict[str, VectorFn] = {
    "gradient": _gradient_forcing,
    "rotation": _rotation_forcing,
    "trig": _trig_forcing,
}


def _zero_b(x, y):
    return 0.0 * x, 0.0 * y


def _rotation_b(x, y):
    return -(y - 0.5), x - 0.5


def _wave_b(x, y):
    return np.sin(2 * PI * y), np.sin(2 * PI * x)


class _ShearData:
    """b = (-k x, y sin(pi x)): outflow sin(pi x) on the top side, uniform
    inflow on the right side.

    With k = 2/pi the flux balances in the continuum; bound to a grid, k is
    the midpoint mean of sin(pi x) so the discrete flux vanishes exactly.
    """

    def __init__(self, kappa: float = 2.0 / PI):
        self.kappa = kappa

    def __call__(self, x, y):
        return -self.kappa * x, y * np.sin(PI * x)

    def at_resolution(self, n: int) -> "_ShearData":
        h = 1.0 / n
        return _ShearData(h / np.sin(0.5 * PI * h))


BOUNDARY_DATA: dict[str, VectorFn] = {
    "zero": _zero_b,
    "rotation": _rotation_b,
    "wave": _wave_b,
    "shear": _ShearData(),
}


def polynomial_field(spec: dict) -> VectorFn:
    """Vector polynomial from ``{"fx": [[c, px, py], ...], "fy": [...]}``."""
    terms = []
    for key in ("fx", "fy"):
        rows = spec.get(key, [])
        for r in rows:
            if len(r) != 3 or int(r[1]) < 0 or int(r[2]) < 0:
                raise ValueError(f"bad polynomial term {r!r} in {key}")
        terms.append([(float(c), int(a), int(b)) for c, a, b in rows])

    def fn(x, y):
        out = []
        for tl in terms:
            s = 0.0 * x
            for c, a, b in tl:
                s = s + c * x**a * y**b
            out.append(s)
        return tuple(out)

    return fn


def resolve_vector_fn(spec, table: dict[str, VectorFn]) -> VectorFn:
    if spec is None:
        return _zero_b
    if callable(spec):
        return spec
    if isinstance(spec, str):
        if spec in table:
            return table[spec]
        if spec.lstrip().startswith("{"):
            return polynomial_field(json.loads(spec))
        if spec.endswith(".json"):
            return polynomial_field(json.loads(Path(spec).read_text()))
        raise KeyError(f"unknown field {spec!r}; choose from {sorted(table)}")
    if isinstance(spec, dict):
        return polynomial_field(spec.get("polynomial", spec))
    raise TypeError(f"cannot interpret field spec {spec!r}")


def resolve_forcing(spec) -> VectorFn:
    return resolve_vector_fn(spec, FORCINGS)


def resolve_boundary(spec) -> VectorFn:
    return resolve_vector_fn(spec, BOUNDARY_DATA)


def bind_resolution(fn: VectorFn, n: int) -> VectorFn:
    """Specialize grid-aware data (objects with ``at_resolution``) to ``n``."""
    return fn.at_resolution(n) if hasattr(fn, "at_resolution") else fn


def boundary_compatibility(b: StaggeredField) -> float:
    """Midpoint-rule value of the boundary integral of b . n."""
    return boundary_flux(b)


# ---------------------------------------------------------------------------
# one-dimensional building blocks, arrays indexed [i(x), j(y)] in C order


def _face_diff(n: int, h: float) -> sp.csr_matrix:
    """(n+1) x n two-point difference onto interior faces; boundary rows empty."""
    r = np.arange(1, n)
    rows = np.concatenate([r, r])
    cols = np.concatenate([r, r - 1])
    vals = np.concatenate([np.full(n - 1, 1.0 / h), np.full(n - 1, -1.0 / h)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))


def _face_avg(n: int) -> sp.csr_matrix:
    r = np.arange(1, n)
    rows = np.concatenate([r, r])
    cols = np.concatenate([r, r - 1])
    return sp.csr_matrix((np.full(2 * (n - 1), 0.5), (rows, cols)), shape=(n + 1, n))


def _central(n: int, h: float) -> sp.csr_matrix:
    """Cell-centred first derivative; second-order one-sided in the end cells
    so that quadratics are differentiated exactly everywhere."""
    k = np.arange(1, n - 1)
    rows = [k, k, [0, 0, 0], [n - 1, n - 1, n - 1]]
    cols = [k + 1, k - 1, [0, 1, 2], [n - 1, n - 2, n - 3]]
    vals = [np.full(n - 2, 0.5), np.full(n - 2, -0.5), [-1.5, 2.0, -0.5], [1.5, -2.0, 0.5]]
    return sp.csr_matrix((np.concatenate(vals) / h, (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


def _cell_div(n: int, h: float) -> sp.csr_matrix:
    r = np.arange(n)
    rows = np.concatenate([r, r])
    cols = np.concatenate([r + 1, r])
    vals = np.concatenate([np.full(n, 1.0 / h), np.full(n, -1.0 / h)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n + 1))


@dataclass
class _Ops:
    Gx: sp.csr_matrix  # normal derivative on x-faces
    Gy: sp.csr_matrix
    Tx: sp.csr_matrix  # d/dy on x-faces
    Ty: sp.csr_matrix  # d/dx on y-faces
    Cx: sp.csr_matrix  # central d/dx at cells
    Cy: sp.csr_matrix
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix


_OPS_CACHE: dict = {}


def _ops(n: int) -> _Ops:
    if n not in _OPS_CACHE:
        h = 1.0 / n
        I = sp.identity(n, format="csr")
        d, a, c, D = _face_diff(n, h), _face_avg(n), _central(n, h), _cell_div(n, h)
        _OPS_CACHE[n] = _Ops(
            Gx=sp.kron(d, I, format="csr"), Gy=sp.kron(I, d, format="csr"),
            Tx=sp.kron(a, c, format="csr"), Ty=sp.kron(c, a, format="csr"),
            Cx=sp.kron(c, I, format="csr"), Cy=sp.kron(I, c, format="csr"),
            Dx=sp.kron(D, I, format="csr"), Dy=sp.kron(I, D, format="csr"),
        )
    return _OPS_CACHE[n]


def check_spd(K: np.ndarray) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    if K.shape != (2, 2):
        raise NotSPD(f"K must be 2x2, got {K.shape}")
    scale = np.abs(K).max()
    if abs(K[0, 1] - K[1, 0]) > 1e-12 * max(scale, 1e-300):
        raise NotSPD("K is not symmetric")
    if np.linalg.eigvalsh(0.5 * (K + K.T)).min() <= 0:
        raise NotSPD("K is not positive definite")
    return 0.5 * (K + K.T)


@dataclass
class HomogenizedSolution:
    K: np.ndarray
    n: int
    p0: np.ndarray = field(repr=False)
    forcing: VectorFn = field(repr=False)
    boundary: VectorFn = field(repr=False)
    mu: float = 1.0
    f_faces: StaggeredField = field(default=None, repr=False)  # native components
    f_off: StaggeredField = field(default=None, repr=False)  # off components (f_y on x-faces, ...)
    b_faces: StaggeredField = field(default=None, repr=False)
    residual: float = 0.0

    @property
    def h(self) -> float:
        return 1.0 / self.n

    # -- G = f - grad p0 at the various grid locations ---------------------

    def G_faces(self) -> tuple[StaggeredField, StaggeredField]:
        """``(native, off)``: native holds G_x on x-faces and G_y on y-faces,
        off holds G_y on x-faces and G_x on y-faces."""
        n, ops = self.n, _ops(self.n)
        K, p = self.K, self.p0.ravel()
        g1 = self.f_faces.u - (ops.Gx @ p).reshape(n + 1, n)
        g2x = self.f_off.u - (ops.Tx @ p).reshape(n + 1, n)
        g2 = self.f_faces.v - (ops.Gy @ p).reshape(n, n + 1)
        g1y = self.f_off.v - (ops.Ty @ p).reshape(n, n + 1)
        # boundary faces: tangential part from the adjacent cell, normal part from the flux condition
        cy = (ops.Cy @ p).reshape(n, n)
        cx = (ops.Cx @ p).reshape(n, n)
        b = self.b_faces
        for i, c in ((0, 0), (n, n - 1)):
            g2x[i] = self.f_off.u[i] - cy[c]
            g1[i] = (self.mu * b.u[i] - K[0, 1] * g2x[i]) / K[0, 0]
        for j, c in ((0, 0), (n, n - 1)):
            g1y[:, j] = self.f_off.v[:, j] - cx[:, c]
            g2[:, j] = (self.mu * b.v[:, j] - K[1, 0] * g1y[:, j]) / K[1, 1]
        native = StaggeredField(g1, g2, self.h, False, None)
        off = StaggeredField(g2x, g1y, self.h, False, None)
        return native, off

    def G_centers(self) -> np.ndarray:
        native, _ = self.G_faces()
        return np.stack([0.5 * (native.u[1:] + native.u[:-1]), 0.5 * (native.v[:, 1:] + native.v[:, :-1])])

    def G_nodes(self) -> np.ndarray:
        """G at the (n+1) x (n+1) grid nodes, extrapolated linearly at the edges."""
        native, _ = self.G_faces()
        n = self.n
        out = np.empty((2, n + 1, n + 1))
        gx = native.u  # (n+1, n): average along y
        out[0][:, 1:-1] = 0.5 * (gx[:, 1:] + gx[:, :-1])
        out[0][:, 0] = 1.5 * gx[:, 0] - 0.5 * gx[:, 1]
        out[0][:, -1] = 1.5 * gx[:, -1] - 0.5 * gx[:, -2]
        gy = native.v  # (n, n+1): average along x
        out[1][1:-1] = 0.5 * (gy[1:] + gy[:-1])
        out[1][0] = 1.5 * gy[0] - 0.5 * gy[1]
        out[1][-1] = 1.5 * gy[-1] - 0.5 * gy[-2]
        return out

    def flux(self) -> StaggeredField:
        """K G on faces, i.e. mu times the Darcy velocity."""
        native, off = self.G_faces()
        K = self.K
        return StaggeredField(K[0, 0] * native.u + K[0, 1] * off.u,
                              K[1, 0] * off.v + K[1, 1] * native.v, self.h, False, None)


def _face_samples(fn: VectorFn, n: int) -> tuple[StaggeredField, StaggeredField]:
    h = 1.0 / n
    native = sample_faces(fn, n, h, False, with_wall=True)
    off = sample_faces(lambda x, y: tuple(reversed(fn(x, y))), n, h, False, with_wall=False)
    return native, off


def assemble_neumann(K: np.ndarray, n: int) -> SparseSystem:
    K = check_spd(K)
    ops = _ops(n)
    A = (ops.Dx @ (K[0, 0] * ops.Gx + K[0, 1] * ops.Tx)
         + ops.Dy @ (K[1, 0] * ops.Ty + K[1, 1] * ops.Gy))
    h2 = (1.0 / n) ** 2
    w = sp.csr_matrix(np.full((1, n * n), h2))
    M = sp.bmat([[A, w.T], [w, None]], format="csc")
    return SparseSystem(M, 1)


_NEUMANN_CACHE: dict = {}


def solve_p0(K, forcing=None, boundary=None, n: int = 64, mu: float = 1.0,
             tol: float = 1e-10) -> HomogenizedSolution:
    """Solve div K(f - grad p0) = 0 with n . K(f - grad p0) = mu b . n and mean(p0) = 0."""
    K = check_spd(K)
    f_fn = resolve_forcing(forcing) if not callable(forcing) else forcing
    b_fn = resolve_boundary(boundary) if not callable(boundary) else boundary
    f_nat, f_off = _face_samples(f_fn, n)
    b_fn = bind_resolution(b_fn, n)
    b_nat, _ = _face_samples(b_fn, n)
    compat = boundary_compatibility(b_nat)
    if abs(compat) > tol:
        raise IncompatibleBoundaryData(f"boundary integral of b.n is {compat:.3e}")
    key = (n, K.tobytes())
    if key not in _NEUMANN_CACHE:
        _NEUMANN_CACHE.clear()
        _NEUMANN_CACHE[key] = assemble_neumann(K, n)
    system = _NEUMANN_CACHE[key]
    ops = _ops(n)
    Fx = K[0, 0] * f_nat.u + K[0, 1] * f_off.u
    Fy = K[1, 0] * f_off.v + K[1, 1] * f_nat.v
    Fx[[0, -1]] = mu * b_nat.u[[0, -1]]
    Fy[:, [0, -1]] = mu * b_nat.v[:, [0, -1]]
    rhs = ops.Dx @ Fx.ravel() + ops.Dy @ Fy.ravel()
    x = solve_linear(system, np.concatenate([rhs, [0.0]]))
    p0 = x[:-1].reshape(n, n)
    return HomogenizedSolution(K, n, p0, f_fn, b_fn, mu, f_nat, f_off, b_nat, system.last_residual)


def darcy_velocity(hs: HomogenizedSolution) -> StaggeredField:
    """u0 = mu^-1 K (f - grad p0) on faces; the wall trace holds K G at the wall points."""
    flux = hs.flux().scaled(1.0 / hs.mu)
    G = hs.G_nodes()
    K = hs.K / hs.mu
    kg = np.einsum("ij,jab->iab", K, G)
    flux.wall = WallTrace(kg[0][:, 0].copy(), kg[0][:, -1].copy(), kg[1][0].copy(), kg[1][-1].copy())
    return flux


def darcy_divergence(hs: HomogenizedSolution) -> np.ndarray:
    F = hs.flux()
    return (F.u[1:] - F.u[:-1] + F.v[:, 1:] - F.v[:, :-1]) / hs.h
