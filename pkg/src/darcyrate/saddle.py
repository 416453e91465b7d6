"""Sparse saddle-point assembly and direct solves.

Stokes systems are assembled in the symmetric bordered form::

    [ nu*L   G    0 ] [u]       [f + nu*(known face data)]
    [ G^T    0    w ] [p]   =   [-g + D_known u_known    ]
    [ 0      w^T  0 ] [lam]     [mean                    ]

with ``L = -Lap`` on unknown faces, ``G = -D^T`` the gradient and ``w`` the
cell areas, so the pressure has a prescribed integral instead of a pinned
cell value.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import (
    EmptyFluid,
    IncompatiblePeriodicSystem,
    IncompatibleRHS,
    ResidualTooLarge,
    SingularMatrix,
)
from .grid_ops import FaceLayout, StaggeredField

log = logging.getLogger(__name__)

RESIDUAL_REPORT = 1e-10
RESIDUAL_FAIL = 1e-8
PERMC = "COLAMD"


@dataclass
class SparseSystem:
    matrix: sp.csc_matrix
    n_constraints: int = 0
    last_residual: float = field(default=0.0, init=False)
    _lu: object = field(default=None, init=False, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def factor(self):
        if self._lu is None:
            try:
                self._lu = splu(self.matrix, permc_spec=PERMC)
            except RuntimeError as exc:  # "Factor is exactly singular"
                raise SingularMatrix(str(exc)) from exc
        return self._lu

    def dump_triplets(self, path) -> None:
        """Write the matrix as ``row,col,value`` CSV for external cross-checks."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        np.savetxt(path, np.column_stack([coo.row[order], coo.col[order], coo.data[order]]),
                   delimiter=",", fmt=["%d", "%d", "%.17g"], header="row,col,value", comments="")


def solve_linear(system: SparseSystem | sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct sparse solve with one step of iterative refinement."""
    if not isinstance(system, SparseSystem):
        system = SparseSystem(sp.csc_matrix(system))
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (system.dim,):
        raise ValueError(f"rhs length {rhs.shape} does not match system dimension {system.dim}")
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        system.last_residual = 0.0
        return np.zeros_like(rhs)
    lu = system.factor()
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrix("non-finite solution")
    r = rhs - system.matrix @ x
    res = np.linalg.norm(r) / bnorm
    if res > 1e-14:
        x = x + lu.solve(r)
        r = rhs - system.matrix @ x
        res = np.linalg.norm(r) / bnorm
    system.last_residual = float(res)
    if res > RESIDUAL_FAIL:
        raise ResidualTooLarge(f"relative residual {res:.3e}")
    if res > RESIDUAL_REPORT:
        log.warning("relative residual %.3e above %.0e", res, RESIDUAL_REPORT)
    return x


@dataclass
class StokesSystem(SparseSystem):
    layout: FaceLayout = None
    nu: float = 1.0
    D_known: sp.csr_matrix = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)

    @property
    def n_velocity(self) -> int:
        return self.layout.n_unknown_faces

    @property
    def n_pressure(self) -> int:
        return self.layout.n_fluid_cells

    def rhs(self, force: StaggeredField | None = None, boundary: StaggeredField | None = None,
            div: np.ndarray | None = None, mean: float = 0.0) -> np.ndarray:
        """Right-hand side for momentum forcing, Dirichlet data and divergence data.

        ``boundary`` supplies the values on every known face (outer, wall and
        solid faces) plus the outer wall trace; ``div`` is the prescribed
        divergence on cells.
        """
        lay = self.layout
        L, Bk, Bw = lay.neg_laplacian()
        b_mom = np.zeros(self.n_velocity)
        if force is not None:
            lay.check(force)
            b_mom += lay.gather(force)
        b_con = np.zeros(self.n_pressure)
        if boundary is not None:
            lay.check(boundary)
            known = np.concatenate([boundary.u.ravel(), boundary.v.ravel()])
            known = known.copy()
            known[lay.unknown_face_columns()] = 0.0
            b_mom += self.nu * (Bk @ known)
            if Bw is not None and boundary.wall is not None:
                b_mom += self.nu * (Bw @ boundary.wall.vector())
            b_con += self.D_known @ known
        if div is not None:
            b_con -= np.asarray(div)[lay.fluid]
        return np.concatenate([b_mom, b_con, [mean]])

    def unpack(self, x: np.ndarray, boundary: StaggeredField | None = None):
        """Split a solution vector into (velocity field, pressure array, multiplier)."""
        lay = self.layout
        nv, npr = self.n_velocity, self.n_pressure
        if boundary is None:
            base = None
        else:
            base = StaggeredField(boundary.u.copy(), boundary.v.copy(), boundary.h, boundary.periodic,
                                  boundary.wall)
        vel = lay.scatter(x[:nv], base)
        p = np.zeros(lay.solid.shape)
        p[lay.fluid] = x[nv:nv + npr]
        return vel, p, float(x[-1])

    def solve(self, force=None, boundary=None, div=None, mean: float = 0.0):
        x = solve_linear(self, self.rhs(force, boundary, div, mean))
        return self.unpack(x, boundary)


def assemble_stokes(layout: FaceLayout, nu: float = 1.0) -> StokesSystem:
    """Bordered Stokes system on ``layout`` with viscosity scale ``nu``."""
    if layout.n_fluid_cells == 0:
        raise EmptyFluid("no fluid cells")
    if layout.periodic and not layout.solid.any():
        raise IncompatiblePeriodicSystem(
            "periodic Stokes system without obstacle: unit forcing has no periodic solution")
    L, _, _ = layout.neg_laplacian()
    D = layout.divergence_matrix()
    fluid_rows = np.flatnonzero(layout.fluid.ravel())
    ucols = layout.unknown_face_columns()
    Dr = D[fluid_rows]
    D_unk = Dr[:, ucols]
    known_mask = np.ones(D.shape[1], bool)
    known_mask[ucols] = False
    D_known = Dr.multiply(known_mask[None, :]).tocsr()
    G = -D_unk.T
    h2 = layout.h ** 2
    w = np.full((layout.n_fluid_cells, 1), h2)
    nv = layout.n_unknown_faces
    A = sp.bmat([
        [nu * L, G, None],
        [G.T, None, sp.csr_matrix(w)],
        [None, sp.csr_matrix(w.T), None],
    ], format="csc")
    sysm = StokesSystem(A, 1, layout=layout, nu=nu, D_known=D_known, weights=w.ravel())
    log.debug("assembled Stokes system: %d velocity, %d pressure unknowns", nv, layout.n_fluid_cells)
    return sysm


def stokes_unknown_count(solid: np.ndarray, periodic: bool) -> int:
    lay = FaceLayout(solid, periodic, 1.0 / solid.shape[0])
    return lay.n_unknown_faces + lay.n_fluid_cells + 1


# ---------------------------------------------------------------------------
# periodic Poisson


_POISSON_CACHE: dict = {}


def periodic_poisson_system(n: int, h: float) -> SparseSystem:
    key = (n, h)
    if key not in _POISSON_CACHE:
        e = np.ones(n)
        T = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
        T[0, n - 1] = 1.0
        T[n - 1, 0] = 1.0
        T = T.tocsr()
        eye = sp.identity(n, format="csr")
        lap = (sp.kron(T, eye) + sp.kron(eye, T)) / h**2
        w = np.full((n * n, 1), h * h)
        A = sp.bmat([[lap, sp.csr_matrix(w)], [sp.csr_matrix(w.T), None]], format="csc")
        _POISSON_CACHE[key] = SparseSystem(A, 1)
    return _POISSON_CACHE[key]


def solve_poisson_periodic(rhs: np.ndarray, h: float | None = None) -> np.ndarray:
    """Mean-zero periodic solution of the five-point ``Lap f = rhs``."""
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if rhs.shape != (n, n):
        raise ValueError("periodic Poisson needs a square grid")
    h = 1.0 / n if h is None else h
    scale = np.abs(rhs).max(initial=0.0)
    if abs(rhs.mean()) > 1e-12 * max(scale, 1e-300) and scale > 0:
        raise IncompatibleRHS(f"rhs mean {rhs.mean():.3e} is not zero")
    if scale == 0.0:
        return np.zeros_like(rhs)
    system = periodic_poisson_system(n, h)
    x = solve_linear(system, np.concatenate([rhs.ravel(), [0.0]]))
    return x[:-1].reshape(n, n)
