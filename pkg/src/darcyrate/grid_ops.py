"""Staggered (MAC) grid operators on the unit square and on the periodic cell.

Layout, with ``n`` cells per side and spacing ``h``:

* pressure-like scalars at cell centres, shape ``(n, n)``;
* x-velocity on vertical faces ``(i h, (j + 1/2) h)``, shape ``(n + 1, n)``
  (periodic grids drop the duplicate last column of faces, shape ``(n, n)``);
* y-velocity on horizontal faces ``((i + 1/2) h, j h)``, shape ``(n, n + 1)``.

Tangential Dirichlet values on the outer boundary live at the wall points
under/over the first row of faces and are kept in a :class:`WallTrace`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch
from .geometry import OUTER, SOLID, UNKNOWN, WALL, _face_kinds

WALL_SIDES = ("south", "north", "west", "east")


@dataclass
class WallTrace:
    """Tangential values on the four sides of the square.

    ``south``/``north`` hold the x-component at ``(i h, 0)``/``(i h, 1)`` and
    ``west``/``east`` the y-component at ``(0, j h)``/``(1, j h)``, each with
    ``n + 1`` samples.
    """

    south: np.ndarray
    north: np.ndarray
    west: np.ndarray
    east: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "WallTrace":
        return cls(*(np.zeros(n + 1) for _ in WALL_SIDES))

    def vector(self) -> np.ndarray:
        return np.concatenate([self.south, self.north, self.west, self.east])

    def __add__(self, other):
        return WallTrace(*(getattr(self, s) + getattr(other, s) for s in WALL_SIDES))

    def __sub__(self, other):
        return WallTrace(*(getattr(self, s) - getattr(other, s) for s in WALL_SIDES))

    def scaled(self, c: float) -> "WallTrace":
        return WallTrace(*(c * getattr(self, s) for s in WALL_SIDES))

    def max_abs(self) -> float:
        return max(float(np.abs(getattr(self, s)).max(initial=0.0)) for s in WALL_SIDES)


@dataclass
class ScalarField:
    values: np.ndarray
    h: float
    mask: np.ndarray | None = None

    def active(self) -> np.ndarray:
        return np.ones(self.values.shape, bool) if self.mask is None else self.mask


@dataclass
class StaggeredField:
    u: np.ndarray
    v: np.ndarray
    h: float
    periodic: bool = False
    wall: WallTrace | None = None

    @property
    def n(self) -> int:
        return self.v.shape[0]

    def __post_init__(self):
        n = self.v.shape[0]
        want_u = (n, n) if self.periodic else (n + 1, n)
        want_v = (n, n) if self.periodic else (n, n + 1)
        if self.u.shape != want_u or self.v.shape != want_v:
            raise DimensionMismatch(f"face arrays {self.u.shape}, {self.v.shape} do not form a staggered grid")

    def __add__(self, other: "StaggeredField") -> "StaggeredField":
        _check_same(self, other)
        wall = None
        if self.wall is not None or other.wall is not None:
            wall = (self.wall or WallTrace.zeros(self.n)) + (other.wall or WallTrace.zeros(self.n))
        return StaggeredField(self.u + other.u, self.v + other.v, self.h, self.periodic, wall)

    def __sub__(self, other: "StaggeredField") -> "StaggeredField":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "StaggeredField":
        wall = None if self.wall is None else self.wall.scaled(c)
        return StaggeredField(c * self.u, c * self.v, self.h, self.periodic, wall)

    def max_abs(self) -> float:
        m = max(float(np.abs(self.u).max()), float(np.abs(self.v).max()))
        if self.wall is not None:
            m = max(m, self.wall.max_abs())
        return m

    @classmethod
    def zeros(cls, n: int, h: float, periodic: bool = False) -> "StaggeredField":
        if periodic:
            return cls(np.zeros((n, n)), np.zeros((n, n)), h, True)
        return cls(np.zeros((n + 1, n)), np.zeros((n, n + 1)), h, False, WallTrace.zeros(n))


def _check_same(a: StaggeredField, b: StaggeredField) -> None:
    if a.u.shape != b.u.shape or a.v.shape != b.v.shape or a.periodic != b.periodic:
        raise DimensionMismatch("fields live on different grids")


def sample_faces(fn, n: int, h: float, periodic: bool = False, with_wall: bool = True) -> StaggeredField:
    """Sample a vector function ``fn(x, y) -> (fx, fy)`` on the faces."""
    nu = n if periodic else n + 1
    xi = np.arange(nu) * h
    c = (np.arange(n) + 0.5) * h
    xu, yu = np.meshgrid(xi, c, indexing="ij")
    xv, yv = np.meshgrid(c, xi, indexing="ij")
    u = np.asarray(fn(xu, yu)[0], dtype=float) * np.ones(xu.shape)
    v = np.asarray(fn(xv, yv)[1], dtype=float) * np.ones(xv.shape)
    wall = None
    if not periodic and with_wall:
        s = np.arange(n + 1) * h
        z, o = np.zeros(n + 1), np.ones(n + 1)
        wall = WallTrace(
            np.asarray(fn(s, z)[0], float) * o,
            np.asarray(fn(s, o)[0], float) * o,
            np.asarray(fn(z, s)[1], float) * o,
            np.asarray(fn(o, s)[1], float) * o,
        )
    return StaggeredField(u, v, h, periodic, wall)


def sample_centers(fn, n: int, h: float) -> np.ndarray:
    c = (np.arange(n) + 0.5) * h
    x, y = np.meshgrid(c, c, indexing="ij")
    return np.asarray(fn(x, y), dtype=float) * np.ones(x.shape)


# ---------------------------------------------------------------------------
# plain operators


def divergence(field: StaggeredField, mask: np.ndarray | None = None) -> ScalarField:
    h = field.h
    if field.periodic:
        d = (np.roll(field.u, -1, 0) - field.u + np.roll(field.v, -1, 1) - field.v) / h
    else:
        d = (field.u[1:] - field.u[:-1] + field.v[:, 1:] - field.v[:, :-1]) / h
    if mask is not None:
        if mask.shape != d.shape:
            raise DimensionMismatch("mask shape differs from the cell grid")
        d = np.where(mask, d, 0.0)
    return ScalarField(d, h, mask)


def gradient(p: ScalarField, periodic: bool = False) -> StaggeredField:
    """Two-point face gradient; outer boundary faces carry 0 (Neumann tag)."""
    v, h = p.values, p.h
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise DimensionMismatch("scalar field must be square")
    if periodic:
        return StaggeredField((v - np.roll(v, 1, 0)) / h, (v - np.roll(v, 1, 1)) / h, h, True)
    n = v.shape[0]
    gu = np.zeros((n + 1, n))
    gv = np.zeros((n, n + 1))
    gu[1:-1] = (v[1:] - v[:-1]) / h
    gv[:, 1:-1] = (v[:, 1:] - v[:, :-1]) / h
    return StaggeredField(gu, gv, h, False, WallTrace.zeros(n))


def laplacian(field: StaggeredField, layout: "FaceLayout") -> StaggeredField:
    """Five-point Laplacian on unknown faces; zero on every other face."""
    layout.check(field)
    L, Bk, Bw = layout.neg_laplacian()
    x = layout.gather(field)
    known = np.concatenate([field.u.ravel(), field.v.ravel()])
    r = -(L @ x) + Bk @ known
    if Bw is not None and field.wall is not None:
        r = r + Bw @ field.wall.vector()
    return layout.scatter(r)


def inner(a: StaggeredField, b: StaggeredField) -> float:
    """Face inner product with weight h^2 (boundary faces half-weighted)."""
    _check_same(a, b)
    wu, wv = face_weights(a.n, a.h, a.periodic)
    return float((wu * a.u * b.u).sum() + (wv * a.v * b.v).sum())


def face_weights(n: int, h: float, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    if periodic:
        w = np.full((n, n), h * h)
        return w, w.copy()
    wu = np.full((n + 1, n), h * h)
    wu[[0, -1]] *= 0.5
    wv = np.full((n, n + 1), h * h)
    wv[:, [0, -1]] *= 0.5
    return wu, wv


def l2_norm(field, mask: np.ndarray | None = None, h: float | None = None) -> float:
    """Discrete L2 norm; scalar arrays use weight h^2 per active cell."""
    if isinstance(field, StaggeredField):
        wu, wv = face_weights(field.n, field.h, field.periodic)
        if mask is not None:
            mu, mv = mask
            wu, wv = wu * mu, wv * mv
        return float(np.sqrt((wu * field.u**2).sum() + (wv * field.v**2).sum()))
    if isinstance(field, ScalarField):
        vals, h = field.values, field.h
        mask = field.mask if mask is None else mask
    else:
        vals = np.asarray(field, dtype=float)
        if h is None:
            raise ValueError("h required for bare arrays")
    if mask is not None:
        vals = np.where(mask, vals, 0.0)
    return float(np.sqrt(h * h * (vals**2).sum()))


def boundary_trace_norm(field: StaggeredField, tangential: bool = True) -> float:
    """L2 norm of the trace on the square's boundary (midpoint rule).

    Normal components come from the outer face values; tangential components,
    when a wall trace is present, from the wall points with half weight at
    the corners.
    """
    if field.periodic:
        raise DimensionMismatch("periodic fields have no outer boundary")
    h = field.h
    s = h * ((field.u[0] ** 2).sum() + (field.u[-1] ** 2).sum()
             + (field.v[:, 0] ** 2).sum() + (field.v[:, -1] ** 2).sum())
    if tangential and field.wall is not None:
        w = np.full(field.n + 1, h)
        w[[0, -1]] *= 0.5
        s += sum((w * getattr(field.wall, side) ** 2).sum() for side in WALL_SIDES)
    return float(np.sqrt(s))


def boundary_flux(field: StaggeredField) -> float:
    """Midpoint-rule integral of u . n over the boundary."""
    h = field.h
    return float(h * (field.u[-1].sum() - field.u[0].sum() + field.v[:, -1].sum() - field.v[:, 0].sum()))


def normal_trace(field: StaggeredField) -> dict[str, np.ndarray]:
    """u . n on the four sides, each of length n."""
    return {
        "west": -field.u[0],
        "east": field.u[-1],
        "south": -field.v[:, 0],
        "north": field.v[:, -1],
    }


# ---------------------------------------------------------------------------
# layout with face classification and sparse operators


@dataclass
class FaceLayout:
    """Face classification plus unknown numbering for one grid."""

    solid: np.ndarray
    periodic: bool
    h: float
    xkind: np.ndarray = field(init=False, repr=False)
    ykind: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.solid = np.asarray(self.solid, dtype=bool)
        self.xkind, self.ykind = _face_kinds(self.solid, self.periodic)
        self.ix = np.full(self.xkind.shape, -1, dtype=np.int64)
        self.iy = np.full(self.ykind.shape, -1, dtype=np.int64)
        mx = self.xkind == UNKNOWN
        my = self.ykind == UNKNOWN
        self.nux = int(mx.sum())
        self.nuy = int(my.sum())
        self.ix[mx] = np.arange(self.nux)
        self.iy[my] = self.nux + np.arange(self.nuy)
        self.fluid = ~self.solid
        self.icell = np.full(self.solid.shape, -1, dtype=np.int64)
        self.icell[self.fluid] = np.arange(int(self.fluid.sum()))
        self._cache: dict = {}

    @classmethod
    def for_domain(cls, domain) -> "FaceLayout":
        return cls(domain.solid, False, domain.h)

    @property
    def n(self) -> int:
        return self.solid.shape[0]

    @property
    def n_unknown_faces(self) -> int:
        return self.nux + self.nuy

    @property
    def n_fluid_cells(self) -> int:
        return int(self.fluid.sum())

    def check(self, f: StaggeredField) -> None:
        if f.u.shape != self.xkind.shape or f.v.shape != self.ykind.shape or f.periodic != self.periodic:
            raise DimensionMismatch("field does not match layout")

    def gather(self, f: StaggeredField) -> np.ndarray:
        return np.concatenate([f.u[self.xkind == UNKNOWN], f.v[self.ykind == UNKNOWN]])

    def scatter(self, x: np.ndarray, base: StaggeredField | None = None) -> StaggeredField:
        if base is None:
            u = np.zeros(self.xkind.shape)
            v = np.zeros(self.ykind.shape)
            wall = None if self.periodic else WallTrace.zeros(self.n)
        else:
            u, v = base.u.copy(), base.v.copy()
            wall = base.wall
        u[self.xkind == UNKNOWN] = x[: self.nux]
        v[self.ykind == UNKNOWN] = x[self.nux:]
        return StaggeredField(u, v, self.h, self.periodic, wall)

    # -- operators ---------------------------------------------------------

    def neg_laplacian(self):
        """Return ``(L, Bk, Bw)`` with ``-Lap u = L u_unknown - Bk u_all - Bw wall``.

        ``L`` is symmetric positive definite on the unknown faces, ``Bk`` maps
        the flattened vector of all face values (x-faces then y-faces) and
        ``Bw`` the wall-trace vector (``None`` on periodic grids).
        """
        if "lap" in self._cache:
            return self._cache["lap"]
        n = self.n
        h2 = self.h * self.h
        nfx = self.xkind.size
        rows, cols, vals = [], [], []
        krows, kcols, kvals = [], [], []
        wrows, wcols, wvals = [], [], []
        diag = np.full(self.n_unknown_faces, 4.0)

        def handle(comp_kind, comp_idx, offset, I, J, axis_along):
            # axis_along: axis of the component (0 for x-faces, 1 for y-faces)
            row = comp_idx[I, J]
            shape = comp_kind.shape
            for axis in (0, 1):
                for step in (-1, 1):
                    if axis == 0:
                        nI, nJ = I + step, J
                    else:
                        nI, nJ = I, J + step
                    if self.periodic:
                        nI, nJ = nI % shape[0], nJ % shape[1]
                        inside = np.ones(I.size, bool)
                    else:
                        inside = (nI >= 0) & (nI < shape[0]) & (nJ >= 0) & (nJ < shape[1])
                    cI, cJ = np.where(inside, nI, 0), np.where(inside, nJ, 0)
                    k = comp_kind[cI, cJ]
                    unk = inside & (k == UNKNOWN)
                    rows.append(row[unk])
                    cols.append(comp_idx[cI[unk], cJ[unk]])
                    vals.append(np.full(unk.sum(), -1.0))
                    known = inside & ((k == OUTER) | (k == WALL))
                    krows.append(row[known])
                    kcols.append(offset + np.ravel_multi_index((cI[known], cJ[known]), shape))
                    kvals.append(np.ones(known.sum()))
                    ghost = inside & (k == SOLID)
                    np.add.at(diag, row[ghost], 1.0)
                    out = ~inside
                    if out.any():
                        # outer wall at half spacing: ghost = 2 * wall - u
                        np.add.at(diag, row[out], 1.0)
                        if axis_along == 0:
                            side = 0 if step < 0 else 1  # south / north
                            pos = I[out]
                        else:
                            side = 2 if step < 0 else 3  # west / east
                            pos = J[out]
                        wrows.append(row[out])
                        wcols.append(side * (n + 1) + pos)
                        wvals.append(np.full(out.sum(), 2.0))

        I, J = np.nonzero(self.xkind == UNKNOWN)
        handle(self.xkind, self.ix, 0, I, J, 0)
        I, J = np.nonzero(self.ykind == UNKNOWN)
        handle(self.ykind, self.iy, nfx, I, J, 1)

        nu = self.n_unknown_faces
        r = np.concatenate(rows + [np.arange(nu)])
        c = np.concatenate(cols + [np.arange(nu)])
        v = np.concatenate(vals + [diag])
        L = sp.csr_matrix((v / h2, (r, c)), shape=(nu, nu))
        nall = self.xkind.size + self.ykind.size
        Bk = sp.csr_matrix((np.concatenate(kvals) / h2, (np.concatenate(krows), np.concatenate(kcols))),
                           shape=(nu, nall))
        Bw = None
        if not self.periodic:
            if wrows:
                Bw = sp.csr_matrix((np.concatenate(wvals) / h2, (np.concatenate(wrows), np.concatenate(wcols))),
                                   shape=(nu, 4 * (n + 1)))
            else:
                Bw = sp.csr_matrix((nu, 4 * (n + 1)))
        self._cache["lap"] = (L, Bk, Bw)
        return self._cache["lap"]

    def divergence_matrix(self) -> sp.csr_matrix:
        """Divergence from all faces (x then y) to all cells."""
        if "div" in self._cache:
            return self._cache["div"]
        n, h = self.n, self.h
        I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        I, J = I.ravel(), J.ravel()
        cell = I * n + J
        sx, sy = self.xkind.shape, self.ykind.shape
        if self.periodic:
            e = np.ravel_multi_index(((I + 1) % n, J), sx)
            nn = self.xkind.size + np.ravel_multi_index((I, (J + 1) % n), sy)
        else:
            e = np.ravel_multi_index((I + 1, J), sx)
            nn = self.xkind.size + np.ravel_multi_index((I, J + 1), sy)
        w = np.ravel_multi_index((I, J), sx)
        s = self.xkind.size + np.ravel_multi_index((I, J), sy)
        r = np.concatenate([cell] * 4)
        c = np.concatenate([e, w, nn, s])
        v = np.concatenate([np.ones(n * n), -np.ones(n * n), np.ones(n * n), -np.ones(n * n)]) / h
        D = sp.csr_matrix((v, (r, c)), shape=(n * n, self.xkind.size + self.ykind.size))
        self._cache["div"] = D
        return D

    def unknown_face_columns(self) -> np.ndarray:
        return np.concatenate([np.flatnonzero(self.xkind.ravel() == UNKNOWN),
                               self.xkind.size + np.flatnonzero(self.ykind.ravel() == UNKNOWN)])


# ---------------------------------------------------------------------------
# velocity gradient with quadrature weights


@dataclass
class GradientTensor:
    """Components of grad(u) at their natural staggered locations.

    ``dudx``/``dvdy`` sit at cell centres, ``dudy``/``dvdx`` at nodes.  Each
    component carries its own quadrature weights; near obstacle and outer
    walls the node weights are halved to account for the half-cell spacing.
    """

    dudx: np.ndarray
    dvdy: np.ndarray
    dudy: np.ndarray
    dvdx: np.ndarray
    weights: dict

    def components(self):
        return (("dudx", self.dudx), ("dvdy", self.dvdy), ("dudy", self.dudy), ("dvdx", self.dvdx))

    def norm(self, masks: dict | None = None) -> float:
        s = 0.0
        for name, g in self.components():
            w = self.weights[name]
            if masks is not None and name in masks:
                w = w * masks[name]
            s += float((w * g * g).sum())
        return float(np.sqrt(s))


def _cross_derivative(vals, kind, h, periodic, axis, lo_wall=None, hi_wall=None):
    """Derivative of face values across ``axis`` evaluated at nodes.

    A solid-interior face next to a non-solid one marks an obstacle wall half
    way between them; the difference then uses the wall value 0 over h/2.
    """
    a = np.moveaxis(vals, axis, -1)
    k = np.moveaxis(kind, axis, -1)
    if periodic:
        lo, hi = np.roll(a, 1, -1), a
        klo, khi = np.roll(k, 1, -1), k
    else:
        shape = a.shape[:-1] + (a.shape[-1] + 1,)
        lo = np.empty(shape)
        hi = np.empty(shape)
        lo[..., 1:] = a
        hi[..., :-1] = a
        lo[..., 0] = 0.0 if lo_wall is None else lo_wall
        hi[..., -1] = 0.0 if hi_wall is None else hi_wall
        klo = np.full(shape, -1, dtype=np.int8)
        khi = np.full(shape, -1, dtype=np.int8)
        klo[..., 1:] = k
        khi[..., :-1] = k
        # outer walls: half spacing, wall value stored in place of the face
        klo[..., 0] = -2
        khi[..., -1] = -2
    slo = klo == SOLID
    shi = khi == SOLID
    half = (slo ^ shi) | (klo == -2) | (khi == -2)
    lo = np.where(slo, 0.0, lo)
    hi = np.where(shi, 0.0, hi)
    d = np.where(half, (hi - lo) / (0.5 * h), (hi - lo) / h)
    d = np.where(slo & shi, 0.0, d)
    wfac = np.where(half, 0.5, 1.0)
    wfac = np.where(slo & shi, 0.0, wfac)
    return np.moveaxis(d, -1, axis), np.moveaxis(wfac, -1, axis)


def velocity_gradient(field: StaggeredField, xkind: np.ndarray, ykind: np.ndarray) -> GradientTensor:
    """Discrete gradient whose squared norm reproduces the Laplacian's energy.

    For fields vanishing on every Dirichlet face, ``norm()**2`` equals
    ``<-Lap u, u>`` exactly.
    """
    h, n, periodic = field.h, field.n, field.periodic
    if periodic:
        dudx = (np.roll(field.u, -1, 0) - field.u) / h
        dvdy = (np.roll(field.v, -1, 1) - field.v) / h
    else:
        dudx = (field.u[1:] - field.u[:-1]) / h
        dvdy = (field.v[:, 1:] - field.v[:, :-1]) / h
    wall = field.wall
    lo_s = hi_n = lo_w = hi_e = None
    if not periodic and wall is not None:
        lo_s, hi_n, lo_w, hi_e = wall.south, wall.north, wall.west, wall.east
    dudy, fu = _cross_derivative(field.u, xkind, h, periodic, 1, lo_s, hi_n)
    dvdx, fv = _cross_derivative(field.v, ykind, h, periodic, 0, lo_w, hi_e)
    w_center = np.full((n, n), h * h)
    if periodic:
        w_u = w_v = np.full((n, n), h * h)
    else:
        # half weight on the outer face rows; the half spacing at walls is in fu, fv
        w_u = np.full((n + 1, n + 1), h * h)
        w_u[[0, -1], :] *= 0.5
        w_v = np.full((n + 1, n + 1), h * h)
        w_v[:, [0, -1]] *= 0.5
    weights = {"dudx": w_center, "dvdy": w_center, "dudy": w_u * fu, "dvdx": w_v * fv}
    return GradientTensor(dudx, dvdy, dudy, dvdx, weights)


# ---------------------------------------------------------------------------
# serialization

_MAGIC = b"DRF1"


def write_arrays(path, arrays: dict[str, np.ndarray]) -> None:
    """Binary container: magic, count, then per array name/dims/float64 data."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype="<f8")
            key = name.encode()
            fh.write(struct.pack("<I", len(key)))
            fh.write(key)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}q", *arr.shape))
            fh.write(arr.tobytes())
    tmp.replace(path)


def read_arrays(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a field container")
    pos = 4
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    out = {}
    for _ in range(count):
        (klen,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + klen].decode()
        pos += klen
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    return out


def field_arrays(prefix: str, f) -> dict[str, np.ndarray]:
    if isinstance(f, ScalarField):
        return {prefix: f.values}
    out = {f"{prefix}.u": f.u, f"{prefix}.v": f.v}
    if f.wall is not None:
        out[f"{prefix}.wall"] = np.stack([getattr(f.wall, s) for s in WALL_SIDES])
    return out


def write_csv(path, values: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(values), delimiter=",", fmt="%.17g")
