"""Unit cell and periodically perforated unit square.

Masks are stored with the first array axis along x and the second along y,
so ``mask[i, j]`` is the cell centred at ``((i + 1/2) h, (j + 1/2) h)``.
JSON masks are row-major with row 0 at the bottom and are transposed on
ingestion.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import (
    AllSolid,
    BadPeriod,
    DisconnectedFluid,
    ResolutionMismatch,
    SolidTouchesCellBoundary,
)

# face classification codes
UNKNOWN, OUTER, WALL, SOLID = 0, 1, 2, 3


@dataclass(frozen=True)
class CellGeometry:
    solid: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def m0(self) -> int:
        return self.solid.shape[0]

    @property
    def fluid_fraction(self) -> float:
        return 1.0 - self.solid.sum() / self.solid.size

    @property
    def has_obstacle(self) -> bool:
        return bool(self.solid.any())

    def refined(self, m: int) -> np.ndarray:
        """Solid mask of the cell at ``m`` cells per side."""
        if m <= 0 or m % self.m0:
            raise ResolutionMismatch(f"M={m} is not a positive multiple of M0={self.m0}")
        r = m // self.m0
        return np.kron(self.solid, np.ones((r, r), dtype=bool)).astype(bool)

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.solid, dtype=np.uint8).tobytes()
                              + str(self.solid.shape).encode()).hexdigest()[:16]


def _periodic_components(fluid: np.ndarray) -> int:
    m, n = fluid.shape
    idx = np.arange(m * n).reshape(m, n)
    rows, cols = [], []
    for shift_axis in (0, 1):
        nb = np.roll(idx, -1, axis=shift_axis)
        both = fluid & np.roll(fluid, -1, axis=shift_axis)
        rows.append(idx[both])
        cols.append(nb[both])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(rows.size), (rows, cols)), shape=(m * n, m * n))
    _, labels = connected_components(graph, directed=False)
    return np.unique(labels[fluid.ravel()]).size


def build_cell_geometry(solid_mask) -> CellGeometry:
    solid = np.asarray(solid_mask, dtype=bool)
    if solid.ndim != 2 or solid.shape[0] != solid.shape[1]:
        raise ValueError("cell mask must be square")
    if solid.shape[0] < 4:
        raise ValueError("cell resolution M0 must be at least 4")
    if solid.all():
        raise AllSolid("cell has no fluid")
    ring = np.ones_like(solid)
    ring[1:-1, 1:-1] = False
    if (solid & ring).any():
        raise SolidTouchesCellBoundary("solid cells in the outer ring of the unit cell")
    if _periodic_components(~solid) != 1:
        raise DisconnectedFluid("fluid part is not a single periodic component")
    warnings = () if solid.any() else ("no obstacle",)
    solid = solid.copy()
    solid.setflags(write=False)
    return CellGeometry(solid=solid, warnings=warnings)


def named_cell(name: str) -> CellGeometry:
    """Built-in geometries: ``square-half`` and ``cross`` (both M0 = 8)."""
    solid = np.zeros((8, 8), dtype=bool)
    if name == "square-half":
        solid[2:6, 2:6] = True
    elif name == "cross":
        solid[3:5, 2:6] = True
        solid[2:6, 3:5] = True
    elif name == "empty":
        pass
    else:
        raise KeyError(f"unknown geometry {name!r}")
    return build_cell_geometry(solid)


def cell_from_json(spec) -> CellGeometry:
    """Accept a dict ``{"m0": int, "solid": rows}``, a JSON string or a path."""
    if isinstance(spec, (str, Path)) and not str(spec).lstrip().startswith("{"):
        spec = json.loads(Path(spec).read_text())
    elif isinstance(spec, str):
        spec = json.loads(spec)
    rows = np.asarray(spec["solid"], dtype=int)
    if rows.shape != (spec["m0"], spec["m0"]):
        raise ValueError(f"solid mask shape {rows.shape} does not match m0={spec['m0']}")
    return build_cell_geometry(rows.T.astype(bool))


def cell_to_json(cell: CellGeometry) -> dict:
    return {"m0": cell.m0, "solid": cell.solid.T.astype(int).tolist()}


def resolve_cell(geometry) -> CellGeometry:
    if isinstance(geometry, CellGeometry):
        return geometry
    if isinstance(geometry, dict):
        return cell_from_json(geometry)
    if isinstance(geometry, str) and (geometry.endswith(".json") or geometry.lstrip().startswith("{")):
        return cell_from_json(geometry)
    return named_cell(geometry)


def _face_kinds(solid: np.ndarray, periodic: bool) -> tuple[np.ndarray, np.ndarray]:
    """Classify x-faces and y-faces as UNKNOWN / OUTER / WALL / SOLID."""

    def classify(left, right):
        kind = np.full(left.shape, UNKNOWN, dtype=np.int8)
        kind[left != right] = WALL
        kind[left & right] = SOLID
        return kind

    if periodic:
        kx = classify(np.roll(solid, 1, axis=0), solid)
        ky = classify(np.roll(solid, 1, axis=1), solid)
        return kx, ky
    n0, n1 = solid.shape
    kx = np.full((n0 + 1, n1), OUTER, dtype=np.int8)
    kx[1:-1] = classify(solid[:-1], solid[1:])
    ky = np.full((n0, n1 + 1), OUTER, dtype=np.int8)
    ky[:, 1:-1] = classify(solid[:, :-1], solid[:, 1:])
    return kx, ky


@dataclass(frozen=True)
class PerforatedDomain:
    cell: CellGeometry
    n_periods: int
    cells_per_period: int
    solid: np.ndarray = field(repr=False)
    xkind: np.ndarray = field(repr=False)
    ykind: np.ndarray = field(repr=False)

    @property
    def epsilon(self) -> float:
        return 1.0 / self.n_periods

    @property
    def n(self) -> int:
        return self.n_periods * self.cells_per_period

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def fluid(self) -> np.ndarray:
        return ~self.solid

    @property
    def solid_fraction(self) -> float:
        return float(self.solid.mean())

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        c = (np.arange(self.n) + 0.5) * self.h
        return np.meshgrid(c, c, indexing="ij")

    def distance_to_boundary(self, x, y):
        return np.minimum(np.minimum(x, 1.0 - x), np.minimum(y, 1.0 - y))

    def boundary_strip(self, rho: float) -> np.ndarray:
        return boundary_strip(self, rho)

    def gamma_faces(self) -> tuple[np.ndarray, np.ndarray]:
        return self.xkind == WALL, self.ykind == WALL

    def obstacle_count(self) -> int:
        return self.n_periods ** 2 if self.cell.has_obstacle else 0


def build_perforated_domain(cell: CellGeometry, n_periods: int, cells_per_period: int) -> PerforatedDomain:
    if n_periods < 2:
        raise BadPeriod(f"N={n_periods}: need at least two periods per side")
    tile = cell.refined(cells_per_period)
    solid = np.tile(tile, (n_periods, n_periods))
    solid.setflags(write=False)
    kx, ky = _face_kinds(solid, periodic=False)
    kx.setflags(write=False)
    ky.setflags(write=False)
    return PerforatedDomain(cell, n_periods, cells_per_period, solid, kx, ky)


def boundary_strip(domain: PerforatedDomain, rho: float) -> np.ndarray:
    """Cells meeting the open strip {x : dist(x, boundary) < rho}.

    A cell qualifies when its inner edge is closer than ``rho``; this is the
    set of grid cells covering the strip.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    rho = min(rho, 0.5)
    x, y = domain.centers()
    d = domain.distance_to_boundary(x, y) - 0.5 * domain.h
    return d < rho - 1e-12 * domain.h
