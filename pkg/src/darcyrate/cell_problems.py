"""Periodic cell problems: correctors W_j, permeability K, flux potentials
and divergence correctors.

Index conventions (0-based in code): ``W[j]`` is the corrector for unit
forcing in direction ``j``; its x-component lives on x-faces and its
y-component on y-faces.  ``K[i, j]`` is the average of component ``i`` of
``W[j]``, so the Darcy velocity is ``K @ (f - grad p0)``.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import IncompatibleDivergenceData, NotPositiveDefinite
from .geometry import CellGeometry, cell_to_json
from .grid_ops import (
    FaceLayout,
    StaggeredField,
    divergence,
    velocity_gradient,
    write_arrays,
)
from .saddle import assemble_stokes, solve_poisson_periodic

log = logging.getLogger(__name__)


@dataclass
class CellSolution:
    cell: CellGeometry
    m: int
    layout: FaceLayout = field(repr=False)
    W: list[StaggeredField] = field(repr=False)
    pi: list[np.ndarray] = field(repr=False)
    K_avg: np.ndarray | None = None
    K_energy: np.ndarray | None = None
    potentials: np.ndarray | None = field(default=None, repr=False)  # f[j, l] on the l-face lattice
    phi_nodes: np.ndarray | None = field(default=None, repr=False)  # phi_{1j}^2 at nodes, per j
    chi: dict | None = field(default=None, repr=False)  # (i, k) -> StaggeredField
    pi2: dict | None = field(default=None, repr=False)
    residuals: dict = field(default_factory=dict)

    @property
    def h(self) -> float:
        return 1.0 / self.m

    @property
    def fluid_fraction(self) -> float:
        return float(self.layout.fluid.mean())

    @property
    def K(self) -> np.ndarray:
        return self.K_energy

    def W_component(self, j: int, comp: int) -> np.ndarray:
        return self.W[j].u if comp == 0 else self.W[j].v

    def phi(self, i: int, j: int, l: int) -> np.ndarray:
        """phi_{ij}^l at nodes; only the (0, 1) pair is independent in 2D."""
        if i == l:
            return np.zeros((self.m, self.m))
        sign = 1.0 if (i, l) == (0, 1) else -1.0
        return sign * self.phi_nodes[j]

    def digest(self) -> str:
        return hashlib.sha256(f"{self.cell.digest()}:{self.m}".encode()).hexdigest()[:16]


def solve_cell_problems(cell: CellGeometry, m: int) -> CellSolution:
    """Periodic Stokes solves with unit forcing e_j and zero velocity on the obstacle."""
    solid = cell.refined(m)
    layout = FaceLayout(solid, True, 1.0 / m)
    system = assemble_stokes(layout, 1.0)
    W, pi, res = [], [], {}
    for j in range(2):
        force = StaggeredField(np.full((m, m), float(j == 0)), np.full((m, m), float(j == 1)), layout.h, True)
        vel, p, _ = system.solve(force=force)
        W.append(vel)
        pi.append(p)
        res[f"W{j}"] = system.last_residual
    sol = CellSolution(cell, m, layout, W, pi, residuals=res)
    permeability(sol)
    return sol


def _energy(a: StaggeredField, b: StaggeredField, layout: FaceLayout) -> float:
    ga = velocity_gradient(a, layout.xkind, layout.ykind)
    gb = velocity_gradient(b, layout.xkind, layout.ykind)
    s = 0.0
    for (name, x), (_, y) in zip(ga.components(), gb.components()):
        s += float((ga.weights[name] * (x * y)).sum())
    return s


def permeability(sol: CellSolution) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(K_avg, K_energy)`` and store them on the solution."""
    h2 = sol.h ** 2
    K_avg = np.array([[h2 * sol.W_component(j, i).sum() for j in range(2)] for i in range(2)])
    K_energy = np.empty((2, 2))
    for i in range(2):
        for j in range(i, 2):
            # one accumulation per pair, mirrored: exact symmetry
            K_energy[i, j] = _energy(sol.W[i], sol.W[j], sol.layout)
            K_energy[j, i] = K_energy[i, j]
    eig = np.linalg.eigvalsh(K_energy)
    if eig.min() <= 0:
        raise NotPositiveDefinite(f"K_energy eigenvalues {eig}")
    sol.K_avg, sol.K_energy = K_avg, K_energy
    return K_avg, K_energy


def flux_potentials(sol: CellSolution) -> np.ndarray:
    """Skew potentials with d/dy_i phi_{ij}^l = W_j^l - K_avg[l, j].

    Each f_j^l is solved on the lattice of faces carrying component ``l`` so
    the discrete divergence of (f_j^1, f_j^2) vanishes with div W_j.
    """
    m, h = sol.m, sol.h
    pots = np.empty((2, 2, m, m))
    for j in range(2):
        for l in range(2):
            rhs = sol.W_component(j, l) - sol.K_avg[l, j]
            pots[j, l] = solve_poisson_periodic(rhs, h)
    phi = np.empty((2, m, m))
    for j in range(2):
        f1, f2 = pots[j, 0], pots[j, 1]
        # node (a, b): between y-faces (a-1, b), (a, b) and x-faces (a, b-1), (a, b)
        phi[j] = (f2 - np.roll(f2, 1, 0)) / h - (f1 - np.roll(f1, 1, 1)) / h
    sol.potentials, sol.phi_nodes = pots, phi
    return phi


def phi_identity_residual(sol: CellSolution) -> float:
    """max | sum_i d_i phi_{ij}^l - (W_j^l - K_avg[l, j]) | over j, l."""
    h = sol.h
    worst = 0.0
    for j in range(2):
        ph = sol.phi_nodes[j]
        # l = 0 on x-faces: d_1 phi_{1j}^0 = -d_1 phi_nodes (nodes (a,b),(a,b+1))
        lhs0 = -(np.roll(ph, -1, 1) - ph) / h
        # l = 1 on y-faces: d_0 phi_{0j}^1 (nodes (a,b),(a+1,b))
        lhs1 = (np.roll(ph, -1, 0) - ph) / h
        worst = max(worst,
                    float(np.abs(lhs0 - (sol.W_component(j, 0) - sol.K_avg[0, j])).max()),
                    float(np.abs(lhs1 - (sol.W_component(j, 1) - sol.K_avg[1, j])).max()))
    return worst


def center_average(sol: CellSolution, j: int, comp: int) -> np.ndarray:
    a = sol.W_component(j, comp)
    return 0.5 * (a + np.roll(a, -1, comp))


def divergence_correctors(sol: CellSolution, tol: float = 1e-10) -> dict:
    """chi_{ik}: periodic Stokes with div chi_{ik} = -W_k^i + K_avg[i, k] / |Y_f|."""
    lay = sol.layout
    system = assemble_stokes(lay, 1.0)
    yf = lay.fluid.mean()
    chi, pi2 = {}, {}
    for i in range(2):
        for k in range(2):
            g = -center_average(sol, k, i) + sol.K_avg[i, k] / yf
            g = np.where(lay.fluid, g, 0.0)
            compat = float(g.sum() * sol.h ** 2)
            if abs(compat) > tol:
                raise IncompatibleDivergenceData(f"compatibility integral {compat:.3e} for (i, k)=({i}, {k})")
            vel, p, _ = system.solve(div=g)
            chi[i, k] = vel
            pi2[i, k] = p
            sol.residuals[f"chi{i}{k}"] = system.last_residual
    sol.chi, sol.pi2 = chi, pi2
    return chi


def divergence_target(sol: CellSolution, i: int, k: int) -> np.ndarray:
    yf = sol.layout.fluid.mean()
    g = -center_average(sol, k, i) + sol.K_avg[i, k] / yf
    return np.where(sol.layout.fluid, g, 0.0)


def chi_divergence_residual(sol: CellSolution) -> float:
    worst = 0.0
    for (i, k), c in sol.chi.items():
        d = divergence(c, sol.layout.fluid).values
        worst = max(worst, float(np.abs(d - divergence_target(sol, i, k)).max()))
    return worst


def solve_all(cell: CellGeometry, m: int) -> CellSolution:
    sol = solve_cell_problems(cell, m)
    flux_potentials(sol)
    divergence_correctors(sol)
    return sol


# ---------------------------------------------------------------------------
# persistence


def save_cell_solution(sol: CellSolution, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "K.csv", sol.K_energy, delimiter=",", fmt="%.17g")
    np.savetxt(out / "K_avg.csv", sol.K_avg, delimiter=",", fmt="%.17g")
    arrays = {}
    for j in range(2):
        arrays[f"W{j}.u"] = sol.W[j].u
        arrays[f"W{j}.v"] = sol.W[j].v
        arrays[f"pi{j}"] = sol.pi[j]
    if sol.phi_nodes is not None:
        arrays["phi"] = sol.phi_nodes
    if sol.chi is not None:
        for (i, k), c in sol.chi.items():
            arrays[f"chi{i}{k}.u"] = c.u
            arrays[f"chi{i}{k}.v"] = c.v
            arrays[f"pi2_{i}{k}"] = sol.pi2[i, k]
    write_arrays(out / "fields.bin", arrays)
    manifest = {
        "m0": sol.cell.m0,
        "m": sol.m,
        "geometry_hash": sol.cell.digest(),
        "geometry": cell_to_json(sol.cell),
        "fluid_fraction": sol.fluid_fraction,
        "residuals": sol.residuals,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return out


def load_permeability(path) -> np.ndarray:
    """Read a 2x2 permeability from ``K.csv`` or from a cell output directory."""
    p = Path(path)
    if p.is_dir():
        p = p / "K.csv"
    return np.loadtxt(p, delimiter=",").reshape(2, 2)
