import numpy as np
import pytest
import scipy.sparse as sp

from darcyrate.errors import IncompatiblePeriodicSystem, IncompatibleRHS
from darcyrate.geometry import build_perforated_domain, named_cell
from darcyrate.grid_ops import FaceLayout, StaggeredField, divergence, sample_faces
from darcyrate.saddle import (
    SparseSystem,
    assemble_stokes,
    solve_linear,
    solve_poisson_periodic,
    stokes_unknown_count,
)

from conftest import small_cell


def brute_force_count(solid):
    """Unknown faces of a periodic grid: both neighbouring cells fluid."""
    m = solid.shape[0]
    faces = 0
    for i in range(m):
        for j in range(m):
            if not solid[i - 1, j] and not solid[i, j]:
                faces += 1
            if not solid[i, j - 1] and not solid[i, j]:
                faces += 1
    cells = sum(1 for i in range(m) for j in range(m) if not solid[i, j])
    return faces, cells


def test_periodic_unknown_count():
    solid = small_cell().solid
    faces, cells = brute_force_count(solid)
    assert (faces, cells) == (20, 12)
    assert stokes_unknown_count(solid, True) == faces + cells + 1
    system = assemble_stokes(FaceLayout(solid, True, 0.25))
    assert system.dim == faces + cells + 1


def test_no_obstacle_periodic_rejected():
    with pytest.raises(IncompatiblePeriodicSystem):
        assemble_stokes(FaceLayout(np.zeros((8, 8), bool), True, 1 / 8))


def test_dirichlet_zero_data_gives_zero():
    n = 8
    system = assemble_stokes(FaceLayout(np.zeros((n, n), bool), False, 1 / n))
    u, p, lam = system.solve()
    assert u.max_abs() == 0.0 and np.all(p == 0.0) and lam == 0.0


def test_saddle_blocks_structure():
    d = build_perforated_domain(small_cell(), 2, 4)
    lay = FaceLayout.for_domain(d)
    system = assemble_stokes(lay, 0.3)
    A = system.matrix
    assert A.shape[0] == A.shape[1]
    assert abs(A - A.T).max() == 0.0
    nv, npr = system.n_velocity, system.n_pressure
    D = lay.divergence_matrix()[np.flatnonzero(lay.fluid.ravel())][:, lay.unknown_face_columns()]
    B = A[:nv, nv:nv + npr]
    assert abs(B + D.T).max() == 0.0
    assert A[nv + npr, nv:nv + npr].sum() == pytest.approx(lay.n_fluid_cells * lay.h**2, rel=1e-14)


def test_identity_system():
    rhs = np.array([1.0, -2.0, 3.5])
    assert np.array_equal(solve_linear(sp.identity(3, format="csc"), rhs), rhs)


def test_three_point_poisson():
    h = 0.25
    A = sp.csc_matrix(np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]]) / h**2)
    x = solve_linear(A, np.ones(3))
    assert np.allclose(x, [3 / 32, 1 / 8, 3 / 32], rtol=0, atol=1e-15)


def test_random_spd_residual():
    rng = np.random.default_rng(11)
    M = sp.random(50, 50, density=0.1, random_state=rng)
    A = (M @ M.T + 50 * sp.identity(50)).tocsc()
    b = rng.standard_normal(50)
    system = SparseSystem(A)
    x = solve_linear(system, b)
    assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) <= 1e-10
    assert system.last_residual <= 1e-10


def test_periodic_poisson_zero_and_incompatible():
    assert np.all(solve_poisson_periodic(np.zeros((8, 8))) == 0.0)
    with pytest.raises(IncompatibleRHS):
        solve_poisson_periodic(np.ones((8, 8)))


@pytest.mark.parametrize("n", [8, 16, 32])
def test_periodic_poisson_eigenfunction(n):
    h = 1 / n
    x = (np.arange(n) + 0.5) * h
    rhs = np.repeat(np.cos(2 * np.pi * x)[:, None], n, axis=1)
    f = solve_poisson_periodic(rhs, h)
    amp = -h**2 / (2 - 2 * np.cos(2 * np.pi * h))
    assert np.abs(f - amp * rhs).max() < 1e-12
    # and the continuum amplitude is approached at second order
    assert abs(amp + 1 / (2 * np.pi) ** 2) < 0.1 * h**2


@pytest.fixture(scope="module")
def perforated():
    d = build_perforated_domain(named_cell("square-half"), 2, 16)
    lay = FaceLayout.for_domain(d)
    force = sample_faces(lambda x, y: (np.sin(3 * y), np.cos(2 * x) + x), d.n, d.h, with_wall=False)
    return d, lay, force


def test_incompressibility_and_pressure_mean(perforated):
    d, lay, force = perforated
    system = assemble_stokes(lay, 0.25)
    u, p, _ = system.solve(force=force)
    assert np.abs(divergence(u, d.fluid).values).max() <= 1e-10
    assert abs(p[d.fluid].mean()) <= 1e-10
    assert system.last_residual <= 1e-10


def test_scaling_covariance(perforated):
    d, lay, force = perforated
    s = 7.0
    u1, p1, _ = assemble_stokes(lay, 0.25).solve(force=force)
    u2, p2, _ = assemble_stokes(lay, 0.25 * s).solve(force=force.scaled(s))
    assert np.allclose(u2.u, u1.u, atol=1e-12 * u1.max_abs())
    assert np.allclose(u2.v, u1.v, atol=1e-12 * u1.max_abs())
    assert np.allclose(p2, s * p1, atol=1e-11 * s * np.abs(p1).max())


def test_boundary_data_enters_exactly():
    n = 8
    lay = FaceLayout(np.zeros((n, n), bool), False, 1 / n)
    b = sample_faces(lambda x, y: (y * (1 - y) + 0 * x, 0 * y), n, 1 / n)
    u, _, _ = assemble_stokes(lay, 1.0).solve(boundary=b)
    assert np.array_equal(u.u[[0, -1]], b.u[[0, -1]])
    assert isinstance(u, StaggeredField)
