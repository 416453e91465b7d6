import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darcyrate.errors import DimensionMismatch
from darcyrate.geometry import build_perforated_domain, named_cell
from darcyrate.grid_ops import (
    FaceLayout,
    ScalarField,
    StaggeredField,
    WallTrace,
    boundary_flux,
    boundary_trace_norm,
    divergence,
    gradient,
    inner,
    l2_norm,
    laplacian,
    read_arrays,
    sample_faces,
    velocity_gradient,
    write_arrays,
)

from conftest import small_cell


def random_field(rng, n, periodic):
    h = 1.0 / n
    if periodic:
        return StaggeredField(rng.standard_normal((n, n)), rng.standard_normal((n, n)), h, True)
    return StaggeredField(rng.standard_normal((n + 1, n)), rng.standard_normal((n, n + 1)), h, False)


def interior_only(layout, f):
    """Keep the unknown faces, zero every Dirichlet face and the wall trace."""
    return layout.scatter(layout.gather(f))


def test_divergence_of_constant_is_zero():
    n = 8
    f = StaggeredField(np.ones((n, n)), np.zeros((n, n)), 1 / n, True)
    assert np.all(divergence(f).values == 0.0)


def test_divergence_linear_exact():
    n = 16
    f = sample_faces(lambda x, y: (x, -y), n, 1 / n)
    assert np.abs(divergence(f).values).max() < 1e-12


def test_divergence_quadratic_value():
    f = sample_faces(lambda x, y: (x**2, 0 * y), 4, 0.25)
    d = divergence(f).values
    # cell centred at x = 3/8 has faces at 1/4 and 1/2
    assert d[1, 0] == pytest.approx(0.75, abs=1e-15)


def test_gradient_of_constant_and_linear():
    n = 8
    h = 1 / n
    c = ScalarField(np.full((n, n), 3.0), h)
    g = gradient(c)
    assert g.max_abs() == 0.0
    x = (np.arange(n) + 0.5) * h
    p = ScalarField(np.repeat(x[:, None], n, axis=1), h)
    g = gradient(p)
    assert np.allclose(g.u[1:-1], 1.0, atol=1e-13)
    assert np.all(g.v == 0.0)


def test_gradient_divergence_duality_periodic():
    rng = np.random.default_rng(0)
    n = 12
    h = 1 / n
    p = ScalarField(rng.standard_normal((n, n)), h)
    u = random_field(rng, n, True)
    lhs = inner(gradient(p, periodic=True), u)
    rhs = -h * h * float((p.values * divergence(u).values).sum())
    assert lhs == pytest.approx(rhs, abs=1e-12 * max(1.0, abs(lhs)))


def test_div_grad_is_five_point_laplacian():
    rng = np.random.default_rng(1)
    n = 10
    h = 1 / n
    p = rng.standard_normal((n, n))
    lap = (np.roll(p, 1, 0) + np.roll(p, -1, 0) + np.roll(p, 1, 1) + np.roll(p, -1, 1) - 4 * p) / h**2
    dg = divergence(gradient(ScalarField(p, h), periodic=True)).values
    assert np.abs(dg - lap).max() < 1e-10 * np.abs(lap).max()


def test_adjointness_with_zero_trace():
    rng = np.random.default_rng(2)
    n = 9
    h = 1 / n
    lay = FaceLayout(np.zeros((n, n), bool), False, h)
    u = interior_only(lay, random_field(rng, n, False))
    p = ScalarField(rng.standard_normal((n, n)), h)
    lhs = inner(gradient(p), u)
    rhs = -h * h * float((p.values * divergence(u).values).sum())
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_laplacian_linear_is_zero():
    n = 12
    lay = FaceLayout(np.zeros((n, n), bool), False, 1 / n)
    f = sample_faces(lambda x, y: (2 * x - y + 1, 3 * y + x), n, 1 / n)
    assert laplacian(f, lay).max_abs() < 1e-9


def test_laplacian_quadratic_interior():
    n = 12
    lay = FaceLayout(np.zeros((n, n), bool), False, 1 / n)
    f = sample_faces(lambda x, y: (x**2 + y**2, 0 * x), n, 1 / n)
    lap = laplacian(f, lay)
    # faces whose stencil does not reach a wall point
    assert np.allclose(lap.u[2:-2, 1:-1], 4.0, atol=1e-9)
    assert np.all(lap.v == 0.0)


def test_laplacian_symmetric_with_obstacles():
    rng = np.random.default_rng(3)
    d = build_perforated_domain(small_cell(), 3, 4)
    lay = FaceLayout.for_domain(d)
    a = interior_only(lay, random_field(rng, d.n, False))
    b = interior_only(lay, random_field(rng, d.n, False))
    lhs, rhs = inner(laplacian(a, lay), b), inner(a, laplacian(b, lay))
    assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("periodic", [False, True])
def test_gradient_energy_matches_laplacian(periodic):
    rng = np.random.default_rng(4)
    if periodic:
        solid = named_cell("square-half").refined(16)
        lay = FaceLayout(solid, True, 1 / 16)
    else:
        d = build_perforated_domain(named_cell("square-half"), 2, 8)
        lay = FaceLayout.for_domain(d)
    a = interior_only(lay, random_field(rng, lay.n, periodic))
    g = velocity_gradient(a, lay.xkind, lay.ykind)
    energy = -inner(laplacian(a, lay), a)
    assert g.norm() ** 2 == pytest.approx(energy, rel=1e-12)


def test_l2_norm_examples():
    n = 8
    assert l2_norm(np.ones((n, n)), h=1 / n) == pytest.approx(1.0, abs=1e-15)
    d = build_perforated_domain(small_cell(), 8, 4)
    strip = d.boundary_strip(d.epsilon)
    assert l2_norm(np.ones((d.n, d.n)), strip, d.h) == pytest.approx(np.sqrt(0.4375), abs=1e-15)
    rng = np.random.default_rng(5)
    a = rng.standard_normal((n, n))
    assert l2_norm(a, h=1 / n) ** 2 == pytest.approx((a**2).sum() / n**2, rel=1e-14)
    with pytest.raises(ValueError):
        l2_norm(a)


def test_boundary_trace_norm_examples():
    n = 16
    one = sample_faces(lambda x, y: (1 + 0 * x, 1 + 0 * y), n, 1 / n)
    assert boundary_trace_norm(one, tangential=False) == pytest.approx(2.0, abs=1e-14)
    lay = FaceLayout(np.zeros((n, n), bool), False, 1 / n)
    rng = np.random.default_rng(6)
    assert boundary_trace_norm(interior_only(lay, random_field(rng, n, False))) == 0.0


def test_boundary_trace_norm_linear_field_second_order():
    # (x, -y): normal part integrates to 2, tangential part to 4/3
    errs = []
    for n in (8, 16, 32):
        f = sample_faces(lambda x, y: (x, -y), n, 1 / n)
        errs.append(abs(boundary_trace_norm(f) ** 2 - (2 + 4 / 3)))
    assert abs(boundary_trace_norm(sample_faces(lambda x, y: (x, -y), 8, 1 / 8), tangential=False) ** 2 - 2) < 1e-14
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_boundary_flux_of_divergence_free_field():
    f = sample_faces(lambda x, y: (x, -y), 10, 0.1)
    assert boundary_flux(f) == pytest.approx(0.0, abs=1e-14)


def test_shape_mismatch_raises():
    with pytest.raises(DimensionMismatch):
        StaggeredField(np.zeros((4, 4)), np.zeros((4, 5)), 0.25, False)
    with pytest.raises(DimensionMismatch):
        _ = StaggeredField.zeros(4, 0.25) + StaggeredField.zeros(5, 0.2)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**16))
def test_operators_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    n = 6
    lay = FaceLayout(np.zeros((n, n), bool), False, 1 / n)
    a, b = random_field(rng, n, False), random_field(rng, n, False)
    a.wall, b.wall = (WallTrace(*rng.standard_normal((4, n + 1))) for _ in range(2))
    comb = a.scaled(alpha) + b.scaled(beta)
    for op in (lambda f: divergence(f).values, lambda f: laplacian(f, lay).u, lambda f: laplacian(f, lay).v):
        lhs = op(comb)
        rhs = alpha * op(a) + beta * op(b)
        assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def test_array_container_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    arrays = {"a": rng.standard_normal((3, 4)), "b.u": np.arange(5.0), "s": np.zeros((2, 2, 2))}
    write_arrays(tmp_path / "x.bin", arrays)
    back = read_arrays(tmp_path / "x.bin")
    assert list(back) == list(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(ValueError):
        read_arrays(tmp_path / "bad.bin")
