from dataclasses import replace

import numpy as np
import pytest

from darcyrate.correctors import (
    _ops,
    build_phi_eps,
    cutoff,
    mollifier_kernel,
    mollify,
    normal_corrector,
    oscillating_velocity,
    tangential_corrector,
)
from darcyrate.darcy import solve_p0
from darcyrate.errors import KernelTooSmall, ResolutionMismatch
from darcyrate.geometry import WALL, build_perforated_domain
from darcyrate.grid_ops import boundary_flux, divergence, l2_norm
from darcyrate.study import _decomposition_error, _trace_identity_error, fit_rate


def test_gradient_forcing_degenerates(gradient4):
    p = gradient4
    assert p.cs.u_osc.max_abs() <= 1e-12
    assert p.cs.phi.max_abs() <= 1e-12
    assert p.cs.psi_t.max_abs() <= 1e-12 and p.cs.psi_n.max_abs() <= 1e-12
    assert p.cs.mismatch.max_abs() <= 1e-12
    assert abs(p.cs.gamma) <= 1e-12
    assert p.v.max_abs() <= 1e-9


def test_cell_average_of_oscillating_velocity(cell16):
    # synthetic macroscopic factor G = e1 everywhere
    d = build_perforated_domain(cell16.cell, 4, 16)
    hs = solve_p0(cell16.K, {"fx": [[1.0, 0, 0]]}, "zero", d.n)
    hs = replace(hs, p0=np.zeros((d.n, d.n)))
    u = oscillating_velocity(cell16, hs, d)
    M = 16
    for a, b in ((1, 1), (1, 2), (2, 2)):
        blk_u = u.u[a * M:(a + 1) * M, b * M:(b + 1) * M]
        blk_v = u.v[a * M:(a + 1) * M, b * M:(b + 1) * M]
        assert blk_u.mean() == pytest.approx(cell16.K_avg[0, 0], abs=1e-12)
        assert blk_v.mean() == pytest.approx(cell16.K_avg[1, 0], abs=1e-12)
    # eps-periodicity away from the boundary
    assert np.array_equal(u.u[M + 1:2 * M + 1, M:3 * M], u.u[2 * M + 1:3 * M + 1, M:3 * M])


def test_resolution_mismatch(cell8, trig8):
    with pytest.raises(ResolutionMismatch):
        oscillating_velocity(cell8, trig8.hs, trig8.domain)


def test_mollifier_kernel_mass():
    for eps, h in ((1 / 4, 1 / 64), (1 / 8, 1 / 128), (1 / 32, 1 / 512), (1 / 4, 1 / 256)):
        w = mollifier_kernel(eps, h)
        assert abs(w.sum() - 1.0) <= 1e-15
        assert np.all(w >= 0) and np.array_equal(w, w[::-1, ::-1])
    with pytest.raises(KernelTooSmall):
        mollifier_kernel(1 / 8, 1 / 32)


def test_mollify_constants_and_linears():
    n, eps = 128, 1 / 8
    h = 1 / n
    c = np.full((n, n), 3.7)
    assert np.abs(mollify(c, eps, h) - 3.7).max() <= 4e-15
    x = (np.arange(n) + 0.5) * h
    X = np.repeat(x[:, None], n, axis=1)
    k = mollifier_kernel(eps, h).shape[0] // 2
    sm = mollify(X, eps, h)
    assert np.abs(sm - X)[k:-k, k:-k].max() <= 1e-14
    rng = np.random.default_rng(0)
    a = rng.standard_normal((n, n))
    assert np.allclose(mollify(a + 2.0, eps, h), mollify(a, eps, h) + 2.0, atol=1e-14)


def test_mollification_residual_bound(trig8):
    d, hs = trig8.domain, trig8.hs
    n, h, eps = d.n, d.h, d.epsilon
    psi = (_ops(n).Cx @ hs.p0.ravel()).reshape(n, n)
    resid = l2_norm(psi - cutoff(d) * mollify(psi, eps, h), h=h)
    gx, gy = np.gradient(psi, h)
    inner_region = ~d.boundary_strip(eps)
    grad = np.sqrt(l2_norm(gx, inner_region, h) ** 2 + l2_norm(gy, inner_region, h) ** 2)
    bound = l2_norm(psi, d.boundary_strip(3 * eps), h) + eps * grad
    assert resid <= 10 * bound


def test_cutoff_properties(square_half):
    d = build_perforated_domain(square_half, 8, 16)
    eta = cutoff(d)
    eps = d.epsilon
    assert np.all((eta >= 0) & (eta <= 1))
    assert np.all(eta[~d.boundary_strip(3 * eps)] == 1.0)
    x, y = d.centers()
    dist = d.distance_to_boundary(x, y)
    assert np.all(eta[dist <= 2 * eps] == 0.0)
    slope = max(np.abs(np.diff(eta, axis=0)).max(), np.abs(np.diff(eta, axis=1)).max()) / d.h
    assert slope <= 1 / eps + 1e-9


def test_phi_eps_support(trig8):
    d, phi = trig8.domain, trig8.cs.phi
    eps = d.epsilon
    strip = d.boundary_strip(2 * eps)
    # faces of cells in the 2 eps strip lie at distance <= 2 eps
    assert np.all(phi.u[:-1][strip] == 0.0) and np.all(phi.v[:, :-1][strip] == 0.0)
    assert phi.max_abs() > 0


def test_phi_eps_zero_for_gradient(gradient4):
    phi = build_phi_eps(gradient4.cellsol, gradient4.hs, gradient4.domain)
    assert phi.max_abs() <= 1e-12


def test_tangential_corrector_zero_data(trig8):
    p = trig8
    psi, q = tangential_corrector(p.domain, p.cellsol, p.hs, p.cs.u_osc, u_osc=p.cs.u_osc)
    assert psi.max_abs() == 0.0 and np.all(q == 0.0)


@pytest.mark.parametrize("which", ["trig8", "shear8"])
def test_boundary_corrector_structure(which, request):
    p = request.getfixturevalue(which)
    cs, d = p.cs, p.domain
    pt, pn = cs.psi_t, cs.psi_n
    # Psi_t is tangential: zero normal component on every outer face
    for arr in (pt.u[0], pt.u[-1], pt.v[:, 0], pt.v[:, -1]):
        assert np.all(arr == 0.0)
    # Psi_n is normal: zero tangential trace
    assert pn.wall.max_abs() == 0.0
    assert abs(boundary_flux(pn)) <= 1e-12
    for f in (pt, pn):
        assert np.abs(divergence(f, d.fluid).values).max() <= 1e-10
        assert np.all(f.u[d.xkind == WALL] == 0.0) and np.all(f.v[d.ykind == WALL] == 0.0)
    assert _decomposition_error(cs) <= 1e-14
    assert _trace_identity_error(p.v, cs.gamma) <= 1e-14


def test_normal_corrector_matches_set(shear8):
    p = shear8
    psi, q, gamma = normal_corrector(p.domain, p.cellsol, p.hs, "shear")
    assert gamma == p.cs.gamma
    assert np.array_equal(psi.u, p.cs.psi_n.u)


def test_gamma_vanishes_by_symmetry_for_zero_b(trig8, shear8):
    # the square-half cell and the trig forcing make the flux of u_osc cancel
    assert abs(trig8.cs.gamma) <= 1e-12
    assert abs(shear8.cs.gamma) > 1e-6


def test_divergence_repair_decreases(study):
    vals = [r["div_repair"] for r in study.rows]
    eps = [r["epsilon"] for r in study.rows]
    assert eps == sorted(eps, reverse=True)
    assert all(b <= a for a, b in zip(vals, vals[1:])), f"div repair {vals}"


def test_corrector_scaling(study):
    rows, diag = study.rows, study.diagnostics
    eps = [r["epsilon"] for r in rows]
    s_t, _, _ = fit_rate(zip(eps, [r["psi_t_l2"] for r in rows]))
    s_v, _, _ = fit_rate(zip(eps, [d["v_norm"] for d in diag]))
    assert s_t >= 0.35
    assert s_v >= 0.45
    comp = [c["row"] for c in study.companion]
    ce = [r["epsilon"] for r in comp]
    assert fit_rate(zip(ce, [r["gamma_abs"] for r in comp]))[0] >= 0.8
    assert fit_rate(zip(ce, [r["psi_n_l2"] for r in comp]))[0] >= 0.35
    assert fit_rate(zip(ce, [r["psi_t_l2"] for r in comp]))[0] >= 0.35

