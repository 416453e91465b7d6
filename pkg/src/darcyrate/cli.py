"""Command line entry point.

Exit codes: 0 when every check passes, 1 on a numerical check failure or
solver error, 2 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import fine_stokes
from .cell_problems import load_permeability, save_cell_solution, solve_all
from .correctors import build_correctors, residual_field
from .darcy import darcy_divergence, darcy_velocity, resolve_boundary, resolve_forcing, solve_p0
from .errors import GeometryError, HomogenizationError
from .geometry import build_perforated_domain, resolve_cell
from .grid_ops import field_arrays, l2_norm, write_arrays
from .study import config_hash, convergence_study, error_metrics, load_config, run_verify

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


class ConfigError(Exception):
    pass


def _geometry(arg):
    try:
        if arg.lstrip().startswith("{"):
            return resolve_cell(json.loads(arg))
        return resolve_cell(arg)
    except (KeyError, ValueError, GeometryError, FileNotFoundError) as exc:
        raise ConfigError(f"bad geometry {arg!r}: {exc}") from exc


def _fields(args) -> None:
    try:
        resolve_forcing(args.forcing)
        resolve_boundary(args.b)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_cell(args) -> int:
    cell = _geometry(args.geometry)
    sol = solve_all(cell, args.m)
    out = save_cell_solution(sol, args.out)
    print(f"K = {sol.K.tolist()}")
    print(f"K_avg = {sol.K_avg.tolist()}")
    print(f"fluid fraction {sol.fluid_fraction:.6f}; written to {out}")
    return EXIT_OK


def cmd_homogenize(args) -> int:
    _fields(args)
    try:
        K = load_permeability(args.k)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read permeability from {args.k}: {exc}") from exc
    hs = solve_p0(K, args.forcing, args.b, args.n, args.mu)
    u0 = darcy_velocity(hs)
    print(f"n={args.n} mean(p0)={hs.p0.mean():.3e} max|p0|={np.abs(hs.p0).max():.6e} "
          f"||u0||={l2_norm(u0):.6e} max|div u0|={np.abs(darcy_divergence(hs)).max():.3e}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_arrays(out / "p0.bin", {"p0": hs.p0, **field_arrays("u0", u0)})
    return EXIT_OK


def _manifest(domain, args, residual) -> dict:
    return {"epsilon": domain.epsilon, "m": domain.cells_per_period, "n": domain.n,
            "geometry_hash": domain.cell.digest(), "forcing": args.forcing, "b": args.b,
            "mu": args.mu, "residual": residual}


def cmd_solve(args) -> int:
    _fields(args)
    cell = _geometry(args.geometry)
    domain = build_perforated_domain(cell, args.n, args.m)
    sol = fine_stokes.solve_stokes(domain, args.forcing, args.b, args.mu)
    print(f"eps={domain.epsilon:g} n={domain.n} ||u||={l2_norm(sol.u):.6e} "
          f"||grad u||={sol.gradient_norm():.6e} max|div u|={sol.divergence_residual():.3e} "
          f"residual={sol.residual:.3e}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_arrays(out / "fine.bin", {**field_arrays("u", sol.u), "p": sol.p, "P": sol.P})
        (out / "manifest.json").write_text(json.dumps(_manifest(domain, args, sol.residual), indent=2))
    return EXIT_OK


def cmd_correctors(args) -> int:
    _fields(args)
    cell = _geometry(args.geometry)
    cellsol = solve_all(cell, args.m)
    domain = build_perforated_domain(cell, args.n, args.m)
    hs = solve_p0(cellsol.K, args.forcing, args.b, domain.n, args.mu)
    fine = fine_stokes.solve_stokes(domain, args.forcing, args.b, args.mu)
    cs = build_correctors(domain, cellsol, hs, args.b)
    v, _ = residual_field(fine, cs, cellsol, hs)
    m = error_metrics(fine, cellsol, hs, cs.u_osc)
    print(f"eps={domain.epsilon:g} gamma={cs.gamma:.6e} ||Psi_t||={l2_norm(cs.psi_t):.6e} "
          f"||Psi_n||={l2_norm(cs.psi_n):.6e} ||Phi||={l2_norm(cs.phi):.6e} ||v||={l2_norm(v):.6e}")
    print(" ".join(f"{k}={val:.6e}" for k, val in m.items()))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        arrays = {}
        for name, f in (("u_osc", cs.u_osc), ("phi", cs.phi), ("psi_t", cs.psi_t), ("psi_n", cs.psi_n), ("v", v)):
            arrays.update(field_arrays(name, f))
        write_arrays(out / "correctors.bin", arrays)
    return EXIT_OK


def _load_config(path) -> dict:
    """Read and validate a config file; any problem is a usage error."""
    try:
        raw = json.loads(Path(path).read_text())
        cfg = load_config(raw)
        resolve_cell(cfg["geometry"])
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad config {path}: {exc}") from exc
    return cfg


def cmd_study(args) -> int:
    cfg = _load_config(args.config)
    if args.out:
        cfg["out_dir"] = args.out
    report = convergence_study(cfg)
    for r in report.rows:
        print(" ".join(f"{k}={r[k]:.6e}" for k in ("epsilon", "e_vel", "e_pre", "e_grad")))
    for name, s in report.slopes.items():
        print(f"slope {name}: {s['slope']:.4f}" if isinstance(s, dict) else f"slope {name}: {s}")
    for c in report.checks:
        print(c.line())
    print(f"config hash {config_hash(report.config)}")
    return EXIT_OK if report.passed else EXIT_CHECK


def cmd_verify(args) -> int:
    checks = run_verify(_load_config(args.config))
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="darcyrate", description="Stokes-to-Darcy homogenization rate toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cell", help="solve the periodic cell problems")
    c.add_argument("--geometry", required=True)
    c.add_argument("--m", type=int, required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cell)

    h = sub.add_parser("homogenize", help="solve the Darcy pressure problem")
    h.add_argument("--k", required=True, help="K.csv or a cell output directory")
    h.add_argument("--forcing", required=True)
    h.add_argument("--n", type=int, required=True, help="grid cells per side")
    h.add_argument("--b", default="zero")
    h.add_argument("--mu", type=float, default=1.0)
    h.add_argument("--out")
    h.set_defaults(func=cmd_homogenize)

    for name, fn, helptext in (("solve", cmd_solve, "solve the perforated Stokes problem"),
                               ("correctors", cmd_correctors, "build all correctors for one epsilon")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--geometry", required=True)
        s.add_argument("--n", type=int, required=True, help="periods per side")
        s.add_argument("--m", type=int, required=True, help="grid cells per period")
        s.add_argument("--forcing", required=True)
        s.add_argument("--b", default="zero")
        s.add_argument("--mu", type=float, default=1.0)
        s.add_argument("--out")
        s.set_defaults(func=fn)

    st = sub.add_parser("study", help="epsilon sweep with rate fits")
    st.add_argument("--config", required=True)
    st.add_argument("--out")
    st.set_defaults(func=cmd_study)

    v = sub.add_parser("verify", help="run the invariant suite")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HomogenizationError as exc:
        print(f"error in {args.command} ({type(exc).__name__}, stage {exc.stage}): {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
