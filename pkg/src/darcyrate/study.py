"""Error metrics, epsilon sweeps, rate fitting and report emission."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fine_stokes
from .cell_problems import (
    CellSolution,
    chi_divergence_residual,
    load_permeability,
    phi_identity_residual,
    solve_all,
)
from .correctors import (
    build_correctors,
    divergence_repair,
    mollifier_kernel,
    oscillating_gradient,
    oscillating_velocity,
    residual_field,
    trace_discrepancy,
)
from .darcy import HomogenizedSolution, resolve_boundary, resolve_forcing, solve_p0
from .errors import HomogenizationError, NonPositiveValue, ResolutionMismatch, TooFewPoints, ZeroField
from .fine_stokes import FineSolution, boundary_h_half, poincare_ratio, solve_stokes
from .geometry import build_perforated_domain, resolve_cell
from .grid_ops import StaggeredField, boundary_trace_norm, divergence, l2_norm, velocity_gradient

log = logging.getLogger(__name__)

CSV_COLUMNS = ("epsilon", "h", "e_vel", "e_pre", "e_grad", "psi_t_l2", "psi_n_l2", "gamma_abs",
               "poincare", "div_repair", "solve_seconds")

DEFAULT_CONFIG = {
    "geometry": "square-half",
    "forcing": "trig",
    "b": "zero",
    "n_list": [4, 8, 16, 32],
    "m": 16,
    "mu": 1.0,
    "out_dir": None,
    "b_companion": None,
    "record_timings": False,
    "tolerances": {},
}

DEFAULT_TOLERANCES = {
    "rate_low": 0.3,
    "rate_high": 0.7,
    "sharp_max": 0.8,
    "trace_floor": 0.1,
    "gamma_min": 0.8,
    "psi_min": 0.35,
    "uniform_max": 3.0,
    "degenerate": 1e-8,
    "exact": 1e-10,
}

RATE_METRICS = ("e_vel", "e_pre", "e_grad")


# ---------------------------------------------------------------------------
# metrics


def error_metrics(fine: FineSolution, cellsol: CellSolution, hs: HomogenizedSolution,
                  u_osc: StaggeredField | None = None) -> dict:
    """e_vel, e_pre and e_grad for one fine solution."""
    domain = fine.domain
    if cellsol.m != domain.cells_per_period or hs.n != domain.n:
        raise ResolutionMismatch("cell, homogenized and fine grids do not match")
    if u_osc is None:
        u_osc = oscillating_velocity(cellsol, hs, domain)
    e_vel = l2_norm(fine.u - u_osc)
    e_pre = l2_norm(fine.P - hs.p0, h=domain.h)
    gf = fine.gradient()
    og = oscillating_gradient(cellsol, hs, domain)
    eps = domain.epsilon
    s = 0.0
    for name, g in gf.components():
        s += float((gf.weights[name] * (eps * g - og[name]) ** 2).sum())
    return {"e_vel": e_vel, "e_pre": e_pre, "e_grad": math.sqrt(s)}


def fit_rate(points) -> tuple[float, float, float]:
    """Least-squares line through (log eps, log value): (slope, intercept, rms residual)."""
    pts = list(points)
    if len(pts) < 3:
        raise TooFewPoints(f"need at least 3 points, got {len(pts)}")
    eps = np.array([p[0] for p in pts], dtype=float)
    val = np.array([p[1] for p in pts], dtype=float)
    if np.any(val <= 0) or np.any(eps <= 0) or not np.all(np.isfinite(val)):
        raise NonPositiveValue("rate fit needs positive finite values")
    x, y = np.log(eps), np.log(val)
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    return float(slope), float(intercept), res


def energy_ratio(fine: FineSolution, f_field: StaggeredField | None) -> float:
    """Energy-estimate ratio of an existing solve (no stress or divergence source)."""
    d = fine.domain
    f_norm = 0.0 if f_field is None else l2_norm(f_field)
    denom = f_norm + boundary_trace_norm(fine.boundary) + d.epsilon * boundary_h_half(fine.boundary)
    if denom == 0.0:
        return float("nan")
    num = d.epsilon * fine.gradient_norm() + l2_norm(fine.u) + l2_norm(fine.p, d.fluid, d.h)
    return num / denom


# ---------------------------------------------------------------------------
# one epsilon


def run_case(domain, cellsol: CellSolution, forcing, b, mu: float = 1.0) -> dict:
    """Full pipeline on one perforated grid; returns a flat row plus diagnostics."""
    t0 = time.perf_counter()
    hs = solve_p0(cellsol.K, forcing, b, domain.n, mu)
    fine = solve_stokes(domain, forcing, b, mu)
    cs = build_correctors(domain, cellsol, hs, b)
    v, _ = residual_field(fine, cs, cellsol, hs)
    seconds = time.perf_counter() - t0
    row = {"epsilon": domain.epsilon, "h": domain.h}
    row.update(error_metrics(fine, cellsol, hs, cs.u_osc))
    row["psi_t_l2"] = l2_norm(cs.psi_t)
    row["psi_n_l2"] = l2_norm(cs.psi_n)
    row["gamma_abs"] = abs(cs.gamma)
    try:
        row["poincare"] = poincare_ratio(fine)
    except ZeroField:
        row["poincare"] = float("nan")
    row["div_repair"] = divergence_repair(cs.phi, cs.u_osc, domain)
    row["solve_seconds"] = seconds
    force = fine_stokes._force_field(domain, forcing)
    gv = velocity_gradient(v, domain.xkind, domain.ykind).norm()
    diag = {
        "energy_ratio": energy_ratio(fine, force),
        "trace_discrepancy": trace_discrepancy(fine, cs.u_osc),
        "v_norm": l2_norm(v) + domain.epsilon * gv,
        "v_max": v.max_abs(),
        "u_max": fine.u.max_abs(),
        "gamma": cs.gamma,
        "div_residual": fine.divergence_residual(),
        "corrector_div_residual": max(_div_max(cs.psi_t, domain), _div_max(cs.psi_n, domain)),
        "pressure_mean": abs(fine.pressure_mean()),
        "p0_mean": abs(float(hs.p0.mean())),
        "residual_fine": fine.residual,
        "residual_p0": hs.residual,
        "residual_psi_t": cs.residuals["psi_t"],
        "residual_psi_n": cs.residuals["psi_n"],
        "decomposition": _decomposition_error(cs),
        "trace_identity": _trace_identity_error(v, cs.gamma),
    }
    return {"row": row, "diag": diag}


def _div_max(f: StaggeredField, domain) -> float:
    return float(np.abs(divergence(f, domain.fluid).values).max())


def _decomposition_error(cs) -> float:
    """Facewise gap in tangential data + normal data + gamma n = b - u_osc on the boundary."""
    t, nd, mm, g = cs.tangential, cs.normal, cs.mismatch, cs.gamma
    err = 0.0
    err = max(err, float(np.abs(t.u[0] + nd.u[0] - g - mm.u[0]).max()))
    err = max(err, float(np.abs(t.u[-1] + nd.u[-1] + g - mm.u[-1]).max()))
    err = max(err, float(np.abs(t.v[:, 0] + nd.v[:, 0] - g - mm.v[:, 0]).max()))
    err = max(err, float(np.abs(t.v[:, -1] + nd.v[:, -1] + g - mm.v[:, -1]).max()))
    err = max(err, (t.wall + nd.wall - mm.wall).max_abs())
    return err


def _trace_identity_error(v: StaggeredField, gamma: float) -> float:
    """Distance of the outer trace of v from gamma n."""
    err = max(float(np.abs(v.u[0] + gamma).max()), float(np.abs(v.u[-1] - gamma).max()),
              float(np.abs(v.v[:, 0] + gamma).max()), float(np.abs(v.v[:, -1] - gamma).max()))
    return max(err, v.wall.max_abs())


# ---------------------------------------------------------------------------
# study


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    threshold: str
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        note = f" ({self.note})" if self.note else ""
        return f"[{status}] {self.name}: {self.value} vs {self.threshold}{note}"


@dataclass
class StudyReport:
    config: dict
    rows: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    companion: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def column(self, name: str) -> list:
        """Values of a row or diagnostic quantity, largest epsilon first."""
        return [r[name] if name in r else d[name] for r, d in zip(self.rows, self.diagnostics)]

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "rows": self.rows,
            "diagnostics": self.diagnostics,
            "companion": self.companion,
            "slopes": self.slopes,
            "checks": [c.__dict__ for c in self.checks],
            "provenance": self.provenance,
            "passed": self.passed,
        }


def load_config(source) -> dict:
    if isinstance(source, dict):
        cfg = dict(source)
    else:
        cfg = json.loads(Path(source).read_text())
    if not isinstance(cfg, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(cfg) - set(DEFAULT_CONFIG) - {"k_file", "verify_n_list", "cell_dir"}
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    merged = {**DEFAULT_CONFIG, **cfg}
    merged["tolerances"] = {**DEFAULT_TOLERANCES, **(cfg.get("tolerances") or {})}
    unknown_tol = set(merged["tolerances"]) - set(DEFAULT_TOLERANCES)
    if unknown_tol:
        raise ValueError(f"unknown tolerance keys {sorted(unknown_tol)}")
    n_list = merged["n_list"]
    if not isinstance(n_list, list) or not all(isinstance(n, int) and n >= 2 for n in n_list):
        raise ValueError("n_list must be a list of integers >= 2")
    merged["n_list"] = sorted(set(n_list))
    if not isinstance(merged["m"], int) or merged["m"] <= 0:
        raise ValueError("m must be a positive integer")
    if not (isinstance(merged["mu"], (int, float)) and merged["mu"] > 0):
        raise ValueError("mu must be positive")
    resolve_forcing(merged["forcing"])
    resolve_boundary(merged["b"])
    if merged["b_companion"]:
        resolve_boundary(merged["b_companion"])
    return merged


def config_hash(cfg: dict) -> str:
    payload = {k: v for k, v in cfg.items() if k != "out_dir"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True, default=str).encode()).hexdigest()[:16]


def _slope_entry(eps, vals, degenerate_tol):
    if all(abs(v) <= degenerate_tol for v in vals):
        return "degenerate"
    try:
        s, c, r = fit_rate(zip(eps, vals))
    except (NonPositiveValue, TooFewPoints) as exc:
        return f"unfit: {exc}"
    return {"slope": s, "intercept": c, "residual": r}


def _variation(vals) -> float:
    vals = [v for v in vals if np.isfinite(v)]
    if not vals or min(vals) <= 0:
        return float("inf")
    return max(vals) / min(vals)


def _slope_check(name, entry, lo=None, hi=None, allow_degenerate=False) -> Check:
    thr = f"[{lo}, {hi}]" if lo is not None and hi is not None else (f">= {lo}" if lo is not None else f"<= {hi}")
    if entry == "degenerate":
        return Check(name, allow_degenerate, "degenerate", thr, "all values at round-off")
    if isinstance(entry, str):
        return Check(name, False, entry, thr)
    s = entry["slope"]
    ok = (lo is None or s >= lo) and (hi is None or s <= hi)
    return Check(name, ok, round(s, 4), thr)


def convergence_study(config) -> StudyReport:
    """Sweep the periods in ``n_list``; build all metrics, slopes and checks."""
    cfg = load_config(config)
    tol = cfg["tolerances"]
    cell = resolve_cell(cfg["geometry"])
    m = cfg["m"]
    t0 = time.perf_counter()
    cellsol = solve_all(cell, m)
    if cfg.get("k_file"):
        cellsol.K_energy = load_permeability(cfg["k_file"])
    report = StudyReport(config=cfg)
    report.provenance = {
        "geometry_hash": cell.digest(),
        "config_hash": config_hash(cfg),
        "K": cellsol.K.tolist(),
        "cell_residuals": cellsol.residuals,
    }
    # largest epsilon first
    for n_per in cfg["n_list"]:
        domain = build_perforated_domain(cell, n_per, m)
        res = run_case(domain, cellsol, cfg["forcing"], cfg["b"], cfg["mu"])
        report.rows.append(res["row"])
        report.diagnostics.append(res["diag"])
        if cfg["b_companion"]:
            comp = run_case(domain, cellsol, cfg["forcing"], cfg["b_companion"], cfg["mu"])
            report.companion.append(comp)
        fine_stokes.clear_cache()
        log.info("N=%d done", n_per)
    report.provenance["total_seconds"] = time.perf_counter() - t0
    _evaluate(report, tol)
    if cfg["out_dir"]:
        out = Path(cfg["out_dir"])
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(report, out / "study.csv")
        emit_svg(report, out / "study.svg")
        _write_text(out / "report.json", json.dumps(report.to_json(), indent=2, sort_keys=True, default=_json_default))
    return report


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _evaluate(report: StudyReport, tol: dict) -> None:
    rows, diag = report.rows, report.diagnostics
    eps = [r["epsilon"] for r in rows]
    deg = tol["degenerate"]
    for key in RATE_METRICS + ("psi_t_l2", "psi_n_l2", "gamma_abs", "div_repair"):
        report.slopes[key] = _slope_entry(eps, [r[key] for r in rows], deg)
    report.slopes["v_norm"] = _slope_entry(eps, [d["v_norm"] for d in diag], deg)
    checks = report.checks
    degenerate_all = all(report.slopes[k] == "degenerate" for k in RATE_METRICS)
    if len(rows) >= 3:
        for key in RATE_METRICS:
            checks.append(_slope_check(f"{key} slope", report.slopes[key], tol["rate_low"], tol["rate_high"],
                                       allow_degenerate=degenerate_all))
        checks.append(_slope_check("e_vel sharpness", report.slopes["e_vel"], None, tol["sharp_max"],
                                   allow_degenerate=degenerate_all))
        tr = [d["trace_discrepancy"] for d in diag]
        if not degenerate_all:
            floor = tol["trace_floor"] * tr[0]
            checks.append(Check("trace of u_eps - u_osc bounded below", min(tr) >= floor,
                                f"min {min(tr):.4e}", f">= {floor:.4e}"))
        checks.append(_slope_check("gamma slope", report.slopes["gamma_abs"], tol["gamma_min"],
                                   allow_degenerate=True))
        for key in ("psi_t_l2", "psi_n_l2"):
            checks.append(_slope_check(f"{key} slope", report.slopes[key], tol["psi_min"], allow_degenerate=True))
        if report.companion:
            ce = [c["row"]["epsilon"] for c in report.companion]
            for key, lo in (("gamma_abs", tol["gamma_min"]), ("psi_t_l2", tol["psi_min"]), ("psi_n_l2", tol["psi_min"])):
                entry = _slope_entry(ce, [c["row"][key] for c in report.companion], deg)
                report.slopes[f"companion_{key}"] = entry
                checks.append(_slope_check(f"companion {key} slope", entry, lo))
        if not degenerate_all:
            pv = _variation([r["poincare"] for r in rows])
            checks.append(Check("poincare uniformity", pv < tol["uniform_max"], round(pv, 4), f"< {tol['uniform_max']}"))
            ev = _variation([d["energy_ratio"] for d in diag])
            checks.append(Check("energy ratio uniformity", ev < tol["uniform_max"], round(ev, 4),
                                f"< {tol['uniform_max']}"))
    if degenerate_all:
        worst = max(max(r[k] for k in RATE_METRICS) for r in rows)
        checks.append(Check("degenerate metrics", worst <= deg, f"{worst:.3e}", f"<= {deg}"))
    ex = tol["exact"]
    div = max(max(d["div_residual"], d["corrector_div_residual"]) for d in diag)
    checks.append(Check("incompressibility", div <= ex, f"{div:.3e}", f"<= {ex}"))
    pm = max(max(d["pressure_mean"], d["p0_mean"]) for d in diag)
    checks.append(Check("pressure means", pm <= ex, f"{pm:.3e}", f"<= {ex}"))
    lr = max(max(d["residual_fine"], d["residual_p0"], d["residual_psi_t"], d["residual_psi_n"]) for d in diag)
    checks.append(Check("linear residuals", lr <= ex, f"{lr:.3e}", f"<= {ex}"))


# ---------------------------------------------------------------------------
# emission


def _fmt(x) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return format(float(x), ".17g")


def csv_text(report: StudyReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    timings = bool(report.config.get("record_timings"))
    for r in sorted(report.rows, key=lambda r: -r["epsilon"]):
        vals = []
        for c in CSV_COLUMNS:
            if c == "solve_seconds" and not timings:
                vals.append("nan")
            else:
                vals.append(_fmt(r[c]))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def _write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def emit_csv(report: StudyReport, path) -> Path:
    _write_text(path, csv_text(report))
    return Path(path)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_text(report: StudyReport, metrics=RATE_METRICS) -> str:
    W, H, pad = 640, 480, 60
    rows = sorted(report.rows, key=lambda r: -r["epsilon"])
    series = {m: [(r["epsilon"], r[m]) for r in rows if r[m] > 0] for m in metrics}
    pts = [p for s in series.values() for p in s]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    if pts:
        lx = [math.log10(p[0]) for p in pts]
        ly = [math.log10(p[1]) for p in pts]
        x0, x1 = min(lx) - 0.1, max(lx) + 0.1
        y0, y1 = min(ly) - 0.3, max(ly) + 0.3

        def X(e):
            return pad + (math.log10(e) - x0) / (x1 - x0) * (W - 2 * pad)

        def Y(v):
            return H - pad - (math.log10(v) - y0) / (y1 - y0) * (H - 2 * pad)

        out.append(f'<line x1="{pad}" y1="{H - pad}" x2="{W - pad}" y2="{H - pad}" stroke="black"/>')
        out.append(f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{H - pad}" stroke="black"/>')
        out.append(f'<text x="{W // 2}" y="{H - 15}" text-anchor="middle" font-size="14">epsilon (log)</text>')
        for k, (name, s) in enumerate(series.items()):
            if not s:
                continue
            col = _COLORS[k % len(_COLORS)]
            coords = " ".join(f"{X(e):.2f},{Y(v):.2f}" for e, v in s)
            out.append(f'<polyline class="metric" data-metric="{name}" points="{coords}" fill="none" '
                       f'stroke="{col}" stroke-width="2"/>')
            for e, v in s:
                out.append(f'<circle cx="{X(e):.2f}" cy="{Y(v):.2f}" r="3" fill="{col}"/>')
            fit = report.slopes.get(name)
            if isinstance(fit, dict):
                ea, eb = s[0][0], s[-1][0]
                va = math.exp(fit["intercept"]) * ea ** fit["slope"]
                vb = math.exp(fit["intercept"]) * eb ** fit["slope"]
                out.append(f'<line class="fit" x1="{X(ea):.2f}" y1="{Y(va):.2f}" x2="{X(eb):.2f}" y2="{Y(vb):.2f}" '
                           f'stroke="{col}" stroke-dasharray="4 3"/>')
                label = f"{name} slope {fit['slope']:.3f}"
            else:
                label = f"{name} ({fit})"
            out.append(f'<text x="{W - pad - 180}" y="{pad + 18 * k}" fill="{col}" font-size="12">{label}</text>')
        # sqrt(eps) guide through the first e_vel point
        e_a, v_a = pts[0]
        e_b = pts[0][0] if len(rows) < 2 else rows[-1]["epsilon"]
        v_b = v_a * math.sqrt(e_b / e_a)
        out.append(f'<line class="guide" x1="{X(e_a):.2f}" y1="{Y(v_a):.2f}" x2="{X(e_b):.2f}" y2="{Y(v_b):.2f}" '
                   f'stroke="gray" stroke-dasharray="2 2"/>')
        out.append(f'<text x="{X(e_b):.2f}" y="{Y(v_b) + 14:.2f}" fill="gray" font-size="12">sqrt(eps)</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_svg(report: StudyReport, path) -> Path:
    _write_text(path, svg_text(report))
    return Path(path)


# ---------------------------------------------------------------------------
# invariant suite


def run_verify(config) -> list[Check]:
    """Invariant checks with measured values; failures are entries, not exceptions."""
    cfg = load_config(config)
    tol = cfg["tolerances"]
    checks: list[Check] = []
    try:
        cell = resolve_cell(cfg["geometry"])
        cellsol = solve_all(cell, cfg["m"])
    except HomogenizationError as exc:
        checks.append(Check("cell stage", False, type(exc).__name__, "no error", str(exc)))
        return checks
    K = cellsol.K
    if cfg.get("k_file") or cfg.get("cell_dir"):
        K = load_permeability(cfg.get("k_file") or cfg.get("cell_dir"))
    checks.append(Check("K symmetric", bool(K[0, 1] == K[1, 0]), f"{abs(K[0, 1] - K[1, 0]):.3e}", "== 0"))
    lam = float(np.linalg.eigvalsh(0.5 * (K + K.T)).min())
    checks.append(Check("K positive definite", lam > 1e-12, f"{lam:.4e}", "> 1e-12"))
    if np.array_equal(np.rot90(cell.solid), cell.solid):
        d = max(abs(K[0, 0] - K[1, 1]), abs(K[0, 1]))
        checks.append(Check("fourfold symmetry of K", d <= 1e-8, f"{d:.3e}", "<= 1e-8"))
    skew = max(float(np.abs(cellsol.phi(0, j, 1) + cellsol.phi(1, j, 0)).max()) for j in range(2))
    checks.append(Check("phi skew-symmetry", skew == 0.0, f"{skew:.3e}", "== 0"))
    ph = phi_identity_residual(cellsol)
    checks.append(Check("phi identity", ph <= 1e-8, f"{ph:.3e}", "<= 1e-8"))
    cd = chi_divergence_residual(cellsol)
    checks.append(Check("chi divergence", cd <= 1e-10, f"{cd:.3e}", "<= 1e-10"))
    eps0 = 1.0 / max(cfg["n_list"])
    try:
        w = mollifier_kernel(eps0, eps0 / cfg["m"])
        mass = abs(float(w.sum()) - 1.0)
        checks.append(Check("mollifier mass", mass <= 1e-15, f"{mass:.3e}", "<= 1e-15"))
    except HomogenizationError as exc:
        checks.append(Check("mollifier mass", False, type(exc).__name__, "kernel resolved", str(exc)))
    n_list = cfg.get("verify_n_list") or [n for n in cfg["n_list"] if n <= 16]
    pr, er, dec = [], [], 0.0
    try:
        for n_per in n_list:
            domain = build_perforated_domain(cell, n_per, cfg["m"])
            res = run_case(domain, cellsol, cfg["forcing"], cfg["b"], cfg["mu"])
            pr.append(res["row"]["poincare"])
            er.append(res["diag"]["energy_ratio"])
            dec = max(dec, res["diag"]["decomposition"])
            fine_stokes.clear_cache()
    except HomogenizationError as exc:
        checks.append(Check("perforated stage", False, type(exc).__name__, "no error", str(exc)))
        return checks
    if len(pr) >= 2:
        pv, ev = _variation(pr), _variation(er)
        checks.append(Check("poincare uniformity", pv < tol["uniform_max"], round(pv, 4), f"< {tol['uniform_max']}"))
        checks.append(Check("energy ratio uniformity", ev < tol["uniform_max"], round(ev, 4),
                            f"< {tol['uniform_max']}"))
    checks.append(Check("boundary decomposition", dec <= 1e-12, f"{dec:.3e}", "<= 1e-12"))
    return checks
