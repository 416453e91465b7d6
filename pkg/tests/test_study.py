import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darcyrate.errors import NonPositiveValue, ResolutionMismatch, TooFewPoints
from darcyrate.geometry import named_cell
from darcyrate.study import (
    CSV_COLUMNS,
    RATE_METRICS,
    StudyReport,
    config_hash,
    convergence_study,
    csv_text,
    error_metrics,
    fit_rate,
    load_config,
    run_verify,
    svg_text,
)

EPS = [1 / 4, 1 / 8, 1 / 16, 1 / 32]


def test_fit_exact_power_laws():
    s, c, r = fit_rate([(e, 3.0 * e**0.5) for e in EPS])
    assert abs(s - 0.5) <= 1e-12 and abs(np.exp(c) - 3.0) <= 1e-12 and r <= 1e-14
    assert fit_rate([(e, 0.2 * e) for e in EPS])[0] == pytest.approx(1.0, abs=1e-12)


def test_fit_errors():
    with pytest.raises(TooFewPoints):
        fit_rate([(0.5, 1.0), (0.25, 0.5)])
    with pytest.raises(NonPositiveValue):
        fit_rate([(0.5, 1.0), (0.25, 0.0), (0.125, 0.1)])


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(-2, 3))
def test_fit_recovers_any_power(c, p):
    s, ci, _ = fit_rate([(e, c * e**p) for e in EPS])
    assert s == pytest.approx(p, abs=1e-9)
    assert np.exp(ci) == pytest.approx(c, rel=1e-9)


def test_error_metric_axioms(trig8):
    p = trig8
    m = error_metrics(p.fine, p.cellsol, p.hs, p.cs.u_osc)
    assert all(v >= 0 for v in m.values())
    assert m["e_vel"] > 0
    same = error_metrics(p.fine, p.cellsol, p.hs, p.fine.u)
    assert same["e_vel"] == 0.0


def test_error_metrics_mismatch(trig8, cell8):
    with pytest.raises(ResolutionMismatch):
        error_metrics(trig8.fine, cell8, trig8.hs)


def test_metrics_decrease_from_8_to_16(study):
    r8, r16 = study.rows[1], study.rows[2]
    assert (r8["epsilon"], r16["epsilon"]) == (1 / 8, 1 / 16)
    for k in RATE_METRICS:
        assert r16[k] < r8[k]


def test_report_structure(study):
    eps = [r["epsilon"] for r in study.rows]
    assert eps == sorted(eps, reverse=True) and len(eps) == 4
    for k in RATE_METRICS + ("psi_t_l2", "v_norm"):
        assert isinstance(study.slopes[k], dict)
    assert study.provenance["geometry_hash"] == named_cell("square-half").digest()
    assert study.provenance["config_hash"] == config_hash(study.config)


def test_study_files(study):
    out = study.config["out_dir"]
    text = (Path(out) / "study.csv").read_text()
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 5
    assert all(line.endswith(",nan") for line in lines[1:])
    svg = (Path(out) / "study.svg").read_text()
    assert svg.count('class="metric"') == len(RATE_METRICS)
    assert 'class="guide"' in svg and svg.count('class="fit"') == len(RATE_METRICS)
    rep = json.loads((Path(out) / "report.json").read_text())
    assert rep["passed"] == study.passed


def test_empty_report_csv():
    rep = StudyReport(config={})
    assert csv_text(rep) == ",".join(CSV_COLUMNS) + "\n"
    assert svg_text(rep).startswith("<svg")


def test_gradient_study_degenerate(gradient_study):
    for k in RATE_METRICS:
        assert gradient_study.slopes[k] == "degenerate", f"{k}: {gradient_study.slopes[k]}"
        assert max(r[k] for r in gradient_study.rows) <= 1e-8


def test_two_point_study_has_no_slopes(tmp_path):
    rep = convergence_study({"n_list": [2, 4], "m": 16, "out_dir": str(tmp_path)})
    assert all(isinstance(v, str) for v in rep.slopes.values())
    assert not any("slope" in c.name for c in rep.checks)


def test_slope_stability_under_cell_refinement(square_half):
    base = {"geometry": "square-half", "forcing": "trig", "n_list": [4, 8, 16]}
    coarse = convergence_study({**base, "m": 16})
    fine = convergence_study({**base, "m": 32})
    for k in RATE_METRICS + ("psi_t_l2",):
        a, b = coarse.slopes[k]["slope"], fine.slopes[k]["slope"]
        assert abs(a - b) < 0.1, f"{k}: {a:.4f} vs {b:.4f}"


def test_config_validation():
    with pytest.raises(ValueError):
        load_config({"bogus": 1})
    with pytest.raises(ValueError):
        load_config({"n_list": [1, 4]})
    with pytest.raises(ValueError):
        load_config({"tolerances": {"nope": 1}})
    with pytest.raises(KeyError):
        load_config({"forcing": "nope"})
    cfg = load_config({"n_list": [16, 4, 8, 8]})
    assert cfg["n_list"] == [4, 8, 16]
    assert config_hash({**cfg, "out_dir": "a"}) == config_hash({**cfg, "out_dir": "b"})
    assert config_hash(cfg) != config_hash({**cfg, "m": 32})


def test_verify_default_config():
    checks = run_verify({})
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, failed
    names = {c.name for c in checks}
    assert {"K symmetric", "phi identity", "chi divergence", "mollifier mass",
            "poincare uniformity", "energy ratio uniformity", "boundary decomposition"} <= names


def test_verify_detects_asymmetric_k(tmp_path):
    np.savetxt(tmp_path / "K.csv", np.array([[0.0144, 1e-6], [0.0, 0.0144]]), delimiter=",")
    checks = run_verify({"k_file": str(tmp_path / "K.csv"), "n_list": [4, 8], "verify_n_list": [4]})
    sym = next(c for c in checks if c.name == "K symmetric")
    assert not sym.passed


def test_verify_reports_empty_cell():
    checks = run_verify({"geometry": "empty"})
    assert len(checks) == 1 and not checks[0].passed
    assert checks[0].value == "IncompatiblePeriodicSystem"

