"""Shared fixtures.  The expensive sweeps are session-scoped so that the
module tests and the acceptance tests read the same runs."""
import numpy as np
import pytest

from darcyrate import build_correctors, build_perforated_domain, named_cell, solve_all, solve_p0
from darcyrate.correctors import residual_field
from darcyrate.fine_stokes import solve_stokes
from darcyrate.geometry import build_cell_geometry
from darcyrate.study import convergence_study

ACCEPTANCE_CONFIG = {
    "geometry": "square-half",
    "forcing": "trig",
    "b": "zero",
    "n_list": [4, 8, 16, 32],
    "m": 16,
    "mu": 1.0,
    "b_companion": "shear",
}


def small_cell():
    """M0 = 4 with the central 2x2 block solid."""
    solid = np.zeros((4, 4), dtype=bool)
    solid[1:3, 1:3] = True
    return build_cell_geometry(solid)


@pytest.fixture(scope="session")
def square_half():
    return named_cell("square-half")


@pytest.fixture(scope="session")
def cell16(square_half):
    return solve_all(square_half, 16)


@pytest.fixture(scope="session")
def cell8(square_half):
    return solve_all(square_half, 8)


@pytest.fixture(scope="session")
def study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    return convergence_study({**ACCEPTANCE_CONFIG, "out_dir": str(out)})


@pytest.fixture(scope="session")
def study_repeat(tmp_path_factory):
    out = tmp_path_factory.mktemp("study_repeat")
    return convergence_study({**ACCEPTANCE_CONFIG, "out_dir": str(out)})


@pytest.fixture(scope="session")
def gradient_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("gradient")
    cfg = {**ACCEPTANCE_CONFIG, "forcing": "gradient", "n_list": [4, 8, 16], "b_companion": None,
           "out_dir": str(out)}
    return convergence_study(cfg)


class Pipeline:
    """Every stage of one epsilon, kept for inspection."""

    def __init__(self, cellsol, n_periods, forcing, b="zero"):
        self.cellsol = cellsol
        self.domain = build_perforated_domain(cellsol.cell, n_periods, cellsol.m)
        self.hs = solve_p0(cellsol.K, forcing, b, self.domain.n)
        self.fine = solve_stokes(self.domain, forcing, b)
        self.cs = build_correctors(self.domain, cellsol, self.hs, b)
        self.v, self.q = residual_field(self.fine, self.cs, cellsol, self.hs)


@pytest.fixture(scope="session")
def trig8(cell16):
    return Pipeline(cell16, 8, "trig")


@pytest.fixture(scope="session")
def shear8(cell16):
    return Pipeline(cell16, 8, "trig", "shear")


@pytest.fixture(scope="session")
def gradient4(cell16):
    return Pipeline(cell16, 4, "gradient")


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
