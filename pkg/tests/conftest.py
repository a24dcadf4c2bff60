import math

import pytest

from renewtail.dist import (
    LatticePmf,
    PolyGeomLattice,
    TwoSidedExponential,
    calibrate_boundary,
    polygeom_template,
)
from renewtail.oracle import renewal_table
from renewtail.tilt import solve_tilt, tilt_step_law

_VERDICTS_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def srw():
    return LatticePmf(((-1, 0.3), (1, 0.7)))


@pytest.fixture(scope="session")
def tse():
    return TwoSidedExponential(p=0.6, lam=1.0, mu=2.0)


@pytest.fixture(scope="session")
def pg4():
    return PolyGeomLattice.with_residual(0.5, 4.0, 2.0)


@pytest.fixture(scope="session")
def pg75():
    """PolyGeom with beta = 1.75 on the boundary: g(ln 2) = 1, infinite tilted mean."""
    return calibrate_boundary(polygeom_template(1.75), math.log(2.0))


@pytest.fixture(scope="session")
def tp_srw(srw):
    return solve_tilt(srw)


@pytest.fixture(scope="session")
def tp_pg4(pg4):
    return solve_tilt(pg4)


@pytest.fixture(scope="session")
def tp_pg75(pg75):
    return solve_tilt(pg75)


@pytest.fixture(scope="session")
def srw_tables(srw, tp_srw):
    q = tilt_step_law(srw, tp_srw)
    return renewal_table(srw, 1.0, -80, 0), renewal_table(q, tp_srw.rho, 0, 120)


@pytest.fixture(scope="session")
def pg4_tables(pg4, tp_pg4):
    q = tilt_step_law(pg4, tp_pg4)
    return renewal_table(pg4, 1.0, -120, 0), renewal_table(q, tp_pg4.rho, 0, 160)


@pytest.fixture(scope="session")
def pg75_q_table(pg75, tp_pg75):
    q = tilt_step_law(pg75, tp_pg75)
    return renewal_table(q, 1.0, 0, 4200)


@pytest.fixture
def verdict(request):
    """Record and print a PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion: str, claim: str, ok: bool, detail: str = ""):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} - {claim}"
        if detail:
            line += f" [{detail}]"
        request.config.stash.setdefault(_VERDICTS_KEY, []).append((criterion, ok, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = config.stash.get(_VERDICTS_KEY, [])
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for _, _, line in verdicts:
        terminalreporter.write_line(line)
    by_crit = {}
    for crit, ok, _ in verdicts:
        key = crit.rstrip("abcdefgh")
        by_crit[key] = by_crit.get(key, True) and ok
    terminalreporter.write_line("")
    for crit in sorted(by_crit, key=int):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if by_crit[crit] else 'FAIL'}")
