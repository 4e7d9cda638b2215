from fractions import Fraction as F

import pytest

from posicert.polyalg import HermPoly, parse_poly
from posicert.region import Hole, Region, build_region, normalize_constraints

FIXTURE_POLYS = {
    "1": "1",
    "3-x1^2": "3; -1*x1^2",
    "2+x2^2": "2; 1*x2^2",
    "3-x1x2": "3; -1*x1 x2",
    "2-zzbar": "2; -1*x1^2; -1*x2^2",
    "5/2-|x|^2": "5/2; -1*x1^2; -1*x2^2",
}

HOLES = {
    "disk": [],
    "one": [Hole((F(1, 2), F(0)), F(1, 5))],
    "two": [Hole((F(1, 2), F(0)), F(1, 5)), Hole((F(-1, 2), F(0)), F(1, 5))],
}


def make_region(name):
    if not HOLES[name]:
        return Region()
    return normalize_constraints(build_region(HOLES[name]))


REGIONS = {name: make_region(name) for name in HOLES}


def fixture_poly(name):
    return parse_poly(FIXTURE_POLYS[name])


@pytest.fixture(scope="session")
def regions():
    return REGIONS


@pytest.fixture(scope="session")
def fixture_certificates():
    """Search-mode certificates for every (region, polynomial) fixture."""
    from posicert.certgen import generate_certificate

    out = {}
    for rname, region in REGIONS.items():
        for pname in FIXTURE_POLYS:
            out[(rname, pname)] = generate_certificate(fixture_poly(pname), region)
    return out


@pytest.fixture(scope="session")
def z():
    return HermPoly.z()


@pytest.fixture(scope="session")
def zbar():
    return HermPoly.zbar()


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
