import pytest

from v2isim.replica import bundled_path
from v2isim.scenario import load_scenario, parse_scenario

# one signalized junction, two approaches merging onto one exit
SMALL = """
mode: baseline
network:
  zone: {center: [0, 0], control_radius: 300, surveillance_radius: 500}
  junctions:
  - {id: J, x: 0, y: 0}
  - {id: W, x: -200, y: 0}
  - {id: N, x: 0, y: 200}
  - {id: E, x: 200, y: 0}
  lanes:
  - {id: w_in, from: W, to: J, length: 200}
  - {id: n_in, from: N, to: J, length: 200}
  - {id: j_e, from: J, to: E, length: 200}
  routes:
  - {id: WE, lanes: [w_in, j_e]}
  - {id: NE, lanes: [n_in, j_e]}
demand:
  - {route: WE, kind: passenger, start: 0, headway: 4, count: 10}
  - {route: NE, kind: passenger, start: 1, headway: 6, count: 6}
signals:
  J:
    offset: 0
    approaches: {W: [w_in], N: [n_in]}
    conflicts: [[W, N]]
    phases:
    - {state: GR, duration: 20}
    - {state: YR, duration: 3}
    - {state: RG, duration: 20}
    - {state: RY, duration: 3}
sim: {dt: 0.5, duration: 120, seed: 3}
"""


@pytest.fixture
def small_text():
    return SMALL


@pytest.fixture
def small_cfg():
    return parse_scenario(SMALL)


@pytest.fixture(scope="session")
def saeb_cfg():
    return load_scenario(bundled_path("saeb-salam"))


@pytest.fixture(scope="session")
def gridlock_cfg():
    return load_scenario(bundled_path("gridlock"))


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
