import numpy as np
import pytest

from adinvest import ActionTriple, Noise, SystemSpec, reference_system, table_site

REFERENCE_V = (5.0, 10.0, 20.0, 50.0, 100.0, 200.0)


@pytest.fixture(scope="session")
def ref():
    return reference_system(20.0)


@pytest.fixture(scope="session")
def site1(ref):
    return ref.sites[0]


@pytest.fixture(scope="session")
def site2(ref):
    return ref.sites[1]


def random_system(rng: np.random.Generator, max_sites=3, max_actions=6, v=None) -> SystemSpec:
    """Small random table-driven system satisfying every model assumption."""
    sites = []
    for sid in range(int(rng.integers(1, max_sites + 1))):
        k = int(rng.integers(1, max_actions))
        actions = [ActionTriple(0.0, float(rng.uniform(0.5, 10)), 0)]
        table = {(0.0, 0): (0.0, 0.0)}
        for j in range(k):
            p = float(rng.choice([0.5, 1.0, 2.0, 5.0, 10.0]))
            m = j + 1
            actions.append(ActionTriple(p, float(rng.choice([0.0, 1.0, 5.0])), m))
            table[(p, m)] = (float(rng.uniform(1, 60)), float(rng.uniform(0, 3) * p))
        sites.append(table_site(sid, table, actions,
                                Noise(float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)))))
    return SystemSpec(tuple(sites), b_av=float(rng.uniform(0.02, 0.5)),
                      v=float(v if v is not None else rng.uniform(1, 100)))


ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    """Print and keep one PASS/FAIL line, then fail the calling test if needed."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
