import pytest

from stochsis import ModelParams, make_h1, make_h2

N = 1000.0


@pytest.fixture
def h1():
    return make_h1(kappa=1.0, alpha=0.01)


@pytest.fixture
def h2():
    return make_h2(kappa=1.0, alpha=1e-4)


@pytest.fixture
def h1_extinction():
    return ModelParams(beta=1e-5, gamma=0.1, mu=1e-4, sigma=9e-5, N=N)


@pytest.fixture
def h1_persistence():
    return ModelParams(beta=8e-4, gamma=0.1, mu=1e-4, sigma=1e-3, N=N)


@pytest.fixture
def h2_extinction():
    return ModelParams(beta=1e-4, gamma=0.1, mu=0.05, sigma=9e-4, N=N)


@pytest.fixture
def h2_persistence():
    return ModelParams(beta=9.9e-4, gamma=0.1, mu=0.05, sigma=1e-3, N=N)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance criterion: print a PASS/FAIL line, then assert."""
    def check(number, title, checks, runtime, budget, detail=""):
        checks = dict(checks)
        checks[f"runtime {runtime:.2f}s < {budget:g}s"] = runtime < budget
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {title} [{runtime:.2f}s] {detail}".rstrip()
        if failed:
            line += " | failed: " + "; ".join(failed)
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
