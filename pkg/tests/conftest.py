import pytest

from poissoncb.model import ModelParams

_ACCEPTANCE_LINES: list[str] = []


def base_params(lam=1.0, c=0.02, **kw) -> ModelParams:
    d = dict(r=0.05, q=0.03, sigma=0.2, lam=lam, c=c, K=1.0, gamma=0.8)
    d.update(kw)
    return ModelParams(**d)


@pytest.fixture
def case1():
    return base_params(c=0.04)


@pytest.fixture
def case2():
    return base_params(c=0.06)


@pytest.fixture
def case3():
    return base_params(c=0.02)


@pytest.fixture
def acceptance_log():
    """Collects one pass/fail line per criterion; printed in the terminal summary."""

    def log(criterion: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
