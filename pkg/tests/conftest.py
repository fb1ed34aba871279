import pytest

from cpcising.cpc import build_propagation_model, derive_check_sets, load_code

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def code513():
    return load_code("513")


@pytest.fixture(scope="session")
def code933():
    return load_code("933")


@pytest.fixture(scope="session")
def prop513(code513):
    return build_propagation_model(code513)


@pytest.fixture(scope="session")
def prop933(code933):
    return build_propagation_model(code933)


@pytest.fixture(scope="session")
def checks513(prop513):
    return derive_check_sets(prop513)


@pytest.fixture(scope="session")
def checks933(prop933):
    return derive_check_sets(prop933)


@pytest.fixture
def acceptance_line():
    def emit(label, ok, detail):
        line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
