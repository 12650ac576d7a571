import copy
import sys

import pytest

from singular_series.characteristic_flow import calibrate
from singular_series.config import fixture_path, load_problem, problem_from_dict
from singular_series.fixed_point import build_bundle, search_W_bar
from singular_series.majorant import build_sup_sequences
from singular_series.series_recursion import compute_phi

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

A_MAIN = 12


def example_doc() -> dict:
    return tomllib.loads(fixture_path("example1").read_text())


def _merge(base: dict, extra: dict) -> dict:
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def make_problem(overrides: dict | None = None, drop: tuple = (), degree_cap=None):
    """example1 with ``drop`` (dotted paths) deleted, then nested ``overrides`` merged in."""
    doc = copy.deepcopy(example_doc())
    for path in drop:
        node = doc
        *head, last = path.split(".")
        for part in head:
            node = node[part]
        node.pop(last, None)
    _merge(doc, overrides or {})
    return problem_from_dict(doc, source="<test>", degree_cap=degree_cap)


@pytest.fixture(scope="session")
def example1():
    return load_problem(fixture_path("example1"))


@pytest.fixture(scope="session")
def zero_problem():
    return load_problem(fixture_path("zero"))


@pytest.fixture(scope="session")
def region1(example1):
    return calibrate(example1.x, example1.K_grid, 2.0, A_MAIN + 1, R=example1.R)


@pytest.fixture(scope="session")
def phi12(example1, region1):
    return compute_phi(example1, A_MAIN, nu=region1.nu)


@pytest.fixture(scope="session")
def sups12(example1, region1):
    return build_sup_sequences(example1, A_MAIN, region1.nu, 2.0)


@pytest.fixture(scope="session")
def bundle12(example1, sups12):
    return build_bundle(example1, sups12, A_MAIN, 15)


@pytest.fixture(scope="session")
def wsearch(example1, bundle12):
    return search_W_bar(example1, bundle12, example1.norm.with_(rho=2.0))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
