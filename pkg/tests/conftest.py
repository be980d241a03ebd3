import pathlib

import pytest

from dqi.chase import ChaseBudget
from dqi.textio import parse

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"


def load_fixture(name):
    return parse((FIXTURES / name).read_text())


@pytest.fixture(scope="session")
def budget():
    return ChaseBudget(max_nodes=10000, max_facts=2000, max_depth=200)


@pytest.fixture(scope="session")
def medical():
    return load_fixture("medical.dqi")


@pytest.fixture(scope="session")
def separation():
    return load_fixture("separation.dqi")


@pytest.fixture(scope="session")
def controllability():
    return load_fixture("controllability.dqi")
