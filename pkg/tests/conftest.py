import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eqmin.terms import parse_quantified

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def example3_axioms():
    return [parse_quantified("a = b"), parse_quantified("f(x) = x")]


@pytest.fixture(scope="session")
def example3_conjecture():
    return parse_quantified("h(f(b),a) = h(a,f(b))")


@pytest.fixture(scope="session")
def example3_transcript():
    return (FIXTURES / "example3.refutation.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def chain_transcript():
    return (FIXTURES / "twee_style.chain.txt").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def worked_scenario():
    from scenario import Scenario

    return Scenario()
