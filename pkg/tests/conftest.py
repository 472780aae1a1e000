import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sbc import syntax
from sbc.model import validate

FIXTURES = Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    """Parse a fixture and assert it is well-formed."""
    path = FIXTURES / name
    outcome = syntax.parse(path.read_text(), str(path))
    assert outcome.ok, [d.format_human() for d in outcome.diagnostics]
    diags = validate(outcome.model)
    assert not diags, [d.format_human() for d in diags]
    return outcome.model


def parse_text(text: str):
    outcome = syntax.parse(text, "<test>")
    assert outcome.ok, [d.format_human() for d in outcome.diagnostics]
    return outcome.model


@pytest.fixture
def messenger():
    return load_fixture("messenger.sbd")


@pytest.fixture
def messenger_safe():
    return load_fixture("messenger_safe.sbd")


@pytest.fixture
def browser():
    return load_fixture("browser.sbd")
