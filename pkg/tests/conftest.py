from pathlib import Path

import pytest

from fsmguard import SourceText, extract_stg, parse_source

DESIGNS = Path(__file__).resolve().parent.parent / "designs"
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def design_source(name: str) -> SourceText:
    return SourceText.from_file(DESIGNS / f"{name}.v")


def design_ast(name: str):
    return parse_source(design_source(name)).expect_ast()


def design_stg(name: str, protected=()):
    return extract_stg(design_ast(name), protected)


@pytest.fixture
def vending():
    return design_source("vending")


@pytest.fixture
def vending_deadlock():
    return design_source("vending_deadlock")


@pytest.fixture
def aes_ctrl():
    return design_source("aes_ctrl")


@pytest.fixture
def aes_ctrl_default():
    return design_source("aes_ctrl_default")


@pytest.fixture
def fsm_review():
    return design_source("fsm_review")


@pytest.fixture
def rsa_ctrl():
    return design_source("rsa_ctrl")


@pytest.fixture
def moore_conflict():
    return design_source("moore_conflict")


@pytest.fixture
def clean_bases():
    return [design_source(n) for n in ("vending", "aes_ctrl_default", "rsa_ctrl")]
