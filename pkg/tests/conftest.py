import pathlib

import pytest

from qcasm import ast, parser
from qcasm.qmath import Registry, load_registry

PROGRAMS = pathlib.Path(__file__).resolve().parent.parent / "src" / "qcasm" / "programs"
FIXTURES = pathlib.Path(__file__).resolve().parent / "fixtures"

CORPUS = ["cnot_mb", "cnot_mb_liberal", "teleport", "qft", "phase_est", "grover"]


def corpus_text(name: str) -> str:
    return (PROGRAMS / f"{name}.qcasm").read_text()


def corpus_program(name: str):
    return parser.parse(corpus_text(name))


def ground(name: str, bindings=None, registry=None):
    registry = registry if registry is not None else Registry()
    return ast.elaborate(corpus_program(name), bindings or {}, registry)


@pytest.fixture
def registry():
    return Registry()


@pytest.fixture
def tele_registry():
    return load_registry(PROGRAMS / "teleport_demo.json", into=Registry())


@pytest.fixture
def pe_registry():
    return load_registry(PROGRAMS / "phase_est_demo.json", into=Registry())
