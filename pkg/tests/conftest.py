import io
from datetime import date
from pathlib import Path

import pytest

from provnet.claims import Visit, build_provider_directory, derive_visits, parse_claims, parse_patients
from provnet.graph import ProviderGraph
from provnet.synth import SynthConfig, generate

DATA = Path(__file__).parent / "data"

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def visit(pid, npi, day=1, amount=10.0, specialty="Family Medicine", month=1):
    return Visit(pid, npi, date(2014, month, day), amount, specialty)


def two_triangles(bridge=False) -> ProviderGraph:
    edges = [("a", "b", 1), ("a", "c", 1), ("b", "c", 1), ("d", "e", 1), ("d", "f", 1), ("e", "f", 1)]
    if bridge:
        edges.append(("c", "d", 1))
    return ProviderGraph.from_edges(edges)


@pytest.fixture(scope="session")
def small_synth():
    return generate(SynthConfig(seed=11))


@pytest.fixture(scope="session")
def small_pipeline_inputs(small_synth):
    claims, rejects = parse_claims(io.StringIO(small_synth.claims_csv))
    assert not rejects
    patients, prejects = parse_patients(io.StringIO(small_synth.patients_csv))
    assert not prejects
    return claims, derive_visits(claims), patients, build_provider_directory(claims)


def available_backends():
    from provnet import kernels

    return ["python"] + (["cython"] if kernels.compiled is not None else [])
