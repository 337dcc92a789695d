import numpy as np
import pytest

from lie3atlas import catalog
from lie3atlas.catalog import parse_spec

CHARTABLE = [
    "R^1", "R^2", "R^3", "T^1", "T^2", "T^3", "RxT1", "RxT2", "R2xT1",
    "N3", "N3*", "SE2~", "SE2:k=1", "SE2:k=3", "AffR", "AffRxR", "AffRxT1",
    "J", "D:lambda=1", "D:lambda=-1", "D:lambda=-0.5", "D:lambda=0.3",
    "C:lambda=0.5", "C:lambda=2", "SU2", "SO3",
    "A:[[0,0],[1,0]]", "A:[[0.5,-2],[3,0.1]]",
]


def random_elements(spec, rng, n, box=2.0):
    if spec.kind == "quat":
        q = rng.normal(size=(n, 4))
        return catalog.normalize_coords(spec, q / np.linalg.norm(q, axis=1, keepdims=True))
    return catalog.normalize_coords(spec, rng.uniform(-box, box, (n, spec.chart.dim)))


def element_gap(spec, a, b):
    """Largest coordinate discrepancy, periodic axes and quaternion signs respected."""
    if spec.kind == "quat":
        d = np.minimum(np.abs(a - b).max(axis=-1), np.abs(a + b).max(axis=-1))
        return float(np.max(d))
    return float(np.max(np.abs(catalog.coord_difference(spec, a, b))))


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.SeedSequence(20261016))


@pytest.fixture(params=CHARTABLE)
def chartable(request):
    return parse_spec(request.param)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
