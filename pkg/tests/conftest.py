import numpy as np
import pytest

from cskin.model_io import BlendshapeModel, write_manifest, write_obj


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_model(rng, n=8, s=3, scale=1.0, edges=True):
    rest = rng.normal(size=(n, 3))
    deltas = scale * rng.normal(size=(s, n, 3))
    e = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)] if edges else []
    return BlendshapeModel(rest, deltas, e, 1.0)


@pytest.fixture
def triangle_set(tmp_path):
    """Rest triangle plus two shapes; the first moves vertex 0 by +x."""
    rest = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    shape0 = rest.copy()
    shape0[0] += [1.0, 0.0, 0.0]
    write_obj(tmp_path / "rest.obj", rest, [(0, 1, 2)])
    write_obj(tmp_path / "s0.obj", shape0, [(0, 1, 2)])
    write_obj(tmp_path / "s1.obj", rest, [(0, 1, 2)])
    write_manifest(tmp_path / "m.json", tmp_path / "rest.obj",
                   [tmp_path / "s0.obj", tmp_path / "s1.obj"], "cm")
    return tmp_path / "m.json"


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
