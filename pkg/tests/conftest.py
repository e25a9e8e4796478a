import numpy as np
import pytest

from polyqre.game import make_game

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    _CRITERIA[number] = (title, call.excinfo is None)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")


def random_game(rng, dims, scale=6.0, with_r=True):
    """Random polymatrix game with entries uniform on [-scale, scale]."""
    N = len(dims)
    Q = {
        (i, k): rng.uniform(-scale, scale, (dims[i] + 1, dims[k] + 1))
        for i in range(N)
        for k in range(N)
        if i != k
    }
    r = [rng.uniform(-scale, scale, d + 1) if with_r else np.zeros(d + 1) for d in dims]
    return make_game(dims, Q, r)


def random_interior(rng, dims, margin=0.05):
    """Reduced point whose lifted coordinates are all at least ``margin / (n_i + 1)``."""
    parts = []
    for d in dims:
        u = rng.dirichlet(np.ones(d + 1))
        u = (1 - margin) * u + margin / (d + 1)
        parts.append(u[:-1])
    return np.concatenate(parts)


def random_dims(rng, max_players=3, max_dim=4):
    N = int(rng.integers(1, max_players + 1))
    return tuple(int(d) for d in rng.integers(1, max_dim + 1, N))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
