import time

import numpy as np
import pytest

from hypercoop.game import ContributionMatrix
from hypercoop.hypergraph import GeneratorConfig, generate_er

_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    n, title = m.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        msg = ""
        if rep.failed and call.excinfo is not None:
            msg = str(call.excinfo.value).splitlines()[0][:240] if str(call.excinfo.value) else ""
        _results[n] = (title, rep.outcome, msg)


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        title, outcome, msg = _results[n]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"criterion {n:2d} {status}  {title}"
        if msg and status == "FAIL":
            line += f"  ({msg})"
        terminalreporter.write_line(line)


@pytest.fixture
def stopwatch():
    class W:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.seconds = time.perf_counter() - self.t0

    return W


def random_instance(rng, n_max=30, sigma=None):
    """Small random game: ER hypergraph, interior-ish endowments, r in (1, sigma), random X."""
    sigma = sigma or int(rng.choice([3, 3, 4]))
    N = int(rng.integers(sigma + 1, n_max + 1))
    k = float(rng.uniform(3.0, 6.0))
    H = generate_er(GeneratorConfig("ER", N, k, sigma, seed=int(rng.integers(2**32))))
    e = rng.dirichlet(np.ones(N))
    if rng.random() < 0.2:
        e[rng.integers(N)] = 0.0
        e /= e.sum()
    r = rng.uniform(1.05, sigma - 0.05, N)
    w = rng.uniform(0.05, 1.0, H.edges.shape)
    rows = np.bincount(H.edges.ravel(), weights=w.ravel(), minlength=N)
    x = ContributionMatrix(H, w / rows[H.edges])
    return H, e, r, x
