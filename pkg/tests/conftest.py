"""Shared oracles and fixtures.

The reference implementations here are deliberately naive and independent of
the package internals: plain Python loops for distances, a from-scratch
Lloyd's iteration for clustering.  Tests freeze or derive expected values
from these, never from the code under test.
"""

import math

import numpy as np
import pytest

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


def record_acceptance(criterion: str, ok: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((criterion, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE_RESULTS:
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] {criterion}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# independent oracles


def naive_distance(a, b) -> float:
    """Sequential-sum Euclidean distance, written apart from the package kernel."""
    total = 0.0
    for x, y in zip(a, b):
        diff = float(x) - float(y)
        total += diff * diff
    return math.sqrt(total)


def naive_nearest(v, means):
    """Exhaustive argmin with the lowest-id tie rule."""
    best_id, best = 0, naive_distance(v, means[0])
    for j in range(1, len(means)):
        dj = naive_distance(v, means[j])
        if dj < best:
            best, best_id = dj, j
    return best_id, best


def naive_assign_all(m, means):
    return np.array([naive_nearest(v, means)[0] for v in m], dtype=np.int32)


def naive_lloyd(m, means0, max_iters=100, tolerance=0):
    """From-scratch Lloyd's: fresh argmin each iteration, empty keeps previous.

    The assignment vector starts all-zero, matching the engine's documented
    reassignment-count semantics.  Returns (means, assignments, history).
    """
    m = np.asarray(m, dtype=np.float64)
    means = np.array(means0, dtype=np.float64, copy=True)
    k = means.shape[0]
    assign = np.zeros(m.shape[0], dtype=np.int32)
    history = []
    for _ in range(max_iters):
        new_assign = naive_assign_all(m, means)
        changed = int((new_assign != assign).sum())
        assign = new_assign
        history.append(assign.copy())
        new_means = means.copy()
        for j in range(k):
            members = m[assign == j]
            if len(members):
                new_means[j] = members.mean(axis=0)
        means = new_means
        if changed <= tolerance:
            break
    return means, assign, history


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
