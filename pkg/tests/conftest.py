import numpy as np
import pytest

ACCEPTANCE_RESULTS = []


def kron_all(mats):
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def cluster_by_gates(n):
    """Oracle: apply |0><0|_j Z_{j+1} + |1><1|_j to |+>^n, one neighbour pair at a time."""
    plus = np.ones(2, dtype=complex) / np.sqrt(2)
    psi = kron_all([plus.reshape(2, 1)] * n).reshape(-1)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    eye = np.eye(2, dtype=complex)
    for j in range(n - 1):
        left = [eye] * n
        left[j], left[j + 1] = p0, z
        right = [eye] * n
        right[j] = p1
        psi = (kron_all(left) + kron_all(right)) @ psi
    return psi


@pytest.fixture
def rng():
    return np.random.default_rng(20061016)


def pytest_runtest_logreport(report):
    if report.when == "call" and "acceptance" in report.keywords:
        ACCEPTANCE_RESULTS.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
