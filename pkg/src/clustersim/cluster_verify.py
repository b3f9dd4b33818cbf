"""Linear cluster-state targets and the checks shared by both schemes.

The N-qubit target is

    2^{-N/2} (x)_{j=1..N} ( |0>_j Z_{j+1} + |1>_j ),   Z_{N+1} = 1,

with ``Z|0> = |0>``, ``Z|1> = -|1>``. Expanded, bitstring ``x`` carries the
sign ``(-1)^{#{j : x_j = 0, x_{j+1} = 1}}``. Qubit 1 is the most significant
bit everywhere in this package.
"""

from __future__ import annotations

import enum
import itertools
from functools import lru_cache

import numpy as np

from .core_linalg import LayoutError, StateVector, SubsystemLayout
from .fock import EncodingError, SparseFockState, from_qubit_vector, to_qubit_vector

__all__ = [
    "QubitEncoding",
    "atom_labels",
    "ideal_cluster_amplitudes",
    "ideal_cluster",
    "qubit_vector",
    "cluster_fidelity",
    "stabilizer_matrices",
    "reference_signs",
    "stabilizer_expectations",
    "sigma_z_deviation",
]

ATOMIC_QUBIT_LEVELS = (0, 1)  # g -> 0, e -> 1; the third level i is not part of the code space


class QubitEncoding(enum.Enum):
    ATOMIC = "atomic"
    DUAL_RAIL = "dual_rail"


def atom_labels(n: int) -> list[str]:
    return [f"atom{j}" for j in range(1, n + 1)]


@lru_cache(maxsize=None)
def _cluster_signs(n: int) -> tuple[int, ...]:
    signs = []
    for idx in range(2**n):
        bits = [(idx >> (n - 1 - j)) & 1 for j in range(n)]
        flips = sum(1 for j in range(n - 1) if bits[j] == 0 and bits[j + 1] == 1)
        signs.append(-1 if flips % 2 else 1)
    return tuple(signs)


def ideal_cluster_amplitudes(n: int) -> np.ndarray:
    """Qubit-basis amplitudes of the N-qubit linear cluster state."""
    if n < 1:
        raise ValueError(f"cluster size must be >= 1, got {n}")
    return np.array(_cluster_signs(n), dtype=complex) * 2.0 ** (-n / 2)


def ideal_cluster(n: int, encoding: QubitEncoding | str = QubitEncoding.ATOMIC,
                  ensembles: list[int] | None = None, n_ensembles: int | None = None):
    """Cluster target as a 3-level atomic :class:`StateVector` or a dual-rail :class:`SparseFockState`."""
    encoding = QubitEncoding(encoding)
    amps = ideal_cluster_amplitudes(n)
    if encoding is QubitEncoding.ATOMIC:
        layout = SubsystemLayout(tuple((label, 3) for label in atom_labels(n)))
        full = np.zeros((3,) * n, dtype=complex)
        full[(slice(0, 2),) * n] = amps.reshape((2,) * n)
        return StateVector(layout, full.reshape(-1))
    ensembles = list(ensembles or range(1, n + 1))
    return from_qubit_vector(amps, ensembles, n_ensembles or max(ensembles))


def qubit_vector(candidate, n: int, ensembles: list[int] | None = None) -> tuple[np.ndarray, float]:
    """Project ``candidate`` onto its N-qubit code space.

    Returns ``(vector, outside)`` where ``outside`` is the squared norm of the
    discarded components (level ``i`` populations, wrong excitation numbers).
    Atomic factors may have dimension 2 (plain qubits) or 3 (g, e, i).
    """
    if isinstance(candidate, SparseFockState):
        return to_qubit_vector(candidate, list(ensembles or range(1, n + 1)))
    if isinstance(candidate, StateVector):
        dims = candidate.layout.dims
        if len(dims) != n:
            raise LayoutError(f"state has {len(dims)} factors, expected {n}")
        if any(d not in (2, 3) for d in dims):
            raise LayoutError(f"qubit factors must have dimension 2 or 3, got {dims}")
        arr = candidate.as_tensor()
        sub = arr[(slice(0, 2),) * n].reshape(-1)
        outside = candidate.norm_sq - float(np.vdot(sub, sub).real)
        return sub.copy(), max(outside, 0.0)
    vec = np.asarray(candidate, dtype=complex).reshape(-1)
    if vec.shape[0] != 2**n:
        raise LayoutError(f"vector length {vec.shape[0]} is not 2**{n}")
    return vec, 0.0


def cluster_fidelity(candidate, n: int, ensembles: list[int] | None = None) -> float:
    """Fidelity of the normalised candidate with the N-qubit cluster state.

    Population outside the code space (e.g. level ``i``) counts as loss.
    """
    vec, outside = qubit_vector(candidate, n, ensembles)
    total = float(np.vdot(vec, vec).real) + outside
    if total == 0.0:
        raise ValueError("fidelity undefined for a zero vector")
    overlap = np.vdot(ideal_cluster_amplitudes(n), vec)
    return float(abs(overlap) ** 2 / total)


_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I = np.eye(2, dtype=complex)


def _kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


@lru_cache(maxsize=None)
def _stabilizers(n: int) -> tuple[np.ndarray, ...]:
    ops = []
    for j in range(n):
        factors = [_I] * n
        factors[j] = _X
        if j > 0:
            factors[j - 1] = _Z
        if j < n - 1:
            factors[j + 1] = _Z
        ops.append(_kron_all(factors))
    return tuple(ops)


def stabilizer_matrices(n: int) -> list[np.ndarray]:
    """``K_j = Z_{j-1} X_j Z_{j+1}`` with the missing neighbours dropped at the chain ends."""
    return list(_stabilizers(n))


def reference_signs(n: int) -> list[int]:
    """Signs of ``<K_j>`` on the ideal cluster, found by direct evaluation."""
    psi = ideal_cluster_amplitudes(n)
    signs = []
    for K in _stabilizers(n):
        value = float(np.vdot(psi, K @ psi).real)
        if abs(abs(value) - 1.0) > 1e-12:
            raise AssertionError(f"ideal cluster is not a K eigenstate (got {value})")
        signs.append(1 if value > 0 else -1)
    return signs


def stabilizer_expectations(candidate, n: int, ensembles: list[int] | None = None,
                            atol: float = 1e-12) -> list[float]:
    vec, outside = qubit_vector(candidate, n, ensembles)
    if outside > atol:
        raise EncodingError(f"state has weight {outside:.3g} outside the qubit code space")
    norm = float(np.vdot(vec, vec).real)
    if norm == 0.0:
        raise ValueError("expectation undefined for a zero vector")
    return [float(np.vdot(vec, K @ vec).real / norm) for K in _stabilizers(n)]


def sigma_z_deviation(candidate, n: int, ensembles: list[int] | None = None,
                      atol: float = 1e-10) -> tuple[int, ...] | None:
    """Smallest set of qubits whose Z flips (times a global phase) turn ``candidate`` into the cluster.

    Returns the 1-based qubit indices, ``()`` if it already matches, or
    ``None`` if no Z pattern works.
    """
    vec, outside = qubit_vector(candidate, n, ensembles)
    norm = float(np.sqrt(np.vdot(vec, vec).real + outside))
    if norm == 0.0:
        raise ValueError("zero candidate")
    vec = vec / norm
    target = ideal_cluster_amplitudes(n)
    bits = np.array([[(idx >> (n - 1 - j)) & 1 for j in range(n)] for idx in range(2**n)])
    for size in range(n + 1):
        for subset in itertools.combinations(range(n), size):
            signs = (-1.0) ** bits[:, list(subset)].sum(axis=1) if subset else np.ones(2**n)
            flipped = vec * signs
            overlap = np.vdot(target, flipped)
            if abs(abs(overlap) - 1.0) <= atol and np.allclose(
                    flipped, target * overlap, rtol=0.0, atol=atol):
                return tuple(j + 1 for j in subset)
    return None
