"""Dense complex linear algebra over labelled tensor-product spaces.

States and operators carry a :class:`SubsystemLayout` so that factors can be
addressed by label (``"atom1"``, ``"cavity"``, ...) instead of by position.
Everything here is immutable; operations return new objects.

Time evolution uses a scaling-and-squaring Pade matrix exponential, which
stays accurate for the non-normal generators produced by no-jump decay terms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LayoutError",
    "SubsystemLayout",
    "StateVector",
    "Operator",
    "expm",
    "basis_state",
    "tensor",
    "embed",
    "apply",
    "propagator",
    "evolve",
    "inner",
    "fidelity_pure",
]


class LayoutError(ValueError):
    """Raised for inconsistent labels or dimensions."""


@dataclass(frozen=True)
class SubsystemLayout:
    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(label), int(dim)) for label, dim in self.factors)
        labels = [label for label, _ in factors]
        if len(set(labels)) != len(labels):
            raise LayoutError(f"duplicate subsystem labels in {labels}")
        for label, dim in factors:
            if dim < 1:
                raise LayoutError(f"factor {label!r} has non-positive dimension {dim}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *factors: tuple[str, int]) -> "SubsystemLayout":
        return cls(tuple(factors))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LayoutError(f"unknown subsystem label {label!r}; have {self.labels}") from None

    def sub(self, labels: Sequence[str]) -> "SubsystemLayout":
        return SubsystemLayout(tuple(self.factors[self.index(label)] for label in labels))

    def without(self, labels: Iterable[str]) -> "SubsystemLayout":
        drop = set(labels)
        for label in drop:
            self.index(label)
        return SubsystemLayout(tuple(f for f in self.factors if f[0] not in drop))

    def __add__(self, other: "SubsystemLayout") -> "SubsystemLayout":
        return SubsystemLayout(self.factors + other.factors)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Amplitudes over ``layout``.

    The vector is deliberately not normalised: under conditional (no-jump)
    evolution its squared norm is the survival probability of the branch.
    """

    layout: SubsystemLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != self.layout.dim:
            raise LayoutError(
                f"amplitude length {amps.shape[0]} does not match layout dimension {self.layout.dim}"
            )
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))

    def normalized(self) -> "StateVector":
        n = self.norm
        if n == 0.0:
            raise ValueError("cannot normalise the zero vector")
        return StateVector(self.layout, self.amplitudes / n)

    def scaled(self, factor: complex) -> "StateVector":
        return StateVector(self.layout, self.amplitudes * factor)

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def project(self, label: str, level: int) -> "StateVector":
        """Contract factor ``label`` with basis bra ``<level|`` and drop it."""
        axis = self.layout.index(label)
        dim = self.layout.dims[axis]
        if not 0 <= level < dim:
            raise LayoutError(f"level {level} outside factor {label!r} of dimension {dim}")
        sliced = np.take(self.as_tensor(), level, axis=axis)
        return StateVector(self.layout.without([label]), sliced.reshape(-1))

    def population(self, label: str, level: int) -> float:
        return self.project(label, level).norm_sq

    def permuted(self, labels: Sequence[str]) -> "StateVector":
        """Reorder the factors to ``labels`` (must be a permutation)."""
        if sorted(labels) != sorted(self.layout.labels):
            raise LayoutError(f"{labels} is not a permutation of {self.layout.labels}")
        axes = [self.layout.index(label) for label in labels]
        arr = np.transpose(self.as_tensor(), axes)
        return StateVector(self.layout.sub(labels), arr.reshape(-1))

    def allclose(self, other: "StateVector", atol: float = 1e-12) -> bool:
        return self.layout == other.layout and np.allclose(
            self.amplitudes, other.amplitudes, rtol=0.0, atol=atol
        )


@dataclass(frozen=True, eq=False)
class Operator:
    layout: SubsystemLayout
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        d = self.layout.dim
        if mat.shape != (d, d):
            raise LayoutError(f"operator shape {mat.shape} does not match layout dimension {d}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    def __matmul__(self, other: "Operator") -> "Operator":
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")
        return Operator(self.layout, self.matrix @ other.matrix)

    def __add__(self, other: "Operator") -> "Operator":
        if other.layout != self.layout:
            raise LayoutError("operator layouts differ")
        return Operator(self.layout, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        return self + other.scaled(-1.0)

    def scaled(self, factor: complex) -> "Operator":
        return Operator(self.layout, self.matrix * factor)

    def dagger(self) -> "Operator":
        return Operator(self.layout, self.matrix.conj().T)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, rtol=0.0, atol=atol))

    @classmethod
    def identity(cls, layout: SubsystemLayout) -> "Operator":
        return cls(layout, np.eye(layout.dim, dtype=complex))


# Pade coefficients and 1-norm thresholds for degrees 3, 5, 7, 9, 13
# (Higham 2005, "The scaling and squaring method for the matrix exponential revisited").
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def _pade_uv(A: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    b = _PADE[m]
    ident = np.eye(A.shape[0], dtype=A.dtype)
    A2 = A @ A
    if m == 13:
        A4 = A2 @ A2
        A6 = A4 @ A2
        U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
                 + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
        V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
        return U, V
    U = b[1] * ident
    V = b[0] * ident
    power = ident
    for k in range(1, m // 2 + 1):
        power = power @ A2
        U = U + b[2 * k + 1] * power
        V = V + b[2 * k] * power
    return A @ U, V


def expm(A: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant.

    Parameters
    ----------
    A : ndarray, shape (n, n)
        Square real or complex matrix. Need not be normal.

    Returns
    -------
    ndarray
        ``exp(A)`` as a complex array.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("expm input has non-finite entries")
    if A.shape[0] == 0:
        return A.copy()
    norm1 = float(np.linalg.norm(A, 1))
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            U, V = _pade_uv(A, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(np.ceil(np.log2(norm1 / _THETA[13]))))
    U, V = _pade_uv(A / 2.0**s, 13)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def basis_state(layout: SubsystemLayout, levels: dict[str, int] | Sequence[int]) -> StateVector:
    """Computational basis ket; ``levels`` maps label -> level or lists levels in layout order."""
    if isinstance(levels, dict):
        missing = set(layout.labels) - set(levels)
        if missing:
            raise LayoutError(f"no level given for {sorted(missing)}")
        idx = tuple(levels[label] for label in layout.labels)
    else:
        idx = tuple(levels)
    if len(idx) != len(layout.dims) or any(not 0 <= i < d for i, d in zip(idx, layout.dims)):
        raise LayoutError(f"levels {idx} invalid for dimensions {layout.dims}")
    amps = np.zeros(layout.dim, dtype=complex)
    amps[np.ravel_multi_index(idx, layout.dims)] = 1.0
    return StateVector(layout, amps)


def tensor(parts: Sequence[StateVector]) -> StateVector:
    """Kronecker product in the listed order; layouts are concatenated."""
    if not parts:
        raise ValueError("tensor needs at least one state")
    layout = parts[0].layout
    amps = parts[0].amplitudes
    for part in parts[1:]:
        layout = layout + part.layout
        amps = np.kron(amps, part.amplitudes)
    return StateVector(layout, amps)


def _apply_tensor(matrix: np.ndarray, arr: np.ndarray, axes: list[int], dims: Sequence[int]) -> np.ndarray:
    k = len(axes)
    op = matrix.reshape(tuple(dims) * 2)
    out = np.tensordot(op, arr, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the operator's output axes first; move them back into place
    return np.moveaxis(out, list(range(k)), axes)


def embed(op: Operator, target_labels: Sequence[str], layout: SubsystemLayout) -> Operator:
    """Lift ``op`` (acting on ``target_labels`` in that order) to all of ``layout``."""
    targets = list(target_labels)
    sub = layout.sub(targets)
    if sub.dims != op.layout.dims:
        raise LayoutError(
            f"operator dimensions {op.layout.dims} do not match targets {targets} with {sub.dims}"
        )
    axes = [layout.index(label) for label in targets]
    ident = np.eye(layout.dim, dtype=complex).reshape(layout.dims + (layout.dim,))
    out = _apply_tensor(op.matrix, ident, axes, sub.dims)
    return Operator(layout, out.reshape(layout.dim, layout.dim))


def apply(op: Operator, state: StateVector, target_labels: Sequence[str] | None = None) -> StateVector:
    """Apply ``op`` to ``state``; with ``target_labels`` it acts only on those factors."""
    if target_labels is None:
        if op.layout.dims != state.layout.dims:
            raise LayoutError("operator and state layouts differ")
        return StateVector(state.layout, op.matrix @ state.amplitudes)
    targets = list(target_labels)
    sub = state.layout.sub(targets)
    if sub.dims != op.layout.dims:
        raise LayoutError(
            f"operator dimensions {op.layout.dims} do not match targets {targets} with {sub.dims}"
        )
    axes = [state.layout.index(label) for label in targets]
    out = _apply_tensor(op.matrix, state.as_tensor(), axes, sub.dims)
    return StateVector(state.layout, out.reshape(-1))


def propagator(H: Operator, t: float) -> Operator:
    """``exp(-i H t)``; times are in units of 1/g1."""
    if t < 0:
        raise ValueError(f"evolution time must be non-negative, got {t}")
    if not np.all(np.isfinite(H.matrix)) or not np.isfinite(t):
        raise ValueError("Hamiltonian or time has non-finite entries")
    return Operator(H.layout, expm(-1j * t * H.matrix))


def evolve(state: StateVector, H: Operator, t: float, tol: float = 1e-12) -> StateVector:
    """Schrodinger evolution ``exp(-i H t) |state>`` without renormalisation.

    ``H`` may be non-Hermitian, in which case the squared norm of the result
    is the probability that no quantum jump occurred. The Pade exponential
    is accurate to near machine precision, well inside ``tol`` for the
    desk-scale generators used here.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.all(np.isfinite(state.amplitudes)):
        raise ValueError("state has non-finite amplitudes")
    if t == 0:
        return state
    return apply(propagator(H, t), state)


def inner(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``."""
    if a.layout != b.layout:
        raise LayoutError("states live on different layouts")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity_pure(a: StateVector, b: StateVector) -> float:
    """Fidelity of the normalised versions of two pure states."""
    na, nb = a.norm_sq, b.norm_sq
    if na == 0.0 or nb == 0.0:
        raise ValueError("fidelity undefined for a zero vector")
    return abs(inner(a, b)) ** 2 / (na * nb)
