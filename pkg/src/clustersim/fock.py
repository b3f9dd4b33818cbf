"""Sparse occupation-number states for dual-rail atomic-ensemble modes.

Each ensemble ``e`` (1-based) owns two collective bosonic modes, the ``h`` and
``v`` rails. A basis key is a flat tuple ``(n_h1, n_v1, n_h2, n_v2, ...)``.
Collective modes are treated as ideal bosons (the many-atom limit).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "H",
    "V",
    "ModeId",
    "EncodingError",
    "OccupationOverflowError",
    "SparseFockState",
    "vac",
    "create",
    "from_creators",
    "combine",
    "dual_rail_qubit",
]

H = "h"
V = "v"
PRUNE = 1e-15
DEFAULT_CAP = 2


class EncodingError(ValueError):
    """State has support outside the one-excitation-per-ensemble subspace."""


class OccupationOverflowError(OverflowError):
    """A mode occupation would exceed the configured cap."""


@dataclass(frozen=True, order=True)
class ModeId:
    ensemble: int
    rail: str

    def __post_init__(self):
        if self.ensemble < 1:
            raise ValueError(f"ensemble index must be >= 1, got {self.ensemble}")
        if self.rail not in (H, V):
            raise ValueError(f"rail must be 'h' or 'v', got {self.rail!r}")

    def slot(self) -> int:
        return 2 * (self.ensemble - 1) + (0 if self.rail == H else 1)

    def __str__(self) -> str:
        return f"{self.rail}{self.ensemble}"


def _mode(mode: ModeId | tuple[str, int] | str) -> ModeId:
    if isinstance(mode, ModeId):
        return mode
    if isinstance(mode, str):
        return ModeId(int(mode[1:]), mode[0])
    rail, ensemble = mode
    return ModeId(int(ensemble), rail)


@dataclass(frozen=True, eq=False)
class SparseFockState:
    n_ensembles: int
    terms: Mapping[tuple[int, ...], complex] = field(default_factory=dict)
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.n_ensembles < 1:
            raise ValueError("need at least one ensemble")
        width = 2 * self.n_ensembles
        clean: dict[tuple[int, ...], complex] = {}
        for key, amp in self.terms.items():
            key = tuple(int(n) for n in key)
            if len(key) != width:
                raise ValueError(f"occupation key {key} has length {len(key)}, expected {width}")
            if any(n < 0 for n in key):
                raise ValueError(f"negative occupation in {key}")
            if any(n > self.cap for n in key):
                raise OccupationOverflowError(f"occupation {key} exceeds cap {self.cap}")
            amp = complex(amp)
            if abs(amp) >= PRUNE:
                clean[key] = clean.get(key, 0j) + amp
        object.__setattr__(self, "terms", {k: a for k, a in sorted(clean.items()) if abs(a) >= PRUNE})

    # -- basic algebra -------------------------------------------------------

    @property
    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    @property
    def is_empty(self) -> bool:
        return not self.terms

    def normalized(self) -> "SparseFockState":
        n = math.sqrt(self.norm_sq)
        if n == 0.0:
            raise ValueError("cannot normalise an empty state")
        return self.scaled(1.0 / n)

    def scaled(self, factor: complex) -> "SparseFockState":
        return self._new({k: a * factor for k, a in self.terms.items()})

    def __add__(self, other: "SparseFockState") -> "SparseFockState":
        self._check_compatible(other)
        out = dict(self.terms)
        for k, a in other.terms.items():
            out[k] = out.get(k, 0j) + a
        return self._new(out)

    def __sub__(self, other: "SparseFockState") -> "SparseFockState":
        return self + other.scaled(-1.0)

    def inner(self, other: "SparseFockState") -> complex:
        """``<self|other>``."""
        self._check_compatible(other)
        return complex(sum(a.conjugate() * other.terms.get(k, 0j) for k, a in self.terms.items()))

    def allclose(self, other: "SparseFockState", atol: float = 1e-12) -> bool:
        self._check_compatible(other)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(k, 0j) - other.terms.get(k, 0j)) <= atol for k in keys)

    def equal_up_to_phase(self, other: "SparseFockState", atol: float = 1e-12) -> bool:
        overlap = other.inner(self)
        if abs(overlap) == 0.0:
            return self.is_empty and other.is_empty
        phase = overlap / abs(overlap)
        return self.allclose(other.scaled(phase), atol=atol)

    def _new(self, terms: Mapping[tuple[int, ...], complex]) -> "SparseFockState":
        return SparseFockState(self.n_ensembles, terms, self.cap)

    def _check_compatible(self, other: "SparseFockState") -> None:
        if other.n_ensembles != self.n_ensembles:
            raise ValueError(
                f"states span {self.n_ensembles} and {other.n_ensembles} ensembles"
            )

    # -- ensemble bookkeeping --------------------------------------------------

    def check_ensemble(self, ensemble: int) -> None:
        if not 1 <= ensemble <= self.n_ensembles:
            raise ValueError(f"ensemble {ensemble} outside 1..{self.n_ensembles}")

    def occupation(self, key: tuple[int, ...], ensemble: int) -> tuple[int, int]:
        s = 2 * (ensemble - 1)
        return key[s], key[s + 1]

    def occupations(self, key: tuple[int, ...]) -> dict[ModeId, int]:
        out = {}
        for slot, n in enumerate(key):
            if n:
                out[ModeId(slot // 2 + 1, H if slot % 2 == 0 else V)] = n
        return out

    def active_ensembles(self) -> set[int]:
        return {m.ensemble for key in self.terms for m in self.occupations(key)}

    def with_ensembles(self, n_ensembles: int) -> "SparseFockState":
        """Pad (or trim vacuum) ensembles so the state spans ``n_ensembles``."""
        if n_ensembles < self.n_ensembles:
            extra = self.active_ensembles() - set(range(1, n_ensembles + 1))
            if extra:
                raise ValueError(f"cannot drop occupied ensembles {sorted(extra)}")
            width = 2 * n_ensembles
            return SparseFockState(n_ensembles, {k[:width]: a for k, a in self.terms.items()}, self.cap)
        pad = (0,) * (2 * (n_ensembles - self.n_ensembles))
        return SparseFockState(n_ensembles, {k + pad: a for k, a in self.terms.items()}, self.cap)

    def relabel(self, mapping: Mapping[int, int]) -> "SparseFockState":
        """Move ensembles according to ``mapping`` (a permutation of 1..n, unmapped stay put)."""
        perm = {e: e for e in range(1, self.n_ensembles + 1)}
        perm.update(mapping)
        if sorted(perm.values()) != list(range(1, self.n_ensembles + 1)):
            raise ValueError(f"relabelling {dict(mapping)} is not a permutation")
        out = {}
        for key, amp in self.terms.items():
            new = [0] * len(key)
            for src, dst in perm.items():
                new[2 * (dst - 1)] = key[2 * (src - 1)]
                new[2 * (dst - 1) + 1] = key[2 * (src - 1) + 1]
            out[tuple(new)] = amp
        return self._new(out)

    def describe(self, precision: int = 4) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key, amp in self.terms.items():
            ops = " ".join(
                f"{m}+" if n == 1 else f"({m}+)^{n}" for m, n in sorted(self.occupations(key).items())
            )
            parts.append(f"({amp.real:.{precision}g}{amp.imag:+.{precision}g}j) {ops or 'vac'}")
        return " + ".join(parts)


def vac(n_ensembles: int, cap: int = DEFAULT_CAP) -> SparseFockState:
    return SparseFockState(n_ensembles, {(0,) * (2 * n_ensembles): 1.0}, cap)


def create(state: SparseFockState, mode: ModeId | tuple[str, int] | str) -> SparseFockState:
    """Apply a creation operator, ``a+|n> = sqrt(n+1)|n+1>``."""
    mode = _mode(mode)
    state.check_ensemble(mode.ensemble)
    slot = mode.slot()
    out = {}
    for key, amp in state.terms.items():
        n = key[slot]
        if n + 1 > state.cap:
            raise OccupationOverflowError(f"mode {mode} would hold {n + 1} > cap {state.cap}")
        new = key[:slot] + (n + 1,) + key[slot + 1:]
        out[new] = amp * math.sqrt(n + 1)
    return state._new(out)


def from_creators(n_ensembles: int, modes: Iterable, amplitude: complex = 1.0,
                  cap: int = DEFAULT_CAP) -> SparseFockState:
    """``amplitude * prod(modes) |vac>``, e.g. ``from_creators(2, ["h1", "v2"])``."""
    state = vac(n_ensembles, cap)
    for mode in modes:
        state = create(state, mode)
    return state.scaled(amplitude)


def combine(a: SparseFockState, b: SparseFockState) -> SparseFockState:
    """Product of the creation polynomials of ``a`` and ``b`` applied to vacuum.

    This is how independently prepared pair states that share ensembles are
    joined: ``|m>|n> -> sqrt((m+n)!/(m! n!)) |m+n>`` mode by mode.
    """
    a._check_compatible(b)
    cap = max(a.cap, b.cap)
    out: dict[tuple[int, ...], complex] = {}
    for ka, xa in a.terms.items():
        for kb, xb in b.terms.items():
            key = tuple(m + n for m, n in zip(ka, kb))
            if any(n > cap for n in key):
                raise OccupationOverflowError(f"product term {key} exceeds cap {cap}")
            weight = 1.0
            for m, n in zip(ka, kb):
                if m and n:
                    weight *= math.sqrt(math.comb(m + n, m))
            out[key] = out.get(key, 0j) + xa * xb * weight
    return SparseFockState(a.n_ensembles, out, cap)


def dual_rail_qubit(ensemble: int, alpha: complex, beta: complex, n_ensembles: int,
                    cap: int = DEFAULT_CAP) -> SparseFockState:
    """``(alpha h+ + beta v+)|vac>`` on one ensemble."""
    h = from_creators(n_ensembles, [(H, ensemble)], alpha, cap)
    v = from_creators(n_ensembles, [(V, ensemble)], beta, cap)
    return h + v


def phase(angle: float) -> complex:
    return cmath.exp(1j * angle)


def to_qubit_vector(state: SparseFockState, ensembles: list[int]) -> tuple[np.ndarray, float]:
    """Amplitudes on the dual-rail qubit basis of ``ensembles`` (h->0, v->1, first is most significant).

    Returns the vector and the squared norm left outside the encoded subspace.
    Ensembles not listed must be empty for a term to count as encoded.
    """
    n = len(ensembles)
    vec = np.zeros(2**n, dtype=complex)
    listed = set(ensembles)
    outside = 0.0
    for key, amp in state.terms.items():
        idx = 0
        ok = True
        for e in ensembles:
            h, v = state.occupation(key, e)
            if h + v != 1:
                ok = False
                break
            idx = 2 * idx + v
        if ok:
            ok = all(state.occupation(key, e) == (0, 0)
                     for e in range(1, state.n_ensembles + 1) if e not in listed)
        if ok:
            vec[idx] += amp
        else:
            outside += abs(amp) ** 2
    return vec, outside


def from_qubit_vector(vec: np.ndarray, ensembles: list[int], n_ensembles: int,
                      cap: int = DEFAULT_CAP) -> SparseFockState:
    n = len(ensembles)
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    if vec.shape[0] != 2**n:
        raise ValueError(f"vector length {vec.shape[0]} is not 2**{n}")
    terms = {}
    for idx, amp in enumerate(vec):
        if abs(amp) < PRUNE:
            continue
        key = [0] * (2 * n_ensembles)
        for pos, e in enumerate(ensembles):
            bit = (idx >> (n - 1 - pos)) & 1
            key[2 * (e - 1) + bit] = 1
        terms[tuple(key)] = amp
    return SparseFockState(n_ensembles, terms, cap)
