"""Resonant two-atom cavity QED route to linear cluster states.

Three-level atoms (g, e, i) pass pairwise through a vacuum cavity that is
resonant with g <-> e; level i is a spectator. With ``t = pi/g1`` and
``g2 = sqrt(3) g1`` the cavity returns to vacuum and the only effect is a
sign on ``|e i>``. A classical pulse ``|i> -> -|e>`` on the second atom then
completes a controlled-phase-like entangling step, and chaining pairs
(1,2), (2,3), ... grows the cluster.

Decay is modelled by the no-jump non-Hermitian Hamiltonian; the squared norm
of the evolved register is the probability that no photon was lost.

Units: g1 = 1 sets the scale, times are in 1/g1 and rates in g1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cluster_verify import atom_labels, cluster_fidelity, ideal_cluster
from .core_linalg import (
    LayoutError,
    Operator,
    StateVector,
    SubsystemLayout,
    apply,
    basis_state,
    propagator,
    tensor,
)

__all__ = [
    "AtomLevel",
    "TruncationError",
    "CavityLeakageError",
    "StageConfig",
    "StageResult",
    "ChainResult",
    "TimingOffsetResult",
    "GeometryConfig",
    "atom_state",
    "stage_layout",
    "stage_hamiltonian",
    "excitation_number",
    "closed_form_branch",
    "classical_pulse",
    "run_stage",
    "initial_register",
    "run_chain",
    "expected_chain_metrics",
    "timing_offset_stage",
    "coupling_at_position",
    "position_for_coupling_ratio",
    "lamb_dicke_infidelity",
    "spread_for_infidelity",
]

CAVITY = "cavity"
DEFAULT_N_MAX = 2
MAX_ATOMS = 8
SENTINEL_TOL = 1e-10
LEAKAGE_TOL = 1e-9


class AtomLevel(enum.IntEnum):
    G = 0
    E = 1
    I = 2  # noqa: E741  (level name)


G, E, I = AtomLevel.G, AtomLevel.E, AtomLevel.I


class TruncationError(RuntimeError):
    """Population reached the highest retained Fock level."""


class CavityLeakageError(RuntimeError):
    """The cavity did not return to vacuum at the end of a stage."""


@dataclass(frozen=True)
class StageConfig:
    g1: float = 1.0
    g2: float = math.sqrt(3.0)
    t: float = math.pi
    kappa: float = 0.0
    tau: float = 0.0
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self):
        for name in ("g1", "g2", "t", "kappa", "tau"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.g1 <= 0:
            raise ValueError(f"g1 must be positive, got {self.g1}")
        if self.g2 < 0 or self.t < 0 or self.kappa < 0 or self.tau < 0:
            raise ValueError("g2, t, kappa and tau must be non-negative")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")

    @classmethod
    def canonical(cls, kappa: float = 0.0, tau: float = 0.0, g1: float = 1.0,
                  n_max: int = DEFAULT_N_MAX, g2_ratio: float = math.sqrt(3.0)) -> "StageConfig":
        """``t = pi/g1``; ``g2 = sqrt(3) g1`` unless another ratio is asked for."""
        return cls(g1=g1, g2=g2_ratio * g1, t=math.pi / g1, kappa=kappa, tau=tau, n_max=n_max)

    @property
    def is_canonical(self) -> bool:
        return (math.isclose(self.t * self.g1, math.pi, rel_tol=1e-12)
                and math.isclose(self.g2, math.sqrt(3.0) * self.g1, rel_tol=1e-12))

    def as_dict(self) -> dict:
        return {"g1": self.g1, "g2": self.g2, "t": self.t, "kappa": self.kappa,
                "tau": self.tau, "n_max": self.n_max}


@dataclass(frozen=True)
class StageResult:
    state: StateVector
    survival_probability: float
    cavity_leakage: float
    pair: tuple[str, str] = ("atom1", "atom2")

    def as_dict(self) -> dict:
        return {"pair": list(self.pair), "survival_probability": self.survival_probability,
                "cavity_leakage": self.cavity_leakage}


@dataclass(frozen=True)
class ChainResult:
    state: StateVector
    success_probability: float
    fidelity: float
    per_stage: list[StageResult] = field(default_factory=list)


@dataclass(frozen=True)
class TimingOffsetResult:
    stage: StageResult
    fidelity: float
    full_state: StateVector
    early_atom: str
    offset_fraction: float
    survival_probability: float = 1.0


def atom_state(g: complex = 0.0, e: complex = 0.0, i: complex = 0.0, label: str = "atom") -> StateVector:
    return StateVector(SubsystemLayout.of((label, 3)), np.array([g, e, i], dtype=complex))


def stage_layout(n_max: int) -> SubsystemLayout:
    return SubsystemLayout.of(("atom1", 3), ("atom2", 3), (CAVITY, n_max + 1))


def _ladder(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1)


def _lowering() -> np.ndarray:
    s = np.zeros((3, 3))
    s[G, E] = 1.0  # |g><e|
    return s


def _proj(level: int, dim: int = 3) -> np.ndarray:
    p = np.zeros((dim, dim))
    p[level, level] = 1.0
    return p


def stage_hamiltonian(cfg: StageConfig, conditional: bool = False,
                      active: tuple[bool, bool] = (True, True)) -> Operator:
    """Two atoms plus one cavity mode on layout ``atom1 (x) atom2 (x) cavity``.

    ``conditional`` adds the no-jump decay terms ``-i kappa/2 a+a`` and
    ``-i tau/2 sum_j |e><e|_j``. ``active`` switches off the coupling (and
    decay) of an atom that is not inside the cavity, which is how staggered
    entry is modelled.
    """
    if cfg.n_max < 1:
        raise ValueError("n_max must be >= 1")
    dc = cfg.n_max + 1
    a = _ladder(cfg.n_max)
    sm = _lowering()
    i3, ic = np.eye(3), np.eye(dc)
    couplings = (cfg.g1, cfg.g2)
    lowering = (np.kron(np.kron(sm, i3), ic), np.kron(np.kron(i3, sm), ic))
    excited = (np.kron(np.kron(_proj(E), i3), ic), np.kron(np.kron(i3, _proj(E)), ic))
    a_full = np.kron(np.eye(9), a)
    h = np.zeros((9 * dc, 9 * dc), dtype=complex)
    for j in range(2):
        if not active[j]:
            continue
        s_minus = lowering[j]
        h += couplings[j] * (a_full.T @ s_minus + a_full @ s_minus.T)
        if conditional:
            h += -0.5j * cfg.tau * excited[j]
    if conditional:
        h += -0.5j * cfg.kappa * (a_full.T @ a_full)
    return Operator(stage_layout(cfg.n_max), h)


def excitation_number(n_max: int) -> Operator:
    """``a+a + sum_j |e><e|_j``, conserved by the resonant coupling."""
    dc = n_max + 1
    a = _ladder(n_max)
    num = np.kron(np.eye(9), a.T @ a)
    num = num + np.kron(np.kron(_proj(E), np.eye(3)), np.eye(dc))
    num = num + np.kron(np.kron(np.eye(3), _proj(E)), np.eye(dc))
    return Operator(stage_layout(n_max), num)


def closed_form_branch(branch: str, t: float, g1: float, g2: float) -> dict[str, complex]:
    """Analytic lossless evolution of ``|branch>|0>``, keyed by ``"<atom1><atom2><photons>"``.

    Only the single-excitation branch ``eg`` mixes three basis states:
    the bright combination ``(g1|eg> + g2|ge>)/E`` Rabi-oscillates with the
    one-photon state at frequency ``E = sqrt(g1^2 + g2^2)`` while the dark
    combination is stationary.
    """
    if branch == "eg":
        E2 = g1 * g1 + g2 * g2
        E = math.sqrt(E2)
        c, s = math.cos(E * t), math.sin(E * t)
        return {
            "eg0": complex((g1 * g1 * c + g2 * g2) / E2),
            "ge0": complex(g1 * g2 * (c - 1.0) / E2),
            "gg1": complex(-1j * g1 * s / E),
        }
    if branch == "ei":
        return {"ei0": complex(math.cos(g1 * t)), "gi1": complex(-1j * math.sin(g1 * t))}
    if branch == "gg":
        return {"gg0": 1.0 + 0j}
    if branch == "gi":
        return {"gi0": 1.0 + 0j}
    raise ValueError(f"unknown branch {branch!r}; expected one of eg, ei, gg, gi")


_PULSE = np.zeros((3, 3), dtype=complex)
_PULSE[G, G] = 1.0
_PULSE[I, E] = 1.0   # |e> -> |i>  (completion; never exercised by the protocol)
_PULSE[E, I] = -1.0  # |i> -> -|e>


def classical_pulse(state: StateVector, atom_label: str) -> StateVector:
    """Unitary ``|i> -> -|e>``, ``|e> -> |i>``, ``|g> -> |g>`` on one atom."""
    state.layout.index(atom_label)
    return apply(Operator(SubsystemLayout.of((atom_label, 3)), _PULSE), state, [atom_label])


def _check_pair(register: StateVector, pair: tuple[str, str]) -> None:
    if pair[0] == pair[1]:
        raise LayoutError("a stage needs two distinct atoms")
    if CAVITY in register.layout.labels:
        raise LayoutError("register already contains a cavity factor")
    for label in pair:
        if register.layout.dims[register.layout.index(label)] != 3:
            raise LayoutError(f"{label!r} is not a three-level atom")


def _cavity_report(evolved: StateVector, n_max: int, leakage_tol: float | None) -> tuple[StateVector, float]:
    top = evolved.population(CAVITY, n_max)
    if top > SENTINEL_TOL:
        raise TruncationError(
            f"population {top:.3g} reached Fock level n_max={n_max}; raise n_max")
    kept = evolved.project(CAVITY, 0)
    leakage = max(evolved.norm_sq - kept.norm_sq, 0.0)
    if leakage_tol is not None and leakage > leakage_tol:
        raise CavityLeakageError(
            f"cavity left with population {leakage:.3g} outside vacuum (tolerance {leakage_tol:g})")
    return kept, leakage


def _attach_vacuum(register: StateVector, n_max: int) -> StateVector:
    cavity = basis_state(SubsystemLayout.of((CAVITY, n_max + 1)), [0])
    return tensor([register, cavity])


def run_stage(register: StateVector, pair: tuple[str, str], cfg: StageConfig,
              leakage_tol: float | None = LEAKAGE_TOL) -> StageResult:
    """Send ``pair`` through a vacuum cavity, then pulse ``pair[1]``.

    The cavity is projected back onto vacuum and removed. ``survival_probability``
    is the squared-norm ratio out/in, i.e. the probability that no photon was
    emitted (and, for non-canonical settings, that the cavity was found empty).
    ``leakage_tol=None`` accepts any residual cavity population.
    """
    _check_pair(register, pair)
    norm_in = register.norm_sq
    if norm_in == 0.0:
        raise ValueError("register is the zero vector")
    conditional = cfg.kappa > 0 or cfg.tau > 0
    U = propagator(stage_hamiltonian(cfg, conditional=conditional), cfg.t)
    evolved = apply(U, _attach_vacuum(register, cfg.n_max), [pair[0], pair[1], CAVITY])
    kept, leakage = _cavity_report(evolved, cfg.n_max, leakage_tol)
    out = classical_pulse(kept, pair[1])
    return StageResult(out, out.norm_sq / norm_in, leakage, tuple(pair))


def initial_register(n: int) -> StateVector:
    """Atom 1 in ``(|g>+|e>)/sqrt2``, the rest in ``(|g>+|i>)/sqrt2``."""
    r = 1 / math.sqrt(2)
    labels = atom_labels(n)
    parts = [atom_state(g=r, e=r, label=labels[0])]
    parts += [atom_state(g=r, i=r, label=label) for label in labels[1:]]
    return tensor(parts)


def run_chain(n: int, cfg: StageConfig | None = None, max_atoms: int = MAX_ATOMS,
              leakage_tol: float | None = LEAKAGE_TOL) -> ChainResult:
    """Grow an N-atom cluster with stages on (1,2), (2,3), ..., (N-1,N).

    Atoms flying between cavities do not decay.
    """
    if n < 2:
        raise ValueError(f"a chain needs at least two atoms, got {n}")
    if n > max_atoms:
        raise ValueError(f"N={n} exceeds the configured maximum of {max_atoms} atoms")
    cfg = cfg or StageConfig.canonical()
    labels = atom_labels(n)
    register = initial_register(n)
    stages = []
    probability = 1.0
    for left, right in zip(labels, labels[1:]):
        result = run_stage(register, (left, right), cfg, leakage_tol=leakage_tol)
        stages.append(result)
        probability *= result.survival_probability
        register = result.state
    return ChainResult(register, probability, cluster_fidelity(register, n), stages)


def expected_chain_metrics(n: int, kappa: float, tau: float | None = None) -> tuple[float, float]:
    """Closed-form (fidelity, probability) for canonical stages with ``kappa = tau``.

    Each stage damps the one-excitation branch by ``x = exp(-kappa*pi/(2 g1))``
    (g1 = 1), giving per-stage fidelity ``(1+x)^2 / (2(1+x^2))`` and
    probability ``(1+x^2)/2``.
    """
    if tau is not None and not math.isclose(tau, kappa, rel_tol=0.0, abs_tol=1e-15):
        raise ValueError("closed form assumes kappa == tau; simulate other settings with run_chain")
    if n < 2:
        raise ValueError(f"a chain needs at least two atoms, got {n}")
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    x = math.exp(-kappa * math.pi / 2.0)
    stage_f = (1.0 + x) ** 2 / (2.0 * (1.0 + x * x))
    stage_p = (1.0 + x * x) / 2.0
    return stage_f ** (n - 1), stage_p ** (n - 1)


def timing_offset_stage(register: StateVector, pair: tuple[str, str], cfg: StageConfig,
                        offset_fraction: float, early_atom: str | None = None,
                        target: StateVector | None = None) -> TimingOffsetResult:
    """A stage in which one atom enters (and leaves) ``offset_fraction * t`` before the other.

    Each atom spends the full ``t`` inside: early atom alone for ``offset*t``,
    both for ``(1-offset)*t``, late atom alone for ``offset*t``. The cavity is
    not forced back to vacuum; fidelity against ``target`` (the two-atom
    cluster by default) sums over cavity photon numbers,
    ``F = sum_n |<target, n|psi>|^2 / ||psi||^2``.
    ``early_atom`` defaults to the lower-index atom, ``pair[0]``.
    """
    if not 0.0 <= offset_fraction < 1.0:
        raise ValueError(f"offset_fraction must lie in [0, 1), got {offset_fraction}")
    _check_pair(register, pair)
    early = pair[0] if early_atom is None else early_atom
    if early not in pair:
        raise LayoutError(f"early atom {early!r} is not in the pair {pair}")
    norm_in = register.norm_sq
    conditional = cfg.kappa > 0 or cfg.tau > 0
    first = (True, False) if early == pair[0] else (False, True)
    last = (first[1], first[0])
    lead = offset_fraction * cfg.t
    segments = [
        (stage_hamiltonian(cfg, conditional, active=first), lead),
        (stage_hamiltonian(cfg, conditional), cfg.t - lead),
        (stage_hamiltonian(cfg, conditional, active=last), lead),
    ]
    psi = _attach_vacuum(register, cfg.n_max)
    for h, duration in segments:
        if duration > 0:
            psi = apply(propagator(h, duration), psi, [pair[0], pair[1], CAVITY])
    psi = classical_pulse(psi, pair[1])
    kept, leakage = _cavity_report(psi, cfg.n_max, leakage_tol=None)
    stage = StageResult(kept, kept.norm_sq / norm_in, leakage, tuple(pair))

    if target is None:
        if register.layout.labels != tuple(pair):
            raise LayoutError("default target needs a bare two-atom register; pass target=")
        target = ideal_cluster(2)
        target = StateVector(register.layout, target.amplitudes)
    overlap_sq = 0.0
    for n in range(cfg.n_max + 1):
        branch = psi.project(CAVITY, n)
        overlap_sq += abs(np.vdot(target.amplitudes, branch.amplitudes)) ** 2
    fidelity = overlap_sq / (psi.norm_sq * target.norm_sq)
    return TimingOffsetResult(stage, float(fidelity), psi, early, offset_fraction,
                              psi.norm_sq / norm_in)


@dataclass(frozen=True)
class GeometryConfig:
    """Gaussian cavity mode seen by the atoms. Lengths share one arbitrary unit."""

    Omega: float = 1.0
    waist: float = 1.0
    wavelength: float = 1.0
    spread: float = 0.01
    half_length: float = 0.5

    def __post_init__(self):
        for name in ("waist", "wavelength", "spread", "half_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.Omega > 0:
            raise ValueError("Omega must be positive")

    @property
    def k(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def z0(self) -> float:
        """Rayleigh-like range ``pi w^2 / lambda``; the mode stays uniform for ``z <= 0.5 z0``."""
        return math.pi * self.waist ** 2 / self.wavelength

    def with_spread(self, spread: float) -> "GeometryConfig":
        return replace(self, spread=spread)


def coupling_at_position(geom: GeometryConfig, r: float) -> float:
    if r < 0:
        raise ValueError("distance from the cavity axis must be non-negative")
    return geom.Omega * math.exp(-(r * r) / geom.waist ** 2)


def position_for_coupling_ratio(geom: GeometryConfig, ratio: float) -> float:
    """Distance at which ``g / Omega = ratio``; ``1/sqrt(3)`` gives ``w sqrt(ln sqrt 3)``."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"coupling ratio must lie in (0, 1], got {ratio}")
    return geom.waist * math.sqrt(math.log(1.0 / ratio))


def lamb_dicke_infidelity(k: float, spread: float) -> float:
    """Infidelity ``(k a)^2 pi`` from a finite atomic wave-packet spread ``a``."""
    if k <= 0 or spread <= 0:
        raise ValueError("wavevector and spread must be positive")
    return (k * spread) ** 2 * math.pi


def spread_for_infidelity(infidelity: float, wavelength: float) -> float:
    """Spread giving a target Lamb-Dicke infidelity: ``a = lambda sqrt(D/pi) / (2 pi)``.

    For ``D = 0.01`` this is about ``0.009 lambda``, commonly rounded to
    ``0.01 lambda``; a spread of exactly ``0.01 lambda`` gives ``D ~ 0.0124``.
    """
    if infidelity <= 0 or wavelength <= 0:
        raise ValueError("infidelity and wavelength must be positive")
    return wavelength * math.sqrt(infidelity / math.pi) / (2.0 * math.pi)
