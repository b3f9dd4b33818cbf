"""Atomic-ensemble route: dual-rail collective modes and post-selected protocols.

Qubits are stored as one collective excitation shared between the ``h`` and
``v`` rails of an ensemble (h -> |0>, v -> |1>). Building blocks:

* beam-splitter-type rail rotations and rail phases (single-qubit gates),
* post-selection on one excitation per ensemble,
* Bell-basis measurement via two rounds of anti-pump read-out,
* GHZ preparation from three pair states,
* a measurement-based CNOT that consumes two GHZ states,
* the chain pipeline that turns ``v1+ v2+ ... vN+|vac>`` into a cluster.

Measurements are enumerated exhaustively; every branch carries its exact
probability. An optional seeded sampler picks one branch to report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cluster_verify import cluster_fidelity, sigma_z_deviation
from .fock import (
    DEFAULT_CAP,
    H,
    V,
    EncodingError,
    ModeId,
    OccupationOverflowError,
    SparseFockState,
    combine,
    create,
    dual_rail_qubit,
    from_creators,
    vac,
)

__all__ = [
    "ModeId",
    "SparseFockState",
    "EncodingError",
    "OccupationOverflowError",
    "vac",
    "create",
    "combine",
    "from_creators",
    "dual_rail_qubit",
    "BELL_OUTCOMES",
    "ClickPattern",
    "MeasurementRecord",
    "MBCnotBranch",
    "MBCnotResult",
    "PipelineResult",
    "mode_rotation",
    "rail_phase",
    "hadamard",
    "pauli_x",
    "pauli_z",
    "cluster_rotation",
    "cnot_dual_rail",
    "post_select_single_excitation",
    "prepare_pair",
    "prepare_ghz",
    "bell_state",
    "bell_measure",
    "click_amplitudes",
    "outcome_from_clicks",
    "apply_pauli",
    "mb_cnot",
    "cnot_measurement_based",
    "build_cluster_ensembles",
]

SQRT_HALF = 1.0 / math.sqrt(2.0)

# Bell outcome -> (phase bit p, parity bit q):  B_pq = sum_x (-1)^{p x} |x, x^q> / sqrt2
BELL_OUTCOMES: dict[str, tuple[int, int]] = {
    "Phi+": (0, 0),
    "Phi-": (1, 0),
    "Psi+": (0, 1),
    "Psi-": (1, 1),
}


# -- single-ensemble transformations ----------------------------------------


def _ensemble_map(state: SparseFockState, ensemble: int, h_image: tuple[complex, complex],
                  v_image: tuple[complex, complex]) -> SparseFockState:
    """Linear map of the creation operators ``h+ -> a h+ + b v+``, ``v+ -> c h+ + d v+`` on one ensemble."""
    state.check_ensemble(ensemble)
    s = 2 * (ensemble - 1)
    out: dict[tuple[int, ...], complex] = {}
    for key, amp in state.terms.items():
        nh, nv = key[s], key[s + 1]
        if nh == 0 and nv == 0:
            out[key] = out.get(key, 0j) + amp
            continue
        # (a h + b v)^nh (c h + d v)^nv / sqrt(nh! nv!) expanded into normalised kets
        norm_in = math.sqrt(math.factorial(nh) * math.factorial(nv))
        for k1 in range(nh + 1):
            c1 = math.comb(nh, k1) * h_image[0] ** k1 * h_image[1] ** (nh - k1)
            if c1 == 0:
                continue
            for k2 in range(nv + 1):
                c2 = math.comb(nv, k2) * v_image[0] ** k2 * v_image[1] ** (nv - k2)
                if c2 == 0:
                    continue
                p, q = k1 + k2, (nh - k1) + (nv - k2)
                if p > state.cap or q > state.cap:
                    raise OccupationOverflowError(
                        f"rotation on ensemble {ensemble} would exceed cap {state.cap}")
                new = key[:s] + (p, q) + key[s + 2:]
                weight = math.sqrt(math.factorial(p) * math.factorial(q)) / norm_in
                out[new] = out.get(new, 0j) + amp * c1 * c2 * weight
    return state._new(out)


def mode_rotation(state: SparseFockState, ensemble: int, theta: float, phi: float = 0.0) -> SparseFockState:
    """Beam-splitter rotation of the (h, v) rails.

    ``h+ -> cos(theta) h+ + e^{i phi} sin(theta) v+``,
    ``v+ -> -e^{-i phi} sin(theta) h+ + cos(theta) v+``.
    """
    c, s = math.cos(theta), math.sin(theta)
    e = complex(math.cos(phi), math.sin(phi))
    return _ensemble_map(state, ensemble, (c, e * s), (-s / e, c))


def rail_phase(state: SparseFockState, ensemble: int, rail: str, angle: float) -> SparseFockState:
    """Multiply each excitation of one rail by ``e^{i angle}``."""
    ph = complex(math.cos(angle), math.sin(angle))
    if abs(ph.imag) < 1e-15:
        ph = complex(round(ph.real), 0.0)
    if rail == H:
        return _ensemble_map(state, ensemble, (ph, 0.0), (0.0, 1.0))
    if rail == V:
        return _ensemble_map(state, ensemble, (1.0, 0.0), (0.0, ph))
    raise ValueError(f"rail must be 'h' or 'v', got {rail!r}")


def pauli_z(state: SparseFockState, ensemble: int) -> SparseFockState:
    return rail_phase(state, ensemble, V, math.pi)


def pauli_x(state: SparseFockState, ensemble: int) -> SparseFockState:
    """Exact rail swap ``h+ <-> v+``: a pi/2 rotation followed by a pi phase on h."""
    return rail_phase(mode_rotation(state, ensemble, math.pi / 2, 0.0), ensemble, H, math.pi)


def hadamard(state: SparseFockState, ensemble: int) -> SparseFockState:
    """``h+ -> (h+ + v+)/sqrt2``, ``v+ -> (h+ - v+)/sqrt2``."""
    return mode_rotation(pauli_z(state, ensemble), ensemble, math.pi / 4, 0.0)


def cluster_rotation(state: SparseFockState, ensemble: int) -> SparseFockState:
    """``h+ -> (h+ - v+)/sqrt2``, ``v+ -> (h+ + v+)/sqrt2``: theta = pi/4, phi = pi."""
    return mode_rotation(state, ensemble, math.pi / 4, math.pi)


def apply_pauli(state: SparseFockState, label: str, ensemble: int) -> SparseFockState:
    if label == "X":
        return pauli_x(state, ensemble)
    if label == "Z":
        return pauli_z(state, ensemble)
    raise ValueError(f"unknown Pauli {label!r}")


# -- two-ensemble gates and post-selection -----------------------------------


def _qubit_bit(state: SparseFockState, key: tuple[int, ...], ensemble: int) -> int:
    h, v = state.occupation(key, ensemble)
    if h + v != 1:
        raise EncodingError(
            f"ensemble {ensemble} holds (h={h}, v={v}); expected exactly one excitation")
    return v


def cnot_dual_rail(state: SparseFockState, control: int, target: int) -> SparseFockState:
    """Abstract CNOT: an excitation on the control's v rail swaps the target's rails."""
    if control == target:
        raise ValueError("control and target must differ")
    state.check_ensemble(control)
    state.check_ensemble(target)
    t = 2 * (target - 1)
    out = {}
    for key, amp in state.terms.items():
        c = _qubit_bit(state, key, control)
        _qubit_bit(state, key, target)
        if c:
            key = key[:t] + (key[t + 1], key[t]) + key[t + 2:]
        out[key] = amp
    return state._new(out)


def post_select_single_excitation(state: SparseFockState,
                                  ensembles: Sequence[int]) -> tuple[SparseFockState, float]:
    """Keep terms with exactly one excitation (h + v) in every listed ensemble.

    Returns the unnormalised projection and its norm-squared ratio to the input.
    An empty projection comes back as an empty state with probability 0.
    """
    for e in ensembles:
        state.check_ensemble(e)
    kept = {}
    for key, amp in state.terms.items():
        if all(sum(state.occupation(key, e)) == 1 for e in ensembles):
            kept[key] = amp
    projected = state._new(kept)
    total = state.norm_sq
    return projected, (projected.norm_sq / total if total > 0 else 0.0)


def prepare_pair(i: int, j: int, n_ensembles: int | None = None, cap: int = DEFAULT_CAP) -> SparseFockState:
    """``(h_i+ + v_j+)|vac>/sqrt2``."""
    if i == j:
        raise ValueError("a pair needs two distinct ensembles")
    n = n_ensembles or max(i, j)
    return (from_creators(n, [(H, i)], SQRT_HALF, cap)
            + from_creators(n, [(V, j)], SQRT_HALF, cap))


def prepare_ghz(i: int, j: int, k: int, n_ensembles: int | None = None,
                cap: int = DEFAULT_CAP) -> tuple[SparseFockState, float]:
    """GHZ state ``(h_i h_j h_k + v_i v_j v_k)|vac>/sqrt2`` from pairs (i,j), (j,k), (k,i).

    Two of the eight product terms carry one excitation per ensemble, so the
    post-selection succeeds with probability 1/4.
    """
    if len({i, j, k}) != 3:
        raise ValueError("GHZ preparation needs three distinct ensembles")
    n = n_ensembles or max(i, j, k)
    product = combine(combine(prepare_pair(i, j, n, cap), prepare_pair(j, k, n, cap)),
                      prepare_pair(k, i, n, cap))
    selected, probability = post_select_single_excitation(product, [i, j, k])
    if selected.is_empty:
        return selected, 0.0
    return selected.normalized(), probability


def bell_state(outcome: str, i: int, j: int, n_ensembles: int | None = None,
               cap: int = DEFAULT_CAP) -> SparseFockState:
    p, q = BELL_OUTCOMES[outcome]
    n = n_ensembles or max(i, j)
    state = SparseFockState(n, {}, cap)
    for x in (0, 1):
        rails = [(V if x else H, i), (V if x ^ q else H, j)]
        state = state + from_creators(n, rails, (-1) ** (p * x) * SQRT_HALF, cap)
    return state


@dataclass(frozen=True)
class ClickPattern:
    """Detector record of the two anti-pump read-out rounds.

    ``pre_rotation`` marks the extra rail swap on the second ensemble that
    turns the Phi pair into the Psi pair before read-out.
    """

    pre_rotation: bool
    rounds: tuple[str, str]

    def __str__(self) -> str:
        return ("X:" if self.pre_rotation else "") + "-".join(self.rounds)


def outcome_from_clicks(pattern: ClickPattern) -> str:
    """Same detector twice means '+', different detectors mean '-'."""
    sign = "+" if pattern.rounds[0] == pattern.rounds[1] else "-"
    return ("Phi" if pattern.pre_rotation else "Psi") + sign


def _canonical_pattern(outcome: str) -> ClickPattern:
    second = "D1" if outcome.endswith("+") else "D2"
    return ClickPattern(outcome.startswith("Phi"), ("D1", second))


def _bell_corrections(outcome: str) -> tuple[str, ...]:
    p, q = BELL_OUTCOMES[outcome]
    return tuple(["X"] * q + ["Z"] * p)


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: str
    probability: float
    click_pattern: ClickPattern
    corrections: tuple[str, ...] = ()
    ensembles: tuple[int, int] = (0, 0)

    def as_dict(self) -> dict:
        return {"outcome": self.outcome, "probability": self.probability,
                "click_pattern": str(self.click_pattern), "corrections": list(self.corrections),
                "ensembles": list(self.ensembles)}


def _remove(key: tuple[int, ...], ensembles: Sequence[int]) -> tuple[int, ...]:
    out = list(key)
    for e in ensembles:
        out[2 * (e - 1)] = out[2 * (e - 1) + 1] = 0
    return tuple(out)


def bell_measure(state: SparseFockState, i: int, j: int) -> list[tuple[MeasurementRecord, SparseFockState]]:
    """Project ensembles ``i, j`` onto each Bell state.

    Returns one ``(record, state)`` per outcome in the order Phi+, Phi-, Psi+,
    Psi-. Each state is unnormalised, lives on the remaining ensembles (``i``
    and ``j`` emptied), and its squared norm is the outcome probability.
    ``corrections`` lists the Pauli frame relative to Phi+.
    """
    if i == j:
        raise ValueError("Bell measurement needs two distinct ensembles")
    state.check_ensemble(i)
    state.check_ensemble(j)
    branches = []
    for outcome, (p, q) in BELL_OUTCOMES.items():
        out: dict[tuple[int, ...], complex] = {}
        for key, amp in state.terms.items():
            xi = _qubit_bit(state, key, i)
            xj = _qubit_bit(state, key, j)
            if xj != xi ^ q:
                continue
            rest = _remove(key, (i, j))
            out[rest] = out.get(rest, 0j) + amp * (-1) ** (p * xi) * SQRT_HALF
        projected = state._new(out)
        record = MeasurementRecord(outcome, projected.norm_sq, _canonical_pattern(outcome),
                                   _bell_corrections(outcome), (i, j))
        branches.append((record, projected))
    return branches


def click_amplitudes(state: SparseFockState, i: int, j: int,
                     pre_rotation: bool = False) -> dict[ClickPattern, SparseFockState]:
    """Logical model of the two-round read-out of ensembles ``i`` (A) and ``j`` (B).

    Round one converts the h excitations to photons, which meet on a 50/50
    beam splitter (A -> (D1 + D2)/sqrt2, B -> (D1 - D2)/sqrt2); only
    single-photon events are kept. The remaining v excitation is rotated to h
    and read out the same way. Returns the unnormalised conditional state of
    the other ensembles for every click pattern.
    """
    if pre_rotation:
        state = pauli_x(state, j)
    sign = {("D1", "A"): 1, ("D1", "B"): 1, ("D2", "A"): 1, ("D2", "B"): -1}
    patterns = {}
    for d1 in ("D1", "D2"):
        for d2 in ("D1", "D2"):
            out: dict[tuple[int, ...], complex] = {}
            for key, amp in state.terms.items():
                xi = _qubit_bit(state, key, i)
                xj = _qubit_bit(state, key, j)
                if xi == xj:
                    continue  # zero or two photons in round one
                first, second = ("A", "B") if xi == 0 else ("B", "A")
                weight = 0.5 * sign[(d1, first)] * sign[(d2, second)]
                rest = _remove(key, (i, j))
                out[rest] = out.get(rest, 0j) + amp * weight
            patterns[ClickPattern(pre_rotation, (d1, d2))] = state._new(out)
    return patterns


# -- measurement-based CNOT ---------------------------------------------------


@dataclass(frozen=True)
class MBCnotBranch:
    outcomes: tuple[str, str, str]
    probability: float
    corrections: tuple[tuple[str, int], ...]
    state: SparseFockState
    records: tuple[MeasurementRecord, ...] = ()


@dataclass(frozen=True)
class MBCnotResult:
    branches: list[MBCnotBranch]
    ghz_probability: float
    control_out: int
    target_out: int

    @property
    def success_probability(self) -> float:
        """GHZ post-selection times the (heralded, always correctable) measurement branches."""
        return self.ghz_probability * sum(b.probability for b in self.branches)


# Pauli fix-ups that bring every (3,4) outcome to the common resource
# [(h1h2 + v1v2) h5h6 + (h1v2 + v1h2) v5v6]|vac>, acting on ancillas 5 and 6.
_UNIFY = {
    "Phi+": (),
    "Phi-": (("Z", 5),),
    "Psi+": (("X", 5), ("X", 6)),
    "Psi-": (("X", 5), ("X", 6), ("Z", 5)),
}


def _final_corrections(out18: str, out67: str) -> tuple[tuple[tuple[str, int], ...], int]:
    """Corrections on the outputs (2 = target image, 5 = control image) and the global sign.

    With Bell outcomes B_pq on (1, target) and B_rs on (6, control) the
    outputs read X_2^{q^s} X_5^{s} then Z_2^{p} Z_5^{p^r}, up to (-1)^{pq + rs}.
    """
    p, q = BELL_OUTCOMES[out18]
    r, s = BELL_OUTCOMES[out67]
    ops = []
    if q ^ s:
        ops.append(("X", 2))
    if s:
        ops.append(("X", 5))
    if p:
        ops.append(("Z", 2))
    if p ^ r:
        ops.append(("Z", 5))
    return tuple(ops), (-1) ** (p * q + r * s)


def mb_cnot(state: SparseFockState, control: int, target: int,
            ancillas: Sequence[int]) -> MBCnotResult:
    """Measurement-based CNOT on ``state`` using six empty ancilla ensembles.

    ``ancillas[0..5]`` play the roles of ensembles 1..6. After the protocol
    the control qubit lives on ``ancillas[4]`` and the target qubit on
    ``ancillas[1]``; ``control`` and ``target`` are left empty. Every branch
    is returned already corrected (including its global sign) and normalised.
    """
    a = list(ancillas)
    if len(a) != 6 or len(set(a) | {control, target}) != 8:
        raise ValueError("need six distinct ancillas, disjoint from control and target")
    for e in a:
        state.check_ensemble(e)
        if any(sum(state.occupation(key, e)) for key in state.terms):
            raise ValueError(f"ancilla ensemble {e} is not empty")
    n = state.n_ensembles
    ghz1, p1 = prepare_ghz(a[0], a[1], a[2], n, state.cap)
    ghz2, p2 = prepare_ghz(a[3], a[4], a[5], n, state.cap)
    norm0 = state.norm_sq
    full = combine(combine(state, ghz1), ghz2)
    for e in a[:3]:
        full = hadamard(full, e)

    role = {k + 1: e for k, e in enumerate(a)}
    branches = []
    for rec34, s34 in bell_measure(full, a[2], a[3]):
        for op, k in _UNIFY[rec34.outcome]:
            s34 = apply_pauli(s34, op, role[k])
        for rec18, s18 in bell_measure(s34, a[0], target):
            for rec67, s67 in bell_measure(s18, a[5], control):
                prob = s67.norm_sq / norm0
                if prob == 0.0:
                    continue
                ops, sign = _final_corrections(rec18.outcome, rec67.outcome)
                out = s67
                for op, k in ops:
                    out = apply_pauli(out, op, role[k])
                out = out.scaled(sign).normalized()
                branches.append(MBCnotBranch(
                    (rec34.outcome, rec18.outcome, rec67.outcome), prob,
                    tuple((op, role[k]) for op, k in _UNIFY[rec34.outcome]) +
                    tuple((op, role[k]) for op, k in ops),
                    out, (rec34, rec18, rec67)))
    return MBCnotResult(branches, p1 * p2, control_out=a[4], target_out=a[1])


def cnot_measurement_based(control_state: SparseFockState, target_state: SparseFockState) -> MBCnotResult:
    """CNOT from ensemble 7 (control) to ensemble 8 (target) via GHZ(1,2,3), GHZ(4,5,6).

    The inputs are single dual-rail qubits on ensembles 7 and 8; results land
    on ensembles 5 (control image) and 2 (target image).
    """
    c = control_state.with_ensembles(8)
    t = target_state.with_ensembles(8)
    if c.active_ensembles() - {7} or t.active_ensembles() - {8}:
        raise ValueError("control must occupy only ensemble 7 and target only ensemble 8")
    return mb_cnot(combine(c, t), control=7, target=8, ancillas=[1, 2, 3, 4, 5, 6])


# -- cluster pipeline ---------------------------------------------------------


@dataclass(frozen=True)
class PipelineResult:
    state: SparseFockState
    success_probability: float
    fidelity: float
    log: list[str] = field(default_factory=list)
    branch_probability: float = 1.0
    sigma_z_deviation: tuple[int, ...] | None = ()
    gate_mode: str = "abstract"

    def as_dict(self) -> dict:
        return {"success_probability": self.success_probability, "fidelity": self.fidelity,
                "branch_probability": self.branch_probability,
                "sigma_z_deviation": (list(self.sigma_z_deviation)
                                      if self.sigma_z_deviation is not None else None),
                "gate_mode": self.gate_mode, "log": list(self.log)}


GATE_MODES = ("abstract", "measurement_based")
SIGN_CONVENTIONS = ("h_phase", "verbatim")


def _mb_gate(state: SparseFockState, control: int, target: int, ancillas: list[int],
             rng: np.random.Generator | None, atol: float = 1e-10) -> tuple[SparseFockState, MBCnotResult, MBCnotBranch]:
    result = mb_cnot(state, control, target, ancillas)
    reference = result.branches[0].state
    for branch in result.branches[1:]:
        if not branch.state.allclose(reference, atol=atol):
            raise AssertionError(f"branch {branch.outcomes} disagrees after corrections")
    if rng is None:
        chosen = result.branches[0]
    else:
        probs = np.array([b.probability for b in result.branches])
        chosen = result.branches[int(rng.choice(len(probs), p=probs / probs.sum()))]
    # move the outputs back onto the data ensembles
    out = chosen.state.relabel({result.control_out: control, control: result.control_out,
                                result.target_out: target, target: result.target_out})
    return out, result, chosen


def build_cluster_ensembles(n: int, gate_mode: str = "abstract", sign_convention: str = "h_phase",
                            seed: int | None = None) -> PipelineResult:
    """Cluster of ``n`` ensembles from ``v1+ ... vN+|vac>``.

    For each pair (k, k+1): the leading-ensemble rotation (first pair only),
    CNOT, rail swap on k, rotation on k+1. Under ``sign_convention="h_phase"``
    pairs after the first also get a pi phase on the h rail of ensemble k-1;
    without it (``"verbatim"``) the result differs from the target by local
    Z factors, which are itemised in ``sigma_z_deviation``.

    ``gate_mode="measurement_based"`` realises each CNOT with two GHZ states
    and three Bell measurements on six scratch ensembles. All 64 branches per
    gate are checked to agree after correction; ``seed`` picks the reported
    branch (default: the all-Phi+ branch).
    """
    if n < 2:
        raise ValueError(f"cluster needs at least two ensembles, got {n}")
    if gate_mode not in GATE_MODES:
        raise ValueError(f"gate_mode must be one of {GATE_MODES}")
    if sign_convention not in SIGN_CONVENTIONS:
        raise ValueError(f"sign_convention must be one of {SIGN_CONVENTIONS}")
    mb = gate_mode == "measurement_based"
    ancillas = list(range(n + 1, n + 7))
    total = n + 6 if mb else n
    rng = np.random.default_rng(seed) if seed is not None else None

    state = from_creators(total, [(V, e) for e in range(1, n + 1)])
    log = [f"init: v+ on ensembles 1..{n}"]
    probability = 1.0
    branch_probability = 1.0
    for k in range(1, n):
        if k == 1:
            state = cluster_rotation(state, k)
            log.append(f"rotate ensemble {k}: v+ -> (h+ + v+)/sqrt2")
        if mb:
            state, result, chosen = _mb_gate(state, k, k + 1, ancillas, rng)
            probability *= result.success_probability
            branch_probability *= chosen.probability
            log.append(f"cnot {k}->{k + 1} (measurement-based): ghz post-selection "
                       f"{result.ghz_probability:.6g}, {len(result.branches)} branches agree, "
                       f"reported {'/'.join(chosen.outcomes)} p={chosen.probability:.6g}, "
                       f"corrections {list(chosen.corrections)}")
        else:
            state = cnot_dual_rail(state, k, k + 1)
            log.append(f"cnot {k}->{k + 1}")
        state = pauli_x(state, k)
        state = cluster_rotation(state, k + 1)
        log.append(f"swap rails of {k}; rotate {k + 1}: h+ -> (h+ - v+)/sqrt2, v+ -> (h+ + v+)/sqrt2")
        if k >= 2 and sign_convention == "h_phase":
            state = rail_phase(state, k - 1, H, math.pi)
            log.append(f"pi phase on h rail of {k - 1}")
    if mb:
        state = state.with_ensembles(n)
    fidelity = cluster_fidelity(state, n)
    deviation = sigma_z_deviation(state, n)
    return PipelineResult(state, probability, fidelity, log, branch_probability, deviation, gate_mode)
