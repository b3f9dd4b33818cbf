import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustersim.cluster_verify import ideal_cluster, ideal_cluster_amplitudes
from clustersim.ensembles import (
    BELL_OUTCOMES,
    ClickPattern,
    EncodingError,
    OccupationOverflowError,
    SparseFockState,
    bell_measure,
    bell_state,
    build_cluster_ensembles,
    click_amplitudes,
    cluster_rotation,
    cnot_dual_rail,
    cnot_measurement_based,
    combine,
    create,
    dual_rail_qubit,
    from_creators,
    hadamard,
    mb_cnot,
    mode_rotation,
    outcome_from_clicks,
    pauli_x,
    pauli_z,
    post_select_single_excitation,
    prepare_ghz,
    prepare_pair,
    rail_phase,
    vac,
)
from clustersim.fock import from_qubit_vector, to_qubit_vector

R2 = math.sqrt(2)


def fc(n, *modes, amp=1.0):
    return from_creators(n, list(modes), amp)


def random_encoded(rng, ensembles, n):
    vec = rng.normal(size=2 ** len(ensembles)) + 1j * rng.normal(size=2 ** len(ensembles))
    return from_qubit_vector(vec / np.linalg.norm(vec), ensembles, n)


# -- Fock basics ------------------------------------------------------------------


def test_creation_is_bosonic():
    twice = create(create(vac(1), "h1"), "h1")
    assert twice.terms == {(2, 0): pytest.approx(R2)}
    with pytest.raises(OccupationOverflowError):
        create(twice, "h1")


def test_combine_shared_mode():
    a = fc(1, "h1")
    out = combine(a, a)
    assert out.terms[(2, 0)] == pytest.approx(R2)


def test_pair_state():
    pair = prepare_pair(1, 2)
    assert pair.terms == {(0, 0, 0, 1): pytest.approx(1 / R2), (1, 0, 0, 0): pytest.approx(1 / R2)}
    assert pair.norm_sq == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        prepare_pair(2, 2)


def test_triangle_product_expansion():
    product = combine(combine(prepare_pair(1, 2, 3), prepare_pair(2, 3, 3)), prepare_pair(3, 1, 3))
    assert len(product.terms) == 8
    assert all(a == pytest.approx(1 / (2 * R2), abs=1e-15) for a in product.terms.values())


def test_qubit_vector_round_trip(rng):
    vec = rng.normal(size=8) + 1j * rng.normal(size=8)
    state = from_qubit_vector(vec, [3, 1, 2], 4)
    back, outside = to_qubit_vector(state, [3, 1, 2])
    assert outside == 0.0
    assert np.allclose(back, vec, atol=1e-15)


# -- single-ensemble gates --------------------------------------------------------


def test_rotation_examples():
    v = fc(1, "v1")
    h = fc(1, "h1")
    plus = (h + v).scaled(1 / R2)
    assert cluster_rotation(v, 1).allclose(plus, atol=1e-15)
    assert cluster_rotation(h, 1).allclose((h - v).scaled(1 / R2), atol=1e-15)
    assert mode_rotation(plus, 1, 0.0, 0.7).allclose(plus, atol=0)


def test_rotation_convention():
    theta, phi = 0.3, 1.1
    h = mode_rotation(fc(1, "h1"), 1, theta, phi)
    v = mode_rotation(fc(1, "v1"), 1, theta, phi)
    assert h.terms[(1, 0)] == pytest.approx(math.cos(theta))
    assert h.terms[(0, 1)] == pytest.approx(np.exp(1j * phi) * math.sin(theta))
    assert v.terms[(1, 0)] == pytest.approx(-np.exp(-1j * phi) * math.sin(theta))
    assert v.terms[(0, 1)] == pytest.approx(math.cos(theta))


def test_exact_rail_swap():
    assert pauli_x(fc(1, "h1"), 1).allclose(fc(1, "v1"), atol=1e-15)
    assert pauli_x(fc(1, "v1"), 1).allclose(fc(1, "h1"), atol=1e-15)


def test_pauli_z_and_hadamard():
    h, v = fc(1, "h1"), fc(1, "v1")
    assert pauli_z(v, 1).allclose(v.scaled(-1), atol=1e-15)
    assert pauli_z(h, 1).allclose(h, atol=1e-15)
    assert hadamard(h, 1).allclose((h + v).scaled(1 / R2), atol=1e-15)
    assert hadamard(v, 1).allclose((h - v).scaled(1 / R2), atol=1e-15)
    with pytest.raises(ValueError):
        rail_phase(h, 1, "x", 1.0)


def test_rotation_acts_on_two_photon_states():
    # a rotation is linear in the creators, so (h+)^2 -> (cos h+ + sin v+)^2
    two = mode_rotation(fc(1, "h1", "h1"), 1, math.pi / 4, 0.0)
    assert two.terms[(2, 0)] == pytest.approx(R2 / 2)
    assert two.terms[(1, 1)] == pytest.approx(1.0)
    assert two.terms[(0, 2)] == pytest.approx(R2 / 2)
    assert two.norm_sq == pytest.approx(2.0)  # (h+)^2|vac> has norm^2 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-4, 4), st.floats(-4, 4))
def test_rotation_preserves_norm(seed, theta, phi):
    rng = np.random.default_rng(seed)
    terms = {key: complex(*rng.normal(size=2)) for key in itertools.product(range(3), repeat=4)
             if sum(key[:2]) <= 2}
    state = SparseFockState(2, terms)
    out = mode_rotation(state, 1, theta, phi)
    assert out.norm_sq == pytest.approx(state.norm_sq, abs=1e-12 * state.norm_sq)


# -- CNOT ------------------------------------------------------------------------


def test_cnot_examples():
    plus_v = (fc(2, "h1", "v2") + fc(2, "v1", "v2")).scaled(1 / R2)
    expected = (fc(2, "h1", "v2") + fc(2, "v1", "h2")).scaled(1 / R2)
    assert cnot_dual_rail(plus_v, 1, 2).allclose(expected, atol=0)
    hh = fc(2, "h1", "h2")
    assert cnot_dual_rail(hh, 1, 2).allclose(hh, atol=0)


def test_cnot_truth_table():
    for c, t in itertools.product((0, 1), repeat=2):
        rails = ["h", "v"]
        state = fc(2, f"{rails[c]}1", f"{rails[t]}2")
        image = fc(2, f"{rails[c]}1", f"{rails[t ^ c]}2")
        assert cnot_dual_rail(state, 1, 2).allclose(image, atol=0)


def test_cnot_involution(rng):
    state = random_encoded(rng, [1, 2, 3], 3)
    assert cnot_dual_rail(cnot_dual_rail(state, 3, 1), 3, 1).allclose(state, atol=1e-15)


def test_cnot_rejects_unencoded_input():
    with pytest.raises(EncodingError):
        cnot_dual_rail(fc(2, "h1", "h1", "v2"), 1, 2)
    with pytest.raises(EncodingError):
        cnot_dual_rail(fc(2, "h1"), 1, 2)
    with pytest.raises(ValueError):
        cnot_dual_rail(fc(2, "h1", "h2"), 1, 1)


# -- post-selection and GHZ -----------------------------------------------------


def test_post_select_examples():
    plus = (fc(1, "h1") + fc(1, "v1")).scaled(1 / R2)
    kept, p = post_select_single_excitation(plus, [1])
    assert kept.allclose(plus, atol=0) and p == 1.0
    kept, p = post_select_single_excitation(fc(1, "h1", "h1"), [1])
    assert kept.is_empty and p == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_post_select_properties(seed):
    rng = np.random.default_rng(seed)
    terms = {key: complex(*rng.normal(size=2)) for key in itertools.product(range(3), repeat=4)}
    state = SparseFockState(2, terms)
    once, p = post_select_single_excitation(state, [1, 2])
    twice, q = post_select_single_excitation(once, [1, 2])
    assert 0.0 <= p <= 1.0
    assert q == pytest.approx(1.0)
    assert twice.allclose(once, atol=0)
    dropped = state - once
    assert once.norm_sq + dropped.norm_sq == pytest.approx(state.norm_sq, abs=1e-10)


def ghz_by_enumeration(i, j, k, n):
    """Expand (h_i + v_j)(h_j + v_k)(h_k + v_i)/2^{3/2} term by term and keep single-excitation terms."""
    pairs = [(("h", i), ("v", j)), (("h", j), ("v", k)), (("h", k), ("v", i))]
    kept = {}
    for choice in itertools.product((0, 1), repeat=3):
        key = [0] * (2 * n)
        for pick, pair in zip(choice, pairs):
            rail, e = pair[pick]
            key[2 * (e - 1) + (rail == "v")] += 1
        if all(key[2 * (e - 1)] + key[2 * (e - 1) + 1] == 1 for e in (i, j, k)):
            kept[tuple(key)] = 2**-1.5
    return kept


def test_ghz_matches_enumeration():
    ghz, p = prepare_ghz(1, 2, 3)
    oracle = ghz_by_enumeration(1, 2, 3, 3)
    assert len(oracle) == 2
    assert p == pytest.approx(sum(a**2 for a in oracle.values()), abs=1e-12)
    assert p == pytest.approx(0.25, abs=1e-12)
    expected = (fc(3, "h1", "h2", "h3") + fc(3, "v1", "v2", "v3")).scaled(1 / R2)
    assert ghz.allclose(expected, atol=1e-12)


def test_ghz_relabelled():
    ghz, p = prepare_ghz(4, 5, 6, 6)
    expected = (fc(6, "h4", "h5", "h6") + fc(6, "v4", "v5", "v6")).scaled(1 / R2)
    assert ghz.allclose(expected, atol=1e-12)
    assert p == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(ValueError):
        prepare_ghz(1, 1, 2)


# -- Bell measurement ----------------------------------------------------------------


@pytest.mark.parametrize("outcome", list(BELL_OUTCOMES))
def test_bell_eigenstates(outcome):
    branches = bell_measure(bell_state(outcome, 1, 2), 1, 2)
    assert [r.outcome for r, _ in branches] == ["Phi+", "Phi-", "Psi+", "Psi-"]
    for record, _ in branches:
        assert record.probability == pytest.approx(1.0 if record.outcome == outcome else 0.0, abs=1e-15)


def test_bell_states_explicit():
    psi_minus = (fc(2, "h1", "v2") - fc(2, "v1", "h2")).scaled(1 / R2)
    assert bell_state("Psi-", 1, 2).allclose(psi_minus, atol=1e-15)
    phi_minus = (fc(2, "h1", "h2") - fc(2, "v1", "v2")).scaled(1 / R2)
    assert bell_state("Phi-", 1, 2).allclose(phi_minus, atol=1e-15)


def test_bell_measure_of_hh():
    probs = {r.outcome: r.probability for r, _ in bell_measure(fc(2, "h1", "h2"), 1, 2)}
    assert probs == pytest.approx({"Phi+": 0.5, "Phi-": 0.5, "Psi+": 0.0, "Psi-": 0.0}, abs=1e-15)


def test_bell_probabilities_sum_to_encoded_norm(rng):
    state = random_encoded(rng, [1, 2, 3], 3).scaled(0.7)
    total = sum(r.probability for r, _ in bell_measure(state, 1, 2))
    assert total == pytest.approx(state.norm_sq, abs=1e-10)
    with pytest.raises(EncodingError):
        bell_measure(state + fc(3, "h1", "h1", "v3", amp=0.3), 1, 2)


def test_bell_measure_teleports_third_qubit(rng):
    # B_pq on (1, 2) of a Bell pair (2, 3) times a qubit on 1 leaves X^q Z^p |psi> on 3
    alpha, beta = 0.6, 0.8j
    qubit = dual_rail_qubit(1, alpha, beta, 3)
    state = combine(qubit, bell_state("Phi+", 2, 3, 3))
    for record, out in bell_measure(state, 1, 2):
        assert record.probability == pytest.approx(0.25, abs=1e-15)
        for op in record.corrections:
            out = pauli_x(out, 3) if op == "X" else pauli_z(out, 3)
        assert out.normalized().equal_up_to_phase(dual_rail_qubit(3, alpha, beta, 3), atol=1e-12)


def test_ghz_pair_after_middle_bell_measurement():
    g1, _ = prepare_ghz(1, 2, 3, 6)
    g2, _ = prepare_ghz(4, 5, 6, 6)
    state = combine(g1, g2)
    for e in (1, 2, 3):
        state = hadamard(state, e)
    even = fc(6, "h1", "h2") + fc(6, "v1", "v2")
    odd = fc(6, "h1", "v2") + fc(6, "v1", "h2")
    hh, vv = fc(6, "h5", "h6"), fc(6, "v5", "v6")
    expected = {
        "Phi+": combine(even, hh) + combine(odd, vv),
        "Phi-": combine(even, hh) - combine(odd, vv),
        "Psi+": combine(even, vv) + combine(odd, hh),
        "Psi-": combine(even, vv) - combine(odd, hh),
    }
    for record, out in bell_measure(state, 3, 4):
        assert record.probability == pytest.approx(0.25, abs=1e-12)
        assert out.normalized().equal_up_to_phase(expected[record.outcome].normalized(), atol=1e-12)


# -- click patterns --------------------------------------------------------------------


@pytest.mark.parametrize("outcome", list(BELL_OUTCOMES))
def test_click_patterns_identify_bell_states(outcome):
    rotate = outcome.startswith("Phi")
    patterns = click_amplitudes(bell_state(outcome, 1, 2), 1, 2, pre_rotation=rotate)
    assert len(patterns) == 4
    total = 0.0
    for pattern, out in patterns.items():
        p = out.norm_sq
        total += p
        if outcome_from_clicks(pattern) == outcome:
            assert p == pytest.approx(0.5, abs=1e-15)
        else:
            assert p == pytest.approx(0.0, abs=1e-15)
    assert total == pytest.approx(1.0, abs=1e-15)


def test_click_patterns_without_rotation_miss_phi():
    patterns = click_amplitudes(bell_state("Phi+", 1, 2), 1, 2)
    assert all(out.is_empty for out in patterns.values())


def test_click_pattern_labels():
    assert outcome_from_clicks(ClickPattern(False, ("D2", "D2"))) == "Psi+"
    assert outcome_from_clicks(ClickPattern(True, ("D1", "D2"))) == "Phi-"
    assert str(ClickPattern(True, ("D1", "D2"))) == "X:D1-D2"


def test_bell_record_click_pattern_consistent():
    for record, _ in bell_measure(fc(2, "h1", "v2"), 1, 2):
        assert outcome_from_clicks(record.click_pattern) == record.outcome


# -- measurement-based CNOT ------------------------------------------------------------

SWAP_OUT = {7: 5, 5: 7, 8: 2, 2: 8}


def abstract_image(control, target):
    joined = combine(control.with_ensembles(8), target.with_ensembles(8))
    return cnot_dual_rail(joined, 7, 8).relabel(SWAP_OUT)


@pytest.mark.parametrize("c,t", list(itertools.product((0, 1), repeat=2)))
def test_mb_cnot_basis_inputs_all_branches(c, t):
    control = dual_rail_qubit(7, 1 - c, c, 8)
    target = dual_rail_qubit(8, 1 - t, t, 8)
    result = cnot_measurement_based(control, target)
    expected = abstract_image(control, target)
    assert len(result.branches) == 64
    assert result.ghz_probability == pytest.approx(1 / 16, abs=1e-15)
    assert sum(b.probability for b in result.branches) == pytest.approx(1.0, abs=1e-12)
    for branch in result.branches:
        assert branch.probability == pytest.approx(1 / 64, abs=1e-12)
        assert branch.state.allclose(expected, atol=1e-10), branch.outcomes


def test_mb_cnot_random_superpositions(rng):
    for _ in range(3):
        a = rng.normal(size=2) + 1j * rng.normal(size=2)
        b = rng.normal(size=2) + 1j * rng.normal(size=2)
        control = dual_rail_qubit(7, *(a / np.linalg.norm(a)), 8)
        target = dual_rail_qubit(8, *(b / np.linalg.norm(b)), 8)
        expected = abstract_image(control, target)
        for branch in cnot_measurement_based(control, target).branches:
            assert branch.state.allclose(expected, atol=1e-10)


def test_mb_cnot_plus_minus_inputs():
    control = dual_rail_qubit(7, 1 / R2, 1 / R2, 8)
    target = dual_rail_qubit(8, 1 / R2, -1 / R2, 8)
    result = cnot_measurement_based(control, target)
    expected = combine(dual_rail_qubit(2, 1, -1, 8), dual_rail_qubit(5, 1, -1, 8)).scaled(0.5)
    assert (result.control_out, result.target_out) == (5, 2)
    for branch in result.branches:
        assert branch.state.equal_up_to_phase(expected, atol=1e-12)
    assert result.success_probability == pytest.approx(1 / 16, abs=1e-12)


def test_mb_cnot_fixed_point():
    result = cnot_measurement_based(fc(8, "h7"), fc(8, "h8"))
    for branch in result.branches:
        assert branch.state.equal_up_to_phase(fc(8, "h2", "h5"), atol=1e-12)


def test_mb_cnot_records_and_corrections():
    result = cnot_measurement_based(fc(8, "v7"), fc(8, "h8"))
    outcomes = {b.outcomes for b in result.branches}
    assert len(outcomes) == 64
    for branch in result.branches:
        assert [r.ensembles for r in branch.records] == [(3, 4), (1, 8), (6, 7)]
        assert all(op in ("X", "Z") for op, _ in branch.corrections)


def test_mb_cnot_input_validation():
    with pytest.raises(ValueError):
        cnot_measurement_based(fc(8, "h1"), fc(8, "h8"))
    with pytest.raises(ValueError):
        mb_cnot(fc(8, "h7", "h8", "h1"), 7, 8, [1, 2, 3, 4, 5, 6])
    with pytest.raises(ValueError):
        mb_cnot(fc(8, "h7", "h8"), 7, 8, [1, 2, 3, 4, 5])


# -- cluster pipeline -------------------------------------------------------------------


def test_pipeline_two_ensembles_matches_product_form():
    res = build_cluster_ensembles(2)
    expanded = (combine(fc(2, "h1"), fc(2, "h2") - fc(2, "v2"))
                + combine(fc(2, "v1"), fc(2, "h2") + fc(2, "v2"))).scaled(0.5)
    # same vector written with sigma_z acting on ensemble 2
    factored = (combine(pauli_z(fc(2, "h2") + fc(2, "v2"), 2), fc(2, "h1"))
                + combine(fc(2, "v1"), fc(2, "h2") + fc(2, "v2"))).scaled(0.5)
    assert expanded.allclose(factored, atol=1e-15)
    assert res.state.allclose(expanded, atol=1e-12)
    assert res.fidelity == pytest.approx(1.0, abs=1e-12)
    assert res.success_probability == 1.0


def test_pipeline_three_ensembles_product_form():
    res = build_cluster_ensembles(3)
    plus = [fc(3, f"h{e}") + fc(3, f"v{e}") for e in (1, 2, 3)]
    # (h1 Z2 + v1)(h2 Z3 + v2)(h3 + v3) / 2^{3/2}, expanded by hand over the Z branches
    z_plus = [pauli_z(p, e) for p, e in zip(plus, (1, 2, 3))]
    expected = (combine(combine(fc(3, "h1"), fc(3, "h2")), z_plus[2])
                + combine(combine(fc(3, "h1"), fc(3, "v2")), plus[2]).scaled(-1)
                + combine(combine(fc(3, "v1"), fc(3, "h2")), z_plus[2])
                + combine(combine(fc(3, "v1"), fc(3, "v2")), plus[2])).scaled(2**-1.5)
    assert res.state.equal_up_to_phase(expected, atol=1e-12)
    assert res.state.equal_up_to_phase(ideal_cluster(3, "dual_rail"), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_pipeline_fidelity_one(n):
    res = build_cluster_ensembles(n)
    assert res.fidelity == pytest.approx(1.0, abs=1e-10)
    assert res.sigma_z_deviation == ()


def test_verbatim_convention_deviation():
    assert build_cluster_ensembles(2, sign_convention="verbatim").sigma_z_deviation == ()
    for n in (3, 4, 5):
        res = build_cluster_ensembles(n, sign_convention="verbatim")
        assert res.sigma_z_deviation == tuple(range(1, n - 1))
        vec, _ = to_qubit_vector(res.state, list(range(1, n + 1)))
        bits = np.array([[(i >> (n - 1 - j)) & 1 for j in range(n)] for i in range(2**n)])
        fixed = vec * (-1.0) ** bits[:, : n - 2].sum(axis=1)
        overlap = np.vdot(ideal_cluster_amplitudes(n), fixed)
        assert abs(overlap) == pytest.approx(1.0, abs=1e-12)


def test_pipeline_measurement_based_agrees():
    for n in (2, 3):
        abstract = build_cluster_ensembles(n)
        mb = build_cluster_ensembles(n, gate_mode="measurement_based")
        assert mb.state.allclose(abstract.state, atol=1e-10)
        assert mb.fidelity == pytest.approx(1.0, abs=1e-10)
        assert mb.success_probability == pytest.approx(16.0 ** -(n - 1), abs=1e-15)
        assert mb.branch_probability == pytest.approx(64.0 ** -(n - 1), abs=1e-15)


def test_pipeline_seeded_sampling_is_reproducible():
    a = build_cluster_ensembles(3, gate_mode="measurement_based", seed=7)
    b = build_cluster_ensembles(3, gate_mode="measurement_based", seed=7)
    assert a.log == b.log
    assert a.state.allclose(b.state, atol=0)
    assert a.fidelity == pytest.approx(1.0, abs=1e-10)


def test_pipeline_validation():
    with pytest.raises(ValueError):
        build_cluster_ensembles(1)
    with pytest.raises(ValueError):
        build_cluster_ensembles(2, gate_mode="optical")
    with pytest.raises(ValueError):
        build_cluster_ensembles(2, sign_convention="other")


def test_pipeline_report_dict():
    d = build_cluster_ensembles(2).as_dict()
    assert d["fidelity"] == pytest.approx(1.0)
    assert d["sigma_z_deviation"] == []
    assert d["log"][0].startswith("init")
