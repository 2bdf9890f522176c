import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from fourier_qae.acquire import AcquisitionConfig, WindowParams
from fourier_qae.grover import StatePrep, build_amplifier, identity_prep, random_prep, subspace_basis
from fourier_qae.observable import (
    ObservableError,
    ObservableSpec,
    PauliString,
    controlled_pauli_test,
    correlated_pair_state,
    default_schedule,
    estimate_observable,
    estimate_pauli_expectation,
    estimate_pauli_term,
    pauli_phi_prep,
)
from fourier_qae.statevec import H, X, Circuit, u1

A = 1 / (20 * np.sqrt(2))
CFG = AcquisitionConfig("direct_probability", 8, 60, WindowParams(A))
# ladder ends at m = 8 in probability mode: grid step / (4 m), mapped through |d cos| <= 1
RES = 1e-3 / 32


def dense_expectation(psi: StatePrep, word: str) -> float:
    v = psi.state().amplitudes
    return float(np.vdot(v, PauliString(word).matrix() @ v).real)


def test_pauli_matrix_ordering():
    # character 0 acts on qubit 0, the least significant bit
    np.testing.assert_array_equal(PauliString("XI").matrix(), np.kron(np.eye(2), [[0, 1], [1, 0]]))


def test_parse_grammar():
    obs = ObservableSpec.parse("0.5 IIZZ\n-1 XIII  # comment\n\n+.25 ZZZZ\n1e-1 YYII")
    assert [c for c, _ in obs.terms] == [0.5, -1.0, 0.25, 0.1]
    assert obs.terms[1][1].word == "XIII"
    for bad in ("IIZZ", "0.5 IIAZ", "0.5 IIZZ extra", "abc IIZZ", "1 IZ\n1 IZZ", ""):
        with pytest.raises(ObservableError):
            ObservableSpec.parse(bad)


def test_phi_prep_appends_paulis():
    psi = random_prep(3, 1, 2)
    phi = pauli_phi_prep(psi, PauliString("XIZ"))
    np.testing.assert_allclose(phi.state().amplitudes, PauliString("XIZ").matrix() @ psi.state().amplitudes, atol=1e-12)
    with pytest.raises(ObservableError):
        pauli_phi_prep(psi, PauliString("XZ"))


def test_identity_word_short_circuits():
    psi = random_prep(2, 3, 2)
    est = estimate_pauli_term(psi, PauliString("II"), CFG)
    assert est.short_circuit and est.expectation == 1.0


def test_z_on_plus_is_zero():
    plus = StatePrep(Circuit(1, [u1(H, 0)]))
    est = estimate_pauli_term(plus, PauliString("Z"), CFG)
    assert est.short_circuit and est.expectation == 0.0


def test_stabilizer_minus_one():
    one = StatePrep(Circuit(1, [u1(X, 0)]))
    assert estimate_pauli_expectation(one, PauliString("Z"), CFG) == -1.0


def test_correlated_pair_expectation():
    psi = correlated_pair_state()
    exact = dense_expectation(psi, "IIIIZZ")
    assert np.arccos(exact) == pytest.approx(0.595, abs=1e-12)


def test_expectation_angle_is_half_the_eigenphase():
    psi = correlated_pair_state(4, 0.9, seed=2, depth=2)
    p = PauliString("IIZZ")
    amp = build_amplifier(psi, pauli_phi_prep(psi, p))
    lam = np.vdot(subspace_basis(amp).y_plus.amplitudes, amp.unitary @ subspace_basis(amp).y_plus.amplitudes)
    assert abs(np.angle(lam) / 2 - np.arccos(abs(dense_expectation(psi, "IIZZ")))) < 1e-8


@pytest.mark.parametrize("seed", range(4))
def test_random_state_expectation(seed):
    psi = random_prep(4, seed, 4)
    exact = dense_expectation(psi, "IZII")
    assert abs(estimate_pauli_expectation(psi, PauliString("IZII"), CFG) - exact) < 2 * RES


def test_negative_expectation_sign_resolved():
    psi = StatePrep(Circuit(1, [u1(np.array([[np.cos(1.2), -np.sin(1.2)], [np.sin(1.2), np.cos(1.2)]]), 0)]))
    exact = np.cos(2.4)
    est = estimate_pauli_term(psi, PauliString("Z"), CFG)
    assert exact < 0 and abs(est.expectation - exact) < 2 * RES
    assert est.theta == pytest.approx(2.4, abs=1e-3)


def test_controlled_pauli_test_exact_and_sampled():
    psi = random_prep(3, 4, 3)
    exact = dense_expectation(psi, "ZXI")
    assert controlled_pauli_test(psi, PauliString("ZXI"), 0, 0) == pytest.approx(exact, abs=1e-12)
    assert abs(controlled_pauli_test(psi, PauliString("ZXI"), 40_000, 1) - exact) < 0.03


def test_sampled_estimate_is_close():
    psi = random_prep(3, 8, 3)
    exact = dense_expectation(psi, "IXZ")
    cfg = AcquisitionConfig("direct_probability", 4, 60, WindowParams(A), n_shot=2000, seed=3)
    assert abs(estimate_pauli_expectation(psi, PauliString("IXZ"), cfg) - exact) < 0.02


def test_global_phase_invariance():
    psi = random_prep(3, 6, 3)
    phased = StatePrep(psi.circuit + Circuit(3, [u1(np.exp(0.7j) * np.eye(2), 0)]))
    p = PauliString("ZIY")
    assert estimate_pauli_expectation(psi, p, CFG) == pytest.approx(estimate_pauli_expectation(phased, p, CFG), abs=1e-9)


def test_observable_linearity_and_basis_state():
    state01 = StatePrep(Circuit(2, [u1(X, 0)]))  # qubit 0 in |1>
    obs = ObservableSpec.parse("1 ZI\n1 IZ")
    assert estimate_observable(state01, obs, CFG).value == pytest.approx(0.0, abs=1e-12)
    psi = random_prep(4, 2, 4)
    single = estimate_observable(psi, ObservableSpec.parse("2 ZIII"), CFG)
    assert single.value == pytest.approx(2 * single.terms[0][1].expectation)


@settings(max_examples=15)
@given(st.integers(0, 10_000), st.floats(-2, 2), st.floats(-2, 2))
@example(39, 1.0, 1.0)
@example(167, 1.0, 1.0)
def test_two_term_observable_matches_dense(seed, c1, c2):
    psi = random_prep(4, seed, 3)
    obs = ObservableSpec(((c1, PauliString("ZIXI")), (c2, PauliString("IYIZ"))))
    exact = float(np.vdot(psi.state().amplitudes, obs.matrix() @ psi.state().amplitudes).real)
    tol = 2 * (abs(c1) + abs(c2)) * RES + 1e-9
    assert abs(estimate_observable(psi, obs, CFG).value - exact) <= tol


def test_default_schedule():
    assert default_schedule(8) == [1, 2, 4, 8]
    assert default_schedule(10) == [1, 2, 4, 8, 10]
    assert default_schedule(-3) == [1, 2, 3]
    assert default_schedule(1) == [1]


def test_width_mismatch():
    with pytest.raises(ObservableError):
        estimate_observable(identity_prep(3), ObservableSpec.parse("1 ZZ"), CFG)
