import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourier_qae.statevec import (
    H,
    X,
    Circuit,
    GateError,
    GateOp,
    Ket,
    adjoint,
    apply_circuit,
    apply_gate,
    circuit_unitary,
    cx,
    inner,
    mcx,
    mcz,
    rx,
    ry,
    sample_bitstrings,
    u1,
)
from fourier_qae.validation import dense_circuit, dense_gate, random_circuit, random_ket


def test_bell_state_amplitudes():
    bell = apply_circuit(Ket.zero(2), Circuit(2, [u1(H, 0), cx(0, 1)]))
    np.testing.assert_allclose(bell.amplitudes, [2**-0.5, 0, 0, 2**-0.5], atol=1e-15)


def test_qubit_zero_is_least_significant():
    s = apply_gate(Ket.zero(3), u1(X, 0))
    assert s.amplitudes[1] == 1
    counts = sample_bitstrings(s, 10, 0)
    assert counts == {"001": 10}


def test_multi_controlled_z_flips_only_all_ones():
    s = np.ones(8, dtype=complex) / np.sqrt(8)
    out = apply_gate(Ket(s), mcz((0, 1), 2)).amplitudes
    expected = s.copy()
    expected[7] *= -1
    np.testing.assert_allclose(out, expected)


def test_rotations_have_expected_matrices():
    np.testing.assert_allclose(ry(np.pi) @ np.array([1, 0]), [0, 1], atol=1e-15)
    np.testing.assert_allclose(rx(np.pi), -1j * X, atol=1e-15)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_random_circuits_match_kronecker_oracle(n, rng):
    for _ in range(20):
        c = random_circuit(n, 15, rng)
        v = random_ket(n, rng)
        np.testing.assert_allclose(apply_circuit(v, c).amplitudes, dense_circuit(c) @ v.amplitudes, atol=1e-12)


def test_circuit_unitary_matches_oracle(rng):
    c = random_circuit(3, 20, rng)
    np.testing.assert_allclose(circuit_unitary(c), dense_circuit(c), atol=1e-12)


def test_adjoint_inverts(rng):
    c = random_circuit(3, 20, rng)
    u = circuit_unitary(c + adjoint(c))
    np.testing.assert_allclose(u, np.eye(8), atol=1e-12)


def test_dense_oracle_controlled_x_by_hand():
    # control qubit 1, target qubit 0: swaps |10> (index 2) and |11> (index 3)
    m = dense_gate(cx(1, 0), 2)
    assert m[3, 2] == 1 and m[2, 3] == 1 and m[0, 0] == 1 and m[1, 1] == 1


def test_gate_validation_errors():
    with pytest.raises(GateError):
        GateOp("u1", 0, np.array([[1, 1], [0, 1]]))
    with pytest.raises(GateError):
        cx(1, 1)
    with pytest.raises(GateError):
        Circuit(2, [cx(0, 2)])
    with pytest.raises(GateError):
        apply_circuit(Ket.zero(3), Circuit(2))
    with pytest.raises(GateError):
        Ket(np.ones(3))


def test_ket_is_read_only():
    k = Ket.zero(2)
    with pytest.raises(ValueError):
        k.amplitudes[0] = 0


def test_sampling_is_seeded_and_complete():
    s = apply_gate(Ket.zero(2), u1(H, 1))
    a = sample_bitstrings(s, 1000, 5)
    assert a == sample_bitstrings(s, 1000, 5)
    assert sum(a.values()) == 1000 and set(a) <= {"00", "10"}


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_circuits_preserve_norm(n, seed):
    r = np.random.default_rng(seed)
    out = apply_circuit(random_ket(n, r), random_circuit(n, 10, r))
    assert abs(out.norm() - 1) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_inner_product_is_invariant_under_a_common_circuit(seed):
    r = np.random.default_rng(seed)
    a, b = random_ket(3, r), random_ket(3, r)
    c = random_circuit(3, 8, r)
    assert abs(inner(apply_circuit(a, c), apply_circuit(b, c)) - inner(a, b)) < 1e-12


def test_mcx_on_three_controls_matches_oracle(rng):
    c = Circuit(4, [mcx((0, 1, 3), 2)])
    v = random_ket(4, rng)
    np.testing.assert_allclose(apply_circuit(v, c).amplitudes, dense_circuit(c) @ v.amplitudes, atol=1e-13)
