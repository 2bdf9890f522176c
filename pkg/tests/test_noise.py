import numpy as np
import pytest

from fourier_qae.acquire import AcquisitionConfig, WindowParams
from fourier_qae.grover import build_amplifier, random_prep, rotated_pair
from fourier_qae.noise import (
    NoiseConfig,
    decompose,
    density_matrix_reference,
    noisy_apply_circuit,
    noisy_spectrum_study,
    run_noisy_batch,
    write_noise_table,
)
from fourier_qae.statevec import Circuit, GateError, Ket, apply_circuit, circuit_unitary, cx, mcx, mcz
from fourier_qae.validation import dense_circuit, random_circuit


@pytest.mark.parametrize("k", [2, 3, 4])
def test_decomposition_is_exact(k):
    for gate in (mcz(tuple(range(k)), k), mcx(tuple(range(1, k + 1)), 0)):
        c = Circuit(k + 1, [gate])
        d = decompose(c)
        assert all(len(op.qubits) <= 2 for op in d.ops)
        np.testing.assert_allclose(circuit_unitary(d), dense_circuit(c), atol=1e-10)


def test_two_qubit_gate_counts():
    assert Circuit(4, [mcz((0, 1, 2), 3)]).two_qubit_gate_count == 17
    assert Circuit(5, [mcz((0, 1, 2, 3), 4)]).two_qubit_gate_count == 53


def test_noisy_runner_rejects_wide_gates():
    with pytest.raises(GateError):
        run_noisy_batch(np.zeros((1, 8), complex), Circuit(3, [mcz((0, 1), 2)]), 0.1, np.random.default_rng(0))


def test_zero_noise_trajectory_is_ideal(rng):
    c = decompose(random_circuit(3, 10, rng))
    out = noisy_apply_circuit(Ket.zero(3), c, NoiseConfig(0.0, 1), rng)
    np.testing.assert_allclose(out.amplitudes, apply_circuit(Ket.zero(3), c).amplitudes, atol=1e-12)


def test_full_depolarization_of_a_bell_pair():
    # eps = 1 after the CNOT leaves the maximally mixed state on both qubits
    c = Circuit(2, [cx(0, 1)])
    plus = Ket(np.array([1, 1, 0, 0]) / np.sqrt(2))
    rho = density_matrix_reference(c, NoiseConfig(1.0, 1), plus)
    np.testing.assert_allclose(rho, np.eye(4) / 4, atol=1e-12)


def test_density_matrix_is_a_state():
    rho = density_matrix_reference(random_prep(3, 2, 3).circuit, NoiseConfig(0.1, 1))
    assert np.trace(rho).real == pytest.approx(1)
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(rho).min() > -1e-12


def test_single_gate_channel_closed_form():
    # one CNOT on |00>: <00|rho|00> = (1 - eps) + eps/4
    eps = 0.3
    rho = density_matrix_reference(Circuit(2, [cx(0, 1)]), NoiseConfig(eps, 1))
    assert rho[0, 0].real == pytest.approx(1 - eps + eps / 4)


def test_trajectories_match_density_matrix():
    prep = random_prep(3, 5, 3)
    cfg = NoiseConfig(0.05, 3000, 9)
    rho = density_matrix_reference(prep.circuit, cfg)
    c = decompose(prep.circuit)
    batch = np.zeros((cfg.trajectories, 8), complex)
    batch[:, 0] = 1
    run_noisy_batch(batch, c, cfg.epsilon, np.random.default_rng(cfg.seed))
    emp = np.einsum("bi,bj->ij", batch, batch.conj()) / cfg.trajectories
    # each entry is an average of bounded terms: 5 / sqrt(N) is a generous envelope
    assert np.abs(emp - rho).max() < 5 / np.sqrt(cfg.trajectories)


def test_noise_study_rows_and_table(tmp_path):
    amp = build_amplifier(*rotated_pair(2, 0.5, 0, 0))
    cfg = AcquisitionConfig("direct_probability", 1, 40, WindowParams(0.05))
    spectra, rows = noisy_spectrum_study(amp, cfg, [0.0, 0.01], trajectories=50, grid=(0, 2 * np.pi, 1e-3), target_x=2.0)
    assert len(spectra) == 2 and rows[0].epsilon == 0.0
    assert abs(rows[0].x_peak - 2.0) < 2e-3
    assert rows[1].height <= rows[0].height
    text = write_noise_table(rows, tmp_path / "n.csv").read_text().splitlines()
    assert text[0] == "epsilon,x_peak,height,height_stderr" and len(text) == 3
