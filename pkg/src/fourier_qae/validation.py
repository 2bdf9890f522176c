"""Independent dense-matrix oracles and a quick self-check suite (``fourier-qae validate``).

The oracles build every gate as a full 2^n x 2^n Kronecker product, sharing no
code with the strided state-vector kernel they check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .acquire import AcquisitionConfig, WindowParams, acquire_series
from .bounds import cutoff_bound
from .grover import build_amplifier, random_prep, rotated_pair, subspace_basis
from .noise import NoiseConfig, density_matrix_reference, noisy_apply_circuit
from .spectrum import analytic_spectrum_overlap, compute_spectrum
from .statevec import Circuit, Ket, apply_circuit, cu, cx, mcx, mcz, u1

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def _kron_chain(factors: dict, n: int) -> np.ndarray:
    """Tensor product with qubit n-1 leftmost (qubit 0 is the least significant bit)."""
    out = np.eye(1, dtype=complex)
    for q in reversed(range(n)):
        out = np.kron(out, factors.get(q, np.eye(2)))
    return out


def dense_gate(op, n: int) -> np.ndarray:
    """I - P_C + P_C (x) U for controls C all set to 1."""
    full = _kron_chain({**{c: P1 for c in op.controls}, op.target: op.matrix}, n)
    proj = _kron_chain({c: P1 for c in op.controls}, n)
    return np.eye(1 << n, dtype=complex) - proj + full


def dense_circuit(c: Circuit) -> np.ndarray:
    u = np.eye(1 << c.n_qubits, dtype=complex)
    for op in c.ops:
        u = dense_gate(op, c.n_qubits) @ u
    return u


def random_circuit(n: int, n_gates: int, rng: np.random.Generator) -> Circuit:
    """Mix of random single-qubit unitaries, CNOTs, controlled-U and multi-controlled gates."""
    ops = []
    for _ in range(n_gates):
        kind = rng.integers(0, 5) if n > 1 else 0
        qs = [int(q) for q in rng.permutation(n)]
        if kind == 0:
            ops.append(u1(unitary_group.rvs(2, random_state=rng), qs[0]))
        elif kind == 1:
            ops.append(cx(qs[0], qs[1]))
        elif kind == 2:
            ops.append(cu(qs[0], qs[1], unitary_group.rvs(2, random_state=rng)))
        elif kind == 3:
            ops.append(mcz(qs[:-1], qs[-1]))
        else:
            ops.append(mcx(qs[:-1], qs[-1]))
    return Circuit(n, ops)


def random_ket(n: int, rng: np.random.Generator) -> Ket:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return Ket(v / np.linalg.norm(v))


@dataclass(frozen=True)
class ValidationResult:
    name: str
    passed: bool
    detail: str


def _simulator(rng) -> ValidationResult:
    worst = 0.0
    for k in range(100):
        n = 1 + k % 3
        c = random_circuit(n, 12, rng)
        v = random_ket(n, rng)
        worst = max(worst, float(np.abs(apply_circuit(v, c).amplitudes - dense_circuit(c) @ v.amplitudes).max()))
    return ValidationResult("simulator_vs_dense", worst <= 1e-10, f"max amplitude error {worst:.3g}")


def _amplifier(rng) -> ValidationResult:
    worst = 0.0
    for _ in range(10):
        theta = float(rng.uniform(0.05, 1.5))
        psi, phi = rotated_pair(3, theta, int(rng.integers(1 << 31)), 3)
        amp = build_amplifier(psi, phi)
        r = dense_circuit(amp.r_psi.circuit)
        worst = max(worst, float(np.abs(r @ r - np.eye(8)).max()))
        b = subspace_basis(amp)
        for vec, sign in ((b.y_plus, 1), (b.y_minus, -1)):
            lam = np.vdot(vec.amplitudes, amp.unitary @ vec.amplitudes)
            worst = max(worst, abs(lam - np.exp(sign * 2j * theta)))
    return ValidationResult("reflection_and_eigenphases", worst <= 1e-8, f"max deviation {worst:.3g}")


def _closed_form(rng) -> ValidationResult:
    worst_ratio = 0.0
    for _ in range(5):
        theta = float(rng.uniform(0.1, 1.4))
        m = int(rng.integers(1, 8))
        a = float(rng.uniform(1 / (40 * np.sqrt(2)), 1 / (10 * np.sqrt(2))))
        psi, phi = rotated_pair(2, theta, int(rng.integers(1 << 31)), 2)
        amp = build_amplifier(psi, phi)
        spec = compute_spectrum(acquire_series(amp, AcquisitionConfig("exact_overlap", m, 60, WindowParams(a))), 0, 2 * np.pi, 1e-2)
        err = float(np.abs(spec.s.real - analytic_spectrum_overlap(theta, m, a, spec.x)).max())
        worst_ratio = max(worst_ratio, err / cutoff_bound(a, 60))
    return ValidationResult("closed_form_within_cutoff_bound", worst_ratio <= 1.0, f"max error / bound {worst_ratio:.3g}")


def _noise(rng) -> ValidationResult:
    prep = random_prep(3, int(rng.integers(1 << 31)), 3)
    cfg = NoiseConfig(0.02, 4000, int(rng.integers(1 << 31)))
    rho = density_matrix_reference(prep.circuit, cfg)
    from .noise import decompose

    c = decompose(prep.circuit)
    traj_rng = np.random.default_rng(cfg.seed)
    zero = Ket.zero(3)
    ideal = apply_circuit(zero, prep.circuit).amplitudes
    vals = np.array([abs(np.vdot(ideal, noisy_apply_circuit(zero, c, cfg, traj_rng).amplitudes)) ** 2 for _ in range(cfg.trajectories)])
    ref = float(np.vdot(ideal, rho @ ideal).real)
    se = vals.std(ddof=1) / np.sqrt(vals.size)
    z = abs(vals.mean() - ref) / max(se, 1e-15)
    return ValidationResult("trajectories_vs_density_matrix", z <= 3.0, f"|mean - ref| = {z:.2f} standard errors")


def run_validation(seed: int = 0) -> list[ValidationResult]:
    rng = np.random.default_rng(seed)
    return [check(rng) for check in (_simulator, _amplifier, _closed_form, _noise)]
