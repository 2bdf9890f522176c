"""Dense state-vector simulator.

Qubit ordering is little-endian: qubit 0 is the least significant bit of the
amplitude index. Every gate is stored as a (controls, target, 2x2 matrix)
triple, so one kernel handles single-qubit gates, CNOT, multi-controlled Z/X
and the controlled-V gates produced by decomposition.

Kernels act in place on arrays whose last axis is the amplitude index; any
leading axes are treated as a batch (used by the trajectory noise simulator
and for building dense unitaries).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

UNITARY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
SDG = np.array([[1, 0], [0, -1j]], dtype=complex)


def rx(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(angle: float) -> np.ndarray:
    return np.array([[np.exp(-0.5j * angle), 0], [0, np.exp(0.5j * angle)]], dtype=complex)


class GateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GateOp:
    """One gate: ``matrix`` acts on ``target`` when every control qubit is 1.

    ``kind`` is one of ``u1`` (no controls), ``cx``, ``mcz``, ``mcx`` or ``cu``
    (single control, arbitrary 2x2 target unitary; emitted by decomposition).
    """

    kind: str
    target: int
    matrix: np.ndarray
    controls: tuple[int, ...] = ()

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise GateError(f"gate matrix must be 2x2, got {m.shape}")
        if not np.allclose(m.conj().T @ m, I2, atol=UNITARY_TOL, rtol=0):
            raise GateError("gate matrix is not unitary")
        qubits = (*self.controls, self.target)
        if len(set(qubits)) != len(qubits):
            raise GateError(f"repeated qubit index in {qubits}")
        if min(qubits) < 0:
            raise GateError(f"negative qubit index in {qubits}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))

    @property
    def qubits(self) -> tuple[int, ...]:
        return (*self.controls, self.target)

    @property
    def diagonal(self) -> bool:
        return self.matrix[0, 1] == 0 and self.matrix[1, 0] == 0

    def dagger(self) -> GateOp:
        return GateOp(self.kind, self.target, self.matrix.conj().T, self.controls)

    def __eq__(self, other):
        if not isinstance(other, GateOp):
            return NotImplemented
        return (
            self.kind == other.kind
            and self.target == other.target
            and self.controls == other.controls
            and np.array_equal(self.matrix, other.matrix)
        )

    def __hash__(self):
        return hash((self.kind, self.target, self.controls, self.matrix.tobytes()))


def u1(matrix, target: int) -> GateOp:
    return GateOp("u1", target, matrix)


def cx(control: int, target: int) -> GateOp:
    return GateOp("cx", target, X, (control,))


def mcz(controls, target: int) -> GateOp:
    return GateOp("mcz", target, Z, tuple(controls))


def mcx(controls, target: int) -> GateOp:
    return GateOp("mcx", target, X, tuple(controls))


def cu(control: int, target: int, matrix) -> GateOp:
    return GateOp("cu", target, matrix, (control,))


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[GateOp, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if max(op.qubits) >= self.n_qubits:
                raise GateError(f"gate on qubits {op.qubits} outside a {self.n_qubits}-qubit circuit")

    def __add__(self, other: Circuit) -> Circuit:
        if other.n_qubits != self.n_qubits:
            raise GateError("cannot concatenate circuits of different width")
        return Circuit(self.n_qubits, self.ops + other.ops)

    def __len__(self):
        return len(self.ops)

    def widen(self, n_qubits: int) -> Circuit:
        return Circuit(n_qubits, self.ops)

    @property
    def two_qubit_gate_count(self) -> int:
        # imported lazily: decomposition lives with the noise model
        from .noise import decompose

        return sum(1 for op in decompose(self).ops if len(op.qubits) >= 2)


def adjoint(c: Circuit) -> Circuit:
    return Circuit(c.n_qubits, tuple(op.dagger() for op in reversed(c.ops)))


@dataclass(frozen=True, eq=False)
class Ket:
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        n = amps.size.bit_length() - 1
        if amps.size < 2 or 1 << n != amps.size:
            raise GateError(f"amplitude vector length {amps.size} is not 2^n with n >= 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @classmethod
    def zero(cls, n_qubits: int) -> Ket:
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> Ket:
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@lru_cache(maxsize=4096)
def _pair_indices(n: int, controls: tuple[int, ...], target: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices with all controls set and target bit 0 / 1."""
    idx = np.arange(1 << n)
    mask = np.ones(idx.size, dtype=bool)
    for c in controls:
        mask &= (idx >> c) & 1 == 1
    mask &= (idx >> target) & 1 == 0
    lo = idx[mask]
    hi = lo | (1 << target)
    lo.setflags(write=False)
    hi.setflags(write=False)
    return lo, hi


def apply_op_inplace(amps: np.ndarray, op: GateOp, n: int) -> None:
    """Apply ``op`` to the last axis of ``amps`` in place."""
    m = op.matrix
    if not op.controls:
        # strided view: bit `target` becomes its own axis
        view = amps.reshape(amps.shape[:-1] + (1 << (n - op.target - 1), 2, 1 << op.target))
        a0 = view[..., 0, :]
        a1 = view[..., 1, :]
        if op.diagonal:
            if m[0, 0] != 1:
                a0 *= m[0, 0]
            if m[1, 1] != 1:
                a1 *= m[1, 1]
            return
        b0 = a0.copy()
        a0 *= m[0, 0]
        a0 += m[0, 1] * a1
        a1 *= m[1, 1]
        a1 += m[1, 0] * b0
        return
    lo, hi = _pair_indices(n, op.controls, op.target)
    if op.diagonal:
        if m[0, 0] != 1:
            amps[..., lo] *= m[0, 0]
        if m[1, 1] != 1:
            amps[..., hi] *= m[1, 1]
        return
    a0 = amps[..., lo]
    a1 = amps[..., hi]
    if m[0, 0] == 0 and m[1, 1] == 0 and m[0, 1] == 1 and m[1, 0] == 1:
        amps[..., lo] = a1
        amps[..., hi] = a0
        return
    amps[..., lo] = m[0, 0] * a0 + m[0, 1] * a1
    amps[..., hi] = m[1, 0] * a0 + m[1, 1] * a1


def run_inplace(amps: np.ndarray, c: Circuit) -> np.ndarray:
    for op in c.ops:
        apply_op_inplace(amps, op, c.n_qubits)
    return amps


def _check_width(state: Ket, n: int):
    if state.n_qubits != n:
        raise GateError(f"state has {state.n_qubits} qubits, operation expects {n}")


def apply_gate(state: Ket, gate: GateOp) -> Ket:
    if max(gate.qubits) >= state.n_qubits:
        raise GateError(f"gate on qubits {gate.qubits} outside a {state.n_qubits}-qubit state")
    amps = state.amplitudes.copy()
    apply_op_inplace(amps, gate, state.n_qubits)
    return Ket(amps)


def apply_circuit(state: Ket, c: Circuit) -> Ket:
    _check_width(state, c.n_qubits)
    return Ket(run_inplace(state.amplitudes.copy(), c))


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Dense 2^n x 2^n matrix of ``c`` (columns are images of basis states)."""
    rows = np.eye(1 << c.n_qubits, dtype=complex)
    return run_inplace(rows, c).T.copy()


def inner(a: Ket, b: Ket) -> complex:
    """<a|b>."""
    if a.amplitudes.size != b.amplitudes.size:
        raise GateError("inner product of states with different dimensions")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def sample_bitstrings(state: Ket, shots: int, seed) -> dict[str, int]:
    """Draw ``shots`` computational-basis outcomes.

    Keys are bitstrings with qubit n-1 leftmost (``format(index, '0nb')``).
    ``seed`` may be an int, a SeedSequence or a Generator.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    p = state.probabilities()
    p = p / p.sum()
    counts = rng.multinomial(shots, p)
    n = state.n_qubits
    return {format(i, f"0{n}b"): int(k) for i, k in enumerate(counts) if k}
