"""Reflections, the amplification operator and its powers."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .statevec import (
    Circuit,
    GateError,
    Ket,
    X,
    adjoint,
    apply_circuit,
    circuit_unitary,
    cx,
    inner,
    mcz,
    ry,
    rz,
    u1,
)

MAX_POWER = 2000
# compile A to a dense matrix up to this width; above it gates are applied one by one
DENSE_MAX_QUBITS = 10
DEGENERACY_TOL = 1e-9


class DegenerateAngleError(ValueError):
    """Raised when theta sits on 0 or pi/2 and the rotation plane collapses."""


class PowerLimitError(ValueError):
    pass


@dataclass(frozen=True)
class StatePrep:
    circuit: Circuit
    label: str = ""

    @property
    def n_qubits(self) -> int:
        return self.circuit.n_qubits

    def state(self) -> Ket:
        return apply_circuit(Ket.zero(self.n_qubits), self.circuit)


def zero_reflection(n_qubits: int, extra_controls: tuple[int, ...] = (), width: int | None = None) -> Circuit:
    """I - 2|0..0><0..0| on qubits 0..n-1 as X layer, multi-controlled Z, X layer.

    ``extra_controls`` adds further control qubits to the central gate (the
    Hadamard-test ancilla).
    """
    width = n_qubits if width is None else width
    flips = tuple(u1(X, q) for q in range(n_qubits))
    core = mcz((*range(n_qubits - 1), *extra_controls), n_qubits - 1)
    return Circuit(width, flips + (core,) + flips)


@dataclass(frozen=True)
class Reflector:
    prep: StatePrep

    @cached_property
    def circuit(self) -> Circuit:
        n = self.prep.n_qubits
        return adjoint(self.prep.circuit) + zero_reflection(n) + self.prep.circuit

    def controlled_circuit(self, control: int, width: int) -> Circuit:
        n = self.prep.n_qubits
        inner_prep = self.prep.circuit.widen(width)
        return adjoint(inner_prep) + zero_reflection(n, (control,), width) + inner_prep

    def apply(self, state: Ket) -> Ket:
        return apply_circuit(state, self.circuit)


def build_reflector(prep: StatePrep) -> Reflector:
    return Reflector(prep)


@dataclass(frozen=True)
class SubspaceBasis:
    y_plus: Ket
    y_minus: Ket
    e0: Ket  # unit vector in the plane orthogonal to psi
    e1: Ket  # psi itself


@dataclass(frozen=True)
class Amplifier:
    """A = R_phi R_psi. Rotates span{psi, phi} by 2*theta."""

    r_phi: Reflector
    r_psi: Reflector
    theta_true: float | None = None
    max_power: int = MAX_POWER
    flags: tuple[str, ...] = field(default=())

    @property
    def n_qubits(self) -> int:
        return self.r_psi.prep.n_qubits

    @property
    def psi(self) -> StatePrep:
        return self.r_psi.prep

    @property
    def phi(self) -> StatePrep:
        return self.r_phi.prep

    @cached_property
    def circuit(self) -> Circuit:
        return self.r_psi.circuit + self.r_phi.circuit

    def controlled_circuit(self, control: int | None = None) -> Circuit:
        """Controlled-A on n+1 qubits; the ancilla defaults to the top qubit."""
        width = self.n_qubits + 1
        control = self.n_qubits if control is None else control
        return self.r_psi.controlled_circuit(control, width) + self.r_phi.controlled_circuit(control, width)

    @cached_property
    def unitary(self) -> np.ndarray:
        return circuit_unitary(self.circuit)

    @cached_property
    def controlled_unitary(self) -> np.ndarray:
        return circuit_unitary(self.controlled_circuit())

    def check_power(self, k: int):
        if abs(k) > self.max_power:
            raise PowerLimitError(f"|power| = {abs(k)} exceeds the cap of {self.max_power}")


def overlap_angle(psi: StatePrep, phi: StatePrep) -> float:
    ov = abs(inner(psi.state(), phi.state()))
    return float(np.arccos(np.clip(ov, 0.0, 1.0)))


def build_amplifier(psi: StatePrep, phi: StatePrep, *, max_power: int = MAX_POWER, allow_identical: bool = True) -> Amplifier:
    if psi.n_qubits != phi.n_qubits:
        raise GateError("state preparations act on different qubit counts")
    ov = abs(inner(psi.state(), phi.state()))
    if ov < DEGENERACY_TOL:
        raise DegenerateAngleError("orthogonal states: theta = pi/2 leaves no rotation plane")
    flags = ()
    if ov > 1 - DEGENERACY_TOL:
        if not allow_identical:
            raise DegenerateAngleError("identical states: theta = 0")
        flags = ("identical",)
    theta = float(np.arccos(min(ov, 1.0)))
    return Amplifier(build_reflector(phi), build_reflector(psi), theta, max_power, flags)


def _power_matrix(a: Amplifier, k: int) -> np.ndarray:
    u = a.unitary if k >= 0 else a.unitary.conj().T
    return np.linalg.matrix_power(u, abs(k))


def apply_power(a: Amplifier, state: Ket, k: int) -> Ket:
    """A^k |state>; negative k applies the adjoint |k| times."""
    a.check_power(k)
    if k == 0:
        return state
    if a.n_qubits <= DENSE_MAX_QUBITS:
        u = a.unitary if k > 0 else a.unitary.conj().T
        v = state.amplitudes
        for _ in range(abs(k)):
            v = u @ v
        return Ket(v)
    c = a.circuit if k > 0 else adjoint(a.circuit)
    for _ in range(abs(k)):
        state = apply_circuit(state, c)
    return state


def power_sequence(a: Amplifier, start: Ket, step: int, count: int) -> list[np.ndarray]:
    """[A^{step*j} start for j = 0..count-1], built incrementally."""
    a.check_power(step * (count - 1))
    out = [start.amplitudes.copy()]
    if count <= 1:
        return out
    if a.n_qubits <= DENSE_MAX_QUBITS:
        u = _power_matrix(a, step)
        v = out[0]
        for _ in range(count - 1):
            v = u @ v
            out.append(v)
        return out
    c = a.circuit if step >= 0 else adjoint(a.circuit)
    s = start
    for _ in range(count - 1):
        for _ in range(abs(step)):
            s = apply_circuit(s, c)
        out.append(s.amplitudes.copy())
    return out


def subspace_basis(a: Amplifier) -> SubspaceBasis:
    """Eigenvectors of A inside span{psi, phi}.

    With e1 = psi and e0 the Gram-Schmidt partner built from phi (phase fixed
    so <psi|phi> is real and positive), A restricted to the plane equals
    cos(2t) I + i sin(2t) sigma_y and y_pm = (e0 +- i e1)/sqrt(2).
    """
    psi = a.psi.state().amplitudes
    phi = a.phi.state().amplitudes
    ov = np.vdot(psi, phi)
    if abs(ov) < DEGENERACY_TOL or abs(ov) > 1 - DEGENERACY_TOL:
        raise DegenerateAngleError("subspace basis undefined for theta in {0, pi/2}")
    phi = phi * (abs(ov) / ov)
    perp = phi - abs(ov) * psi
    e0 = perp / np.linalg.norm(perp)
    y_plus = (e0 + 1j * psi) / np.sqrt(2)
    y_minus = (e0 - 1j * psi) / np.sqrt(2)
    return SubspaceBasis(Ket(y_plus), Ket(y_minus), Ket(e0), Ket(psi))


def restricted_matrix(a: Amplifier, basis: SubspaceBasis) -> np.ndarray:
    """2x2 matrix of A in the (e0, e1) basis."""
    cols = [a.unitary @ basis.e0.amplitudes, a.unitary @ basis.e1.amplitudes]
    rows = [basis.e0.amplitudes, basis.e1.amplitudes]
    return np.array([[np.vdot(r, c) for c in cols] for r in rows])


# --- preparations -------------------------------------------------------------


def identity_prep(n_qubits: int, label: str = "zero") -> StatePrep:
    return StatePrep(Circuit(n_qubits), label)


def random_prep(n_qubits: int, seed: int, depth: int = 8, label: str | None = None) -> StatePrep:
    """Seeded layered circuit: random Rz-Ry-Rz on every qubit, then a CNOT ladder."""
    rng = np.random.default_rng(seed)
    ops = []
    for _ in range(depth):
        for q in range(n_qubits):
            a, b, c = rng.uniform(0, 2 * np.pi, size=3)
            ops.append(u1(rz(c) @ ry(b) @ rz(a), q))
        ops.extend(cx(q, q + 1) for q in range(n_qubits - 1))
    return StatePrep(Circuit(n_qubits, ops), label or f"random(n={n_qubits},seed={seed},depth={depth})")


def random_pair(n_qubits: int, seed: int, depth: int = 8) -> tuple[StatePrep, StatePrep]:
    ss = np.random.SeedSequence(seed).generate_state(2)
    return random_prep(n_qubits, int(ss[0]), depth), random_prep(n_qubits, int(ss[1]), depth)


def rotated_pair(n_qubits: int, theta: float, seed: int, depth: int = 8) -> tuple[StatePrep, StatePrep]:
    """psi = U|0>, phi = U Ry(2 theta)_0 |0>, so |<psi|phi>| = |cos theta|."""
    base = random_prep(n_qubits, seed, depth)
    phi = Circuit(n_qubits, (u1(ry(2 * theta), 0),)) + base.circuit
    return (
        StatePrep(base.circuit, f"psi[{base.label}]"),
        StatePrep(phi, f"phi[theta={theta!r},{base.label}]"),
    )
