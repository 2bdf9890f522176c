"""Pauli-string expectations as overlap angles, and weighted sums of them.

For a Pauli string P, <psi|P|psi> = cos(theta) with theta in [0, pi], where
theta is the angle between psi and phi = P psi. The amplifier built from that
pair only sees theta' = arccos|<psi|P|psi>| in [0, pi/2], and the return
probability spectrum is blind to theta' -> pi/2 - theta' at a single m. A
coarse Hadamard test of controlled-P fixes both the branch and the sign; the
Fourier ladder then sharpens the magnitude.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .acquire import AcquisitionConfig, sample_rng
from .grover import StatePrep, build_amplifier, random_prep
from .spectrum import DEFAULT_GRID, LadderResult, ladder_refine
from .statevec import H, X, Y, Z, Circuit, Ket, apply_circuit, cu, cx, ry, sample_bitstrings, u1

PAULI_MATRICES = {"X": X, "Y": Y, "Z": Z}
DEGENERACY_TOL = 1e-9
# how far past the requested magnification the ladder may go for near-degenerate angles
EXTEND_FACTOR = 8
_TERM = re.compile(r"^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s+([IXYZ]+)\s*$")


class ObservableError(ValueError):
    pass


@dataclass(frozen=True)
class PauliString:
    """Character i of ``word`` acts on qubit i."""

    word: str

    def __post_init__(self):
        if not self.word or set(self.word) - set("IXYZ"):
            raise ObservableError(f"not a Pauli word: {self.word!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.word)

    def gates(self) -> list:
        return [u1(PAULI_MATRICES[ch], q) for q, ch in enumerate(self.word) if ch != "I"]

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n operator in the simulator's ordering (qubit 0 least significant)."""
        out = np.eye(1, dtype=complex)
        for ch in self.word:
            out = np.kron({"I": np.eye(2), **PAULI_MATRICES}[ch], out)
        return out

    def expectation(self, state: Ket) -> float:
        v = state.amplitudes
        return float(np.vdot(v, apply_circuit(state, Circuit(self.n_qubits, self.gates())).amplitudes).real)


@dataclass(frozen=True)
class ObservableSpec:
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self):
        if not self.terms:
            raise ObservableError("observable needs at least one term")
        widths = {p.n_qubits for _, p in self.terms}
        if len(widths) != 1:
            raise ObservableError(f"Pauli words of different lengths: {sorted(widths)}")
        for c, _ in self.terms:
            if not np.isfinite(c):
                raise ObservableError(f"non-finite coefficient {c}")

    @property
    def n_qubits(self) -> int:
        return self.terms[0][1].n_qubits

    @classmethod
    def parse(cls, text: str) -> ObservableSpec:
        """One ``coefficient word`` pair per line; blank lines and ``#`` comments are skipped."""
        terms = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0]
            if not line.strip():
                continue
            mt = _TERM.match(line)
            if mt is None:
                raise ObservableError(f"line {lineno}: expected 'coefficient PAULIWORD', got {line.strip()!r}")
            terms.append((float(mt.group(1)), PauliString(mt.group(2))))
        return cls(tuple(terms))

    def matrix(self) -> np.ndarray:
        return sum(c * p.matrix() for c, p in self.terms)


def pauli_phi_prep(psi: StatePrep, p: PauliString) -> StatePrep:
    """Preparation of P|psi>: the psi circuit followed by the Pauli factors."""
    if p.n_qubits != psi.n_qubits:
        raise ObservableError(f"Pauli word has {p.n_qubits} qubits, state has {psi.n_qubits}")
    return StatePrep(psi.circuit + Circuit(psi.n_qubits, p.gates()), f"{p.word}*{psi.label}")


def controlled_pauli_test(psi: StatePrep, p: PauliString, shots: int, seed: int) -> float:
    """Re<psi|P|psi> from a Hadamard test with the ancilla on qubit n.

    ``shots == 0`` returns the exact expectation of the ancilla readout.
    """
    n = psi.n_qubits
    anc = n
    c = psi.circuit.widen(n + 1) + Circuit(
        n + 1,
        (u1(H, anc), *(cu(anc, q, PAULI_MATRICES[ch]) for q, ch in enumerate(p.word) if ch != "I"), u1(H, anc)),
    )
    out = apply_circuit(Ket.zero(n + 1), c)
    if shots == 0:
        p0 = float(out.probabilities()[: 1 << n].sum())
    else:
        counts = sample_bitstrings(out, shots, sample_rng(seed, 0, 11))
        p0 = sum(v for k, v in counts.items() if k[0] == "0") / shots
    return 2 * p0 - 1


@dataclass(frozen=True)
class PauliEstimate:
    word: str
    expectation: float
    theta: float  # in [0, pi]
    coarse: float
    short_circuit: bool
    ladder: LadderResult | None = None


def default_schedule(m: int) -> list[int]:
    """1, 2, 4, ... below |m|, then |m| itself."""
    m = max(1, abs(int(m)))
    out, k = [], 1
    while k < m:
        out.append(k)
        k *= 2
    return [*out, m]


def estimate_pauli_term(
    psi: StatePrep,
    p: PauliString,
    cfg: AcquisitionConfig,
    *,
    schedule=None,
    grid=DEFAULT_GRID,
    coarse_shots: int | None = None,
) -> PauliEstimate:
    """Full diagnostic form of :func:`estimate_pauli_expectation`.

    If every rung is skipped (theta' too close to 0 or pi/2 for the requested
    magnifications) the magnification is doubled up to EXTEND_FACTOR times the
    last rung; failing that, the coarse Hadamard-test value is returned.
    """
    phi = pauli_phi_prep(psi, p)
    exact = p.expectation(psi.state())
    if abs(exact) < DEGENERACY_TOL or abs(abs(exact) - 1) < DEGENERACY_TOL:
        val = float(np.round(exact))
        return PauliEstimate(p.word, val, float(np.arccos(val)), val, True)
    shots = cfg.n_shot if coarse_shots is None else coarse_shots
    coarse = float(np.clip(controlled_pauli_test(psi, p, shots, cfg.seed or 0), -1.0, 1.0))
    amp = build_amplifier(psi, phi)
    theta_c = float(np.arccos(abs(coarse)))
    # the coarse value must place theta' on the right side of pi/4
    half = 0.05 if shots == 0 else min(np.pi / 4, 4.0 / np.sqrt(shots))
    prior = (max(0.0, theta_c - half), min(np.pi / 2, theta_c + half))
    sched = default_schedule(cfg.m) if schedule is None else list(schedule)
    res = ladder_refine(amp, sched, replace(cfg, m=sched[0]), grid=grid, prior=prior)
    m = sched[-1]
    while all(r.skipped for r in res.rungs) and m < EXTEND_FACTOR * sched[-1]:
        # theta' within a peak width of 0 or pi/2: every peak so far overlapped the
        # central one; larger magnifications pull it clear
        m *= 2
        res = ladder_refine(amp, [m], replace(cfg, m=m), grid=grid, prior=prior)
    theta_abs = theta_c if all(r.skipped for r in res.rungs) else res.theta
    theta = theta_abs if coarse >= 0 else np.pi - theta_abs
    return PauliEstimate(p.word, float(np.cos(theta)), float(theta), coarse, False, res)


def estimate_pauli_expectation(psi: StatePrep, p: PauliString, cfg: AcquisitionConfig, **kw) -> float:
    return estimate_pauli_term(psi, p, cfg, **kw).expectation


@dataclass(frozen=True)
class ObservableEstimate:
    value: float
    terms: tuple[tuple[float, PauliEstimate], ...] = field(default=())


def estimate_observable(psi: StatePrep, obs: ObservableSpec, cfg: AcquisitionConfig, **kw) -> ObservableEstimate:
    """sum_i c_i <P_i>, with each term estimated independently (in listed order)."""
    if obs.n_qubits != psi.n_qubits:
        raise ObservableError("observable and state widths differ")
    parts = tuple((c, estimate_pauli_term(psi, p, cfg, **kw)) for c, p in obs.terms)
    return ObservableEstimate(float(sum(c * e.expectation for c, e in parts)), parts)


def correlated_pair_state(n_qubits: int = 6, theta: float = 0.595, seed: int = 5, depth: int = 4) -> StatePrep:
    """Random state on the low qubits, times a Bell-like pair on the top two with <Z Z> = cos(theta).

    The top pair is H on qubit n-2, Ry(theta) on qubit n-1, then CNOT(n-2 -> n-1).
    """
    if n_qubits < 2:
        raise ObservableError("need at least two qubits")
    lo = random_prep(n_qubits - 2, seed, depth) if n_qubits > 2 else None
    ops = [] if lo is None else list(lo.circuit.widen(n_qubits).ops)
    ops += [u1(H, n_qubits - 2), u1(ry(theta), n_qubits - 1), cx(n_qubits - 2, n_qubits - 1)]
    return StatePrep(Circuit(n_qubits, ops), f"correlated_pair(n={n_qubits},theta={theta!r},seed={seed})")
