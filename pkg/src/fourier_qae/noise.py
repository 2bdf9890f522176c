"""Two-qubit depolarizing noise by Pauli-trajectory sampling.

The channel Phi(rho) = (1-eps) U rho U^dag + eps I/4 on a gate's two qubits
equals applying U and then, with probability eps, one of the 16 two-qubit
Paulis chosen uniformly (II included), because I/4 = (1/16) sum_P P rho P.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg

from .statevec import X, Z, Circuit, GateError, GateOp, Ket, apply_op_inplace, cu, cx, u1

MAX_REFERENCE_QUBITS = 6
TRACK_RADIUS = 4.0


@dataclass(frozen=True)
class NoiseConfig:
    epsilon: float
    trajectories: int = 1000
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")


# --- decomposition into <= 2-qubit gates ---------------------------------------


def _sqrt_unitary(u: np.ndarray) -> np.ndarray:
    t, q = scipy.linalg.schur(u, output="complex")
    return q @ np.diag(np.sqrt(np.diag(t))) @ q.conj().T


def _controlled(controls: tuple[int, ...], target: int, u: np.ndarray) -> list[GateOp]:
    """Ancilla-free C^k(U) from controlled-V gates and C^{k-1}X (Barenco et al.)."""
    if not controls:
        return [u1(u, target)]
    if len(controls) == 1:
        if np.array_equal(u, X):
            return [cx(controls[0], target)]
        return [cu(controls[0], target, u)]
    v = _sqrt_unitary(u)
    last, rest = controls[-1], controls[:-1]
    flip = _controlled(rest, last, X)
    return [cu(last, target, v), *flip, cu(last, target, v.conj().T), *flip, *_controlled(rest, target, v)]


@lru_cache(maxsize=256)
def _decompose_op(op: GateOp) -> tuple[GateOp, ...]:
    if len(op.qubits) <= 2:
        return (op,)
    return tuple(_controlled(op.controls, op.target, op.matrix))


def decompose(c: Circuit) -> Circuit:
    """Rewrite every gate touching more than two qubits into one- and two-qubit gates."""
    ops = []
    for op in c.ops:
        ops.extend(_decompose_op(op))
    return Circuit(c.n_qubits, ops)


def _require_decomposed(c: Circuit):
    for op in c.ops:
        if len(op.qubits) > 2:
            raise GateError(f"{op.kind} on {len(op.qubits)} qubits: decompose the circuit before noisy simulation")


# --- trajectories ----------------------------------------------------------------


@lru_cache(maxsize=64)
def _pauli_tables(n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(1 << n)
    flip = idx ^ (1 << q)
    sign = np.where((idx >> q) & 1, -1.0, 1.0)
    return flip, sign


def _insert_paulis(batch: np.ndarray, pair: tuple[int, int], eps: float, rng: np.random.Generator, n: int):
    hit = np.flatnonzero(rng.random(batch.shape[0]) < eps)
    if hit.size == 0:
        return
    codes = rng.integers(0, 16, size=hit.size)
    sub = batch[hit]
    # per qubit: 0=I 1=X 2=Y 3=Z; Y is applied as X.Z (global phase dropped)
    for q, code in zip(pair, (codes >> 2, codes & 3)):
        flip, sign = _pauli_tables(n, q)
        zrows = (code == 2) | (code == 3)
        if zrows.any():
            sub[zrows] *= sign
        xrows = (code == 1) | (code == 2)
        if xrows.any():
            sub[xrows] = sub[xrows][:, flip]
    batch[hit] = sub


def run_noisy_batch(batch: np.ndarray, c: Circuit, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Apply decomposed circuit ``c`` to each row of ``batch`` with independent noise, in place."""
    _require_decomposed(c)
    n = c.n_qubits
    for op in c.ops:
        apply_op_inplace(batch, op, n)
        if eps > 0 and len(op.qubits) == 2:
            _insert_paulis(batch, op.qubits, eps, rng, n)
    return batch


def noisy_apply_circuit(state: Ket, c: Circuit, cfg: NoiseConfig, trajectory_rng: np.random.Generator) -> Ket:
    """One noise trajectory of ``c`` (which must already be decomposed)."""
    batch = state.amplitudes.copy()[None, :]
    run_noisy_batch(batch, c, cfg.epsilon, trajectory_rng)
    return Ket(batch[0])


# --- exact density-matrix reference (test oracle) -------------------------------


def _left_apply(m: np.ndarray, op: GateOp, n: int) -> np.ndarray:
    """U @ m using the state-vector kernel on the columns of m."""
    out = np.ascontiguousarray(m.T)
    apply_op_inplace(out, op, n)
    return out.T


def _depolarize(rho: np.ndarray, pair: tuple[int, int], eps: float, n: int) -> np.ndarray:
    twirl = np.zeros_like(rho)
    for a in range(4):
        for b in range(4):
            perm = np.arange(rho.shape[0])
            sign = np.ones(rho.shape[0])
            for q, code in zip(pair, (a, b)):
                flip, s = _pauli_tables(n, q)
                if code in (2, 3):
                    sign = sign * s
                if code in (1, 2):
                    # X after Z: (XZ v)[i] = (Z v)[i ^ bit]
                    perm, sign = perm[flip], sign[flip]
            twirl += (sign[:, None] * sign[None, :]) * rho[np.ix_(perm, perm)]
    return (1 - eps) * rho + eps * twirl / 16


def density_matrix_reference(prep: Circuit, cfg: NoiseConfig, initial: Ket | None = None) -> np.ndarray:
    """Exact channel composition on |initial><initial| (default |0..0>)."""
    n = prep.n_qubits
    if n > MAX_REFERENCE_QUBITS:
        raise ValueError(f"density-matrix reference limited to {MAX_REFERENCE_QUBITS} qubits, got {n}")
    c = decompose(prep)
    v = (initial or Ket.zero(n)).amplitudes
    rho = np.outer(v, v.conj())
    for op in c.ops:
        rho = _left_apply(rho, op, n)
        rho = _left_apply(rho.conj().T, op, n)
        if cfg.epsilon > 0 and len(op.qubits) == 2:
            rho = _depolarize(rho, op.qubits, cfg.epsilon, n)
    return rho


# --- spectrum study ------------------------------------------------------------


@dataclass(frozen=True)
class NoiseStudyRow:
    epsilon: float
    x_peak: float
    height: float
    height_stderr: float


def noisy_spectrum_study(amp, cfg, eps_list, *, trajectories: int = 1000, grid=None, target_x: float | None = None):
    """One spectrum per epsilon on a common grid plus an (eps, x_peak, height) table.

    ``target_x`` (radians, any branch) picks which peak is tracked; by default the
    tallest non-central peak. A tracked peak that has vanished (no local maximum
    above the floor within TRACK_RADIUS widths of target_x) gives x_peak = nan
    and the height of Re S at target_x.
    """
    from dataclasses import replace

    from .acquire import acquire_series
    from .spectrum import DEFAULT_GRID, compute_spectrum, find_peaks, wrap

    grid = grid or DEFAULT_GRID
    spectra, rows = [], []
    for eps in eps_list:
        noise = None if eps == 0 else NoiseConfig(eps, trajectories, cfg.seed)
        series = acquire_series(amp, replace(cfg, noise=noise))
        spec = compute_spectrum(series, *grid)
        peaks = find_peaks(spec, exclude_zero=series.config.mode == "direct_probability", allow_empty=True)
        if target_x is not None:
            radius = TRACK_RADIUS * np.sqrt(2) * series.config.window.a
            peaks = [p for p in peaks if abs(_circ(p.x_peak - wrap(target_x))) <= radius]
            peaks.sort(key=lambda p: abs(_circ(p.x_peak - wrap(target_x))))
        spectra.append(spec)
        if not peaks:
            # the tracked peak no longer rises above the floor near its noiseless position
            x = float(wrap(target_x)) if target_x is not None else float("nan")
            h = float(spec.evaluate([x])[0].real) if target_x is not None else float("nan")
            rows.append(NoiseStudyRow(float(eps), float("nan"), h, peak_height_stderr(series, x)))
            continue
        best = peaks[0]
        rows.append(NoiseStudyRow(float(eps), best.x_peak, best.height, peak_height_stderr(series, best.x_peak)))
    return spectra, rows


def peak_height_stderr(series, x: float) -> float:
    """Standard error of Re S(x) across noise trajectories (0 for noiseless series)."""
    traj = series.trajectory_raw
    if traj is None or traj.shape[0] < 2:
        return 0.0
    w = series.config.window.weight(series.t)
    per_traj = (traj * w) @ np.exp(1j * series.t * x)
    return float(per_traj.real.std(ddof=1) / np.sqrt(traj.shape[0]))


def _circ(d: float) -> float:
    return (d + np.pi) % (2 * np.pi) - np.pi


def write_noise_table(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "x_peak", "height", "height_stderr"])
        for r in rows:
            w.writerow([f"{r.epsilon:.17g}", f"{r.x_peak:.17g}", f"{r.height:.17g}", f"{r.height_stderr:.17g}"])
    return path
