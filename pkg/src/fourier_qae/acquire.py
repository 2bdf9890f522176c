"""Signal acquisition: f(t) = exp(-a^2 t^2) * g(t) for integer t in [-T, T].

g(t) is the overlap <psi0|A^{mt}|psi0> (``exact_overlap`` / ``hadamard_test``)
or the return probability |<psi0|A^{mt}|psi0>|^2 (``direct_probability``).
Only t >= 0 is sent to the simulator by default; negative t follow from
Hermitian (overlap) or even (probability) symmetry.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .grover import Amplifier, StatePrep, power_sequence, subspace_basis
from .noise import NoiseConfig, decompose, run_noisy_batch
from .statevec import H, SDG, Circuit, Ket, adjoint, apply_circuit, sample_bitstrings, u1

MODES = ("exact_overlap", "hadamard_test", "direct_probability")
INITIAL_STATES = ("psi_default", "eq9_exact", "y_minus_exact")
IMAG_MODES = ("measure", "infer")


class AcquisitionError(ValueError):
    pass


@dataclass(frozen=True)
class WindowParams:
    a: float

    def __post_init__(self):
        if not 0 < self.a < 1:
            raise AcquisitionError(f"window width a must lie in (0, 1), got {self.a}")

    def weight(self, t):
        return np.exp(-((self.a * np.asarray(t, dtype=float)) ** 2))


@dataclass(frozen=True)
class AcquisitionConfig:
    mode: str
    m: int
    T: int
    window: WindowParams
    n_shot: int = 0  # per circuit; 0 = exact expectation values
    seed: int | None = 0
    initial_state_mode: str = "psi_default"
    noise: NoiseConfig | None = None
    # how Im<psi0|A^k|psi0> is obtained in hadamard_test mode with shots:
    # "measure" runs the S^dag circuit; "infer" keeps only its sign and takes
    # the magnitude sqrt(1 - alpha^2) from the real-part estimate
    imag_mode: str = "measure"

    def __post_init__(self):
        if self.mode not in MODES:
            raise AcquisitionError(f"unknown mode {self.mode!r}")
        if self.initial_state_mode not in INITIAL_STATES:
            raise AcquisitionError(f"unknown initial state mode {self.initial_state_mode!r}")
        if self.imag_mode not in IMAG_MODES:
            raise AcquisitionError(f"unknown imag mode {self.imag_mode!r}")
        if int(self.m) != self.m:
            raise AcquisitionError("m must be an integer")
        if self.T < 0:
            raise AcquisitionError("T must be >= 0")
        if self.n_shot < 0:
            raise AcquisitionError("n_shot must be >= 0")
        if self.n_shot > 0 and self.mode != "exact_overlap" and self.seed is None:
            raise AcquisitionError("sampled acquisition needs a seed")
        if self.mode == "direct_probability" and self.initial_state_mode == "y_minus_exact":
            raise AcquisitionError("direct_probability pairs only with psi_default or eq9_exact")

    @property
    def overlap(self) -> bool:
        return self.mode != "direct_probability"


@dataclass(frozen=True)
class SignalSample:
    t: int
    raw: complex
    windowed: complex


@dataclass(frozen=True, eq=False)
class SignalSeries:
    config: AcquisitionConfig
    samples: tuple[SignalSample, ...]
    # per-t standard error of raw from noise trajectories (None when noiseless)
    raw_stderr: np.ndarray | None = field(default=None, repr=False)
    # per-trajectory raw values, shape (trajectories, len(samples)); noisy runs only
    trajectory_raw: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples], dtype=int)

    @cached_property
    def raw(self) -> np.ndarray:
        return np.array([s.raw for s in self.samples], dtype=complex)

    @cached_property
    def windowed(self) -> np.ndarray:
        return np.array([s.windowed for s in self.samples], dtype=complex)

    def value(self, t: int) -> complex:
        return self.samples[int(np.flatnonzero(self.t == t)[0])].raw


def _make_series(cfg: AcquisitionConfig, ts, raws, stderr=None, traj=None) -> SignalSeries:
    ts = [int(t) for t in ts]
    w = cfg.window.weight(ts)
    samples = tuple(SignalSample(t, complex(r), complex(r) * float(wt)) for t, r, wt in zip(ts, raws, w))
    return SignalSeries(cfg, samples, stderr, traj)


def _zigzag(t: int) -> int:
    return 2 * t if t >= 0 else -2 * t - 1


def sample_rng(seed: int, t: int, channel: int = 0) -> np.random.Generator:
    """Independent stream per (seed, t, circuit) so results do not depend on evaluation order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, _zigzag(int(t)), channel]))


# --- initial states -----------------------------------------------------------


def initial_ket(amp: Amplifier, mode: str) -> Ket:
    if mode == "psi_default":
        return amp.psi.state()
    basis = subspace_basis(amp)
    if mode == "eq9_exact":
        return basis.e0
    if mode == "y_minus_exact":
        return basis.y_minus
    raise AcquisitionError(f"unknown initial state mode {mode!r}")


def _as_ket(state) -> Ket:
    return state.state() if isinstance(state, StatePrep) else state


# --- single-point estimators ------------------------------------------------------


def _ancilla_zero_probability(joint: np.ndarray, n_sys: int, phase_shift: bool) -> np.ndarray:
    """P(ancilla = 0) after optional S^dag and a final H on the top qubit.

    ``joint`` holds (anc=0 block, anc=1 block) along its last axis, after the
    initial H and the controlled power.
    """
    d = 1 << n_sys
    a0, a1 = joint[..., :d], joint[..., d:]
    if phase_shift:
        a1 = -1j * a1
    out0 = (a0 + a1) / np.sqrt(2)
    return np.sum(np.abs(out0) ** 2, axis=-1)


def _hadamard_joint(v0: np.ndarray) -> np.ndarray:
    return np.concatenate([v0, v0]) / np.sqrt(2)


def _sampled_zero_fraction(joint: np.ndarray, n_sys: int, phase_shift: bool, shots: int, rng) -> float:
    """Run the final ancilla gates on the full register and sample all qubits."""
    c = Circuit(n_sys + 1, ((u1(SDG, n_sys),) if phase_shift else ()) + (u1(H, n_sys),))
    counts = sample_bitstrings(apply_circuit(Ket(joint), c), shots, rng)
    zeros = sum(k for b, k in counts.items() if b[0] == "0")
    return zeros / shots


def hadamard_test_overlap(amp: Amplifier, state_prep, power: int, shots: int, seed: int, *, imag_mode: str = "measure") -> complex:
    """alpha_hat + i beta_hat with `shots` ancilla measurements per circuit."""
    if shots < 1:
        raise AcquisitionError("shots must be >= 1")
    amp.check_power(power)
    v0 = _as_ket(state_prep).amplitudes
    n = amp.n_qubits
    cu = amp.controlled_unitary if power >= 0 else amp.controlled_unitary.conj().T
    joint = np.linalg.matrix_power(cu, abs(power)) @ _hadamard_joint(v0)
    p_re = _sampled_zero_fraction(joint, n, False, shots, sample_rng(seed, power, 0))
    p_im = _sampled_zero_fraction(joint, n, True, shots, sample_rng(seed, power, 1))
    alpha, beta = 2 * p_re - 1, 2 * p_im - 1
    if imag_mode == "infer":
        beta = np.copysign(np.sqrt(max(0.0, 1 - alpha**2)), beta)
    return complex(alpha, beta)


def direct_return_probability(amp: Amplifier, state_prep, power: int, shots: int, seed: int) -> float:
    """Fraction of all-zero outcomes after A^power and the inverse preparation."""
    if shots < 1:
        raise AcquisitionError("shots must be >= 1")
    amp.check_power(power)
    rng = sample_rng(seed, power, 0)
    if isinstance(state_prep, StatePrep):
        v = power_sequence(amp, state_prep.state(), power, 2)[-1] if power else state_prep.state().amplitudes
        back = apply_circuit(Ket(v), adjoint(state_prep.circuit))
        counts = sample_bitstrings(back, shots, rng)
        return counts.get("0" * amp.n_qubits, 0) / shots
    v0 = state_prep.amplitudes
    v = power_sequence(amp, state_prep, power, 2)[-1] if power else v0
    p = min(1.0, abs(np.vdot(v0, v)) ** 2)
    return rng.binomial(shots, p) / shots


def coarse_overlap_probability(psi: StatePrep, phi: StatePrep, shots: int = 0, seed: int = 0) -> float:
    """|<psi|phi>|^2 from U_phi^dag U_psi|0> (exact when shots == 0)."""
    back = apply_circuit(psi.state(), adjoint(phi.circuit))
    if shots == 0:
        return float(back.probabilities()[0])
    counts = sample_bitstrings(back, shots, sample_rng(seed, 0, 7))
    return counts.get("0" * psi.n_qubits, 0) / shots


# --- series ---------------------------------------------------------------------


def _powers(cfg: AcquisitionConfig, amp: Amplifier, full: bool) -> np.ndarray:
    ts = np.arange(-cfg.T if full else 0, cfg.T + 1)
    amp.check_power(cfg.m * cfg.T)
    return ts


def _exact_values(amp: Amplifier, cfg: AcquisitionConfig, v0: Ket, ts) -> np.ndarray:
    pos = power_sequence(amp, v0, cfg.m, cfg.T + 1)
    out = {}
    for t in ts:
        if t >= 0:
            vec = pos[t]
        else:
            vec = power_sequence(amp, v0, -cfg.m, -t + 1)[-1]
        ov = np.vdot(v0.amplitudes, vec)
        out[t] = ov if cfg.overlap else abs(ov) ** 2
    vals = np.array([out[t] for t in ts])
    # A^0 = I
    vals[np.asarray(ts) == 0] = 1.0
    return vals


def _sampled_overlap(amp: Amplifier, cfg: AcquisitionConfig, v0: Ket, ts) -> np.ndarray:
    n = amp.n_qubits
    cu = amp.controlled_unitary if cfg.m >= 0 else amp.controlled_unitary.conj().T
    step_f = np.linalg.matrix_power(cu, abs(cfg.m))
    step_b = step_f.conj().T
    start = _hadamard_joint(v0.amplitudes)
    vals = []
    for t in ts:
        if t == 0:
            vals.append(1.0 + 0j)
            continue
        joint = np.linalg.matrix_power(step_f if t > 0 else step_b, abs(int(t))) @ start
        p_re = _sampled_zero_fraction(joint, n, False, cfg.n_shot, sample_rng(cfg.seed, t, 0))
        p_im = _sampled_zero_fraction(joint, n, True, cfg.n_shot, sample_rng(cfg.seed, t, 1))
        alpha, beta = 2 * p_re - 1, 2 * p_im - 1
        if cfg.imag_mode == "infer":
            beta = float(np.copysign(np.sqrt(max(0.0, 1 - alpha**2)), beta))
        vals.append(complex(alpha, beta))
    return np.array(vals)


def _sampled_probability(amp: Amplifier, cfg: AcquisitionConfig, v0: Ket, ts) -> np.ndarray:
    prep = amp.psi if cfg.initial_state_mode == "psi_default" else v0
    vals = []
    for t in ts:
        if t == 0:
            vals.append(1.0)
            continue
        vals.append(direct_return_probability(amp, prep, cfg.m * int(t), cfg.n_shot, _seed_for(cfg, t)))
    return np.array(vals, dtype=complex)


def _seed_for(cfg: AcquisitionConfig, t: int) -> int:
    # direct_return_probability keys its stream by (seed, power); fold t in so
    # different m with equal m*t stay independent
    return int(np.random.SeedSequence([int(cfg.seed), _zigzag(int(t)), abs(cfg.m)]).generate_state(1)[0])


def _noisy_values(amp: Amplifier, cfg: AcquisitionConfig, v0: Ket):
    """Trajectory-averaged signal for t = 0..T; returns (values, stderr, per-trajectory)."""
    noise = cfg.noise
    n = amp.n_qubits
    B = noise.trajectories
    rng = np.random.default_rng(np.random.SeedSequence([noise.seed, abs(cfg.m), 0x5EED]))
    psi_default = cfg.initial_state_mode == "psi_default"
    hadamard = cfg.overlap
    width = n + 1 if hadamard else n
    batch = np.zeros((B, 1 << width), dtype=complex)
    if psi_default:
        batch[:, 0] = 1.0
        run_noisy_batch(batch, decompose(amp.psi.circuit.widen(width)), noise.epsilon, rng)
    else:
        batch[:, : 1 << n] = v0.amplitudes
    if hadamard:
        # the ancilla H is a single-qubit gate: noiseless
        batch = np.concatenate([batch[:, : 1 << n], batch[:, : 1 << n]], axis=1) / np.sqrt(2)
        step = decompose(amp.controlled_circuit())
    else:
        step = decompose(amp.circuit)
    if cfg.m < 0:
        step = adjoint(step)
    unprep = decompose(adjoint(amp.psi.circuit)) if psi_default and not hadamard else None

    per_traj = np.empty((B, cfg.T + 1), dtype=complex)
    for t in range(cfg.T + 1):
        if t > 0:
            for _ in range(abs(cfg.m)):
                run_noisy_batch(batch, step, noise.epsilon, rng)
        if hadamard:
            re = 2 * _ancilla_zero_probability(batch, n, False) - 1
            im = 2 * _ancilla_zero_probability(batch, n, True) - 1
            per_traj[:, t] = re + 1j * im
        elif unprep is not None:
            back = run_noisy_batch(batch.copy(), unprep, noise.epsilon, rng)
            per_traj[:, t] = np.abs(back[:, 0]) ** 2
        else:
            per_traj[:, t] = np.abs(batch @ v0.amplitudes.conj()) ** 2
    mean = per_traj.mean(axis=0)
    stderr = per_traj.std(axis=0, ddof=1) / np.sqrt(B) if B > 1 else np.zeros(cfg.T + 1)
    return mean, np.abs(stderr), per_traj


def _shots_from_expectations(cfg: AcquisitionConfig, exp_vals: np.ndarray) -> np.ndarray:
    """Binomial readout of trajectory-averaged (channel) probabilities."""
    out = []
    for t, v in enumerate(exp_vals):
        if cfg.overlap:
            p_re = np.clip((1 + v.real) / 2, 0, 1)
            p_im = np.clip((1 + v.imag) / 2, 0, 1)
            alpha = 2 * sample_rng(cfg.seed, t, 0).binomial(cfg.n_shot, p_re) / cfg.n_shot - 1
            beta = 2 * sample_rng(cfg.seed, t, 1).binomial(cfg.n_shot, p_im) / cfg.n_shot - 1
            if cfg.imag_mode == "infer":
                beta = float(np.copysign(np.sqrt(max(0.0, 1 - alpha**2)), beta))
            out.append(complex(alpha, beta))
        else:
            p = np.clip(v.real, 0, 1)
            out.append(sample_rng(cfg.seed, t, 0).binomial(cfg.n_shot, p) / cfg.n_shot)
    return np.array(out, dtype=complex)


def acquire_series(amp: Amplifier, cfg: AcquisitionConfig, *, full: bool = False) -> SignalSeries:
    """Acquire f(t) for t in [-T, T].

    With ``full=False`` (default) only t >= 0 is simulated and the rest is filled
    by :func:`symmetrize`; ``full=True`` runs negative powers explicitly.
    """
    ts = _powers(cfg, amp, full)
    v0 = initial_ket(amp, cfg.initial_state_mode)
    if cfg.noise is not None:
        if full:
            raise AcquisitionError("noisy acquisition is only run for t >= 0")
        mean, stderr, traj = _noisy_values(amp, cfg, v0)
        vals = _shots_from_expectations(cfg, mean) if cfg.n_shot > 0 else mean
        if not cfg.overlap:
            vals = vals.real.astype(complex)
        half = _make_series(cfg, ts, vals, stderr, traj)
        return symmetrize(half)
    if cfg.n_shot == 0 or cfg.mode == "exact_overlap":
        vals = _exact_values(amp, cfg, v0, ts)
    elif cfg.mode == "hadamard_test":
        vals = _sampled_overlap(amp, cfg, v0, ts)
    else:
        vals = _sampled_probability(amp, cfg, v0, ts)
    series = _make_series(cfg, ts, vals)
    return series if full else symmetrize(series)


def symmetrize(series: SignalSeries) -> SignalSeries:
    """Fill t < 0 from t > 0: conjugate for overlaps, copy for probabilities."""
    cfg = series.config
    if cfg.mode not in MODES:
        raise AcquisitionError(f"unknown mode {cfg.mode!r}")
    keep = series.t >= 0
    ts = series.t[keep]
    raw = series.raw[keep]
    order = np.argsort(ts)
    ts, raw = ts[order], raw[order]
    neg = np.conj(raw[:0:-1]) if cfg.overlap else raw[:0:-1]
    full_t = np.concatenate([-ts[:0:-1], ts])
    full_raw = np.concatenate([neg, raw])
    stderr = series.raw_stderr
    if stderr is not None:
        s = np.asarray(stderr)[keep][order]
        stderr = np.concatenate([s[:0:-1], s])
    traj = series.trajectory_raw
    if traj is not None:
        tr = np.asarray(traj)[:, keep][:, order]
        tneg = np.conj(tr[:, :0:-1]) if cfg.overlap else tr[:, :0:-1]
        traj = np.concatenate([tneg, tr], axis=1)
    return _make_series(cfg, full_t, full_raw, stderr, traj)


# --- serialization -----------------------------------------------------------------


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def series_metadata(cfg: AcquisitionConfig) -> dict:
    return {
        "mode": cfg.mode,
        "m": cfg.m,
        "T": cfg.T,
        "a": cfg.window.a,
        "n_shot": cfg.n_shot,
        "seed": cfg.seed,
        "epsilon": cfg.noise.epsilon if cfg.noise else 0.0,
        "trajectories": cfg.noise.trajectories if cfg.noise else 0,
        "noise_seed": cfg.noise.seed if cfg.noise else None,
        "initial_state_mode": cfg.initial_state_mode,
        "imag_mode": cfg.imag_mode,
    }


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def write_series_csv(series: SignalSeries, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "raw_re", "raw_im", "windowed_re", "windowed_im"])
        for s in series.samples:
            w.writerow([s.t, _fmt(s.raw.real), _fmt(s.raw.imag), _fmt(s.windowed.real), _fmt(s.windowed.imag)])
    sidecar_path(path).write_text(json.dumps(series_metadata(series.config), indent=2, sort_keys=True) + "\n")
    return path


def read_series_csv(path) -> SignalSeries:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    noise = None
    if meta.get("epsilon", 0.0) > 0 or meta.get("trajectories", 0) > 0:
        noise = NoiseConfig(meta["epsilon"], max(1, meta["trajectories"]), meta.get("noise_seed") or 0)
    cfg = AcquisitionConfig(
        mode=meta["mode"],
        m=meta["m"],
        T=meta["T"],
        window=WindowParams(meta["a"]),
        n_shot=meta["n_shot"],
        seed=meta["seed"],
        initial_state_mode=meta.get("initial_state_mode", "psi_default"),
        noise=noise,
        imag_mode=meta.get("imag_mode", "measure"),
    )
    samples = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            samples.append(
                SignalSample(
                    int(row["t"]),
                    complex(float(row["raw_re"]), float(row["raw_im"])),
                    complex(float(row["windowed_re"]), float(row["windowed_im"])),
                )
            )
    return SignalSeries(cfg, tuple(samples))
