"""Experiment runner: resolves configs, runs the figure studies, writes CSV/JSON plus a manifest."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .acquire import AcquisitionConfig, WindowParams, acquire_series, write_series_csv
from .bounds import bounds_report, optimal_magnifications
from .grover import build_amplifier, random_pair, rotated_pair
from .noise import noisy_spectrum_study, write_noise_table
from .observable import PauliString, correlated_pair_state, estimate_pauli_term, pauli_phi_prep
from .spectrum import (
    DEFAULT_STEP,
    TWO_PI,
    _circ,
    compute_spectrum,
    find_peaks,
    ladder_refine,
    phase_factor,
    wrap,
    write_peaks_json,
    write_spectrum_csv,
)

OUTPUT_ROOT_ENV = "FQAE_OUTPUT_ROOT"
EXPERIMENTS = (
    "fig3_amplitude_sweep",
    "fig4_random_states",
    "fig5_pauli_observable",
    "fig6_cutoff_sweep",
    "fig7_shot_noise",
    "fig8_circuit_noise",
    "custom",
)
ALIASES = {name.split("_", 1)[0]: name for name in EXPERIMENTS}
A_NARROW = 1 / (20 * np.sqrt(2))
A_WIDE = 1 / (10 * np.sqrt(2))


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Every pipeline knob. ``None`` fields take the experiment's default in :func:`resolve`."""

    experiment: str
    theta: float | None = None
    n_qubits: int | None = None
    pair_seed: int | None = None
    prep_depth: int | None = None
    n_pairs: int | None = None
    mode: str | None = None
    initial_state_mode: str | None = None
    m_values: tuple[int, ...] | None = None
    a: float | None = None
    T: int | None = None
    T_values: tuple[int, ...] | None = None
    grid: tuple[float, float, float] | None = None
    n_shot: int | None = None
    imag_mode: str | None = None
    repetitions: int | None = None
    eps_list: tuple[float, ...] | None = None
    trajectories: int | None = None
    target_x: float | None = None
    pauli: str | None = None
    seed: int | None = None
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in d:
            raise ConfigError("config needs an 'experiment' key")
        d = dict(d)
        d["experiment"] = ALIASES.get(d["experiment"], d["experiment"])
        for key in ("m_values", "T_values", "grid", "eps_list"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(self).items()}


_DEFAULTS = {
    "fig3_amplitude_sweep": dict(
        theta=0.6, n_qubits=4, pair_seed=3, prep_depth=8, mode="exact_overlap", initial_state_mode="psi_default",
        m_values=tuple(range(2, 13)), a=A_NARROW, T=60,
    ),
    "fig4_random_states": dict(
        n_qubits=4, pair_seed=2024, prep_depth=8, n_pairs=6, mode="exact_overlap", initial_state_mode="psi_default",
        m_values=(1, 2, 4, 8, 10), a=A_NARROW, T=60,
    ),
    "fig5_pauli_observable": dict(
        theta=0.595, n_qubits=6, pair_seed=5, prep_depth=4, mode="direct_probability", initial_state_mode="psi_default",
        m_values=tuple(range(-1, 15)), a=A_NARROW, T=60, pauli="IIIIZZ",
    ),
    "fig6_cutoff_sweep": dict(
        theta=0.6, n_qubits=4, pair_seed=3, prep_depth=8, mode="exact_overlap", initial_state_mode="y_minus_exact",
        m_values=(1,), a=A_WIDE, T_values=(20, 10, 5, 2, 1),
    ),
    "fig7_shot_noise": dict(
        theta=1.5, n_qubits=2, pair_seed=7, prep_depth=2, mode="hadamard_test", initial_state_mode="y_minus_exact",
        m_values=tuple(range(1, 25)), a=A_WIDE, T=1, n_shot=100, imag_mode="infer", repetitions=100,
    ),
    "fig8_circuit_noise": dict(
        n_qubits=4, pair_seed=11, prep_depth=0, mode="direct_probability", initial_state_mode="psi_default",
        m_values=(5,), a=A_NARROW, T=40, eps_list=(0.0, 1e-3, 5e-3, 1e-2), trajectories=1000, target_x=26.575,
    ),
    "custom": dict(
        theta=0.6, n_qubits=3, pair_seed=0, prep_depth=4, mode="exact_overlap", initial_state_mode="psi_default",
        m_values=(1, 2, 4, 8), a=A_NARROW, T=60,
    ),
}
_COMMON = dict(grid=(0.0, TWO_PI, DEFAULT_STEP), n_shot=0, imag_mode="measure", seed=0, repetitions=1)


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs"))


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill defaults and validate. Raises ConfigError."""
    cfg = replace(cfg, experiment=ALIASES.get(cfg.experiment, cfg.experiment))
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    base = {**_COMMON, **_DEFAULTS[cfg.experiment]}
    fill = {k: v for k, v in base.items() if getattr(cfg, k) is None}
    cfg = replace(cfg, **fill)
    if cfg.output_dir is None:
        cfg = replace(cfg, output_dir=str(output_root() / cfg.experiment))
    if cfg.experiment == "fig8_circuit_noise" and cfg.theta is None:
        # the tracked peak 4 m theta sits on target_x without wrapping
        cfg = replace(cfg, theta=cfg.target_x / (phase_factor(cfg.mode) * cfg.m_values[0]))
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig):
    def need(ok, msg):
        if not ok:
            raise ConfigError(msg)

    need(cfg.a is not None and 0 < cfg.a < 1, f"a must lie in (0, 1), got {cfg.a}")
    need(cfg.m_values and all(int(m) == m for m in cfg.m_values), "m_values must be a nonempty list of integers")
    need(cfg.n_qubits >= 1, "n_qubits must be >= 1")
    need(cfg.n_shot >= 0, "n_shot must be >= 0")
    need(cfg.repetitions >= 1, "repetitions must be >= 1")
    x0, x1, step = cfg.grid
    need(step > 0 and x1 > x0, "grid must be (x_min, x_max, step) with x_max > x_min and step > 0")
    if cfg.T is not None:
        need(cfg.T >= 0, "T must be >= 0")
    if cfg.theta is not None:
        need(0 < cfg.theta < np.pi / 2, f"theta must lie strictly inside (0, pi/2), got {cfg.theta}")
    if cfg.experiment == "fig6_cutoff_sweep":
        need(cfg.T_values and all(T >= 1 for T in cfg.T_values), "T_values must be positive")
    if cfg.experiment == "fig8_circuit_noise":
        need(cfg.eps_list and all(0 <= e <= 1 for e in cfg.eps_list), "eps_list entries must lie in [0, 1]")
        need(cfg.trajectories >= 1, "trajectories must be >= 1")
    if cfg.pauli is not None:
        need(len(cfg.pauli) == cfg.n_qubits and not set(cfg.pauli) - set("IXYZ"), "pauli must be an IXYZ word of length n_qubits")
    try:
        _acq(cfg, cfg.m_values[0])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _acq(cfg: ExperimentConfig, m: int, **kw) -> AcquisitionConfig:
    base = dict(
        mode=cfg.mode, m=int(m), T=cfg.T if cfg.T is not None else 1, window=WindowParams(cfg.a), n_shot=cfg.n_shot,
        seed=cfg.seed, initial_state_mode=cfg.initial_state_mode, imag_mode=cfg.imag_mode,
    )
    base.update(kw)
    return AcquisitionConfig(**base)


# --- manifest -------------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    version: str
    started: str
    finished: str = ""
    artifacts: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, path: Path):
        data = Path(path).read_bytes()
        self.artifacts.append({"path": Path(path).name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})

    def write(self, out_dir: Path) -> Path:
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _write_rows(path: Path, header: list[str], rows) -> Path:
    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.17g}"
        return str(v)

    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return Path(path)


def _emit_spectrum(man: RunManifest, out: Path, tag: str, spec, peaks):
    man.add(write_spectrum_csv(spec, out / f"spectrum_{tag}.csv"))
    man.add(write_peaks_json(peaks, out / f"peaks_{tag}.json"))


def _tag(m: int) -> str:
    return f"m{m}" if m >= 0 else f"mneg{-m}"


def _nearest(peaks, target: float):
    return min(peaks, key=lambda p: abs(_circ(p.x_peak - wrap(target))))


# --- experiments -------------------------------------------------------------------


def _fig3(cfg, out, man):
    psi, phi = rotated_pair(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth)
    amp = build_amplifier(psi, phi)
    c = phase_factor(cfg.mode)
    rows = []
    for m in cfg.m_values:
        spec = compute_spectrum(acquire_series(amp, _acq(cfg, m)), *cfg.grid)
        peaks = find_peaks(spec, exclude_zero=not _acq(cfg, m).overlap)
        target = c * m * cfg.theta
        best = _nearest(peaks, target)
        _emit_spectrum(man, out, _tag(m), spec, peaks)
        rows.append((m, best.x_peak, float(wrap(target)), abs(_circ(best.x_peak - target)), best.height))
    man.add(_write_rows(out / "summary.csv", ["m", "x_peak", "x_expected", "abs_error", "height"], rows))
    return {"max_abs_error": max(r[3] for r in rows)}


def _fig4(cfg, out, man):
    ss = np.random.SeedSequence(cfg.pair_seed).generate_state(cfg.n_pairs)
    rows = []
    for k, s in enumerate(ss):
        psi, phi = random_pair(cfg.n_qubits, int(s), cfg.prep_depth)
        amp = build_amplifier(psi, phi)
        last = []
        res = ladder_refine(amp, cfg.m_values, _acq(cfg, cfg.m_values[0]), grid=cfg.grid, series_hook=last.append)
        spec = compute_spectrum(last[-1], *cfg.grid)
        _emit_spectrum(man, out, f"pair{k}_m{cfg.m_values[-1]}", spec, find_peaks(spec))
        exact = amp.theta_true
        rows.append((k, int(s), exact, res.theta, np.cos(exact) ** 2, np.cos(res.theta) ** 2, abs(res.theta - exact)))
    man.add(_write_rows(out / "summary.csv", ["pair", "seed", "theta_exact", "theta_hat", "amplitude_exact", "amplitude_hat", "abs_error"], rows))
    return {"max_theta_error": max(r[6] for r in rows), "max_amplitude_error": max(abs(r[4] - r[5]) for r in rows)}


def _fig5(cfg, out, man):
    psi = correlated_pair_state(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth)
    p = PauliString(cfg.pauli)
    amp = build_amplifier(psi, pauli_phi_prep(psi, p))
    rows = []
    for m in cfg.m_values:
        spec = compute_spectrum(acquire_series(amp, _acq(cfg, m)), *cfg.grid)
        everything = find_peaks(spec, allow_empty=True)
        central = any(abs(_circ(q.x_peak)) <= 3 * cfg.a for q in everything)
        target = 4 * m * cfg.theta
        if m == 0:
            best = _nearest(everything, 0.0)
            kept = everything
        else:
            kept = find_peaks(spec, exclude_zero=True)
            best = _nearest(kept, target)
        _emit_spectrum(man, out, _tag(m), spec, kept)
        rows.append((m, best.x_peak, float(wrap(target)), abs(_circ(best.x_peak - target)), int(central)))
    est = estimate_pauli_term(psi, p, _acq(cfg, max(cfg.m_values)), grid=cfg.grid)
    man.add(_write_rows(out / "summary.csv", ["m", "x_peak", "x_expected", "abs_error", "central_peak"], rows))
    return {
        "max_abs_error": max(r[3] for r in rows),
        "expectation_hat": est.expectation,
        "expectation_exact": p.expectation(psi.state()),
    }


def _fig6(cfg, out, man):
    psi, phi = rotated_pair(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth)
    amp = build_amplifier(psi, phi)
    m = cfg.m_values[0]
    rows = []
    for T in cfg.T_values:
        spec = compute_spectrum(acquire_series(amp, _acq(cfg, m, T=T)), *cfg.grid)
        peaks = find_peaks(spec)
        best = _nearest(peaks, phase_factor(cfg.mode) * m * cfg.theta)
        _emit_spectrum(man, out, f"T{T}", spec, peaks)
        rows.append((T, best.x_peak, best.height, bounds_report(cfg.a, T).cutoff_bound))
    man.add(_write_rows(out / "summary.csv", ["T", "x_peak", "height", "cutoff_bound"], rows))
    xs = [r[1] for r in rows]
    return {"x_spread": max(xs) - min(xs), "heights": [r[2] for r in rows]}


def peak_spread(amp, cfg: ExperimentConfig, m: int) -> tuple[float, np.ndarray]:
    """Std of the tallest-peak position over seeded repetitions (offsets taken around the true peak)."""
    target = phase_factor(cfg.mode) * m * cfg.theta
    offsets = []
    for r in range(cfg.repetitions):
        seed = int(np.random.SeedSequence([cfg.seed, m, r]).generate_state(1)[0])
        spec = compute_spectrum(acquire_series(amp, _acq(cfg, m, seed=seed)), *cfg.grid)
        offsets.append(_circ(find_peaks(spec)[0].x_peak - target))
    offsets = np.asarray(offsets)
    return float(offsets.std(ddof=1)) if offsets.size > 1 else 0.0, offsets


def _fig7(cfg, out, man):
    psi, phi = rotated_pair(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth)
    amp = build_amplifier(psi, phi)
    ranked = {c.m: c for c in optimal_magnifications(cfg.theta, max(cfg.T, 1), max(cfg.m_values))}
    rows = []
    for m in cfg.m_values:
        spread, _ = peak_spread(amp, cfg, m)
        cand = ranked[m]
        rows.append((m, cand.N, cand.residual, spread))
    man.add(_write_rows(out / "summary.csv", ["m", "N", "residual", "peak_spread"], rows))
    best = min(rows, key=lambda r: r[2])
    worst = max(rows, key=lambda r: r[2])
    return {"best_m": best[0], "best_spread": best[3], "worst_m": worst[0], "worst_spread": worst[3]}


def _fig8(cfg, out, man):
    psi, phi = rotated_pair(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth)
    amp = build_amplifier(psi, phi)
    m = cfg.m_values[0]
    spectra, rows = noisy_spectrum_study(
        amp, _acq(cfg, m), cfg.eps_list, trajectories=cfg.trajectories, grid=cfg.grid, target_x=cfg.target_x
    )
    for eps, spec in zip(cfg.eps_list, spectra):
        man.add(write_spectrum_csv(spec, out / f"spectrum_eps{eps:g}.csv"))
    man.add(write_noise_table(rows, out / "summary.csv"))
    x0 = rows[0].x_peak
    return {
        # nan when any tracked peak vanished
        "max_shift": float(np.max([abs(_circ(r.x_peak - x0)) for r in rows])),
        "two_qubit_gates_per_step": amp.circuit.two_qubit_gate_count * m,
    }


def _custom(cfg, out, man):
    psi, phi = rotated_pair(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth)
    amp = build_amplifier(psi, phi)
    series = []
    res = ladder_refine(amp, cfg.m_values, _acq(cfg, cfg.m_values[0]), grid=cfg.grid, series_hook=series.append)
    for s in series:
        spec = compute_spectrum(s, *cfg.grid)
        _emit_spectrum(man, out, _tag(s.config.m), spec, find_peaks(spec, exclude_zero=not s.config.overlap, allow_empty=True))
        man.add(write_series_csv(s, out / f"series_{_tag(s.config.m)}.csv"))
    rows = [(r.m, r.x_peak, r.theta, r.lo, r.hi) for r in res.rungs]
    man.add(_write_rows(out / "summary.csv", ["m", "x_peak", "theta", "lo", "hi"], rows))
    return {"theta_hat": res.theta, "amplitude_hat": float(np.cos(res.theta) ** 2), "theta_exact": amp.theta_true}


_RUNNERS = {
    "fig3_amplitude_sweep": _fig3,
    "fig4_random_states": _fig4,
    "fig5_pauli_observable": _fig5,
    "fig6_cutoff_sweep": _fig6,
    "fig7_shot_noise": _fig7,
    "fig8_circuit_noise": _fig8,
    "custom": _custom,
}


def run_experiment(cfg: ExperimentConfig) -> RunManifest:
    """Resolve ``cfg``, run it and write every artifact plus manifest.json into its output_dir."""
    cfg = resolve(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = RunManifest(cfg.to_dict(), __version__, _now())
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    man.add(out / "config.json")
    man.summary = _RUNNERS[cfg.experiment](cfg, out, man)
    man.finished = _now()
    man.write(out)
    return man
