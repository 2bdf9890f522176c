"""Two-qubit gate budget and peak drift of the circuit-noise study over a fine epsilon sweep.

Prints, for the default circuit-noise configuration, how many noisy two-qubit
gates one time step of the signal costs and how the tracked spectral peak moves
and shrinks as the depolarizing strength grows.

Usage: python scripts/noise_budget.py [--eps 0,2e-4,5e-4,1e-3,2e-3,5e-3,1e-2] [--trajectories 1000]
"""
from __future__ import annotations

import argparse

import numpy as np

from fourier_qae.acquire import AcquisitionConfig, WindowParams
from fourier_qae.grover import build_amplifier, rotated_pair
from fourier_qae.harness import ExperimentConfig, resolve
from fourier_qae.noise import decompose, noisy_spectrum_study


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eps", default="0,2e-4,5e-4,1e-3,2e-3,5e-3,1e-2")
    p.add_argument("--trajectories", type=int, default=1000)
    args = p.parse_args(argv)
    eps = [float(v) for v in args.eps.split(",")]

    cfg = resolve(ExperimentConfig("fig8_circuit_noise", output_dir="unused"))
    amp = build_amplifier(*rotated_pair(cfg.n_qubits, cfg.theta, cfg.pair_seed, cfg.prep_depth))
    m = cfg.m_values[0]
    per_amp = decompose(amp.circuit).two_qubit_gate_count
    print(f"theta = {cfg.theta}, m = {m}, T = {cfg.T}, a = {cfg.a:.5f}")
    print(f"two-qubit gates per amplifier: {per_amp}; per time step (m amplifiers): {per_amp * m}")
    print(f"deepest signal circuit (t = T): {per_amp * m * cfg.T} noisy two-qubit gates")

    acq = AcquisitionConfig(cfg.mode, m, cfg.T, WindowParams(cfg.a))
    _, rows = noisy_spectrum_study(amp, acq, eps, trajectories=args.trajectories, grid=cfg.grid, target_x=cfg.target_x)
    x0 = rows[0].x_peak
    print(f"{'epsilon':>9} {'x_peak':>10} {'shift':>10} {'height':>9} {'stderr':>8} {'survival/step':>14}")
    for r in rows:
        shift = abs((r.x_peak - x0 + np.pi) % (2 * np.pi) - np.pi)
        survive = (1 - r.epsilon) ** (per_amp * m)
        print(f"{r.epsilon:9.1e} {r.x_peak:10.5f} {shift:10.2e} {r.height:9.3f} {r.height_stderr:8.3f} {survive:14.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
