"""Command-line interface: ``fourier-qae {estimate,observable,reproduce,bounds,validate}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .acquire import MODES, AcquisitionConfig, WindowParams
from .bounds import bounds_report
from .grover import StatePrep, random_prep, rotated_pair
from .harness import ALIASES, EXPERIMENTS, ConfigError, ExperimentConfig, resolve, run_experiment
from .observable import ObservableError, ObservableSpec, estimate_observable
from .spectrum import TWO_PI

log = logging.getLogger("fourier_qae")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


# flag name -> ExperimentConfig field
_SHARED = {
    "theta": float,
    "n_qubits": int,
    "pair_seed": int,
    "prep_depth": int,
    "a": float,
    "T": int,
    "n_shot": int,
    "seed": int,
    "trajectories": int,
    "repetitions": int,
}


def _add_pipeline_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields; flags override it")
    for name, typ in _SHARED.items():
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, default=None)
    p.add_argument("--m-schedule", "--m-values", dest="m_values", type=_ints, default=None, help="e.g. 1,2,4,8")
    p.add_argument("--T-values", dest="T_values", type=_ints, default=None)
    p.add_argument("--eps", dest="eps_list", type=_floats, default=None, help="depolarizing strengths, e.g. 0,1e-3")
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--mode", choices=("exact", *MODES), default=None, help="'exact' is shorthand for exact_overlap")
    p.add_argument("--initial-state", dest="initial_state_mode", default=None)
    p.add_argument("--imag-mode", dest="imag_mode", choices=("measure", "infer"), default=None)
    p.add_argument("--out", dest="output_dir", default=None)


def _config_from(args, experiment: str) -> ExperimentConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    base["experiment"] = experiment
    for key in (*_SHARED, "m_values", "T_values", "eps_list", "initial_state_mode", "imag_mode", "output_dir"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    if getattr(args, "mode", None):
        base["mode"] = "exact_overlap" if args.mode == "exact" else args.mode
    if getattr(args, "grid_step", None):
        base["grid"] = (0.0, TWO_PI, args.grid_step)
    return ExperimentConfig.from_dict(base)


def cmd_estimate(args) -> int:
    cfg = _config_from(args, "custom")
    man = run_experiment(cfg)
    s = man.summary
    print(f"theta_hat = {s['theta_hat']:.10f}")
    print(f"amplitude_hat = {s['amplitude_hat']:.10f}")
    print(f"theta_exact = {s['theta_exact']:.10f}")
    print(f"outputs: {man.config['output_dir']}")
    return 0


def cmd_observable(args) -> int:
    try:
        obs = ObservableSpec.parse(Path(args.file).read_text())
    except OSError as exc:
        raise ConfigError(str(exc)) from exc
    n = obs.n_qubits
    psi = StatePrep(random_prep(n, args.state_seed, args.depth).circuit, f"random(seed={args.state_seed})")
    mode = "exact_overlap" if args.mode == "exact" else args.mode
    cfg = AcquisitionConfig(mode, args.m, args.T, WindowParams(args.a), n_shot=args.n_shot, seed=args.seed)
    est = estimate_observable(psi, obs, cfg)
    exact = float(np.vdot(psi.state().amplitudes, obs.matrix() @ psi.state().amplitudes).real)
    for c, term in est.terms:
        print(f"{c:+.6g} {term.word}: {term.expectation:.10f}")
    print(f"estimate = {est.value:.10f}")
    print(f"exact = {exact:.10f}")
    return 0


def cmd_reproduce(args) -> int:
    name = ALIASES.get(args.figure, args.figure)
    cfg = _config_from(args, name)
    man = run_experiment(cfg)
    print(json.dumps({"output_dir": man.config["output_dir"], "summary": man.summary}, indent=2, default=float))
    return 0


def cmd_bounds(args) -> int:
    print(bounds_report(args.a, args.T, args.eps_c or ()).to_json())
    return 0


def cmd_validate(args) -> int:
    from .validation import run_validation

    results = run_validation(seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fourier-qae", description="Fourier-sum amplitude and observable estimation")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate theta for a rotated state pair")
    _add_pipeline_flags(est)
    est.set_defaults(func=cmd_estimate)

    obs = sub.add_parser("observable", help="estimate sum_i c_i <P_i> on a seeded random state")
    obs.add_argument("file", help="one 'coefficient PAULIWORD' per line")
    obs.add_argument("--state-seed", type=int, default=0)
    obs.add_argument("--depth", type=int, default=4)
    obs.add_argument("--m", type=int, default=8)
    obs.add_argument("--T", type=int, default=60)
    obs.add_argument("--a", type=float, default=1 / (20 * np.sqrt(2)))
    obs.add_argument("--n-shot", type=int, default=0)
    obs.add_argument("--seed", type=int, default=0)
    obs.add_argument("--mode", choices=("exact", *MODES), default="direct_probability")
    obs.set_defaults(func=cmd_observable)

    rep = sub.add_parser("reproduce", help="run one figure study")
    rep.add_argument("figure", choices=sorted({*EXPERIMENTS, *ALIASES}))
    _add_pipeline_flags(rep)
    rep.set_defaults(func=cmd_reproduce)

    bnd = sub.add_parser("bounds", help="cutoff error bounds and minimal T")
    bnd.add_argument("--a", type=float, required=True)
    bnd.add_argument("--T", type=int, required=True)
    bnd.add_argument("--eps-c", type=_floats, default=None)
    bnd.set_defaults(func=cmd_bounds)

    val = sub.add_parser("validate", help="run the oracle equivalence checks")
    val.add_argument("--seed", type=int, default=0)
    val.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ObservableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"pipeline error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
