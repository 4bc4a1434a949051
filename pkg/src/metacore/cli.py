"""Command-line entry point.

Subcommands map one-to-one onto the experiment drivers::

    metacore run-lqr            --out results/lqr --tasks 40 --coreset 10
    metacore run-synthetic      --out results/synth --grad-mode oracle
    metacore estimator-diag     --out results/diag --function lqr
    metacore sample-complexity  --out results/sc --fracs 0.5,0.2,0.1
    metacore meta-test          --out results/mt --run results/lqr

Settings resolve in three layers: built-in defaults, then a ``--config``
JSON file keyed by field name, then explicit flags.  Mode lists accept the
short aliases full, unweighted, and random.  Exit codes: 0 success, 2 invalid
configuration or usage, 3 a stability guard tripped, 4 any other recognized
failure (generation, solver, file format).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import (
    ConfigError,
    InstabilityError,
    MetacoreError,
    ProbeInstabilityError,
    StabilityViolation,
)
from .experiments import (
    LqrRunConfig,
    SyntheticRunConfig,
    run_estimator_diagnostic,
    run_lqr_convergence,
    run_meta_test,
    run_sample_complexity,
    run_synthetic_convergence,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STABILITY = 3
EXIT_FAILURE = 4

MODE_ALIASES = {
    "full": "full_pool",
    "unweighted": "unweighted_coreset",
    "random": "random_subset",
}


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _modes(text: str) -> tuple[str, ...]:
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    return tuple(MODE_ALIASES.get(n, n) for n in names)


def _load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _build_config(cls, file_cfg: dict, cli_cfg: dict):
    merged = {**file_cfg, **{k: v for k, v in cli_cfg.items() if v is not None}}
    if "modes" in merged:
        merged["modes"] = tuple(MODE_ALIASES.get(m, m) for m in merged["modes"])
    try:
        return cls(**merged)
    except TypeError as exc:
        known = ", ".join(sorted(cls.__dataclass_fields__))
        raise ConfigError(f"unrecognized setting ({exc}); known fields: {known}") from exc


def _add_common_run_flags(sp) -> None:
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config", help="JSON file with defaults (flags override)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tasks", type=int, dest="m", help="pool size M")
    sp.add_argument("--coreset", type=int, dest="l_size", help="selected subset size L")
    sp.add_argument("--n-samples", type=int, dest="n_s", help="probe pairs per estimate")
    sp.add_argument("--radius", type=float, dest="r", help="probe radius")
    sp.add_argument("--eta-inn", type=float, dest="eta_inn")
    sp.add_argument("--eta-out", type=float, dest="eta_out")
    sp.add_argument("--iters", type=int, dest="n_iters")
    sp.add_argument("--modes", type=_modes,
                    help="training variants (full, coreset, unweighted, random)")
    sp.add_argument("--grad-mode", choices=("zo2p", "oracle"), dest="grad_mode")


def _eps_het_field(args) -> dict:
    eps = getattr(args, "eps_het", None)
    if eps is None:
        return {}
    if len(eps) == 1:
        eps = eps * 4  # one budget shared by A, B, Q, R
    if len(eps) != 4:
        raise ConfigError(f"--eps-het expects one or four numbers, got {eps!r}")
    return {"eps_het": eps}


def _dims_fields(args) -> dict:
    dims = getattr(args, "dims", None)
    if dims is None:
        return {}
    if len(dims) != 2:
        raise ConfigError(f"--dims expects two integers, got {dims!r}")
    return {"d1": dims[0], "d2": dims[1]}


def _lqr_cli_fields(args) -> dict:
    fields = {k: getattr(args, k, None) for k in
              ("seed", "m", "l_size", "n_s", "r", "eta_inn", "eta_out",
               "n_iters", "modes", "grad_mode", "detune")}
    return fields | _eps_het_field(args) | _dims_fields(args)


def _cmd_run_lqr(args) -> int:
    cfg = _build_config(LqrRunConfig, _load_config_file(args.config), _lqr_cli_fields(args))
    out = run_lqr_convergence(args.out, cfg)
    for mode, path in out["csvs"].items():
        print(f"wrote {path}")
    print(f"delta0={out['delta0']:.6g}")
    return EXIT_OK


def _cmd_run_synthetic(args) -> int:
    cli = {k: getattr(args, k, None) for k in
           ("seed", "m", "l_size", "n_s", "r", "eta_inn", "eta_out", "n_iters",
            "modes", "grad_mode", "alpha", "center_radius", "freq_scale",
            "theta0_offset", "curvature_range", "dims")}
    cfg = _build_config(SyntheticRunConfig, _load_config_file(args.config), cli)
    out = run_synthetic_convergence(args.out, cfg)
    for mode, path in out["csvs"].items():
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_estimator_diag(args) -> int:
    kwargs = dict(function=args.function, trials=args.trials, seed=args.seed)
    if args.ns_grid is not None:
        kwargs["n_s_grid"] = args.ns_grid
    if args.r_grid is not None:
        kwargs["r_grid"] = args.r_grid
    kwargs.update(_dims_fields(args))
    out = run_estimator_diagnostic(args.out, **kwargs)
    print(f"wrote {out['csv']}")
    return EXIT_OK


def _cmd_sample_complexity(args) -> int:
    cli = _lqr_cli_fields(args)
    file_cfg = _load_config_file(args.config)
    if cli.get("modes") is None and "modes" not in file_cfg:
        cli["modes"] = ("coreset", "full_pool")
    cfg = _build_config(LqrRunConfig, file_cfg, cli)
    kwargs = {} if args.fracs is None else {"fracs": args.fracs}
    out = run_sample_complexity(args.out, cfg, **kwargs)
    for eps, mode in out["censored"]:
        print(f"warning: threshold {eps:.6g} not reached in mode {mode} "
              "within the iteration budget", file=sys.stderr)
    print(f"wrote {out['csv']} (delta0={out['delta0']:.6g})")
    return EXIT_OK


def _cmd_meta_test(args) -> int:
    out = run_meta_test(args.out, args.run, k_steps=args.k_steps,
                        step_size=args.step_size, n_unseen=args.unseen)
    print(f"wrote {out['csv']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metacore",
        description="coreset-selected meta-training experiments on LQR and "
                    "closed-form task families")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run-lqr", help="gap curves for each training variant")
    _add_common_run_flags(sp)
    sp.add_argument("--eps-het", type=_floats, dest="eps_het",
                    help="heterogeneity budgets: one value or A,B,Q,R")
    sp.add_argument("--dims", type=_ints, help="state,input dimensions d1,d2")
    sp.add_argument("--detune", type=float, help="input-cost detuning of the starting gain")
    sp.set_defaults(func=_cmd_run_lqr)

    sp = sub.add_parser("run-synthetic", help="closed-form family with exact meta-gradient tracking")
    _add_common_run_flags(sp)
    sp.add_argument("--alpha", type=float, help="ripple amplitude")
    sp.add_argument("--center-radius", type=float, dest="center_radius")
    sp.add_argument("--freq-scale", type=float, dest="freq_scale")
    sp.add_argument("--offset", type=float, dest="theta0_offset",
                    help="starting parameter, filled uniformly")
    sp.add_argument("--curvature", type=_floats, dest="curvature_range",
                    help="curvature eigenvalue range lo,hi")
    sp.add_argument("--dims", type=_ints, help="parameter matrix shape p,q")
    sp.set_defaults(func=_cmd_run_synthetic)

    sp = sub.add_parser("estimator-diag", help="estimator error over a (samples, radius) grid")
    sp.add_argument("--out", required=True)
    sp.add_argument("--function", choices=("lqr", "constant"), default="lqr")
    sp.add_argument("--ns-grid", type=_ints, dest="ns_grid")
    sp.add_argument("--r-grid", type=_floats, dest="r_grid")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dims", type=_ints)
    sp.set_defaults(func=_cmd_estimator_diag)

    sp = sub.add_parser("sample-complexity", help="queries to reach gap thresholds")
    _add_common_run_flags(sp)
    sp.add_argument("--eps-het", type=_floats, dest="eps_het")
    sp.add_argument("--dims", type=_ints)
    sp.add_argument("--detune", type=float)
    sp.add_argument("--fracs", type=_floats,
                    help="thresholds as fractions of the initial gap")
    sp.set_defaults(func=_cmd_sample_complexity)

    sp = sub.add_parser("meta-test", help="adaptation on held-out tasks vs a random gain")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--run", required=True,
                    help="directory of a previous run-lqr invocation")
    sp.add_argument("--k-steps", type=int, default=30, dest="k_steps")
    sp.add_argument("--step-size", type=float, default=3e-3, dest="step_size")
    sp.add_argument("--unseen", type=int, default=10)
    sp.set_defaults(func=_cmd_meta_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StabilityViolation, InstabilityError, ProbeInstabilityError) as exc:
        print(f"stability failure: {exc}", file=sys.stderr)
        return EXIT_STABILITY
    except MetacoreError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
