"""``robustmc`` command line: single trials, phase-diagram grids, and the theory validators.

Exit status is 0 on success, 2 on a configuration error, 3 when the solver
fails numerically.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .linalg import SvdError, load_matrix, make_rng
from .operators import ColumnSet, ObservationMask, TangentSpace, project_tangent
from .solver import MODES, SolverConfig
from .synth import SCHEMES, CorruptionScheme, build_instance, sample_batch_replacement, save_instance
from .experiments import AXES, GridSpec, emit, resolve_lambda, run_grid, run_trial
from .theory import (LEMMAS, RULES, CertificateInput, dual_certificate_check, golfing_run, lemma_monte_carlo,
                     orthogonal_corruption_example, random_tangent)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

DEFAULT_RHO_AXIS = tuple(round(0.05 + 0.1 * k, 10) for k in range(10))
DEFAULT_RANK_AXIS = tuple(range(1, 11))
DEFAULT_GAMMA_AXIS = tuple(round(0.025 * (k + 1), 10) for k in range(10))


class ConfigError(ValueError):
    pass


def _axis(text: str) -> tuple[str, tuple[float, ...]]:
    name, sep, values = text.partition("=")
    name = name.strip()
    if not sep or name not in AXES:
        raise argparse.ArgumentTypeError(f"expected NAME=v1,v2,... with NAME in {AXES}, got {text!r}")
    try:
        vals = tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric value in axis {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError(f"axis {name!r} has no values")
    return name, vals


def _add_instance_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--p", type=int, default=80, help="rows")
    sp.add_argument("--n", type=int, default=80, help="columns, clean plus corrupted")
    sp.add_argument("--r", type=int, default=2, help="rank of the clean block")
    sp.add_argument("--rho", type=float, default=0.7, help="observed fraction")
    sp.add_argument("--gamma", type=float, default=0.0, help="corrupted column fraction")
    sp.add_argument("--scheme", choices=SCHEMES, default="single_adversarial")
    sp.add_argument("--magnitude", type=float, default=10.0, help="spike used by single_adversarial")


def _add_solver_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--mode", action="append", choices=MODES, help="solver mode (repeatable)")
    lam = sp.add_mutually_exclusive_group()
    lam.add_argument("--lambda", dest="lam", type=float, help="explicit column-sparse weight")
    lam.add_argument("--lambda-rule", choices=RULES, default="corollary1")
    sp.add_argument("--entry-lambda", dest="entry_lam", type=float, help="weight for entry_sparse mode")
    sp.add_argument("--max-iter", type=int, default=500)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--success-tol", type=float, default=1e-3)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robustmc", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="key=value file overriding the defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("trial", help="solve one synthetic instance and score it")
    _add_instance_flags(sp)
    _add_solver_flags(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--save-instance", type=Path, help="also write the instance to this directory")
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("grid", help="success frequencies over a two-parameter grid")
    _add_instance_flags(sp)
    _add_solver_flags(sp)
    sp.add_argument("--axis1", type=_axis, help="row axis, NAME=v1,v2,... (default depends on scheme)")
    sp.add_argument("--axis2", type=_axis, help="column axis (default rho=0.05,...,0.95)")
    sp.add_argument("--trials", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0, help="base seed")
    sp.add_argument("--workers", type=int, help="processes (default: ROBUSTMC_THREADS or 1)")
    sp.add_argument("--format", choices=("csv", "pgm"), default="csv")
    sp.add_argument("--out", type=Path, help="output file; several modes get a .MODE infix")

    sp = sub.add_parser("lemma", help="Monte-Carlo check of a concentration bound")
    sp.add_argument("--which", choices=LEMMAS, default="L5_inf")
    sp.add_argument("--p", type=int, default=30)
    sp.add_argument("--n1", type=int, default=60)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--m0", type=int, default=900)
    sp.add_argument("--beta", type=float, default=1.5)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("golfing", help="run the golfing recursion on a random tangent target")
    sp.add_argument("--p", type=int, default=40)
    sp.add_argument("--n1", type=int, default=40)
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--batches", type=int, default=6)
    sp.add_argument("--q-frac", type=float, default=0.5, help="batch size as a fraction of p*n1")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", type=Path)

    sp = sub.add_parser("certify", help="check dual-certificate conditions")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--demo", action="store_true", help="the built-in orthogonal-corruption 4x4 instance")
    src.add_argument("--dir", type=Path, help="directory with Q_hat.txt, U_hat.txt, V_hat.txt, C_hat.txt, "
                                              "omega.txt and params.txt")
    sp.add_argument("--lambda", dest="lam", type=float, default=0.4, help="weight for --demo")
    sp.add_argument("--out", type=Path)
    return parser


# -- config files -----------------------------------------------------------

def read_config(path: Path) -> dict[str, str]:
    values = {}
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        values["lam" if key == "lambda" else key] = value.strip()
    return values


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise ConfigError(f"unknown command {command!r}")


def apply_config(parser: argparse.ArgumentParser, command: str, values: dict[str, str]) -> None:
    """Install config values as defaults of ``command`` so explicit flags still win."""
    sp = _subparser(parser, command)
    actions = {a.dest: a for a in sp._actions if a.dest != "help"}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None:
            raise ConfigError(f"config key {key!r} is not an option of {command!r}")
        convert = action.type or str
        try:
            if isinstance(action, argparse._AppendAction):
                value = [convert(v.strip()) for v in raw.split(",") if v.strip()]
            elif isinstance(action, argparse._StoreTrueAction):
                value = raw.lower() in ("1", "true", "yes", "on")
            else:
                value = convert(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"bad config value for {key!r}: {exc}") from None
        choices = action.choices
        items = value if isinstance(value, list) else [value]
        if choices is not None and any(v not in choices for v in items):
            raise ConfigError(f"config value {raw!r} for {key!r} not in {list(choices)}")
        defaults[key] = value
    sp.set_defaults(**defaults)


def parse_args(argv=None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    explicit = args
    apply_config(parser, args.command, read_config(args.config))
    args = parser.parse_args(argv)
    # argparse would append explicit values to a config-supplied list; flags replace it instead
    for action in _subparser(parser, args.command)._actions:
        if isinstance(action, argparse._AppendAction) and getattr(explicit, action.dest) is not None:
            setattr(args, action.dest, getattr(explicit, action.dest))
    return args


# -- subcommands ------------------------------------------------------------

def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iter=args.max_iter, tol=args.tol)


def cmd_trial(args) -> int:
    scheme = CorruptionScheme(args.scheme, args.magnitude)
    inst = build_instance(args.p, args.n, args.r, args.gamma, args.rho, scheme, args.seed)
    if args.save_instance is not None:
        save_instance(inst, args.save_instance)
    base = _solver_config(args)
    lines = []
    status = EXIT_OK
    for mode in args.mode or ["column_sparse"]:
        lam = resolve_lambda(mode, inst, args.lam, args.lambda_rule, args.entry_lam)
        rep = run_trial(inst, replace(base, mode=mode, lam=lam), args.success_tol)
        if rep.reason.startswith("solver_error"):
            status = EXIT_SOLVER
        lines.append(
            f"mode={mode} lambda={lam!r} success={rep.success} clean_rel_error={rep.clean_rel_error!r} "
            f"support_exact={rep.support_exact} colspace_ok={rep.colspace_ok} iterations={rep.iterations} "
            f"converged={rep.converged} wall_time={rep.wall_time:.3f}" + (f" reason={rep.reason}" if rep.reason else "")
        )
    _write("\n".join(lines) + "\n", args.out)
    return status


def cmd_grid(args) -> int:
    axis1 = args.axis1
    if axis1 is None:
        axis1 = ("r", DEFAULT_RANK_AXIS) if args.scheme == "single_adversarial" else ("gamma", DEFAULT_GAMMA_AXIS)
    axis2 = args.axis2 or ("rho", DEFAULT_RHO_AXIS)
    modes = tuple(args.mode or ["column_sparse"])
    fixed = {"p": args.p, "n": args.n, "r": args.r, "rho": args.rho, "gamma": args.gamma,
             "magnitude": args.magnitude}
    spec = GridSpec(axis1, axis2, fixed, trials=args.trials, base_seed=args.seed, modes=modes,
                    scheme=args.scheme, lam=args.lam, lambda_rule=args.lambda_rule, entry_lam=args.entry_lam,
                    success_tol=args.success_tol, solver=_solver_config(args))
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    result = run_grid(spec, workers=args.workers)
    for mode in modes:
        if args.out is None:
            if len(modes) > 1:
                sys.stdout.write(f"# mode={mode}\n")
            sys.stdout.write(emit(result, mode, args.format))
        else:
            path = args.out if len(modes) == 1 else args.out.with_name(f"{args.out.stem}.{mode}{args.out.suffix}")
            emit(result, mode, args.format, path)
    failures = sum(rep.reason.startswith("solver_error") for reps in result.reports.values() for _, rep in reps)
    if failures:
        print(f"warning: {failures} trial(s) hit solver errors and count as failures", file=sys.stderr)
    return EXIT_OK


def cmd_lemma(args) -> int:
    report = lemma_monte_carlo(args.which, args.p, args.n1, args.r, args.m0, args.beta, args.trials, args.seed)
    _write(report.to_csv(), args.out)
    applicable = sum(report.applicable)
    print(f"{args.which}: {report.violations}/{report.trials} violations, "
          f"{report.applicable_violations} among {applicable} trial(s) meeting the precondition",
          file=sys.stderr)
    return EXIT_OK


def cmd_golfing(args) -> int:
    if not 0 < args.q_frac <= 1:
        raise ConfigError("--q-frac must lie in (0, 1]")
    rng = make_rng(args.seed)
    q = math.ceil(args.q_frac * args.p * args.n1)
    T = random_tangent(args.p, args.n1, args.r, rng)
    target = project_tangent(rng.standard_normal((args.p, args.n1)), T)
    batches = sample_batch_replacement(args.p, args.n1, args.batches, q, rng)
    _, trace = golfing_run(target, batches, T, args.p, args.n1, q)
    errors = [float(np.linalg.norm(target))] + trace
    lines = ["step,error"] + [f"{i},{e!r}" for i, e in enumerate(errors)]
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def load_certificate(directory: Path) -> CertificateInput:
    params = read_config(directory / "params.txt")
    try:
        Q = load_matrix(directory / "Q_hat.txt")
        U = load_matrix(directory / "U_hat.txt")
        V = load_matrix(directory / "V_hat.txt")
        C_hat = load_matrix(directory / "C_hat.txt")
        omega = ObservationMask.load(directory / "omega.txt")
        lam = float(params["lam"])
    except KeyError as exc:
        raise ConfigError(f"params.txt is missing {exc}") from None
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    p, n = Q.shape
    members = tuple(int(j) for j in params.get("I0", "").split(",") if j.strip())
    I0 = ColumnSet(n, members)
    n1 = n - len(members)
    clean = ~I0.indicator()
    m = int(params["m"]) if "m" in params else int(np.count_nonzero(omega.array[:, clean]))
    return CertificateInput(Q, TangentSpace(U, V), U @ V.T, C_hat, I0, omega, lam, m, p, n1)


def cmd_certify(args) -> int:
    inp = orthogonal_corruption_example(args.lam) if args.demo else load_certificate(args.dir)
    report = dual_certificate_check(inp)
    lines = ["condition,holds,lhs,rhs,slack"]
    for name, c in report.conditions().items():
        lines.append(f"{name},{int(c.holds)},{c.lhs!r},{c.rhs!r},{c.slack!r}")
    lines.append(f"# all_hold={report.all_hold} strict={report.strict} witness_consistent={report.witness_consistent}")
    _write("\n".join(lines) + "\n", args.out)
    return EXIT_OK


COMMANDS = {"trial": cmd_trial, "grid": cmd_grid, "lemma": cmd_lemma, "golfing": cmd_golfing, "certify": cmd_certify}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except ConfigError as exc:
        print(f"robustmc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except SvdError as exc:
        print(f"robustmc: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"robustmc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
