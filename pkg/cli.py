# cli.py

import sys
import json
import logging
import argparse

from errors import (
    ConfigError,
    DimensionMismatch,
    FunctionSpecError,
    MatrixFileError,
    OperatorError,
    ParamOutOfRange,
    QuadratureBudgetExceeded,
)
from identities import REPORT_COLUMNS
from load_env import load_settings
from loewner_rep import eval_matrix_integral, eval_matrix_spectral, parse_function_spec
from perspective import arithmetic_mean, geometric_mean, perspective, perspective_transpose, relative_entropy
from quadrature import QuadraturePlan
from spd_core import check_same_dim, sym_eig, validate_spd
from util import configure_logging, read_matrix_json, write_csv, write_matrix_json
from verification import (
    CONVERGENCE_COLUMNS,
    DEFAULT_FUNCTIONS,
    RunConfig,
    build_tasks,
    gated_failures,
    run_convergence,
    run_tasks,
    summarize,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIMENSION = 3
EXIT_FAILED = 4

OPERAND_NAMES = ("A", "B", "P", "C", "D", "Q")
EVAL_OPS = ("perspective", "transpose", "gmean", "amean", "entropy", "fn")

###############################################################################
# 1. Arguments
###############################################################################

def _int_list(text):
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")

def _id_list(text):
    return tuple(x.strip() for x in text.split(",") if x.strip())

def parse_arguments(argv=None):
    """
    Parses command-line arguments.

    Returns:
        argparse.Namespace: Parsed arguments; unset options are None so
        profile values can fill them in.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fn", action="append", help="Function spec: power:R, log, affine:A,B or discrete:A,B,[l:w,...]. Repeatable.")
    common.add_argument("--seed", type=int, default=0, help="Base seed of the ensemble.")
    common.add_argument("--dims", type=_int_list, help="Comma-separated matrix sizes.")
    common.add_argument("--trials", type=int, help="Trials per (check, function, dim).")
    common.add_argument("--tol", type=float, help="Identity residual tolerance.")
    common.add_argument("--ineq-tol", type=float, help="Relative Loewner tolerance for inequalities.")
    common.add_argument("--t-order", type=int, help="Nodes of the inner t-rule.")
    common.add_argument("--t-grading", type=int, help="Endpoint grading of the inner t-rule.")
    common.add_argument("--lambda-order", type=int, help="Gauss nodes per λ-panel.")
    common.add_argument("--rel-tol", type=float, help="Relative tolerance of the λ-integral.")
    common.add_argument("--max-panels", type=int, help="λ-panel budget.")
    common.add_argument("--exponent-mode", choices=("corrected", "as_printed"), default="corrected",
                        help="λ-exponent used by the geometric mean differences.")
    common.add_argument("--workers", type=int, help="Worker processes.")
    common.add_argument("--profile", help="Profile name, reads .env.<profile>.")
    common.add_argument("--config", default="config.env", help="Primary config file.")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR.")
    common.add_argument("--report", help="CSV report path.")
    common.add_argument("--dump-config", action="store_true", help="Print the resolved configuration as JSON and exit.")

    parser = argparse.ArgumentParser(description="Noncommutative perspectives: evaluation and identity verification")
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("eval", parents=[common], help="Evaluate a perspective, mean or entropy on matrix files.")
    ev.add_argument("--op", choices=EVAL_OPS, default="perspective")
    ev.add_argument("--nu", type=float, default=0.5, help="Weight of gmean/amean.")
    ev.add_argument("--method", choices=("spectral", "integral"), default="spectral", help="How fn computes f(A).")
    ev.add_argument("--out", help="Matrix JSON output path.")
    for name in OPERAND_NAMES:
        ev.add_argument(f"--{name}", dest=f"operand_{name}", help=f"Matrix JSON file of operand {name}.")

    ver = sub.add_parser("verify", parents=[common], help="Run identity and inequality checks on random ensembles.")
    ver.add_argument("--suite", choices=("identities", "inequalities", "all"), default="all")
    ver.add_argument("--only", type=_id_list, default=(), help="Comma-separated report ids to keep.")
    ver.add_argument("--degenerate", action="store_true", help="Collapse ordered pairs for the inequalities.")

    conv = sub.add_parser("convergence", parents=[common], help="Residual of one identity against the λ-panel budget.")
    conv.add_argument("--check", default="T2.4", help="Report id to study.")
    conv.add_argument("--budgets", type=_int_list, default=(4, 8, 16, 32, 64), help="Strictly increasing panel budgets.")

    return parser.parse_args(argv)

###############################################################################
# 2. Configuration
###############################################################################

def _setting(settings, key, convert, default):
    raw = settings.get(key)
    if raw is None or raw == "":
        return default
    try:
        return convert(raw)
    except ValueError:
        raise ConfigError(f"profile value {key}={raw!r} is invalid")

def _flag(value, settings, key, convert, default):
    return value if value is not None else _setting(settings, key, convert, default)

def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)

def build_config(args, settings):
    """
    Merges flags over profile settings into a RunConfig.

    Raises:
        ConfigError, ParamOutOfRange: Invalid values.
    """
    plan = QuadraturePlan(
        t_order=_flag(args.t_order, settings, "T_ORDER", int, 32),
        t_grading=_flag(args.t_grading, settings, "T_GRADING", int, 3),
        lambda_panels_init=_setting(settings, "LAMBDA_PANELS_INIT", int, 8),
        lambda_order=_flag(args.lambda_order, settings, "LAMBDA_ORDER", int, 16),
        rel_tol=_flag(args.rel_tol, settings, "REL_TOL", float, 1e-9),
        max_panels=_flag(args.max_panels, settings, "MAX_PANELS", int, 4096),
    )
    fns = tuple(args.fn) if args.fn else DEFAULT_FUNCTIONS
    options = dict(
        command=args.command,
        fns=fns,
        seed=args.seed,
        tol=_flag(args.tol, settings, "TOL", float, 1e-6),
        ineq_tol=_flag(args.ineq_tol, settings, "INEQ_TOL", float, 1e-9),
        plan=plan,
        exponent_mode=args.exponent_mode,
        condition_cap=_setting(settings, "CONDITION_CAP", float, 1e4),
        gated=_setting(settings, "GATED", _bool, True),
        workers=_flag(args.workers, settings, "WORKERS", int, 1),
        report=args.report,
        profile=settings.get("PROFILE", "standard"),
        log_level=_flag(args.log_level, settings, "LOG_LEVEL", str, "INFO"),
    )
    if args.dims is not None:
        options["dims"] = args.dims
    if args.trials is not None:
        options["trials"] = args.trials

    if args.command == "eval":
        options.update(
            fns=tuple(args.fn or ()),
            op=args.op,
            nu=args.nu,
            method=args.method,
            out=args.out,
            inputs={name: getattr(args, f"operand_{name}") for name in OPERAND_NAMES
                    if getattr(args, f"operand_{name}")},
        )
    elif args.command == "verify":
        options.update(suite=args.suite, only=args.only, degenerate=args.degenerate)
    else:
        options.update(check=args.check, budgets=args.budgets)
    return RunConfig(**options)

###############################################################################
# 3. Commands
###############################################################################

def _read_operand(config, name):
    path = config.inputs.get(name)
    if path is None:
        raise ConfigError(f"--op {config.op} needs --{name}")
    entries = read_matrix_json(path)
    try:
        return validate_spd(entries)
    except ValueError as e:
        raise MatrixFileError(path, str(e))

def _function(config):
    if not config.fns:
        raise ConfigError(f"--op {config.op} needs --fn")
    return parse_function_spec(config.fns[0])

def _evaluate(config):
    A = _read_operand(config, "A")
    if config.op == "fn":
        f = _function(config)
        if config.method == "integral":
            return eval_matrix_integral(f, A, config.plan)
        return eval_matrix_spectral(f, A)

    B = _read_operand(config, "B")
    check_same_dim(A, B)
    if config.op == "perspective":
        return perspective(_function(config), B, A)
    if config.op == "transpose":
        return perspective_transpose(_function(config), B, A)
    if config.op == "gmean":
        return geometric_mean(A, B, config.nu)
    if config.op == "amean":
        return arithmetic_mean(A, B, config.nu)
    return relative_entropy(A, B)

def cmd_eval(config):
    """
    Writes the requested matrix and prints its extreme eigenvalues.
    """
    result = _evaluate(config)
    eigenvalues = sym_eig(result).eigenvalues
    if config.out:
        write_matrix_json(config.out, result.entries)
    print(f"{float(eigenvalues[0])!r} {float(eigenvalues[-1])!r}")
    return EXIT_OK

def cmd_verify(config):
    """
    Runs the ensemble, writes the CSV and prints one summary line per report id.
    """
    tasks = build_tasks(config)
    logging.info(f"Running {len(tasks)} tasks on {config.workers} worker(s), profile {config.profile}")
    reports = run_tasks(tasks, config, workers=config.workers)
    if config.report:
        write_csv(config.report, REPORT_COLUMNS, (r.row() for r in reports))
    for summary in summarize(reports):
        print(summary.line())

    failures = gated_failures(reports)
    if failures:
        ids = sorted({r.identity for r in failures})
        logging.error(f"{len(failures)} gated checks failed: {', '.join(ids)}")
        return EXIT_FAILED
    if not config.gated:
        logging.info(f"Profile {config.profile} is not gated; failures are reported only")
    return EXIT_OK

def cmd_convergence(config):
    rows = run_convergence(config)
    if config.report:
        write_csv(config.report, CONVERGENCE_COLUMNS, (r.row() for r in rows))
    for row in rows:
        print(f"{row.budget} {float(row.residual)!r}")
    if not rows[-1].residual <= config.tol:
        logging.error(f"{config.check}: final residual {rows[-1].residual:.3e} exceeds tol {config.tol:g}")
        return EXIT_FAILED
    return EXIT_OK

HANDLERS = {"eval": cmd_eval, "verify": cmd_verify, "convergence": cmd_convergence}

###############################################################################
# 4. Main Entry Point
###############################################################################

def main(argv=None):
    args = parse_arguments(argv)
    configure_logging(args.log_level or "INFO")
    try:
        settings = load_settings(args.profile, args.config)
        config = build_config(args, settings)
        configure_logging(config.log_level)
    except (ConfigError, FunctionSpecError, ParamOutOfRange) as e:
        logging.error(f"Configuration error: {e}")
        return EXIT_INPUT

    if args.dump_config:
        print(json.dumps(config.as_dict(), sort_keys=True, indent=2))
        return EXIT_OK

    try:
        return HANDLERS[config.command](config)
    except MatrixFileError as e:
        logging.error(f"Invalid matrix file: {e}")
        return EXIT_INPUT
    except DimensionMismatch as e:
        logging.error(f"Dimension mismatch: {e}")
        return EXIT_DIMENSION
    except (ConfigError, FunctionSpecError, ParamOutOfRange) as e:
        logging.error(f"Configuration error: {e}")
        return EXIT_INPUT
    except QuadratureBudgetExceeded as e:
        logging.error(f"Quadrature did not converge: {e}")
        return EXIT_FAILED
    except OperatorError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return EXIT_INPUT

if __name__ == "__main__":
    sys.exit(main())
