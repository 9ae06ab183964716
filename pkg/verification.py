# verification.py

import logging
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat

import numpy as np
from attrs import evolve, field, frozen

from errors import (
    ConfigError,
    DomainViolation,
    FactorizationFailure,
    NonFiniteIntegrand,
    NotPositiveDefinite,
    ParamOutOfRange,
    QuadratureBudgetExceeded,
)
from identities import (
    EXPONENT_MODES,
    FUNCTION_FREE_CHECKS,
    INEQUALITY_CHECKS,
    Check,
    Outcome,
    ResidualReport,
    group_reports,
    identity_checks,
    inequality_checks,
    make_ordered_trial,
    make_trial,
    row_tolerance,
    run_identity,
    run_inequality,
)
from loewner_rep import parse_function_spec
from quadrature import QuadraturePlan
from util import derive_seed

DEFAULT_FUNCTIONS = ("power:0.25", "power:0.5", "power:0.75", "discrete:1,2,[0.5:1,3:0.7]", "log")
SUITES = ("identities", "inequalities", "all")
COMMANDS = ("eval", "verify", "convergence")
# fn column for checks that do not involve a function
NO_FUNCTION = "-"

###############################################################################
# 1. Run configuration
###############################################################################

def _one_of(choices):
    def check(instance, attribute, value):
        if value not in choices:
            raise ConfigError(f"{attribute.name} must be one of {choices}, got {value!r}")
    return check

def _at_least(bound):
    def check(instance, attribute, value):
        if value < bound:
            raise ConfigError(f"{attribute.name} must be >= {bound}, got {value}")
    return check

def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f"{attribute.name} must be > 0, got {value}")

def _nonnegative(instance, attribute, value):
    if not value >= 0:
        raise ConfigError(f"{attribute.name} must be >= 0, got {value}")

def _report_ids(values):
    ids = tuple(values)
    known = {c.value for c in Check}
    unknown = [v for v in ids if v not in known]
    if unknown:
        raise ConfigError(f"unknown identity ids {unknown}; known: {sorted(known)}")
    return ids


@frozen
class RunConfig:
    """
    Everything one command needs, resolved from profile values and flags.
    """

    command: str = field(default="verify", validator=_one_of(COMMANDS))
    fns: tuple = field(default=DEFAULT_FUNCTIONS, converter=tuple)
    suite: str = field(default="all", validator=_one_of(SUITES))
    only: tuple = field(default=(), converter=_report_ids)
    dims: tuple = field(default=(1, 2, 3), converter=tuple)
    trials: int = field(default=5, validator=_at_least(1))
    seed: int = 0
    tol: float = field(default=1e-6, converter=float, validator=_positive)
    ineq_tol: float = field(default=1e-9, converter=float, validator=_nonnegative)
    plan: QuadraturePlan = field(factory=QuadraturePlan)
    exponent_mode: str = field(default="corrected", validator=_one_of(EXPONENT_MODES))
    condition_cap: float = field(default=1e4, converter=float, validator=_at_least(1.0))
    gated: bool = True
    degenerate: bool = False
    workers: int = field(default=1, validator=_at_least(1))
    budgets: tuple = field(default=(4, 8, 16, 32, 64), converter=tuple)
    check: str = field(default="T2.4")
    inputs: dict = field(factory=dict)
    op: str = "perspective"
    nu: float = field(default=0.5, converter=float)
    method: str = field(default="spectral", validator=_one_of(("spectral", "integral")))
    out: str = None
    report: str = None
    profile: str = "standard"
    log_level: str = "INFO"

    @dims.validator
    def _check_dims(self, attribute, value):
        if not value or any(int(d) < 1 for d in value):
            raise ConfigError(f"dims must be positive integers, got {value}")

    @budgets.validator
    def _check_budgets(self, attribute, value):
        if not value or any(b < 2 for b in value):
            raise ConfigError(f"budgets must be integers >= 2, got {value}")
        if any(b >= c for b, c in zip(value, value[1:])):
            raise ConfigError(f"budgets must be strictly increasing, got {value}")

    @check.validator
    def _check_check(self, attribute, value):
        _report_ids([value])

    def __attrs_post_init__(self):
        # inputs may repeat (S(A|A)); an output may not overwrite an input or the other output
        inputs = set(self.inputs.values())
        outputs = [p for p in (self.out, self.report) if p]
        if len(set(outputs)) != len(outputs) or inputs & set(outputs):
            raise ConfigError(f"output paths must differ from each other and from the inputs, got {outputs}")

    def as_dict(self):
        """
        JSON-ready view for --dump-config.
        """
        out = {}
        for name in self.__attrs_attrs__:
            value = getattr(self, name.name)
            if isinstance(value, QuadraturePlan):
                value = {a.name: getattr(value, a.name) for a in value.__attrs_attrs__}
            elif isinstance(value, tuple):
                value = list(value)
            out[name.name] = value
        return out

###############################################################################
# 2. Tasks
###############################################################################

@frozen
class Task:
    """One check group on one trial: the unit of parallel work."""

    suite: str
    check: Check
    fn: str
    dim: int
    index: int
    seed: int


@frozen
class Summary:
    identity: str
    kind: str
    count: int
    worst: float
    pass_rate: float

    def line(self):
        label = "max residual" if self.kind == "identity" else "min margin"
        return f"{self.identity}: {self.count} rows, {label} {self.worst:.3e}, pass rate {100.0 * self.pass_rate:.1f}%"


def _wanted(check, only):
    return not only or any(c.value in only for c in group_reports(check))

def _suite_groups(suite, f):
    if suite == "identities":
        return identity_checks(f)
    return inequality_checks(f)

def build_tasks(config):
    """
    Expands the ensemble grid into tasks.

    Trial seeds derive from (report id, function label, dim, trial index),
    so adding a function or identity leaves every other trial unchanged.

    Args:
        config (RunConfig)

    Returns:
        list[Task]: Ordered by suite, function, check, dim, trial index.

    Raises:
        FunctionSpecError: A --fn value does not parse.
    """
    suites = ("identities", "inequalities") if config.suite == "all" else (config.suite,)
    functions = [parse_function_spec(text) for text in config.fns]

    groups = []
    for suite in suites:
        for check in FUNCTION_FREE_CHECKS:
            if (check in INEQUALITY_CHECKS) == (suite == "inequalities"):
                groups.append((suite, check, NO_FUNCTION))
        for f in functions:
            groups.extend((suite, check, f.label) for check in _suite_groups(suite, f))

    tasks = []
    for suite, check, fn in groups:
        if not _wanted(check, config.only):
            continue
        for dim in config.dims:
            for index in range(config.trials):
                seed = derive_seed(config.seed, check.value, fn, int(dim), index)
                tasks.append(Task(suite=suite, check=check, fn=fn, dim=int(dim), index=index, seed=seed))
    logging.debug(f"Built {len(tasks)} tasks from {len(groups)} check groups")
    return tasks

def _failed_outcome(check):
    value = -np.inf if check in INEQUALITY_CHECKS else np.inf
    return Outcome(check=check, lhs_norm=np.nan, value=value, converged=False)

def run_task(task, config):
    """
    Runs one task. Numerical breakdowns become failed rows instead of
    aborting the run.

    Returns:
        list[ResidualReport]
    """
    f = None if task.fn == NO_FUNCTION else parse_function_spec(task.fn)
    try:
        if task.suite == "identities":
            trial = make_trial(task.dim, task.seed, config.condition_cap)
            outcomes = run_identity(task.check, f, trial, config.plan, config.exponent_mode)
        else:
            trial = make_ordered_trial(task.dim, task.seed, config.condition_cap, config.degenerate)
            outcomes = run_inequality(task.check, f, trial, config.ineq_tol)
    except (NonFiniteIntegrand, FactorizationFailure, DomainViolation, NotPositiveDefinite,
            ParamOutOfRange, QuadratureBudgetExceeded) as e:
        logging.warning(f"{task.check.value} fn={task.fn} dim={task.dim} seed={task.seed} failed: {e}")
        outcomes = [_failed_outcome(c) for c in group_reports(task.check)]

    reports = []
    for o in outcomes:
        if config.only and o.check.value not in config.only:
            continue
        tol = row_tolerance(o.check, f, config.tol, config.condition_cap)
        reports.append(ResidualReport.from_outcome(o, task.fn, task.dim, task.seed, tol, config.ineq_tol, config.gated))
    for report in reports:
        logging.debug(f"{report.identity} fn={report.fn} dim={report.dim}: {report.value:.3e} pass={report.passed}")
    return reports

def run_tasks(tasks, config, workers=1):
    """
    Runs tasks, in a process pool when workers > 1.

    Returns:
        list[ResidualReport]: Sorted by (identity, fn, dim, seed), identical
        for any worker count.
    """
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_task, tasks, repeat(config), chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        chunks = [run_task(task, config) for task in tasks]
    reports = [r for chunk in chunks for r in chunk]
    return sorted(reports, key=ResidualReport.sort_key)

def summarize(reports):
    """
    Per report id: row count, worst value (max residual or min margin)
    and pass rate. NaN values count as the worst possible value.

    Returns:
        list[Summary]: Sorted by identity.
    """
    by_id = {}
    for report in reports:
        by_id.setdefault(report.identity, []).append(report)

    summaries = []
    for identity in sorted(by_id):
        rows = by_id[identity]
        kind = rows[0].kind
        values = np.array([r.value for r in rows], dtype=float)
        missing = np.isnan(values)
        if missing.any():
            logging.warning(f"{identity}: {int(missing.sum())} of {len(rows)} rows have a NaN value")
            values[missing] = np.inf if kind == "identity" else -np.inf
        worst = values.max() if kind == "identity" else values.min()
        passed = sum(1 for r in rows if r.passed)
        summaries.append(Summary(identity=identity, kind=kind, count=len(rows), worst=float(worst),
                                 pass_rate=passed / len(rows)))
    return summaries

def gated_failures(reports):
    return [r for r in reports if r.gated and not r.passed]

###############################################################################
# 3. Convergence study
###############################################################################

@frozen
class ConvergenceRow:
    budget: int
    residual: float
    panels: int
    converged: bool

    def row(self):
        return (self.budget, self.residual, self.panels, self.converged)


CONVERGENCE_COLUMNS = ("budget", "residual", "panels", "converged")

def convergence_task(config):
    """
    The first verify task (smallest configured dim, trial 0) whose group
    produces config.check.
    """
    check = Check(config.check)
    if check in INEQUALITY_CHECKS:
        raise ConfigError(f"{check.value} is an inequality; convergence studies need an identity")
    first = evolve(config, suite="identities", only=(check.value,), dims=(config.dims[0],), trials=1)
    tasks = build_tasks(first)
    if not tasks:
        raise ConfigError(f"no configured function produces {check.value}; add a matching --fn")
    return tasks[0]

def run_convergence(config):
    """
    Re-runs one identity check at each λ-panel budget.

    The initial panel count is lowered to the budget when needed; a budget
    equal to the verify plan reproduces the verify residual exactly.

    Returns:
        list[ConvergenceRow]
    """
    task = convergence_task(config)
    rows = []
    for budget in config.budgets:
        plan = evolve(
            config.plan,
            lambda_panels_init=min(config.plan.lambda_panels_init, budget),
            max_panels=budget,
        )
        reports = run_task(task, evolve(config, plan=plan, only=(config.check,)))
        report = reports[0]
        rows.append(ConvergenceRow(budget=budget, residual=report.value, panels=report.panels,
                                   converged=report.converged))
        logging.info(f"{config.check} budget {budget}: residual {report.value:.3e} with {report.panels} panels")
    return rows
