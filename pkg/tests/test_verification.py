import math

import pytest
from attrs import evolve

import verification
from errors import ConfigError, FunctionSpecError, NonFiniteIntegrand, ParamOutOfRange
from identities import Check, ResidualReport, row_tolerance
from quadrature import QuadraturePlan
from verification import (
    NO_FUNCTION,
    RunConfig,
    build_tasks,
    convergence_task,
    gated_failures,
    run_convergence,
    run_task,
    run_tasks,
    summarize,
)

SMALL_PLAN = QuadraturePlan(t_order=48)


def _config(**kwargs):
    defaults = dict(fns=("power:0.5",), dims=(2,), trials=2, seed=42, condition_cap=10.0, plan=SMALL_PLAN)
    defaults.update(kwargs)
    return RunConfig(**defaults)


def test_build_tasks_identity_grid():
    tasks = build_tasks(_config(suite="identities", dims=(1, 2)))
    # inverse difference plus twelve groups for a power function
    assert len(tasks) == 13 * 2 * 2
    assert tasks[0].check == Check.INVERSE_DIFFERENCE
    assert tasks[0].fn == NO_FUNCTION
    assert {t.suite for t in tasks} == {"identities"}


def test_build_tasks_inequality_grid():
    tasks = build_tasks(_config(suite="inequalities", fns=("log",), trials=1))
    assert [(t.check, t.fn) for t in tasks] == [(Check.YOUNG, NO_FUNCTION), (Check.ENTROPY_MONOTONE, "log")]


def test_build_tasks_only_selects_groups():
    tasks = build_tasks(_config(only=("C2.1",)))
    assert {t.check for t in tasks} == {Check.TRANSPOSE_PERSPECTIVE_DIFFERENCE}


def test_build_tasks_rejects_bad_function():
    with pytest.raises(FunctionSpecError):
        build_tasks(_config(fns=("sqrt",)))


def test_seeds_are_stable_when_functions_are_added():
    before = {(t.check, t.fn, t.dim, t.index): t.seed for t in build_tasks(_config())}
    after = {(t.check, t.fn, t.dim, t.index): t.seed for t in build_tasks(_config(fns=("log", "power:0.5")))}
    assert all(after[key] == seed for key, seed in before.items())


def test_run_task_filters_to_only():
    config = _config(only=("C2.1",))
    [task] = [t for t in build_tasks(config) if t.index == 0]
    reports = run_task(task, config)
    assert [r.identity for r in reports] == ["C2.1"]
    assert reports[0].passed


def test_run_task_turns_breakdowns_into_failed_rows(monkeypatch):
    def broken(*args, **kwargs):
        raise NonFiniteIntegrand("NaN at λ = 1")

    monkeypatch.setattr(verification, "run_identity", broken)
    config = _config(only=("L2.3", "LOG-SINGLE"), fns=("log",))
    reports = run_task(build_tasks(config)[0], config)
    assert [r.identity for r in reports] == ["L2.3", "LOG-SINGLE"]
    assert all(math.isinf(r.value) and math.isnan(r.lhs_norm) and not r.passed for r in reports)


def test_run_tasks_is_independent_of_worker_count():
    config = _config(only=("T2.1", "INEQ-2.16", "YOUNG"))
    tasks = build_tasks(config)
    serial = run_tasks(tasks, config, workers=1)
    parallel = run_tasks(tasks, config, workers=2)
    assert [r.row() for r in serial] == [r.row() for r in parallel]
    assert serial == sorted(serial, key=ResidualReport.sort_key)
    assert not gated_failures(serial)


def _report(identity, value, passed, kind="identity", gated=True):
    return ResidualReport(identity=identity, fn="log", dim=1, seed=0, lhs_norm=1.0, value=value, panels=0,
                          converged=True, passed=passed, kind=kind, gated=gated)


def test_summarize():
    reports = [
        _report("T2.1", 1e-9, True),
        _report("T2.1", 1e-5, False),
        _report("INEQ-2.16", 0.2, True, kind="inequality"),
        _report("INEQ-2.16", 0.1, True, kind="inequality"),
    ]
    first, second = summarize(reports)
    assert (first.identity, first.count, first.worst, first.pass_rate) == ("INEQ-2.16", 2, 0.1, 1.0)
    assert (second.identity, second.worst, second.pass_rate) == ("T2.1", 1e-5, 0.5)
    assert "min margin" in first.line()
    assert "pass rate 50.0%" in second.line()


def test_gated_failures_skip_ungated_rows():
    reports = [_report("GAP-2.17a", -1.0, False, kind="inequality", gated=False), _report("T2.1", 1.0, False)]
    assert [r.identity for r in gated_failures(reports)] == ["T2.1"]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"suite": "some"},
        {"command": "plot"},
        {"only": ("T9.9",)},
        {"dims": (0,)},
        {"dims": ()},
        {"trials": 0},
        {"tol": 0.0},
        {"ineq_tol": -1.0},
        {"budgets": (4, 4)},
        {"budgets": (1, 4)},
        {"check": "nope"},
        {"exponent_mode": "printed"},
        {"method": "series"},
        {"condition_cap": 0.5},
        {"workers": 0},
        {"inputs": {"A": "a.json"}, "out": "a.json"},
        {"inputs": {"A": "a.json"}, "report": "a.json"},
    ],
)
def test_run_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_run_config_as_dict():
    out = RunConfig().as_dict()
    assert out["fns"][0] == "power:0.25"
    assert out["plan"]["t_order"] == 32
    assert out["budgets"] == [4, 8, 16, 32, 64]


def test_convergence_task_needs_identity():
    with pytest.raises(ConfigError):
        convergence_task(_config(check="INEQ-2.16"))
    with pytest.raises(ConfigError):
        convergence_task(_config(check="L2.3"))


def test_convergence_at_verify_budget_reproduces_verify():
    config = _config(check="T2.1", budgets=(8, SMALL_PLAN.max_panels))
    rows = run_convergence(config)
    assert [r.budget for r in rows] == [8, SMALL_PLAN.max_panels]
    verify = run_task(convergence_task(config), evolve(config, only=("T2.1",)))
    assert rows[-1].residual == verify[0].value
    assert rows[-1].converged
    assert rows[0].panels <= 8
    assert rows[-1].residual <= 1e-6


def test_run_config_allows_repeated_inputs():
    config = RunConfig(command="eval", op="entropy", inputs={"A": "a.json", "B": "a.json"}, out="s.json")
    assert config.inputs["A"] == config.inputs["B"]


@pytest.mark.parametrize(
    "kwargs",
    [
        {"inputs": {"A": "a.json", "B": "b.json"}, "report": "b.json"},
        {"out": "x.json", "report": "x.json"},
    ],
)
def test_run_config_rejects_overwriting_outputs(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


def test_run_task_turns_parameter_errors_into_failed_rows(monkeypatch):
    def broken(*args, **kwargs):
        raise ParamOutOfRange("power exponent out of range")

    monkeypatch.setattr(verification, "run_inequality", broken)
    config = _config(suite="inequalities", only=("YOUNG",))
    [report] = run_task(build_tasks(config)[0], config)
    assert report.identity == "YOUNG"
    assert math.isinf(report.value) and report.value < 0 and not report.passed


def test_summarize_counts_nan_as_worst():
    reports = [
        _report("T2.2", 1e-9, True),
        _report("T2.2", math.nan, False),
        _report("YOUNG", 0.5, True, kind="inequality"),
        _report("YOUNG", math.nan, False, kind="inequality"),
    ]
    first, second = summarize(reports)
    assert (first.identity, first.worst) == ("T2.2", math.inf)
    assert (second.identity, second.worst) == ("YOUNG", -math.inf)


def test_transpose_identity_rows_use_the_exact_tolerance():
    config = _config(only=("TRANSPOSE-1.4",), tol=1.0)
    reports = [r for task in build_tasks(config) for r in run_task(task, config)]
    assert reports and all(r.passed and r.value <= 1e-10 for r in reports)
    assert row_tolerance(Check.TRANSPOSE_IDENTITY, None, config.tol, config.condition_cap) == 1e-10


def test_identity_grid_at_condition_1e4():
    config = _config(suite="identities", fns=verification.DEFAULT_FUNCTIONS, dims=(1, 3), trials=1,
                     condition_cap=1e4)
    reports = run_tasks(build_tasks(config), config)
    assert not gated_failures(reports), [r.row() for r in gated_failures(reports)]
    assert all(math.isfinite(r.value) for r in reports)
