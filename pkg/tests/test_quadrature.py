import numpy as np
import pytest

from errors import NonFiniteIntegrand, ParamOutOfRange, QuadratureBudgetExceeded
from quadrature import (
    GRADING_CAP,
    QuadraturePlan,
    gauss_legendre_unit,
    integrate_double,
    integrate_halfline,
    integrate_segment,
    integrate_unit,
    segment_rule,
)


def test_plan_defaults():
    plan = QuadraturePlan()
    assert (plan.t_order, plan.t_grading, plan.lambda_panels_init, plan.lambda_order) == (32, 3, 8, 16)
    assert plan.rel_tol == 1e-9
    assert plan.max_panels == 4096
    assert plan.strict


@pytest.mark.parametrize(
    "kwargs",
    [
        {"t_order": 1},
        {"t_grading": 0},
        {"lambda_panels_init": 0},
        {"rel_tol": 0.0},
        {"max_panels": 1},
        {"lambda_panels_init": 16, "max_panels": 8},
    ],
)
def test_plan_rejects(kwargs):
    with pytest.raises(ParamOutOfRange):
        QuadraturePlan(**kwargs)


def test_with_exponents_keeps_budgets():
    plan = QuadraturePlan(max_panels=64).with_exponents(-0.5, 1.5)
    assert plan.singularity_exponent == -0.5
    assert plan.decay_exponent == 1.5
    assert plan.max_panels == 64


@pytest.mark.parametrize("order", [1, 4, 32])
def test_gauss_legendre_unit_is_exact_for_polynomials(order):
    t, w = gauss_legendre_unit(order)
    for k in range(2 * order):
        assert np.dot(w, t ** k) == pytest.approx(1.0 / (k + 1), rel=1e-13)


@pytest.mark.parametrize("grading", [1, 2, 3])
def test_segment_rule_is_mirror_symmetric(grading):
    s, t, w = segment_rule(32, grading)
    np.testing.assert_array_equal(s[::-1], t)
    np.testing.assert_array_equal(w[::-1], w)
    assert w.sum() == pytest.approx(1.0, rel=1e-14)
    assert np.all((t > 0) & (t < 1))


def test_graded_rule_resolves_endpoint_pole():
    # ∫₀¹ dt / (t + ε) with the pole just outside the interval
    eps = 1e-4
    exact = np.log((1 + eps) / eps)
    plain_t, plain_w = gauss_legendre_unit(32)
    plain_error = abs(np.dot(plain_w, 1.0 / (plain_t + eps)) - exact)
    _, t, w = segment_rule(32, 3)
    graded_error = abs(np.dot(w, 1.0 / (t + eps)) - exact)
    assert graded_error < 1e-5 * exact
    assert graded_error < 1e-2 * plain_error
    _, t, w = segment_rule(48, 3)
    assert np.dot(w, 1.0 / (t + eps)) == pytest.approx(exact, rel=1e-7)


def test_integrate_unit():
    assert integrate_unit(np.exp) == pytest.approx(np.e - 1, rel=1e-14)
    assert integrate_unit(lambda t: 2.0) == pytest.approx(2.0)
    stacked = integrate_unit(lambda t: t[:, None, None] * np.eye(2))
    np.testing.assert_allclose(stacked, 0.5 * np.eye(2), rtol=1e-14)


def test_integrate_unit_non_finite():
    with pytest.raises(NonFiniteIntegrand):
        integrate_unit(lambda t: np.full_like(t, np.nan))


def test_integrate_segment_shape():
    plan = QuadraturePlan(t_order=8, t_grading=1)

    def kernel(lams, s, t):
        return lams[:, None] * (s[None, :] + 2.0 * t[None, :])

    out = integrate_segment(kernel, np.array([1.0, 2.0]), plan)
    np.testing.assert_allclose(out, [1.5, 3.0], rtol=1e-14)


@pytest.mark.parametrize(
    "g, exponents, exact",
    [
        (lambda x: 1.0 / (1.0 + x) ** 2, (0.0, 2.0), 1.0),
        (lambda x: np.exp(-x), (0.0, None), 1.0),
        (lambda x: x ** -0.5 / (1.0 + x), (-0.5, 1.5), np.pi),
        (lambda x: x ** 0.25 / (1.0 + x) ** 2, (0.25, 1.75), 0.25 * np.pi / np.sin(0.25 * np.pi)),
    ],
)
def test_integrate_halfline(g, exponents, exact):
    result = integrate_halfline(g, QuadraturePlan().with_exponents(*exponents))
    assert result.converged
    assert result.value == pytest.approx(exact, rel=1e-8)
    assert result.panels_used >= 8


def test_integrate_halfline_matrix_values():
    d = np.array([1.0, 4.0])
    result = integrate_halfline(
        lambda lams: np.eye(2) / (lams[:, None, None] + d) ** 2,
        QuadraturePlan().with_exponents(0.0, 2.0),
    )
    np.testing.assert_allclose(result.value, np.diag([1.0, 0.25]), rtol=1e-8)


def test_budget_exhaustion_strict_and_lenient():
    plan = QuadraturePlan(max_panels=8, rel_tol=1e-15)

    def g(lams):
        return lams ** -0.5 / (1.0 + lams)

    with pytest.raises(QuadratureBudgetExceeded) as info:
        integrate_halfline(g, plan)
    assert info.value.result is not None
    assert not info.value.result.converged

    lenient = integrate_halfline(g, QuadraturePlan(max_panels=8, rel_tol=1e-15, strict=False))
    assert not lenient.converged
    assert lenient.panels_used <= 8


def test_integrate_halfline_non_finite():
    with pytest.raises(NonFiniteIntegrand):
        integrate_halfline(lambda x: np.where(x > 1.0, np.inf, 1.0), QuadraturePlan())


def test_integrate_halfline_is_deterministic():
    plan = QuadraturePlan().with_exponents(-0.5, 1.5)
    g = lambda x: x ** -0.5 / (2.0 + x)
    assert integrate_halfline(g, plan).value == integrate_halfline(g, plan).value


def test_integrate_double():
    # ∫₀^∞ ∫₀¹ (λ + 1 + t)^{-2} dt dλ = ∫₀¹ dt / (1 + t) = ln 2
    result = integrate_double(
        lambda lams, s, t: 1.0 / (lams[:, None] + 1.0 + t[None, :]) ** 2,
        lambda lams: np.ones_like(lams),
        QuadraturePlan().with_exponents(0.0, 2.0),
    )
    assert result.value == pytest.approx(np.log(2.0), rel=1e-9)
    assert result.converged


def test_graded_tail_with_subleading_term():
    # (1+λ)^{-5/2} = λ^{-5/2}(1 - 5/(2λ) + ...): the correction is not smooth in the graded tail coordinate
    result = integrate_halfline(lambda x: (1.0 + x) ** -2.5, QuadraturePlan().with_exponents(0.0, 2.5))
    assert result.converged
    assert result.value == pytest.approx(2.0 / 3.0, rel=1e-8)
    assert result.panels_used <= 256


def test_nodes_stay_inside_the_half_line():
    seen = []

    def g(lams):
        seen.append(lams.copy())
        return lams ** -0.5 / (1.0 + lams) ** 0.7

    # no grading: the tail ~ λ^{-1.2} pulls panels onto the λ = ∞ end
    integrate_halfline(g, QuadraturePlan(rel_tol=1e-15, strict=False))
    nodes = np.concatenate(seen)
    assert np.all(np.isfinite(nodes))
    assert np.all(nodes > 0)


def test_strong_endpoint_singularity_with_capped_grading():
    # ∫ λ^{-0.9}/(1+λ) dλ = π/sin(0.1π); the grading 1/(1+σ) = 10 is capped
    plan = QuadraturePlan().with_exponents(-0.9, 1.9)
    assert 1.0 / (1.0 - 0.9) > GRADING_CAP
    result = integrate_halfline(lambda x: x ** -0.9 / (1.0 + x), plan)
    assert result.converged
    assert result.value == pytest.approx(np.pi / np.sin(0.1 * np.pi), rel=1e-7)


def test_tighter_tolerance_never_uses_fewer_panels():
    g = lambda x: x ** -0.5 / (2.0 + x)
    panels = [
        integrate_halfline(g, QuadraturePlan(rel_tol=tol, strict=False)).panels_used
        for tol in (1e-4, 1e-7, 1e-10, 1e-13)
    ]
    assert panels == sorted(panels)
    assert panels[-1] > panels[0]


def test_halfline_commutes_with_congruence():
    d = np.array([1.0, 4.0])
    s = np.array([[2.0, 1.0], [1.0, 3.0]])
    plan = QuadraturePlan().with_exponents(0.0, 2.0)

    def g(lams):
        return np.eye(2) / (lams[:, None, None] + d) ** 2

    plain = integrate_halfline(g, plan).value
    moved = integrate_halfline(lambda lams: s @ g(lams) @ s, plan).value
    np.testing.assert_allclose(moved, s @ plain @ s, rtol=1e-12)
