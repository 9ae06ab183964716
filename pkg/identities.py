# identities.py

from enum import Enum

import numpy as np
from attrs import evolve, frozen

from errors import DomainViolation, ParamOutOfRange
from loewner_rep import (
    DiscreteMeasure,
    TransposeView,
    eval_matrix_spectral,
    make_log_normalized,
    matrix_integral,
    transpose,
)
from perspective import (
    entropy_monotone_check,
    geometric_mean,
    perspective,
    perspective_monotone_check,
    relative_entropy,
    transpose_identity_check,
    young_check,
)
from quadrature import (
    IntegralResult,
    integrate_double,
    integrate_halfline,
    integrate_segment,
    segment_rule,
)
from spd_core import (
    as_symmetric,
    batched_spd_solve,
    check_same_dim,
    entries_of,
    frobenius_residual,
    loewner_leq,
    random_ordered_pair,
    random_ordered_quadruple,
    random_spd,
    resolvent_apply,
    sqrt_and_inv_sqrt,
    sym_eig,
    validate_spd,
)
from util import derive_seed

# Relative eigenvalue gap below which divided differences switch to f'.
DIVIDED_DIFFERENCE_GAP = 1e-6

EXPONENT_MODES = ("corrected", "as_printed")

# Residual bound for rows without λ-quadrature error: the transpose identity
# and the Loewner identities of discrete measures. Above a condition of about
# 450 the rounding floor EXACT_ROUNDING·ε·condition takes over.
EXACT_TOL = 1e-10
EXACT_ROUNDING = 1e4
# Inner t-rule order for discrete measures, which only evaluate their atoms.
DISCRETE_T_ORDER = 128


class Check(str, Enum):
    """Report identifiers, as written to the CSV identity column."""

    FUNCTION_DIFFERENCE = "L2.1"
    PERSPECTIVE_DIFFERENCE = "T2.1"
    TRANSPOSE_DIFFERENCE = "L2.2"
    TRANSPOSE_PERSPECTIVE_DIFFERENCE = "T2.2"
    SWAPPED_PERSPECTIVE_DIFFERENCE = "C2.1"
    FOUR_POINT_DIFFERENCE = "C2.2"
    GEOMETRIC_MEAN_DIFFERENCE = "P3.1"
    DUAL_GEOMETRIC_MEAN_DIFFERENCE = "P3.2"
    LOG_DIFFERENCE = "L2.3"
    ENTROPY_DIFFERENCE = "T2.4"
    INVERSE_DIFFERENCE = "E2.5"
    RESOLVENT_FORM = "RESOLVENT-FORM"
    TRANSPOSE_RESOLVENT_FORM = "TRANSPOSE-RESOLVENT-FORM"
    LOG_SINGLE_INTEGRAL = "LOG-SINGLE"
    FUNCTION_INTEGRAL = "FUNCTION-INTEGRAL"
    SEGMENT_DERIVATIVE = "SEGMENT-DERIVATIVE"
    TRANSPOSE_IDENTITY = "TRANSPOSE-1.4"
    PERSPECTIVE_GAIN = "INEQ-2.16"
    SWAPPED_PERSPECTIVE_GAIN = "INEQ-2.17"
    FOUR_POINT_GAIN = "INEQ-2.17a"
    NONNEGATIVE_SWAPPED_GAIN = "INEQ-2.18"
    YOUNG = "YOUNG"
    PERSPECTIVE_MONOTONE = "THM-C"
    ENTROPY_MONOTONE = "ENTROPY-MONOTONE"
    FOUR_POINT_GAP = "GAP-2.17a"

    def __str__(self):
        return self.value


INEQUALITY_CHECKS = frozenset({
    Check.PERSPECTIVE_GAIN,
    Check.SWAPPED_PERSPECTIVE_GAIN,
    Check.FOUR_POINT_GAIN,
    Check.NONNEGATIVE_SWAPPED_GAIN,
    Check.YOUNG,
    Check.PERSPECTIVE_MONOTONE,
    Check.ENTROPY_MONOTONE,
    Check.FOUR_POINT_GAP,
})
UNGATED_CHECKS = frozenset({Check.FOUR_POINT_GAP})
# Checks that do not depend on the function under test
FUNCTION_FREE_CHECKS = (Check.INVERSE_DIFFERENCE, Check.YOUNG)

REPORT_COLUMNS = ("identity", "fn", "dim", "seed", "lhs_norm", "residual_or_margin", "panels", "converged", "pass")
# Loewner identities whose right-hand side is an exact atom sum for discrete measures
EXACT_MEASURE_CHECKS = frozenset({
    Check.FUNCTION_DIFFERENCE,
    Check.PERSPECTIVE_DIFFERENCE,
    Check.TRANSPOSE_DIFFERENCE,
    Check.TRANSPOSE_PERSPECTIVE_DIFFERENCE,
    Check.SWAPPED_PERSPECTIVE_DIFFERENCE,
    Check.FOUR_POINT_DIFFERENCE,
})

###############################################################################
# 1. Result types
###############################################################################

@frozen(eq=False)
class Rhs:
    """Right-hand side matrix plus the metadata of the quadratures behind it."""

    value: np.ndarray
    integral: IntegralResult


@frozen
class Outcome:
    check: Check
    lhs_norm: float
    value: float
    panels: int = 0
    converged: bool = True
    scale: float = 1.0


@frozen
class ResidualReport:
    """
    One CSV row. value is the relative Frobenius residual for identities
    and the Loewner margin for inequalities.
    """

    identity: str
    fn: str
    dim: int
    seed: int
    lhs_norm: float
    value: float
    panels: int
    converged: bool
    passed: bool
    kind: str = "identity"
    gated: bool = True

    @classmethod
    def from_outcome(cls, outcome, fn, dim, seed, tol, ineq_tol, gated=True):
        if outcome.check in INEQUALITY_CHECKS:
            kind = "inequality"
            passed = bool(outcome.value >= -ineq_tol * outcome.scale)
        else:
            kind = "identity"
            passed = bool(outcome.value <= tol)
        return cls(
            identity=outcome.check.value,
            fn=fn,
            dim=dim,
            seed=seed,
            lhs_norm=outcome.lhs_norm,
            value=outcome.value,
            panels=outcome.panels,
            converged=outcome.converged,
            passed=passed,
            kind=kind,
            gated=gated and outcome.check not in UNGATED_CHECKS,
        )

    def sort_key(self):
        return (self.identity, self.fn, self.dim, self.seed)

    def row(self):
        return (self.identity, self.fn, self.dim, self.seed, self.lhs_norm, self.value,
                self.panels, self.converged, self.passed)

def exact_tolerance(condition):
    return max(EXACT_TOL, EXACT_ROUNDING * np.finfo(float).eps * float(condition))

def row_tolerance(check, f, tol, condition):
    """
    Residual bound for one identity row: tol, tightened to
    exact_tolerance(condition) where no λ-quadrature error enters.
    """
    exact = check == Check.TRANSPOSE_IDENTITY or (
        check in EXACT_MEASURE_CHECKS and f is not None and isinstance(f.measure, DiscreteMeasure)
    )
    return min(tol, exact_tolerance(condition)) if exact else tol

###############################################################################
# 2. Kernels
###############################################################################

def _combine(*results):
    results = [r for r in results if r is not None]
    if not results:
        return IntegralResult(value=0.0, error_estimate=0.0, panels_used=0, converged=True)
    return IntegralResult(
        value=sum(r.value for r in results),
        error_estimate=sum(r.error_estimate for r in results),
        panels_used=sum(r.panels_used for r in results),
        converged=all(r.converged for r in results),
    )

def _symmetrize(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * (x + x.T)

def _sandwich(stack, base, delta):
    # Yᵀ·Δ·Y with Y = stack^{-1}·base
    y = batched_spd_solve(stack, base)
    return np.swapaxes(y, -1, -2) @ delta @ y

def _whitened_kernel(base, x, y, resolvent):
    """
    λ, t -> base^{1/2}·R(N)·W·R(N)·base^{1/2}, where W = base^{-1/2}(y−x)base^{-1/2},
    N = base^{-1/2}((1−t)x + ty)base^{-1/2} and R applies resolvent(λ, ·) to
    the eigenvalues of N.

    One eigendecomposition per t-node serves every λ-node; no per-node solves.
    """
    root, inv_root = (entries_of(m) for m in sqrt_and_inv_sqrt(base))
    wx = inv_root @ entries_of(x) @ inv_root
    wy = inv_root @ entries_of(y) @ inv_root
    wd = wy - wx

    def kernel(lams, s, t):
        seg = s[:, None, None] * wx + t[:, None, None] * wy
        mu, v = np.linalg.eigh(0.5 * (seg + np.swapaxes(seg, -1, -2)))
        r = root @ v
        d = np.swapaxes(v, -1, -2) @ wd @ v
        inv = resolvent(lams[:, None, None], mu[None, :, :])
        h = d[None] * inv[..., :, None] * inv[..., None, :]
        return r[None] @ h @ np.swapaxes(r, -1, -2)[None]

    return kernel

def _perspective_kernel(A, B, P):
    """
    λ, t -> P·M^{-1}·(B−A)·M^{-1}·P with M = (1−t)A + tB + λP.
    """
    return _whitened_kernel(P, A, B, lambda lam, mu: 1.0 / (mu + lam))

def _transpose_kernel(C, D, Q):
    """
    λ, t -> Q·M^{-1}·(D−C)·M^{-1}·Q with M = Q + λ[(1−t)C + tD].
    """
    return _whitened_kernel(Q, C, D, lambda lam, mu: 1.0 / (1.0 + lam * mu))

def _measure_double(measure, kernel, power, plan):
    """
    ∫ λ^power ∫₀¹ kernel dt dw(λ). Both kernels are finite at λ = 0 and
    decay like λ^{-2}.
    """
    if isinstance(measure, DiscreteMeasure):
        plan = evolve(plan, t_order=max(plan.t_order, DISCRETE_T_ORDER))

    def g(lams):
        inner = integrate_segment(kernel, lams, plan)
        return (lams ** power)[:, None, None] * inner

    return measure.integrate(g, plan, low=float(power), decay=2.0 - power)

def _require_loewner(f):
    if f.is_log:
        raise DomainViolation("the logarithm has no Löwner triple; use the logarithmic identities")

def _lenient(plan):
    return evolve(plan, strict=False)

###############################################################################
# 3. Right-hand sides
###############################################################################

def rhs_inverse_difference(C, D, plan):
    """
    C^{-1} − D^{-1} = ∫₀¹ M^{-1}(D−C)M^{-1} dt, M = (1−t)C + tD.
    """
    check_same_dim(C, D)
    c, d = entries_of(C), entries_of(D)
    eye = np.eye(c.shape[0])

    def kernel(lams, s, t):
        stack = s[:, None, None] * c + t[:, None, None] * d
        return _sandwich(stack, eye, d - c)[None, :, :, :]

    value = integrate_segment(kernel, np.zeros(1), plan)[0]
    return Rhs(_symmetrize(value), _combine())

def frechet_inverse(T, S):
    """
    T^{-1}·S·T^{-1}, the derivative of −T^{-1} in direction S.
    """
    check_same_dim(T, S)
    left = resolvent_apply(T, 0.0, S)
    return as_symmetric(_symmetrize(resolvent_apply(T, 0.0, left.T)))

def rhs_function_difference(f, U, V, plan):
    """
    f(V) − f(U) = b(V−U) + ∫ λ² ∫₀¹ M^{-1}(V−U)M^{-1} dt dw(λ),
    M = (1−t)U + tV + λ.
    """
    return rhs_perspective_difference(f, U, V, np.eye(entries_of(U).shape[0]), plan)

def rhs_perspective_difference(f, A, B, P, plan):
    """
    P_f(B,P) − P_f(A,P) = b(B−A) + ∫ λ² ∫₀¹ P·M^{-1}(B−A)M^{-1}·P dt dw(λ),
    M = (1−t)A + tB + λP.
    """
    _require_loewner(f)
    check_same_dim(A, B, P)
    result = _measure_double(f.measure, _perspective_kernel(A, B, P), 2, plan)
    value = f.b * (entries_of(B) - entries_of(A)) + result.value
    return Rhs(_symmetrize(value), result)

def rhs_transpose_difference(f, U, V, plan):
    """
    f̃(V) − f̃(U) = a(V−U) + ∫ λ ∫₀¹ (1+λM)^{-1}(V−U)(1+λM)^{-1} dt dw(λ).
    """
    return rhs_transpose_perspective_difference(f, U, V, np.eye(entries_of(U).shape[0]), plan)

def rhs_transpose_perspective_difference(f, C, D, Q, plan):
    """
    P_f̃(D,Q) − P_f̃(C,Q) = P_f(Q,D) − P_f(Q,C)
      = a(D−C) + ∫ λ ∫₀¹ Q·(Q+λM)^{-1}(D−C)(Q+λM)^{-1}·Q dt dw(λ),
    M = (1−t)C + tD.
    """
    _require_loewner(f)
    check_same_dim(C, D, Q)
    result = _measure_double(f.measure, _transpose_kernel(C, D, Q), 1, plan)
    value = f.a * (entries_of(D) - entries_of(C)) + result.value
    return Rhs(_symmetrize(value), result)

def rhs_four_point_difference(f, A, B, C, D, plan):
    """
    P_f(A,B) − P_f(C,D), telescoped through P_f(C,B):
    a perspective-difference term with base B (C → A) plus a
    transpose-difference term with base C (D → B).
    """
    _require_loewner(f)
    check_same_dim(A, B, C, D)
    first = _measure_double(f.measure, _perspective_kernel(C, A, B), 2, plan)
    second = _measure_double(f.measure, _transpose_kernel(D, B, C), 1, plan)
    value = (
        f.b * (entries_of(A) - entries_of(C))
        + f.a * (entries_of(B) - entries_of(D))
        + first.value
        + second.value
    )
    return Rhs(_symmetrize(value), _combine(first, second))

def _power_constant(r):
    if not 0 < r < 1:
        raise ParamOutOfRange(f"r must be in (0, 1), got {r}")
    return np.sin(r * np.pi) / np.pi

def _check_mode(exponent_mode):
    if exponent_mode not in EXPONENT_MODES:
        raise ParamOutOfRange(f"exponent_mode must be one of {EXPONENT_MODES}, got {exponent_mode!r}")

def rhs_geometric_mean_difference(r, A, B, P, plan, exponent_mode="corrected"):
    """
    P♯_r B − P♯_r A = sin(rπ)/π ∫ λ^k ∫₀¹ P·M^{-1}(B−A)M^{-1}·P dt dλ.

    k = r in corrected mode; as_printed uses k = r + 1, for which the
    λ-integral diverges.
    """
    _check_mode(exponent_mode)
    check_same_dim(A, B, P)
    c = _power_constant(r)
    k = r if exponent_mode == "corrected" else r + 1.0
    result = integrate_double(
        _perspective_kernel(A, B, P),
        lambda lams: c * lams ** k,
        plan.with_exponents(k, 2.0 - k),
    )
    return Rhs(_symmetrize(result.value), result)

def rhs_dual_geometric_mean_difference(r, C, D, Q, plan, exponent_mode="corrected"):
    """
    D♯_r Q − C♯_r Q = sin(rπ)/π ∫ λ^k ∫₀¹ Q·(Q+λM)^{-1}(D−C)(Q+λM)^{-1}·Q dt dλ.

    k = r − 1 in corrected mode, k = r as printed.
    """
    _check_mode(exponent_mode)
    check_same_dim(C, D, Q)
    c = _power_constant(r)
    k = r - 1.0 if exponent_mode == "corrected" else r
    result = integrate_double(
        _transpose_kernel(C, D, Q),
        lambda lams: c * lams ** k,
        plan.with_exponents(k, 2.0 - k),
    )
    return Rhs(_symmetrize(result.value), result)

def rhs_log_difference(U, V, plan):
    """
    ln V − ln U = ∫ ∫₀¹ (λ+M)^{-1}(V−U)(λ+M)^{-1} dt dλ.
    """
    return rhs_entropy_difference(U, V, np.eye(entries_of(U).shape[0]), plan)

def _resolvent_product(left_stack, right_stack, delta):
    # left^{-1}·Δ·right^{-1}, returned transposed; callers symmetrize
    left = batched_spd_solve(left_stack, delta)
    return batched_spd_solve(right_stack, np.swapaxes(left, -1, -2))

def _shifts(x, lams):
    return x[None, :, :] + lams[:, None, None] * np.eye(x.shape[0])[None, :, :]

def _scalings(x, lams):
    return np.eye(x.shape[0])[None, :, :] + lams[:, None, None] * x[None, :, :]

def rhs_log_difference_single(U, V, plan):
    """
    ln V − ln U = ∫ [(λ+U)^{-1} − (λ+V)^{-1}] dλ, evaluated as
    (λ+U)^{-1}(V−U)(λ+V)^{-1}.
    """
    check_same_dim(U, V)
    u, v = entries_of(U), entries_of(V)
    result = integrate_halfline(
        lambda lams: _resolvent_product(_shifts(u, lams), _shifts(v, lams), v - u),
        plan.with_exponents(0.0, 2.0),
    )
    return Rhs(_symmetrize(result.value), result)

def rhs_entropy_difference(A, B, P, plan):
    """
    S(P|B) − S(P|A) = ∫ ∫₀¹ P·M^{-1}(B−A)M^{-1}·P dt dλ, M = (1−t)A + tB + λP.
    """
    check_same_dim(A, B, P)
    result = integrate_double(
        _perspective_kernel(A, B, P),
        lambda lams: np.ones_like(lams),
        plan.with_exponents(0.0, 2.0),
    )
    return Rhs(_symmetrize(result.value), result)

def rhs_resolvent_form(f, U, V, plan):
    """
    f(V) − f(U) = b(V−U) + ∫ λ²[(U+λ)^{-1} − (V+λ)^{-1}] dw(λ).
    """
    _require_loewner(f)
    check_same_dim(U, V)
    u, v = entries_of(U), entries_of(V)

    def g(lams):
        return (lams ** 2)[:, None, None] * _resolvent_product(_shifts(u, lams), _shifts(v, lams), v - u)

    result = f.measure.integrate(g, plan, low=2.0, decay=0.0)
    return Rhs(_symmetrize(f.b * (v - u) + result.value), result)

def rhs_transpose_resolvent_form(f, U, V, plan):
    """
    f̃(V) − f̃(U) = a(V−U) + ∫ [(1+λU)^{-1} − (1+λV)^{-1}] dw(λ).
    """
    _require_loewner(f)
    check_same_dim(U, V)
    u, v = entries_of(U), entries_of(V)

    def g(lams):
        return lams[:, None, None] * _resolvent_product(_scalings(u, lams), _scalings(v, lams), v - u)

    result = f.measure.integrate(g, plan, low=1.0, decay=1.0)
    return Rhs(_symmetrize(f.a * (v - u) + result.value), result)

def frechet_spectral(f, T, S):
    """
    Fréchet derivative of X -> f(X) at T in direction S.

    Divided differences of f on the spectrum of T, with f' at the
    midpoint for eigenvalue pairs closer than DIVIDED_DIFFERENCE_GAP.
    """
    check_same_dim(T, S)
    eig = sym_eig(T)
    mu, basis = eig.eigenvalues, eig.basis
    values = f.values(mu)

    gap = mu[:, None] - mu[None, :]
    size = np.maximum(np.abs(mu[:, None]), np.abs(mu[None, :]))
    close = np.abs(gap) <= DIVIDED_DIFFERENCE_GAP * size
    slopes = (values[:, None] - values[None, :]) / np.where(close, 1.0, gap)
    midpoint = f.derivative_values(0.5 * (mu[:, None] + mu[None, :]))
    gamma = np.where(close, midpoint, slopes)

    rotated = basis.T @ entries_of(S) @ basis
    return as_symmetric(_symmetrize(basis @ (gamma * rotated) @ basis.T))

def rhs_segment_derivative(f, C, D, plan):
    """
    f(D) − f(C) = ∫₀¹ ∇f_{(1−t)C+tD}(D−C) dt.
    """
    check_same_dim(C, D)
    c, d = entries_of(C), entries_of(D)
    s, t, w = segment_rule(plan.t_order, plan.t_grading)
    total = np.zeros_like(c)
    for si, ti, wi in zip(s, t, w):
        total = total + wi * frechet_spectral(f, as_symmetric(si * c + ti * d), d - c).entries
    return Rhs(_symmetrize(total), _combine())

###############################################################################
# 4. Identity checks
###############################################################################

def _identity(check, lhs, rhs, reference=None):
    lhs = entries_of(lhs)
    return Outcome(
        check=check,
        lhs_norm=float(np.linalg.norm(lhs)),
        value=frobenius_residual(lhs if reference is None else reference, rhs.value),
        panels=rhs.integral.panels_used,
        converged=rhs.integral.converged,
    )

def _spectral_difference(f, U, V):
    return eval_matrix_spectral(f, V).entries - eval_matrix_spectral(f, U).entries

def check_inverse_difference(C, D, plan):
    lhs = resolvent_apply(C, 0.0, np.eye(C.dim)) - resolvent_apply(D, 0.0, np.eye(D.dim))
    return _identity(Check.INVERSE_DIFFERENCE, _symmetrize(lhs), rhs_inverse_difference(C, D, plan))

def check_frechet_inverse(T, S, h=1e-6):
    """
    Relative error of the forward difference (T^{-1} − (T+hS)^{-1})/h
    against T^{-1}ST^{-1}. O(h) by construction.
    """
    t = entries_of(T)
    eye = np.eye(t.shape[0])
    fd = (resolvent_apply(T, 0.0, eye) - resolvent_apply(validate_spd(t + h * entries_of(S)), 0.0, eye)) / h
    exact = frechet_inverse(T, S).entries
    return float(np.linalg.norm(fd - exact) / max(np.linalg.norm(exact), np.finfo(float).tiny))

def check_function_difference(f, U, V, plan):
    rhs = rhs_function_difference(f, U, V, _lenient(plan))
    return _identity(Check.FUNCTION_DIFFERENCE, _spectral_difference(f, U, V), rhs)

def check_perspective_difference(f, A, B, P, plan):
    lhs = perspective(f, B, P).entries - perspective(f, A, P).entries
    return _identity(Check.PERSPECTIVE_DIFFERENCE, lhs, rhs_perspective_difference(f, A, B, P, _lenient(plan)))

def check_transpose_difference(f, U, V, plan):
    rhs = rhs_transpose_difference(f, U, V, _lenient(plan))
    return _identity(Check.TRANSPOSE_DIFFERENCE, _spectral_difference(transpose(f), U, V), rhs)

def check_transpose_perspective_difference(f, C, D, Q, plan):
    """
    One right-hand side, two left-hand sides: the transpose form and the
    swapped-argument form of the same difference.
    """
    rhs = rhs_transpose_perspective_difference(f, C, D, Q, _lenient(plan))
    ft = transpose(f)
    transposed = perspective(ft, D, Q).entries - perspective(ft, C, Q).entries
    swapped = perspective(f, Q, D).entries - perspective(f, Q, C).entries
    return [
        _identity(Check.TRANSPOSE_PERSPECTIVE_DIFFERENCE, transposed, rhs),
        _identity(Check.SWAPPED_PERSPECTIVE_DIFFERENCE, swapped, rhs),
    ]

def check_four_point_difference(f, A, B, C, D, plan):
    lhs = perspective(f, A, B).entries - perspective(f, C, D).entries
    return _identity(Check.FOUR_POINT_DIFFERENCE, lhs, rhs_four_point_difference(f, A, B, C, D, _lenient(plan)))

def check_geometric_mean_difference(r, A, B, P, plan, exponent_mode="corrected"):
    lhs = geometric_mean(P, B, r).entries - geometric_mean(P, A, r).entries
    rhs = rhs_geometric_mean_difference(r, A, B, P, _lenient(plan), exponent_mode)
    return _identity(Check.GEOMETRIC_MEAN_DIFFERENCE, lhs, rhs)

def check_dual_geometric_mean_difference(r, C, D, Q, plan, exponent_mode="corrected"):
    lhs = geometric_mean(D, Q, r).entries - geometric_mean(C, Q, r).entries
    rhs = rhs_dual_geometric_mean_difference(r, C, D, Q, _lenient(plan), exponent_mode)
    return _identity(Check.DUAL_GEOMETRIC_MEAN_DIFFERENCE, lhs, rhs)

def check_log_difference(U, V, plan):
    """
    Double-integral form against the spectral difference, then the
    single-integral form against the double-integral form.
    """
    double = rhs_log_difference(U, V, _lenient(plan))
    single = rhs_log_difference_single(U, V, _lenient(plan))
    lhs = _spectral_difference(make_log_normalized(), U, V)
    return [
        _identity(Check.LOG_DIFFERENCE, lhs, double),
        _identity(Check.LOG_SINGLE_INTEGRAL, lhs, single, reference=double.value),
    ]

def check_entropy_difference(A, B, P, plan):
    lhs = relative_entropy(P, B).entries - relative_entropy(P, A).entries
    return _identity(Check.ENTROPY_DIFFERENCE, lhs, rhs_entropy_difference(A, B, P, _lenient(plan)))

def check_resolvent_form(f, U, V, plan):
    return _identity(Check.RESOLVENT_FORM, _spectral_difference(f, U, V), rhs_resolvent_form(f, U, V, _lenient(plan)))

def check_transpose_resolvent_form(f, U, V, plan):
    lhs = _spectral_difference(transpose(f), U, V)
    return _identity(Check.TRANSPOSE_RESOLVENT_FORM, lhs, rhs_transpose_resolvent_form(f, U, V, _lenient(plan)))

def check_function_integral(f, U, plan):
    value, result = matrix_integral(f, U, _lenient(plan))
    return _identity(Check.FUNCTION_INTEGRAL, eval_matrix_spectral(f, U), Rhs(value.entries, result))

def check_segment_derivative(f, C, D, plan):
    lhs = _spectral_difference(f, C, D)
    return _identity(Check.SEGMENT_DERIVATIVE, lhs, rhs_segment_derivative(f, C, D, plan))

def check_transpose_identity(f, A, B):
    return Outcome(
        check=Check.TRANSPOSE_IDENTITY,
        lhs_norm=float(np.linalg.norm(perspective(f, B, A).entries)),
        value=transpose_identity_check(f, A, B),
    )

###############################################################################
# 5. Inequalities
###############################################################################

def _margin(check, lhs, comparison):
    return Outcome(
        check=check,
        lhs_norm=float(np.linalg.norm(entries_of(lhs))),
        value=comparison.margin,
        scale=comparison.scale,
    )

def _chain(check, lhs, lower, tol):
    """
    lhs ≥ lower ≥ 0: the margin is the worse of the two links.
    """
    gain = loewner_leq(lower, lhs, tol)
    floor = loewner_leq(np.zeros_like(lower), lower, tol)
    worst = gain if gain.margin <= floor.margin else floor
    return _margin(check, lhs, worst)

def inequality_checks(f):
    """
    Inequalities that apply to f, in report order.
    """
    if f.is_log:
        return [Check.ENTROPY_MONOTONE]
    checks = [Check.PERSPECTIVE_GAIN, Check.SWAPPED_PERSPECTIVE_GAIN, Check.FOUR_POINT_GAIN]
    if f.is_nonnegative:
        checks += [Check.NONNEGATIVE_SWAPPED_GAIN, Check.PERSPECTIVE_MONOTONE]
    return checks

def run_inequality(check, f, trial, tol):
    """
    Evaluates one inequality on an ordered trial.

    Returns:
        list[Outcome]: the four-point gain also yields its ungated gap.
    """
    lower, upper, P = trial.lower, trial.upper, trial.P
    A, B, C, D = trial.A, trial.B, trial.C, trial.D

    if check == Check.PERSPECTIVE_GAIN:
        lhs = perspective(f, upper, P).entries - perspective(f, lower, P).entries
        return [_chain(check, lhs, f.b * (upper.entries - lower.entries), tol)]
    if check in (Check.SWAPPED_PERSPECTIVE_GAIN, Check.NONNEGATIVE_SWAPPED_GAIN):
        lhs = perspective(f, P, upper).entries - perspective(f, P, lower).entries
        lower_bound = f.a * (upper.entries - lower.entries)
        if check == Check.NONNEGATIVE_SWAPPED_GAIN:
            if not f.is_nonnegative:
                raise ParamOutOfRange(f"{f.label} is not nonnegative on (0, inf)")
            return [_chain(check, lhs, lower_bound, tol)]
        return [_margin(check, lhs, loewner_leq(lower_bound, lhs, tol))]
    if check == Check.FOUR_POINT_GAIN:
        lhs = perspective(f, A, B).entries - perspective(f, C, D).entries
        bound = f.b * (A.entries - C.entries) + f.a * (B.entries - D.entries)
        gain = _margin(check, lhs, loewner_leq(bound, lhs, tol))
        gap = loewner_leq(np.zeros_like(lhs), lhs, tol).margin - loewner_leq(np.zeros_like(bound), bound, tol).margin
        return [gain, Outcome(Check.FOUR_POINT_GAP, gain.lhs_norm, gap, scale=gain.scale)]
    if check == Check.PERSPECTIVE_MONOTONE:
        comparison = perspective_monotone_check(f, A, B, C, D, tol)
        return [_margin(check, perspective(f, A, B).entries - perspective(f, C, D).entries, comparison)]
    if check == Check.ENTROPY_MONOTONE:
        comparison = entropy_monotone_check(P, lower, upper, tol)
        lhs = relative_entropy(P, upper).entries - relative_entropy(P, lower).entries
        return [_margin(check, lhs, comparison)]
    if check == Check.YOUNG:
        first, second = trial.young_pair
        comparison = young_check(first, second, trial.nu, tol)
        return [_margin(check, geometric_mean(first, second, trial.nu), comparison)]
    raise ParamOutOfRange(f"{check} is not an inequality")

def check_inequalities(f, trials, tol, checks=None):
    """
    Runs every applicable inequality on every trial.

    Args:
        f (LoewnerFunction): Function under test.
        trials (list[OrderedTrial]): Ordered ensembles.
        tol (float): Relative Loewner tolerance.
        checks (list[Check], optional): Restricts to these inequalities.

    Returns:
        list[ResidualReport]
    """
    checks = inequality_checks(f) if checks is None else list(checks)
    reports = []
    for trial in trials:
        for check in checks:
            for outcome in run_inequality(check, f, trial, tol):
                reports.append(ResidualReport.from_outcome(outcome, f.label, trial.dim, trial.seed, tol, tol))
    return reports

###############################################################################
# 6. Trials
###############################################################################

@frozen(eq=False)
class Trial:
    """Independent random SPD operands for the identity checks."""

    dim: int
    seed: int
    A: object
    B: object
    P: object
    C: object
    D: object
    Q: object


@frozen(eq=False)
class OrderedTrial:
    """lower ≤ upper, A ≥ C and B ≥ D, plus P and a weight ν."""

    dim: int
    seed: int
    lower: object
    upper: object
    P: object
    A: object
    B: object
    C: object
    D: object
    nu: float
    degenerate: bool = False

    @property
    def young_pair(self):
        # degenerate trials compare A♯_ν A with A∇_ν A
        return (self.A, self.A) if self.degenerate else (self.A, self.B)


def make_trial(dim, seed, condition_target):
    mats = {
        name: random_spd(dim, condition_target, derive_seed(seed, name))
        for name in ("A", "B", "P", "C", "D", "Q")
    }
    return Trial(dim=dim, seed=seed, **mats)

def make_ordered_trial(dim, seed, condition_target, degenerate=False):
    """
    Ordered operands; degenerate trials collapse every pair (upper = lower,
    A = C, B = D, and B = A for Young), where all gains are zero.
    """
    lower, upper = random_ordered_pair(dim, derive_seed(seed, "pair"), condition_target)
    a, b, c, d = random_ordered_quadruple(dim, seed, condition_target)
    P = random_spd(dim, condition_target, derive_seed(seed, "P"))
    nu = float(np.random.default_rng(derive_seed(seed, "nu")).uniform(0.0, 1.0))
    if degenerate:
        upper, a, b = lower, c, d
    return OrderedTrial(dim=dim, seed=seed, lower=lower, upper=upper, P=P, A=a, B=b, C=c, D=d, nu=nu,
                        degenerate=degenerate)

###############################################################################
# 7. Check groups
###############################################################################

def identity_checks(f):
    """
    Check groups that apply to f. A group is named by its first report id.
    """
    if f.is_log:
        return [
            Check.LOG_DIFFERENCE,
            Check.ENTROPY_DIFFERENCE,
            Check.FUNCTION_INTEGRAL,
            Check.SEGMENT_DERIVATIVE,
            Check.TRANSPOSE_IDENTITY,
        ]
    checks = [
        Check.FUNCTION_DIFFERENCE,
        Check.PERSPECTIVE_DIFFERENCE,
        Check.TRANSPOSE_DIFFERENCE,
        Check.TRANSPOSE_PERSPECTIVE_DIFFERENCE,
        Check.FOUR_POINT_DIFFERENCE,
        Check.RESOLVENT_FORM,
        Check.TRANSPOSE_RESOLVENT_FORM,
        Check.FUNCTION_INTEGRAL,
        Check.SEGMENT_DERIVATIVE,
        Check.TRANSPOSE_IDENTITY,
    ]
    if f.exponent is not None and 0 < f.exponent < 1:
        checks += [Check.GEOMETRIC_MEAN_DIFFERENCE, Check.DUAL_GEOMETRIC_MEAN_DIFFERENCE]
    return checks

def group_reports(check):
    """
    Report ids produced by a check group.
    """
    if check == Check.TRANSPOSE_PERSPECTIVE_DIFFERENCE:
        return [check, Check.SWAPPED_PERSPECTIVE_DIFFERENCE]
    if check == Check.LOG_DIFFERENCE:
        return [check, Check.LOG_SINGLE_INTEGRAL]
    if check == Check.FOUR_POINT_GAIN:
        return [check, Check.FOUR_POINT_GAP]
    return [check]

def run_identity(check, f, trial, plan, exponent_mode="corrected"):
    """
    Evaluates one identity group on a trial.

    Returns:
        list[Outcome]
    """
    A, B, P, C, D, Q = trial.A, trial.B, trial.P, trial.C, trial.D, trial.Q
    if isinstance(f, TransposeView):
        raise ParamOutOfRange("identity checks take the base function, not its transpose")

    if check == Check.INVERSE_DIFFERENCE:
        return [check_inverse_difference(C, D, plan)]
    if check == Check.FUNCTION_DIFFERENCE:
        return [check_function_difference(f, A, B, plan)]
    if check == Check.PERSPECTIVE_DIFFERENCE:
        return [check_perspective_difference(f, A, B, P, plan)]
    if check == Check.TRANSPOSE_DIFFERENCE:
        return [check_transpose_difference(f, A, B, plan)]
    if check == Check.TRANSPOSE_PERSPECTIVE_DIFFERENCE:
        return check_transpose_perspective_difference(f, C, D, Q, plan)
    if check == Check.FOUR_POINT_DIFFERENCE:
        return [check_four_point_difference(f, A, B, C, D, plan)]
    if check == Check.GEOMETRIC_MEAN_DIFFERENCE:
        return [check_geometric_mean_difference(f.exponent, A, B, P, plan, exponent_mode)]
    if check == Check.DUAL_GEOMETRIC_MEAN_DIFFERENCE:
        return [check_dual_geometric_mean_difference(f.exponent, C, D, Q, plan, exponent_mode)]
    if check == Check.LOG_DIFFERENCE:
        return check_log_difference(A, B, plan)
    if check == Check.ENTROPY_DIFFERENCE:
        return [check_entropy_difference(A, B, P, plan)]
    if check == Check.RESOLVENT_FORM:
        return [check_resolvent_form(f, A, B, plan)]
    if check == Check.TRANSPOSE_RESOLVENT_FORM:
        return [check_transpose_resolvent_form(f, A, B, plan)]
    if check == Check.FUNCTION_INTEGRAL:
        return [check_function_integral(f, A, plan)]
    if check == Check.SEGMENT_DERIVATIVE:
        return [check_segment_derivative(f, C, D, plan)]
    if check == Check.TRANSPOSE_IDENTITY:
        return [check_transpose_identity(f, A, B)]
    raise ParamOutOfRange(f"{check} is not an identity group")
