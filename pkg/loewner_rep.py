# loewner_rep.py

import re
from functools import lru_cache

import numpy as np
from attrs import field, frozen

from errors import (
    ClosedFormMismatch,
    DomainViolation,
    FunctionSpecError,
    NonFiniteIntegrand,
    ParamOutOfRange,
)
from quadrature import GRADING_CAP, IntegralResult, QuadraturePlan, integrate_halfline
from spd_core import SymMatrix, apply_scalar_function, batched_spd_solve, entries_of

CLOSED_FORM_GRID = (0.1, 0.5, 1.0, 2.0, 10.0)
CLOSED_FORM_RTOL = 1e-7
DENSITY_SAMPLES = (1e-3, 1.0, 1e3)

###############################################################################
# 1. Measures
###############################################################################

def _readonly(values):
    arr = np.array(values, dtype=float, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@frozen(eq=False)
class DiscreteMeasure:
    """Finitely many atoms λ_i > 0 with weights w_i > 0."""

    lambdas: np.ndarray = field(factory=tuple, converter=_readonly)
    weights: np.ndarray = field(factory=tuple, converter=_readonly)

    def __attrs_post_init__(self):
        if self.lambdas.shape != self.weights.shape:
            raise ParamOutOfRange("atom positions and weights differ in length")
        if np.any(~(self.lambdas > 0)) or np.any(~np.isfinite(self.lambdas)):
            raise ParamOutOfRange(f"atom positions must be finite and > 0, got {self.lambdas}")
        if np.any(~(self.weights > 0)) or np.any(~np.isfinite(self.weights)):
            raise ParamOutOfRange(f"atom weights must be finite and > 0, got {self.weights}")

    @property
    def is_empty(self):
        return self.lambdas.size == 0

    def integrate(self, g, plan=None, low=0.0, decay=0.0):
        """
        Σ w_i·g(λ_i), exact. plan, low and decay are accepted for a uniform
        interface with DensityMeasure.
        """
        if self.is_empty:
            return IntegralResult(value=0.0, error_estimate=0.0, panels_used=0, converged=True)
        values = np.asarray(g(self.lambdas), dtype=float)
        if not np.all(np.isfinite(values)):
            raise NonFiniteIntegrand(f"integrand is not finite at atoms {self.lambdas}")
        value = np.tensordot(self.weights, values, axes=1)
        value = float(value) if np.ndim(value) == 0 else value
        return IntegralResult(value=value, error_estimate=0.0, panels_used=0, converged=True)


@frozen(eq=False)
class DensityMeasure:
    """
    Density d(λ) on (0, ∞) with d ~ λ^σ at 0 and d ~ λ^{-δ} at ∞.

    The exponent bounds σ > -2 and δ > 1 make λ/(1+λ)·d(λ) integrable; the
    density itself is only checked to be finite and nonnegative at a few
    sample points.
    """

    density: object
    singularity_exponent: float = field(converter=float)
    decay_exponent: float = field(converter=float)

    def __attrs_post_init__(self):
        if not self.decay_exponent > 1:
            raise ParamOutOfRange(f"decay exponent must be > 1, got {self.decay_exponent}")
        if not self.singularity_exponent > -2:
            raise ParamOutOfRange(f"singularity exponent must be > -2, got {self.singularity_exponent}")
        d = np.asarray(self.density(np.asarray(DENSITY_SAMPLES)), dtype=float)
        if not np.all(np.isfinite(d) & (d >= 0)):
            raise ParamOutOfRange(f"density must be finite and >= 0, got {d} at λ = {DENSITY_SAMPLES}")

    @property
    def is_empty(self):
        return False

    def integrate(self, g, plan, low=0.0, decay=0.0):
        """
        ∫ g(λ)·d(λ) dλ over (0, ∞).

        Args:
            g (callable): Vectorized over λ-nodes.
            plan (QuadraturePlan): Budgets; its endpoint exponents are replaced.
            low (float): g ~ λ^low at 0.
            decay (float): g ~ λ^{-decay} at ∞.
        """
        plan = plan.with_exponents(self.singularity_exponent + low, self.decay_exponent + decay)

        def integrand(lams):
            values = np.asarray(g(lams), dtype=float)
            d = np.asarray(self.density(lams), dtype=float)
            return values * d.reshape((-1,) + (1,) * (values.ndim - 1))

        return integrate_halfline(integrand, plan)

###############################################################################
# 2. Functions
###############################################################################

@frozen(eq=False)
class LoewnerFunction:
    """
    f(t) = a + b·t + ∫ tλ/(t+λ) dw(λ), b ≥ 0.

    kind == "log" marks the logarithm, which is evaluated through
    ln t = (t−1)∫ dλ/((λ+1)(λ+t)) and has no (a, b, w).
    """

    a: float = field(converter=float)
    b: float = field(converter=float)
    measure: object
    closed_form: object = None
    derivative: object = None
    label: str = ""
    kind: str = "loewner"
    exponent: float = None
    verify_closed_form: bool = True

    def __attrs_post_init__(self):
        if not self.b >= 0:
            raise ParamOutOfRange(f"b must be >= 0, got {self.b}")
        if self.closed_form is not None and self.verify_closed_form:
            _check_closed_form(self)

    @property
    def is_log(self):
        return self.kind == "log"

    @property
    def is_nonnegative(self):
        # f(0+) = a and f is increasing
        return not self.is_log and self.a >= 0

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        if self.closed_form is not None:
            return np.asarray(self.closed_form(ts), dtype=float)
        return np.vectorize(lambda t: eval_scalar(self, t))(ts)

    def derivative_values(self, ts):
        if self.derivative is None:
            raise DomainViolation(f"{self.label} has no derivative closed form")
        return np.asarray(self.derivative(np.asarray(ts, dtype=float)), dtype=float)


@frozen(eq=False)
class TransposeView:
    """f̃(t) = t·f(1/t) = b + a·t + ∫ tλ/(1+tλ) dw(λ)."""

    base: LoewnerFunction

    @property
    def label(self):
        return f"~{self.base.label}"

    @property
    def kind(self):
        return self.base.kind

    @property
    def is_log(self):
        return self.base.is_log

    @property
    def a(self):
        return self.base.b

    @property
    def b(self):
        return self.base.a

    @property
    def measure(self):
        return self.base.measure

    @property
    def is_nonnegative(self):
        return self.base.is_nonnegative

    def values(self, ts):
        ts = np.asarray(ts, dtype=float)
        return ts * self.base.values(1.0 / ts)

    def derivative_values(self, ts):
        ts = np.asarray(ts, dtype=float)
        inv = 1.0 / ts
        return self.base.values(inv) - inv * self.base.derivative_values(inv)


def _check_closed_form(f):
    for t in CLOSED_FORM_GRID:
        expected = float(f.closed_form(np.float64(t)))
        got = eval_scalar(f, t)
        if abs(got - expected) > CLOSED_FORM_RTOL * (1.0 + abs(expected)):
            raise ClosedFormMismatch(
                f"{f.label}: representation gives {got!r} at t={t}, closed form gives {expected!r}"
            )

###############################################################################
# 3. Built-in functions
###############################################################################

def _fmt(x):
    return "%.15g" % x

@lru_cache(maxsize=None)
def make_power(r):
    """
    t^r for 0 < r ≤ 1.

    r < 1 uses the density sin(rπ)/π·λ^{r−2}: σ = r − 2 at 0, δ = 2 − r at ∞.
    r = 1 is the pure b-term. The closed form is checked against the
    representation only while the endpoint grading 1/r, 1/(1−r) of the
    scalar integral stays within GRADING_CAP; closer to 0 or 1 the
    quadrature cannot resolve it in double precision.
    """
    r = float(r)
    if not 0 < r <= 1:
        raise ParamOutOfRange(f"power exponent must be in (0, 1], got {r}")
    label = f"power:{_fmt(r)}"
    if r == 1:
        return LoewnerFunction(
            a=0.0, b=1.0, measure=DiscreteMeasure(),
            closed_form=lambda t: t * 1.0,
            derivative=lambda t: np.ones_like(t),
            label=label,
            exponent=1.0,
        )
    c = np.sin(r * np.pi) / np.pi
    measure = DensityMeasure(lambda lams: c * lams ** (r - 2.0), r - 2.0, 2.0 - r)
    return LoewnerFunction(
        a=0.0, b=0.0, measure=measure,
        closed_form=lambda t: t ** r,
        derivative=lambda t: r * t ** (r - 1.0),
        label=label,
        exponent=r,
        verify_closed_form=min(r, 1.0 - r) >= 1.0 / GRADING_CAP,
    )

@lru_cache(maxsize=None)
def make_log_normalized():
    return LoewnerFunction(
        a=0.0, b=0.0, measure=None,
        closed_form=np.log,
        derivative=lambda t: 1.0 / t,
        label="log",
        kind="log",
    )

def make_discrete(a, b, atoms, label=None):
    """
    f(t) = a + b·t + Σ w_i·tλ_i/(t+λ_i).

    Args:
        a (float): Constant term.
        b (float): Slope, >= 0.
        atoms (list[tuple[float, float]]): (λ_i, w_i) pairs, both > 0.
        label (str, optional): Defaults to the CLI spec string.
    """
    atoms = list(atoms)
    lams = np.array([float(lam) for lam, _ in atoms])
    ws = np.array([float(w) for _, w in atoms])
    measure = DiscreteMeasure(lams, ws)
    a, b = float(a), float(b)
    if label is None:
        label = f"discrete:{_fmt(a)},{_fmt(b)},[" + ",".join(f"{_fmt(l)}:{_fmt(w)}" for l, w in zip(lams, ws)) + "]"

    def closed_form(t):
        t = np.asarray(t, dtype=float)
        tt = t[..., None]
        return a + b * t + np.sum(ws * tt * lams / (tt + lams), axis=-1)

    def derivative(t):
        tt = np.asarray(t, dtype=float)[..., None]
        return b + np.sum(ws * lams ** 2 / (tt + lams) ** 2, axis=-1)

    return LoewnerFunction(a=a, b=b, measure=measure, closed_form=closed_form, derivative=derivative, label=label)

def make_affine(a, b):
    return make_discrete(a, b, [], label=f"affine:{_fmt(float(a))},{_fmt(float(b))}")

def transpose(f):
    """
    The transpose view; transposing a view returns its base.
    """
    if isinstance(f, TransposeView):
        return f.base
    return TransposeView(f)

###############################################################################
# 4. Evaluation
###############################################################################

def eval_scalar(f, t, plan=None):
    """
    Evaluates f(t) through its integral representation.

    Args:
        f (LoewnerFunction or TransposeView)
        t (float): > 0.
        plan (QuadraturePlan, optional): Defaults to QuadraturePlan().

    Returns:
        float

    Raises:
        DomainViolation: t <= 0.
        QuadratureBudgetExceeded: the plan's tolerance was not reached.
    """
    t = float(t)
    if not t > 0:
        raise DomainViolation(f"t must be > 0, got {t}")
    plan = plan or QuadraturePlan()
    if isinstance(f, TransposeView):
        if f.is_log:
            return t * eval_scalar(f.base, 1.0 / t, plan)
        return eval_transpose_integral(f.base, t, plan)
    if f.is_log:
        if t == 1.0:
            return 0.0
        result = integrate_halfline(lambda lams: 1.0 / ((lams + 1.0) * (lams + t)), plan.with_exponents(0.0, 2.0))
        return (t - 1.0) * result.value
    result = f.measure.integrate(lambda lams: t * lams / (t + lams), plan, low=1.0, decay=0.0)
    return f.a + f.b * t + result.value

def eval_transpose_integral(f, t, plan=None):
    """
    f̃(t) = b + t·a + ∫ tλ/(1+tλ) dw(λ) for a LoewnerFunction f.
    """
    if isinstance(f, TransposeView):
        f = f.base
    if f.is_log:
        raise DomainViolation("the logarithm has no Löwner triple")
    t = float(t)
    if not t > 0:
        raise DomainViolation(f"t must be > 0, got {t}")
    plan = plan or QuadraturePlan()
    result = f.measure.integrate(lambda lams: t * lams / (1.0 + t * lams), plan, low=1.0, decay=0.0)
    return f.b + t * f.a + result.value

def eval_matrix_spectral(f, U):
    """
    f(U) by the functional calculus, using the closed form when present.
    """
    return apply_scalar_function(U, f.values)

def _shift_stack(u, lams):
    # U + λI for every node
    return u[None, :, :] + lams[:, None, None] * np.eye(u.shape[0])[None, :, :]

def _scaled_stack(u, lams):
    # I + λU for every node
    return np.eye(u.shape[0])[None, :, :] + lams[:, None, None] * u[None, :, :]

def matrix_integral(f, U, plan=None):
    """
    f(U) through the resolvent integral, with quadrature metadata.

    loewner:   aI + bU + ∫ λ·U(U+λ)^{-1} dw(λ)
    transpose: ãI + b̃U + ∫ λ·U(I+λU)^{-1} dw(λ), ã = b and b̃ = a of the base
    log:       (U−I)∫ (U+λ)^{-1}/(λ+1) dλ

    Returns:
        tuple[SymMatrix, IntegralResult]
    """
    plan = plan or QuadraturePlan()
    u = entries_of(U)
    n = u.shape[0]
    eye = np.eye(n)

    if isinstance(f, TransposeView) and f.is_log:
        inner, result = matrix_integral(f.base, U, plan)
        out = -u @ inner.entries
        return SymMatrix(0.5 * (out + out.T)), result

    if f.is_log:
        def g(lams):
            solved = batched_spd_solve(_shift_stack(u, lams), u - eye)
            return solved / (lams + 1.0)[:, None, None]

        result = integrate_halfline(g, plan.with_exponents(0.0, 2.0))
        out = result.value
    elif isinstance(f, TransposeView):
        def g(lams):
            return lams[:, None, None] * batched_spd_solve(_scaled_stack(u, lams), u)

        result = f.measure.integrate(g, plan, low=1.0, decay=0.0)
        out = f.a * eye + f.b * u + result.value
    else:
        def g(lams):
            return lams[:, None, None] * batched_spd_solve(_shift_stack(u, lams), u)

        result = f.measure.integrate(g, plan, low=1.0, decay=0.0)
        out = f.a * eye + f.b * u + result.value

    return SymMatrix(0.5 * (out + out.T)), result

def eval_matrix_integral(f, U, plan=None):
    return matrix_integral(f, U, plan)[0]

###############################################################################
# 5. Function spec strings
###############################################################################

_NUMBER = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_POWER_RE = re.compile(rf"^power:({_NUMBER})$")
_AFFINE_RE = re.compile(rf"^affine:({_NUMBER}),({_NUMBER})$")
_DISCRETE_RE = re.compile(rf"^discrete:({_NUMBER}),({_NUMBER}),\[(.*)\]$")
_ATOM_RE = re.compile(rf"^({_NUMBER}):({_NUMBER})$")

def parse_function_spec(text):
    """
    Parses "power:R", "log", "affine:A,B" or "discrete:A,B,[l1:w1,l2:w2,...]".

    Raises:
        FunctionSpecError: Unknown form, malformed number, or parameters out of range.
    """
    spec = text.strip().replace(" ", "")
    try:
        if spec == "log":
            return make_log_normalized()
        m = _POWER_RE.match(spec)
        if m:
            return make_power(float(m.group(1)))
        m = _AFFINE_RE.match(spec)
        if m:
            return make_affine(float(m.group(1)), float(m.group(2)))
        m = _DISCRETE_RE.match(spec)
        if m:
            atoms = []
            body = m.group(3)
            for item in (body.split(",") if body else []):
                am = _ATOM_RE.match(item)
                if not am:
                    raise FunctionSpecError(f"malformed atom {item!r} in {text!r}")
                atoms.append((float(am.group(1)), float(am.group(2))))
            return make_discrete(float(m.group(1)), float(m.group(2)), atoms)
    except ParamOutOfRange as e:
        raise FunctionSpecError(f"{text!r}: {e}")
    raise FunctionSpecError(
        f"unknown function spec {text!r}; expected power:R, log, affine:A,B or discrete:A,B,[l:w,...]"
    )

