# quadrature.py

import logging
from functools import lru_cache

import numpy as np
from attrs import evolve, field, frozen

from errors import NonFiniteIntegrand, ParamOutOfRange, QuadratureBudgetExceeded

# Panels narrower than this (in the mapped variable) are never bisected.
MIN_PANEL_WIDTH = 2.0 ** -45
# Largest number of λ-nodes handed to an integrand in one call.
LAMBDA_BATCH = 256

###############################################################################
# 1. Plan and result types
###############################################################################

def _at_least(bound):
    def check(instance, attribute, value):
        if value < bound:
            raise ParamOutOfRange(f"{attribute.name} must be >= {bound}, got {value}")
    return check

def _positive(instance, attribute, value):
    if not value > 0:
        raise ParamOutOfRange(f"{attribute.name} must be > 0, got {value}")

def _optional_float(value):
    return None if value is None else float(value)


@frozen
class QuadraturePlan:
    """
    Node budgets and tolerances for the t- and λ-integrals.

    singularity_exponent and decay_exponent describe the λ-integrand
    (~λ^σ at 0, ~λ^{-δ} at ∞) and switch on the endpoint grading.
    With strict=False an exhausted budget returns a non-converged result
    instead of raising.
    """

    t_order: int = field(default=32, validator=_at_least(2))
    t_grading: int = field(default=3, validator=_at_least(1))
    lambda_panels_init: int = field(default=8, validator=_at_least(1))
    lambda_order: int = field(default=16, validator=_at_least(1))
    rel_tol: float = field(default=1e-9, converter=float, validator=_positive)
    max_panels: int = field(default=4096)
    singularity_exponent: float = field(default=None, converter=_optional_float)
    decay_exponent: float = field(default=None, converter=_optional_float)
    strict: bool = True

    @max_panels.validator
    def _check_max_panels(self, attribute, value):
        if value < max(2, self.lambda_panels_init):
            raise ParamOutOfRange(
                f"max_panels must be >= max(2, lambda_panels_init={self.lambda_panels_init}), got {value}"
            )

    def with_exponents(self, singularity_exponent, decay_exponent):
        return evolve(self, singularity_exponent=singularity_exponent, decay_exponent=decay_exponent)


@frozen(eq=False)
class IntegralResult:
    value: object
    error_estimate: float
    panels_used: int
    converged: bool

###############################################################################
# 2. Node tables
###############################################################################

def _symmetric_leggauss(order):
    x, w = np.polynomial.legendre.leggauss(order)
    # exact mirror symmetry of the table
    return 0.5 * (x - x[::-1]), 0.5 * (w + w[::-1])

@lru_cache(maxsize=None)
def gauss_legendre_unit(order):
    """
    Gauss–Legendre nodes and weights on [0, 1].
    """
    if order < 1:
        raise ParamOutOfRange(f"order must be >= 1, got {order}")
    x, w = _symmetric_leggauss(order)
    t, wt = 0.5 * (1.0 + x), 0.5 * w
    t.setflags(write=False)
    wt.setflags(write=False)
    return t, wt

@lru_cache(maxsize=None)
def segment_rule(order, grading=1):
    """
    Rule on t ∈ [0, 1] for segment integrals of (1−t)·X + t·Y.

    Gauss–Legendre in τ with t = τ^m / (τ^m + (1−τ)^m), m = grading. The
    substitution clusters nodes at both ends, where resolvent poles of
    ill-conditioned segments sit. Returns (s, t, weights) with s = 1 − t
    computed as a separate array, so that reversing the node order swaps
    s and t exactly.
    """
    if grading < 1:
        raise ParamOutOfRange(f"grading must be >= 1, got {grading}")
    x, w = _symmetric_leggauss(order)
    tau = 0.5 * (1.0 + x)
    sig = 0.5 * (1.0 - x)
    w = 0.5 * w
    if grading == 1:
        s, t, wt = sig, tau, w
    else:
        tm, sm = tau ** grading, sig ** grading
        den = tm + sm
        t, s = tm / den, sm / den
        wt = w * grading * (tau * sig) ** (grading - 1) / den ** 2
    for arr in (s, t, wt):
        arr.setflags(write=False)
    return s, t, wt

###############################################################################
# 3. Integration on [0, 1]
###############################################################################

def _stack_values(values, count):
    values = np.asarray(values, dtype=float)
    if values.ndim == 0:
        return np.full(count, float(values))
    if values.shape[0] != count:
        raise ValueError(f"integrand returned leading axis {values.shape[0]}, expected {count}")
    return values

def _check_finite(values, where):
    if not np.all(np.isfinite(values)):
        raise NonFiniteIntegrand(f"integrand is not finite at {where}")

def integrate_unit(g, order=32):
    """
    Fixed-order Gauss–Legendre sum over [0, 1].

    Args:
        g (callable): Receives the node array, returns values stacked along
            axis 0 (a scalar result is broadcast).
        order (int): Number of nodes.

    Returns:
        float or np.ndarray: The quadrature sum.
    """
    t, w = gauss_legendre_unit(order)
    values = _stack_values(g(t), len(t))
    _check_finite(values, "t-nodes")
    out = np.tensordot(w, values, axes=1)
    return float(out) if np.ndim(out) == 0 else out

def integrate_segment(kernel, lams, plan):
    """
    Inner t-integral for a batch of λ-nodes.

    Args:
        kernel (callable): kernel(lams, s, t) -> array of shape (m, k, ...).
        lams (np.ndarray): (m,) λ-nodes.
        plan (QuadraturePlan): t_order and t_grading.

    Returns:
        np.ndarray: (m, ...) values of ∫₀¹ kernel dt.
    """
    s, t, w = segment_rule(plan.t_order, plan.t_grading)
    values = kernel(lams, s, t)
    return np.tensordot(values, w, axes=([1], [0]))

###############################################################################
###############################################################################
# 4. Integration on (0, ∞)
###############################################################################

# Caps the endpoint grading powers; x^8 stays far from underflow for the
# narrowest panels.
GRADING_CAP = 8.0
# Each round bisects every panel whose error estimate is within this
# factor of the worst one.
REFINE_FRACTION = 0.25
# Rounds in a row in which the error estimate fails to drop below
# STALL_RATIO of its previous value before refinement stops.
STALL_ROUNDS = 5
STALL_RATIO = 0.9

LOWER, UPPER = 0, 1

def _grading_powers(plan):
    near, far = 1.0, 1.0
    sigma, delta = plan.singularity_exponent, plan.decay_exponent
    if sigma is not None and sigma > -1 and not float(sigma).is_integer():
        near = min(1.0 / (1.0 + sigma), GRADING_CAP)
    if delta is not None:
        if delta <= 1:
            logging.warning(f"Integrand decay exponent {delta:g} <= 1: the tail is not integrable")
        elif not float(delta - 2).is_integer():
            far = min(1.0 / (delta - 1.0), GRADING_CAP)
    return near, far

def _map_lower(x, near):
    """
    x ∈ (0, 1] -> (λ, dλ/dx) on (0, 1], x measured from λ = 0.
    """
    u = 0.5 * x ** near
    return u / (1.0 - u), 0.5 * near * x ** (near - 1.0) / (1.0 - u) ** 2

def _map_upper(y, far):
    """
    y ∈ (0, 1] -> (λ, |dλ/dy|) on [1, ∞), y measured from λ = ∞.
    """
    e = 0.5 * y ** far
    return (1.0 - e) / e, 0.5 * far * y ** (far - 1.0) / e ** 2

def _norm(value):
    return float(np.linalg.norm(np.ravel(value)))

class _PanelRule:
    """
    Evaluates order-n Gauss sums on many panels with batched integrand calls.

    A panel is (side, a, b) with 0 <= a < b <= 1 in the endpoint coordinate
    of its half, so nodes never round onto λ = 0 or λ = ∞.
    """

    def __init__(self, g, plan):
        self.g = g
        x, w = _symmetric_leggauss(plan.lambda_order)
        self.x = 0.5 * (1.0 + x)
        self.w = 0.5 * w
        self.near, self.far = _grading_powers(plan)

    def estimates(self, sides, lefts, rights):
        sides = np.asarray(sides)
        lefts = np.asarray(lefts, dtype=float)
        widths = np.asarray(rights, dtype=float) - lefts
        z = lefts[:, None] + widths[:, None] * self.x[None, :]
        lam = np.empty_like(z)
        jac = np.empty_like(z)
        lo = sides == LOWER
        lam[lo], jac[lo] = _map_lower(z[lo], self.near)
        lam[~lo], jac[~lo] = _map_upper(z[~lo], self.far)
        lam, jac = lam.ravel(), jac.ravel()
        weights = (widths[:, None] * self.w[None, :]).ravel() * jac

        chunks = []
        for start in range(0, len(lam), LAMBDA_BATCH):
            part = lam[start:start + LAMBDA_BATCH]
            chunks.append(_stack_values(self.g(part), len(part)))
        values = np.concatenate(chunks, axis=0)
        _check_finite(values, f"λ in [{lam.min():.3e}, {lam.max():.3e}]")

        weighted = values * weights.reshape((-1,) + (1,) * (values.ndim - 1))
        n = len(self.x)
        return weighted.reshape((len(lefts), n) + values.shape[1:]).sum(axis=1)


@frozen(eq=False)
class _Leaf:
    side: int
    a: float
    b: float
    lower: object
    upper: object
    error: float

    @property
    def value(self):
        return self.lower + self.upper


def _initial_panels(count):
    per_half = max(1, count // 2)
    edges = np.linspace(0.0, 1.0, per_half + 1)
    return [(side, a, b) for side in (LOWER, UPPER) for a, b in zip(edges[:-1], edges[1:])]

def _resolve(rule, pending):
    """
    Half sums for pending (side, a, b, coarse) panels.
    """
    sides = [p[0] for p in pending]
    lefts = [p[1] for p in pending]
    rights = [p[2] for p in pending]
    mids = [0.5 * (a + b) for a, b in zip(lefts, rights)]
    halves = rule.estimates(sides + sides, lefts + mids, mids + rights)
    k = len(pending)
    return [
        _Leaf(side, a, b, halves[i], halves[k + i], _norm(halves[i] + halves[k + i] - coarse))
        for i, (side, a, b, coarse) in enumerate(pending)
    ]

def integrate_halfline(g, plan):
    """
    Adaptive integral of g over (0, ∞).

    (0, 1] and [1, ∞) are integrated separately, each in the coordinate
    measured from its far endpoint and graded towards it when the plan
    declares the endpoint exponents. A panel's order-n sum is compared with
    the sum over its halves; that difference is its error estimate.
    Refinement stops once the summed estimates are at most
    rel_tol·(1 + ‖total‖). Until then every round bisects the panels whose
    estimate is within REFINE_FRACTION of the worst. The order of
    refinement never depends on rel_tol, so a tighter tolerance uses at
    least as many panels.

    Args:
        g (callable): Receives an array of λ-nodes, returns values stacked
            along axis 0 (scalars or matrices).
        plan (QuadraturePlan)

    Returns:
        IntegralResult

    Raises:
        QuadratureBudgetExceeded: strict plan and max_panels reached first.
        NonFiniteIntegrand: g returned NaN or Inf on some node.
    """
    rule = _PanelRule(g, plan)
    panels = _initial_panels(plan.lambda_panels_init)
    coarse = rule.estimates(*zip(*panels))
    leaves = _resolve(rule, [(side, a, b, coarse[i]) for i, (side, a, b) in enumerate(panels)])

    exhausted = False
    stalled = 0
    previous = np.inf
    rounds = 0

    while True:
        rounds += 1
        total = sum(leaf.value for leaf in leaves)
        error = sum(leaf.error for leaf in leaves)
        if error <= plan.rel_tol * (1.0 + _norm(total)):
            break

        stalled = stalled + 1 if error > STALL_RATIO * previous else 0
        previous = error
        if stalled >= STALL_ROUNDS:
            logging.debug(f"halfline error estimate stalled at {error:.3e} after {rounds} rounds")
            break

        worst = max(leaf.error for leaf in leaves)
        order = sorted(range(len(leaves)), key=lambda i: -leaves[i].error)
        chosen = [
            i for i in order
            if leaves[i].error >= REFINE_FRACTION * worst and leaves[i].b - leaves[i].a >= 2.0 * MIN_PANEL_WIDTH
        ]
        room = plan.max_panels - len(leaves)
        if chosen and room <= 0:
            exhausted = True
            break
        chosen = set(chosen[:room])
        if not chosen:
            break

        kept, pending = [], []
        for i, leaf in enumerate(leaves):
            if i not in chosen:
                kept.append(leaf)
                continue
            mid = 0.5 * (leaf.a + leaf.b)
            pending.append((leaf.side, leaf.a, mid, leaf.lower))
            pending.append((leaf.side, mid, leaf.b, leaf.upper))
        leaves = kept + _resolve(rule, pending)
        logging.debug(f"halfline round {rounds}: {len(leaves)} panels, error estimate {error:.3e}")

    value = float(total) if np.ndim(total) == 0 else total
    converged = error <= plan.rel_tol * (1.0 + _norm(total))
    result = IntegralResult(value=value, error_estimate=error, panels_used=len(leaves), converged=converged)

    if exhausted:
        message = (
            f"max_panels={plan.max_panels} reached before rel_tol={plan.rel_tol:g} "
            f"(error estimate {error:.3e})"
        )
        if plan.strict:
            raise QuadratureBudgetExceeded(message, result)
        logging.debug(message)
    return result

def integrate_double(kernel, weight, plan):
    """
    ∫₀^∞ weight(λ) ∫₀¹ kernel(λ, t) dt dλ.

    The inner t-integral uses the fixed graded rule of the plan and is
    treated as exact; the error estimate comes from the λ adaptivity.

    Args:
        kernel (callable): kernel(lams, s, t) -> (m, k, ...) with s = 1 − t.
        weight (callable): weight(lams) -> (m,).
        plan (QuadraturePlan)

    Returns:
        IntegralResult
    """
    def outer(lams):
        inner = integrate_segment(kernel, lams, plan)
        w = np.asarray(weight(lams), dtype=float)
        return inner * w.reshape((-1,) + (1,) * (inner.ndim - 1))

    return integrate_halfline(outer, plan)
