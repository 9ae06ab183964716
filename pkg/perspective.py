# perspective.py

from attrs import field, frozen

from errors import ParamOutOfRange
from loewner_rep import eval_matrix_spectral, make_log_normalized, make_power, transpose
from spd_core import (
    check_same_dim,
    congruence,
    entries_of,
    frobenius_residual,
    loewner_leq,
    sqrt_and_inv_sqrt,
    validate_spd,
)


def _unit_interval(instance, attribute, value):
    if not 0.0 <= value <= 1.0:
        raise ParamOutOfRange(f"weight must be in [0, 1], got {value}")


@frozen
class Weight:
    nu: float = field(converter=float, validator=_unit_interval)


def _weight(nu):
    return nu if isinstance(nu, Weight) else Weight(nu)

###############################################################################
# 1. Perspective
###############################################################################

def perspective(f, B, A):
    """
    P_f(B, A) = A^{1/2} f(A^{-1/2} B A^{-1/2}) A^{1/2}.

    Args:
        f (LoewnerFunction or TransposeView): Evaluated spectrally.
        B (SpdMatrix): First argument.
        A (SpdMatrix): Second argument, the one whose square roots are used.

    Returns:
        SymMatrix
    """
    check_same_dim(B, A)
    root, inv_root = sqrt_and_inv_sqrt(A)
    middle = eval_matrix_spectral(f, congruence(B, inv_root))
    return congruence(middle, root)

def perspective_transpose(f, B, A):
    return perspective(transpose(f), B, A)

def transpose_identity_check(f, A, B):
    """
    Relative Frobenius residual of P_f̃(A, B) against P_f(B, A).
    """
    return frobenius_residual(perspective(f, B, A), perspective(transpose(f), A, B))

###############################################################################
# 2. Means and entropy
###############################################################################

def geometric_mean(A, B, nu):
    """
    A ♯_ν B, the perspective of t^ν with A as second argument.
    """
    nu = _weight(nu).nu
    check_same_dim(A, B)
    if nu == 0.0:
        return validate_spd(A)
    if nu == 1.0:
        return validate_spd(B)
    return validate_spd(perspective(make_power(nu), B, A))

def arithmetic_mean(A, B, nu):
    nu = _weight(nu).nu
    check_same_dim(A, B)
    return validate_spd((1.0 - nu) * entries_of(A) + nu * entries_of(B))

def relative_entropy(A, B):
    """
    S(A|B) = A^{1/2} ln(A^{-1/2} B A^{-1/2}) A^{1/2}.
    """
    return perspective(make_log_normalized(), B, A)

###############################################################################
# 3. Inequalities
###############################################################################

def young_check(A, B, nu, tol=1e-9):
    """
    A ♯_ν B ≤ A ∇_ν B.

    Returns:
        LoewnerComparison: margin is the smallest eigenvalue of the difference.
    """
    return loewner_leq(geometric_mean(A, B, nu), arithmetic_mean(A, B, nu), tol)

def perspective_monotone_check(f, A, B, C, D, tol=1e-9):
    """
    P_f(A, B) ≥ P_f(C, D) for A ≥ C > 0, B ≥ D > 0 and f ≥ 0 operator monotone.

    Raises:
        ParamOutOfRange: f is not nonnegative on (0, ∞).
    """
    if not f.is_nonnegative:
        raise ParamOutOfRange(f"{f.label} is not nonnegative on (0, inf)")
    return loewner_leq(perspective(f, C, D), perspective(f, A, B), tol)

def entropy_monotone_check(A, B1, B2, tol=1e-9):
    """
    S(A|B1) ≤ S(A|B2) for B1 ≤ B2.
    """
    return loewner_leq(relative_entropy(A, B1), relative_entropy(A, B2), tol)

