# spd_core.py

from functools import cached_property

import numpy as np
import scipy.linalg
from attrs import field, frozen

from errors import (
    ConvergenceFailure,
    DimensionMismatch,
    DomainViolation,
    FactorizationFailure,
    NonFiniteEntries,
    NotPositiveDefinite,
    NotSquare,
    NotSymmetric,
    ParamOutOfRange,
)
from util import derive_seed

SYMMETRY_RTOL = 1e-12
ORDERED_PAIR_SHIFT = 1e-6

###############################################################################
# 1. Types
###############################################################################

def _readonly(values):
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@frozen(eq=False)
class EigenPair:
    """Ascending eigenvalues with an orthonormal basis in the columns."""

    eigenvalues: np.ndarray = field(converter=_readonly)
    basis: np.ndarray = field(converter=_readonly)


@frozen(eq=False, slots=False)
class SymMatrix:
    """
    Dense real symmetric matrix. Build it with as_symmetric(); the
    constructor trusts its input.
    """

    entries: np.ndarray = field(converter=_readonly)

    @property
    def dim(self):
        return self.entries.shape[0]

    @cached_property
    def eig(self):
        return _eigendecompose(self.entries)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.entries
        return self.entries.astype(dtype)


@frozen(eq=False, slots=False)
class SpdMatrix(SymMatrix):
    """Symmetric positive-definite matrix. Build it with validate_spd()."""

    @property
    def min_eigenvalue(self):
        return float(self.eig.eigenvalues[0])


@frozen
class LoewnerComparison:
    ordered: bool
    margin: float
    scale: float


def entries_of(M):
    if isinstance(M, SymMatrix):
        return M.entries
    return np.asarray(M, dtype=float)

def _sym(arr):
    return SymMatrix(0.5 * (arr + arr.T))

def _with_eig(cls, entries, eig):
    out = cls(entries)
    out.__dict__["eig"] = eig
    return out

def check_same_dim(*mats):
    dims = {entries_of(m).shape for m in mats}
    if len(dims) != 1:
        shapes = ", ".join(str(entries_of(m).shape) for m in mats)
        raise DimensionMismatch(f"operands have different shapes: {shapes}")

###############################################################################
# 2. Validation and eigendecomposition
###############################################################################

def as_symmetric(entries):
    """
    Validates and symmetrizes a square real matrix.

    Args:
        entries (array-like or SymMatrix): Square matrix of finite reals.

    Returns:
        SymMatrix: (M + Mᵀ)/2.

    Raises:
        NotSquare, NonFiniteEntries, NotSymmetric
    """
    arr = np.asarray(entries_of(entries), dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise NotSquare(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntries("matrix holds NaN or Inf entries")

    scale = np.max(np.abs(arr))
    asym = np.max(np.abs(arr - arr.T))
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"asymmetry {asym:.3e} exceeds {SYMMETRY_RTOL:g} relative to max entry {scale:.3e}")
    return _sym(arr)

def validate_spd(entries):
    """
    Validates a symmetric positive-definite matrix.

    Args:
        entries (array-like or SymMatrix): Square matrix of finite reals.

    Returns:
        SpdMatrix: Symmetrized matrix with its eigendecomposition cached.

    Raises:
        NotSquare, NonFiniteEntries, NotSymmetric, NotPositiveDefinite
    """
    sym = as_symmetric(entries)
    eig = sym.eig
    if not eig.eigenvalues[0] > 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {eig.eigenvalues[0]:.6g} is not positive")
    return _with_eig(SpdMatrix, sym.entries, eig)

def _eigendecompose(entries):
    try:
        vals, vecs = scipy.linalg.eigh(entries)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise ConvergenceFailure(f"symmetric eigensolver failed: {e}")

    # Fix the sign of each column: first significant component positive
    cutoff = 1e-10 * np.max(np.abs(vecs), axis=0)
    first = np.argmax(np.abs(vecs) > cutoff, axis=0)
    signs = np.sign(vecs[first, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return EigenPair(vals, vecs * signs)

def sym_eig(M):
    """
    Eigendecomposition with ascending eigenvalues and sign-normalized basis.
    Cached on the matrix, so repeated calls are free.
    """
    if not isinstance(M, SymMatrix):
        M = as_symmetric(M)
    return M.eig

###############################################################################
# 3. Functional calculus
###############################################################################

def _evaluate_on_spectrum(phi, eigenvalues):
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise"):
            values = np.asarray(phi(eigenvalues), dtype=float)
    except (FloatingPointError, ValueError, ZeroDivisionError) as e:
        raise DomainViolation(f"function undefined on the spectrum {eigenvalues}: {e}")
    values = np.broadcast_to(values, eigenvalues.shape)
    if not np.all(np.isfinite(values)):
        raise DomainViolation(f"function is not finite on the spectrum {eigenvalues}")
    return values

def apply_scalar_function(M, phi):
    """
    Applies a scalar function through the eigendecomposition.

    Args:
        M (SymMatrix): Input matrix.
        phi (callable): Vectorized function, called once on the eigenvalue array.

    Returns:
        SymMatrix: basis · diag(phi(eigenvalues)) · basisᵀ.

    Raises:
        DomainViolation: phi raises or returns a non-finite value on the spectrum.
    """
    eig = sym_eig(M)
    values = _evaluate_on_spectrum(phi, eig.eigenvalues)
    return _sym((eig.basis * values) @ eig.basis.T)

def _spd_from_spectrum(values, basis):
    order = np.argsort(values, kind="stable")
    values = values[order]
    basis = basis[:, order]
    entries = (basis * values) @ basis.T
    return _with_eig(SpdMatrix, 0.5 * (entries + entries.T), EigenPair(values, basis))

def sqrt_and_inv_sqrt(M):
    """
    Returns (M^{1/2}, M^{-1/2}) from one eigendecomposition.
    """
    eig = sym_eig(M)
    root = np.sqrt(eig.eigenvalues)
    return _spd_from_spectrum(root, eig.basis), _spd_from_spectrum(1.0 / root, eig.basis)

def congruence(X, S):
    """
    S·X·S as a floating point triple product, symmetrized.
    """
    check_same_dim(X, S)
    s = entries_of(S)
    return _sym(s @ entries_of(X) @ s)

###############################################################################
# 4. Solves
###############################################################################

def resolvent_apply(M, shift, rhs):
    """
    Computes (M + shift·I)^{-1}·rhs with a Cholesky solve.

    The product is not symmetric for a general symmetric rhs, so a dense
    array is returned.

    Raises:
        ParamOutOfRange: shift < 0.
        DimensionMismatch: rhs rows differ from dim.
        FactorizationFailure: M + shift·I lost definiteness in rounding.
    """
    if not shift >= 0:
        raise ParamOutOfRange(f"shift must be >= 0, got {shift}")
    m = entries_of(M)
    b = entries_of(rhs)
    if b.shape[0] != m.shape[0]:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, matrix has dim {m.shape[0]}")
    try:
        factor = scipy.linalg.cho_factor(m + shift * np.eye(m.shape[0]), lower=True)
    except np.linalg.LinAlgError as e:
        raise FactorizationFailure(f"Cholesky failed at shift {shift}: {e}")
    return scipy.linalg.cho_solve(factor, b)

def batched_spd_solve(stack, rhs):
    """
    Solves a stack of SPD systems stack[..., :, :] @ X = rhs.

    Args:
        stack (np.ndarray): (..., n, n) SPD matrices.
        rhs (np.ndarray): (..., n, k), broadcast against the batch shape.

    Returns:
        np.ndarray: (..., n, k) solutions.

    Raises:
        FactorizationFailure: some matrix of the stack is not numerically SPD.
    """
    try:
        lower = np.linalg.cholesky(stack)
    except np.linalg.LinAlgError as e:
        raise FactorizationFailure(f"batched Cholesky failed: {e}")
    rhs = np.broadcast_to(rhs, stack.shape[:-2] + np.shape(rhs)[-2:])
    y = np.linalg.solve(lower, rhs)
    return np.linalg.solve(np.swapaxes(lower, -1, -2), y)

###############################################################################
# 5. Loewner order and residuals
###############################################################################

def spectral_norm(X):
    vals = scipy.linalg.eigvalsh(entries_of(X))
    return float(max(abs(vals[0]), abs(vals[-1])))

def loewner_leq(X, Y, tol=0.0):
    """
    Tests X ≤ Y in the Loewner order.

    Args:
        X, Y (SymMatrix): Same-dimension symmetric matrices.
        tol (float): Relative tolerance, scaled by 1 + ‖X‖₂ + ‖Y‖₂.

    Returns:
        LoewnerComparison: margin = smallest eigenvalue of Y − X.
    """
    if tol < 0:
        raise ParamOutOfRange(f"tol must be >= 0, got {tol}")
    check_same_dim(X, Y)
    diff = entries_of(Y) - entries_of(X)
    margin = float(scipy.linalg.eigvalsh(0.5 * (diff + diff.T))[0])
    scale = 1.0 + spectral_norm(X) + spectral_norm(Y)
    return LoewnerComparison(ordered=bool(margin >= -tol * scale), margin=margin, scale=scale)

def frobenius_residual(lhs, rhs):
    """
    ‖lhs − rhs‖_F / max(1, ‖lhs‖_F).
    """
    lhs = entries_of(lhs)
    return float(np.linalg.norm(lhs - entries_of(rhs)) / max(1.0, np.linalg.norm(lhs)))

###############################################################################
# 6. Seeded ensembles
###############################################################################

def random_spd(dim, condition_target, seed):
    """
    Random SPD matrix with a Haar-like basis and log-uniform spectrum.

    For dim >= 2 the extreme eigenvalues are pinned to
    condition_target^{∓1/2}, so the condition number is the target.

    Args:
        dim (int): Matrix size, >= 1.
        condition_target (float): >= 1. Exactly 1 gives the identity.
        seed (int): 64-bit seed.

    Returns:
        SpdMatrix
    """
    if dim < 1:
        raise ParamOutOfRange(f"dim must be >= 1, got {dim}")
    if not condition_target >= 1:
        raise ParamOutOfRange(f"condition_target must be >= 1, got {condition_target}")
    if condition_target == 1:
        return validate_spd(np.eye(dim))

    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs

    half = 0.5 * np.log(condition_target)
    logs = rng.uniform(-half, half, size=dim)
    if dim >= 2:
        logs[0], logs[1] = -half, half
    return validate_spd((q * np.exp(logs)) @ q.T)

def random_ordered_pair(dim, seed, condition_target=100.0):
    """
    Returns (X, Y) with Y ≥ X > 0: Y = X + GᵀG + 1e-6·I.
    """
    x = random_spd(dim, condition_target, seed)
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, 1])
    g = rng.standard_normal((dim, dim)) / np.sqrt(dim)
    y = x.entries + g.T @ g + ORDERED_PAIR_SHIFT * np.eye(dim)
    return x, validate_spd(0.5 * (y + y.T))

def random_ordered_quadruple(dim, seed, condition_target=100.0):
    """
    Returns (A, B, C, D) with A ≥ C > 0 and B ≥ D > 0 from two independent pairs.
    """
    c, a = random_ordered_pair(dim, derive_seed(seed, "A", "C"), condition_target)
    d, b = random_ordered_pair(dim, derive_seed(seed, "B", "D"), condition_target)
    return a, b, c, d
