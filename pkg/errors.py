# errors.py

import numpy as np


class OperatorError(Exception):
    """Base class for every error raised by the matrix/perspective code."""


###############################################################################
# 1. Input validation
###############################################################################

class NotSquare(OperatorError, ValueError):
    pass


class NotSymmetric(OperatorError, ValueError):
    pass


class NotPositiveDefinite(OperatorError, ValueError):
    pass


class NonFiniteEntries(OperatorError, ValueError):
    pass


class DimensionMismatch(OperatorError, ValueError):
    pass


class DomainViolation(OperatorError, ValueError):
    pass


class ParamOutOfRange(OperatorError, ValueError):
    pass


class ClosedFormMismatch(OperatorError, ValueError):
    pass


###############################################################################
# 2. Linear algebra
###############################################################################

class ConvergenceFailure(OperatorError, np.linalg.LinAlgError):
    pass


class FactorizationFailure(OperatorError, np.linalg.LinAlgError):
    pass


###############################################################################
# 3. Quadrature
###############################################################################

class QuadratureBudgetExceeded(OperatorError, ArithmeticError):
    """
    Raised by strict plans when max_panels is reached before rel_tol.

    Args:
        message (str): Human readable description.
        result (IntegralResult): The partial result at the moment the budget ran out.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonFiniteIntegrand(OperatorError, ArithmeticError):
    pass


###############################################################################
# 4. Inputs from the outside (files, flags, profiles)
###############################################################################

class FunctionSpecError(OperatorError, ValueError):
    pass


class MatrixFileError(OperatorError, ValueError):
    """
    A matrix file could not be read or parsed.

    Args:
        path (str): The offending file.
        reason (str): What went wrong.
    """

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class ConfigError(OperatorError, ValueError):
    pass
