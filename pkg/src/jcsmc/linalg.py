"""Hermitian positive-definite solves via Cholesky."""
import numpy as np
from scipy import linalg as sla

from .errors import NumericalFailure


def hpd_solve(R, b):
    """Solve ``R x = b`` for Hermitian positive-definite ``R``."""
    try:
        c = sla.cho_factor(R, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise NumericalFailure("covariance is not positive definite") from exc
    return sla.cho_solve(c, b, check_finite=False)


def hpd_quad_inv(R, v):
    """``v^H R^{-1} v`` (real) without forming the inverse."""
    x = hpd_solve(R, v)
    return float(np.real(np.vdot(v, x)))


def hermitian_part(A):
    return 0.5 * (A + A.conj().T)
