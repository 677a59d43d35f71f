"""Plain fixed-point iteration for implicit step equations Z = z + A(Z)."""

import dataclasses

import numpy as np


class NonFiniteIterateError(RuntimeError):
    """An iterate left the floating-point range (step blow-up)."""


class NoConvergenceError(RuntimeError):
    """Raised by steppers when the fixed point did not converge."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclasses.dataclass
class FixedPointResult:
    solution: np.ndarray
    iterations: int
    converged: bool
    last_relative_change: float


def solve_fixed_point(z, A, tol, max_iter=100, x0=None):
    """Iterate Z <- z + A(Z), starting from x0 (defaults to z).

    Terminates when max|Z_new - Z| <= tol * max(1, max|Z_new|).  The number
    of iterations equals the number of A evaluations.  Returns the last
    iterate whether or not the tolerance was met; the caller decides what
    non-convergence means.  Raises NonFiniteIterateError on blow-up.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    z = np.asarray(z, dtype=float).copy()
    Z = z.copy() if x0 is None else np.asarray(x0, dtype=float).copy()
    rel = np.inf
    for k in range(1, max_iter + 1):
        Znew = z + np.asarray(A(Z), dtype=float)
        if not np.all(np.isfinite(Znew)):
            raise NonFiniteIterateError(f"non-finite iterate at iteration {k}")
        change = float(np.max(np.abs(Znew - Z)))
        scale = max(1.0, float(np.max(np.abs(Znew))))
        rel = change / scale
        Z = Znew
        if rel <= tol:
            return FixedPointResult(Z, k, True, rel)
    return FixedPointResult(Z, max_iter, False, rel)
