"""State containers, run records and verification helpers.

Flattened phase-space vectors always put positions first and momenta
second, in matching order, so the canonical structure matrix is
J = [[0, I], [-I, 0]].  All checks in this module (Jacobians, symplectic
defect, gradient consistency) use central finite differences.
"""

import dataclasses
import math
import warnings

import numpy as np


class StiffnessWarning(UserWarning):
    """Step size outside the accuracy regime of the long-step schemes."""


def _vec(x, name):
    v = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if v.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def _scalar(x, name):
    v = float(x)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite")
    return v


@dataclasses.dataclass(frozen=True)
class SlowFastState:
    """Phase-space point split into slow (q1, p1) and fast (q2, p2) parts."""

    q1: np.ndarray
    q2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        for name in ("q1", "q2", "p1", "p2"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        if self.q1.shape != self.p1.shape:
            raise ValueError("q1 and p1 must have the same length")
        if self.q2.shape != self.p2.shape:
            raise ValueError("q2 and p2 must have the same length")

    @property
    def s(self):
        return self.q1.size

    @property
    def f(self):
        return self.q2.size

    def flat(self):
        return np.concatenate([self.q1, self.q2, self.p1, self.p2])

    @classmethod
    def from_flat(cls, z, s, f):
        z = np.asarray(z, dtype=float)
        if z.size != 2 * (s + f):
            raise ValueError("flat vector has wrong length")
        return cls(z[:s], z[s:s + f], z[s + f:2 * s + f], z[2 * s + f:])


@dataclasses.dataclass(frozen=True)
class ReducedScalarState:
    """Rotating-frame state (q1, x, sigma, p1, y, a) for a scalar frequency.

    sigma is the accumulated fast phase (unbounded, never wrapped) and a is
    its conjugate, an action-like energy of the fast motion.  Canonical
    pairing for the flat layout: (q1, p1), (x, y), (sigma, a).
    """

    q1: np.ndarray
    x: np.ndarray
    sigma: float
    p1: np.ndarray
    y: np.ndarray
    a: float

    def __post_init__(self):
        for name in ("q1", "x", "p1", "y"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        object.__setattr__(self, "sigma", _scalar(self.sigma, "sigma"))
        object.__setattr__(self, "a", _scalar(self.a, "a"))
        if self.q1.shape != self.p1.shape:
            raise ValueError("q1 and p1 must have the same length")
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same length")

    @property
    def s(self):
        return self.q1.size

    @property
    def f(self):
        return self.x.size

    def flat(self):
        return np.concatenate([self.q1, self.x, [self.sigma],
                               self.p1, self.y, [self.a]])

    @classmethod
    def from_flat(cls, z, s, f):
        z = np.asarray(z, dtype=float)
        if z.size != 2 * (s + f + 1):
            raise ValueError("flat vector has wrong length")
        n = s + f + 1
        return cls(z[:s], z[s:s + f], z[s + f],
                   z[n:n + s], z[n + s:n + s + f], z[n + s + f])


@dataclasses.dataclass(frozen=True)
class IntegratorConfig:
    """Step size, stiffness parameter and solver tolerances for one run."""

    eps: float
    h: float
    fp_rel_tol: float = 1e-10
    fp_max_iter: int = 100
    fd_delta: float = 1e-6

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ValueError("eps must be positive and finite")
        # single steps are defined for either sign of h (adjoints are built
        # from negated steps); runs check h > 0 themselves
        if not (math.isfinite(self.h) and self.h != 0.0):
            raise ValueError("h must be nonzero and finite")
        if not (math.isfinite(self.fp_rel_tol) and 0 < self.fp_rel_tol < 1):
            raise ValueError("fp_rel_tol must lie in (0, 1)")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be at least 1")
        if not (math.isfinite(self.fd_delta) and self.fd_delta > 0):
            raise ValueError("fd_delta must be positive")
        ratio = self.h ** 2 / self.eps
        if ratio >= 0.4:
            warnings.warn(
                f"h^2/eps = {ratio:.3g} >= 0.4; the implicit step equations "
                "may converge slowly or not at all",
                StiffnessWarning, stacklevel=2)


@dataclasses.dataclass
class RunRecord:
    """Sampled output of one integration run.

    times are the sample instants (strictly increasing, first entry is the
    initial time).  observables maps a name to a sequence aligned with
    times.  slow_gradient_calls counts evaluations of slow-potential
    gradients only, the cost unit used to compare schemes.  n_steps and
    fp_total_iterations allow closed-form checks of that count.
    """

    times: np.ndarray
    observables: dict
    final_state: object
    slow_gradient_calls: int
    n_steps: int
    fp_total_iterations: int = 0

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0:
            raise ValueError("times must be a non-empty 1-d array")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        obs = {}
        for name, seq in self.observables.items():
            arr = np.asarray(seq, dtype=float)
            if arr.shape != self.times.shape:
                raise ValueError(f"observable {name!r} length mismatch")
            obs[name] = arr
        self.observables = obs


class SlowGradientCounter:
    """Mutable tally of slow-gradient evaluations."""

    __slots__ = ("n",)

    def __init__(self):
        self.n = 0

    def add(self, k=1):
        self.n += k


def jacobian_fd(step_map, z, delta):
    """Jacobian of a map R^n -> R^n by central differences.

    Column j is (step_map(z + delta e_j) - step_map(z - delta e_j)) / (2 delta).
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    cols = []
    for j in range(n):
        e = np.zeros(n)
        e[j] = delta
        fp = np.asarray(step_map(z + e), dtype=float)
        fm = np.asarray(step_map(z - e), dtype=float)
        cols.append((fp - fm) / (2.0 * delta))
    jac = np.column_stack(cols)
    if jac.shape != (n, n):
        raise ValueError("step_map output length differs from input length")
    if not np.all(np.isfinite(jac)):
        raise ValueError("non-finite entries in finite-difference Jacobian")
    return jac


def canonical_structure(n):
    """The 2n x 2n matrix [[0, I], [-I, 0]] for (positions, momenta) layout."""
    S = np.zeros((2 * n, 2 * n))
    S[:n, n:] = np.eye(n)
    S[n:, :n] = -np.eye(n)
    return S


def symplectic_defect(jac):
    """Max-norm of J^T S J - S; zero exactly when J is symplectic."""
    jac = np.asarray(jac, dtype=float)
    if jac.ndim != 2 or jac.shape[0] != jac.shape[1] or jac.shape[0] % 2:
        raise ValueError("Jacobian must be square with even dimension")
    S = canonical_structure(jac.shape[0] // 2)
    return float(np.max(np.abs(jac.T @ S @ jac - S)))


def gradient_check(value_fn, grad_fn, z, delta):
    """Largest relative mismatch between grad_fn and the central-difference
    gradient of value_fn at z.  Relative to max(1, |fd value|) per entry."""
    z = np.asarray(z, dtype=float)
    g = np.asarray(grad_fn(z), dtype=float)
    if g.shape != z.shape:
        raise ValueError("gradient length differs from input length")
    worst = 0.0
    for i in range(z.size):
        e = np.zeros(z.size)
        e[i] = delta
        fd = (float(value_fn(z + e)) - float(value_fn(z - e))) / (2.0 * delta)
        worst = max(worst, abs(g[i] - fd) / max(1.0, abs(fd)))
    return worst
