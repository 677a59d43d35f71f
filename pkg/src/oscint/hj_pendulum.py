"""Stiff spring pendulum integrators.

The model is a planar pendulum whose rod is a stiff spring: Cartesian
Hamiltonian (px^2 + py^2)/2 + (rbar - 1)^2 / (2 eps^2) + W(a) with
rbar = |(qx, qy)| and a the polar angle.  Internally everything runs in
polar-type coordinates (a, r, p_a, p_r) with r = rbar - 1 the spring
elongation; the maps below are symplectic for the standard two-form
da ^ dp_a + dr ^ dp_r.

One step costs a single evaluation of W' for the one-sided map and
(iterations + 1) evaluations for its adjoint; everything else is free
under the slow-gradient cost model.
"""

import dataclasses
import math

import numpy as np

from . import _backend
from . import systems as _sys
from .core import RunRecord, SlowGradientCounter
from .fixedpoint import NoConvergenceError, solve_fixed_point
from .systems import PendulumDomainError


def _fin(x, name):
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"{name} must be finite")
    return x


@dataclasses.dataclass(frozen=True)
class PendulumInternalState:
    """Angle a, spring elongation r = rbar - 1, conjugate momenta."""

    a: float
    r: float
    p_a: float
    p_r: float

    def __post_init__(self):
        for name in ("a", "r", "p_a", "p_r"):
            object.__setattr__(self, name, _fin(getattr(self, name), name))
        if 1.0 + self.r <= 0.0:
            raise PendulumDomainError("spring length 1 + r must be positive")

    def flat(self):
        return np.array([self.a, self.r, self.p_a, self.p_r])

    @classmethod
    def from_flat(cls, z):
        return cls(z[0], z[1], z[2], z[3])


@dataclasses.dataclass(frozen=True)
class PendulumCartesianState:
    qx: float
    qy: float
    px: float
    py: float

    def __post_init__(self):
        for name in ("qx", "qy", "px", "py"):
            object.__setattr__(self, name, _fin(getattr(self, name), name))

    def flat(self):
        return np.array([self.qx, self.qy, self.px, self.py])


def to_internal(c):
    rbar = math.hypot(c.qx, c.qy)
    if rbar <= 0.0:
        raise PendulumDomainError("pendulum bob at the pivot")
    a = math.atan2(c.qy, c.qx)
    ca, sa = math.cos(a), math.sin(a)
    return PendulumInternalState(
        a=a, r=rbar - 1.0,
        p_a=rbar * (c.py * ca - c.px * sa),
        p_r=c.px * ca + c.py * sa)


def to_cartesian(s):
    rbar = 1.0 + s.r
    ca, sa = math.cos(s.a), math.sin(s.a)
    return PendulumCartesianState(
        qx=rbar * ca, qy=rbar * sa,
        px=s.p_r * ca - s.p_a * sa / rbar,
        py=s.p_r * sa + s.p_a * ca / rbar)


def pendulum_initial_state(eps):
    """Stock run start: swinging through a = 1 with the spring stretched
    by eps and a unit of fast action in the radial mode."""
    return PendulumInternalState(a=1.0, r=eps, p_a=0.5, p_r=1.0)


def step_pendulum(state, sys, cfg, counter=None):
    """One-sided generating-function step, h of either sign.

    The radial pair is propagated through the rotating-frame variables
    b = (r / eps) cos tau + ... only implicitly; the update is written
    directly on (a, r, p_a, p_r).  Implicit only in the angular momentum:
    a scalar fixed point, with the radial amplitude eliminated explicitly.
    Returns (state, fixed point iterations).
    """
    eps, h = cfg.eps, cfg.h
    tau = h / eps
    ct, st = math.cos(tau), math.sin(tau)
    a, r, p_a, p_r = state.a, state.r, state.p_a, state.p_r
    b = r / eps
    wp = float(sys.Wp(a))
    if counter is not None:
        counter.add(1)
    wpp = float(sys.Wpp(a))

    # tau = 0 at the step start, so the rotating radial pair is (b, p_r)
    p_b = p_r

    def Pb_of(Pa, al):
        return p_b + eps * Pa ** 2 * st - 1.5 * h * eps * b * al ** 2

    def incr(Z):
        Pa = Z[0]
        al = Pa + h * wp
        Pb = Pb_of(Pa, al)
        cub = 1.5 * (b ** 2 + Pb ** 2) * al - 2.0 * al ** 3
        return np.array([-h * wp + 2.0 * h * eps ** 2 * Pb * al * wpp
                         - h ** 2 * eps ** 2 * cub * wpp])

    res = solve_fixed_point(np.array([p_a]), incr,
                            tol=cfg.fp_rel_tol, max_iter=cfg.fp_max_iter)
    if not res.converged:
        raise NoConvergenceError(
            f"pendulum momentum update stalled, last change "
            f"{res.last_relative_change:.3e}", res)
    Pa = res.solution[0]
    al = Pa + h * wp
    Pb = Pb_of(Pa, al)
    cub = 1.5 * (b ** 2 + Pb ** 2) * al - 2.0 * al ** 3
    A = (a + h * Pa + 2.0 * eps ** 2 * Pa * (Pb * ct - b * st)
         - 2.0 * eps ** 2 * Pb * al + h * eps ** 2 * cub)
    B = b + eps * Pa ** 2 * ct - eps * al ** 2 + 1.5 * h * eps * Pb * al ** 2
    R = eps * (B * ct + Pb * st)
    Pr = -B * st + Pb * ct
    return PendulumInternalState(A, R, Pa, Pr), res.iterations


def step_pendulum_adjoint(state, sys, cfg, counter=None):
    """Adjoint of step_pendulum at the same h: inverse of the -h step.

    The rotating-frame rotation is undone first, then position-like
    variables (A, B) solve a two-dimensional fixed point; each sweep
    needs one W' evaluation because the angular force sits at the
    unknown endpoint.  Returns (state, fixed point iterations).
    """
    eps, h = cfg.eps, cfg.h
    tau = h / eps
    ct, st = math.cos(tau), math.sin(tau)
    a, r, p_a, p_r = state.a, state.r, state.p_a, state.p_r
    b = (r / eps) * ct + p_r * st
    p_b = -(r / eps) * st + p_r * ct

    def incr(Z):
        A, B = Z[0], Z[1]
        be = p_a - h * float(sys.Wp(A))
        if counter is not None:
            counter.add(1)
        cub = 1.5 * (B ** 2 + p_b ** 2) * be - 2.0 * be ** 3
        dA = (h * p_a - 2.0 * eps ** 2 * p_a * (p_b * ct + B * st)
              + 2.0 * eps ** 2 * p_b * be + h * eps ** 2 * cub)
        dB = -eps * p_a ** 2 * ct + eps * be ** 2 + 1.5 * h * eps * p_b * be ** 2
        return np.array([dA, dB])

    res = solve_fixed_point(np.array([a, b]), incr,
                            tol=cfg.fp_rel_tol, max_iter=cfg.fp_max_iter)
    if not res.converged:
        raise NoConvergenceError(
            f"pendulum adjoint position update stalled, last change "
            f"{res.last_relative_change:.3e}", res)
    A, B = res.solution
    wpA = float(sys.Wp(A))
    if counter is not None:
        counter.add(1)
    wppA = float(sys.Wpp(A))
    be = p_a - h * wpA
    cub = 1.5 * (B ** 2 + p_b ** 2) * be - 2.0 * be ** 3
    Pb = p_b + eps * p_a ** 2 * st - 1.5 * h * eps * B * be ** 2
    Pa = (p_a - h * wpA + 2.0 * h * eps ** 2 * p_b * be * wppA
          + h ** 2 * eps ** 2 * cub * wppA)
    return PendulumInternalState(A, eps * B, Pa, Pb), res.iterations


def step_pendulum_symmetric(state, sys, cfg, counter=None):
    """Half step forward composed with the adjoint half step: symmetric
    and second order.  Returns (state, total fixed point iterations)."""
    half = dataclasses.replace(cfg, h=0.5 * cfg.h)
    mid, it1 = step_pendulum(state, sys, half, counter)
    out, it2 = step_pendulum_adjoint(mid, sys, half, counter)
    return out, it1 + it2


def _observe(sys, eps, state, out):
    out["H"].append(_sys.energy_pendulum(sys, state, eps))
    out["I"].append(_sys.pendulum_I(state, eps))


def run(state0, sys, cfg, t_max, scheme="hj", sample_every=None,
        backend="auto"):
    """Integrate the pendulum; accepts an internal or Cartesian start.

    scheme "hj" is the one-sided map, "hj-symmetric" the symmetric
    composition.  The run aborts if the spring compresses past
    1 + r <= 0.1, far outside the regime the expansion is built for.
    """
    from .hj_scalar import _sample_steps, default_sample_every
    if scheme not in ("hj", "hj-symmetric"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if hasattr(state0, "qx"):
        state0 = to_internal(state0)
    eps, h = cfg.eps, cfg.h
    if h <= 0.0:
        raise ValueError("runs require h > 0")
    n_steps = int(math.floor(t_max / h * (1.0 + 1e-12) + 1e-9))
    if sample_every is None:
        sample_every = default_sample_every(t_max, h)
    steps = _sample_steps(n_steps, sample_every)
    counter = SlowGradientCounter()
    out = {"H": [], "I": []}

    use_kernel = _backend.resolve(
        backend, sys.kernel_tag == "pendulum-cos2")
    if use_kernel:
        from . import _kernels
        flat, n_iters, n_calls, fail, fail_kind = _kernels.pendulum_hj_run(
            state0.flat(), eps, h, cfg.fp_rel_tol, cfg.fp_max_iter,
            n_steps, np.asarray(steps, dtype=np.int64),
            0 if scheme == "hj" else 1)
        if fail >= 0:
            if fail_kind == 2:
                raise PendulumDomainError(
                    f"spring length fell below 0.1 at step {fail}")
            raise NoConvergenceError(f"fixed point stalled at step {fail}")
        counter.add(int(n_calls))
        total_iters = int(n_iters)
        finals = [PendulumInternalState.from_flat(flat[i])
                  for i in range(flat.shape[0])]
        for st in finals:
            _observe(sys, eps, st, out)
        state = finals[-1]
    else:
        step_fn = (step_pendulum if scheme == "hj"
                   else step_pendulum_symmetric)
        total_iters = 0
        state = state0
        next_idx = 0
        for n in range(n_steps + 1):
            if n == steps[next_idx]:
                _observe(sys, eps, state, out)
                next_idx += 1
            if n < n_steps:
                state, its = step_fn(state, sys, cfg, counter)
                total_iters += its
                if 1.0 + state.r <= 0.1:
                    raise PendulumDomainError(
                        f"spring length fell below 0.1 at step {n + 1}")

    return RunRecord(times=np.asarray(steps, float) * h,
                     observables=out,
                     final_state=state,
                     slow_gradient_calls=counter.n,
                     n_steps=n_steps,
                     fp_total_iterations=total_iters)
