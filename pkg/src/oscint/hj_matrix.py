"""Long-step schemes for a constant block-diagonal frequency matrix.

The forward step solves a small implicit system for (P1, Y2), evaluates
the slow position and fast frame explicitly, and finishes with the exact
fast rotation over the step.  Because the generating function keeps the
fast angles tau_i = omega_i h / eps exact, the scheme needs no assumption
on rational relations between the frequencies: resonant and non-resonant
frequency sets run through the identical code path.

The adjoint step inverts the negated-step map numerically: the final
rotation is undone in closed form and the remaining near-identity part is
inverted by an outer fixed point whose sweeps each contain one forward
core evaluation.  The symmetric composition (half step forward, half step
adjoint) is time-reversible and second order.
"""

import dataclasses
import math

import numpy as np

from . import _backend
from . import systems as _sys
from .core import RunRecord, SlowFastState, SlowGradientCounter
from .fixedpoint import NoConvergenceError, solve_fixed_point


@dataclasses.dataclass(frozen=True)
class RotatingMatrixState:
    """State in the rotating fast frame; t_phase is the frame angle offset.

    With the convention used by the steppers the frame is re-anchored at
    every step, so t_phase stays 0 and (x2, y2) coincide with (q2, p2).
    """

    q1: np.ndarray
    x2: np.ndarray
    p1: np.ndarray
    y2: np.ndarray
    t_phase: float = 0.0

    def __post_init__(self):
        from .core import _vec
        for name in ("q1", "x2", "p1", "y2"):
            object.__setattr__(self, name, _vec(getattr(self, name), name))
        object.__setattr__(self, "t_phase", float(self.t_phase))

    @classmethod
    def from_state(cls, state):
        return cls(state.q1, state.q2, state.p1, state.p2)

    def to_state(self):
        return SlowFastState(self.q1, self.x2, self.p1, self.y2)


def _count(counter, k=1):
    if counter is not None:
        counter.add(k)


def _core_maps(sys, counter):
    """Bind counted evaluators for the slow-manifold callbacks."""

    def g1(q1):
        _count(counter)
        return np.asarray(sys.g1(q1), float)

    def g2(q1):
        _count(counter)
        return np.asarray(sys.g2(q1), float)

    return g1, g2


def _forward_core(q1, x2, p1, y2, sys, eps, h, tol, max_iter, counter):
    """Steps 1 to 4 of the forward scheme with signed step h: everything
    except the final rotation.  Returns (Q1, X2, P1, Y2, iterations)."""
    om = sys.omega_vector()
    slices = sys.block_slices()
    inv_w2 = np.array([1.0 / g.omega ** 2 for g in sys.groups])
    inv_w = np.array([1.0 / g.omega for g in sys.groups])
    tau_g = np.array([g.omega * h / eps for g in sys.groups])
    sin_g, cos_g = np.sin(tau_g), np.cos(tau_g)
    g1_f, g2_f = _core_maps(sys, counter)

    r2 = om * x2 / eps
    g1_q = g1_f(q1)
    g2_q = g2_f(q1)
    H2 = sys.Hess2(q1)
    M12 = sys.Mix12(q1)
    s = q1.size

    # input-only pieces of the implicit equations
    dY_const = np.empty_like(y2)
    for i, sl in enumerate(slices):
        dY_const[sl] = -0.5 * h * eps * inv_w[i] * (H2[i] @ r2[sl])
    dP_const = -h * g1_q
    for i, sl in enumerate(slices):
        dP_const = dP_const + h * eps ** 2 * inv_w2[i] * (M12[i] @ g2_q[sl])
        dP_const = dP_const - 0.25 * h * eps ** 2 * inv_w2[i] * sys.third(
            q1, i, r2[sl])

    def sweep(Z):
        P1, Y2 = Z[:s], Z[s:]
        B = q1 + h * P1
        g2_B = g2_f(B)
        M12_B = sys.Mix12(B)
        dP = dP_const.copy()
        dY = dY_const.copy()
        for i, sl in enumerate(slices):
            dP -= eps ** 2 * inv_w2[i] * (M12[i] @ Y2[sl])
            dP -= eps ** 2 * inv_w2[i] * (
                M12_B[i] @ (sin_g[i] * r2[sl] - cos_g[i] * Y2[sl]))
            dP -= 0.25 * h * eps ** 2 * inv_w2[i] * sys.third(q1, i, Y2[sl])
            dY[sl] -= eps * sin_g[i] * inv_w[i] * g2_B[sl]
        return np.concatenate([dP, dY])

    z = np.concatenate([p1, y2])
    res = solve_fixed_point(z, sweep, tol, max_iter)
    if not res.converged:
        raise NoConvergenceError(
            "implicit fast-frame step stalled at relative change "
            f"{res.last_relative_change:.3g}", res)
    P1, Y2 = res.solution[:s], res.solution[s:]

    B = q1 + h * P1
    g2_B = g2_f(B)
    M12_B = sys.Mix12(B)
    Q1 = q1 + h * P1
    X2 = x2.copy()
    for i, sl in enumerate(slices):
        Q1 = Q1 + h * eps ** 2 * inv_w2[i] * (
            M12_B[i] @ (sin_g[i] * r2[sl] - cos_g[i] * Y2[sl]))
        X2[sl] += (eps ** 2 * inv_w2[i] * g2_q[sl]
                   + 0.5 * h * eps ** 2 * inv_w2[i] * (H2[i] @ Y2[sl])
                   - eps ** 2 * cos_g[i] * inv_w2[i] * g2_B[sl])
    return Q1, X2, P1, Y2, res.iterations


def _rotate(om, eps, h, x2, y2):
    tau = om * h / eps
    cs, sn = np.cos(tau), np.sin(tau)
    return (cs * x2 + eps / om * sn * y2,
            -om / eps * sn * x2 + cs * y2)


def step_forward(st, sys, cfg, counter=None):
    """One forward step; first order, symplectic.  Returns (state, iters)."""
    Q1, X2, P1, Y2, iters = _forward_core(
        st.q1, st.x2, st.p1, st.y2, sys, cfg.eps, cfg.h,
        cfg.fp_rel_tol, cfg.fp_max_iter, counter)
    om = sys.omega_vector()
    Q2, P2 = _rotate(om, cfg.eps, cfg.h, X2, Y2)
    return RotatingMatrixState(Q1, Q2, P1, P2), iters


def step_adjoint(st, sys, cfg, counter=None):
    """Adjoint step: the inverse of the forward step with negated h.

    The trailing rotation of the negated step is undone exactly, then the
    remaining near-identity core is inverted by an outer fixed point; each
    outer sweep contains one core evaluation with its own inner solve.
    Returns (state, total fixed-point iterations, outer and inner summed).
    """
    eps, h = cfg.eps, cfg.h
    om = sys.omega_vector()
    s = st.q1.size
    # undoing the reversed step's final rotation means rotating forward
    xt, yt = _rotate(om, eps, h, st.x2, st.y2)
    target = np.concatenate([st.q1, xt, st.p1, yt])
    f = om.size
    iters_box = [0]

    def residual_shift(W):
        q1, x2 = W[:s], W[s:s + f]
        p1, y2 = W[s + f:2 * s + f], W[2 * s + f:]
        Q1, X2, P1, Y2, inner = _forward_core(
            q1, x2, p1, y2, sys, eps, -h, cfg.fp_rel_tol, cfg.fp_max_iter,
            counter)
        iters_box[0] += inner
        return W - np.concatenate([Q1, X2, P1, Y2])

    res = solve_fixed_point(target, residual_shift,
                            cfg.fp_rel_tol, cfg.fp_max_iter)
    if not res.converged:
        raise NoConvergenceError(
            "adjoint step inversion stalled at relative change "
            f"{res.last_relative_change:.3g}", res)
    W = res.solution
    out = RotatingMatrixState(W[:s], W[s:s + f],
                              W[s + f:2 * s + f], W[2 * s + f:])
    return out, res.iterations + iters_box[0]


def step_symmetric(st, sys, cfg, counter=None):
    """Half step forward composed with half step adjoint; symmetric,
    second order, symplectic."""
    half = dataclasses.replace(cfg, h=0.5 * cfg.h)
    mid, it1 = step_forward(st, sys, half, counter)
    out, it2 = step_adjoint(mid, sys, half, counter)
    return out, it1 + it2


# ---------------------------------------------------------------------------
# runs


def _observe(sys, state, eps, out):
    out["H"].append(_sys.energy_multi(sys, state, eps))
    acts = _sys.actions_multi(sys, state, eps)
    inv = _sys.invariants_multi(sys, state, eps)
    out["I"].append(inv["I_total"])
    out["I_sqrt2"].append(inv["I_sqrt2"])
    for j in range(acts.size):
        out[f"I{j + 1}"].append(acts[j])


def run(state0, sys, cfg, t_max, scheme="symmetric", sample_every=None,
        backend="auto"):
    """Integrate state0 over [0, t_max]; scheme "forward" or "symmetric".

    The state is carried in the rotating frame with the identity
    convention x2 = q2, y2 = p2 at sample instants.
    """
    from .hj_scalar import _sample_steps, default_sample_every
    if scheme not in ("forward", "symmetric"):
        raise ValueError(f"unknown scheme {scheme!r}")
    h = cfg.h
    if h <= 0.0:
        raise ValueError("runs require h > 0")
    n_steps = int(math.floor(t_max / h * (1.0 + 1e-12) + 1e-9))
    if sample_every is None:
        sample_every = default_sample_every(t_max, h)
    steps = _sample_steps(n_steps, sample_every)
    tag_ok = sys.kernel_tag in ("quartic3", "quartic4")
    use_kernel = _backend.resolve(backend, tag_ok)
    counter = SlowGradientCounter()
    out = {"H": [], "I": [], "I_sqrt2": []}
    f = state0.f
    for j in range(f):
        out[f"I{j + 1}"] = []
    total_iters = 0

    if use_kernel:
        from . import _kernels
        flat, n_iters, n_calls, fail = _kernels.quartic_hj_run(
            4 if sys.kernel_tag == "quartic4" else 3,
            state0.flat(), cfg.eps, h, cfg.fp_rel_tol, cfg.fp_max_iter,
            n_steps, np.asarray(steps, dtype=np.int64),
            1 if scheme == "symmetric" else 0)
        if fail >= 0:
            raise NoConvergenceError(f"implicit step stalled at step {fail}")
        total_iters = int(n_iters)
        counter.add(int(n_calls))
        states = [SlowFastState.from_flat(flat[i], state0.s, f)
                  for i in range(flat.shape[0])]
        for st in states:
            _observe(sys, st, cfg.eps, out)
        final = states[-1]
    else:
        stepper = step_forward if scheme == "forward" else step_symmetric
        rot = RotatingMatrixState.from_state(state0)
        next_idx = 0
        for n in range(n_steps + 1):
            if n == steps[next_idx]:
                _observe(sys, rot.to_state(), cfg.eps, out)
                next_idx += 1
            if n < n_steps:
                rot, iters = stepper(rot, sys, cfg, counter)
                total_iters += iters
        final = rot.to_state()

    return RunRecord(times=np.asarray(steps, float) * h,
                     observables=out,
                     final_state=final,
                     slow_gradient_calls=counter.n,
                     n_steps=n_steps,
                     fp_total_iterations=total_iters)
