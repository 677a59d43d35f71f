"""Reference integrators: velocity Verlet and multiple-time-stepping
schemes (impulse and mollified impulse).

Cost accounting: only slow-force evaluations count, meaning gradients of
the slow coupling potential (both original gradients for the chain and
quartic systems, the angular force for the pendulum).  The fast
sub-integrations inside the multiple-time-stepping schemes are free under
this cost model, which is the one used to compare schemes.

The kick at the end of a macro step is reused as the kick opening the
next step, so a run of n macro steps performs exactly n + 1 slow-force
evaluations for Verlet, impulse and mollified impulse alike.
"""

import dataclasses
import math

import numpy as np

from . import _backend
from . import systems as _sys
from .core import RunRecord, SlowFastState, SlowGradientCounter


@dataclasses.dataclass(frozen=True)
class MtsConfig:
    """Macro step and fast sub-integration step of an impulse-type scheme."""

    macro_h: float
    inner_dt: float
    mollify: bool = False

    def __post_init__(self):
        if not (self.macro_h > 0 and self.inner_dt > 0):
            raise ValueError("steps must be positive")
        if self.inner_dt > self.macro_h:
            raise ValueError("inner_dt must not exceed macro_h")


def verlet_step(state, force_field, dt, force0=None):
    """One kick-drift-kick step on state = (q, p).

    force0, when given, must equal force_field(q) and saves one
    evaluation.  Returns ((q_new, p_new), force at q_new) so a caller can
    chain steps with one force evaluation each.
    """
    q, p = state
    F = force_field(q) if force0 is None else force0
    p_half = p + 0.5 * dt * F
    q_new = q + dt * p_half
    F_new = force_field(q_new)
    return (q_new, p_half + 0.5 * dt * F_new), F_new


def _substeps(H, dt):
    n_full = int(math.floor(H / dt * (1.0 + 1e-12) + 1e-9))
    rem = H - n_full * dt
    if rem <= 1e-9 * dt:
        rem = 0.0
    return n_full, rem


def oscillate_frozen(q1, q2, p1, p2, nu, mts):
    """Verlet sub-integration of the fast-only Hamiltonian over one macro
    step: acceleration -nu^2 q2 on the fast block (nu = frequency / eps,
    frozen), ballistic drift of the slow block.  The last substep is
    shortened so the substeps tile macro_h exactly."""
    n_full, rem = _substeps(mts.macro_h, mts.inner_dt)
    q1, q2, p2 = q1.copy(), q2.copy(), p2.copy()
    acc = -(nu ** 2) * q2
    for k in range(n_full + (1 if rem else 0)):
        dt = mts.inner_dt if k < n_full else rem
        p2h = p2 + 0.5 * dt * acc
        q2 += dt * p2h
        q1 += dt * p1
        acc = -(nu ** 2) * q2
        p2 = p2h + 0.5 * dt * acc
    return q1, q2, p2


def average_map(q2, nu, mts):
    """Time average over one macro step of the fast positions started at
    rest from q2 (acceleration -nu^2 q2, frozen nu), plus the tangent map.

    The frozen fast flow is linear and diagonal, so the averaged position
    is cbar * q2 with one cosine-like factor per coordinate, and cbar is
    also the diagonal of the averaging Jacobian.  Positions are propagated
    by the same inner Verlet as the oscillate stage and averaged with the
    trapezoid rule.  Returns (a2, cbar).
    """
    n_full, rem = _substeps(mts.macro_h, mts.inner_dt)
    nu2 = np.broadcast_to(np.asarray(nu, float) ** 2, np.shape(q2)).copy()
    c = np.ones_like(nu2)
    cd = np.zeros_like(nu2)
    accum = np.zeros_like(nu2)
    for k in range(n_full + (1 if rem else 0)):
        dt = mts.inner_dt if k < n_full else rem
        c_prev = c.copy()
        cdh = cd + 0.5 * dt * (-nu2 * c)
        c = c + dt * cdh
        cd = cdh + 0.5 * dt * (-nu2 * c)
        accum += 0.5 * dt * (c_prev + c)
    cbar = accum / mts.macro_h
    return cbar * q2, cbar


# ---------------------------------------------------------------------------
# per-family force fields


def _family(sys):
    if isinstance(sys, _sys.ScalarFreqSystem):
        return "scalar"
    if isinstance(sys, _sys.MatrixFreqSystem):
        return "matrix"
    if isinstance(sys, _sys.PendulumSystem):
        return "pendulum"
    raise TypeError(f"unsupported system type {type(sys).__name__}")


def _full_force(sys, eps, counter):
    """force(q) for Verlet on the complete Hamiltonian; q = (q1, q2)."""
    fam = _family(sys)
    if fam == "scalar":
        def force(q):
            q1, q2 = q
            if counter is not None:
                counter.add(2)
            w = sys.omega(q1)
            go = np.asarray(sys.grad1_Omega(q1), float)
            F1 = (-np.asarray(sys.grad1_Vcheck(q1, q2), float)
                  - w * go * float(q2 @ q2) / eps ** 2)
            F2 = (-np.asarray(sys.grad2_Vcheck(q1, q2), float)
                  - w ** 2 * q2 / eps ** 2)
            return F1, F2
        return force
    if fam == "matrix":
        om = sys.omega_vector()

        def force(q):
            q1, q2 = q
            if counter is not None:
                counter.add(2)
            F1 = -np.asarray(sys.grad1_V(q1, q2), float)
            F2 = (-np.asarray(sys.grad2_V(q1, q2), float)
                  - om ** 2 * q2 / eps ** 2)
            return F1, F2
        return force
    raise TypeError("pendulum uses _pendulum_force")


def _pendulum_force(sys, eps, counter):
    def force(q):
        if counter is not None:
            counter.add(1)
        rbar = math.hypot(q[0], q[1])
        a = math.atan2(q[1], q[0])
        radial = -(rbar - 1.0) / (eps ** 2 * rbar)
        wp = float(sys.Wp(a))
        return np.array([radial * q[0] + wp * q[1] / rbar ** 2,
                         radial * q[1] - wp * q[0] / rbar ** 2])
    return force


def _slow_force(sys, counter):
    """Kick force of the impulse scheme: slow coupling gradient only."""
    fam = _family(sys)
    g1 = sys.grad1_Vcheck if fam == "scalar" else sys.grad1_V
    g2 = sys.grad2_Vcheck if fam == "scalar" else sys.grad2_V

    def force(q):
        q1, q2 = q
        if counter is not None:
            counter.add(2)
        return (-np.asarray(g1(q1, q2), float),
                -np.asarray(g2(q1, q2), float))
    return force


def _mollified_force(sys, eps, mts, counter):
    """Kick force of the mollified scheme: slow gradient at time-averaged
    positions, pulled back by the averaging Jacobian."""
    fam = _family(sys)
    g1 = sys.grad1_Vcheck if fam == "scalar" else sys.grad1_V
    g2 = sys.grad2_Vcheck if fam == "scalar" else sys.grad2_V

    def force(q):
        q1, q2 = q
        nu = (sys.omega(q1) if fam == "scalar" else sys.omega_vector()) / eps
        a2, cbar = average_map(q2, nu, mts)
        if counter is not None:
            counter.add(2)
        return (-np.asarray(g1(q1, a2), float),
                -cbar * np.asarray(g2(q1, a2), float))
    return force


def impulse_step(state, sys, mts, eps, counter=None, kick_force=None):
    """Kick / oscillate / kick with the slow coupling force.

    kick_force, when given, is the already evaluated slow force at the
    input positions.  Returns (state, slow force at the new positions),
    which doubles as the next step's opening kick.
    """
    force = _slow_force(sys, counter)
    return _kick_oscillate_kick(state, sys, mts, eps, force, kick_force)


def mollify_step(state, sys, mts, eps, counter=None, kick_force=None):
    """Like impulse_step but with the mollified (averaged) kick force."""
    force = _mollified_force(sys, eps, mts, counter)
    return _kick_oscillate_kick(state, sys, mts, eps, force, kick_force)


def _kick_oscillate_kick(state, sys, mts, eps, force, kick_force):
    fam = _family(sys)
    q = (state.q1, state.q2)
    F = force(q) if kick_force is None else kick_force
    H = mts.macro_h
    p1 = state.p1 + 0.5 * H * F[0]
    p2 = state.p2 + 0.5 * H * F[1]
    nu = (sys.omega(state.q1) if fam == "scalar"
          else sys.omega_vector()) / eps
    q1, q2, p2 = oscillate_frozen(state.q1, state.q2, p1, p2, nu, mts)
    F = force((q1, q2))
    out = SlowFastState(q1, q2, p1 + 0.5 * H * F[0], p2 + 0.5 * H * F[1])
    return out, F


# ---------------------------------------------------------------------------
# runs


def _observe_for(sys, eps):
    fam = _family(sys)
    if fam == "scalar":
        def observe(state, out):
            out["H"].append(_sys.energy_scalar(sys, state, eps))
            acts = _sys.fast_actions(sys, state, eps)
            out["I"].append(float(np.sum(acts)))
            for j in range(acts.size):
                out[f"I{j + 1}"].append(acts[j])
        return observe
    if fam == "matrix":
        def observe(state, out):
            out["H"].append(_sys.energy_multi(sys, state, eps))
            acts = _sys.actions_multi(sys, state, eps)
            inv = _sys.invariants_multi(sys, state, eps)
            out["I"].append(inv["I_total"])
            out["I_sqrt2"].append(inv["I_sqrt2"])
            for j in range(acts.size):
                out[f"I{j + 1}"].append(acts[j])
        return observe

    def observe(st, out):
        out["H"].append(_sys.energy_pendulum(sys, st, eps))
        out["I"].append(_sys.pendulum_I(st, eps))
    return observe


def _obs_names(sys):
    fam = _family(sys)
    if fam == "scalar":
        return ["H", "I"] + [f"I{j + 1}" for j in range(sys.f)]
    if fam == "matrix":
        return ["H", "I", "I_sqrt2"] + [f"I{j + 1}" for j in range(sys.f)]
    return ["H", "I"]


def run(state0, sys, cfg, t_max, scheme="verlet", inner_dt=None,
        sample_every=None, backend="auto"):
    """Integrate with a reference scheme; cfg.h is the Verlet step for
    scheme "verlet" and the macro step for "impulse" and "mollify"."""
    from .hj_scalar import _sample_steps, default_sample_every
    if scheme not in ("verlet", "impulse", "mollify"):
        raise ValueError(f"unknown scheme {scheme!r}")
    fam = _family(sys)
    if fam == "pendulum" and scheme != "verlet":
        raise ValueError("impulse and mollify assume a separable stiff "
                         "term; the pendulum mass matrix is not")
    eps, h = cfg.eps, cfg.h
    if h <= 0.0:
        raise ValueError("runs require h > 0")
    n_steps = int(math.floor(t_max / h * (1.0 + 1e-12) + 1e-9))
    if sample_every is None:
        sample_every = default_sample_every(t_max, h)
    steps = _sample_steps(n_steps, sample_every)
    counter = SlowGradientCounter()
    observe = _observe_for(sys, eps)
    out = {name: [] for name in _obs_names(sys)}

    kernel_ok = {
        ("scalar", "fpu"): True,
        ("matrix", "quartic3"): True,
        ("matrix", "quartic4"): True,
        ("pendulum", "pendulum-cos2"): scheme == "verlet",
    }.get((fam, sys.kernel_tag), False)
    use_kernel = _backend.resolve(backend, kernel_ok)

    if scheme == "verlet":
        mts = None
    else:
        mts = MtsConfig(h, eps / 100.0 if inner_dt is None else inner_dt,
                        mollify=(scheme == "mollify"))

    if use_kernel:
        from . import _kernels
        samples = np.asarray(steps, dtype=np.int64)
        if fam == "pendulum":
            st0 = _pend_to_plane(state0)
            flat, n_calls, fail = _kernels.pendulum_verlet_run(
                st0, eps, h, n_steps, samples)
        elif scheme == "verlet":
            fn = (_kernels.fpu_verlet_run if fam == "scalar"
                  else _kernels.quartic_verlet_run)
            args = () if fam == "scalar" else (sys.f,)
            flat, n_calls, fail = fn(*args, state0.flat(), eps, h,
                                     n_steps, samples)
        else:
            fn = (_kernels.fpu_mts_run if fam == "scalar"
                  else _kernels.quartic_mts_run)
            args = () if fam == "scalar" else (sys.f,)
            flat, n_calls, fail = fn(*args, state0.flat(), eps, h,
                                     mts.inner_dt,
                                     1 if mts.mollify else 0,
                                     n_steps, samples)
        if fail >= 0:
            raise FloatingPointError(f"non-finite state at step {fail}")
        counter.add(int(n_calls))
        if fam == "pendulum":
            from .hj_pendulum import PendulumCartesianState, to_internal
            finals = [to_internal(PendulumCartesianState(*flat[i]))
                      for i in range(flat.shape[0])]
        else:
            finals = [SlowFastState.from_flat(flat[i], state0.s, state0.f)
                      for i in range(flat.shape[0])]
        for st in finals:
            observe(st, out)
        final = finals[-1]
    else:
        final = _run_python(state0, sys, cfg, scheme, mts, steps,
                            counter, observe, out)

    return RunRecord(times=np.asarray(steps, float) * h,
                     observables=out,
                     final_state=final,
                     slow_gradient_calls=counter.n,
                     n_steps=n_steps,
                     fp_total_iterations=0)


def _pend_to_plane(state0):
    from .hj_pendulum import to_cartesian
    if hasattr(state0, "qx"):
        c = state0
    else:
        c = to_cartesian(state0)
    return np.array([c.qx, c.qy, c.px, c.py])


def _run_python(state0, sys, cfg, scheme, mts, steps, counter, observe, out):
    fam = _family(sys)
    eps, h = cfg.eps, cfg.h
    n_steps = steps[-1]

    if fam == "pendulum":
        from .hj_pendulum import PendulumCartesianState, to_internal
        force = _pendulum_force(sys, eps, counter)
        z = _pend_to_plane(state0)
        q, p = z[:2], z[2:]
        F = force(q)
        next_idx = 0
        for n in range(n_steps + 1):
            if n == steps[next_idx]:
                observe(to_internal(PendulumCartesianState(q[0], q[1],
                                                           p[0], p[1])), out)
                next_idx += 1
            if n < n_steps:
                (q, p), F = verlet_step((q, p), force, h, F)
        return to_internal(PendulumCartesianState(q[0], q[1], p[0], p[1]))

    state = state0
    if scheme == "verlet":
        force = _full_force(sys, eps, counter)
        q = (state.q1, state.q2)
        p = np.concatenate([state.p1, state.p2])
        s = state.s
        F = force(q)
        Fv = np.concatenate(F)
        next_idx = 0
        for n in range(n_steps + 1):
            if n == steps[next_idx]:
                observe(SlowFastState(q[0], q[1], p[:s], p[s:]), out)
                next_idx += 1
            if n < n_steps:
                ph = p + 0.5 * h * Fv
                q = (q[0] + h * ph[:s], q[1] + h * ph[s:])
                Fv = np.concatenate(force(q))
                p = ph + 0.5 * h * Fv
        return SlowFastState(q[0], q[1], p[:s], p[s:])

    step_fn = mollify_step if scheme == "mollify" else impulse_step
    F = None
    next_idx = 0
    for n in range(n_steps + 1):
        if n == steps[next_idx]:
            observe(state, out)
            next_idx += 1
        if n < n_steps:
            state, F = step_fn(state, sys, mts, eps, counter, F)
    return state
