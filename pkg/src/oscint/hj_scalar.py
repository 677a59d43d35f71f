"""Long-step scheme for the scalar varying-frequency case.

The fast pair is preconditioned into a frame rotating at the local fast
frequency, with an extra phase/action pair (sigma, a).  One step solves a
small implicit system for (P1, Y, Sigma) by fixed-point iteration and then
evaluates the remaining components explicitly; the map derives from a
generating function, so it is symplectic in the reduced variables.  A
cheaper explicit two-sweep variant (not symplectic) is also provided.

Slow-potential gradients are evaluated through TransformedPotentialView,
which also does the bookkeeping of the slow-work counter: a slow-gradient
evaluation in transformed variables costs 2 (it touches both original
gradients), a fast-gradient evaluation costs 1, potential values are free.
"""

import math

import numpy as np

from . import _backend
from . import systems as _sys
from .core import (IntegratorConfig, ReducedScalarState, RunRecord,
                   SlowFastState, SlowGradientCounter)
from .fixedpoint import NoConvergenceError, solve_fixed_point


class TransformedPotentialView:
    """The slow potential seen through frequency-scaled fast variables.

    Evaluates V(q1, q2) = Vcheck(q1, Omega(q1)^(-1/2) q2) and its exact
    gradients.  An attached SlowGradientCounter is incremented by the
    number of underlying slow-gradient callbacks each call touches.
    """

    def __init__(self, sys, counter=None):
        self.sys = sys
        self.counter = counter

    def value(self, q1, q2):
        w = self.sys.omega(q1)
        return float(self.sys.Vcheck(q1, q2 / math.sqrt(w)))

    def grad2(self, q1, q2):
        w = self.sys.omega(q1)
        if self.counter is not None:
            self.counter.add(1)
        g2 = np.asarray(self.sys.grad2_Vcheck(q1, q2 / math.sqrt(w)), float)
        return g2 / math.sqrt(w)

    def grad1(self, q1, q2):
        w = self.sys.omega(q1)
        u = q2 / math.sqrt(w)
        if self.counter is not None:
            self.counter.add(2)
        g2 = np.asarray(self.sys.grad2_Vcheck(q1, u), float)
        g1 = np.asarray(self.sys.grad1_Vcheck(q1, u), float)
        go = np.asarray(self.sys.grad1_Omega(q1), float)
        return g1 - go / (2.0 * w) * float(u @ g2)


def init_reduced(state, sys, eps):
    """Map an original-variable state to the rotating frame at phase 0."""
    w = sys.omega(state.q1)
    go = np.asarray(sys.grad1_Omega(state.q1), float)
    p1 = state.p1 - go / (2.0 * w) * float(state.q2 @ state.p2)
    x = math.sqrt(w) / eps * state.q2
    y = state.p2 / math.sqrt(w)
    a = (float(state.p2 @ state.p2)
         + (w / eps) ** 2 * float(state.q2 @ state.q2)) / (2.0 * w)
    assert a >= 0.0
    return ReducedScalarState(state.q1, x, 0.0, p1, y, a)


def finalize_reduced(red, sys, eps):
    """Map a rotating-frame state back to the original variables."""
    w = sys.omega(red.q1)
    cs, sn = math.cos(red.sigma), math.sin(red.sigma)
    sq = math.sqrt(eps)
    q2i = sq * (red.x * cs + red.y * sn)
    p2i = sq * (-red.x * sn + red.y * cs)
    go = np.asarray(sys.grad1_Omega(red.q1), float)
    p1 = red.p1 + go / (2.0 * w) * float(q2i @ p2i)
    return SlowFastState(red.q1, sq / math.sqrt(w) * q2i,
                         p1, math.sqrt(w) / sq * p2i)


class _StepWork:
    """Per-step evaluation engine shared by the implicit and two-sweep
    variants.  Hoists everything that only depends on the step's input."""

    def __init__(self, view, red, cfg):
        self.view = view
        self.cfg = cfg
        eps = cfg.eps
        self.q1 = red.q1
        self.x = red.x
        self.sigma = red.sigma
        self.a = red.a
        self.s = red.q1.size
        self.f = red.x.size
        sys = view.sys
        self.w0 = sys.omega(red.q1)
        self.go0 = np.asarray(sys.grad1_Omega(red.q1), float)
        self.sin_s = math.sin(red.sigma)
        self.cos_s = math.cos(red.sigma)
        zero = np.zeros(self.f)
        # constants of the step: 8 slow-gradient units
        self.g1_0 = view.grad1(red.q1, zero)
        self.g1_xp = view.grad1(red.q1, eps * red.x)
        self.g1_xm = view.grad1(red.q1, -eps * red.x)
        self.g2_xp = view.grad2(red.q1, eps * red.x)
        self.g2_xm = view.grad2(red.q1, -eps * red.x)
        self.V_0 = view.value(red.q1, zero)

    def _unpack(self, Z):
        s, f = self.s, self.f
        return Z[:s], Z[s:s + f], float(Z[s + f])

    def sweep(self, Z, with_coupling):
        """Increment z -> z + (this) of the implicit equations at iterate Z.

        with_coupling=False drops the order-eps coupling terms, keeping the
        midpoint force, the finite-difference force and the phase advance;
        this is the first sweep of the explicit variant.
        """
        view, cfg = self.view, self.cfg
        eps, h = cfg.eps, cfg.h
        q1, x, a = self.q1, self.x, self.a
        P1, Y, Sigma = self._unpack(Z)
        mid = q1 + 0.5 * h * P1
        w_mid = view.sys.omega(mid)
        go_mid = np.asarray(view.sys.grad1_Omega(mid), float)
        g1_mid = view.grad1(mid, np.zeros(self.f))
        g1_Yp = view.grad1(q1, eps * Y)
        g1_Ym = view.grad1(q1, -eps * Y)
        dP = -h * (g1_mid + a * go_mid)
        dP -= h / 4.0 * (self.g1_xp - 2.0 * self.g1_0 + self.g1_xm
                         + g1_Yp - 2.0 * self.g1_0 + g1_Ym)
        dY = -h / 4.0 * (self.g2_xp - self.g2_xm)
        dS = h / eps * w_mid
        if with_coupling:
            u_s = eps * (x * self.sin_s - Y * self.cos_s)
            g2_s = view.grad2(q1, u_s)
            g1_s = view.grad1(q1, u_s)
            V_s = view.value(q1, u_s)
            B = q1 + h * P1
            wB = view.sys.omega(B)
            goB = np.asarray(view.sys.grad1_Omega(B), float)
            sin_S, cos_S = math.sin(Sigma), math.cos(Sigma)
            u_S = eps * (x * sin_S - Y * cos_S)
            g1_BS = view.grad1(B, u_S)
            g1_B0 = view.grad1(B, np.zeros(self.f))
            V_BS = view.value(B, u_S)
            V_B0 = view.value(B, np.zeros(self.f))
            g2_BS = view.grad2(B, u_S)
            rot_s = float(g2_s @ (x * self.cos_s + Y * self.sin_s))
            dP -= eps * h * go_mid * (rot_s / self.w0)
            dP += (-eps * (g1_BS - g1_B0) / wB
                   + eps * goB * (V_BS - V_B0) / wB ** 2
                   - eps * (self.g1_0 - g1_s) / self.w0
                   + eps * self.go0 * (self.V_0 - V_s) / self.w0 ** 2)
            dY += (-eps * g2_BS / wB * sin_S
                   + eps * g2_s / self.w0 * self.sin_s)
        return np.concatenate([dP, dY, [dS]])

    def phase(self, P1):
        return self.sigma + self.cfg.h / self.cfg.eps * float(
            self.view.sys.omega(self.q1 + 0.5 * self.cfg.h * P1))

    def finish(self, Z):
        """Explicit second half of the step: (Q1, X, A) at the solved Z."""
        view, cfg = self.view, self.cfg
        eps, h = cfg.eps, cfg.h
        q1, x, a = self.q1, self.x, self.a
        P1, Y, Sigma = self._unpack(Z)
        mid = q1 + 0.5 * h * P1
        go_mid = np.asarray(view.sys.grad1_Omega(mid), float)
        g1_mid = view.grad1(mid, np.zeros(self.f))
        u_s = eps * (x * self.sin_s - Y * self.cos_s)
        g2_s = view.grad2(q1, u_s)
        B = q1 + h * P1
        wB = view.sys.omega(B)
        goB = np.asarray(view.sys.grad1_Omega(B), float)
        sin_S, cos_S = math.sin(Sigma), math.cos(Sigma)
        u_S = eps * (x * sin_S - Y * cos_S)
        g1_BS = view.grad1(B, u_S)
        g1_B0 = view.grad1(B, np.zeros(self.f))
        V_BS = view.value(B, u_S)
        V_B0 = view.value(B, np.zeros(self.f))
        g2_BS = view.grad2(B, u_S)
        g2_Yp = view.grad2(q1, eps * Y)
        g2_Ym = view.grad2(q1, -eps * Y)
        rot_s = float(g2_s @ (x * self.cos_s + Y * self.sin_s))
        Q1 = (q1 + h * P1
              + h * h / 2.0 * (g1_mid + a * go_mid)
              + eps * h * h / 2.0 * go_mid * (rot_s / self.w0)
              + h * eps * (g1_BS - g1_B0) / wB
              - h * eps * (V_BS - V_B0) * goB / wB ** 2)
        X = (x - eps * g2_BS / wB * cos_S
             + eps * g2_s / self.w0 * self.cos_s
             + h / 4.0 * (g2_Yp - g2_Ym))
        A = (a + eps * rot_s / self.w0
             - eps * float(g2_BS @ (x * cos_S + Y * sin_S)) / wB)
        return Q1, X, A


def _assemble(red, work, Z):
    P1, Y, _ = work._unpack(Z)
    Q1, X, A = work.finish(Z)
    return ReducedScalarState(Q1, X, float(Z[red.q1.size + red.x.size]),
                              P1, Y, A)


def step(red, sys, cfg, counter=None):
    """One implicit step in reduced variables.

    Returns (advanced state, fixed-point iterations).  Raises
    NoConvergenceError if the iteration stalls.
    """
    view = TransformedPotentialView(sys, counter)
    work = _StepWork(view, red, cfg)
    z = np.concatenate([red.p1, red.y, [red.sigma]])
    res = solve_fixed_point(z, lambda Z: work.sweep(Z, True),
                            cfg.fp_rel_tol, cfg.fp_max_iter)
    if not res.converged:
        raise NoConvergenceError(
            "implicit step stalled at relative change "
            f"{res.last_relative_change:.3g}", res)
    Z = res.solution.copy()
    # enforce the phase row exactly at the returned slow momentum; the
    # residual of the solve then lives in the force rows only
    Z[-1] = work.phase(Z[:red.q1.size])
    return _assemble(red, work, Z), res.iterations


def step_noloop(red, sys, cfg, counter=None):
    """Explicit two-sweep variant: one coupling-free sweep, one full sweep.

    Cheaper than the implicit step but not symplectic.
    """
    view = TransformedPotentialView(sys, counter)
    work = _StepWork(view, red, cfg)
    z = np.concatenate([red.p1, red.y, [red.sigma]])
    zstar = z + work.sweep(z, False)
    Zstar = z + work.sweep(zstar, True)
    return _assemble(red, work, Zstar), 0


# ---------------------------------------------------------------------------
# runs


def _observe(sys, state, eps, out):
    out["H"].append(_sys.energy_scalar(sys, state, eps))
    acts = _sys.fast_actions(sys, state, eps)
    out["I"].append(float(np.sum(acts)))
    for j in range(acts.size):
        out[f"I{j + 1}"].append(acts[j])


def _sample_steps(n_steps, sample_every):
    steps = list(range(0, n_steps + 1, sample_every))
    if steps[-1] != n_steps:
        steps.append(n_steps)
    return steps


def default_sample_every(t_max, h):
    return max(1, int(t_max / (2000.0 * h)))


def run(state0, sys, cfg, t_max, scheme="hj", sample_every=None,
        backend="auto"):
    """Integrate state0 over [0, t_max] and record energy and fast actions.

    scheme is "hj" (implicit, symplectic) or "hj-noloop" (explicit).
    backend "auto" uses the compiled kernel when one matches the system.
    """
    if scheme not in ("hj", "hj-noloop"):
        raise ValueError(f"unknown scheme {scheme!r}")
    h = cfg.h
    if h <= 0.0:
        raise ValueError("runs require h > 0")
    n_steps = int(math.floor(t_max / h * (1.0 + 1e-12) + 1e-9))
    if sample_every is None:
        sample_every = default_sample_every(t_max, h)
    steps = _sample_steps(n_steps, sample_every)
    use_kernel = _backend.resolve(backend, sys.kernel_tag == "fpu")
    red = init_reduced(state0, sys, cfg.eps)
    counter = SlowGradientCounter()
    out = {"H": [], "I": []}
    for j in range(state0.f):
        out[f"I{j + 1}"] = []
    total_iters = 0

    if use_kernel:
        from . import _kernels
        flat, n_iters, n_calls, fail = _kernels.fpu_hj_run(
            red.flat(), cfg.eps, h, cfg.fp_rel_tol, cfg.fp_max_iter,
            n_steps, np.asarray(steps, dtype=np.int64),
            1 if scheme == "hj-noloop" else 0)
        if fail >= 0:
            raise NoConvergenceError(f"implicit step stalled at step {fail}")
        total_iters = int(n_iters)
        counter.add(int(n_calls))
        reds = [ReducedScalarState.from_flat(flat[i], state0.s, state0.f)
                for i in range(flat.shape[0])]
        for r in reds:
            _observe(sys, finalize_reduced(r, sys, cfg.eps), cfg.eps, out)
        red = reds[-1]
    else:
        stepper = step if scheme == "hj" else step_noloop
        next_idx = 0
        for n in range(n_steps + 1):
            if n == steps[next_idx]:
                _observe(sys, finalize_reduced(red, sys, cfg.eps),
                         cfg.eps, out)
                next_idx += 1
            if n < n_steps:
                red, iters = stepper(red, sys, cfg, counter)
                total_iters += iters

    return RunRecord(times=np.asarray(steps, float) * h,
                     observables=out,
                     final_state=finalize_reduced(red, sys, cfg.eps),
                     slow_gradient_calls=counter.n,
                     n_steps=n_steps,
                     fp_total_iterations=total_iters)
