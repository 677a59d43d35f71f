"""Benchmark systems and their conserved quantities.

Three families are provided:

* ScalarFreqSystem: one configuration-dependent fast frequency Omega(q1)
  multiplying all fast coordinates (stiff spring chain).
* MatrixFreqSystem: constant diagonal frequency matrix with the
  frequencies grouped by value (quartic oscillator benchmarks).
* PendulumSystem: stiff spring pendulum described by the angular
  potential W(a) alone.

All potential callbacks take and return plain ndarrays.  Energies and
fast actions are computed in the original (non-rotating) variables.
"""

import dataclasses
import math

import numpy as np


class FrequencyFloorError(RuntimeError):
    """The fast frequency dropped below the configured floor."""


class PendulumDomainError(ValueError):
    """Pendulum state outside the coordinate chart (1 + r <= 0)."""


# ---------------------------------------------------------------------------
# system descriptions


@dataclasses.dataclass(frozen=True)
class ScalarFreqSystem:
    """Slow-fast system with a single varying fast frequency.

    Vcheck(q1, q2) is the slow coupling potential in the original
    variables; the stiff part is Omega(q1)^2 |q2|^2 / (2 eps^2).
    """

    s: int
    f: int
    Vcheck: object
    grad1_Vcheck: object
    grad2_Vcheck: object
    Omega: object
    grad1_Omega: object
    omega_min: float = 1e-6
    kernel_tag: str = ""
    name: str = "scalar"

    def omega(self, q1):
        w = float(self.Omega(q1))
        if w < self.omega_min:
            raise FrequencyFloorError(
                f"Omega(q1) = {w:.3g} below floor {self.omega_min:.3g}")
        return w


@dataclasses.dataclass(frozen=True)
class FrequencyGroup:
    omega: float
    mult: int


@dataclasses.dataclass(frozen=True)
class MatrixFreqSystem:
    """Slow-fast system with a constant diagonal frequency matrix.

    Frequencies come in groups (omega_i, multiplicity m_i), strictly
    increasing in omega_i.  V and its gradients act on the full variables;
    the remaining callbacks are the q2 = 0 specializations used by the
    long-step schemes:

    * V0(q1), g1(q1): potential and slow gradient on the slow manifold
    * g2(q1): fast gradient, full f-vector (groups concatenated)
    * Hess2(q1): per-group diagonal blocks of the fast Hessian, (m_i, m_i)
    * Mix12(q1): per-group mixed blocks, shape (s, m_i)
    * third(q1, i, r): s-vector with entries r^T (d/dq1_k of block i of the
      fast Hessian) r, the contracted third derivative
    """

    s: int
    groups: tuple
    V: object
    grad1_V: object
    grad2_V: object
    V0: object
    g1: object
    g2: object
    Hess2: object
    Mix12: object
    third: object
    kernel_tag: str = ""
    name: str = "matrix"

    def __post_init__(self):
        omegas = [g.omega for g in self.groups]
        if not omegas or any(w <= 0 for w in omegas):
            raise ValueError("frequencies must be positive")
        if any(b <= a for a, b in zip(omegas, omegas[1:])):
            raise ValueError("group frequencies must be strictly increasing")
        if any(g.mult < 1 for g in self.groups):
            raise ValueError("group multiplicities must be at least 1")

    @property
    def f(self):
        return sum(g.mult for g in self.groups)

    def block_slices(self):
        slices, start = [], 0
        for g in self.groups:
            slices.append(slice(start, start + g.mult))
            start += g.mult
        return slices

    def omega_vector(self):
        return np.concatenate([np.full(g.mult, g.omega) for g in self.groups])


@dataclasses.dataclass(frozen=True)
class PendulumSystem:
    """Stiff spring pendulum, described by a 2*pi-periodic potential W(a)."""

    W: object
    Wp: object
    Wpp: object
    kernel_tag: str = ""
    name: str = "pendulum"


# ---------------------------------------------------------------------------
# stock systems


def fpu_modified():
    """Spring chain with three slow and three fast coordinates, quartic
    soft springs, and fast frequency sqrt(1 + q1[0]^2)."""

    def _springs(q1, q2):
        u0 = q1[0] - q2[0]
        u1 = q1[1] - q2[1] - q1[0] - q2[0]
        u2 = q1[2] - q2[2] - q1[1] - q2[1]
        u3 = q1[2] + q2[2]
        return u0, u1, u2, u3

    def Vcheck(q1, q2):
        u0, u1, u2, u3 = _springs(q1, q2)
        return 0.25 * (u0 ** 4 + u1 ** 4 + u2 ** 4 + u3 ** 4)

    def grad1_Vcheck(q1, q2):
        u0, u1, u2, u3 = _springs(q1, q2)
        c0, c1, c2, c3 = u0 ** 3, u1 ** 3, u2 ** 3, u3 ** 3
        return np.array([c0 - c1, c1 - c2, c2 + c3])

    def grad2_Vcheck(q1, q2):
        u0, u1, u2, u3 = _springs(q1, q2)
        c0, c1, c2, c3 = u0 ** 3, u1 ** 3, u2 ** 3, u3 ** 3
        return np.array([-c0 - c1, -c1 - c2, -c2 + c3])

    def Omega(q1):
        return math.sqrt(1.0 + q1[0] ** 2)

    def grad1_Omega(q1):
        return np.array([q1[0] / math.sqrt(1.0 + q1[0] ** 2), 0.0, 0.0])

    return ScalarFreqSystem(3, 3, Vcheck, grad1_Vcheck, grad2_Vcheck,
                            Omega, grad1_Omega, kernel_tag="fpu", name="fpu")


def fpu_initial_state(eps):
    from .core import SlowFastState
    return SlowFastState(q1=[1.0, 0.0, 0.0], q2=[eps, 0.0, 0.0],
                         p1=[1.0, 0.0, 0.0], p2=[1.0, 0.0, 0.0])


def quartic_multi(n_freq=3):
    """One slow coordinate coupled to 3 or 4 fast oscillators through a
    quartic well (1 + w . q2)^4 plus a quadratic pinning of the slow part.

    Frequencies are (1, 1, sqrt(2)) for n_freq=3 and (1, 1, sqrt(2), 2)
    for n_freq=4; the quartic weight of the last coordinate is 2.5.
    """
    if n_freq == 3:
        w = np.array([1.0, 1.0, 2.5])
        groups = (FrequencyGroup(1.0, 2), FrequencyGroup(math.sqrt(2.0), 1))
        name = "quartic3"
    elif n_freq == 4:
        w = np.array([1.0, 1.0, 1.0, 2.5])
        groups = (FrequencyGroup(1.0, 2), FrequencyGroup(math.sqrt(2.0), 1),
                  FrequencyGroup(2.0, 1))
        name = "quartic4"
    else:
        raise ValueError("n_freq must be 3 or 4")

    def V(q1, q2):
        S = 1.0 + float(w @ q2)
        return S ** 4 + 0.125 * q1[0] ** 2 * q2[0] ** 2 + 0.5 * q1[0] ** 2

    def grad1_V(q1, q2):
        return np.array([0.25 * q1[0] * q2[0] ** 2 + q1[0]])

    def grad2_V(q1, q2):
        S = 1.0 + float(w @ q2)
        g = 4.0 * S ** 3 * w
        g[0] += 0.25 * q1[0] ** 2 * q2[0]
        return g

    def V0(q1):
        return 1.0 + 0.5 * q1[0] ** 2

    def g1(q1):
        return np.array([q1[0]])

    def g2(q1):
        return 4.0 * w.copy()

    def Hess2(q1):
        H = 12.0 * np.outer(w, w)
        H[0, 0] += 0.25 * q1[0] ** 2
        out, start = [], 0
        for g in groups:
            out.append(H[start:start + g.mult, start:start + g.mult].copy())
            start += g.mult
        return tuple(out)

    def Mix12(q1):
        # the only q1-dependent coupling is quadratic in q2, so the mixed
        # second derivative vanishes on the slow manifold
        return tuple(np.zeros((1, g.mult)) for g in groups)

    def third(q1, i, r):
        if i == 0:
            return np.array([0.5 * q1[0] * r[0] ** 2])
        return np.zeros(1)

    return MatrixFreqSystem(1, groups, V, grad1_V, grad2_V,
                            V0, g1, g2, Hess2, Mix12, third,
                            kernel_tag=name, name=name)


def quartic_initial_state(sys, eps):
    """Slow start (q1, p1) = (0.9, 0.6) with fast energies 1.0, 0.5, 0.25
    (and 0.25 for the fourth oscillator), placed in the positions."""
    from .core import SlowFastState
    om = sys.omega_vector()
    I0 = np.array([1.0, 0.5, 0.25, 0.25])[:om.size]
    q2 = eps * np.sqrt(2.0 * I0) / om
    return SlowFastState(q1=[0.9], q2=q2, p1=[0.6], p2=np.zeros(om.size))


def elastic_pendulum():
    """Spring pendulum in a gravity-like angular potential cos(a)^2."""
    return PendulumSystem(
        W=lambda a: math.cos(a) ** 2,
        Wp=lambda a: -math.sin(2.0 * a),
        Wpp=lambda a: -2.0 * math.cos(2.0 * a),
        kernel_tag="pendulum-cos2", name="pendulum")


# ---------------------------------------------------------------------------
# observables


def energy_scalar(sys, state, eps):
    """Total energy of a ScalarFreqSystem state in original variables."""
    w = float(sys.Omega(state.q1))
    kin = 0.5 * float(state.p1 @ state.p1) + 0.5 * float(state.p2 @ state.p2)
    stiff = w ** 2 * float(state.q2 @ state.q2) / (2.0 * eps ** 2)
    return kin + float(sys.Vcheck(state.q1, state.q2)) + stiff


def fast_actions(sys, state, eps):
    """Per-coordinate fast actions (oscillatory energy over frequency)."""
    w = float(sys.Omega(state.q1))
    return (state.p2 ** 2 + (w / eps) ** 2 * state.q2 ** 2) / (2.0 * w)


def adiabatic_sum(sys, state, eps):
    """Total adiabatic invariant; exactly the sum of fast_actions."""
    return float(np.sum(fast_actions(sys, state, eps)))


def energy_multi(sys, state, eps):
    """Total energy of a MatrixFreqSystem state."""
    om = sys.omega_vector()
    kin = 0.5 * float(state.p1 @ state.p1) + 0.5 * float(state.p2 @ state.p2)
    stiff = float((om * state.q2) @ (om * state.q2)) / (2.0 * eps ** 2)
    return kin + float(sys.V(state.q1, state.q2)) + stiff


def actions_multi(sys, state, eps):
    """Per-coordinate oscillatory energies p2_j^2/2 + w_j^2 q2_j^2/(2 eps^2)."""
    om = sys.omega_vector()
    return 0.5 * state.p2 ** 2 + om ** 2 * state.q2 ** 2 / (2.0 * eps ** 2)

_SQRT2 = math.sqrt(2.0)


def invariants_multi(sys, state, eps):
    """Adiabatic invariants of the quartic benchmarks: the total oscillatory
    energy and the energy of the sqrt(2)-frequency group."""
    acts = actions_multi(sys, state, eps)
    total = float(np.sum(acts))
    part = None
    for sl, g in zip(sys.block_slices(), sys.groups):
        if abs(g.omega - _SQRT2) < 1e-12:
            part = float(np.sum(acts[sl]))
    if part is None:
        raise ValueError("system has no sqrt(2) frequency group")
    return {"I_total": total, "I_sqrt2": part}


def energy_pendulum(sys, st, eps):
    """Pendulum energy in internal variables; st needs attributes
    a, r, p_a, p_r."""
    if 1.0 + st.r <= 0.0:
        raise PendulumDomainError(f"1 + r = {1.0 + st.r:.3g} <= 0")
    return (0.5 * st.p_r ** 2 + st.p_a ** 2 / (2.0 * (1.0 + st.r) ** 2)
            + st.r ** 2 / (2.0 * eps ** 2) + float(sys.W(st.a)))


def pendulum_I(st, eps):
    """Adiabatic invariant of the spring mode, p_r^2/2 + r^2/(2 eps^2)."""
    return 0.5 * st.p_r ** 2 + st.r ** 2 / (2.0 * eps ** 2)


MetricResult = dataclasses.make_dataclass(
    "MetricResult", [("abs_dev", float), ("rel_dev", float),
                     ("rel_valid", bool)])


def max_metrics(record, names=None):
    """Worst absolute and relative deviation of each recorded observable
    from its initial value.  rel_valid is False when the initial value is
    zero (relative deviation undefined, reported as nan)."""
    out = {}
    for name in (record.observables if names is None else names):
        seq = np.asarray(record.observables[name], float)
        x0 = float(seq[0])
        dev = float(np.max(np.abs(seq - x0)))
        if x0 == 0.0:
            out[name] = MetricResult(dev, math.nan, False)
        else:
            out[name] = MetricResult(dev, dev / abs(x0), True)
    return out
