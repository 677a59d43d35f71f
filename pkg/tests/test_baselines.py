"""Reference integrators: velocity Verlet, impulse and mollified impulse
multiple time stepping, and their exact cost accounting."""

import math

import numpy as np
import pytest

from oscint import baselines
from oscint.baselines import (MtsConfig, _substeps, average_map,
                              impulse_step, mollify_step, verlet_step)
from oscint.core import IntegratorConfig, SlowFastState, SlowGradientCounter
from oscint.hj_pendulum import pendulum_initial_state
from oscint.systems import (ScalarFreqSystem, fpu_initial_state,
                            quartic_initial_state)


def _cfg(eps, h):
    return IntegratorConfig(eps=eps, h=h)


def const_freq_system(vcheck=None, g1=None, g2=None):
    """Constant-frequency chain with pluggable slow coupling."""
    z = lambda q1, q2: np.zeros(3)
    return ScalarFreqSystem(
        s=3, f=3,
        Vcheck=vcheck or (lambda q1, q2: 0.0),
        grad1_Vcheck=g1 or z,
        grad2_Vcheck=g2 or z,
        Omega=lambda q1: 1.0,
        grad1_Omega=lambda q1: np.zeros(3),
        name="const")


# ---------------------------------------------------------------------------
# verlet_step


def test_zero_force_is_ballistic():
    q, p = np.array([1.0, -2.0]), np.array([0.5, 0.25])
    (q2, p2), F = verlet_step((q, p), lambda q: np.zeros(2), 0.1)
    np.testing.assert_array_equal(q2, q + 0.1 * p)
    np.testing.assert_array_equal(p2, p)
    np.testing.assert_array_equal(F, 0.0)


def test_harmonic_energy_error_is_second_order():
    def energy_err(dt, n):
        q, p = np.array([1.0]), np.array([0.0])
        force = lambda q: -q
        F = None
        worst = 0.0
        for _ in range(n):
            (q, p), F = verlet_step((q, p), force, dt, F)
            worst = max(worst, abs(0.5 * (q[0] ** 2 + p[0] ** 2) - 0.5))
        return worst

    e1 = energy_err(0.1, 200)
    e2 = energy_err(0.05, 400)
    assert 3.0 <= e1 / e2 <= 5.0


def test_verlet_is_time_reversible():
    rng = np.random.default_rng(7)
    q, p = rng.uniform(-1, 1, 4), rng.uniform(-1, 1, 4)
    force = lambda q: -q - 0.3 * q ** 3
    (q1, p1), _ = verlet_step((q, p), force, 0.05)
    (q0, p0), _ = verlet_step((q1, p1), force, -0.05)
    assert np.max(np.abs(q0 - q)) <= 1e-12
    assert np.max(np.abs(p0 - p)) <= 1e-12


def test_substep_tiling():
    assert _substeps(0.01, 2.5e-3) == (4, 0.0)
    n, rem = _substeps(0.01, 3e-3)
    assert n == 3 and rem == pytest.approx(1e-3)


def test_mts_config_validation():
    with pytest.raises(ValueError):
        MtsConfig(0.0, 1e-3)
    with pytest.raises(ValueError):
        MtsConfig(0.01, -1e-3)
    with pytest.raises(ValueError):
        MtsConfig(0.01, 0.02)


# ---------------------------------------------------------------------------
# impulse scheme


def test_impulse_free_coupling_keeps_fast_energy():
    sys = const_freq_system()
    eps = 1e-3
    st = SlowFastState([0.1, 0.0, 0.0], [eps, 0.0, 0.0],
                       [0.2, 0.0, 0.0], [1.0, 0.0, 0.0])
    rec = baselines.run(st, sys, _cfg(eps, 0.01), 5.0, scheme="impulse")
    I = np.asarray(rec.observables["I"])
    assert np.max(np.abs(I - I[0])) / I[0] <= 2e-4
    # slow block never feels a force
    np.testing.assert_allclose(rec.final_state.p1, st.p1, atol=1e-15)
    assert rec.slow_gradient_calls == 2 * (rec.n_steps + 1)


def test_impulse_constant_slow_force_bookkeeping():
    c = np.array([0.3, -0.1, 0.2])
    sys = const_freq_system(g1=lambda q1, q2: c)
    eps, H = 1e-3, 0.01
    st = SlowFastState([0.4, 0.1, -0.2], np.zeros(3),
                       [0.5, -0.3, 0.1], np.zeros(3))
    out, F = impulse_step(st, sys, MtsConfig(H, eps / 100.0), eps)
    np.testing.assert_allclose(out.p1, st.p1 - H * c, atol=1e-15)
    np.testing.assert_allclose(out.q1, st.q1 + H * (st.p1 - 0.5 * H * c),
                               atol=1e-15)
    np.testing.assert_allclose(F[0], -c, atol=1e-16)


# ---------------------------------------------------------------------------
# mollified scheme


def test_averaged_position_factor_matches_sinc():
    nu, H = 50.0, 0.01
    q2 = np.array([1.0])
    a2, cbar = average_map(q2, nu, MtsConfig(H, 1e-5))
    want = math.sin(nu * H) / (nu * H)
    assert abs(cbar[0] - want) <= 1e-6
    np.testing.assert_allclose(a2, cbar * q2, atol=1e-16)


def test_averaging_jacobian_matches_fd():
    nu, H = 50.0, 0.01
    mts = MtsConfig(H, 1e-5)
    q2 = np.array([0.3, -0.7])
    _, cbar = average_map(q2, nu, mts)
    d = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = d
        col = (average_map(q2 + e, nu, mts)[0]
               - average_map(q2 - e, nu, mts)[0]) / (2 * d)
        want = np.zeros(2)
        want[k] = cbar[k]
        np.testing.assert_allclose(col, want, atol=1e-6)


def test_mollify_at_origin_matches_impulse_on_slow_block(fpu):
    # the averaging trajectory started at q2 = 0 never leaves the origin,
    # so the averaged positions equal the input and the slow kick is the
    # plain impulse kick; the fast kick still carries the averaging factor
    eps, H = 1e-3, 2e-3
    mts = MtsConfig(H, eps / 100.0, mollify=True)
    q1, q2 = np.array([1.0, 0.0, 0.0]), np.zeros(3)
    Fi = baselines._slow_force(fpu, None)((q1, q2))
    Fm = baselines._mollified_force(fpu, eps, mts, None)((q1, q2))
    np.testing.assert_allclose(Fm[0], Fi[0], atol=1e-15)
    _, cbar = average_map(q2, fpu.omega(q1) / eps, mts)
    np.testing.assert_allclose(Fm[1], cbar * Fi[1], atol=1e-15)

    # whole steps then agree on the slow block to leading order (the fast
    # kicks differ by the averaging factor, feeding back only weakly)
    st = SlowFastState(q1, q2, [1.0, 0.0, 0.0], np.zeros(3))
    a, _ = impulse_step(st, fpu, MtsConfig(H, eps / 100.0), eps)
    b, _ = mollify_step(st, fpu, mts, eps)
    np.testing.assert_allclose(a.q1, b.q1, atol=1e-6)
    np.testing.assert_allclose(a.p1, b.p1, atol=1e-6)


def test_impulse_and_mollify_comparable_at_small_macro_step(fpu):
    eps = 1e-3
    st = fpu_initial_state(eps)
    errs = {}
    for scheme in ("impulse", "mollify"):
        rec = baselines.run(st, fpu, _cfg(eps, 2 * eps), 10.0, scheme=scheme)
        H = np.asarray(rec.observables["H"])
        errs[scheme] = np.max(np.abs(H - H[0]))
    assert 1.0 / 3.0 <= errs["impulse"] / errs["mollify"] <= 3.0


# ---------------------------------------------------------------------------
# reference-accuracy bounds (frozen from measured runs; the wobble tracks
# the textbook (nu dt)^2 / 8 estimate for the fast oscillator)


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_verlet_fpu_energy_bound(fpu, backend):
    eps = 1e-3
    st = fpu_initial_state(eps)
    for dt, bound in ((eps / 200.0, 1e-5), (eps / 100.0, 5e-5)):
        rec = baselines.run(st, fpu, _cfg(eps, dt), 1.0, scheme="verlet",
                            backend=backend)
        H = np.asarray(rec.observables["H"])
        assert np.max(np.abs(H - H[0])) / abs(H[0]) <= bound


def test_verlet_quartic_energy_bound(quartic3):
    eps = 1e-3
    st = quartic_initial_state(quartic3, eps)
    rec = baselines.run(st, quartic3, _cfg(eps, eps / 200.0), 1.0,
                        scheme="verlet")
    H = np.asarray(rec.observables["H"])
    assert np.max(np.abs(H - H[0])) / abs(H[0]) <= 1e-5


def test_verlet_pendulum_energy_bound(pendulum):
    eps = 2e-3
    rec = baselines.run(pendulum_initial_state(eps), pendulum,
                        _cfg(eps, eps / 200.0), 1.0, scheme="verlet")
    H = np.asarray(rec.observables["H"])
    assert np.max(np.abs(H - H[0])) / abs(H[0]) <= 5e-6


# ---------------------------------------------------------------------------
# runs and accounting


def test_run_zero_time_is_identity(fpu):
    st = fpu_initial_state(1e-3)
    rec = baselines.run(st, fpu, _cfg(1e-3, 5e-3), 0.0, scheme="verlet")
    assert rec.n_steps == 0
    np.testing.assert_array_equal(rec.final_state.flat(), st.flat())


def test_run_rejects_unknown_scheme(fpu):
    with pytest.raises(ValueError):
        baselines.run(fpu_initial_state(1e-3), fpu, _cfg(1e-3, 5e-3), 1.0,
                      scheme="rk4")


def test_pendulum_rejects_separable_mts(pendulum):
    for scheme in ("impulse", "mollify"):
        with pytest.raises(ValueError):
            baselines.run(pendulum_initial_state(2e-3), pendulum,
                          _cfg(2e-3, 0.02), 1.0, scheme=scheme)


@pytest.mark.parametrize("backend", ["python", "compiled"])
@pytest.mark.parametrize("scheme", ["verlet", "impulse", "mollify"])
def test_slow_force_accounting_two_block(fpu, scheme, backend):
    st = fpu_initial_state(1e-3)
    # stiff stability caps the verlet step near 2*eps/Omega
    h = 1e-4 if scheme == "verlet" else 0.01
    t = 0.05 if scheme == "verlet" else 0.2
    rec = baselines.run(st, fpu, _cfg(1e-3, h), t, scheme=scheme,
                        backend=backend)
    # closing kick shared with the next step: n + 1 evaluations of the
    # slow-force pair, two gradient callbacks each
    assert rec.slow_gradient_calls == 2 * (rec.n_steps + 1)


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_slow_force_accounting_pendulum(pendulum, backend):
    rec = baselines.run(pendulum_initial_state(2e-3), pendulum,
                        _cfg(2e-3, 1e-4), 0.1, scheme="verlet",
                        backend=backend)
    assert rec.slow_gradient_calls == rec.n_steps + 1


def test_runs_are_deterministic(fpu):
    st = fpu_initial_state(1e-3)
    a = baselines.run(st, fpu, _cfg(1e-3, 0.01), 2.0, scheme="mollify")
    b = baselines.run(st, fpu, _cfg(1e-3, 0.01), 2.0, scheme="mollify")
    assert np.array_equal(a.final_state.flat(), b.final_state.flat())
    assert a.slow_gradient_calls == b.slow_gradient_calls
