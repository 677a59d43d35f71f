"""Varying-frequency long-step scheme: rotating-frame transform, the
implicit step and its explicit two-sweep variant, runs and accounting."""

import math

import numpy as np
import pytest

from oscint import baselines
from oscint.core import (IntegratorConfig, ReducedScalarState,
                         SlowGradientCounter, jacobian_fd, symplectic_defect)
from oscint.hj_scalar import (TransformedPotentialView, finalize_reduced,
                              init_reduced, run, step, step_noloop)
from oscint.systems import fpu_initial_state


def _cfg(eps=1e-3, h=5e-3, **kw):
    return IntegratorConfig(eps=eps, h=h, **kw)


# ---------------------------------------------------------------------------
# rotating-frame transform


def test_roundtrip_identity(fpu, rng):
    from conftest import random_slowfast
    eps = 1e-3
    for _ in range(20):
        st = random_slowfast(rng, 3, 3, eps)
        back = finalize_reduced(init_reduced(st, fpu, eps), fpu, eps)
        assert np.max(np.abs(back.flat() - st.flat())) <= 1e-13


def test_finalize_zero_phase_zero_momentum(fpu):
    eps = 1e-3
    q1 = np.array([0.4, -0.2, 0.1])
    x = np.array([0.3, 0.7, -0.5])
    red = ReducedScalarState(q1, x, 0.0, np.zeros(3), np.zeros(3), 1.0)
    st = finalize_reduced(red, fpu, eps)
    w = fpu.Omega(q1)
    np.testing.assert_allclose(st.q2, eps * x / math.sqrt(w), atol=1e-16)
    np.testing.assert_allclose(st.p2, 0.0, atol=1e-16)


def test_init_reduced_action(fpu):
    eps = 1e-3
    red = init_reduced(fpu_initial_state(eps), fpu, eps)
    assert red.a == pytest.approx(3.0 / (2.0 * math.sqrt(2.0)), abs=1e-14)
    assert red.sigma == 0.0


# ---------------------------------------------------------------------------
# the transformed potential


def test_view_gradients_match_fd(fpu, rng):
    view = TransformedPotentialView(fpu)
    d = 1e-6
    for _ in range(10):
        q1 = rng.uniform(-1.0, 1.0, 3)
        q2 = rng.uniform(-0.3, 0.3, 3)
        g1 = view.grad1(q1, q2)
        g2 = view.grad2(q1, q2)
        for k in range(3):
            e = np.zeros(3)
            e[k] = d
            fd1 = (view.value(q1 + e, q2) - view.value(q1 - e, q2)) / (2 * d)
            fd2 = (view.value(q1, q2 + e) - view.value(q1, q2 - e)) / (2 * d)
            assert abs(g1[k] - fd1) <= 1e-6
            assert abs(g2[k] - fd2) <= 1e-6


def test_view_counter_costs(fpu):
    c = SlowGradientCounter()
    view = TransformedPotentialView(fpu, c)
    q1, q2 = np.ones(3), 0.1 * np.ones(3)
    view.value(q1, q2)
    assert c.n == 0  # potential values are free
    view.grad2(q1, q2)
    assert c.n == 1
    view.grad1(q1, q2)
    assert c.n == 3  # chain rule touches both gradient callbacks


# ---------------------------------------------------------------------------
# single steps


def test_free_system_single_step_closed_form(free_scalar):
    eps, h = 1e-3, 4e-3
    w = math.sqrt(2.0)
    red = ReducedScalarState([0.3, -0.1, 0.8], [0.2, 0.0, -0.4], 0.7,
                             [1.0, 0.5, -0.2], [0.1, 0.6, 0.0], 1.3)
    out, iters = step(red, free_scalar, _cfg(eps, h))
    np.testing.assert_allclose(out.p1, red.p1, atol=1e-15)
    np.testing.assert_allclose(out.y, red.y, atol=1e-15)
    np.testing.assert_allclose(out.x, red.x, atol=1e-15)
    np.testing.assert_allclose(out.q1, red.q1 + h * red.p1, atol=1e-15)
    assert out.sigma == pytest.approx(red.sigma + h * w / eps, abs=1e-12)
    assert out.a == pytest.approx(red.a, abs=1e-15)


def test_free_rotation_many_steps(free_scalar):
    eps, h = 1e-3, 4e-3
    w = math.sqrt(2.0)
    red = ReducedScalarState([0.3, -0.1, 0.8], [0.2, 0.0, -0.4], 0.0,
                             [1.0, 0.5, -0.2], [0.1, 0.6, 0.0], 1.3)
    cur = red
    for _ in range(1000):
        cur, _ = step(cur, free_scalar, _cfg(eps, h))
    np.testing.assert_allclose(cur.q1, red.q1 + 1000 * h * red.p1, atol=1e-12)
    np.testing.assert_allclose(cur.p1, red.p1, atol=1e-12)
    np.testing.assert_allclose(cur.x, red.x, atol=1e-12)
    np.testing.assert_allclose(cur.y, red.y, atol=1e-12)
    assert cur.a == pytest.approx(red.a, abs=1e-12)
    assert cur.sigma == pytest.approx(1000 * h * w / eps, rel=1e-12)


def test_phase_consistency(fpu):
    eps, h = 1e-3, 5e-3
    red = init_reduced(fpu_initial_state(eps), fpu, eps)
    out, _ = step(red, fpu, _cfg(eps, h, fp_rel_tol=1e-13))
    want = (h / eps) * fpu.Omega(red.q1 + 0.5 * h * out.p1)
    assert out.sigma - red.sigma == pytest.approx(want, abs=1e-13)


def test_iteration_counts_stay_in_band(fpu):
    eps, h = 1e-3, 5e-3
    red = init_reduced(fpu_initial_state(eps), fpu, eps)
    cfg = _cfg(eps, h)
    for _ in range(1000):
        red, iters = step(red, fpu, cfg)
        assert 3 <= iters <= 8


def test_one_step_accuracy_improves_like_h_squared(fpu):
    eps = 1e-3
    st = fpu_initial_state(eps)
    errs = []
    for h in (0.02, 0.01):
        red, _ = step(init_reduced(st, fpu, eps), fpu,
                      _cfg(eps, h, fp_rel_tol=1e-13))
        mine = finalize_reduced(red, fpu, eps)
        ref = baselines.run(st, fpu, _cfg(eps, eps / 200.0), h,
                            scheme="verlet", sample_every=10 ** 9).final_state
        errs.append(max(float(np.max(np.abs(mine.q1 - ref.q1))),
                        float(np.max(np.abs(mine.p1 - ref.p1)))))
    assert errs[0] <= 5e-4
    assert errs[0] / errs[1] >= 3.5


def test_noloop_equals_step_on_free_system(free_scalar):
    red = ReducedScalarState([0.3, -0.1, 0.8], [0.2, 0.0, -0.4], 0.7,
                             [1.0, 0.5, -0.2], [0.1, 0.6, 0.0], 1.3)
    cfg = _cfg(1e-3, 4e-3)
    a, _ = step(red, free_scalar, cfg)
    b, _ = step_noloop(red, free_scalar, cfg)
    np.testing.assert_allclose(a.flat(), b.flat(), atol=1e-13)


def test_noloop_tracks_step_closely(fpu):
    eps = 1e-3
    red = init_reduced(fpu_initial_state(eps), fpu, eps)
    cfg = _cfg(eps, 5e-3, fp_rel_tol=1e-12)
    a, _ = step(red, fpu, cfg)
    b, _ = step_noloop(red, fpu, cfg)
    assert np.max(np.abs(a.flat() - b.flat())) <= 1e-4


def test_step_jacobian_is_symplectic(fpu):
    # the reduced variables carry the scaled pairing dq1^dp1 + eps(dx^dy +
    # dsigma^da); rescaling the fast rows by sqrt(eps) makes it canonical
    eps = 1e-3
    cfg = _cfg(eps, 5e-3, fp_rel_tol=1e-12)
    D = np.ones(14)
    D[3:7] = math.sqrt(eps)
    D[10:14] = math.sqrt(eps)

    def fn(zt):
        r = ReducedScalarState.from_flat(zt / D, 3, 3)
        r2, _ = step(r, fpu, cfg)
        return r2.flat() * D

    red = init_reduced(fpu_initial_state(eps), fpu, eps)
    for _ in range(3):
        J = jacobian_fd(fn, red.flat() * D, 1e-6)
        assert symplectic_defect(J) <= 1e-6
        red, _ = step(red, fpu, cfg)


# ---------------------------------------------------------------------------
# runs and accounting


def test_run_zero_time_records_initial_observables(fpu):
    eps = 1e-3
    st = fpu_initial_state(eps)
    rec = run(st, fpu, _cfg(eps, 5e-3), 0.0)
    assert rec.n_steps == 0
    assert list(rec.times) == [0.0]
    assert rec.observables["H"][0] == pytest.approx(
        2.5 + 3 * eps ** 2 + 0.5 * eps ** 4, abs=1e-12)
    assert rec.observables["I"][0] == pytest.approx(
        3.0 / (2.0 * math.sqrt(2.0)), abs=1e-13)


def test_run_validates_inputs(fpu):
    st = fpu_initial_state(1e-3)
    with pytest.raises(ValueError):
        run(st, fpu, _cfg(1e-3, -5e-3), 1.0)
    with pytest.raises(ValueError):
        run(st, fpu, _cfg(), 1.0, scheme="leapfrog")


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_slow_gradient_accounting(fpu, backend):
    st = fpu_initial_state(1e-3)
    rec = run(st, fpu, _cfg(), 0.1, scheme="hj", backend=backend)
    # 8 hoisted gradient units + 10 to finish the step, 14 per sweep
    assert rec.slow_gradient_calls == (18 * rec.n_steps
                                       + 14 * rec.fp_total_iterations)
    rec2 = run(st, fpu, _cfg(), 0.1, scheme="hj-noloop", backend=backend)
    assert rec2.slow_gradient_calls == 38 * rec2.n_steps
    assert rec2.fp_total_iterations == 0


def test_run_is_deterministic(fpu):
    st = fpu_initial_state(1e-3)
    a = run(st, fpu, _cfg(), 2.0)
    b = run(st, fpu, _cfg(), 2.0)
    assert a.slow_gradient_calls == b.slow_gradient_calls
    assert np.array_equal(a.final_state.flat(), b.final_state.flat())
    assert np.array_equal(a.observables["H"], b.observables["H"])


def test_short_drift_stays_bounded(fpu):
    # short-horizon version of the long conservation runs
    eps = 1e-3
    rec = run(fpu_initial_state(eps), fpu, _cfg(), 200.0)
    H = np.asarray(rec.observables["H"])
    I = np.asarray(rec.observables["I"])
    assert np.max(np.abs(H - H[0])) <= 0.02
    assert np.max(np.abs(I - I[0])) <= 0.03
