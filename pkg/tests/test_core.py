"""Phase-space containers, config validation, and the finite-difference
verification helpers everything else leans on."""

import math

import numpy as np
import pytest

from oscint.core import (IntegratorConfig, ReducedScalarState, RunRecord,
                         SlowFastState, SlowGradientCounter, StiffnessWarning,
                         canonical_structure, gradient_check, jacobian_fd,
                         symplectic_defect)


# ---------------------------------------------------------------------------
# state containers


def test_slowfast_flat_layout_and_roundtrip():
    st = SlowFastState([1.0, 2.0], [3.0], [4.0, 5.0], [6.0])
    assert st.s == 2 and st.f == 1
    np.testing.assert_array_equal(st.flat(), [1, 2, 3, 4, 5, 6])
    back = SlowFastState.from_flat(st.flat(), 2, 1)
    np.testing.assert_array_equal(back.flat(), st.flat())


def test_slowfast_rejects_nonfinite():
    with pytest.raises(ValueError):
        SlowFastState([np.nan], [1.0], [1.0], [1.0])
    with pytest.raises(ValueError):
        SlowFastState([1.0], [np.inf], [1.0], [1.0])


def test_reduced_flat_layout():
    # positions block (q1, x, sigma) then momenta block (p1, y, a); the
    # pairing (sigma, a) sits at indices s+f and 2(s+f)+1
    r = ReducedScalarState([1.0, 2.0], [3.0], 0.5, [4.0, 5.0], [6.0], 0.7)
    np.testing.assert_array_equal(r.flat(), [1, 2, 3, 0.5, 4, 5, 6, 0.7])
    back = ReducedScalarState.from_flat(r.flat(), 2, 1)
    assert back.sigma == 0.5 and back.a == 0.7
    np.testing.assert_array_equal(back.flat(), r.flat())


def test_counter_accumulates():
    c = SlowGradientCounter()
    c.add()
    c.add(3)
    assert c.n == 4


# ---------------------------------------------------------------------------
# config


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(eps=-1.0, h=0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=0.0, h=0.1)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=1e-3, h=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=1e-3, h=math.inf)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=1e-3, h=1e-3, fp_rel_tol=0.0)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=1e-3, h=1e-3, fp_rel_tol=1.5)
    with pytest.raises(ValueError):
        IntegratorConfig(eps=1e-3, h=1e-3, fp_max_iter=0)


def test_config_accepts_signed_h():
    # adjoint steps run the map at negated h; only full runs insist h > 0
    cfg = IntegratorConfig(eps=1e-3, h=-0.005)
    assert cfg.h == -0.005


def test_config_stiffness_advisory():
    with pytest.warns(StiffnessWarning):
        IntegratorConfig(eps=1e-3, h=0.02)  # h^2/eps = 0.4, on the edge
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        IntegratorConfig(eps=1e-3, h=0.005)  # 0.025, fine


# ---------------------------------------------------------------------------
# run record


def test_runrecord_validates_times_and_lengths():
    ok = RunRecord(times=[0.0, 1.0], observables={"H": [1.0, 1.0]},
                   final_state=None, slow_gradient_calls=0, n_steps=1,
                   fp_total_iterations=0)
    assert ok.times[1] == 1.0
    with pytest.raises(ValueError):
        RunRecord(times=[0.0, 0.0], observables={"H": [1.0, 1.0]},
                  final_state=None, slow_gradient_calls=0, n_steps=1,
                  fp_total_iterations=0)
    with pytest.raises(ValueError):
        RunRecord(times=[0.0, 1.0], observables={"H": [1.0]},
                  final_state=None, slow_gradient_calls=0, n_steps=1,
                  fp_total_iterations=0)


# ---------------------------------------------------------------------------
# jacobian probe


def test_jacobian_identity_map():
    J = jacobian_fd(lambda z: z, np.array([0.3, -0.7, 2.0]), 1e-6)
    np.testing.assert_allclose(J, np.eye(3), atol=1e-10)


def test_jacobian_linear_map():
    M = np.array([[1.0, 2.0], [-0.5, 3.0]])
    J = jacobian_fd(lambda z: M @ z, np.zeros(2), 1e-6)
    np.testing.assert_allclose(J, M, atol=1e-9)


def test_jacobian_of_composition_is_product():
    M = np.array([[1.0, 1.0], [0.0, 1.0]])
    N = np.array([[2.0, 0.0], [1.0, 0.5]])
    J = jacobian_fd(lambda z: M @ (N @ z), np.array([0.4, -0.2]), 1e-6)
    np.testing.assert_allclose(J, M @ N, atol=1e-9)


# ---------------------------------------------------------------------------
# symplectic defect


def test_canonical_structure_shape():
    S = canonical_structure(2)
    np.testing.assert_array_equal(S, [[0, 0, 1, 0], [0, 0, 0, 1],
                                      [-1, 0, 0, 0], [0, -1, 0, 0]])


def test_defect_identity_and_rotation():
    assert symplectic_defect(np.eye(4)) == 0.0
    th = 0.83
    R = np.array([[math.cos(th), math.sin(th)],
                  [-math.sin(th), math.cos(th)]])
    assert symplectic_defect(R) <= 1e-15


def test_defect_area_distortion():
    J = np.diag([2.0, 1.0, 1.0, 1.0])
    assert symplectic_defect(J) == pytest.approx(1.0)


def test_defect_rejects_odd_dimension():
    with pytest.raises(ValueError):
        symplectic_defect(np.eye(3))


# ---------------------------------------------------------------------------
# gradient check


def test_gradient_check_constant_function():
    d = gradient_check(lambda z: 1.5, lambda z: np.zeros(2),
                       np.array([0.2, -0.4]), 1e-6)
    assert d <= 1e-12


def test_gradient_check_quadratic():
    d = gradient_check(lambda z: 0.5 * float(z @ z), lambda z: z,
                       np.array([1.0, 2.0]), 1e-6)
    assert d <= 1e-9


def test_gradient_check_flags_wrong_gradient():
    d = gradient_check(lambda z: 0.5 * float(z @ z), lambda z: 2.0 * z,
                       np.array([1.0, 2.0]), 1e-6)
    assert d > 0.4
