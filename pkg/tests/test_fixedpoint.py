"""Fixed-point iteration Z = z + A(Z): termination, warm starts, failure modes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscint.fixedpoint import (FixedPointResult, NonFiniteIterateError,
                               solve_fixed_point)


def test_zero_update_converges_in_one_iteration():
    res = solve_fixed_point(np.array([1.0, -2.0]), lambda Z: np.zeros(2),
                            tol=1e-12)
    assert res.converged and res.iterations == 1
    np.testing.assert_array_equal(res.solution, [1.0, -2.0])


def test_half_contraction_reaches_two():
    # Z = 1 + 0.5 Z has the fixed point 2
    res = solve_fixed_point(np.array([1.0]), lambda Z: 0.5 * Z, tol=1e-14)
    assert res.converged
    assert res.solution[0] == pytest.approx(2.0, abs=1e-12)


def test_warm_start_resolve_takes_one_iteration():
    z = np.array([1.0])
    res = solve_fixed_point(z, lambda Z: 0.5 * Z, tol=1e-14)
    again = solve_fixed_point(z, lambda Z: 0.5 * Z, tol=1e-14,
                              x0=res.solution)
    assert again.iterations == 1
    np.testing.assert_allclose(again.solution, res.solution, atol=1e-14)


def test_deterministic_replay():
    z = np.array([0.3, 0.7])

    def A(Z):
        return np.array([0.2 * Z[1], -0.1 * Z[0] + 0.05])

    a = solve_fixed_point(z, A, tol=1e-13)
    b = solve_fixed_point(z, A, tol=1e-13)
    assert a.iterations == b.iterations
    assert np.array_equal(a.solution, b.solution)


def test_nonconvergence_reports_instead_of_raising():
    # expanding map cannot meet the tolerance but stays finite for a while
    res = solve_fixed_point(np.array([1.0]), lambda Z: -0.999 * Z,
                            tol=1e-16, max_iter=5)
    assert not res.converged
    assert res.iterations == 5
    assert res.last_relative_change > 1e-16


def test_blowup_raises_nonfinite():
    with np.errstate(over="ignore"), pytest.raises(NonFiniteIterateError):
        solve_fixed_point(np.array([1.0]), lambda Z: 1e200 * Z ** 3,
                          tol=1e-12, max_iter=50)


def test_tol_must_be_positive():
    with pytest.raises(ValueError):
        solve_fixed_point(np.array([1.0]), lambda Z: 0.0 * Z, tol=0.0)
    with pytest.raises(ValueError):
        solve_fixed_point(np.array([1.0]), lambda Z: 0.0 * Z, tol=-1e-3)


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(min_value=-0.9, max_value=0.9),
       z0=st.floats(min_value=-10.0, max_value=10.0))
def test_linear_contraction_hits_closed_form(alpha, z0):
    # Z = z0 + alpha Z  =>  Z* = z0 / (1 - alpha)
    res = solve_fixed_point(np.array([z0]), lambda Z: alpha * Z, tol=1e-14,
                            max_iter=400)
    assert res.converged
    assert res.solution[0] == pytest.approx(z0 / (1.0 - alpha), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(min_value=-5.0, max_value=5.0),
                min_size=1, max_size=6))
def test_result_is_a_fixed_point_of_the_map(vals):
    z = np.array(vals)

    def A(Z):
        return 0.3 * np.tanh(Z)

    res = solve_fixed_point(z, A, tol=1e-13, max_iter=200)
    assert res.converged
    np.testing.assert_allclose(res.solution, z + A(res.solution),
                               atol=1e-11)


def test_result_type_fields():
    res = solve_fixed_point(np.array([1.0]), lambda Z: 0.5 * Z, tol=1e-13)
    assert isinstance(res, FixedPointResult)
    assert res.last_relative_change <= 1e-13
