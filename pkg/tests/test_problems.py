import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vsc_lab import problems as P
from vsc_lab.problems import (
    apply_forward,
    apply_jacobian_adjoint,
    error_functional,
    make_autoconvolution,
    make_l1_linear,
    make_linear_hilbert,
    omega,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_identity_source_element():
    p = make_linear_hilbert([1.0], [1.0], mode="SourceElement")
    np.testing.assert_array_equal(p.x_dagger, [1.0])
    np.testing.assert_array_equal(p.y_dagger, [1.0])
    assert p.omega_dagger_value == 1.0


def test_direct_xdagger_matches_dense_multiply():
    p = make_linear_hilbert([1.0, 0.5], [1.0, 1.0])
    dense = np.diag([1.0, 0.5])
    np.testing.assert_allclose(p.y_dagger, dense @ np.array([1.0, 1.0]))
    np.testing.assert_allclose(p.y_dagger, [1.0, 0.5])
    assert p.omega_dagger_value == 2.0


def test_harmonic_instance_against_dense_svd(rng):
    n = 50
    sigma = 1.0 / np.arange(1, n + 1)
    w = rng.standard_normal(n)
    w /= np.linalg.norm(w)
    p = make_linear_hilbert(sigma, w, mode="SourceElement", rotate_seed=3)
    dense = (p.left * sigma) @ p.right.T
    # source coefficients are taken in the left singular basis
    x_dagger = dense.T @ (p.left @ w)
    np.testing.assert_allclose(p.x_dagger, x_dagger, atol=1e-14)
    np.testing.assert_allclose(apply_forward(p, p.x_dagger), dense @ x_dagger, atol=1e-14)
    assert p.omega_dagger_value == pytest.approx(x_dagger @ x_dagger, rel=1e-12)
    u, s, vt = np.linalg.svd(dense)
    np.testing.assert_allclose(s, sigma, rtol=1e-10)


@pytest.mark.parametrize("sigma, coeffs", [([], []), ([1.0, 0.0], [1, 1]),
                                           ([1.0, -2.0], [1, 1]), ([1.0], [1.0, 2.0])])
def test_linear_hilbert_rejects_bad_input(sigma, coeffs):
    with pytest.raises(ValueError):
        make_linear_hilbert(sigma, coeffs)


def test_forward_reproduces_exact_data(rng):
    for p in (make_linear_hilbert(rng.uniform(0.1, 1, 5), rng.standard_normal(5), null_dim=3,
                                  rotate_seed=1),
              make_autoconvolution(rng.standard_normal(7)),
              make_l1_linear(rng.standard_normal((6, 4)), rng.standard_normal(4))):
        np.testing.assert_allclose(apply_forward(p, p.x_dagger), p.y_dagger, rtol=1e-12)


def test_autoconvolution_shapes_and_solution_set():
    p = make_autoconvolution(np.ones(4))
    assert (p.n, p.m) == (4, 7)
    assert p.solution_set is P.SolutionSet.PLUS_MINUS_PAIR
    assert p.h == 0.25


def test_autoconvolution_zero_and_hand_example():
    p = make_autoconvolution([1.0, 2.0])
    np.testing.assert_array_equal(apply_forward(p, [0.0, 0.0]), np.zeros(3))
    # h * (1*1, 1*2 + 2*1, 2*2)
    np.testing.assert_allclose(apply_forward(p, [1.0, 2.0]), [0.5, 2.0, 2.0])


@given(arrays(float, 6, elements=finite))
def test_autoconvolution_is_even(x):
    p = make_autoconvolution(np.ones(6))
    assert np.max(np.abs(apply_forward(p, -x) - apply_forward(p, x))) <= 1e-15


@settings(max_examples=50)
@given(arrays(float, 5, elements=finite), arrays(float, 5, elements=finite), finite, finite)
def test_linear_hilbert_forward_is_linear(x, z, a, b):
    p = make_linear_hilbert([1.0, 0.7, 0.3, 0.1, 0.01], np.ones(5), rotate_seed=0)
    lhs = apply_forward(p, a * x + b * z)
    rhs = a * apply_forward(p, x) + b * apply_forward(p, z)
    scale = max(1.0, np.abs(lhs).max(), np.abs(a * apply_forward(p, x)).max(),
                np.abs(b * apply_forward(p, z)).max())
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_forward_dimension_mismatch():
    p = make_linear_hilbert([1.0, 0.5], [1.0, 1.0])
    with pytest.raises(ValueError):
        apply_forward(p, np.ones(3))
    with pytest.raises(ValueError):
        apply_jacobian_adjoint(p, np.ones(2), np.ones(3))


def test_jacobian_adjoint_linear_diagonal():
    p = make_linear_hilbert([1.0, 0.5], [1.0, 1.0])
    np.testing.assert_allclose(apply_jacobian_adjoint(p, None, [1.0, 1.0]), [1.0, 0.5])


def test_jacobian_adjoint_autoconvolution_vanishes_at_zero(rng):
    p = make_autoconvolution(np.ones(5))
    np.testing.assert_array_equal(apply_jacobian_adjoint(p, np.zeros(5), rng.standard_normal(9)),
                                  np.zeros(5))


def test_jacobian_adjoint_matches_central_differences(rng):
    p = make_autoconvolution(rng.standard_normal(8))
    eps = 1e-6
    for _ in range(10):
        x, v, r = rng.standard_normal(8), rng.standard_normal(8), rng.standard_normal(15)
        fd = (apply_forward(p, x + eps * v) - apply_forward(p, x - eps * v)) / (2 * eps)
        lhs = fd @ r
        rhs = v @ apply_jacobian_adjoint(p, x, r)
        assert abs(lhs - rhs) <= 1e-5 * max(abs(lhs), 1e-12)


def test_omega_and_error_functional():
    p = make_autoconvolution([1.0, -2.0, 0.5])
    assert error_functional(p, p.x_dagger) == 0.0
    assert error_functional(p, -p.x_dagger) == 0.0
    q = make_l1_linear(np.eye(3), [1.0, 0.0, 0.0])
    assert omega(q, [1.0, -2.0, 0.0]) == 3.0
    assert error_functional(q, q.x_dagger) == 0.0


def test_error_functional_zero_exactly_on_solution_set(rng):
    p = make_linear_hilbert([1.0, 0.5], [1.0, -1.0], null_dim=2)
    assert error_functional(p, p.x_dagger) == 0.0
    for _ in range(20):
        x = rng.standard_normal(4)
        assert error_functional(p, x) > 0.0


def test_null_space_orthogonal_to_xdagger(rng):
    p = make_linear_hilbert(rng.uniform(0.1, 1.0, 4), rng.standard_normal(4), null_dim=3,
                            rotate_seed=7)
    basis = P.null_space_basis(p)
    assert basis.shape == (7, 3)
    np.testing.assert_allclose(apply_forward(p, basis[:, 0]), 0.0, atol=1e-12)
    for v in (basis @ rng.standard_normal((3, 10))).T:
        assert abs(p.x_dagger @ v) <= 1e-12
    sols = P.sample_solutions(p, 5, rng)
    for x in sols:
        np.testing.assert_allclose(apply_forward(p, x), p.y_dagger, atol=1e-12)
        assert omega(p, x) >= p.omega_dagger_value - 1e-12


def test_l1_requires_injective():
    with pytest.raises(ValueError):
        make_l1_linear(np.ones((3, 2)), [1.0, 0.0])


@pytest.mark.parametrize("builder", [
    lambda: make_linear_hilbert([1.0, 0.5, 0.25], [1.0, 2.0, 3.0]),
    lambda: make_linear_hilbert([1.0, 0.5], [1.0, 2.0], null_dim=2, rotate_seed=4),
    lambda: make_autoconvolution([1.0, 2.0, 3.0]),
    lambda: make_l1_linear(np.arange(1.0, 7.0).reshape(3, 2) + np.eye(3, 2), [1.0, 0.0]),
])
def test_json_round_trip(builder, tmp_path):
    p = builder()
    path = tmp_path / "problem.json"
    P.save_problem(p, path)
    data = json.loads(path.read_text())
    for key in ("kind", "n", "m", "sigma", "xdagger", "omega_kind", "error_kind", "p"):
        assert key in data
    q = P.load_problem(path)
    assert q.kind is p.kind and q.n == p.n and q.m == p.m
    np.testing.assert_array_equal(q.x_dagger, p.x_dagger)
    np.testing.assert_array_equal(q.y_dagger, p.y_dagger)


def test_from_dict_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        P.from_dict({"kind": "Autoconvolution", "xdagger": [1.0], "colour": 1})


def test_instances_are_immutable():
    p = make_linear_hilbert([1.0], [1.0])
    with pytest.raises(ValueError):
        p.x_dagger[0] = 2.0
