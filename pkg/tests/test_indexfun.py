import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vsc_lab.distfun import DistanceProfile, distance_profile
from vsc_lab.indexfun import (
    IndexFunction, NonDecayingProfile, concave_envelope, default_t_grid, evaluate,
    index_from_distance,
)
from vsc_lab.problems import error_functional, omega, residual_norm


def make_profile(r, d, exact=True, beta=0.5):
    r = np.asarray(r, float)
    return DistanceProfile(beta=beta, r_grid=r, values=np.asarray(d, float),
                           exact=np.full(r.size, exact), maximizers=np.zeros((r.size, 1)),
                           residuals=np.zeros(r.size))


def inverse_profile(num=4000):
    r = np.geomspace(1e-2, 1e4, num)
    return make_profile(r, 1.0 / r)


def test_zero_profile_gives_zero_phi():
    phi = index_from_distance(make_profile([0.0, 1.0, 2.0], [0.0, 0.0, 0.0]),
                              [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(phi.values, 0.0)


def test_inverse_profile_gives_two_sqrt_t():
    prof = inverse_profile()
    t = np.concatenate([[0.0], np.geomspace(1e-3, 1.0, 200)])
    phi = index_from_distance(prof, t, decay_tol=1e-3)
    ts = np.geomspace(1e-3, 1.0, 57)
    rel = np.abs(evaluate(phi, ts) - 2 * np.sqrt(ts)) / (2 * np.sqrt(ts))
    assert rel.max() <= 0.02
    assert evaluate(phi, 0.25) == pytest.approx(1.0, rel=0.02)


def test_inverse_profile_against_grid_minimization():
    # brute-force inf over a fine continuous-r grid as independent oracle
    prof = inverse_profile(500)
    t = np.array([0.0, 1e-3, 1e-2, 0.1, 1.0])
    phi = index_from_distance(prof, t, decay_tol=1e-3)
    r_fine = np.geomspace(1e-2, 1e4, 200_001)
    for tk in t[1:]:
        oracle = np.min(1.0 / r_fine + r_fine * tk)
        assert evaluate(phi, tk) == pytest.approx(oracle, rel=1e-3)
        assert evaluate(phi, tk) >= oracle - 1e-12


def test_scalar_problem_phi_properties(scalar_identity):
    prof = distance_profile(scalar_identity, 0.5)
    phi = index_from_distance(prof, default_t_grid(1.0))
    assert abs(phi.values[0]) <= 1e-8
    assert np.all(np.diff(phi.values) >= 0)
    slopes = np.diff(phi.values) / np.diff(phi.t_grid)
    assert np.all(np.diff(slopes) <= 1e-10)
    assert not phi.trivial


def test_majorant_property_on_stored_maximizers(benchmark):
    beta = 0.5
    prof = distance_profile(benchmark, beta)
    phi = index_from_distance(prof, default_t_grid(float(np.linalg.norm(benchmark.y_dagger))))
    od = benchmark.omega_dagger_value
    for x in prof.maximizers:
        lhs = beta * error_functional(benchmark, x) - omega(benchmark, x) + od
        assert lhs <= evaluate(phi, residual_norm(benchmark, x)) + 1e-7


def test_non_decaying_profile_raises():
    with pytest.raises(NonDecayingProfile):
        index_from_distance(make_profile([0.0, 1.0], [2.0, 1.0]), [0.0, 1.0])


def test_negative_values_and_bad_grid():
    with pytest.raises(ValueError):
        index_from_distance(make_profile([0.0, 1.0, 2.0], [1.0, 0.0, 0.0]), [0.1, 1.0])
    with pytest.raises(ValueError):
        index_from_distance(make_profile([0.0, 1.0, 2.0], [1.0, 0.0, 0.0]), [0.0, 1.0, 0.5])


def test_trivial_profile_uses_chosen_slope():
    phi = index_from_distance(make_profile([0.0, 1.0], [0.0, 0.0]), [0.0, 1.0, 2.0],
                              trivial_slope=3.0)
    assert phi.trivial
    np.testing.assert_allclose(phi.values, [0.0, 3.0, 6.0])


def test_linear_vsc_profile():
    phi = index_from_distance(make_profile([0.0, 1.0, 2.0], [1.0, -0.5, -1.0]), [0.0, 1.0])
    assert phi.trivial
    np.testing.assert_allclose(phi.values, [0.0, 1.0])


def test_evaluate_examples():
    phi = IndexFunction(t_grid=np.array([0.0, 1.0, 2.0]), values=np.array([0.0, 2.0, 3.0]),
                        slopes_used=np.zeros(3))
    assert evaluate(phi, 0.0) == 0.0
    assert evaluate(phi, 0.5) == pytest.approx(1.0)
    assert evaluate(phi, 1.5) == pytest.approx(0.5 * (2.0 + 3.0))
    assert evaluate(phi, 4.0) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        evaluate(phi, -1e-3)


def test_concave_envelope_examples():
    np.testing.assert_allclose(concave_envelope([(0, 1), (1, 2), (2, 1)]),
                               [[0, 1], [1, 1], [2, 1]])
    convex = [(0, 4.0), (1, 1.0), (2, 0.0), (3, 0.0)]
    np.testing.assert_allclose(concave_envelope(convex), convex)
    np.testing.assert_allclose(concave_envelope([(0, 0), (1, 0), (2, 1)], lower=False),
                               [[0, 0], [1, 0.5], [2, 1]])
    with pytest.raises(ValueError):
        concave_envelope([(1, 0), (0, 1)])


@settings(max_examples=60)
@given(arrays(float, 12, elements=st.floats(-5, 5)))
def test_convex_minorant_properties(v):
    t = np.arange(12.0)
    env = concave_envelope(np.column_stack([t, v]))[:, 1]
    assert np.all(env <= v + 1e-12)
    assert np.all(np.diff(env, 2) >= -1e-9)


def _decaying(values):
    r = np.concatenate([[0.0], np.geomspace(1e-2, 1e3, values.size - 1)])
    d = np.sort(values)[::-1]
    d[-1] = 0.0
    return r, concave_envelope(np.column_stack([r, d]))[:, 1]


positive = arrays(float, 15, elements=st.floats(0, 10))


@settings(max_examples=40)
@given(positive)
def test_phi_scales_with_profile(values):
    # inf_r (2 D(r) + r t) = 2 inf_r (D(r) + r t / 2)
    r, d = _decaying(values)
    t = np.linspace(0, 2, 21)
    a = index_from_distance(make_profile(r, d), t, decay_tol=1e-9)
    b = index_from_distance(make_profile(r, 2 * d), t, decay_tol=1e-9)
    np.testing.assert_allclose(evaluate(b, t), 2 * evaluate(a, t / 2), rtol=1e-9, atol=1e-9)
    assert np.all(evaluate(a, t) <= evaluate(b, t) + 1e-12)
    assert np.all(evaluate(b, t) <= 2 * evaluate(a, t) + 1e-12)


@settings(max_examples=40)
@given(positive, st.integers(0, 2**31 - 1))
def test_larger_r_grid_never_increases_phi(values, seed):
    r, d = _decaying(values)
    t = np.linspace(0, 2, 21)
    keep = np.random.default_rng(seed).random(r.size) < 0.5
    keep[[0, -1]] = True
    full = index_from_distance(make_profile(r, d), t, decay_tol=1e-9)
    sub = index_from_distance(make_profile(r[keep], d[keep]), t, decay_tol=1e-9)
    assert np.all(evaluate(full, t) <= evaluate(sub, t) + 1e-12)


@settings(max_examples=40)
@given(positive)
def test_phi_is_concave_nondecreasing(values):
    r, d = _decaying(values)
    phi = index_from_distance(make_profile(r, d), np.linspace(0, 3, 31), decay_tol=1e-9)
    slopes = np.diff(phi.values) / np.diff(phi.t_grid)
    assert np.all(slopes >= -1e-12)
    assert np.all(np.diff(slopes) <= 1e-10 * max(1.0, np.abs(slopes).max()))
    assert abs(phi.values[0]) <= 1e-8


def test_serialization(tmp_path):
    phi = index_from_distance(inverse_profile(50), [0.0, 0.1, 1.0], decay_tol=1e-3)
    phi.to_json(tmp_path / "phi.json")
    back = IndexFunction.from_json(tmp_path / "phi.json")
    np.testing.assert_array_equal(back.values, phi.values)
    phi.to_csv(tmp_path / "phi.csv")
    assert (tmp_path / "phi.csv").read_text().splitlines()[0] == "t,phi,slope"


def test_noncertified_profile_is_repaired():
    # a noisy non-convex sample is replaced by its convex minorant first
    r = np.array([0.0, 1.0, 2.0, 3.0])
    d = np.array([2.0, 1.5, 0.2, 0.0])
    noisy = make_profile(r, d, exact=False)
    phi = index_from_distance(noisy, [0.0, 0.5, 1.0, 3.0])
    env = concave_envelope(np.column_stack([r, d]))[:, 1]
    ref = index_from_distance(make_profile(r, env), [0.0, 0.5, 1.0, 3.0])
    np.testing.assert_allclose(evaluate(phi, [0.5, 1.0, 2.0]), evaluate(ref, [0.5, 1.0, 2.0]))
