import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsc_lab.distfun import distance_profile
from vsc_lab.indexfun import IndexFunction, default_t_grid, index_from_distance
from vsc_lab.problems import make_linear_from_matrix, make_linear_hilbert, make_preset
from vsc_lab.rates import (
    RateReport, add_noise, choose_alpha, default_deltas, fit_exponent, run_rate_experiment,
)
from vsc_lab.tikhonov import solve


def linear_phi(slope=1.0, t_max=10.0):
    return IndexFunction(t_grid=np.array([0.0, t_max]), values=np.array([0.0, slope * t_max]),
                         slopes_used=np.zeros(2))


def sqrt_phi():
    t = np.union1d([0.0, 0.01], np.geomspace(1e-8, 10, 2000))
    return IndexFunction(t_grid=t, values=2 * np.sqrt(t), slopes_used=np.zeros(t.size))


def test_noise_zero_delta():
    y = np.array([1.0, -2.0, 3.0])
    np.testing.assert_array_equal(add_noise(y, 0.0, seed=1), y)


@settings(max_examples=50)
@given(st.floats(1e-8, 1e3), st.integers(0, 2**32 - 1))
def test_noise_norm_is_exact(delta, seed):
    y = np.linspace(-1, 1, 9)
    assert np.linalg.norm(add_noise(y, delta, seed) - y) == pytest.approx(delta, rel=1e-12)


def test_noise_reproducible_and_validated():
    y = np.ones(5)
    np.testing.assert_array_equal(add_noise(y, 0.1, 42), add_noise(y, 0.1, 42))
    assert not np.array_equal(add_noise(y, 0.1, 42), add_noise(y, 0.1, 43))
    with pytest.raises(ValueError):
        add_noise(y, -0.1, 0)


def test_a_priori_examples():
    assert choose_alpha(0.03, 2, linear_phi()) == pytest.approx(0.03)
    assert choose_alpha(0.01, 2, sqrt_phi()) == pytest.approx(5e-4, rel=1e-9)
    zero = IndexFunction(t_grid=np.array([0.0, 1.0]), values=np.zeros(2), slopes_used=np.zeros(2))
    with pytest.raises(ValueError):
        choose_alpha(0.01, 2, zero)
    with pytest.raises(ValueError):
        choose_alpha(0.0, 2, linear_phi())
    with pytest.raises(ValueError):
        choose_alpha(0.1, 2, linear_phi(), rule="Oracle")


def test_discrepancy_example():
    p = make_linear_hilbert([1.0, 0.5], [1.0, 1.0])
    y = add_noise(p.y_dagger, 0.1, seed=5)
    alpha = choose_alpha(0.1, 2, None, "Discrepancy", p, y)
    assert solve(p, y, alpha).residual_norm <= 0.15
    # the previous rung of the ladder was not yet good enough
    assert solve(p, y, 2 * alpha).residual_norm > 0.15
    with pytest.raises(ValueError):
        choose_alpha(0.1, 2, None, "Discrepancy")


def test_discrepancy_ladder_exhaustion():
    # data with a component outside the range of A keeps every residual >= 1
    p = make_linear_from_matrix(np.eye(3, 2), [1.0, 1.0, 0.0])
    y = np.array([1.0, 1.0, 1.0])
    with pytest.raises(RuntimeError):
        choose_alpha(0.1, 2, None, "Discrepancy", p, y)


@pytest.mark.parametrize("power, scale", [(1.0, 1.0), (2.0, 1.0), (0.5, 3.0)])
def test_fit_exponent_examples(power, scale):
    d = np.geomspace(1e-4, 1e-1, 8)
    assert fit_exponent(d, scale * d ** power) == pytest.approx(power, abs=1e-12)


def test_fit_exponent_ignores_failed_and_needs_three():
    d = np.geomspace(1e-4, 1e-1, 5)
    e = d.copy()
    e[1] = np.nan
    e[2] = 0.0
    assert fit_exponent(d, e) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        fit_exponent(d[:2], d[:2])


def test_zero_problem_errors_vanish():
    p = make_preset("zero", n=10)
    deltas = [1.0, 0.5, 0.1]
    rep = run_rate_experiment(p, 0.5, linear_phi(), deltas, replicates=5, seed=0)
    # alpha = delta, so the filter bound gives ||x|| <= delta * max sigma / (2 sqrt(alpha))
    assert np.all(rep.errors <= np.asarray(deltas) / 4 + 1e-15)
    assert np.all(rep.errors >= 0)


def test_report_invariants_and_determinism(tmp_path):
    p = make_linear_hilbert(1.0 / np.arange(1, 21), np.ones(20) / np.sqrt(20),
                            mode="SourceElement")
    deltas = default_deltas(float(np.linalg.norm(p.y_dagger)), 5)
    a = run_rate_experiment(p, 0.5, sqrt_phi(), deltas, replicates=3, seed=9)
    b = run_rate_experiment(p, 0.5, sqrt_phi(), deltas, replicates=3, seed=9)
    np.testing.assert_array_equal(a.errors, b.errors)
    assert np.all(a.envelope_constant * a.phi_values >= a.errors * (1 - 1e-12))
    assert len(a.cells) == 15
    for path, writer in (("r.csv", a.to_csv), ("l.csv", a.to_long_csv), ("r.json", a.to_json)):
        writer(tmp_path / path)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "delta,median_error,phi,alpha,failures"
    assert len((tmp_path / "l.csv").read_text().splitlines()) == 16


def test_delta_list_validation():
    p = make_linear_hilbert([1.0], [1.0])
    for bad in ([], [0.1, 0.2], [0.1, -0.1]):
        with pytest.raises(ValueError):
            run_rate_experiment(p, 0.5, linear_phi(), bad)


def test_nonconverged_cells_are_counted():
    p = make_preset("autoconvolution_smooth", n=6)
    kw = {"starts": 1, "max_iter": 1, "tol": 1e-14}
    rep = run_rate_experiment(p, 0.5, linear_phi(), [0.1, 0.05, 0.01], replicates=2,
                              solver_kwargs=kw)
    assert rep.failures.sum() == 6
    assert np.all(np.isnan(rep.errors))
    assert np.isnan(rep.fitted_exponent)


def test_envelope_does_not_deteriorate(benchmark):
    beta = 0.5
    yn = float(np.linalg.norm(benchmark.y_dagger))
    phi = index_from_distance(distance_profile(benchmark, beta), default_t_grid(yn))
    rep = run_rate_experiment(benchmark, beta, phi, default_deltas(yn), replicates=11, seed=0)
    ratio = rep.errors / rep.phi_values
    half = ratio.size // 2
    assert ratio[half:].max() <= 1.2 * ratio[:half].max()
    assert isinstance(rep, RateReport)
