import numpy as np
import pytest

from narxprune import narx
from narxprune.exceptions import DivergenceError, RankDeficientError
from narxprune.termlib import TermDescriptor, TimeSeries, build_library

Y1 = TermDescriptor((("y", 1),))


def _recursion_series(n=30, y0=0.1):
    y = np.empty(n)
    y[0] = y0
    for k in range(1, n):
        y[k] = 2.0 * y[k - 1] + 1.0
    return TimeSeries(t=np.arange(n, dtype=float), u=np.zeros(n), y=y)


def _model(coef, intercept=0.0, terms=(Y1,), config=(1, 0, 1)):
    return narx.ReducedNarxModel(config, terms, np.asarray(coef, dtype=float), intercept)


def test_presets():
    assert (narx.PRESETS["sdse"].n_y, narx.PRESETS["sdse"].degree) == (4, 3)
    assert narx.PRESETS["whs"].n_y == narx.PRESETS["whs"].n_u == 7
    assert {p.n_terms for p in narx.PRESETS.values()} == {10}
    assert [narx.PRESETS[k].n_atoms for k in ("sdse", "adse", "emps", "whs")] == [15, 20, 25, 5]


def test_exact_linear_recursion():
    lib = build_library(_recursion_series(20), 1, 0, 1)
    model = narx.fit(lib, [0])
    np.testing.assert_allclose(model.coefficients, [2.0], atol=1e-9)
    assert model.intercept == pytest.approx(1.0, abs=1e-9)
    k, yhat = narx.predict_one_step(model, _recursion_series(20))
    np.testing.assert_allclose(yhat, _recursion_series(20).y[k], rtol=1e-12, atol=1e-9)


def test_refit_is_bit_identical(sdse_baseline):
    b = sdse_baseline
    a = narx.fit(b.library, b.term_indices)
    c = narx.fit(b.library, b.term_indices)
    np.testing.assert_array_equal(a.full_coefficients(), c.full_coefficients())


def test_residual_orthogonality(sdse_baseline):
    b = sdse_baseline
    X = b.X
    resid = b.library.target - narx.predict_features(b.model, X)
    A = np.vstack([np.ones(X.shape[1]), X])
    rel = np.abs(A @ resid) / (np.linalg.norm(A, axis=1) * np.linalg.norm(resid))
    assert rel.max() < 1e-8


def test_one_step_reproduces_fitted_values(sdse, sdse_baseline):
    b = sdse_baseline
    fitted = narx.predict_features(b.model, b.X)
    parts = [narx.predict_one_step(b.model, s)[1] for s in sdse.train]
    np.testing.assert_array_equal(np.concatenate(parts), fitted)


def test_underdetermined_rejected(rng):
    with pytest.raises(RankDeficientError):
        narx.lstsq_with_intercept(rng.normal(size=(3, 3)), rng.normal(size=3))


def test_collinear_design_rejected(rng):
    x = rng.normal(size=20)
    with pytest.raises(RankDeficientError):
        narx.lstsq_with_intercept(np.vstack([x, 2 * x]), rng.normal(size=20))


def test_zero_coefficient_model_predicts_intercept(rng):
    s = TimeSeries(t=np.arange(10.0), u=np.zeros(10), y=rng.normal(size=10))
    _, yhat = narx.predict_one_step(_model([0.0], 0.7), s)
    np.testing.assert_array_equal(yhat, 0.7)


def test_intercept_only_residuals_sum_to_zero(rng):
    y = rng.normal(size=50)
    lib = build_library(TimeSeries(t=np.arange(50.0), u=np.zeros(50), y=y), 1, 0, 1)
    intercept, _ = narx.lstsq_with_intercept(np.zeros((0, lib.n_samples)), lib.target)
    assert np.sum(lib.target - intercept) == pytest.approx(0.0, abs=1e-10)


def test_free_run_geometric():
    y = narx.simulate_free_run(_model([0.5]), [1.0], np.zeros(12))
    np.testing.assert_allclose(y, 0.5 ** np.arange(12), rtol=0, atol=1e-12)


def test_free_run_divergence_guard():
    with pytest.raises(DivergenceError, match="divergence"):
        narx.simulate_free_run(_model([2.0]), [1.0], np.zeros(40))


def test_free_run_uses_input_lags():
    u_term = TermDescriptor((("u", 2),))
    m = _model([1.0], terms=(u_term,), config=(0, 2, 1))
    u = np.arange(8.0)
    y = narx.simulate_free_run(m, [0.0, 0.0], u)
    np.testing.assert_array_equal(y[2:], u[:-2])


def test_sdse_baseline_tracks_held_out_trajectory(sdse, sdse_baseline):
    assert sdse_baseline.model.n_terms == 10
    for s in sdse.test:
        ysim = narx.simulate_series(sdse_baseline.model, s)
        assert narx.r2_score(s.y, ysim) > 0.99


def test_model_json_round_trip(sdse_baseline):
    m = sdse_baseline.model
    back = narx.ReducedNarxModel.from_json(m.to_json())
    assert back.terms == m.terms
    np.testing.assert_array_equal(back.full_coefficients(), m.full_coefficients())


def test_select_terms_perfect_correlate(rng):
    s = TimeSeries(t=np.arange(30.0), u=rng.normal(size=30), y=rng.normal(size=30))
    lib = build_library(s, 2, 2, 2)
    X = lib.X.copy()
    X[7] = lib.target
    lib2 = type(lib)(X, lib.target, lib.descriptors, lib.config, lib.groups, lib.index)
    assert narx.select_terms(lib2, 3)[0] == 7


def test_select_terms_two_candidates(rng):
    s = TimeSeries(t=np.arange(30.0), u=rng.normal(size=30), y=rng.normal(size=30))
    lib = build_library(s, 1, 1, 1)
    corr = [np.corrcoef(row, lib.target)[0, 1] ** 2 for row in lib.X]
    assert narx.select_terms(lib, 1) == [int(np.argmax(corr))]


def test_select_terms_deterministic(sdse):
    lib = build_library(list(sdse.train), 4, 4, 3)
    a, b = narx.select_terms(lib, 10), narx.select_terms(lib, 10)
    assert a == b and len(set(a)) == 10
