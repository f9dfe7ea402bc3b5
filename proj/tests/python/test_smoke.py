import math

import numpy as np
import pytest

import gmred


def normal(w, mu, s2):
    return gmred.GaussianComponent(w, np.array([mu]), np.array([[s2]]))


def test_density_and_moments():
    m = gmred.GaussianMixture([normal(1.0, 0.0, 1.0)])
    assert m.density(np.array([0.0])) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-14)
    pair = gmred.GaussianMixture([normal(0.5, 1.0, 1.0), normal(0.5, -1.0, 1.0)])
    mean, cov = gmred.mixture_moments(pair)
    assert mean[0] == pytest.approx(0.0, abs=1e-15)
    assert cov[0, 0] == pytest.approx(2.0)


def test_merge_geometry_example():
    g = gmred.merge_geometry(normal(0.5, 0.0, 1.0), normal(0.5, 5.0, 1.0))
    assert g["xi"][0] == pytest.approx(2.5)
    assert g["V"][0, 0] == pytest.approx(7.25)
    assert g["W"][0, 0] == pytest.approx(2 - 1 / 7.25)
    assert g["wPD"]


def test_validation_errors():
    with pytest.raises(ValueError):
        normal(0.0, 0.0, 1.0)
    with pytest.raises(ArithmeticError):
        normal(0.5, 0.0, -1.0)
    with pytest.raises(ArithmeticError):
        gmred.pearson_chi2(normal(0.99, 0.0, 0.01), normal(0.01, 0.0, 100.0))


def test_criteria_values():
    assert gmred.kitagawa_wkl(normal(0.5, 0, 1), normal(0.5, 0, 4)) == pytest.approx(1.0625)
    assert gmred.runnalls_bound(normal(0.5, 0, 1), normal(0.5, 2, 1)) == pytest.approx(0.5 * math.log(2))
    a = normal(0.3, 0.2, 1.1)
    assert gmred.pearson_chi2(a, a) == 0.0


def test_reduce_table1():
    g = gmred.normalize(gmred.table1())
    trace = gmred.reduce_to(g, 1, "pearson", track_kl=True)
    assert len(trace["steps"]) == 15
    assert trace["steps"][-1]["kl_to_true"] == pytest.approx(0.1304686, abs=1e-3)
    assert trace["mixture"].order == 1


def test_reduce_stuck_and_fallback():
    m = gmred.GaussianMixture([normal(0.99, 0.0, 0.01), normal(0.01, 0.0, 100.0)])
    with pytest.raises(RuntimeError):
        gmred.reduce_to(m, 1, "pearson")
    trace = gmred.reduce_to(m, 1, "pearson", fallback="runnalls")
    assert trace["steps"][0]["criterion"] == "runnalls"


def test_json_round_trip():
    g = gmred.table3()
    back = gmred.GaussianMixture.from_json(g.to_json())
    assert back.order == g.order
    assert np.array_equal(back[2].cov, g[2].cov)


def test_global_fit_beats_greedy():
    g = gmred.normalize(gmred.table1())
    greedy = gmred.reduce_to(g, 4, "pearson")["mixture"]
    fit = gmred.global_kl_fit(g, 4, restarts=1)
    assert fit["kl"] <= gmred.kl_numeric(g, greedy)
    assert fit["kl"] <= 5e-4


def test_filter_matches_scalar_kalman():
    model = gmred.LinearStateSpaceModel(
        np.eye(1), np.eye(1), np.eye(1),
        gmred.GaussianMixture([normal(1.0, 0.0, 0.5)]),
        gmred.GaussianMixture([normal(1.0, 0.0, 2.0)]),
    )
    ys = np.array([[0.3], [1.2], [-0.4], [2.0], [1.1]])
    prior = gmred.GaussianMixture([normal(1.0, 0.0, 10.0)])
    run = gmred.run_smoother(model, ys, cap=1, prior=prior)

    m, p, ll = 0.0, 10.0, 0.0
    means, pm, pp, fm, fp = [], [], [], [], []
    for y in ys[:, 0]:
        mp, ppred = m, p + 0.5
        s = ppred + 2.0
        ll += -0.5 * (math.log(2 * math.pi * s) + (y - mp) ** 2 / s)
        k = ppred / s
        m, p = mp + k * (y - mp), (1 - k) * ppred
        pm.append(mp); pp.append(ppred); fm.append(m); fp.append(p)
    sm = fm[-1]
    smooth = [sm]
    for n in range(len(ys) - 2, -1, -1):
        j = fp[n] / pp[n + 1]
        sm = fm[n] + j * (sm - pm[n + 1])
        smooth.append(sm)
    smooth.reverse()

    assert run["log_likelihood"] == pytest.approx(ll, rel=1e-12)
    np.testing.assert_allclose([v[0] for v in run["filtered_mean"]], fm, rtol=1e-12)
    np.testing.assert_allclose([v[0] for v in run["smoothed_mean"]], smooth, rtol=1e-9, atol=1e-12)


def test_trend_model_on_levelshift():
    model = gmred.trend_model(0.000254, 1.189, 0.989, 1.027)
    ys = gmred.levelshift_series()[:120].reshape(-1, 1)
    r2 = gmred.run_filter(model, ys, cap=2)
    r8 = gmred.run_filter(model, ys, cap=8)
    assert len(r8["filtered"]) == 120
    assert max(m.order for m in r8["filtered"]) <= 8
    assert r8["log_likelihood"] >= r2["log_likelihood"] - 1e-6
