import json
import math

import numpy as np
import pytest

import lkmdp


def test_presets_build_and_validate():
    names = [name for name, _ in lkmdp.list_presets()]
    assert "hard-d4" in names
    for name in names:
        env = lkmdp.make_preset(name, 1000)
        assert env.validate()["ok"], name


def test_hard_closed_form_matches_value_iteration():
    env = lkmdp.make_hard_env(4, 0.1, 0.05, 0.9, [1, 1, -1])
    v, q = lkmdp.optimal_values(env)
    v0, v1 = lkmdp.hard_mdp_closed_form(0.9, 0.1, 0.05)
    assert v[0] == pytest.approx(v0, abs=1e-9)
    assert v[1] == pytest.approx(v1, abs=1e-9)
    assert v0 == pytest.approx(4.153846, abs=1e-6)
    assert q.shape == (2, 8)


def test_tabular_env_from_numpy():
    P = [[np.array([0.9, 0.1]), np.array([0.2, 0.8])], [np.array([0.5, 0.5]), np.array([0.0, 1.0])]]
    r = np.array([[1.0, 0.0], [0.5, 0.2]])
    env = lkmdp.make_tabular_env(P, r, 0.5)
    assert env.dim == 8
    assert np.allclose(env.transition(0, 1), [0.2, 0.8])
    v = lkmdp.policy_value(env, [0, 0])
    assert v.shape == (2,)
    with pytest.raises(ValueError):
        lkmdp.make_tabular_env(P, r, 1.0)


def test_ridge_design_matches_numpy():
    rng = np.random.default_rng(0)
    design = lkmdp.RidgeDesign(3, 2.0)
    X = rng.normal(size=(20, 3))
    y = rng.normal(size=20)
    for x, t in zip(X, y):
        design.update(x, t)
    expected = np.linalg.solve(2.0 * np.eye(3) + X.T @ X, X.T @ y)
    assert np.allclose(design.theta_hat(), expected, atol=1e-10)
    assert design.log_det == pytest.approx(np.linalg.slogdet(design.sigma)[1], abs=1e-10)


def test_run_uclk_returns_consistent_trace():
    env = lkmdp.make_preset("tabular-2s", 500)
    out = lkmdp.run_uclk(env, 500, seed=3)
    assert len(out["states"]) == 500
    assert out["epoch_starts"][0] == 1
    assert len(out["epoch_starts"]) <= lkmdp.epoch_bound(env.dim, 1.0, 500, env.gamma)
    assert np.allclose(np.cumsum(out["delta"]), out["cum_regret"])
    assert out["beta"] == pytest.approx(lkmdp.beta_radius(1.0, env.dim, env.gamma, 500, 0.05))


def test_mc_phi_v_constant_value_is_exact():
    env = lkmdp.make_preset("product-20", 100)
    V = np.full(env.n_states, 3.0)
    est = lkmdp.mc_phi_v(env, V, 0, 1, 10, seed=1)
    assert np.allclose(est, env.phi_v(V, 0, 1), atol=1e-12)
    with pytest.raises(NotImplementedError):
        lkmdp.mc_phi_v(lkmdp.make_preset("tabular-2s"), np.ones(2), 0, 0, 10)


def test_helpers():
    assert lkmdp.sc_to_regret(1, 2, 0.0, 64) == pytest.approx(16.0)
    pts = [(t, 2 * math.sqrt(t)) for t in (10.0, 100.0, 1000.0)]
    assert lkmdp.loglog_slope(pts) == pytest.approx(0.5)
    assert lkmdp.u_rounds(0.5, 100) >= 1


def test_config_round_trip_and_errors():
    text = lkmdp.normalize_config(json.dumps({"env": "hard-d4", "T": 50}))
    assert json.loads(text)["lambda"] == 1.0
    with pytest.raises(ValueError):
        lkmdp.normalize_config(json.dumps({"env": "hard-d4", "T": 50, "bogus": 1}))


def test_run_experiment_writes_outputs(tmp_path):
    cfg = {"env": "chain-1s", "T": 30, "seeds": [0, 1], "out": str(tmp_path / "out")}
    assert lkmdp.run_experiment(json.dumps(cfg)) == 0
    summary = (tmp_path / "out" / "summary.csv").read_text()
    assert "# generated" not in summary
    assert summary.count("\n") >= 4
