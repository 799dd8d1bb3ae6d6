import numpy as np
import pytest

import stereorect.optimizer as opt
from stereorect.errors import InsufficientInliers
from stereorect.metrics import CorrespondenceSet, full_report
from stereorect.model import RectParams, RigDims, homography_pair
from stereorect.optimizer import (
    InnerResult,
    SolverConfig,
    Thresholds,
    Weights,
    cost,
    cost_from_report,
    normalized_cost,
    solve,
    solve_inner,
    update_weights,
)
from stereorect.synthgen import RigConfig, generate

DIMS = RigDims(1920.0, 1080.0)


def _rectified_noiseless(seed=0, n=60):
    c, _ = generate(RigConfig(dims=DIMS, n_points=n, seed=seed))
    return c


def _ideal_report(c):
    return full_report(np.eye(3), np.eye(3), c)


def _report_with(c, **overrides):
    base = _ideal_report(c).to_dict()
    base.update(overrides)
    fields = {k: base.get(k, 0.0) for k in (
        "e_s", "e_v",
        "e_o_left", "e_o_right", "e_a_left", "e_a_right",
        "e_ar_left", "e_ar_right", "e_sk_left", "e_sk_right",
        "e_r_left", "e_r_right", "e_sr_left", "e_sr_right",
    )}
    from stereorect.metrics import DistortionReport

    return DistortionReport(**fields)


# ------------------------------------------------------------------ cost


def test_cost_all_weights_zero_is_sampson_error():
    c, _ = generate(RigConfig(dims=DIMS, distortion="z_rot", magnitude=10.0,
                              noise_sigma=0.4, seed=3))
    params = RectParams(theta_zr=0.05)
    h_left, h_right = homography_pair(params, DIMS)
    rep = full_report(h_left, h_right, c)
    assert cost(params, c, Weights.zero()) == pytest.approx(rep.e_s, rel=1e-12)


def test_cost_zero_params_on_rectified_data_is_zero():
    c = _rectified_noiseless()
    for w in (Weights.zero(), Weights(0.25, 0.25, 0.25, 0.25)):
        assert cost(RectParams.zero(), c, w) == pytest.approx(0.0, abs=1e-12)


def test_cost_hand_built_skew_case():
    c = _rectified_noiseless()
    rep = _report_with(c, e_s=0.4, e_sk_left=6.5, e_sk_right=6.5)
    w = Weights(rho_sk=0.25)
    assert cost_from_report(rep, w) == pytest.approx(0.4 + (0.25 / 6.5) * 6.5, abs=1e-12)


def test_normalized_cost_examples():
    all_on = Weights(0.25, 0.25, 0.25, 0.25)
    assert normalized_cost(1.0, all_on) == pytest.approx(0.5)
    assert normalized_cost(0.37, Weights.zero()) == pytest.approx(0.37)
    assert normalized_cost(0.75, Weights(rho_ar=0.25, rho_sk=0.25)) == pytest.approx(0.5)


def test_weights_validation_and_helpers():
    with pytest.raises(ValueError):
        Weights(rho_ar=0.1)
    w = Weights(rho_ar=0.25, rho_r=0.25)
    assert w.active() == ("ar", "r")
    assert w.switch_sum() == pytest.approx(0.5)
    assert w.effective("ar") == pytest.approx(0.25 / 1.5)
    assert w.effective("r") == pytest.approx(0.25 / 18.5)


# ------------------------------------------------------------- weights


def test_update_weights_ideal_report_all_off():
    c = _rectified_noiseless()
    w = update_weights(_ideal_report(c), Thresholds())
    assert w.all_zero()


def test_update_weights_skew_violation():
    c = _rectified_noiseless()
    rep = _report_with(c, e_sk_left=6.0, e_sk_right=6.0)
    w = update_weights(rep, Thresholds())
    assert w == Weights(rho_sk=0.25)


def test_update_weights_aspect_ratio_two_sided():
    c = _rectified_noiseless()
    rep_low = _report_with(c, e_ar_left=0.7, e_ar_right=0.7)
    assert update_weights(rep_low, Thresholds()) == Weights(rho_ar=0.25)
    rep_high = _report_with(c, e_ar_left=1.3, e_ar_right=1.3)
    assert update_weights(rep_high, Thresholds()) == Weights(rho_ar=0.25)
    rep_in = _report_with(c, e_ar_left=1.15, e_ar_right=1.15)
    assert update_weights(rep_in, Thresholds()).all_zero()


# --------------------------------------------------------------- inner


def test_inner_already_rectified_stays_at_zero():
    c = _rectified_noiseless()
    res = solve_inner(c, Weights.zero(), RectParams.zero(), SolverConfig())
    assert res.objective < 1e-12
    assert np.abs(res.params.to_array()).max() < 1e-6


def test_inner_objective_never_increases_and_beats_start():
    rng = np.random.default_rng(17)
    c, _ = generate(RigConfig(dims=DIMS, distortion="compound1", magnitude=1.0,
                              noise_sigma=0.3, seed=5, n_points=120))
    cfg = SolverConfig(max_inner_iters=60)
    for _ in range(20):
        start = RectParams.from_array(rng.uniform(-0.08, 0.08, 9))
        res = solve_inner(c, Weights(rho_sk=0.25, rho_sr=0.25), start, cfg)
        seq = np.array(res.accepted_objectives)
        assert np.all(np.diff(seq) <= 0.0)
        assert res.objective <= res.initial_objective


def test_inner_y_offset_recovery():
    c, _ = generate(RigConfig(dims=DIMS, distortion="y_trans", magnitude=0.1, seed=6))
    res = solve_inner(c, Weights.zero(), RectParams.zero(), SolverConfig())
    h_left, h_right = homography_pair(res.params, DIMS)
    rep = full_report(h_left, h_right, c)
    assert rep.e_v < 1e-6
    # some vertical correction happened: the parameters are not all zero
    assert np.abs(res.params.to_array()).max() > 1e-4


def test_inner_z_rotation_recovery():
    from stereorect.metrics import sampson_error
    from stereorect.model import induced_fundamental

    c, _ = generate(RigConfig(dims=DIMS, distortion="z_rot", magnitude=10.0, seed=8))
    res = solve_inner(c, Weights.zero(), RectParams.zero(), SolverConfig())
    h_left, h_right = homography_pair(res.params, DIMS)
    assert full_report(h_left, h_right, c).e_v < 1e-6
    assert sampson_error(induced_fundamental(res.params, DIMS), c) < 1e-9


def test_inner_zoom_recovery_matches_log_ratio():
    ratio = 1.3
    c, _ = generate(RigConfig(dims=DIMS, distortion="zoom", magnitude=ratio, seed=7))
    res = solve_inner(c, Weights.zero(), RectParams.zero(), SolverConfig())
    recovered = res.params.delta_fr - res.params.delta_fl
    expected = np.log(ratio) / np.log(3.0)
    assert recovered == pytest.approx(expected, abs=1e-3)
    h_left, h_right = homography_pair(res.params, DIMS)
    assert full_report(h_left, h_right, c).e_v < 1e-6


def test_inner_requires_eight_pairs():
    c = _rectified_noiseless()
    small = CorrespondenceSet(DIMS, c.pairs[:7])
    with pytest.raises(InsufficientInliers):
        solve_inner(small, Weights.zero(), RectParams.zero(), SolverConfig())


def test_directional_derivative_consistency():
    # same secant, two assembly paths: the closed-form cost against the
    # cost rebuilt from the solver's residual vector
    from stereorect.optimizer import cost_from_residuals

    c, _ = generate(RigConfig(dims=DIMS, distortion="compound2", magnitude=1.0,
                              noise_sigma=0.3, seed=9, n_points=120))
    w = Weights(0.25, 0.25, 0.25, 0.25)
    rng = np.random.default_rng(23)
    step = 1e-4
    for _ in range(10):
        x = rng.uniform(-0.05, 0.05, 9)
        direct_base = cost(RectParams.from_array(x), c, w)
        packed_base = cost_from_residuals(RectParams.from_array(x), c, w)
        for i in range(9):
            xs = x.copy(); xs[i] += step
            secant = (cost(RectParams.from_array(xs), c, w) - direct_base) / step
            grad = (cost_from_residuals(RectParams.from_array(xs), c, w) - packed_base) / step
            assert secant == pytest.approx(grad, rel=1e-3, abs=1e-9)


# --------------------------------------------------------------- outer


def test_usr_mode_is_step_one_result():
    c, _ = generate(RigConfig(dims=DIMS, distortion="z_rot", magnitude=10.0,
                              noise_sigma=0.3, seed=11, n_points=120))
    res = solve(c, SolverConfig(mode="usr"))
    inner = solve_inner(c, Weights.zero(), RectParams.zero(), SolverConfig(mode="usr"))
    assert np.array_equal(res.params.to_array(), inner.params.to_array())
    assert res.trace.termination == "usr_mode"
    assert len(res.trace.rounds) == 1
    assert res.trace.rounds[0].weights.all_zero()


def test_usr_mode_invariant_to_thresholds():
    c, _ = generate(RigConfig(dims=DIMS, distortion="y_rot", magnitude=10.0,
                              noise_sigma=0.3, seed=12, n_points=120))
    loose = SolverConfig(mode="usr")
    tight = SolverConfig(mode="usr", thresholds=Thresholds(0.99, 1.01, 0.01, 0.99, 1.01, 0.01))
    a = solve(c, loose)
    b = solve(c, tight)
    assert np.array_equal(a.params.to_array(), b.params.to_array())


def test_outer_trace_contract_on_real_case():
    c, _ = generate(RigConfig(dims=DIMS, distortion="compound2", magnitude=1.0,
                              noise_sigma=0.3, seed=13))
    res = solve(c, SolverConfig(mode="usr-cgd"))
    rounds = res.trace.rounds
    assert len(rounds) >= 1
    assert rounds[0].index == 0 and rounds[0].weights.all_zero()
    # returned parameters are exactly the last recorded round's
    assert np.array_equal(res.params.to_array(), rounds[-1].params.to_array())
    # normalized cost strictly decreases across accepted weighted rounds
    weighted = [r.cost_normalized for r in rounds if r.index >= 1]
    assert all(b < a for a, b in zip(weighted, weighted[1:]))


def test_outer_penultimate_rule_scripted(monkeypatch):
    c = _rectified_noiseless(n=30)
    scripted_params = [RectParams(theta_zl=0.001 * k) for k in range(5)]
    inner_calls = {"n": 0}

    def fake_inner(corr, weights, init, cfg):
        p = scripted_params[inner_calls["n"]]
        inner_calls["n"] += 1
        return InnerResult(p, 1.0, 2.0, (2.0, 1.0), 3, "step")

    # one weight permanently on so the loop never exits via within_bands
    def fake_update(report, thresholds):
        return Weights(rho_sk=0.25)

    # normalized costs per round: r0 -> 1.0, r1 -> 0.8, r2 -> 0.7, r3 -> 0.71 (stop)
    scripted_costs = iter([1.0, 0.8 * 1.25, 0.7 * 1.25, 0.71 * 1.25])

    def fake_cost(report, weights):
        return next(scripted_costs)

    monkeypatch.setattr(opt, "solve_inner", fake_inner)
    monkeypatch.setattr(opt, "update_weights", fake_update)
    monkeypatch.setattr(opt, "cost_from_report", fake_cost)

    res = opt.solve(c, SolverConfig(mode="usr-cgd", max_outer_iters=10))
    assert res.trace.termination == "cost_non_decrease"
    # round 3 was rejected; the round-2 (penultimate attempted) params win
    assert np.array_equal(res.params.to_array(), scripted_params[2].to_array())
    assert [r.index for r in res.trace.rounds] == [0, 1, 2]
    assert np.array_equal(res.trace.rounds[-1].params.to_array(), res.params.to_array())


def test_outer_terminates_within_bands_when_geometry_recovers():
    c, _ = generate(RigConfig(dims=DIMS, distortion="compound2", magnitude=1.0,
                              noise_sigma=0.3, seed=0))
    res = solve(c, SolverConfig(mode="usr-cgd"))
    if res.trace.termination == "within_bands" and len(res.trace.rounds) > 1:
        rep = res.trace.rounds[-1].report
        th = Thresholds()
        assert rep.e_sk <= th.sk_max
        assert th.ar_low <= rep.e_ar <= th.ar_high
        assert th.sv_low <= rep.e_sr <= th.sv_high
        assert abs(rep.e_r) <= th.r_max


def test_solver_config_validation_and_from_dict():
    with pytest.raises(ValueError):
        SolverConfig(mode="bogus")
    with pytest.raises(ValueError):
        SolverConfig(gradient_tol=0.0)
    cfg = SolverConfig.from_dict(
        {"mode": "usr", "max_outer_iters": 4, "thresholds": {"sk_max": 7.0}, "junk": 1}
    )
    assert cfg.mode == "usr"
    assert cfg.max_outer_iters == 4
    assert cfg.thresholds.sk_max == 7.0
