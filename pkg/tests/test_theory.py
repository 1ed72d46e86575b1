"""Schedule algebra, derived constants, and the four runtime certificates."""

import math

import numpy as np
import pytest

from optlab import (
    HyperParams,
    InvalidBeta2,
    InvalidRegime,
    LowerBoundSpec,
    NoSecondDerivative,
    NoiseSpec,
    RadiusExceeded,
    Rng,
    SmoothnessSpec,
    SpecViolation,
    WrongMethod,
    check_descent_lemma,
    check_gd_divergence,
    check_second_order,
    check_update_bound,
    compute_theory_constants,
    gd_lower_bound_iterations,
    init_state,
    make_exp_separable,
    make_lower_bound_case1,
    make_lower_bound_case2,
    make_quadratic,
    momentum_gap,
    run_optimizer,
    theoretical_hyperparams,
)

CANON = LowerBoundSpec(L0=1.0, L1=1.0, M=math.exp(2.0), eps=0.1)


def sign_hp(eta, beta1, beta2=0.0, **kw):
    return HyperParams(method="generalized_signsgd", eta=eta, beta1=beta1, beta2=beta2, **kw)


# ---------------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------------


def test_schedule_noise_dominated_example():
    """||L0||_1 = 1, ||sigma||_1 = 10, Delta = 1, T = 100:
    alpha = 1/100, beta1 = 0.99, eta = 0.01."""
    s = theoretical_hyperparams(
        Delta=1.0,
        smoothness=SmoothnessSpec(L0=[1.0], L1=[0.0]),
        noise=NoiseSpec([10.0]),
        T=100,
        beta2=0.0,
    )
    assert s.alpha == 0.01
    assert s.beta1 == 0.99
    assert s.eta == 0.01
    assert s.rho == 1.0
    assert s.T_condition_met
    assert s.T == 100 and s.Delta == 1.0 and s.beta2 == 0.0


def test_schedule_identities_hold_over_random_configs():
    rng = Rng(11)
    for _ in range(200):
        Delta = 0.5 + 4.0 * rng.next_uniform()
        l0 = [0.5 + rng.next_uniform(), 0.5 + rng.next_uniform()]
        sigma = [2.0 * rng.next_uniform(), 2.0 * rng.next_uniform()]
        T = 1 + int(1e5 * rng.next_uniform())
        s = theoretical_hyperparams(
            Delta=Delta,
            smoothness=SmoothnessSpec(L0=l0, L1=[0.0, 0.0]),
            noise=NoiseSpec(sigma),
            T=T,
            beta2=0.0,
        )
        l0_sum = sum(l0)
        alpha_ref = min(math.sqrt(l0_sum * Delta) / (sum(sigma) * math.sqrt(T)), 1.0)
        assert abs(s.alpha - alpha_ref) <= 1e-12 * alpha_ref
        assert s.beta1 == 1.0 - s.alpha
        lhs = s.eta * math.sqrt(T) * math.sqrt(l0_sum)
        np.testing.assert_allclose(lhs, math.sqrt(Delta * s.alpha), rtol=1e-12)
        assert 0.0 < s.alpha <= 1.0


def test_schedule_hits_the_deterministic_boundary_exactly():
    """sqrt(4 * 1) / (1 * sqrt(4)) = 1: alpha caps at one and beta1 = 0."""
    smooth = SmoothnessSpec(L0=[4.0], L1=[0.0])
    s = theoretical_hyperparams(
        Delta=1.0, smoothness=smooth, noise=NoiseSpec([1.0]), T=4, beta2=0.0
    )
    assert s.alpha == 1.0
    assert s.beta1 == 0.0
    assert s.eta == 0.25
    assert s.rho == 1.0
    # A hair more noise and the cap is no longer active.
    s2 = theoretical_hyperparams(
        Delta=1.0, smoothness=smooth, noise=NoiseSpec([1.0000001]), T=4, beta2=0.0
    )
    assert s2.alpha == 0.9999999000000099


def test_schedule_zero_noise_is_the_deterministic_regime():
    s = theoretical_hyperparams(
        Delta=2.0,
        smoothness=SmoothnessSpec(L0=[1.0, 1.0], L1=[0.0, 0.0]),
        noise=NoiseSpec([0.0, 0.0]),
        T=50,
        beta2=0.0,
    )
    assert s.alpha == 1.0
    assert s.beta1 == 0.0


def test_schedule_beta2_must_vanish_when_alpha_caps():
    with pytest.raises(InvalidBeta2):
        theoretical_hyperparams(
            Delta=1.0,
            smoothness=SmoothnessSpec(L0=[4.0], L1=[0.0]),
            noise=NoiseSpec([0.0]),
            T=4,
            beta2=0.1,
        )


def test_schedule_beta2_must_stay_below_beta1_squared():
    # alpha = 0.01 gives beta1 = 0.99; sqrt(0.99) > 0.99 fails the regime.
    with pytest.raises(InvalidBeta2):
        theoretical_hyperparams(
            Delta=1.0,
            smoothness=SmoothnessSpec(L0=[1.0], L1=[0.0]),
            noise=NoiseSpec([10.0]),
            T=100,
            beta2=0.99,
        )


def test_schedule_input_validation():
    smooth = SmoothnessSpec(L0=[1.0], L1=[0.0])
    noise = NoiseSpec([1.0])
    with pytest.raises(ValueError):
        theoretical_hyperparams(Delta=0.0, smoothness=smooth, noise=noise, T=10, beta2=0.0)
    with pytest.raises(ValueError):
        theoretical_hyperparams(Delta=1.0, smoothness=smooth, noise=noise, T=0, beta2=0.0)
    with pytest.raises(ValueError):
        theoretical_hyperparams(Delta=1.0, smoothness=smooth, noise=noise, T=10, beta2=1.0)
    with pytest.raises(ValueError):
        theoretical_hyperparams(
            Delta=1.0,
            smoothness=SmoothnessSpec(L0=[0.0], L1=[0.0]),
            noise=noise,
            T=10,
            beta2=0.0,
        )


def test_schedule_step_budget_condition():
    """With L1 = 0 the burn-in condition is vacuous; with L1 > 0 it kicks in
    at the documented threshold (here the noise term dominates at 10^4)."""
    smooth = SmoothnessSpec(L0=[1.0], L1=[1.0])
    noise = NoiseSpec([1.0])
    low = theoretical_hyperparams(Delta=1.0, smoothness=smooth, noise=noise, T=100, beta2=0.0)
    assert not low.T_condition_met
    high = theoretical_hyperparams(Delta=1.0, smoothness=smooth, noise=noise, T=10000, beta2=0.0)
    assert high.T_condition_met


# ---------------------------------------------------------------------------
# derived constants
# ---------------------------------------------------------------------------


def unit_config():
    return (
        sign_hp(eta=0.01, beta1=0.9),
        SmoothnessSpec(L0=[1.0], L1=[1.0]),
        NoiseSpec([1.0]),
        [math.exp(2.0)],
    )


def test_constants_reference_configuration():
    hp, smooth, noise, M = unit_config()
    c = compute_theory_constants(hp, smooth, noise, M, delta_prob=0.01)
    assert c.tau_bar == 100.0
    assert c.rho == 1.0
    assert c.A == 0.1
    np.testing.assert_allclose(c.D, 0.7999999999999999, rtol=1e-12)
    np.testing.assert_allclose(c.E, [57.17012336287638], rtol=1e-12)
    np.testing.assert_allclose(c.B, [5.817235161352971], rtol=1e-12)
    np.testing.assert_allclose(c.C, [1.1], rtol=1e-12)
    assert c.M[0] == math.exp(2.0)
    assert c.epsilon_t is None


def test_constants_flat_curvature_sentinels():
    """L1 = 0: infinite drift horizon, no curvature inflation, and the
    start-magnitude term drops out of B entirely."""
    hp = sign_hp(eta=0.01, beta1=0.9)
    smooth = SmoothnessSpec(L0=[1.0], L1=[0.0])
    noise = NoiseSpec([1.0])
    c_small = compute_theory_constants(hp, smooth, noise, [1.0], delta_prob=0.01)
    c_large = compute_theory_constants(hp, smooth, noise, [1e6], delta_prob=0.01)
    assert c_small.tau_bar == math.inf
    assert c_small.D == 1.0
    assert c_small.C[0] == 1.0
    assert c_small.B[0] == c_large.B[0]


def test_constants_probability_one_noise_floor():
    hp = sign_hp(eta=0.01, beta1=0.6)
    smooth = SmoothnessSpec(L0=[1.0], L1=[0.0])
    c = compute_theory_constants(hp, smooth, NoiseSpec([2.0]), [1.0], delta_prob=1.0)
    expected = 6.0 * 2.0 + 6.0 * 2.0 / math.sqrt(1.0 - 0.6 ** 2)
    np.testing.assert_allclose(c.E, [expected], rtol=1e-15)


def test_constants_regime_guards():
    _, smooth, noise, M = unit_config()
    with pytest.raises(InvalidRegime):
        compute_theory_constants(sign_hp(eta=0.01, beta1=0.0), smooth, noise, M, 0.01)
    with pytest.raises(InvalidRegime):
        compute_theory_constants(sign_hp(eta=0.01, beta1=0.5, beta2=0.25), smooth, noise, M, 0.01)
    with pytest.raises(ValueError):
        compute_theory_constants(sign_hp(eta=0.01, beta1=0.9), smooth, noise, M, 0.0)
    with pytest.raises(ValueError):
        compute_theory_constants(sign_hp(eta=0.01, beta1=0.9), smooth, noise, M, 1.5)


def test_constants_drift_horizon_scales_inversely():
    hp, smooth, noise, M = unit_config()
    base = compute_theory_constants(hp, smooth, noise, M, 0.01)
    double_eta = compute_theory_constants(
        sign_hp(eta=0.02, beta1=0.9), smooth, noise, M, 0.01
    )
    double_l1 = compute_theory_constants(
        hp, SmoothnessSpec(L0=[1.0], L1=[2.0]), noise, M, 0.01
    )
    assert base.tau_bar == 2.0 * double_eta.tau_bar
    assert base.tau_bar == 2.0 * double_l1.tau_bar


def test_scheduled_runs_keep_the_damping_constant_above_half():
    """Whenever the step budget clears the burn-in condition, the derived
    damping factor D stays >= 1/2."""
    rng = Rng(23)
    met = 0
    for _ in range(300):
        Delta = 0.5 + 3.0 * rng.next_uniform()
        l0 = [0.5 + rng.next_uniform(), 0.5 + rng.next_uniform()]
        l1_max = 0.02 + 0.3 * rng.next_uniform()
        sigma = [0.5 + rng.next_uniform(), 0.5 + rng.next_uniform()]
        T = int(10 ** (3.0 + 3.0 * rng.next_uniform()))
        smooth = SmoothnessSpec(L0=l0, L1=[l1_max, 0.5 * l1_max])
        noise = NoiseSpec(sigma)
        s = theoretical_hyperparams(
            Delta=Delta, smoothness=smooth, noise=noise, T=T, beta2=0.0
        )
        if not s.T_condition_met or s.beta1 == 0.0:
            continue
        met += 1
        hp = sign_hp(eta=s.eta, beta1=s.beta1, beta2=0.0)
        c = compute_theory_constants(hp, smooth, noise, [1.0, 1.0], 0.01)
        assert c.D >= 0.5 - 1e-9
    assert met >= 50


def test_momentum_gap_is_minus_gradient_at_start():
    p = make_quadratic([2.0], np.zeros(1))
    gap = momentum_gap(p, init_state([3.0]))
    np.testing.assert_array_equal(gap, [-6.0])


# ---------------------------------------------------------------------------
# gradient-descent iteration floor
# ---------------------------------------------------------------------------


def test_gd_iteration_floor_reference_value():
    """L0 = L1 = 1, M = e^2, eps = 0.1, unit gap: the floor evaluates to
    M (gap - 15 eps^2 / 16) / (2 eps^2 * 3)."""
    bound = gd_lower_bound_iterations(CANON, 1.0)
    np.testing.assert_allclose(bound, 121.99639496671956, rtol=1e-12)


def test_gd_iteration_floor_vanishes_at_threshold_gap():
    threshold = 15.0 * CANON.eps ** 2 / (16.0 * CANON.L0)
    assert gd_lower_bound_iterations(CANON, threshold) == 0.0
    with pytest.raises(SpecViolation):
        gd_lower_bound_iterations(CANON, threshold * (1.0 - 1e-12))


def test_gd_iteration_floor_grows_with_gradient_ceiling():
    wider = LowerBoundSpec(L0=1.0, L1=1.0, M=2.0 * math.exp(2.0), eps=0.1)
    assert gd_lower_bound_iterations(wider, 1.0) > gd_lower_bound_iterations(CANON, 1.0)


# ---------------------------------------------------------------------------
# descent inequality
# ---------------------------------------------------------------------------


def test_descent_identical_points_trivially_satisfied():
    p = make_quadratic([2.0], np.zeros(1))
    rep = check_descent_lemma(p, [1.0], [1.0])
    assert rep.satisfied
    assert rep.margin == 0.0
    assert rep.lhs == rep.rhs


def test_descent_quadratic_is_tight():
    """d = 1 quadratic: the penalty equals the Taylor remainder, so the
    inequality holds with zero margin."""
    p = make_quadratic([2.0], np.zeros(1))
    rep = check_descent_lemma(p, [1.0], [1.3])
    assert rep.satisfied
    np.testing.assert_allclose(rep.margin, 0.0, atol=1e-12)
    np.testing.assert_allclose(rep.lhs, p.value(np.array([1.3])), rtol=1e-15)


def test_descent_quadratic_off_axis_margin_is_nonnegative():
    p = make_quadratic([1.0, 4.0], np.zeros(2))
    rep = check_descent_lemma(p, [1.0, -0.5], [0.4, 0.1])
    assert rep.satisfied
    assert rep.margin >= -1e-12


def test_descent_exponential_holds_throughout_the_trust_region():
    """1000 random pairs within the trust radius of a 3-d exponential: the
    declared constants certify every one."""
    p = make_exp_separable([1.0, 2.0, 3.0], np.zeros(3))
    radius = 1.0 / float(np.max(p.smoothness.L1))
    rng = Rng(77)
    for _ in range(1000):
        x = 2.0 * rng.uniforms(3) - 1.0
        direction = 2.0 * rng.uniforms(3) - 1.0
        d_norm = math.sqrt(float(np.dot(direction, direction)))
        if d_norm == 0.0:
            continue
        # Shrink slightly so rounding cannot push the pair past the radius.
        scale = 0.99 * radius * rng.next_uniform() / d_norm
        rep = check_descent_lemma(p, x, x + scale * direction)
        assert rep.satisfied


def test_descent_rejects_pairs_outside_the_trust_region():
    p = make_exp_separable([1.0], np.zeros(1))
    radius = 1.0 / float(p.smoothness.L1[0])
    with pytest.raises(RadiusExceeded):
        check_descent_lemma(p, [0.0], [1.01 * radius])
    # Flat problems have no radius at all.
    q = make_quadratic([1.0], np.zeros(1))
    rep = check_descent_lemma(q, [0.0], [1e6])
    assert rep.satisfied


# ---------------------------------------------------------------------------
# update bound
# ---------------------------------------------------------------------------


def test_update_bound_is_met_with_equality_at_beta2_zero():
    p = make_quadratic([1.0, 2.0], np.ones(2))
    hp = sign_hp(eta=0.01, beta1=0.9)
    traj = run_optimizer(p, [1.0, -1.0], hp, T=200, seed=5, noise_on=True)
    assert check_update_bound(traj, hp) == 1.0


def test_update_bound_holds_under_second_moment_smoothing():
    p = make_quadratic([1.0, 2.0], np.ones(2))
    hp = sign_hp(eta=0.01, beta1=0.9, beta2=0.5)
    traj = run_optimizer(p, [1.0, -1.0], hp, T=500, seed=6, noise_on=True)
    ratio = check_update_bound(traj, hp)
    assert ratio <= 1.0 + 1e-12
    assert ratio > 0.5


def test_update_bound_rejects_other_methods():
    p = make_quadratic([1.0], np.ones(1))
    adam = HyperParams(method="adam", eta=0.001)
    traj = run_optimizer(p, [1.0], adam, T=5, seed=0, noise_on=False)
    with pytest.raises(WrongMethod):
        check_update_bound(traj, adam)

    grad_hp = sign_hp(eta=0.01, beta1=0.9, second_moment_source="gradient")
    traj2 = run_optimizer(p, [1.0], grad_hp, T=5, seed=0, noise_on=False)
    with pytest.raises(WrongMethod):
        check_update_bound(traj2, grad_hp)
    # Mismatched pairing is rejected even when hp alone would qualify.
    with pytest.raises(WrongMethod):
        check_update_bound(traj2, sign_hp(eta=0.01, beta1=0.9))


# ---------------------------------------------------------------------------
# second-order certificate
# ---------------------------------------------------------------------------


def test_second_order_certifies_both_hard_constructions():
    grid = np.linspace(-10.0, 10.0, 10001)
    p1 = make_lower_bound_case1(CANON)
    assert check_second_order(p1, grid) <= 1e-9
    p2 = make_lower_bound_case2(CANON)
    assert check_second_order(p2, grid) <= 1e-12


def test_second_order_quadratic_sits_on_the_boundary():
    p = make_quadratic([3.0], np.zeros(1))
    assert check_second_order(p, np.linspace(-5.0, 5.0, 101)) == 0.0


def test_second_order_needs_a_scalar_oracle():
    p = make_quadratic([1.0, 1.0], np.zeros(2))
    with pytest.raises(NoSecondDerivative):
        check_second_order(p, [0.0])


# ---------------------------------------------------------------------------
# divergence certificate
# ---------------------------------------------------------------------------


def test_divergence_certified_above_threshold():
    rep = check_gd_divergence(CANON, eta=0.9, steps=100)
    assert rep.certified
    assert rep.steps_checked == 100
    assert rep.failed_at is None
    assert len(rep.trail) == 101
    signs = [entry[0] for entry in rep.trail]
    assert signs == [(-1.0) ** k for k in range(101)]


def test_divergence_trail_matches_float64_while_representable():
    """The first four iterates fit in float64; an independent replay of
    plain gradient descent pins the tracked magnitudes to them."""
    p = make_lower_bound_case1(CANON)
    x = np.array([3.0])
    ref = [3.0]
    with np.errstate(over="ignore"):
        for _ in range(4):
            x = x - 0.9 * p.gradient(x)
            ref.append(float(x[0]))
    assert math.isinf(ref[4])

    rep = check_gd_divergence(CANON, eta=0.9, steps=10)
    for k in range(4):
        sign, level, r = rep.trail[k]
        assert level == 0
        np.testing.assert_allclose(r, abs(ref[k]), rtol=1e-13)
        assert sign == math.copysign(1.0, ref[k])
    assert rep.trail[4][1] >= 1


def test_divergence_threshold_is_sharp():
    eta_star = make_lower_bound_case1(CANON).metadata["eta_star"]
    np.testing.assert_allclose(eta_star, 6.0 / math.exp(2.0), rtol=1e-15)
    below = check_gd_divergence(CANON, eta=eta_star * (1.0 - 1e-9), steps=5)
    assert not below.certified
    assert below.failed_at == 1
    assert below.steps_checked == 0
    above = check_gd_divergence(CANON, eta=eta_star * (1.0 + 1e-9), steps=5)
    assert above.certified


def test_divergence_survives_a_thousand_steps():
    rep = check_gd_divergence(CANON, eta=0.9, steps=1000)
    assert rep.certified
    levels = [entry[1] for entry in rep.trail]
    assert levels == sorted(levels)
    assert levels[-1] >= 990


def test_divergence_input_validation():
    with pytest.raises(ValueError):
        check_gd_divergence(CANON, eta=0.0)
    with pytest.raises(ValueError):
        check_gd_divergence(CANON, eta=0.9, steps=0)
