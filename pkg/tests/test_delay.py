import math

import numpy as np
import pytest

from wnc import (Additive, ArrivalSpec, Comonotonic,
                 MarkovAdditive, MarkovKernel, NumericFailure, Rayleigh,
                 UnstableSystemError, ValidationError, backlog_tail,
                 capacity_marginal, chebyshev_transient,
                 delay_constrained_capacity, delay_tail_additive,
                 delay_tail_comonotonic, delay_tail_markov, lundberg_root,
                 stability_margin)
from wnc.delay import cramer_prefactors, delay_tail_markov_detail
from wnc.distributions import DiscreteDistribution
from wnc.simulate import SimConfig, empirical_delay_tails

from conftest import lundberg_theta_oracle


def test_stability_margin_cases(two_point, ge_kernel):
    proc = Additive(two_point)
    assert stability_margin(proc, ArrivalSpec(1.0)) == pytest.approx(0.0)
    pm = Additive(DiscreteDistribution.point_mass(2.0))
    assert stability_margin(pm, ArrivalSpec(1.0)) == pytest.approx(1.0)
    mproc = MarkovAdditive(ge_kernel)
    assert stability_margin(mproc, ArrivalSpec(1.0)) == pytest.approx(
        1.0 / 3.0, abs=1e-12)


def test_lundberg_root_cubic_oracle(two_point):
    # kappa(th) = 0 reduces to (u-1)(u^3-u^2-u-1) = 0 with u = e^{th/2}
    sol = lundberg_root(Additive(two_point), ArrivalSpec(0.5))
    lo, hi = 1.0, 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid ** 3 - mid ** 2 - mid - 1 < 0:
            lo = mid
        else:
            hi = mid
    theta_oracle = 2.0 * math.log(0.5 * (lo + hi))
    assert sol.theta_star == pytest.approx(theta_oracle, abs=1e-8)
    assert abs(sol.kappa_residual) < 1e-9
    assert sol.stable


def test_lundberg_offset_multiplier_substitution(two_point):
    # doubling the multiplier at half the rate reproduces the increment law
    base = lundberg_root(Additive(two_point), ArrivalSpec(0.5))
    doubled = lundberg_root(Additive(two_point), ArrivalSpec(0.25),
                            offset_multiplier=2.0)
    assert doubled.theta_star == pytest.approx(base.theta_star, abs=1e-12)


def test_lundberg_root_monotone_and_boundary(two_point):
    proc = Additive(two_point)
    roots = [lundberg_root(proc, ArrivalSpec(lam)).theta_star
             for lam in (0.2, 0.4, 0.6, 0.8, 0.95)]
    assert all(a > b for a, b in zip(roots, roots[1:]))
    assert roots[-1] < 0.2      # theta* -> 0 at the stability boundary
    with pytest.raises(UnstableSystemError):
        lundberg_root(proc, ArrivalSpec(1.0))
    with pytest.raises(NumericFailure):
        lundberg_root(Additive(DiscreteDistribution.point_mass(2.0)),
                      ArrivalSpec(1.0))


def test_lundberg_root_general_law_oracle():
    law = DiscreteDistribution(np.array([0.0, 1.0, 3.0]),
                               np.array([0.3, 0.4, 0.3]))
    for lam in (0.5, 0.9):
        sol = lundberg_root(Additive(law), ArrivalSpec(lam))
        oracle = lundberg_theta_oracle(law.support, law.mass, lam)
        assert sol.theta_star == pytest.approx(oracle, abs=1e-8)


def test_cramer_prefactors_two_point(two_point):
    theta = lundberg_root(Additive(two_point), ArrivalSpec(0.5)).theta_star
    law = two_point.affine(shift=0.5, scale=-1.0)
    c_minus, c_plus = cramer_prefactors(law, theta)
    # lattice walk is skip-free upward: C+ = 1 exactly
    assert c_plus == pytest.approx(1.0, abs=1e-12)
    assert c_minus == pytest.approx(math.exp(-0.5 * theta), abs=1e-12)
    assert c_minus <= c_plus


def test_delay_tail_deterministic_channel():
    proc = Additive(DiscreteDistribution.point_mass(2.0))
    lo, up = delay_tail_additive(proc, ArrivalSpec(1.5), 3.0)
    assert lo.value == up.value == 0.0
    lo0, up0 = delay_tail_additive(proc, ArrivalSpec(1.5), 0.0)
    assert lo0.value == up0.value == 1.0


def test_delay_tail_unstable_is_vacuous(two_point):
    lo, up = delay_tail_additive(Additive(two_point), ArrivalSpec(1.0), 5.0)
    assert lo.value == up.value == 1.0
    assert "unstable" in up.notes


def test_delay_upper_log_linear_in_d(two_point):
    proc = Additive(two_point)
    arrival = ArrivalSpec(0.5)
    ds = np.arange(1.0, 11.0)
    ups = np.array([delay_tail_additive(proc, arrival, d)[1].value for d in ds])
    theta = lundberg_root(proc, arrival).theta_star
    logs = np.log(ups)
    slope, intercept = np.polyfit(ds, logs, 1)
    resid = float(np.max(np.abs(logs - (slope * ds + intercept))))
    assert resid < 1e-9
    assert slope == pytest.approx(-theta * arrival.lam, abs=1e-9)
    assert np.all(np.diff(ups) < 0)


def test_delay_markov_single_state_equals_additive(two_point):
    kernel = MarkovKernel.from_destination_laws(("s",), np.array([[1.0]]),
                                                [two_point])
    arrival = ArrivalSpec(0.5)
    for d in (1.0, 5.0, 10.0):
        alo, aup = delay_tail_additive(Additive(two_point), arrival, d)
        mlo, mup = delay_tail_markov(MarkovAdditive(kernel), arrival, d)
        assert mlo.value == pytest.approx(alo.value, abs=1e-12)
        assert mup.value == pytest.approx(aup.value, abs=1e-12)


def test_delay_markov_structure(ge_kernel):
    proc = MarkovAdditive(ge_kernel)
    arrival = ArrivalSpec(1.0)
    detail = delay_tail_markov_detail(proc, arrival, 0.0)
    assert detail.upper.value <= 1.0
    assert detail.lower.value <= detail.upper.value
    det10 = delay_tail_markov_detail(proc, arrival, 10.0)
    # good state strictly better off than bad state
    assert det10.per_state["G"][1].value < det10.per_state["B"][1].value
    # improved prefactors tighten the basic eigenvector pair
    assert det10.upper.value <= det10.basic_upper.value + 1e-15
    # stationary bounds are the pi-mixture of the per-state bounds
    pi = ge_kernel.stationary
    mix_up = sum(p * det10.per_state[s][1].value
                 for p, s in zip(pi, ge_kernel.states))
    assert det10.upper.value == pytest.approx(mix_up, abs=1e-12)


def test_delay_markov_quick_sandwich(ge_kernel):
    proc = MarkovAdditive(ge_kernel)
    arrival = ArrivalSpec(1.0)
    cfg = SimConfig(seed=23, runs=150_000, horizon=600)
    for init in ("G", "B"):
        ests = empirical_delay_tails(proc, arrival, [5.0, 20.0], cfg,
                                     initial_state=init)
        for d, est in zip((5.0, 20.0), ests):
            lo, up = delay_tail_markov(proc, arrival, d, initial_state=init)
            assert lo.value - 3 * est.stderr <= est.point <= up.value + 3 * est.stderr


def test_full_transition_kernel_sandwich():
    # per-transition increment laws (no destination compaction): the basic
    # eigenvector prefactors are the primary pair and must sandwich MC
    p = np.array([[0.7, 0.3], [0.4, 0.6]])
    laws = ((DiscreteDistribution(np.array([1.0, 3.0]), np.array([0.5, 0.5])),
             DiscreteDistribution.point_mass(0.5)),
            (DiscreteDistribution(np.array([0.0, 2.0]), np.array([0.3, 0.7])),
             DiscreteDistribution.point_mass(1.0)))
    kernel = MarkovKernel(("a", "b"), p, laws)
    assert not kernel.by_destination
    proc = MarkovAdditive(kernel)
    arrival = ArrivalSpec(0.8)
    assert stability_margin(proc, arrival) > 0
    detail = delay_tail_markov_detail(proc, arrival, 6.0)
    assert "improved" in detail.upper.notes
    # the bare eigenvector lower bound over-claims under nonzero overshoot;
    # the corrected pair must contain it from below
    assert detail.lower.value <= detail.basic_lower.value + 1e-15
    cfg = SimConfig(seed=47, runs=150_000, horizon=500)
    ests = empirical_delay_tails(proc, arrival, [2.0, 6.0], cfg)
    for d, est in zip((2.0, 6.0), ests):
        lo, up = delay_tail_markov(proc, arrival, d)
        assert lo.value - 3 * est.stderr <= est.point <= up.value + 3 * est.stderr


def test_delay_comonotonic_closed_forms(two_point, unit_spec):
    ray = capacity_marginal(unit_spec, Rayleigh())
    proc = Comonotonic(ray)
    lam = ray.quantile(0.5)
    arrival = ArrivalSpec(lam)
    # d = 0 at finite horizon gives F_C(lambda)
    assert delay_tail_comonotonic(proc, arrival, 0.0, 50) == pytest.approx(
        ray.cdf(lam), abs=1e-12)
    # d >= t forces a nonpositive argument
    assert delay_tail_comonotonic(proc, arrival, 12.0, 10) == 0.0
    # lambda at the median: infinite-horizon tail is exactly 1/2
    assert delay_tail_comonotonic(proc, arrival, 7.0) == pytest.approx(
        0.5, abs=1e-8)


def test_backlog_delegates_bit_for_bit(two_point, ge_kernel):
    arrival = ArrivalSpec(0.5)
    proc = Additive(two_point)
    blo, bup = backlog_tail(proc, arrival, 5.0)
    dlo, dup = delay_tail_additive(proc, arrival, 10.0)
    assert (blo.value, bup.value) == (dlo.value, dup.value)
    # doubling lambda halves the effective delay target
    arrival2 = ArrivalSpec(1.0)
    b2 = backlog_tail(proc, arrival2, 5.0)
    d2 = delay_tail_additive(proc, arrival2, 5.0)
    assert b2[1].value == d2[1].value
    mproc = MarkovAdditive(ge_kernel)
    mb = backlog_tail(mproc, ArrivalSpec(1.0), 10.0)
    md = delay_tail_markov(mproc, ArrivalSpec(1.0), 10.0)
    assert mb[1].value == md[1].value
    como = Comonotonic(two_point)
    assert backlog_tail(como, arrival, 2.5) == \
        delay_tail_comonotonic(como, arrival, 5.0)


def test_dcc_deterministic_channel():
    proc = Additive(DiscreteDistribution.point_mass(2.0))
    res = delay_constrained_capacity(proc, 5.0, 1e-3)
    assert res.conservative == pytest.approx(2.0, rel=1e-6)
    assert res.optimistic == pytest.approx(2.0, rel=1e-6)
    assert res.feasible


def test_dcc_vacuous_epsilon_limit(two_point):
    res = delay_constrained_capacity(Additive(two_point), 5.0, 0.999)
    assert res.conservative >= 0.93    # approaches E[C] = 1 from below
    assert res.conservative <= res.optimistic + 1e-9


def test_dcc_conservative_verified_by_simulation(two_point):
    d, eps = 20.0, 1e-3
    res = delay_constrained_capacity(Additive(two_point), d, eps)
    assert res.feasible
    assert res.conservative <= res.optimistic
    cfg = SimConfig(seed=29, runs=400_000, horizon=800)
    est = empirical_delay_tails(Additive(two_point),
                                ArrivalSpec(res.conservative), [d], cfg)[0]
    se_floor = math.sqrt(eps * (1 - eps) / cfg.runs)
    assert est.point <= eps + 3 * max(est.stderr, se_floor)
    # the fixed-theta one-shot window is reported alongside
    assert res.one_shot_window[0] <= res.one_shot_window[1] + 1e-12


def test_dcc_validation():
    with pytest.raises(ValidationError):
        delay_constrained_capacity(Additive(DiscreteDistribution.point_mass(1.0)),
                                   5.0, 1.5)
    with pytest.raises(ValidationError):
        delay_constrained_capacity(Additive(DiscreteDistribution.point_mass(1.0)),
                                   0.0, 0.5)


def test_chebyshev_transient_forms(two_point):
    pm = Additive(DiscreteDistribution.point_mass(2.0))
    assert chebyshev_transient(pm, 10, 0.5).bound == 0.0
    proc = Additive(two_point)
    b1 = chebyshev_transient(proc, 10, 0.5)
    b2 = chebyshev_transient(proc, 20, 0.5)
    assert b1.bound == pytest.approx(2 * b2.bound, abs=1e-12)
    assert b1.bound == pytest.approx(two_point.var() / 10 / 0.25, abs=1e-12)
    como = chebyshev_transient(Comonotonic(two_point), 17, 0.5, runs=100_000)
    # comonotonic averages do not concentrate: Var[avg] = Var[C] for all t
    assert como.variance == pytest.approx(two_point.var(), rel=0.05)
    assert como.variance_ci99[0] <= two_point.var() <= como.variance_ci99[1]
    with pytest.raises(ValidationError):
        chebyshev_transient(proc, 10, 0.0)
