import numpy as np
import pytest
from scipy import stats

from mmgou.chain import ChainSpec
from mmgou.distributions import DistributionSpec as D, JumpLaw, SpecError
from mmgou.expfun import (RefusalError, TruncationPolicy, abar_Axi, classify_stationarity, degeneracy_test,
                          degenerate_spec, exp_functional_sample, exp_integral_E, exp_integral_F,
                          functional_at, hill_index, kappa, sample_stationary, Ij_estimate)
from mmgou.mapspec import MapSpec, UL_to_xieta, levy, single_state, xieta_to_xiL
from mmgou.paths import simulate_map_path
from mmgou.stochcalc import CovariationSpec

from conftest import Q2

OU = single_state(levy([1.0, 0.0], [[0, 0], [0, 1.0]]))


def heavy_eta(law):
    return single_state(levy([1.0, 0.0], jumps=[(1.0, law)]))


EXP_PARETO = JumpLaw.of(D.point(0.0), D.pareto(0.5, 1.0)).then({"op": "exp", "cols": [1]})


# ------------------------------------------------------------ integrals

def test_exp_integral_closed_forms():
    a = 0.5
    p = simulate_map_path(single_state(levy([a, 1.0])), 4.0, 0.001, 1)
    t = p.times[-1]
    assert exp_integral_E(p) == pytest.approx((1 - np.exp(-a * t)) / a, abs=1e-3)
    assert exp_integral_F(p) == pytest.approx((1 - np.exp(-a * t)) / a, abs=1e-3)
    cov = CovariationSpec(np.array([0.0]))
    assert exp_integral_E(p.component(0), p.component(1), cov=cov) == exp_integral_E(p)
    with pytest.raises(SpecError):
        exp_integral_E(p.component(0), p.component(1))
    z = simulate_map_path(single_state(levy([0.0, 0.0])), 1.0, 0.01, 1)
    assert exp_integral_E(z) == 0.0


def test_exp_functional_sample_drift():
    a = 2.0
    v, ok = exp_functional_sample(single_state(levy([a, 1.0])), TruncationPolicy(t_max=100), h=0.01)
    assert ok and v == pytest.approx(1 / a, rel=1e-3)
    v, ok = exp_functional_sample(single_state(levy([-0.5, 1.0])), TruncationPolicy(t_max=20), h=0.01)
    assert not ok


def test_truncation_policy_validation():
    with pytest.raises(SpecError):
        TruncationPolicy(t_max=0)
    with pytest.raises(SpecError) as e:
        TruncationPolicy.from_json({"t_max": 1, "bogus": 2})
    assert e.value.path == "policy"


# ------------------------------------------------------------ kappa / A / I

def test_kappa_examples():
    sym = ChainSpec(np.array([[-1.0, 1.0], [1.0, -1.0]]), 0)
    s = MapSpec(sym, (levy([1.0]), levy([-3.0])))
    assert kappa(s) == pytest.approx(-1.0)
    from mmgou.mapspec import TransitionJumpSpec
    shifted = MapSpec(sym, s.per_state, TransitionJumpSpec({(0, 1): JumpLaw.of(D.point(0.4)),
                                                            (1, 0): JumpLaw.of(D.point(0.4))}))
    assert kappa(shifted) == pytest.approx(-1.0 + 0.4)
    assert kappa(single_state(levy([0.7], jumps=[(2.0, JumpLaw.of(D.exponential(4.0)))]))) == pytest.approx(1.2)


def test_abar_monotone(ul_spec):
    est = abar_Axi(ul_spec, 0, [1.0, 1.5, 2.0, 4.0, 10.0], 2000, 1)
    assert np.all(np.diff(est.value) >= -3 * est.se[1:])
    with pytest.raises(SpecError):
        abar_Axi(ul_spec, 0, [0.5], 2000, 1)


def test_abar_pure_drift_is_drift():
    est = abar_Axi(single_state(levy([0.8, 0.0])), 0, [1.0, 3.0], 2000, 1)
    assert np.allclose(est.value, 0.8)


def test_Ij_examples():
    bounded = heavy_eta(JumpLaw.of(D.point(0.0), D.uniform(-1, 1)))
    assert Ij_estimate(xieta_to_xiL(bounded), 0, 2000, 1).verdict == "finite"
    assert Ij_estimate(xieta_to_xiL(bounded), 0, 2000, 1).estimate == 0.0
    assert Ij_estimate(xieta_to_xiL(heavy_eta(EXP_PARETO)), 0, 2000, 1).verdict == "infinite"


def test_hill_index():
    rng = np.random.default_rng(0)
    assert hill_index(rng.pareto(2.0, 20000) + 1) == pytest.approx(2.0, rel=0.2)
    assert hill_index(np.ones(100)) == float("inf")


# ------------------------------------------------------------ classification

@pytest.mark.parametrize("spec,verdict", [
    ("mmou", "stationary_a"),
    (single_state(levy([-1.0, 0.0], [[0, 0], [0, 1.0]])), "divergent"),
    (heavy_eta(EXP_PARETO), "divergent"),
    (heavy_eta(JumpLaw.of(D.point(0.0), D.pareto(0.5, 1.0))), "stationary_a"),
])
def test_classifier_verdicts(spec, verdict, mmou_spec):
    spec = mmou_spec if spec == "mmou" else spec
    rep = classify_stationarity(spec, mc=2000, seed=0)
    assert rep.verdict == verdict
    js = rep.to_json()
    assert js["verdict"] == verdict and "drift_check" in js


def degenerate_xieta(c):
    U = MapSpec(ChainSpec(Q2, 0), (levy([0.2], [[0.3]]), levy([-0.1], [[0.5]], [(1.0, JumpLaw.of(D.uniform(-.5, .5)))])))
    return UL_to_xieta(degenerate_spec(U, c))


def test_degeneracy_examples():
    r = degeneracy_test(degenerate_xieta([1.0, 2.0]), np.array([1.0, 2.0]))
    assert r.passed and r.sup_deviation < 1e-8
    assert classify_stationarity(degenerate_xieta([1.0, 2.0]), mc=500, seed=0).verdict == "degenerate_b"
    assert not degeneracy_test(degenerate_xieta([1.0, 2.0]), np.array([1.0, 2.1])).passed


def test_degeneracy_estimates_c():
    r = degeneracy_test(degenerate_xieta([1.0, 2.0]))
    assert r.passed and np.allclose(r.c, [1.0, 2.0], atol=1e-6)


def test_degenerate_spec_rejects_bad_c():
    U = single_state(levy([0.1], [[0.2]]))
    with pytest.raises(SpecError):
        degenerate_spec(U, [1.0, 2.0])


# ------------------------------------------------------------ stationary law

def test_ou_stationary_variance():
    s = sample_stationary(OU, 4000, seed=7)
    var = s.values.var(ddof=1)
    se = var * np.sqrt(2 / (len(s.values) - 1))
    assert abs(var - 0.5) < 4 * se
    assert s.nonconverged_fraction == 0.0


def test_ou_stationary_gaussian():
    s = sample_stationary(OU, 2000, seed=8)
    assert stats.kstest(s.values, "norm", args=(0, np.sqrt(0.5))).pvalue > 0.01


def test_refuses_unless_stationary():
    with pytest.raises(RefusalError):
        sample_stationary(single_state(levy([-1.0, 0.0], [[0, 0], [0, 1.0]])), 100, mc=500)


def test_time_shift_invariance(mmou_spec):
    s = sample_stationary(mmou_spec, 3000, seed=5)
    v5 = functional_at(mmou_spec, 2.0, 3000, 99, kind="V", initial_states=s.states, v0=s.values)
    assert stats.ks_2samp(s.values, v5).pvalue > 0.01


def test_mmou_mean_matches_long_run(mmou_spec):
    s = sample_stationary(mmou_spec, 3000, seed=6)
    long = functional_at(mmou_spec.with_initial(mmou_spec.pi()), 30.0, 3000, 17, kind="V", v0=0.0)
    d = s.values.mean() - long.mean()
    se = np.hypot(s.values.std(ddof=1), long.std(ddof=1)) / np.sqrt(3000)
    assert abs(d) < 4 * se


def test_stationary_states_follow_pi(mmou_spec):
    s = sample_stationary(mmou_spec, 3000, seed=9)
    p0 = np.mean(s.states == 0)
    pi0 = mmou_spec.pi()[0]
    assert abs(p0 - pi0) < 4 * np.sqrt(pi0 * (1 - pi0) / 3000)
