import numpy as np
import pytest

from mmgou.distributions import SpecError
from mmgou.identities import roundtrips, xi_eta_path
from mmgou.mapspec import levy, single_state
from mmgou.paths import LEVY, NONE, SamplePath, simulate_map_path, simulate_map_paths
from mmgou.stochcalc import (CovariationSpec, DomainError, H_path, L_from_U_eta, L_from_eta, U_from_xi,
                             eta_from_L, map_to_mmp, mmp_to_map, quadratic_covariation, sde_exponential,
                             stochastic_exponential, stochastic_logarithm, xi_from_U)


def mk(times, values, jumps=None, var=0.0, states=None):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    jumps = np.zeros_like(values) if jumps is None else np.asarray(jumps, dtype=float)
    marks = np.where(jumps != 0, LEVY, NONE) if values.ndim == 1 else np.where(np.any(jumps != 0, axis=1), LEVY, NONE)
    states = np.zeros(len(times), dtype=int) if states is None else states
    return SamplePath(times, states, values, jumps, marks, np.array([var]))


def drift_path(a, T=2.0, h=0.01):
    t = np.arange(0, T + h / 2, h)
    return mk(t, a * t)


# ------------------------------------------------------------ exponential

def test_exponential_examples():
    z = stochastic_exponential(mk([0, 1, 2], [0, 0, 0]))
    assert np.all(z.values == 1)
    p = drift_path(0.7)
    assert np.allclose(stochastic_exponential(p).values[:, 0], np.exp(0.7 * p.times), rtol=1e-14)
    j = mk([0, 0.5, 1, 1.5], [0, 0, -0.5, -0.5], [0, 0, -0.5, 0])
    assert np.allclose(stochastic_exponential(j).values[:, 0], [1, 1, 0.5, 0.5])


def test_exponential_brownian_formula():
    p = simulate_map_path(single_state(levy([0.0], [[0.4]])), 3.0, 0.01, 2)
    z = stochastic_exponential(p).values[:, 0]
    assert np.allclose(z, np.exp(p.values[:, 0] - 0.2 * p.times), rtol=0, atol=1e-12)


def test_exponential_absorbed_at_minus_one():
    z = stochastic_exponential(mk([0, 1, 2], [0, -1, -1], [0, -1, 0])).values[:, 0]
    assert np.array_equal(z, [1, 0, 0])


# ------------------------------------------------------------ logarithm

def test_logarithm_examples():
    assert np.all(stochastic_logarithm(mk([0, 1, 2], [1, 1, 1])).values == 0)
    with pytest.raises(DomainError):
        stochastic_logarithm(mk([0, 1], [1, 0], [0, -1]))


def test_logarithm_first_order_for_exp_drift():
    a = 1.3
    errs = []
    hs = [0.02, 0.01, 0.005]
    for h in hs:
        t = np.arange(0, 1 + h / 2, h)
        z = mk(t, np.exp(a * t))
        errs.append(abs(stochastic_logarithm(z).values[-1, 0] - a * t[-1]))
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.9 < order < 1.1


def test_logarithm_recovers_jumps(ul_spec):
    p = simulate_map_path(ul_spec, 5.0, 0.01, 3).component(0)
    u2 = stochastic_logarithm(stochastic_exponential(p))
    k = p.jumps[:, 0] != 0
    assert k.any() and np.max(np.abs(u2.jumps[k, 0] - p.jumps[k, 0])) < 1e-10


# ------------------------------------------------------------ covariation

def test_quadratic_covariation_examples():
    p = simulate_map_path(single_state(levy([0.0], [[0.5]])), 2.0, 0.01, 1)
    qv = quadratic_covariation(p, p, CovariationSpec(np.array([0.5])))
    assert np.allclose(qv.values[:, 0], 0.5 * p.times, atol=1e-14)
    d = drift_path(1.0)
    assert np.all(quadratic_covariation(d, d, CovariationSpec(np.array([0.0]))).values == 0)
    x = mk([0, 1, 2, 3], [0, 1, 1, 1], [0, 1, 0, 0])
    y = mk([0, 1, 2, 3], [0, 0, 2, 2], [0, 0, 2, 0])
    assert np.all(quadratic_covariation(x, y, CovariationSpec(np.array([0.0]))).values == 0)
    with pytest.raises(SpecError):
        quadratic_covariation(x, mk([0, 1, 2, 4], [0, 0, 0, 0]), CovariationSpec(np.array([0.0])))


# ------------------------------------------------------------ MAP <-> MMP

def test_map_to_mmp_examples():
    Y, K, Z = map_to_mmp(mk([0, 1, 2], [0, 0, 0]))
    assert np.all(Y.values == 0) and np.all(K.values == 0) and np.all(Z.values == 1)
    Y, K, Z = map_to_mmp(mk([0, 1, 2], [0, -2, -2], [0, -2, 0]))
    assert np.array_equal(K.values[:, 0], [0, 1, 1])
    assert np.allclose(Z.values[:, 0], [1, -1, -1])
    with pytest.raises(DomainError):
        map_to_mmp(mk([0, 1], [0, -1], [0, -1]))


def test_map_to_mmp_matches_exponential(ul_spec):
    for p in simulate_map_paths(ul_spec, 10, 3.0, 0.01, 5):
        u = p.component(0)
        assert np.max(np.abs(map_to_mmp(u)[2].values - stochastic_exponential(u).values)) < 1e-10


def test_mmp_to_map_examples():
    assert np.all(mmp_to_map(mk([0, 1, 2], [1, 1, 1])).values == 0)
    u = mmp_to_map(mk([0, 1, 2], [1, -1, -1], [0, -2, 0]))
    assert u.jumps[1, 0] == pytest.approx(-2.0)


# ------------------------------------------------------------ xi / U / eta / L

def test_xi_examples():
    assert np.all(xi_from_U(mk([0, 1], [0, 0])).values == 0)
    d = drift_path(0.4)
    assert np.allclose(xi_from_U(d).values[:, 0], -0.4 * d.times)
    with pytest.raises(DomainError):
        xi_from_U(mk([0, 1], [0, -1.5], [0, -1.5]))


def test_U_from_xi_no_jumps():
    p = simulate_map_path(single_state(levy([0.3], [[0.6]])), 2.0, 0.01, 4)
    u = U_from_xi(p)
    assert np.allclose(u.values[:, 0], -p.values[:, 0] + 0.3 * p.times, atol=1e-12)


def test_L_from_eta_examples():
    cov0 = CovariationSpec(np.array([0.0]))
    xi = mk([0, 1, 2], [0, np.log(2), np.log(2)], [0, np.log(2), 0])
    eta = mk([0, 1, 2], [0, 1, 1], [0, 1, 0])
    L = L_from_eta(xi, eta, cov0)
    assert L.jumps[1, 0] == pytest.approx(0.5)
    e2 = simulate_map_path(single_state(levy([0.2], [[1.0]])), 1.0, 0.01, 1)
    x2 = SamplePath(e2.times, e2.states, 0.5 * e2.times, np.zeros(len(e2.times)), e2.marks, np.array([0.0]))
    assert np.allclose(L_from_eta(x2, e2, cov0).values, e2.values)


def test_eta_from_L_examples():
    cov0 = CovariationSpec(np.array([0.0]))
    u = mk([0, 1, 2], [0, 1, 1], [0, 1, 0])
    l = mk([0, 1, 2], [0, 1, 1], [0, 1, 0])
    assert eta_from_L(u, l, cov0).jumps[1, 0] == pytest.approx(0.5)
    u2 = mk([0, 1, 2], [0, 1, 1], [0, 1, 0])
    l2 = mk([0, 1, 2], [0, 0, 3], [0, 0, 3])
    assert np.allclose(eta_from_L(u2, l2, cov0).values, l2.values)


def test_L_equals_eta_plus_bracket(ul_spec):
    for p in simulate_map_paths(ul_spec, 10, 3.0, 0.01, 6):
        u, l = p.component(0), p.component(1)
        cov = CovariationSpec.from_path(p)
        eta = eta_from_L(u, l, cov)
        l2 = L_from_U_eta(u, eta, cov)
        assert np.max(np.abs(l2.values - l.values)) < 1e-10


def test_H_examples(ul_spec):
    assert np.all(H_path(mk([0, 1], [0, 0])).values == 0)
    d = drift_path(0.6)
    assert np.allclose(H_path(d).values[:, 0], -0.6 * d.times)
    for p in simulate_map_paths(ul_spec, 10, 3.0, 0.01, 7):
        u = p.component(0)
        prod = stochastic_exponential(H_path(u)).values * stochastic_exponential(u).values
        assert np.max(np.abs(prod - 1)) < 1e-10


def test_roundtrips_on_paths(ul_spec):
    for p in simulate_map_paths(ul_spec, 20, 1.0, 0.01, 8):
        for name, (jump, cont) in roundtrips(p).items():
            assert jump < 1e-10, name
            assert cont < 2 * 0.01, name


def test_xi_eta_from_UL_consistency(ul_spec):
    """e^{-xi} = E(U) within 1e-10."""
    for p in simulate_map_paths(ul_spec, 10, 3.0, 0.01, 9):
        xe = xi_eta_path(p)
        z = stochastic_exponential(p.component(0)).values[:, 0]
        assert np.max(np.abs(np.exp(-xe.values[:, 0]) - z)) < 1e-10


def test_sde_exponential_milstein_close(ul_spec):
    p = simulate_map_path(ul_spec, 1.0, 0.001, 10).component(0)
    z = stochastic_exponential(p).values[:, 0]
    assert np.max(np.abs(sde_exponential(p, "milstein").values[:, 0] - z)) < 0.01
