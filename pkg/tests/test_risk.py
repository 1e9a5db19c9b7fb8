import numpy as np
import pytest

from mmgou.chain import ChainSpec
from mmgou.distributions import DistributionSpec as D, SpecError
from mmgou.gou import mmgou_explicit, mmgou_sde
from mmgou.identities import C_H, xi_eta_path
from mmgou.paths import simulate_map_path, simulate_map_paths
from mmgou.risk import (RiskModelSpec, RiskState, RuinOutcome, Shock, abar_minus_xi, build_UL_map,
                        build_xieta_map, estimate_H, eta_d_path, kappa_xi, ruin_probability, ruin_surface,
                        simulate_ruin, verify_ruin_theorem)

CL = RiskModelSpec(ChainSpec(np.array([[0.0]]), 0), (RiskState(2.0, 1.0, D.exponential(1.0)),))


def test_build_UL_map(shock_risk):
    m = build_UL_map(shock_risk)
    c = m.per_state[0]
    assert np.allclose(c.drift, [0.15, 1.8])
    assert np.allclose(c.cov, 0)
    assert m.transition_jumps.get(0, 1).sample(np.zeros((1, 2)))[0].tolist() == [-0.2, -0.5]
    xe = build_xieta_map(shock_risk)
    assert xe.dim == 2 and xe.num_states == 2


def test_risk_state_validation():
    with pytest.raises(SpecError) as e:
        RiskModelSpec(CL.chain, (RiskState(-1.0),))
    assert "premium" in e.value.path
    with pytest.raises(SpecError):
        RiskState(1.0, 1.0, D.normal(0, 1)).validate("states[0]")
    with pytest.raises(SpecError):
        RiskState(1.0, inv_jump_rate=1.0, inv_jump_law=D.uniform(-2, 0)).validate("states[0]")


def test_risk_spec_json_roundtrip(shock_risk):
    assert RiskModelSpec.from_json(shock_risk.to_json()) == shock_risk


def test_eta_d_examples(shock_risk):
    xe = xi_eta_path(simulate_map_path(build_UL_map(shock_risk), 20.0, 0.01, 1))
    d = eta_d_path(xe)
    ks = np.flatnonzero(d.jumps[:, 0])
    assert len(ks) > 0
    # a shock (Phi_U, Phi_L) = (-0.2, -0.5) contributes Phi_L / (1 + Phi_U)
    k01 = [k for k in range(1, len(xe.times)) if xe.states[k - 1] == 0 and xe.states[k] == 1]
    assert k01 and all(d.jumps[k, 0] == pytest.approx(-0.5 / 0.8) for k in k01)
    one = RiskModelSpec(ChainSpec(np.array([[-1.0, 1.0], [1.0, -1.0]]), 0),
                        (RiskState(1.0), RiskState(1.0)), {(0, 1): Shock(D.point(1.0), D.point(2.0))})
    xe = xi_eta_path(simulate_map_path(build_UL_map(one), 10.0, 0.05, 2))
    d = eta_d_path(xe)
    k01 = [k for k in range(1, len(xe.times)) if xe.states[k - 1] == 0 and xe.states[k] == 1]
    assert k01 and all(d.jumps[k, 0] == pytest.approx(1.0) for k in k01)


def test_abar_examples():
    two = RiskModelSpec(ChainSpec(np.array([[-1.0, 1.0], [1.0, -1.0]]), 0),
                        (RiskState(1.0, interest=0.1), RiskState(1.0, interest=0.3, inv_var=0.2)))
    assert np.allclose(abar_minus_xi(two, [1.0, 5.0]), 0.5 * 0.1 + 0.5 * (0.3 - 0.1))
    sh = RiskModelSpec(two.chain, two.states, {(0, 1): Shock(D.point(-0.5), D.point(0.0))})
    assert abar_minus_xi(sh, 1.0)[0] == pytest.approx(0.15 - 0.5 * np.log(2))
    jumpy = RiskModelSpec(CL.chain, (RiskState(1.0, interest=0.0, inv_jump_rate=1.0,
                                               inv_jump_law=D.exponential(1.0)),))
    a = abar_minus_xi(jumpy, [1.0, 2.0, 5.0, 20.0])
    assert np.all(np.diff(a) >= 0)
    with pytest.raises(SpecError):
        abar_minus_xi(two, 0.5)


def test_kappa_xi_sign(shock_risk):
    # interest is positive in both states and shocks are mild, so -xi drifts up
    assert kappa_xi(shock_risk) < 0


def test_simulate_ruin_examples():
    safe = RiskModelSpec(CL.chain, (RiskState(1.0, interest=0.05),))
    assert simulate_ruin(safe, 1.0, 0, 50.0, 0.01, 1) == RuinOutcome(False, None, None, None, 50.0)
    big = RiskModelSpec(CL.chain, (RiskState(0.1, 5.0, D.point(100.0)),))
    out = simulate_ruin(big, 1.0, 0, 50.0, 0.01, 1)
    assert out.ruined and out.v_tau <= 0 and out.j_tau == 0 and out.tau < 50
    assert simulate_ruin(big, 1.0, 0, 50.0, 0.01, 1) == out
    with pytest.raises(SpecError):
        simulate_ruin(big, 0.0, 0, 50.0, 0.01, 1)
    with pytest.raises(SpecError):
        simulate_ruin(big, 1.0, 3, 50.0, 0.01, 1)


def test_ruin_outcome_invariant():
    with pytest.raises(SpecError):
        RuinOutcome(True, 1.0, 0.5, 0, None)


def test_ruin_probability_monotone_in_u(shock_risk):
    est = ruin_probability(shock_risk, [0.5, 1.0, 2.0, 4.0], 0, 2000, 50.0, 0.02, 3)
    psi = [e.estimate for e in est]
    assert all(a >= b for a, b in zip(psi, psi[1:]))
    assert all(0 < p < 1 for p in psi)
    assert est[0].meta["n_ruined"] == round(psi[0] * 2000)
    with pytest.raises(SpecError):
        ruin_probability(shock_risk, 1.0, 0, 999, 50.0)


def test_ruin_probability_thread_invariant(shock_risk):
    a = ruin_probability(shock_risk, 1.0, 0, 2000, 20.0, 0.02, 4, threads=1)
    b = ruin_probability(shock_risk, 1.0, 0, 2000, 20.0, 0.02, 4, threads=4)
    assert a.estimate == b.estimate


def test_ruin_surface_rows(shock_risk):
    rows = ruin_surface(shock_risk, [1.0, 2.0], 1000, 20.0, 0.02, 5)
    assert [(r["u"], r["j"]) for r in rows] == [(1.0, 0), (2.0, 0), (1.0, 1), (2.0, 1)]
    assert set(rows[0]) == {"u", "j", "psi", "se", "n_ruined", "hazard_ok"}


def test_H_trivial_without_claims():
    safe = RiskModelSpec(CL.chain, (RiskState(1.0, interest=0.5),))
    H = estimate_H(safe, 0, 500)
    assert H(0.0) == 0.0 and H(1e9) == 1.0
    assert H.dkw > 0


def test_explicit_vs_sde_on_risk_model(shock_risk):
    ul = build_UL_map(shock_risk)
    for p in simulate_map_paths(ul, 10, 5.0, 0.01, 6):
        d = np.abs(mmgou_explicit(xi_eta_path(p), 1.0).v - mmgou_sde(p, 1.0).v)
        assert np.max(d) < C_H * 0.01


def test_verify_ruin_inconclusive_when_few_ruins(shock_risk):
    chk = verify_ruin_theorem(shock_risk, 50.0, 0, 1000, 20.0, 0.05, 1)
    assert chk.verdict == "inconclusive" and "ruined" in chk.message
