import numpy as np
import pytest

from mmgou.chain import ChainSpec
from mmgou.distributions import DistributionSpec as D, JumpLaw
from mmgou.mapspec import MapSpec, TransitionJumpSpec, levy
from mmgou.risk import RiskModelSpec, RiskState, Shock

Q2 = np.array([[-1.0, 1.0], [2.0, -2.0]])


@pytest.fixture
def chain2():
    return ChainSpec(Q2, 0)


@pytest.fixture
def ul_spec():
    """Two-state bivariate (U, L) MAP with correlated Brownian parts, mixed jumps and shocks."""
    s0 = levy([0.3, 0.5], [[0.2, 0.05], [0.05, 0.3]], [(1.0, JumpLaw.of(D.uniform(-0.5, 0.5), D.normal(0, 0.5)))])
    s1 = levy([-0.2, -0.2], [[0.4, -0.1], [-0.1, 0.5]], [(0.7, JumpLaw.of(D.exponential(2.0), D.point(-0.5)))])
    tj = TransitionJumpSpec({(0, 1): JumpLaw.of(D.point(-0.3), D.point(0.4)),
                             (1, 0): JumpLaw.of(D.uniform(-0.2, 0.2), D.normal(0, 1))})
    return MapSpec(ChainSpec(Q2, 0), (s0, s1), tj)


@pytest.fixture
def mmou_spec():
    """Two-state MMOU: xi pure drift (1.5, -0.5), eta drift (1, -1) plus Brownian (0.5, 1)."""
    return MapSpec(ChainSpec(Q2, 0), tuple(levy([g, e], [[0, 0], [0, s]])
                                           for g, e, s in [(1.5, 1.0, 0.5), (-0.5, -1.0, 1.0)]))


@pytest.fixture
def shock_risk():
    ch = ChainSpec(np.array([[-0.5, 0.5], [1.0, -1.0]]), 0)
    return RiskModelSpec(ch, (RiskState(1.8, 1.0, D.exponential(1.0), interest=0.15),
                              RiskState(1.0, 1.5, D.exponential(1.0), interest=0.1)),
                         {(0, 1): Shock(D.point(-0.2), D.point(-0.5)), (1, 0): Shock(D.point(0.1), D.point(0.0))})
