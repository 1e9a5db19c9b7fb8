"""Acceptance gate: one printed PASS/FAIL line per criterion, tolerances pinned below.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import contextlib
import io
import json
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from mmgou.chain import ChainSpec
from mmgou.cli import main as cli_main
from mmgou.distributions import DistributionSpec as D, JumpLaw
from mmgou.expfun import degeneracy_test, degenerate_spec, functional_at, sample_stationary, \
    stationary_functional_spec
from mmgou.identities import C_H, JUMP_TOL, identity_suite, order_study
from mmgou.mapspec import MapSpec, TransitionJumpSpec, UL_to_xieta, levy, map_linear
from mmgou.risk import build_xieta_map, ruin_probability, verify_ruin_theorem
from mmgou.scenario import parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "mmgou" / "scenarios"

# pinned tolerances
ORDER_RANGE = (0.8, 1.2)
ORDER_HS = (1e-2, 5e-3, 2.5e-3)
ID_H = 0.01
KS_P = 0.01
N_SE = 3.0
CL_ORACLE = 0.5 * np.exp(-0.5)
CL_CENSOR = 0.005
MIN_RUINED = 200
RERUN_THREADS = (1, 8)

Q2 = np.array([[-1.0, 1.0], [2.0, -2.0]])


def ul_spec() -> MapSpec:
    """Two-state (U, L) MAP: correlated Brownian parts, mixed Lévy jumps, transition shocks."""
    s0 = levy([0.3, 0.5], [[0.2, 0.05], [0.05, 0.3]], [(1.0, JumpLaw.of(D.uniform(-0.5, 0.5), D.normal(0, 0.5)))])
    s1 = levy([-0.2, -0.2], [[0.4, -0.1], [-0.1, 0.5]], [(0.7, JumpLaw.of(D.exponential(2.0), D.point(-0.5)))])
    tj = TransitionJumpSpec({(0, 1): JumpLaw.of(D.point(-0.3), D.point(0.4)),
                             (1, 0): JumpLaw.of(D.uniform(-0.2, 0.2), D.normal(0, 1))})
    return MapSpec(ChainSpec(Q2, 0), (s0, s1), tj)


_suite_cache: dict = {}


def _suite():
    if "rows" not in _suite_cache:
        _suite_cache["rows"] = {r.name: r for r in identity_suite(ul_spec(), 100, 1.0, ID_H, seed=3,
                                                                   n_triples=10_000)}
    return _suite_cache["rows"]


# ------------------------------------------------------------ criteria

def criterion_1():
    t0 = time.perf_counter()
    U = map_linear(ul_spec(), [[1.0, 0.0]])
    mil = order_study(U, 100, 1.0, ORDER_HS[-1], (4, 2, 1), seed=4, scheme="milstein")
    eul = order_study(U, 100, 1.0, ORDER_HS[-1], (4, 2, 1), seed=4, scheme="euler")
    dt = time.perf_counter() - t0
    ok = ORDER_RANGE[0] <= mil["order"] <= ORDER_RANGE[1] and dt < 60
    return ok, (f"order {mil['order']:.3f} in [{ORDER_RANGE[0]}, {ORDER_RANGE[1]}] (first-order Ito-Taylor), "
                f"errors {['%.2e' % e for e in mil['error']]} at h {mil['h']}; plain Euler order "
                f"{eul['order']:.3f} (info); {dt:.1f}s < 60s")


def criterion_2():
    rows = _suite()
    names = ["stochastic exponential / logarithm", "map_to_mmp / mmp_to_map", "xi_from_U / U_from_xi",
             "eta_from_L / L_from_eta"]
    ok = all(rows[n].passed for n in names)
    worst = max(rows[n].cont_error for n in names)
    jmax = max(rows[n].jump_error for n in names)
    return ok, (f"4 round trips x 100 paths: max jump err {jmax:.1e} < {JUMP_TOL:g}, max continuous err "
                f"{worst:.2e} < C*h = {C_H}*{ID_H} (calibrated C = {C_H}, observed ratio {worst / ID_H:.2f})")


def criterion_3():
    rows = _suite()
    a, b = rows["cocycle A"], rows["cocycle B"]
    return a.passed and b.passed, (f"10^4 triples: A err {a.jump_error:.1e}, B err {b.jump_error:.1e} "
                                   f"< {JUMP_TOL:g}")


def criterion_4():
    r = _suite()["E(xi,L) = E(xi,eta) + [e^-xi, eta]"]
    return r.passed, f"100 paths: sup err {r.cont_error:.2e} < 1e-10 + C*h = {r.cont_tol:.4g}"


def criterion_5():
    t0 = time.perf_counter()
    sc = parse_scenario(SCENARIOS / "two_state_shock.json")
    xe = build_xieta_map(sc.model)
    xe = xe.with_initial(xe.pi())
    f = functional_at(xe, 5.0, 10_000, 51, kind="F")
    e = functional_at(stationary_functional_spec(xe), 5.0, 10_000, 52, kind="E")
    p = stats.ks_2samp(f, e).pvalue
    dt = time.perf_counter() - t0
    return p > KS_P and dt < 300, f"KS p = {p:.3f} > {KS_P} (N = 10^4 each, t = 5); {dt:.1f}s < 300s"


def criterion_6():
    sc = parse_scenario(SCENARIOS / "ou.json")
    s = sample_stationary(sc.model, 10_000, seed=sc.run.seed, mc=sc.run.mc)
    v = s.values.var(ddof=1)
    se = np.sqrt(np.var((s.values - s.values.mean()) ** 2, ddof=1) / len(s.values))
    ok = abs(v - 0.5) <= N_SE * se
    return ok, f"var {v:.4f} vs 0.5, |diff| {abs(v - 0.5):.4f} <= 3 SE = {N_SE * se:.4f} (N = 10^4)"


def criterion_7():
    U = MapSpec(ChainSpec(Q2, 0), (levy([0.2], [[0.3]]),
                                   levy([-0.1], [[0.5]], [(1.0, JumpLaw.of(D.uniform(-0.5, 0.5)))])),
                TransitionJumpSpec({(0, 1): JumpLaw.of(D.point(0.2))}))
    c = np.array([1.0, 2.0])
    r = degeneracy_test(UL_to_xieta(degenerate_spec(U, c)), c, mc=100, T=20.0, h=ID_H, seed=7, C=C_H)
    return r.passed, f"100 paths, T = 20: sup |V - c_J| = {r.sup_deviation:.1e} < C*h = {r.tolerance:g}"


def criterion_8():
    t0 = time.perf_counter()
    sc = parse_scenario(SCENARIOS / "cramer_lundberg.json")
    r = sc.run
    est = ruin_probability(sc.model, r.u[0], 0, r.N, r.T, r.h, r.seed)
    dt = time.perf_counter() - t0
    tol = max(N_SE * est.se, CL_CENSOR)
    ok = abs(est.estimate - CL_ORACLE) <= tol and dt < 600
    return ok, (f"psi {est.estimate:.5f} +- {est.se:.5f} vs {CL_ORACLE:.5f}, |diff| "
                f"{abs(est.estimate - CL_ORACLE):.5f} <= max(3 SE, {CL_CENSOR}) = {tol:.5f} "
                f"(N = {r.N}, T = {r.T:g}); {dt:.1f}s < 600s")


def criterion_9():
    sc = parse_scenario(SCENARIOS / "two_state_shock.json")
    r = sc.run
    chk = verify_ruin_theorem(sc.model, r.u[0], r.j, r.N, r.T, r.h, r.seed, r.N_H, r.policy)
    ok = chk.passed and min(chk.n_ruined_lhs, chk.n_ruined_rhs) >= MIN_RUINED
    return ok, (f"lhs {chk.lhs.estimate:.4f} +- {chk.lhs.se:.4f}, rhs {chk.rhs.estimate:.4f} +- "
                f"{chk.rhs.se:.4f}, |diff| {abs(chk.lhs.estimate - chk.rhs.estimate):.4f} <= 3 SE = "
                f"{N_SE * chk.combined_se:.4f}; ruined {chk.n_ruined_lhs}/{chk.n_ruined_rhs} >= {MIN_RUINED}")


RERUN_CASES = [
    ("simulate", "map_paths.json", []),
    ("simulate", "mmgou_paths.json", []),
    ("identities", "identity_suite.json", []),
    ("ruin", "two_state_shock_surface.json", ["--N", "2000", "--T", "50"]),
    ("stationary-sample", "ou.json", ["--N", "2000", "--mc", "500"]),
]


def criterion_10():
    bad = []
    with tempfile.TemporaryDirectory() as tmp:
        for cmd, name, extra in RERUN_CASES:
            a, b = Path(tmp) / f"{name}.a", Path(tmp) / f"{name}.b"
            with contextlib.redirect_stdout(io.StringIO()):
                code = cli_main([cmd, str(SCENARIOS / name), "--out", str(a), "--threads", str(RERUN_THREADS[0])]
                                + extra)
                code2 = cli_main(["rerun", str(a / "manifest.json"), "--out", str(b),
                                  "--threads", str(RERUN_THREADS[1])])
            outputs = json.loads((a / "manifest.json").read_text())["outputs"]
            same = code == 0 and code2 == 0 and all((a / f).read_bytes() == (b / f).read_bytes() for f in outputs)
            if not same:
                bad.append(name)
    return not bad, (f"{len(RERUN_CASES)} scenarios rerun from manifest at threads {RERUN_THREADS}: "
                     + ("all byte-identical" if not bad else f"mismatch in {bad}"))


CRITERIA = [
    (1, "stochastic exponential SDE order", criterion_1),
    (2, "conversion round trips", criterion_2),
    (3, "cocycle law", criterion_3),
    (4, "exponential-functional bracket identity", criterion_4),
    (5, "duality in law", criterion_5),
    (6, "OU stationary variance", criterion_6),
    (7, "degenerate case", criterion_7),
    (8, "Cramer-Lundberg ruin oracle", criterion_8),
    (9, "ruin identity on the shipped scenario", criterion_9),
    (10, "rerun reproducibility across threads", criterion_10),
]


def _line(num, title, ok, detail):
    return f"[acceptance {num:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"


@pytest.mark.parametrize("num,title,fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(num, title, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(num, title, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    for num, title, fn in CRITERIA:
        print(_line(num, title, *fn()), flush=True)
