"""Markov-modulated Paulsen risk model: construction, ruin simulation and the
ruin-probability identity through the exponential functional."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .chain import ChainSpec, stationary_law
from .distributions import DistributionSpec, JumpLaw, SpecError, tail_integral
from .expfun import FunctionalObserver, RefusalError, TruncationPolicy, exp_functional_samples, kappa
from .mapspec import LevyComponentSpec, JumpSource, MapSpec, TransitionJumpSpec, UL_to_xieta, map_linear
from .montecarlo import MonteCarloEstimate, dkw_epsilon, proportion_estimate
from .paths import SamplePath, Step, map_chunks, run_batch
from .rng import derive_seed

MIN_RUIN_PATHS = 1000
MIN_RUINED = 200
MAX_NONCONVERGED = 0.05


@dataclass(frozen=True)
class RiskState:
    premium: float
    claim_rate: float = 0.0
    claim_law: DistributionSpec | None = None
    perturb_var: float = 0.0
    interest: float = 0.0
    inv_jump_rate: float = 0.0
    inv_jump_law: DistributionSpec | None = None
    inv_var: float = 0.0

    _FIELDS = ("premium", "claim_rate", "claim_law", "perturb_var", "interest", "inv_jump_rate",
               "inv_jump_law", "inv_var")

    def validate(self, path: str) -> None:
        if not self.premium > 0:
            raise SpecError("premium must be > 0", f"{path}.premium")
        for name in ("claim_rate", "perturb_var", "inv_jump_rate", "inv_var"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise SpecError(f"{name} must be >= 0", f"{path}.{name}")
        if not np.isfinite(self.interest):
            raise SpecError("interest must be finite", f"{path}.interest")
        if self.claim_rate > 0:
            if self.claim_law is None:
                raise SpecError("claim_rate > 0 needs claim_law", f"{path}.claim_law")
            if not self.claim_law.satisfies("positive"):
                raise SpecError(f"claim law {self.claim_law.describe()} must have positive support",
                                f"{path}.claim_law")
        if self.inv_jump_rate > 0:
            if self.inv_jump_law is None:
                raise SpecError("inv_jump_rate > 0 needs inv_jump_law", f"{path}.inv_jump_law")
            if not self.inv_jump_law.satisfies("greater_than_minus_one"):
                raise SpecError(f"investment jump law {self.inv_jump_law.describe()} must have support "
                                "in (-1, inf)", f"{path}.inv_jump_law")

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for name in self._FIELDS:
            v = getattr(self, name)
            if isinstance(v, DistributionSpec):
                out[name] = v.to_json()
            elif v is not None:
                out[name] = float(v)
        return out

    @staticmethod
    def from_json(obj: Any, path: str) -> "RiskState":
        if not isinstance(obj, dict):
            raise SpecError("expected an object", path)
        extra = set(obj) - set(RiskState._FIELDS)
        if extra:
            raise SpecError(f"unexpected fields {sorted(extra)}", path)
        if "premium" not in obj:
            raise SpecError("missing field", f"{path}.premium")
        kw: dict[str, Any] = {}
        for name in RiskState._FIELDS:
            if name not in obj:
                continue
            v = obj[name]
            if name.endswith("_law"):
                kw[name] = DistributionSpec.from_json(v, f"{path}.{name}")
            else:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise SpecError("expected a number", f"{path}.{name}")
                kw[name] = float(v)
        return RiskState(**kw)


@dataclass(frozen=True)
class Shock:
    """Joint market shock (Phi_U, Phi_L) at a transition i -> j (independent components)."""

    U: DistributionSpec
    L: DistributionSpec

    def law(self) -> JumpLaw:
        return JumpLaw.of(self.U, self.L)


@dataclass(frozen=True, eq=False)
class RiskModelSpec:
    chain: ChainSpec
    states: tuple[RiskState, ...]
    shocks: dict[tuple[int, int], Shock] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) != self.chain.num_states:
            raise SpecError(f"need {self.chain.num_states} states, got {len(self.states)}", "states")
        for j, s in enumerate(self.states):
            s.validate(f"states[{j}]")
        q = self.chain.generator
        for (i, j), sh in self.shocks.items():
            p = f"shocks[{i},{j}]"
            if not (0 <= i < len(q) and 0 <= j < len(q)) or i == j or q[i, j] <= 0:
                raise SpecError("shock declared for a pair without a transition", p)
            if not sh.U.satisfies("greater_than_minus_one"):
                raise SpecError(f"shock law {sh.U.describe()} must have support in (-1, inf)", f"{p}.U")

    @property
    def num_states(self) -> int:
        return self.chain.num_states

    def __eq__(self, other):
        return (isinstance(other, RiskModelSpec) and self.chain == other.chain
                and self.states == other.states and self.shocks == other.shocks)

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "risk",
            "chain": self.chain.to_json(),
            "states": [s.to_json() for s in self.states],
            "shocks": [{"from": i, "to": j, "U": sh.U.to_json(), "L": sh.L.to_json()}
                       for (i, j), sh in sorted(self.shocks.items())],
        }

    @staticmethod
    def from_json(obj: Any, path: str = "model") -> "RiskModelSpec":
        if not isinstance(obj, dict):
            raise SpecError("expected an object", path)
        extra = set(obj) - {"type", "chain", "states", "shocks"}
        if extra:
            raise SpecError(f"unexpected fields {sorted(extra)}", path)
        chain = ChainSpec.from_json(obj.get("chain"), f"{path}.chain")
        states = obj.get("states")
        if not isinstance(states, list):
            raise SpecError("expected a list", f"{path}.states")
        rs = tuple(RiskState.from_json(s, f"{path}.states[{k}]") for k, s in enumerate(states))
        shocks = {}
        for k, sh in enumerate(obj.get("shocks", [])):
            p = f"{path}.shocks[{k}]"
            if not isinstance(sh, dict) or set(sh) != {"from", "to", "U", "L"}:
                raise SpecError("expected {from, to, U, L}", p)
            shocks[(int(sh["from"]), int(sh["to"]))] = Shock(DistributionSpec.from_json(sh["U"], f"{p}.U"),
                                                             DistributionSpec.from_json(sh["L"], f"{p}.L"))
        try:
            return RiskModelSpec(chain, rs, shocks)
        except SpecError as e:
            raise SpecError(str(e.args[0]).split(": ", 1)[-1], f"{path}.{e.path}") from None


# ------------------------------------------------------------ model maps

def build_UL_map(spec: RiskModelSpec) -> MapSpec:
    """((U, L), J): U^j = r t + sigma_U W + investment jumps, L^j = p t + sigma_L W' - claims."""
    zero = DistributionSpec.point(0.0)
    per = []
    for s in spec.states:
        jumps = []
        if s.inv_jump_rate > 0:
            jumps.append(JumpSource(s.inv_jump_rate, JumpLaw.of(s.inv_jump_law, zero)))
        if s.claim_rate > 0:
            jumps.append(JumpSource(s.claim_rate, JumpLaw.of(zero, DistributionSpec.negated(s.claim_law))))
        cov = np.diag([s.inv_var, s.perturb_var])
        per.append(LevyComponentSpec(np.array([s.interest, s.premium]), cov, tuple(jumps)))
    laws = {k: sh.law() for k, sh in spec.shocks.items()}
    return MapSpec(spec.chain, tuple(per), TransitionJumpSpec(laws))


def build_xieta_map(spec: RiskModelSpec) -> MapSpec:
    """((xi, eta), J) with e^{-xi} = E(U) and eta = L (U, L independent within states)."""
    return UL_to_xieta(build_UL_map(spec))


def eta_d_path(path: SamplePath) -> SamplePath:
    """Pure-jump part of eta: claims plus the shocks Phi_L / (1 + Phi_U)."""
    if path.dim != 2:
        raise SpecError("a bivariate (xi, eta) path is required", "path")
    jumps = path.jumps[:, 1].copy()
    vals = np.cumsum(jumps)
    return SamplePath(path.times, path.states, vals[:, None], jumps[:, None], path.marks,
                      np.zeros((path.cov.shape[0], 1, 1)), "additive", ("eta_d",), dict(path.meta))


def _log_minus_mean(law: DistributionSpec, label: str) -> float:
    """E[log^-(1 + X)] for X > -1, checked for finiteness at two grid resolutions."""
    if law.is_point():
        return max(-float(np.log1p(law.bounds()[0])), 0.0)
    jl = JumpLaw.of(law)
    f = lambda z: np.maximum(-np.log1p(z[:, 0]), 0.0)
    with np.errstate(divide="ignore"):
        a, b = jl.expect(f, 4096), jl.expect(f, 65536)
    if not (np.isfinite(a) and np.isfinite(b)) or abs(a - b) > 1e-2 * max(1.0, abs(b)):
        raise SpecError(f"E[log^-(1+X)] is undefined or unstable for {law.describe()}", label)
    return float(b)


def abar_minus_xi(spec: RiskModelSpec, x) -> np.ndarray:
    """Abar_{-xi}(x) in terms of r^j, sigma^2_{U^j}, the U-jump cdf and E[log^-(1 + Phi_U)]."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 1):
        raise SpecError("Abar is defined for x >= 1", "x")
    pi = stationary_law(spec.chain)
    q = spec.chain.generator
    out = np.zeros(len(xs))
    for j, s in enumerate(spec.states):
        term = np.full(len(xs), s.interest - 0.5 * s.inv_var)
        for i in range(spec.num_states):
            if i != j and (i, j) in spec.shocks:
                term -= q[i, j] * _log_minus_mean(spec.shocks[(i, j)].U, f"shocks[{i},{j}].U")
        if s.inv_jump_rate > 0:
            law = s.inv_jump_law
            jl = JumpLaw.of(law)
            lo, hi = np.expm1(-1.0), np.expm1(1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                mid = jl.expect(lambda z: np.where((z[:, 0] >= lo) & (z[:, 0] <= hi),
                                                   np.log1p(np.clip(z[:, 0], lo, hi)), 0.0))
            tail_e = float(law.sf(np.array([hi]))[0])
            integ = np.array([tail_integral(jl, 0, 1.0, xv, np.expm1) for xv in xs])
            term = term + s.inv_jump_rate * (mid + tail_e + integ)
        out += pi[j] * term
    return out


def kappa_xi(spec: RiskModelSpec) -> float:
    return kappa(build_xieta_map(spec), 0)


# ------------------------------------------------------------ ruin

@dataclass(frozen=True)
class RuinOutcome:
    ruined: bool
    tau: float | None
    v_tau: float | None
    j_tau: int | None
    censored_at: float | None

    def __post_init__(self):
        if self.ruined and not (self.v_tau is not None and self.v_tau <= 0):
            raise SpecError("ruined outcome needs v_tau <= 0", "v_tau")


class RuinObserver(FunctionalObserver):
    """Tracks int e^{xi_-} d eta and flags the first grid point where it is <= -u,
    for each level of a sorted grid ``us``."""

    def __init__(self, spec: MapSpec, n: int, us: np.ndarray):
        super().__init__(spec, n, sign=1.0, policy=None)
        self.us = np.asarray(us, dtype=float)
        k = len(self.us)
        self.ruined = np.zeros((n, k), dtype=bool)
        self.tau = np.full((n, k), np.nan)
        self.v = np.full((n, k), np.nan)
        self.j = np.full((n, k), -1, dtype=np.int64)

    def step(self, s: Step):
        super().step(s)
        r = s.rows
        hit = (self.integral[r, None] <= -self.us[None, :]) & ~self.ruined[r]
        if hit.any():
            rr, kk = np.nonzero(hit)
            rows = r[rr]
            self.ruined[rows, kk] = True
            self.tau[rows, kk] = s.t1[rr]
            self.v[rows, kk] = np.exp(-self.zeta[rows]) * (self.us[kk] + self.integral[rows])
            self.j[rows, kk] = s.new_state[rr]
        return self.ruined[r].all(axis=1)


@dataclass(frozen=True)
class RuinSample:
    us: np.ndarray
    ruined: np.ndarray  # (n, len(us))
    tau: np.ndarray
    v_tau: np.ndarray
    j_tau: np.ndarray
    horizon: float
    h: float

    def outcome(self, i: int, k: int = 0) -> RuinOutcome:
        if self.ruined[i, k]:
            return RuinOutcome(True, float(self.tau[i, k]), float(min(self.v_tau[i, k], 0.0)),
                               int(self.j_tau[i, k]), None)
        return RuinOutcome(False, None, None, None, self.horizon)


def simulate_ruin_paths(spec: RiskModelSpec, u, j0: int, n: int, T: float, h: float, seed: int,
                        threads: int | None = None, offset: int = 0) -> RuinSample:
    us = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any(us <= 0):
        raise SpecError("initial capital u must be > 0", "u")
    if not 0 <= j0 < spec.num_states:
        raise SpecError(f"state {j0} out of range", "j0")
    xe = build_xieta_map(spec)

    def work(ids):
        obs = RuinObserver(xe, len(ids), us)
        run_batch(xe, ids, seed, T, h, obs, micro="brownian", initial_states=np.full(len(ids), j0))
        return obs

    parts = map_chunks(work, n, threads, offset=offset)
    cat = lambda name: np.concatenate([getattr(p, name) for p in parts])
    return RuinSample(us, cat("ruined"), cat("tau"), cat("v"), cat("j"), float(T), float(h))


def simulate_ruin(spec: RiskModelSpec, u: float, j0: int, T: float, h: float, seed: int,
                  path: int = 0) -> RuinOutcome:
    return simulate_ruin_paths(spec, u, j0, 1, T, h, seed, threads=1, offset=path).outcome(0)


def _ruin_estimate(rs: RuinSample, k: int) -> MonteCarloEstimate:
    n = rs.ruined.shape[0]
    ruined = rs.ruined[:, k]
    nr = int(ruined.sum())
    late = int(np.sum(ruined & (rs.tau[:, k] > 0.9 * rs.horizon)))
    late_frac = late / nr if nr else 0.0
    return proportion_estimate(nr, n, u=float(rs.us[k]), T=rs.horizon, h=rs.h, n_ruined=nr,
                               late_ruin_fraction=late_frac, hazard_ok=bool(late_frac < 0.01))


def ruin_probability(spec: RiskModelSpec, u, j0: int, N: int, T: float, h: float = 0.01, seed: int = 0,
                     threads: int | None = None, refine_h: bool = False,
                     max_halvings: int = 4) -> MonteCarloEstimate | list[MonteCarloEstimate]:
    """Fraction of N paths ruined before T (binomial SE).

    Metadata reports T, h, the number of ruins and the decaying-hazard
    diagnostic (ruins in the last 10% of [0, T] must be < 1% of all ruins).
    With ``refine_h`` h is halved until the estimate moves by less than 1 SE.
    """
    if N < MIN_RUIN_PATHS:
        raise SpecError(f"need N >= {MIN_RUIN_PATHS}", "N")
    scalar = np.ndim(u) == 0
    rs = simulate_ruin_paths(spec, u, j0, N, T, h, seed, threads)
    est = [_ruin_estimate(rs, k) for k in range(len(rs.us))]
    if refine_h:
        hh = h
        for _ in range(max_halvings):
            hh = hh / 2
            rs2 = simulate_ruin_paths(spec, u, j0, N, T, hh, seed, threads)
            est2 = [_ruin_estimate(rs2, k) for k in range(len(rs2.us))]
            moved = any(abs(a.estimate - b.estimate) >= b.se for a, b in zip(est, est2))
            est = est2
            if not moved:
                break
        est = [MonteCarloEstimate(e.estimate, e.se, e.n, dict(e.meta, h_refined=True)) for e in est]
    return est[0] if scalar else est


def ruin_surface(spec: RiskModelSpec, us, N: int, T: float, h: float, seed: int,
                 threads: int | None = None) -> list[dict[str, Any]]:
    """Rows (u, j, psi, se, n_ruined, hazard_ok) for every u and starting state j."""
    rows = []
    for j in range(spec.num_states):
        for e in ruin_probability(spec, list(us), j, N, T, h, derive_seed(seed, j), threads):
            rows.append({"u": e.meta["u"], "j": j, "psi": e.estimate, "se": e.se,
                         "n_ruined": e.meta["n_ruined"], "hazard_ok": e.meta["hazard_ok"]})
    return rows


# ------------------------------------------------------------ H and the ruin identity

@dataclass(frozen=True)
class EmpiricalCdf:
    state: int
    samples: np.ndarray  # sorted
    nonconverged_fraction: float
    dkw: float

    def __call__(self, x) -> np.ndarray:
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="right") / len(self.samples)


def forward_functional_spec(spec: RiskModelSpec) -> MapSpec:
    """(-xi, eta): its functional int e^{xi_-} d eta is the one whose limit defines H."""
    return map_linear(build_xieta_map(spec), np.diag([-1.0, 1.0]))


def estimate_H(spec: RiskModelSpec, j: int, N: int, policy: TruncationPolicy | None = None, seed: int = 0,
               h: float = 0.01, threads: int | None = None) -> EmpiricalCdf:
    """Empirical cdf of int_0^infty e^{xi_-} d eta under P_j, with its DKW band half-width."""
    policy = policy or TruncationPolicy()
    fs = exp_functional_samples(forward_functional_spec(spec), N, policy, seed, h, threads,
                                initial_states=np.full(N, j))
    if fs.nonconverged_fraction > MAX_NONCONVERGED:
        raise RefusalError(f"H_{j}: {fs.nonconverged_fraction:.1%} of truncated functionals did not converge "
                           f"by t_max={policy.t_max} (limit {MAX_NONCONVERGED:.0%})")
    return EmpiricalCdf(j, np.sort(fs.values), fs.nonconverged_fraction, dkw_epsilon(N))


@dataclass(frozen=True)
class RuinTheoremCheck:
    lhs: MonteCarloEstimate
    rhs: MonteCarloEstimate
    combined_se: float
    verdict: str  # pass | fail | inconclusive
    n_ruined_lhs: int
    n_ruined_rhs: int
    message: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict[str, Any]:
        return {"lhs": self.lhs.to_json(), "rhs": self.rhs.to_json(), "combined_se": self.combined_se,
                "verdict": self.verdict, "n_ruined_lhs": self.n_ruined_lhs,
                "n_ruined_rhs": self.n_ruined_rhs, "message": self.message}


def verify_ruin_theorem(spec: RiskModelSpec, u: float, j: int, N: int, T: float, h: float = 0.01,
                        seed: int = 0, N_H: int | None = None, policy: TruncationPolicy | None = None,
                        threads: int | None = None, n_boot: int = 300) -> RuinTheoremCheck:
    """Psi_j(u) against H_j(-u) / E_j[H_{J_tau}(-V_tau) | tau < T].

    The left side, the conditional ruin sample of the right side and the H
    samples come from three disjoint seed streams; the right side's SE is a
    bootstrap over both the H samples and the ruin sample.
    """
    N_H = N_H or N
    lhs = ruin_probability(spec, u, j, N, T, h, derive_seed(seed, 1), threads)
    rs = simulate_ruin_paths(spec, u, j, N, T, h, derive_seed(seed, 2), threads)
    ok = rs.ruined[:, 0]
    vt, jt = np.minimum(rs.v_tau[ok, 0], 0.0), rs.j_tau[ok, 0]
    n_l, n_r = int(lhs.meta["n_ruined"]), int(ok.sum())
    if n_l < MIN_RUINED or n_r < MIN_RUINED:
        dummy = MonteCarloEstimate.from_mean_se(float("nan"), float("nan"), 0)
        return RuinTheoremCheck(lhs, dummy, float("nan"), "inconclusive", n_l, n_r,
                                f"fewer than {MIN_RUINED} ruined paths; raise N or lower u")
    H = [estimate_H(spec, k, N_H, policy, derive_seed(seed, 3, k), h, threads) for k in range(spec.num_states)]

    def ratio(hs, v, js):
        num = np.searchsorted(hs[j], -u, side="right") / len(hs[j])
        den = sum(np.searchsorted(hs[k], -v[js == k], side="right").sum() / len(hs[k])
                  for k in range(len(hs))) / len(v)
        return num / den if den > 0 else float("nan")

    samples = [e.samples for e in H]
    rhs_val = ratio(samples, vt, jt)
    rng = np.random.default_rng(derive_seed(seed, 4))
    boot = []
    for _ in range(n_boot):
        hs = [np.sort(s[rng.integers(0, len(s), len(s))]) for s in samples]
        idx = rng.integers(0, len(vt), len(vt))
        boot.append(ratio(hs, vt[idx], jt[idx]))
    boot = np.asarray(boot)
    rhs = MonteCarloEstimate.from_mean_se(rhs_val, float(np.nanstd(boot, ddof=1)), n_r,
                                          H_j_minus_u=float(H[j](-u)),
                                          nonconverged=[e.nonconverged_fraction for e in H])
    comb = float(np.hypot(lhs.se, rhs.se))
    verdict = "pass" if abs(lhs.estimate - rhs.estimate) <= 3 * comb else "fail"
    return RuinTheoremCheck(lhs, rhs, comb, verdict, n_l, n_r)
