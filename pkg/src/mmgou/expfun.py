"""Exponential functionals of bivariate MAPs, stationarity diagnostics and
sampling of the stationary MMGOU law through the dual MAP."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .distributions import DistributionSpec, JumpLaw, SpecError
from .gou import mmgou_sde
from .mapspec import (MapSpec, TransitionJumpSpec, dual_map, linear_op, map_linear, negate_map,
                      transform_component, xieta_to_UL, xieta_to_xiL)
from .montecarlo import MonteCarloEstimate, mean_estimate
from .paths import CHAIN, Step, map_chunks, run_batch, simulate_map_paths
from .rng import PathStreams, Source, derive_seed
from .sojourn import MIN_EXCURSIONS, conflated_triplet, sample_excursions
from .stochcalc import exp_integral_E, exp_integral_F  # noqa: F401  (re-exported)

VERDICTS = ("stationary_a", "degenerate_b", "divergent", "inconclusive")


class RefusalError(RuntimeError):
    """A Monte Carlo procedure declined to produce a result; the message says why."""


@dataclass(frozen=True)
class TruncationPolicy:
    t_max: float = 1e3
    eps_weight: float = 1e-8
    patience: float = 5.0

    def __post_init__(self):
        if not self.t_max > 0:
            raise SpecError("t_max must be > 0", "policy.t_max")
        if not self.eps_weight > 0:
            raise SpecError("eps_weight must be > 0", "policy.eps_weight")
        if not self.patience >= 0:
            raise SpecError("patience must be >= 0", "policy.patience")

    def to_json(self) -> dict[str, float]:
        return {"t_max": self.t_max, "eps_weight": self.eps_weight, "patience": self.patience}

    @staticmethod
    def from_json(obj: Any, path: str = "policy") -> "TruncationPolicy":
        if obj is None:
            return TruncationPolicy()
        if not isinstance(obj, dict):
            raise SpecError("expected an object", path)
        extra = set(obj) - {"t_max", "eps_weight", "patience"}
        if extra:
            raise SpecError(f"unexpected fields {sorted(extra)}", path)
        try:
            return TruncationPolicy(**{k: float(v) for k, v in obj.items()})
        except (TypeError, ValueError) as e:
            raise SpecError(str(e), path) from None


# ------------------------------------------------------------ streaming functional

def _phi(x: np.ndarray) -> np.ndarray:
    """expm1(x)/x with the removable singularity at 0."""
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        return np.where(np.abs(x) > 1e-12, np.expm1(x) / np.where(x == 0, 1.0, x), 1.0 + 0.5 * x)


class FunctionalObserver:
    """Track zeta_t and I_t = int_(0,t] e^{sign * zeta_{s-}} dchi_s for (zeta, chi).

    Steps in states without a Brownian part are drift-only between events and
    are integrated exactly; Brownian steps use the Itô-Taylor rule; jumps use
    the exact pre-jump weight.  With a ``policy`` (sign=-1) a path stops once
    the weight e^{-zeta} has stayed below ``eps_weight`` for ``patience``.
    """

    def __init__(self, spec: MapSpec, n: int, sign: float = -1.0, policy: TruncationPolicy | None = None):
        self.sign = float(sign)
        self.brown = spec.has_brownian()
        self.sig = np.array([c.cov[0, 1] for c in spec.per_state])
        self.zeta = np.zeros(n)
        self.integral = np.zeros(n)
        self.state = np.zeros(n, dtype=np.int64)
        self.t = np.zeros(n)
        self.policy = policy
        self.below = np.full(n, np.nan)
        self.converged = np.zeros(n, dtype=bool)
        if policy is not None:
            self.log_eps = np.log(policy.eps_weight)

    def start(self, rows, states):
        self.state[rows] = states
        self.j0 = states.copy()

    def step(self, s: Step):
        r, sg = s.rows, self.sign
        dz, dc = s.dcont[:, 0], s.dcont[:, 1]
        z0 = self.zeta[r]
        with np.errstate(over="ignore", invalid="ignore"):
            w = np.exp(sg * z0)
            br = self.brown[s.state]
            ito = dc + 0.5 * sg * (dz * dc - self.sig[s.state] * (s.t1 - s.t0))
            cont = np.where(br, ito, dc * _phi(sg * dz))
            zl = z0 + dz
            jump_part = np.where(s.jump[:, 1] != 0, np.exp(sg * zl) * s.jump[:, 1], 0.0)
            self.integral[r] += w * cont + jump_part
        self.zeta[r] = zl + s.jump[:, 0]
        self.state[r] = s.new_state
        self.t[r] = s.t1
        if self.policy is None:
            return None
        low = -self.zeta[r] < self.log_eps
        # first time below the threshold: zeta is linear in t on the continuous part of a step
        # (exactly so for drift-only steps, which may be long), so interpolate the crossing
        thr = -self.log_eps
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where((zl > thr) & (z0 <= thr) & (dz > 0), (thr - z0) / dz, 1.0)
        cross = s.t0 + np.clip(frac, 0.0, 1.0) * (s.t1 - s.t0)
        b = self.below[r]
        b = np.where(low, np.where(np.isnan(b), cross, b), np.nan)
        self.below[r] = b
        stop = low & (s.t1 - b >= self.policy.patience)
        self.converged[r[stop]] = True
        return stop


def _run_functional(spec: MapSpec, n: int, seed: int, horizon: float, h: float, sign: float,
                    policy: TruncationPolicy | None, threads: int | None,
                    initial_states: np.ndarray | None = None, offset: int = 0):
    if spec.dim != 2:
        raise SpecError("bivariate MAP required", "model")

    def work(ids):
        obs = FunctionalObserver(spec, len(ids), sign, policy)
        init = None if initial_states is None else np.asarray(initial_states)[ids - offset]
        run_batch(spec, ids, seed, horizon, h, obs, micro="brownian", initial_states=init)
        return obs

    return map_chunks(work, n, threads, offset=offset)


@dataclass(frozen=True)
class FunctionalSample:
    values: np.ndarray
    converged: np.ndarray
    initial_states: np.ndarray
    stop_times: np.ndarray

    @property
    def nonconverged_fraction(self) -> float:
        return float(1.0 - self.converged.mean()) if len(self.converged) else 0.0


def exp_functional_samples(spec: MapSpec, n: int, policy: TruncationPolicy | None = None,
                           seed: int = 0, h: float = 0.01, threads: int | None = None,
                           initial_states: np.ndarray | None = None) -> FunctionalSample:
    """``n`` truncated samples of int_0^infty e^{-zeta_{s-}} dchi_s for spec = (zeta, chi)."""
    policy = policy or TruncationPolicy()
    parts = _run_functional(spec, n, seed, policy.t_max, h, -1.0, policy, threads, initial_states)
    return FunctionalSample(np.concatenate([p.integral for p in parts]),
                            np.concatenate([p.converged for p in parts]),
                            np.concatenate([p.j0 for p in parts]),
                            np.concatenate([p.t for p in parts]))


def exp_functional_sample(spec: MapSpec, policy: TruncationPolicy | None = None, seed: int = 0,
                          h: float = 0.01, path: int = 0) -> tuple[float, bool]:
    """One truncated exponential functional: (value, converged flag)."""
    policy = policy or TruncationPolicy()
    obs = FunctionalObserver(spec, 1, -1.0, policy)
    run_batch(spec, np.array([path]), seed, policy.t_max, h, obs, micro="brownian")
    return float(obs.integral[0]), bool(obs.converged[0])


def functional_at(spec: MapSpec, t: float, n: int, seed: int, kind: str = "E", h: float = 0.01,
                  threads: int | None = None, initial_states: np.ndarray | None = None,
                  v0: np.ndarray | float | None = None) -> np.ndarray:
    """Values at fixed time t for ``n`` paths of spec = (zeta, chi).

    ``kind="E"``: int e^{-zeta_-} dchi.  ``kind="F"``: e^{-zeta_t} int e^{zeta_-} dchi.
    ``kind="V"``: e^{-zeta_t} (v0 + int e^{zeta_-} dchi), the MMGOU value from V_0 = v0.
    """
    if kind not in ("E", "F", "V"):
        raise SpecError(f"unknown functional {kind!r}", "kind")
    sign = -1.0 if kind == "E" else 1.0
    parts = _run_functional(spec, n, seed, t, h, sign, None, threads, initial_states)
    integral = np.concatenate([p.integral for p in parts])
    if kind == "E":
        return integral
    zeta = np.concatenate([p.zeta for p in parts])
    base = 0.0 if v0 is None else np.asarray(v0, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.exp(-zeta) * (base + integral)


# ------------------------------------------------------------ means and tails

def kappa(spec: MapSpec, component: int = 0) -> float:
    """sum_j pi_j E[X^j_1] + sum_{i != j} pi_i q_ij E[Phi^{ij}] for one coordinate."""
    pi = spec.pi()
    q = spec.chain.generator
    k = 0.0
    for j, c in enumerate(spec.per_state):
        k += pi[j] * float(c.mean_increment()[component])
    for (i, j), law in spec.transition_jumps.laws.items():
        k += pi[i] * q[i, j] * float(law.check_mean(f"transition_jumps[{i},{j}]")[component])
    return float(k)


def _levy_A_part(spec: MapSpec, j: int, xs: np.ndarray, component: int) -> np.ndarray:
    c = spec.per_state[j]
    out = np.full(len(xs), float(c.gamma()[component]))
    for s in c.active_jumps():
        pts, w = s.law._grid()
        z = pts[:, component]
        over1 = float(np.sum(w * (z > 1)))
        integ = np.array([np.sum(w * np.clip(np.minimum(z, x) - 1.0, 0.0, None)) for x in xs])
        out += s.rate * (over1 + integ)
    return out


def _excursion_A_terms(exc: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Per-sample 1{e > 1} + int_1^x 1{e > y} dy, shape (len(xs), len(exc))."""
    return (exc > 1)[None, :] + np.clip(np.minimum(exc[None, :], xs[:, None]) - 1.0, 0.0, None)


@dataclass(frozen=True)
class AxiEstimate:
    x: np.ndarray
    value: np.ndarray
    se: np.ndarray


def abar_Axi(spec: MapSpec, j: int, x, mc: int, seed: int, component: int = 0,
             excursions: np.ndarray | None = None, threads: int | None = None) -> AxiEstimate:
    """A^j_xi(x): Lévy part of xi^j plus -q_jj times the excursion-increment part."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 1):
        raise SpecError("A_xi is defined for x >= 1", "x")
    levy = _levy_A_part(spec, j, xs, component)
    q = spec.chain.exit_rate(j)
    if q == 0:
        return AxiEstimate(xs, levy, np.zeros(len(xs)))
    if excursions is None:
        if mc < MIN_EXCURSIONS:
            raise SpecError(f"need at least {MIN_EXCURSIONS} excursions, got {mc}", "mc")
        excursions = sample_excursions(spec, j, mc, seed, threads=threads)["increment"][:, component]
    terms = _excursion_A_terms(np.asarray(excursions), xs)
    n = terms.shape[1]
    mean = terms.mean(axis=1)
    se = terms.std(axis=1, ddof=1) / np.sqrt(n) if n > 1 else np.full(len(xs), np.inf)
    return AxiEstimate(xs, levy + q * mean, q * se)


# ------------------------------------------------------------ I^j

def hill_index(x: np.ndarray, k: int | None = None) -> float:
    """Hill estimate of the tail index of positive data (inf when the top is flat)."""
    x = np.sort(np.asarray(x, dtype=float)[np.asarray(x) > 0])[::-1]
    if len(x) < 20:
        return float("inf")
    k = k or max(10, int(np.sqrt(len(x))))
    k = min(k, len(x) - 1)
    logs = np.log(x[:k]) - np.log(x[k])
    m = logs.mean()
    return float("inf") if m <= 0 else float(1.0 / m)


@dataclass(frozen=True)
class IjEstimate:
    state: int
    estimate: float
    se: float
    verdict: str  # finite | infinite | inconclusive
    tail_index: float
    n_terms: int
    reason: str = ""

    def to_json(self) -> dict[str, Any]:
        return {"state": self.state, "estimate": self.estimate, "se": self.se, "verdict": self.verdict,
                "tail_index": self.tail_index, "n_terms": self.n_terms, "reason": self.reason}


FINITE_INDEX = 1.5
INFINITE_INDEX = 1.0


def Ij_estimate(spec_xiL: MapSpec, j: int, mc: int, seed: int, h: float = 0.01,
                threads: int | None = None) -> IjEstimate:
    """Monte Carlo estimate of I^j = int_{|q|>e} log|q| / A^j_xi(log|q|) |d nubar^j_L(q)|.

    nubar^j_L mixes the Lévy jumps of L^j (rate lambda), the excursion
    increments of L and the excursion-weighted integrals of L (rate -q_jj each);
    each part is sampled ``mc`` times.  The verdict uses the Hill index of the
    integrand terms: >= 1.5 finite, <= 1 infinite, otherwise inconclusive.
    """
    if mc < MIN_EXCURSIONS:
        raise SpecError(f"need at least {MIN_EXCURSIONS} samples, got {mc}", "mc")
    c = spec_xiL.per_state[j]
    parts: list[tuple[float, np.ndarray]] = []  # (rate, log|q|) per mixture part
    for k, s in enumerate(c.active_jumps()):
        u = PathStreams(derive_seed(seed, 7, j, k), np.arange(mc)).uniform(Source.AUX, None, s.law.n_uniforms)
        parts.append((s.rate, s.law.log_abs(u, 1)))
    q = spec_xiL.chain.exit_rate(j)
    xi_exc = None
    if q > 0:
        ex = sample_excursions(spec_xiL, j, mc, derive_seed(seed, 8, j), h=h, weighted=True, threads=threads)
        with np.errstate(divide="ignore"):
            parts.append((q, np.log(np.abs(ex["increment"][:, 1]))))
            parts.append((q, np.log(np.abs(ex["weighted"]))))
        xi_exc = ex["increment"][:, 0]
    xmax = max([float(np.nanmax(lq)) for _, lq in parts if lq.size] + [1.0])
    if not np.isfinite(xmax):
        return IjEstimate(j, float("nan"), float("nan"), "inconclusive", float("nan"), 0,
                          "non-finite mixture samples")
    grid = np.unique(np.concatenate([np.linspace(1.0, min(xmax, 50.0), 400),
                                     np.geomspace(1.0, max(xmax, 1.0), 200)]))
    A = abar_Axi(spec_xiL, j, grid, mc, seed, 0, excursions=xi_exc).value
    if np.any(A <= 0):
        return IjEstimate(j, float("nan"), float("nan"), "inconclusive", float("nan"), 0,
                          "A_xi is nonpositive at required arguments")
    total, var, terms_all = 0.0, 0.0, []
    for rate, lq in parts:
        big = lq > 1.0
        f = np.zeros(len(lq))
        f[big] = lq[big] / np.interp(lq[big], grid, A)
        total += rate * f.mean()
        var += rate ** 2 * f.var(ddof=1) / len(f)
        terms_all.append(f[big])
    terms = np.concatenate(terms_all) if terms_all else np.zeros(0)
    alpha = hill_index(terms)
    if alpha >= FINITE_INDEX:
        verdict = "finite"
    elif alpha <= INFINITE_INDEX:
        verdict = "infinite"
    else:
        verdict = "inconclusive"
    return IjEstimate(j, float(total), float(np.sqrt(var)), verdict, alpha, len(terms))


# ------------------------------------------------------------ degeneracy

def degenerate_spec(U: MapSpec, c) -> MapSpec:
    """The ((U, L), J) MAP with L = -int c_{J-} dU + sum of the jumps of c_J,
    for which V_t = c_{J_t} solves dV = V_- dU + dL from V_0 = c_{J_0}."""
    if U.dim != 1:
        raise SpecError("a univariate U is required", "model")
    c = np.asarray(c, dtype=float)
    if c.shape != (U.num_states,):
        raise SpecError(f"need one constant per state, got {c.shape}", "c")
    per = tuple(transform_component(comp, linear_op([[1.0], [-c[j]]])) for j, comp in enumerate(U.per_state))
    laws = {}
    q = U.chain.generator
    for i in range(U.num_states):
        for j in range(U.num_states):
            if i == j or q[i, j] <= 0:
                continue
            base = U.transition_jumps.get(i, j) or JumpLaw.of(DistributionSpec.point(0.0))
            laws[(i, j)] = base.then({"op": "affine", "matrix": [[1.0], [-c[i]]], "offset": [0.0, c[j] - c[i]]})
    return MapSpec(U.chain, per, TransitionJumpSpec(laws))


def estimate_c(spec_xieta: MapSpec, T: float = 20.0, h: float = 0.01, seed: int = 0) -> np.ndarray | None:
    """Candidate c_j with L^j = -c_j U^j on sojourns in j (per-state median of -dL/dU),
    states without usable increments are filled from transitions via
    c_j = c_i (1 + dU) + dL.  Returns None when some c_j stays undetermined."""
    UL = xieta_to_UL(spec_xieta)
    m = UL.num_states
    with np.errstate(all="ignore"):
        path = simulate_map_paths(UL, 1, T, h, seed, threads=1, initial_states=np.array([0]))[0]
        du = path.continuous_increments()
    st = path.step_states()
    c = np.full(m, np.nan)
    for j in range(m):
        sel = (st == j) & (np.abs(du[:, 0]) > 1e-300)
        if sel.any():
            with np.errstate(all="ignore"):
                c[j] = float(np.median(-du[sel, 1] / du[sel, 0]))
    ks = np.flatnonzero(path.marks == CHAIN)
    for _ in range(m):
        for k in ks:
            i, j = path.states[k - 1], path.states[k]
            if np.isnan(c[j]) and not np.isnan(c[i]):
                c[j] = c[i] * (1.0 + path.jumps[k, 0]) + path.jumps[k, 1]
    return None if np.any(np.isnan(c)) else c


@dataclass(frozen=True)
class DegeneracyResult:
    passed: bool
    sup_deviation: float
    tolerance: float
    c: np.ndarray

    def to_json(self) -> dict[str, Any]:
        return {"passed": self.passed, "sup_deviation": self.sup_deviation, "tolerance": self.tolerance,
                "c": self.c.tolist()}


def degeneracy_test(spec_xieta: MapSpec, c: np.ndarray | None = None, mc: int = 20, T: float = 20.0,
                    h: float = 0.01, seed: int = 0, C: float = 1.0) -> DegeneracyResult:
    """Pass iff sup_t |V_t - c_{J_t}| < C*h on ``mc`` paths with V_0 = c_{J_0}."""
    if c is None:
        c = estimate_c(spec_xieta, T, h, seed)
        if c is None:
            return DegeneracyResult(False, float("inf"), C * h, np.full(spec_xieta.num_states, np.nan))
    c = np.asarray(c, dtype=float)
    UL = xieta_to_UL(spec_xieta)
    sup = 0.0
    with np.errstate(all="ignore"):
        for p in simulate_map_paths(UL, mc, T, h, seed + 1):
            v = mmgou_sde(p, c[p.states[0]], scheme="euler").v
            dev = np.abs(v - c[p.states])
            sup = max(sup, float(np.max(np.where(np.isnan(dev), np.inf, dev))))
    return DegeneracyResult(bool(sup < C * h), sup, C * h, c)


# ------------------------------------------------------------ classification

@dataclass(frozen=True)
class StationarityReport:
    kappa: float | None
    drift_check: list[dict[str, Any]]
    Ij_estimate: list[IjEstimate]
    verdict: str
    c_estimates: list[float] | None = None
    degeneracy: DegeneracyResult | None = None
    divergence: dict[str, Any] | None = None
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict,
            "kappa": self.kappa,
            "drift_check": self.drift_check,
            "Ij_estimate": [e.to_json() for e in self.Ij_estimate],
            "c_estimates": self.c_estimates,
            "degeneracy": None if self.degeneracy is None else self.degeneracy.to_json(),
            "divergence": self.divergence,
            "notes": self.notes,
        }


def divergence_check(spec_xieta: MapSpec, n: int = 500, seed: int = 0, h: float = 0.01,
                     times=(5.0, 20.0, 80.0), K=(10.0, 100.0, 1000.0),
                     threads: int | None = None) -> dict[str, Any]:
    """Empirical P(|F(t)| > K) over increasing t; confirmed when it grows towards 1 for each K."""
    sp = spec_xieta.with_initial(spec_xieta.pi())
    frac = []
    for t in times:
        f = np.abs(functional_at(sp, t, n, seed, "F", h, threads))
        f = np.where(np.isnan(f), np.inf, f)
        frac.append([float(np.mean(f > k)) for k in K])
    frac = np.array(frac)
    confirmed = bool(np.all(np.diff(frac, axis=0) >= -0.05) and np.all(frac[-1] >= 0.9))
    return {"times": list(times), "K": list(K), "fraction": frac.tolist(), "confirmed": confirmed}


def classify_stationarity(spec_xieta: MapSpec, mc: int = 2000, seed: int = 0, h: float = 0.01,
                          threads: int | None = None, c: np.ndarray | None = None) -> StationarityReport:
    notes: list[str] = []
    if spec_xieta.dim != 2:
        raise SpecError("bivariate (xi, eta) MAP required", "model")
    xiL = xieta_to_xiL(spec_xieta)
    try:
        k = kappa(spec_xieta, 0)
    except SpecError as e:
        k = None
        notes.append(f"kappa undefined: {e}")
    drift = []
    signs = []
    for j in range(spec_xieta.num_states):
        tri = conflated_triplet(xiL, j, max(mc, MIN_EXCURSIONS), seed + 101 * j, component=0, threads=threads)
        try:
            est = tri.mean
            sign = 1 if est.estimate > 3 * est.se else (-1 if est.estimate < -3 * est.se else 0)
            drift.append({"state": j, "mean": est.estimate, "se": est.se, "sign": sign})
        except SpecError as e:
            sign = 0
            drift.append({"state": j, "mean": None, "se": None, "sign": 0, "error": str(e)})
        signs.append(sign)
    degen = degeneracy_test(spec_xieta, c, seed=seed, h=h)
    if degen.passed:
        return StationarityReport(k, drift, [], "degenerate_b", degen.c.tolist(), degen, None, notes)
    ij: list[IjEstimate] = []
    verdict = "inconclusive"
    if all(s > 0 for s in signs):
        for j in range(spec_xieta.num_states):
            ij.append(Ij_estimate(xiL, j, mc, seed + 211 * j, h, threads))
        if any(e.verdict == "finite" for e in ij):
            verdict = "stationary_a"
        elif all(e.verdict == "infinite" for e in ij):
            verdict = "divergent"
    elif all(s < 0 for s in signs):
        verdict = "divergent"
    elif any(s > 0 for s in signs) and any(s < 0 for s in signs):
        notes.append("conflicting conflated-mean signs across states")
    div = None
    if verdict == "divergent":
        div = divergence_check(spec_xieta, seed=seed, h=h, threads=threads)
        if not div["confirmed"]:
            notes.append("divergence not confirmed by |F(t)| growth")
            verdict = "inconclusive"
    return StationarityReport(k, drift, ij, verdict, None, degen, div, notes)


# ------------------------------------------------------------ stationary law

@dataclass(frozen=True)
class StationarySample:
    values: np.ndarray
    states: np.ndarray  # J*_0 = J_0 of the stationary pair (V_0, J_0)
    nonconverged_fraction: float
    policy: TruncationPolicy

    def to_csv(self) -> str:
        lines = ["v,state"] + [f"{float(v)!r},{int(j)}" for v, j in zip(self.values, self.states)]
        return "\n".join(lines) + "\n"


def stationary_functional_spec(spec_xieta: MapSpec) -> MapSpec:
    """(-xi*, -L*) under P*_pi: the MAP whose functional int e^{xi*} d(-L*) is V_infty."""
    return negate_map(dual_map(xieta_to_xiL(spec_xieta)))


def sample_stationary(spec_xieta: MapSpec, n: int, policy: TruncationPolicy | None = None, seed: int = 0,
                      h: float = 0.01, threads: int | None = None,
                      report: StationarityReport | None = None, check: bool = True,
                      mc: int = 2000) -> StationarySample:
    """Samples of V_infty with their J_0; refused unless the verdict is stationary_a."""
    if check:
        report = report or classify_stationarity(spec_xieta, mc, seed, h, threads)
        if report.verdict != "stationary_a":
            raise RefusalError(f"stationary sampling needs verdict stationary_a, got {report.verdict}")
    policy = policy or TruncationPolicy()
    sp = stationary_functional_spec(spec_xieta)
    fs = exp_functional_samples(sp, n, policy, seed, h, threads)
    return StationarySample(fs.values, fs.initial_states, fs.nonconverged_fraction, policy)


def conflated_mean(spec: MapSpec, j: int, mc: int, seed: int, component: int = 0,
                   threads: int | None = None) -> MonteCarloEstimate:
    one = spec if spec.dim == 1 else map_linear(spec, np.eye(spec.dim)[[component]])
    return conflated_triplet(one, j, mc, seed, threads=threads).mean


__all__ = [
    "TruncationPolicy", "StationarityReport", "RefusalError", "exp_functional_sample",
    "exp_functional_samples", "functional_at", "kappa", "abar_Axi", "Ij_estimate", "classify_stationarity",
    "degeneracy_test", "sample_stationary", "exp_integral_E", "exp_integral_F", "mean_estimate",
]
