"""Generative description of (bivariate) Markov additive processes."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np

from .chain import ChainSpec, stationary_law
from .distributions import DistributionSpec, JumpLaw, SpecError, as_jump_law

PSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class JumpSource:
    """Compound-Poisson jump source: ``rate`` per unit time, sizes from ``law``."""

    rate: float
    law: JumpLaw

    def __post_init__(self):
        if not (np.isfinite(self.rate) and self.rate >= 0):
            raise SpecError("jump rate must be finite and >= 0", "rate")
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "law", as_jump_law(self.law))

    def __eq__(self, other):
        return isinstance(other, JumpSource) and self.rate == other.rate and self.law == other.law


def _root(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    if not np.any(cov):
        return np.zeros((d, d))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0, None))


@dataclass(frozen=True, eq=False)
class LevyComponentSpec:
    """Per-state Lévy part: X_t = drift*t + loading @ W_t + compound Poisson.

    ``drift`` is the finite-variation drift (jumps are not compensated).
    The Brownian covariance is ``cov = loading @ loading.T``.  Passing only
    ``cov`` picks a Cholesky root; passing ``loading`` lets linear transforms
    of a component keep sharing the same Brownian motion.
    """

    drift: np.ndarray
    cov: np.ndarray | None = None
    jumps: tuple[JumpSource, ...] = ()
    loading: np.ndarray | None = None

    def __post_init__(self):
        drift = np.atleast_1d(np.array(self.drift, dtype=float))
        d = drift.shape[0]
        if drift.ndim != 1 or d not in (1, 2) or not np.all(np.isfinite(drift)):
            raise SpecError("drift must be a finite vector of dimension 1 or 2", "drift")
        if self.loading is not None:
            load = np.array(self.loading, dtype=float).reshape(d, -1)
            cov = load @ load.T
            if self.cov is not None:
                c0 = np.array(self.cov, dtype=float).reshape(d, d)
                if np.abs(c0 - cov).max() > 1e-12:
                    raise SpecError("cov does not match loading @ loading.T", "cov")
        else:
            cov = np.zeros((d, d)) if self.cov is None else np.array(self.cov, dtype=float).reshape(d, d)
            if np.abs(cov - cov.T).max() > PSD_TOL:
                raise SpecError("cov must be symmetric", "cov")
            cov = 0.5 * (cov + cov.T)
            if np.linalg.eigvalsh(cov).min() < -PSD_TOL:
                raise SpecError("cov must be positive semidefinite", "cov")
            load = _root(cov)
        if load.shape[1] != d:
            pad = np.zeros((d, d))
            pad[:, : min(d, load.shape[1])] = load[:, :d]
            load = pad
        for a in (drift, cov, load):
            a.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "loading", load)
        srcs = tuple(s if isinstance(s, JumpSource) else JumpSource(*s) for s in self.jumps)
        for k, s in enumerate(srcs):
            if s.law.dim != d:
                raise SpecError(f"jump law has dimension {s.law.dim}, expected {d}",
                                f"jumps[{k}].law")
        object.__setattr__(self, "jumps", srcs)

    @property
    def dim(self) -> int:
        return self.drift.shape[0]

    @property
    def jump_rate(self) -> float:
        return float(sum(s.rate for s in self.jumps if s.rate > 0))

    def active_jumps(self) -> tuple[JumpSource, ...]:
        return tuple(s for s in self.jumps if s.rate > 0)

    def has_brownian(self) -> bool:
        return bool(np.any(self.loading))

    def mean_increment(self) -> np.ndarray:
        """E[X^j_1] = drift + sum of rate * E[jump]."""
        m = self.drift.astype(float).copy()
        for k, s in enumerate(self.active_jumps()):
            m = m + s.rate * s.law.check_mean(f"jumps[{k}].law")
        return m

    def gamma(self) -> np.ndarray:
        """Drift in the truncation convention: drift + rate*E[jump; |jump| <= 1] per coordinate."""
        g = self.drift.astype(float).copy()
        for s in self.active_jumps():
            for i in range(self.dim):
                g[i] += s.rate * s.law.expect(lambda z, i=i: np.where(np.abs(z[:, i]) <= 1, z[:, i], 0.0))
        return g

    def tail(self, i: int, x: float) -> float:
        """nu((x, inf)) for coordinate i."""
        return float(sum(s.rate * s.law.tail(i, x) for s in self.active_jumps()))

    def component(self, i: int) -> "LevyComponentSpec":
        return transform_component(self, linear_op(np.eye(self.dim)[[i]]))

    def __eq__(self, other):
        return (isinstance(other, LevyComponentSpec) and np.array_equal(self.drift, other.drift)
                and np.allclose(self.cov, other.cov, atol=1e-14) and self.jumps == other.jumps)

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"drift": self.drift.tolist(), "loading": self.loading.tolist()}
        out["jumps"] = [{"rate": s.rate, "law": s.law.to_json()} for s in self.jumps]
        return out

    @staticmethod
    def from_json(obj: Any, path: str) -> "LevyComponentSpec":
        if not isinstance(obj, dict):
            raise SpecError("expected an object", path)
        extra = set(obj) - {"drift", "cov", "loading", "jumps", "jump_rate", "jump_law"}
        if extra:
            raise SpecError(f"unexpected fields {sorted(extra)}", path)
        if "drift" not in obj:
            raise SpecError("missing drift", f"{path}.drift")
        jumps = []
        for k, js in enumerate(obj.get("jumps", [])):
            if not isinstance(js, dict) or "rate" not in js or "law" not in js:
                raise SpecError("expected {rate, law}", f"{path}.jumps[{k}]")
            law = JumpLaw.from_json(js["law"], f"{path}.jumps[{k}].law")
            jumps.append(_source(js["rate"], law, f"{path}.jumps[{k}]"))
        if obj.get("jump_rate", 0):
            if "jump_law" not in obj:
                raise SpecError("jump_rate > 0 needs jump_law", f"{path}.jump_law")
            jumps.append(_source(obj["jump_rate"], JumpLaw.from_json(obj["jump_law"], f"{path}.jump_law"),
                                 path))
        try:
            return LevyComponentSpec(obj["drift"], obj.get("cov"), tuple(jumps), obj.get("loading"))
        except SpecError as e:
            raise SpecError(str(e.args[0]).split(": ", 1)[-1], f"{path}.{e.path}") from None
        except (TypeError, ValueError) as e:
            raise SpecError(str(e), path) from None


def _source(rate, law, path):
    try:
        return JumpSource(float(rate), law)
    except (SpecError, TypeError, ValueError) as e:
        raise SpecError(str(e), f"{path}.rate") from None


@dataclass(frozen=True, eq=False)
class TransitionJumpSpec:
    """Laws of the extra jumps Phi^{ij} at chain transitions (default 0)."""

    laws: dict[tuple[int, int], JumpLaw] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "laws", {(int(i), int(j)): as_jump_law(v)
                                          for (i, j), v in self.laws.items()})

    def get(self, i: int, j: int) -> JumpLaw | None:
        return self.laws.get((i, j))

    def __eq__(self, other):
        return isinstance(other, TransitionJumpSpec) and self.laws == other.laws


@dataclass(frozen=True, eq=False)
class MapSpec:
    chain: ChainSpec
    per_state: tuple[LevyComponentSpec, ...]
    transition_jumps: TransitionJumpSpec = field(default_factory=TransitionJumpSpec)

    def __post_init__(self):
        ps = tuple(self.per_state)
        object.__setattr__(self, "per_state", ps)
        m = self.chain.num_states
        if len(ps) != m:
            raise SpecError(f"need {m} per-state components, got {len(ps)}", "per_state")
        d = ps[0].dim
        for j, c in enumerate(ps):
            if c.dim != d:
                raise SpecError(f"state {j} has dimension {c.dim}, expected {d}", f"per_state[{j}]")
        q = self.chain.generator
        for (i, j), law in self.transition_jumps.laws.items():
            if not (0 <= i < m and 0 <= j < m) or i == j:
                raise SpecError(f"invalid transition pair ({i},{j})", "transition_jumps")
            if q[i, j] <= 0:
                raise SpecError(f"law declared for ({i},{j}) but q_ij = 0",
                                f"transition_jumps[{i},{j}]")
            if law.dim != d:
                raise SpecError(f"law has dimension {law.dim}, expected {d}",
                                f"transition_jumps[{i},{j}]")

    @property
    def dim(self) -> int:
        return self.per_state[0].dim

    @property
    def num_states(self) -> int:
        return self.chain.num_states

    def pi(self) -> np.ndarray:
        return stationary_law(self.chain)

    def has_brownian(self) -> np.ndarray:
        return np.array([c.has_brownian() for c in self.per_state])

    def max_uniforms(self) -> int:
        laws = [s.law for c in self.per_state for s in c.jumps]
        laws += list(self.transition_jumps.laws.values())
        return max([2] + [law.n_uniforms for law in laws])

    def with_initial(self, initial) -> "MapSpec":
        return replace(self, chain=self.chain.with_initial(initial))

    def __eq__(self, other):
        return (isinstance(other, MapSpec) and self.chain == other.chain
                and self.per_state == other.per_state
                and self.transition_jumps == other.transition_jumps)

    def to_json(self) -> dict[str, Any]:
        return {
            "type": "map",
            "dim": self.dim,
            "chain": self.chain.to_json(),
            "states": [c.to_json() for c in self.per_state],
            "transition_jumps": [
                {"from": i, "to": j, "law": law.to_json()}
                for (i, j), law in sorted(self.transition_jumps.laws.items())
            ],
        }

    @staticmethod
    def from_json(obj: Any, path: str = "model") -> "MapSpec":
        if not isinstance(obj, dict):
            raise SpecError("expected an object", path)
        chain = ChainSpec.from_json(obj.get("chain"), f"{path}.chain")
        states = obj.get("states")
        if not isinstance(states, list):
            raise SpecError("expected a list of per-state components", f"{path}.states")
        per = tuple(LevyComponentSpec.from_json(s, f"{path}.states[{k}]") for k, s in enumerate(states))
        if "dim" in obj and per and per[0].dim != obj["dim"]:
            raise SpecError(f"dim {obj['dim']} does not match components", f"{path}.dim")
        laws = {}
        for k, tj in enumerate(obj.get("transition_jumps", [])):
            p = f"{path}.transition_jumps[{k}]"
            if not isinstance(tj, dict) or not {"from", "to", "law"} <= set(tj):
                raise SpecError("expected {from, to, law}", p)
            laws[(int(tj["from"]), int(tj["to"]))] = JumpLaw.from_json(tj["law"], f"{p}.law")
        try:
            return MapSpec(chain, per, TransitionJumpSpec(laws))
        except SpecError as e:
            raise SpecError(str(e.args[0]).split(": ", 1)[-1], f"{path}.{e.path}") from None


# ------------------------------------------------------------- transforms

def linear_op(matrix) -> dict:
    return {"op": "linear", "matrix": np.asarray(matrix, dtype=float).tolist()}


def transform_component(c: LevyComponentSpec, op: dict) -> LevyComponentSpec:
    """Apply a linear/affine op (affine offset only shifts jumps) to a component."""
    m = np.asarray(op["matrix"], dtype=float)
    lin = {"op": "linear", "matrix": m.tolist()}
    return LevyComponentSpec(
        m @ c.drift, None,
        tuple(JumpSource(s.rate, s.law.then(lin)) for s in c.jumps),
        m @ c.loading,
    )


def map_linear(spec: MapSpec, matrix) -> MapSpec:
    """The MAP of M @ X (M of shape (d', d)), jumps and Brownian parts coupled."""
    m = np.asarray(matrix, dtype=float)
    op = linear_op(m)
    per = tuple(transform_component(c, op) for c in spec.per_state)
    laws = {k: v.then(op) for k, v in spec.transition_jumps.laws.items()}
    return MapSpec(spec.chain, per, TransitionJumpSpec(laws))


def negate_map(spec: MapSpec) -> MapSpec:
    """The MAP of -X (same chain)."""
    per = tuple(
        LevyComponentSpec(-c.drift, None, tuple(JumpSource(s.rate, s.law.negated()) for s in c.jumps),
                          -c.loading)
        for c in spec.per_state
    )
    laws = {k: v.negated() for k, v in spec.transition_jumps.laws.items()}
    return MapSpec(spec.chain, per, TransitionJumpSpec(laws))


def dual_map(spec: MapSpec) -> MapSpec:
    """Time-reversed MAP: q*_ij = pi_j q_ji / pi_i, X^{j*} = -X^j in law,
    Phi*^{ij} = -Phi^{ji}, initial law pi."""
    pi = spec.pi()
    q = spec.chain.generator
    qs = (pi[None, :] * q.T) / pi[:, None]
    m = q.shape[0]
    for i in range(m):
        qs[i, i] = 0.0
        qs[i, i] = -qs[i].sum()
    neg = negate_map(spec)
    laws = {(j, i): law for (i, j), law in neg.transition_jumps.laws.items()}
    return MapSpec(ChainSpec(qs, pi), neg.per_state, TransitionJumpSpec(laws))


def _bivariate_op(spec: MapSpec, op_name: str, drift_fn) -> MapSpec:
    if spec.dim != 2:
        raise SpecError("bivariate MAP required", "dim")
    op = {"op": op_name}
    per = []
    for c in spec.per_state:
        drift, load = drift_fn(c)
        per.append(LevyComponentSpec(drift, None, tuple(JumpSource(s.rate, s.law.then(op)) for s in c.jumps),
                                     load))
    laws = {k: v.then(op) for k, v in spec.transition_jumps.laws.items()}
    return MapSpec(spec.chain, tuple(per), TransitionJumpSpec(laws))


def UL_to_xieta(spec: MapSpec) -> MapSpec:
    """((U,L),J) -> ((xi,eta),J) with e^{-xi} = E(U) and eta = L - [U, eta]."""
    def f(c):
        cov = c.cov
        drift = np.array([-c.drift[0] + 0.5 * cov[0, 0], c.drift[1] - cov[0, 1]])
        load = np.vstack([-c.loading[0], c.loading[1]])
        return drift, load
    return _bivariate_op(spec, "UL_to_xieta", f)


def xieta_to_UL(spec: MapSpec) -> MapSpec:
    """((xi,eta),J) -> ((U,L),J) per the (U,L)-from-(xi,eta) identities."""
    def f(c):
        cov = c.cov
        drift = np.array([-c.drift[0] + 0.5 * cov[0, 0], c.drift[1] - cov[0, 1]])
        load = np.vstack([-c.loading[0], c.loading[1]])
        return drift, load
    return _bivariate_op(spec, "xieta_to_UL", f)


def xieta_to_xiL(spec: MapSpec) -> MapSpec:
    """((xi,eta),J) -> ((xi,L),J): L keeps xi, L^c drift shifted by -sigma_{xi,eta}."""
    def f(c):
        return np.array([c.drift[0], c.drift[1] - c.cov[0, 1]]), c.loading
    return _bivariate_op(spec, "xieta_to_xiL", f)


def xiL_to_xieta(spec: MapSpec) -> MapSpec:
    def f(c):
        return np.array([c.drift[0], c.drift[1] + c.cov[0, 1]]), c.loading
    return _bivariate_op(spec, "xiL_to_xieta", f)


def single_state(component: LevyComponentSpec) -> MapSpec:
    return MapSpec(ChainSpec(np.zeros((1, 1)), 0), (component,))


def levy(drift: Sequence[float] | float, cov=None, jumps: Sequence[tuple[float, Any]] = ()) -> LevyComponentSpec:
    """Convenience constructor: ``jumps`` is a list of (rate, law)."""
    return LevyComponentSpec(np.atleast_1d(np.asarray(drift, dtype=float)), cov,
                             tuple(JumpSource(r, as_jump_law(law)) for r, law in jumps))


__all__ = [
    "JumpSource", "LevyComponentSpec", "TransitionJumpSpec", "MapSpec", "DistributionSpec",
    "dual_map", "negate_map", "map_linear", "UL_to_xieta", "xieta_to_UL", "xieta_to_xiL",
    "xiL_to_xieta", "single_state", "levy", "linear_op",
]
