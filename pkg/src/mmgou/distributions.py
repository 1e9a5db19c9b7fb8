"""Declarative jump-size laws.

A :class:`DistributionSpec` is a univariate law that can be sampled by
inverse transform from the counter-based uniforms of :mod:`mmgou.rng`.
A :class:`JumpLaw` bundles independent components with a chain of named,
JSON-serializable transforms so that joint laws such as
``(-log(1+Phi_U), Phi_L/(1+Phi_U))`` stay declarative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate, stats
from scipy.special import ndtri


class SpecError(ValueError):
    """Invalid specification; ``path`` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


SUPPORT_TAGS = ("real", "positive", "greater_than_minus_one")
KINDS = ("point", "uniform", "exponential", "normal", "lognormal",
         "shifted_lognormal", "pareto", "negated")
_PARAMS = {
    "point": ("c",),
    "uniform": ("a", "b"),
    "exponential": ("rate",),
    "normal": ("mean", "var"),
    "lognormal": ("mu", "sigma2"),
    "shifted_lognormal": ("shift", "mu", "sigma2"),
    "pareto": ("alpha", "scale"),
    "negated": (),
}


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    params: tuple[float, ...] = ()
    inner: "DistributionSpec | None" = None
    support: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown distribution kind {self.kind!r}", "kind")
        names = _PARAMS[self.kind]
        if len(self.params) != len(names):
            raise SpecError(f"{self.kind} needs parameters {names}", "params")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        p = dict(zip(names, self.params))
        if any(not math.isfinite(v) for v in self.params):
            raise SpecError("parameters must be finite", "params")
        if self.kind == "uniform" and not p["b"] > p["a"]:
            raise SpecError("uniform needs b > a", "b")
        if self.kind == "exponential" and not p["rate"] > 0:
            raise SpecError("exponential needs rate > 0", "rate")
        if self.kind == "normal" and p["var"] < 0:
            raise SpecError("normal needs var >= 0", "var")
        if self.kind in ("lognormal", "shifted_lognormal") and p["sigma2"] < 0:
            raise SpecError("lognormal needs sigma2 >= 0", "sigma2")
        if self.kind == "pareto" and not (p["alpha"] > 0 and p["scale"] > 0):
            raise SpecError("pareto needs alpha > 0 and scale > 0", "alpha")
        if self.kind == "negated" and self.inner is None:
            raise SpecError("negated needs an inner law", "inner")
        if self.support is not None:
            if self.support not in SUPPORT_TAGS:
                raise SpecError(f"unknown support tag {self.support!r}", "support")
            if not self.satisfies(self.support):
                raise SpecError(
                    f"{self.describe()} is not supported on {self.support}", "support")

    # constructors
    @staticmethod
    def point(c: float) -> "DistributionSpec":
        return DistributionSpec("point", (c,))

    @staticmethod
    def uniform(a: float, b: float) -> "DistributionSpec":
        return DistributionSpec("uniform", (a, b))

    @staticmethod
    def exponential(rate: float) -> "DistributionSpec":
        return DistributionSpec("exponential", (rate,))

    @staticmethod
    def normal(mean: float, var: float) -> "DistributionSpec":
        return DistributionSpec("normal", (mean, var))

    @staticmethod
    def lognormal(mu: float, sigma2: float) -> "DistributionSpec":
        return DistributionSpec("lognormal", (mu, sigma2))

    @staticmethod
    def shifted_lognormal(shift: float, mu: float, sigma2: float) -> "DistributionSpec":
        return DistributionSpec("shifted_lognormal", (shift, mu, sigma2))

    @staticmethod
    def pareto(alpha: float, scale: float) -> "DistributionSpec":
        return DistributionSpec("pareto", (alpha, scale))

    @staticmethod
    def negated(inner: "DistributionSpec") -> "DistributionSpec":
        return DistributionSpec("negated", (), inner)

    def with_support(self, tag: str) -> "DistributionSpec":
        return DistributionSpec(self.kind, self.params, self.inner, tag)

    @property
    def p(self) -> dict[str, float]:
        return dict(zip(_PARAMS[self.kind], self.params))

    def describe(self) -> str:
        if self.kind == "negated":
            return f"negated({self.inner.describe()})"
        args = ", ".join(f"{k}={v:g}" for k, v in self.p.items())
        return f"{self.kind}({args})"

    def is_point(self) -> bool:
        if self.kind == "negated":
            return self.inner.is_point()
        if self.kind == "normal":
            return self.p["var"] == 0
        if self.kind in ("lognormal", "shifted_lognormal"):
            return self.p["sigma2"] == 0
        return self.kind == "point"

    def bounds(self) -> tuple[float, float, bool, bool]:
        """(lower, upper, lower has an atom, upper has an atom)."""
        p = self.p
        if self.kind == "negated":
            lo, hi, alo, ahi = self.inner.bounds()
            return -hi, -lo, ahi, alo
        if self.kind == "point":
            return p["c"], p["c"], True, True
        if self.is_point():
            c = float(self.ppf(np.array([0.5]))[0])
            return c, c, True, True
        if self.kind == "uniform":
            return p["a"], p["b"], False, False
        if self.kind in ("exponential", "lognormal"):
            return 0.0, math.inf, False, False
        if self.kind == "shifted_lognormal":
            return p["shift"], math.inf, False, False
        if self.kind == "pareto":
            return p["scale"], math.inf, False, False
        return -math.inf, math.inf, False, False

    def satisfies(self, tag: str) -> bool:
        lo, _, atom, _ = self.bounds()
        if tag == "real":
            return True
        if tag == "positive":
            return lo > 0 or (lo == 0 and not atom)
        if tag == "greater_than_minus_one":
            return lo > -1 or (lo == -1 and not atom)
        raise SpecError(f"unknown support tag {tag!r}", "support")

    # numerics
    def _frozen(self):
        p = self.p
        if self.kind == "uniform":
            return stats.uniform(loc=p["a"], scale=p["b"] - p["a"])
        if self.kind == "exponential":
            return stats.expon(scale=1.0 / p["rate"])
        if self.kind == "normal":
            return stats.norm(loc=p["mean"], scale=math.sqrt(p["var"]))
        if self.kind == "lognormal":
            return stats.lognorm(s=math.sqrt(p["sigma2"]), scale=math.exp(p["mu"]))
        if self.kind == "shifted_lognormal":
            return stats.lognorm(s=math.sqrt(p["sigma2"]), loc=p["shift"],
                                 scale=math.exp(p["mu"]))
        if self.kind == "pareto":
            return stats.pareto(b=p["alpha"], scale=p["scale"])
        raise AssertionError(self.kind)

    def ppf(self, u: np.ndarray) -> np.ndarray:
        """Quantile function, used for inverse-transform sampling."""
        u = np.asarray(u, dtype=float)
        p = self.p
        k = self.kind
        if k == "negated":
            return -self.inner.ppf(1.0 - u)
        if k == "point":
            return np.full_like(u, p["c"])
        if k == "uniform":
            return p["a"] + (p["b"] - p["a"]) * u
        if k == "exponential":
            return -np.log1p(-u) / p["rate"]
        if k == "normal":
            return p["mean"] + math.sqrt(p["var"]) * ndtri(u)
        if k == "lognormal":
            return np.exp(p["mu"] + math.sqrt(p["sigma2"]) * ndtri(u))
        if k == "shifted_lognormal":
            return p["shift"] + np.exp(p["mu"] + math.sqrt(p["sigma2"]) * ndtri(u))
        if k == "pareto":
            return p["scale"] * (1.0 - u) ** (-1.0 / p["alpha"])
        raise AssertionError(k)

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "negated":
            return self.inner.sf(-x) + self.inner.atom_mass(-x)
        if self.is_point():
            c = self.bounds()[0]
            return (x >= c).astype(float)
        return self._frozen().cdf(x)

    def sf(self, x: np.ndarray) -> np.ndarray:
        """P(X > x)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "negated":
            return self.inner.cdf(-x) - self.inner.atom_mass(-x)
        if self.is_point():
            c = self.bounds()[0]
            return (x < c).astype(float)
        return self._frozen().sf(x)

    def atom_mass(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_point():
            return (x == self.bounds()[0]).astype(float)
        return np.zeros_like(x)

    def mean(self) -> float:
        """Analytic mean; raises when it is undefined."""
        p = self.p
        k = self.kind
        if k == "negated":
            return -self.inner.mean()
        if k == "point":
            return p["c"]
        if k == "uniform":
            return 0.5 * (p["a"] + p["b"])
        if k == "exponential":
            return 1.0 / p["rate"]
        if k == "normal":
            return p["mean"]
        if k == "lognormal":
            return math.exp(p["mu"] + 0.5 * p["sigma2"])
        if k == "shifted_lognormal":
            return p["shift"] + math.exp(p["mu"] + 0.5 * p["sigma2"])
        if k == "pareto":
            if p["alpha"] <= 1:
                raise SpecError(f"mean of {self.describe()} is undefined (alpha <= 1)")
            return p["alpha"] * p["scale"] / (p["alpha"] - 1)
        raise AssertionError(k)

    def has_mean(self) -> bool:
        try:
            self.mean()
        except SpecError:
            return False
        return True

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind}
        if self.kind == "negated":
            out["inner"] = self.inner.to_json()
        else:
            out.update(self.p)
        if self.support is not None:
            out["support"] = self.support
        return out

    @staticmethod
    def from_json(obj: Any, path: str = "law") -> "DistributionSpec":
        if not isinstance(obj, dict):
            raise SpecError("expected an object", path)
        kind = obj.get("kind")
        if kind not in KINDS:
            raise SpecError(f"unknown distribution kind {kind!r}", f"{path}.kind")
        names = _PARAMS[kind]
        extra = set(obj) - set(names) - {"kind", "support", "inner"}
        if extra:
            raise SpecError(f"unexpected fields {sorted(extra)}", path)
        inner = None
        if kind == "negated":
            inner = DistributionSpec.from_json(obj.get("inner"), f"{path}.inner")
        params = []
        for name in names:
            if name not in obj:
                raise SpecError("missing parameter", f"{path}.{name}")
            v = obj[name]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SpecError("expected a number", f"{path}.{name}")
            params.append(float(v))
        try:
            return DistributionSpec(kind, tuple(params), inner, obj.get("support"))
        except SpecError as e:
            raise SpecError(str(e.args[0]).split(": ", 1)[-1],
                            f"{path}.{e.path}" if e.path else path) from None


# ---------------------------------------------------------------- transforms

def _cols(x: np.ndarray, op: dict) -> np.ndarray:
    return np.asarray(op.get("cols", range(x.shape[1])), dtype=int)


def _matmul(x: np.ndarray, matrix) -> np.ndarray:
    """x @ M.T where zero entries of M drop their column (so 0 * inf does not give nan)."""
    m = np.asarray(matrix, dtype=float)
    out = np.zeros((x.shape[0], m.shape[0]))
    for i in range(m.shape[0]):
        for k in np.flatnonzero(m[i]):
            out[:, i] += m[i, k] * x[:, k]
    return out


def _apply_op(x: np.ndarray, op: dict) -> np.ndarray:
    name = op["op"]
    if name == "negate":
        return -x
    if name == "linear":
        return _matmul(x, op["matrix"])
    if name == "affine":
        return _matmul(x, op["matrix"]) + np.asarray(op["offset"], dtype=float)
    if name == "exp":
        y = x.copy()
        c = _cols(x, op)
        with np.errstate(over="ignore"):
            y[:, c] = np.exp(x[:, c])
        return y
    if name == "neg_log1p":
        y = x.copy()
        c = _cols(x, op)
        y[:, c] = -np.log1p(x[:, c])
        return y
    if name == "expm1_neg":
        y = x.copy()
        c = _cols(x, op)
        y[:, c] = np.expm1(-x[:, c])
        return y
    if name == "UL_to_xieta":
        u, l = x[:, 0], x[:, 1]
        return np.column_stack([-np.log1p(u), l / (1.0 + u)])
    if name == "xieta_to_UL":
        a, b = x[:, 0], x[:, 1]
        return np.column_stack([np.expm1(-a), b * np.exp(-a)])
    if name == "xieta_to_xiL":
        a, b = x[:, 0], x[:, 1]
        return np.column_stack([a, b * np.exp(-a)])
    if name == "xiL_to_xieta":
        a, b = x[:, 0], x[:, 1]
        return np.column_stack([a, b * np.exp(a)])
    raise SpecError(f"unknown transform op {name!r}", "transform")


# log|y_i| updates for ops applied after an exp on column i (x: other columns)
_LOG_OPS: dict[str, Callable[[np.ndarray, np.ndarray, int], np.ndarray]] = {
    "negate": lambda x, lg, i: lg,
    "xieta_to_xiL": lambda x, lg, i: lg - x[:, 0] if i == 1 else lg,
    "xiL_to_xieta": lambda x, lg, i: lg + x[:, 0] if i == 1 else lg,
    "UL_to_xieta": lambda x, lg, i: lg - np.log1p(x[:, 0]) if i == 1 else np.log(np.abs(np.log1p(np.exp(lg)))),
}


def _op_out_dim(op: dict, d: int) -> int:
    if op["op"] in ("linear", "affine"):
        m = np.asarray(op["matrix"], dtype=float)
        if m.ndim != 2 or m.shape[1] != d:
            raise SpecError(f"matrix shape {m.shape} does not act on dimension {d}", "transform")
        if op["op"] == "affine" and np.asarray(op["offset"]).shape != (m.shape[0],):
            raise SpecError("offset length must match matrix rows", "transform")
        return m.shape[0]
    if op["op"] in ("UL_to_xieta", "xieta_to_UL", "xieta_to_xiL", "xiL_to_xieta") and d != 2:
        raise SpecError(f"{op['op']} needs a bivariate law", "transform")
    return d


def _canon_op(op: dict) -> dict:
    out = dict(op)
    for key in ("matrix", "offset"):
        if key in out:
            out[key] = np.asarray(out[key], dtype=float).tolist()
    if "cols" in out:
        out["cols"] = [int(c) for c in out["cols"]]
    return out


@dataclass(frozen=True)
class JumpLaw:
    """Law of a d-dimensional jump: independent components then transforms."""

    components: tuple[DistributionSpec, ...]
    transform: tuple[dict, ...] = field(default=())

    def __post_init__(self):
        if not self.components:
            raise SpecError("jump law needs at least one component", "components")
        object.__setattr__(self, "components", tuple(self.components))
        ops = tuple(_canon_op(o) for o in self.transform)
        object.__setattr__(self, "transform", ops)
        d = len(self.components)
        for op in ops:
            d = _op_out_dim(op, d)
        object.__setattr__(self, "_dim", d)

    def __hash__(self):
        return hash((self.components, repr(self.transform)))

    def __eq__(self, other):
        return (isinstance(other, JumpLaw) and self.components == other.components
                and repr(self.transform) == repr(other.transform))

    @property
    def dim(self) -> int:
        return self._dim  # type: ignore[attr-defined]

    @property
    def n_uniforms(self) -> int:
        return len(self.components)

    @staticmethod
    def of(*components: DistributionSpec) -> "JumpLaw":
        return JumpLaw(tuple(components))

    def then(self, *ops: dict) -> "JumpLaw":
        return JumpLaw(self.components, self.transform + tuple(ops))

    def sample(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms ``u`` of shape (n, >= n_uniforms) to jumps (n, dim)."""
        x = np.column_stack([c.ppf(u[:, i]) for i, c in enumerate(self.components)])
        for op in self.transform:
            x = _apply_op(x, op)
        return x

    def log_abs(self, u: np.ndarray, i: int) -> np.ndarray:
        """log|jump_i|, carried in the log domain from the last exp acting on
        column i so that exp-transformed heavy laws do not overflow."""
        ops = self.transform
        ex = [k for k, op in enumerate(ops) if op["op"] == "exp" and i in op.get("cols", [i])]
        if ex and all(op["op"] in _LOG_OPS for op in ops[ex[-1] + 1:]):
            x = np.column_stack([c.ppf(u[:, k]) for k, c in enumerate(self.components)])
            for op in ops[:ex[-1]]:
                x = _apply_op(x, op)
            lg = x[:, i].copy()
            x[:, i] = 0.0
            x = _apply_op(x, ops[ex[-1]])
            for op in ops[ex[-1] + 1:]:
                lg = _LOG_OPS[op["op"]](x, lg, i)
                x = _apply_op(x, op)
            return lg
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.sample(u)[:, i]))

    def is_point(self) -> bool:
        return all(c.is_point() for c in self.components)

    def is_untransformed(self) -> bool:
        return not self.transform

    def _grid(self, m: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Quantile-midpoint product grid: points (n, dim) and weights (n,)."""
        nc = len(self.components)
        if m is None:
            m = 4096 if nc == 1 else 512
        axes = []
        for c in self.components:
            if c.is_point():
                axes.append(np.array([0.5]))
            else:
                axes.append((np.arange(m) + 0.5) / m)
        mesh = np.meshgrid(*axes, indexing="ij")
        u = np.column_stack([g.ravel() for g in mesh])
        w = np.full(len(u), 1.0 / len(u))
        return self.sample(u), w

    def expect(self, f: Callable[[np.ndarray], np.ndarray], m: int | None = None) -> float:
        """E[f(jump)] by midpoint quadrature in quantile space (exact for atoms)."""
        pts, w = self._grid(m)
        return float(np.sum(w * f(pts)))

    def mean(self) -> np.ndarray:
        if not self.transform or all(o["op"] in ("negate", "linear", "affine") for o in self.transform):
            x = np.array([[c.mean() for c in self.components]])
            for op in self.transform:
                x = _apply_op(x, op)
            return x[0]
        return np.array([self.expect(lambda z, i=i: z[:, i]) for i in range(self.dim)])

    def check_mean(self, label: str = "jump law") -> np.ndarray:
        for c in self.components:
            if not c.has_mean() and (not self.transform or all(
                    o["op"] in ("negate", "linear", "affine") for o in self.transform)):
                raise SpecError(f"mean of {c.describe()} is undefined", label)
        return self.mean()

    def marginal(self, i: int) -> DistributionSpec | None:
        """The i-th coordinate as a DistributionSpec when that is exact."""
        if not self.transform:
            return self.components[i]
        if len(self.transform) == 1 and self.transform[0]["op"] == "negate":
            return DistributionSpec.negated(self.components[i])
        return None

    def tail(self, i: int, x: float) -> float:
        """P(jump_i > x)."""
        m = self.marginal(i)
        if m is not None:
            return float(m.sf(np.array([x]))[0])
        return self.expect(lambda z: (z[:, i] > x).astype(float))

    def negated(self) -> "JumpLaw":
        if self.transform and self.transform[-1]["op"] == "negate":
            return JumpLaw(self.components, self.transform[:-1])
        return self.then({"op": "negate"})

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"components": [c.to_json() for c in self.components]}
        if self.transform:
            out["transform"] = [dict(o) for o in self.transform]
        return out

    @staticmethod
    def from_json(obj: Any, path: str = "law") -> "JumpLaw":
        if isinstance(obj, dict) and "components" in obj:
            comps = obj["components"]
            if not isinstance(comps, list):
                raise SpecError("expected a list", f"{path}.components")
            cs = tuple(DistributionSpec.from_json(c, f"{path}.components[{i}]")
                       for i, c in enumerate(comps))
            ops = obj.get("transform", [])
            if not isinstance(ops, list) or not all(isinstance(o, dict) and "op" in o for o in ops):
                raise SpecError("expected a list of {op: ...} objects", f"{path}.transform")
            try:
                return JumpLaw(cs, tuple(ops))
            except SpecError as e:
                raise SpecError(str(e.args[0]).split(": ", 1)[-1], f"{path}.transform") from None
            except (KeyError, ValueError, TypeError) as e:
                raise SpecError(f"bad transform: {e}", f"{path}.transform") from None
        return JumpLaw((DistributionSpec.from_json(obj, path),))


def as_jump_law(law: "JumpLaw | DistributionSpec | Sequence[DistributionSpec]") -> JumpLaw:
    if isinstance(law, JumpLaw):
        return law
    if isinstance(law, DistributionSpec):
        return JumpLaw((law,))
    return JumpLaw(tuple(law))


def tail_integral(law: JumpLaw, i: int, lo: float, hi: float, g: Callable[[float], float] | None = None) -> float:
    """Integral over y in [lo, hi] of P(jump_i > g(y)) dy for nondecreasing g."""
    if hi <= lo:
        return 0.0
    g = g or (lambda y: y)
    m = law.marginal(i)
    if m is not None and m.is_point():
        # g is nondecreasing: the tail indicator is 1 on [lo, y*) with g(y*) = c
        c = m.bounds()[0]
        if g(lo) >= c:
            return 0.0
        if g(hi) < c:
            return hi - lo
        a, b = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + b)
            if g(mid) < c:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b) - lo
    if m is not None:
        f = lambda y: float(m.sf(np.array([g(y)]))[0])
        val, _ = integrate.quad(f, lo, hi, limit=200)
        return float(val)
    pts, w = law._grid()
    z = pts[:, i]
    ys = np.linspace(lo, hi, 2001)
    gy = np.array([g(y) for y in ys])
    tails = np.array([np.sum(w * (z > v)) for v in gy])
    return float(integrate.trapezoid(tails, ys))
