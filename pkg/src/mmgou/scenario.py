"""Scenario files: one self-contained JSON document per run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .distributions import SpecError
from .expfun import TruncationPolicy
from .mapspec import MapSpec
from .risk import RiskModelSpec

KINDS = ("map_sim", "mmgou_sim", "stationarity", "stationary_sample", "ruin", "verify_ruin", "identity_suite")
MODEL_TYPES = {
    "map_sim": ("map",),
    "mmgou_sim": ("map", "risk"),
    "stationarity": ("map", "risk"),
    "stationary_sample": ("map", "risk"),
    "ruin": ("risk",),
    "verify_ruin": ("risk",),
    "identity_suite": ("map", "risk"),
}
BIVARIATE = ("mmgou_sim", "stationarity", "stationary_sample", "identity_suite")
COORDS = ("xi_eta", "UL")


class ScenarioError(SpecError):
    """Scenario validation failure; ``invariant`` names the violated rule, if any."""

    def __init__(self, message: str, path: str = "", invariant: str = ""):
        self.invariant = invariant
        super().__init__(message, path)


@dataclass(frozen=True)
class RunConfig:
    """Run parameters; fields a kind does not use stay None and are not serialized."""

    seed: int | None = None
    N: int | None = None
    T: float | None = None
    h: float | None = None
    u: tuple[float, ...] | None = None
    j: int | None = None
    v0: float | None = None
    mc: int | None = None
    N_H: int | None = None
    n_triples: int | None = None
    coords: str | None = None
    policy: TruncationPolicy | None = None

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if f.name == "policy":
                v = v.to_json()
            elif f.name == "u":
                v = list(v)
            out[f.name] = v
        return out


_INT_FIELDS = ("seed", "N", "j", "mc", "N_H", "n_triples")
_POS_FLOAT_FIELDS = ("T", "h")

# fields used by each kind, with defaults (None = required)
_DEFAULTS: dict[str, dict[str, Any]] = {
    "map_sim": {"N": 1, "T": None, "h": 0.01},
    "mmgou_sim": {"N": 1, "T": None, "h": 0.01, "v0": 0.0, "coords": "xi_eta"},
    "stationarity": {"mc": 2000, "h": 0.01},
    "stationary_sample": {"N": None, "mc": 2000, "h": 0.01, "policy": TruncationPolicy()},
    "ruin": {"u": None, "N": None, "T": None, "h": 0.01},
    "verify_ruin": {"u": None, "j": 0, "N": None, "T": None, "h": 0.01, "N_H": None,
                    "policy": TruncationPolicy()},
    "identity_suite": {"N": 100, "T": 1.0, "h": 0.01, "n_triples": 10_000, "coords": "UL"},
}


@dataclass(frozen=True, eq=True)
class Scenario:
    name: str
    kind: str
    model: MapSpec | RiskModelSpec
    run: RunConfig = field(default_factory=RunConfig)

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "kind": self.kind, "model": self.model.to_json(), "run": self.run.to_json()}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def with_overrides(self, **kw) -> "Scenario":
        """Replace run fields (None values ignored) and re-validate."""
        obj = self.to_json()
        for k, v in kw.items():
            if v is not None:
                obj["run"][k] = list(v) if isinstance(v, tuple) else v
        return Scenario.from_json(obj)

    @staticmethod
    def from_json(obj: Any) -> "Scenario":
        if not isinstance(obj, dict):
            raise ScenarioError("scenario must be a JSON object", "$")
        extra = set(obj) - {"name", "kind", "model", "run"}
        if extra:
            raise ScenarioError(f"unexpected fields {sorted(extra)}", "$")
        name = obj.get("name")
        if not isinstance(name, str) or not name:
            raise ScenarioError("name must be a non-empty string", "name")
        kind = obj.get("kind")
        if kind not in KINDS:
            raise ScenarioError(f"kind must be one of {list(KINDS)}, got {kind!r}", "kind")
        model_obj = obj.get("model")
        if not isinstance(model_obj, dict):
            raise ScenarioError("model must be an object", "model")
        mtype = model_obj.get("type")
        if mtype not in ("map", "risk"):
            raise ScenarioError(f"model.type must be 'map' or 'risk', got {mtype!r}", "model.type")
        if mtype not in MODEL_TYPES[kind]:
            raise ScenarioError(f"kind {kind} needs a model of type {' or '.join(MODEL_TYPES[kind])}",
                                "model.type", "kind-model compatibility")
        model = MapSpec.from_json(model_obj, "model") if mtype == "map" else RiskModelSpec.from_json(model_obj)
        if kind in BIVARIATE and isinstance(model, MapSpec) and model.dim != 2:
            raise ScenarioError(f"kind {kind} needs a bivariate MAP, got dim {model.dim}", "model.dim",
                                "kind-model compatibility")
        run = _parse_run(obj.get("run", {}), kind, model)
        return Scenario(name, kind, model, run)


def _parse_run(obj: Any, kind: str, model) -> RunConfig:
    if not isinstance(obj, dict):
        raise ScenarioError("run must be an object", "run")
    allowed = set(_DEFAULTS[kind]) | {"seed"}
    extra = set(obj) - allowed
    if extra:
        raise ScenarioError(f"fields {sorted(extra)} are not used by kind {kind}", "run")
    vals: dict[str, Any] = {}
    for k, default in _DEFAULTS[kind].items():
        if k in obj:
            vals[k] = obj[k]
        elif default is None and k != "N_H":
            raise ScenarioError(f"missing required field for kind {kind}", f"run.{k}")
        else:
            vals[k] = default
    if "seed" in obj:
        vals["seed"] = obj["seed"]
    for k in _INT_FIELDS:
        v = vals.get(k)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, int):
            raise ScenarioError(f"expected an integer, got {v!r}", f"run.{k}")
        lo = 0 if k in ("seed", "j") else 1
        if v < lo:
            raise ScenarioError(f"must be >= {lo}", f"run.{k}", "positive run parameters")
    for k in _POS_FLOAT_FIELDS:
        v = vals.get(k)
        if v is None:
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or v == float("inf"):
            raise ScenarioError(f"must be a finite number > 0, got {v!r}", f"run.{k}", "positive run parameters")
        vals[k] = float(v)
    if vals.get("u") is not None:
        u = vals["u"]
        u = [u] if isinstance(u, (int, float)) and not isinstance(u, bool) else u
        if not isinstance(u, list) or not u or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in u):
            raise ScenarioError("expected a number or a non-empty list of numbers", "run.u")
        for k, x in enumerate(u):
            if not (0 < x < float("inf")):
                raise ScenarioError("initial capital must be > 0", f"run.u[{k}]", "positive run parameters")
        if kind == "verify_ruin" and len(u) != 1:
            raise ScenarioError("verify_ruin takes a single u", "run.u")
        vals["u"] = tuple(float(x) for x in u)
    if vals.get("v0") is not None:
        v = vals["v0"]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ScenarioError(f"expected a number, got {v!r}", "run.v0")
        vals["v0"] = float(v)
    if vals.get("coords") is not None and vals["coords"] not in COORDS:
        raise ScenarioError(f"coords must be one of {list(COORDS)}", "run.coords")
    if kind == "identity_suite" and isinstance(model, RiskModelSpec) and vals["coords"] != "UL":
        raise ScenarioError("risk models enter the identity suite in (U, L) coordinates", "run.coords")
    if vals.get("j") is not None and vals["j"] >= model.num_states:
        raise ScenarioError(f"state {vals['j']} out of range", "run.j")
    if "policy" in vals and not isinstance(vals["policy"], TruncationPolicy):
        try:
            vals["policy"] = TruncationPolicy.from_json(vals["policy"], "run.policy")
        except SpecError as e:
            raise ScenarioError(str(e.args[0]).split(": ", 1)[-1], e.path if e.path.startswith("run")
                                else f"run.{e.path}") from None
    return RunConfig(**vals)


def parse_scenario(file: str | Path) -> Scenario:
    """Read and fully validate a scenario file.

    JSON syntax errors report line and column; schema and invariant errors
    raise ScenarioError with the field path of the offending entry.
    """
    text = Path(file).read_text()
    return parse_scenario_text(text)


def parse_scenario_text(text: str) -> Scenario:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", f"line {e.lineno}") \
            from None
    try:
        return Scenario.from_json(obj)
    except ScenarioError:
        raise
    except SpecError as e:
        raise ScenarioError(str(e.args[0]).split(": ", 1)[-1], e.path) from None


def resolve_seed(scenario: Scenario, seed: int | None) -> tuple[Scenario, bool]:
    """Apply a seed override; returns (scenario, seed_was_given)."""
    if seed is not None:
        return replace(scenario, run=replace(scenario.run, seed=int(seed))), True
    if scenario.run.seed is not None:
        return scenario, True
    return replace(scenario, run=replace(scenario.run, seed=0)), False
