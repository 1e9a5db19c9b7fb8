"""Command-line entry point: run scenario files and write CSV/JSON artifacts.

Exit codes: 0 ok, 2 validation, 3 refusal or inconclusive result, 4 I/O,
5 rerun produced different outputs.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import sys
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .distributions import SpecError
from .expfun import RefusalError, classify_stationarity, sample_stationary
from .gou import simulate_mmgou
from .identities import identity_suite
from .mapspec import MapSpec, xieta_to_UL
from .paths import resolve_threads, simulate_map_paths
from .risk import build_UL_map, build_xieta_map, ruin_surface, verify_ruin_theorem
from .scenario import Scenario, ScenarioError, parse_scenario, parse_scenario_text, resolve_seed

EXIT_OK, EXIT_VALIDATION, EXIT_REFUSED, EXIT_IO, EXIT_MISMATCH = 0, 2, 3, 4, 5

COMMANDS = {
    "simulate": ("map_sim", "mmgou_sim"),
    "stationarity": ("stationarity",),
    "stationary-sample": ("stationary_sample",),
    "ruin": ("ruin",),
    "verify-ruin": ("verify_ruin",),
    "identities": ("identity_suite",),
}


class Inconclusive(Exception):
    """Outputs were written but the result is a refusal or inconclusive verdict."""


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_cell(v) for v in r) + "\n")
    return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _xieta(model) -> MapSpec:
    return model if isinstance(model, MapSpec) else build_xieta_map(model)


# ------------------------------------------------------------ kinds
# each returns {filename: text}; outputs must be functions of (scenario, seed) only

def _map_sim(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    paths = simulate_map_paths(sc.model, r.N, r.T, r.h, r.seed, threads)
    buf = io.StringIO()
    for i, p in enumerate(paths):
        lines = p.to_csv().splitlines()
        if i == 0:
            buf.write("path," + lines[0] + "\n")
        for line in lines[1:]:
            buf.write(f"{i},{line}\n")
    return {"paths.csv": buf.getvalue()}


def _mmgou_sim(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    if r.coords == "xi_eta":
        spec = _xieta(sc.model)
    else:
        spec = sc.model if isinstance(sc.model, MapSpec) else build_UL_map(sc.model)
    buf = io.StringIO()
    buf.write("path,time,state,v\n")
    for i, m in enumerate(simulate_mmgou(spec, r.N, r.T, r.h, r.seed, r.v0, r.coords, threads)):
        for line in m.to_csv().splitlines()[1:]:
            buf.write(f"{i},{line}\n")
    return {"mmgou.csv": buf.getvalue()}


def _stationarity(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    rep = classify_stationarity(_xieta(sc.model), r.mc, r.seed, r.h, threads)
    out = {"report.json": _dump(rep.to_json())}
    if rep.verdict == "inconclusive":
        raise Inconclusive(out, "stationarity verdict is inconclusive")
    return out


def _stationary_sample(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    spec = _xieta(sc.model)
    rep = classify_stationarity(spec, r.mc, r.seed, r.h, threads)
    out = {"report.json": _dump(rep.to_json())}
    if rep.verdict != "stationary_a":
        raise Inconclusive(out, f"stationary sampling needs verdict stationary_a, got {rep.verdict}")
    s = sample_stationary(spec, r.N, r.policy, r.seed, r.h, threads, report=rep)
    rep_json = dict(rep.to_json(), sample={"n": r.N, "nonconverged_fraction": s.nonconverged_fraction,
                                           "policy": s.policy.to_json()})
    return {"samples.csv": s.to_csv(), "report.json": _dump(rep_json)}


def _ruin(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    rows = ruin_surface(sc.model, r.u, r.N, r.T, r.h, r.seed, threads)
    keys = ["u", "j", "psi", "se", "n_ruined", "hazard_ok"]
    rep = {"N": r.N, "T": r.T, "h": r.h, "u": list(r.u), "censoring_horizon_note":
           "estimates are P(ruin before T); hazard_ok reports ruins in the last 10% of [0, T] < 1% of all ruins",
           "all_hazard_ok": all(x["hazard_ok"] for x in rows)}
    return {"ruin_surface.csv": _csv(keys, ([x[k] for k in keys] for x in rows)), "report.json": _dump(rep)}


def _verify_ruin(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    chk = verify_ruin_theorem(sc.model, r.u[0], r.j, r.N, r.T, r.h, r.seed, r.N_H, r.policy, threads)
    out = {"verify.json": _dump(dict(chk.to_json(), u=r.u[0], j=r.j))}
    if chk.verdict == "inconclusive":
        raise Inconclusive(out, chk.message)
    return out


def _identities(sc: Scenario, threads: int) -> dict[str, str]:
    r = sc.run
    if isinstance(sc.model, MapSpec):
        spec = sc.model if r.coords == "UL" else xieta_to_UL(sc.model)
    else:
        spec = build_UL_map(sc.model)
    res = identity_suite(spec, r.N, r.T, r.h, r.seed, r.n_triples, threads)
    keys = ["identity", "n_paths", "jump_error", "cont_error", "jump_tol", "cont_tol", "passed"]
    return {"identities.csv": _csv(keys, ([x.row()[k] for k in keys] for x in res))}


KIND_RUNNERS: dict[str, Callable[[Scenario, int], dict[str, str]]] = {
    "map_sim": _map_sim,
    "mmgou_sim": _mmgou_sim,
    "stationarity": _stationarity,
    "stationary_sample": _stationary_sample,
    "ruin": _ruin,
    "verify_ruin": _verify_ruin,
    "identity_suite": _identities,
}


# ------------------------------------------------------------ plumbing

def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _write(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text)


def run(scenario: Scenario, out_dir: str | Path, threads: int | None = None,
        seed_given: bool = True) -> tuple[dict[str, Any], bool]:
    """Run a resolved scenario, write its outputs and manifest.json.

    Returns (manifest, conclusive)."""
    threads = resolve_threads(threads)
    out_dir = Path(out_dir)
    t0 = time.perf_counter()
    conclusive, message = True, ""
    try:
        files = KIND_RUNNERS[scenario.kind](scenario, threads)
    except Inconclusive as e:
        files, message = e.args
        conclusive = False
    wall = time.perf_counter() - t0
    _write(out_dir, files)
    manifest = {
        "scenario": scenario.to_json(),
        "seed": scenario.run.seed,
        "seed_given": seed_given,
        "version": __version__,
        "threads": threads,
        "wall_time": wall,
        "outputs": {name: _sha256(text) for name, text in sorted(files.items())},
        "conclusive": conclusive,
    }
    if message:
        manifest["message"] = message
    _write(out_dir, {"manifest.json": _dump(manifest)})
    return manifest, conclusive


def _error(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code, **extra}) + "\n")
    return code


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmgou", description="Markov-modulated generalized OU toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, kinds in COMMANDS.items():
        s = sub.add_parser(name, help=f"run a {' / '.join(kinds)} scenario")
        s.add_argument("scenario", help="scenario JSON file")
        s.add_argument("--out", default="out", help="output directory (default: out)")
        s.add_argument("--seed", type=int, help="master seed (overrides the file)")
        s.add_argument("--threads", type=int, help="worker threads (default: $THREADS or 1)")
        s.add_argument("--N", type=int, help="number of paths / samples")
        s.add_argument("--T", type=float, help="horizon")
        s.add_argument("--h", type=float, help="micro-step")
        s.add_argument("--u", type=float, nargs="+", help="initial capital(s)")
        s.add_argument("--j", type=int, help="starting state")
        s.add_argument("--mc", type=int, help="Monte Carlo size for the stationarity classifier")
    r = sub.add_parser("rerun", help="re-run the scenario recorded in a manifest and compare output hashes")
    r.add_argument("manifest", help="manifest.json from an earlier run")
    r.add_argument("--out", required=True, help="output directory for the rerun")
    r.add_argument("--threads", type=int, help="worker threads (default: $THREADS or 1)")
    return p


def _main(argv: list[str] | None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "rerun":
        try:
            man = json.loads(Path(args.manifest).read_text())
            sc = parse_scenario_text(json.dumps(man["scenario"]))
        except OSError as e:
            return _error("io", str(e), EXIT_IO)
        except (ScenarioError, KeyError, json.JSONDecodeError) as e:
            return _error("validation", f"bad manifest: {e}", EXIT_VALIDATION)
        new, _ = run(sc, args.out, args.threads, bool(man.get("seed_given", True)))
        same = new["outputs"] == man.get("outputs")
        sys.stdout.write(_dump({"reproduced": same, "outputs": new["outputs"], "expected": man.get("outputs")}))
        return EXIT_OK if same else EXIT_MISMATCH
    try:
        sc = parse_scenario(args.scenario)
        if sc.kind not in COMMANDS[args.command]:
            raise ScenarioError(f"subcommand {args.command} runs {' / '.join(COMMANDS[args.command])} "
                                f"scenarios, got {sc.kind}", "kind", "subcommand-kind match")
        sc = sc.with_overrides(N=args.N, T=args.T, h=args.h, u=tuple(args.u) if args.u else None, j=args.j,
                               mc=args.mc)
        sc, seed_given = resolve_seed(sc, args.seed)
    except OSError as e:
        return _error("io", str(e), EXIT_IO)
    except ScenarioError as e:
        return _error("validation", str(e.args[0]), EXIT_VALIDATION, path=e.path, invariant=e.invariant)
    except SpecError as e:
        return _error("validation", str(e.args[0]), EXIT_VALIDATION, path=e.path)
    if not seed_given:
        sys.stderr.write(json.dumps({"warning": "no seed given; using seed 0 (pass --seed for publication-grade "
                                                "runs)"}) + "\n")
    try:
        man, conclusive = run(sc, args.out, args.threads, seed_given)
    except OSError as e:
        return _error("io", str(e), EXIT_IO)
    except RefusalError as e:
        return _error("refusal", str(e), EXIT_REFUSED)
    except SpecError as e:
        return _error("validation", str(e.args[0]), EXIT_VALIDATION, path=e.path)
    if not conclusive:
        return _error("inconclusive", man.get("message", ""), EXIT_REFUSED, out=str(args.out))
    sys.stdout.write(_dump({"out": str(args.out), "outputs": man["outputs"]}))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    code = _main(argv)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
