"""Command line entry point: ``tracedyn run <scenario.json>`` and ``tracedyn check <suite>``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import checks
from .dynamics import ModelSpec, PhaseSpaceState, evolve
from .ensemble import (EnsembleParams, default_lambda, extract_ieff, metropolis_chain,
                       results_json)
from .errors import ConfigurationError, InvariantViolation, NumericalError
from .fixtures import unit_state
from .gravastar import EOSSpec, integrate_star, sweep, write_sweep_csv
from .tracepoly import SymbolTable, parse

log = logging.getLogger("tracedyn")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 2, 3, 4

_GRID = {"type": "array", "items": {"type": "array", "items": {
    "type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}}

_MODEL = {
    "type": "object", "additionalProperties": False, "required": ["hamiltonian"],
    "properties": {
        "hamiltonian": {"type": "string"},
        "n_dof": {"type": "integer", "minimum": 1},
        "symbols": {"type": "object"},
        "params": {"type": "object", "additionalProperties": {"type": "number"}},
        "constants": {"type": "object", "additionalProperties": _GRID},
    },
}

_COMMON = {"kind": {"enum": ["evolve", "ensemble", "gravastar", "check"]},
           "seed": {"type": "integer"}, "description": {"type": "string"}}

SCHEMAS = {
    "evolve": {
        "type": "object", "additionalProperties": False,
        "required": ["kind", "seed", "model", "N", "dt", "T"],
        "properties": dict(_COMMON, **{
            "model": _MODEL,
            "N": {"type": "integer", "minimum": 1, "maximum": 16},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "T": {"type": "number", "exclusiveMinimum": 0},
            "integrator": {"enum": ["rk4", "leapfrog"]},
            "stride": {"type": "integer", "minimum": 1},
            "initial_norm": {"type": "number", "exclusiveMinimum": 0},
            "snapshots": {"type": "boolean"},
            "expect": {"type": "object", "additionalProperties": False, "properties": {
                "max_energy_drift": {"type": "number"},
                "max_tildeC_drift": {"type": "number"}}},
        }),
    },
    "ensemble": {
        "type": "object", "additionalProperties": False,
        "required": ["kind", "seed", "model", "N", "tau"],
        "properties": dict(_COMMON, **{
            "model": _MODEL,
            "N": {"type": "integer", "minimum": 1, "maximum": 16},
            "tau": {"type": "number", "exclusiveMinimum": 0},
            "lambda": {"type": "number"},
            "lambda_tilde": _GRID,
            "chains": {"type": "integer", "minimum": 1},
            "steps": {"type": "integer", "minimum": 40},
            "burn_in": {"type": "integer", "minimum": 0},
            "proposal_scale": {"type": "number", "exclusiveMinimum": 0},
            "expect": {"type": "object", "additionalProperties": False, "properties": {
                "balanced_ieff": {"type": "boolean"}}},
        }),
    },
    "gravastar": {
        "type": "object", "additionalProperties": False,
        "required": ["kind", "seed", "eos"],
        "properties": dict(_COMMON, **{
            "eos": {"type": "object", "additionalProperties": False,
                    "required": ["p_jump", "epsilon", "p_surface"],
                    "properties": {"p_jump": {"type": "number"}, "epsilon": {"type": "number"},
                                   "p_surface": {"type": "number"}, "jump": {"type": "boolean"},
                                   "Lambda": {"type": "number"}}},
            "p_center": {"type": "number", "exclusiveMinimum": 0},
            "sweep": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                      "minItems": 1},
            "rtol": {"type": "number", "exclusiveMinimum": 0},
            "expect": {"type": "object", "additionalProperties": False, "properties": {
                "horizonless": {"type": "boolean"}}},
        }),
    },
    "check": {
        "type": "object", "additionalProperties": False, "required": ["kind", "seed", "suite"],
        "properties": dict(_COMMON, suite={"enum": sorted(checks.SUITES)}),
    },
}


def load_scenario(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(data, dict) or data.get("kind") not in SCHEMAS:
        raise ConfigurationError(f"scenario 'kind' must be one of {sorted(SCHEMAS)}")
    try:
        jsonschema.validate(data, SCHEMAS[data["kind"]])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"scenario {path}: {where}: {exc.message}") from exc
    return data


def _grid_to_array(grid):
    a = np.asarray(grid, float)
    return a[..., 0] + 1j * a[..., 1]


def build_model(spec: dict, dim: int) -> ModelSpec:
    constants = {k: _grid_to_array(v) for k, v in spec.get("constants", {}).items()}
    if "symbols" in spec:
        table = SymbolTable.from_dict(spec["symbols"])
    else:
        table = SymbolTable.standard(spec.get("n_dof", 1), constants=sorted(constants))
    poly = parse(spec["hamiltonian"], table, spec.get("params"))
    return ModelSpec(poly, dim, constants)


def _run_evolve(sc, out: Path, threads: int):
    model = build_model(sc["model"], sc["N"])
    state = unit_state(model.n_dof, sc["N"], sc["seed"])
    norm = sc.get("initial_norm", 1.0)
    state = PhaseSpaceState(state.q * norm, state.p * norm)
    traj, report = evolve(state, model, sc["T"], sc["dt"], sc.get("integrator", "rk4"),
                          sc.get("stride", 1), keep_states=sc.get("snapshots", False))
    files = {"trajectory.csv": lambda p: traj.write_csv(p),
             "report.json": lambda p: Path(p).write_text(
                 json.dumps(report.to_dict(), indent=2, sort_keys=True))}
    if sc.get("snapshots"):
        files["snapshots.json"] = traj.write_snapshots
    violations = []
    exp = sc.get("expect", {})
    if "max_energy_drift" in exp and report.max_energy_drift > exp["max_energy_drift"]:
        violations.append(f"energy drift {report.max_energy_drift:.3e} > {exp['max_energy_drift']}")
    if "max_tildeC_drift" in exp and report.max_tildeC_drift > exp["max_tildeC_drift"]:
        violations.append(f"C~ drift {report.max_tildeC_drift:.3e} > {exp['max_tildeC_drift']}")
    return files, violations


def _run_ensemble(sc, out: Path, threads: int):
    N = sc["N"]
    model = build_model(sc["model"], N)
    if "lambda_tilde" in sc:
        lam = _grid_to_array(sc["lambda_tilde"])
    else:
        lam = default_lambda(N, sc.get("lambda", 0.2))
    params = EnsembleParams(model, tau=sc["tau"], lambda_tilde=lam,
                            chains=sc.get("chains", 8), steps=sc.get("steps", 40_000),
                            burn_in=sc.get("burn_in", 4_000),
                            proposal_scale=sc.get("proposal_scale"), seed=sc["seed"])
    res = metropolis_chain(params, threads=threads)
    dec = extract_ieff(res.avgC, res.stderrC)
    text = results_json(res, dec)

    def trace_csv(path):
        with open(path, "w") as fh:
            fh.write("chain,index,TrH\n")
            for c, row in enumerate(res.traceH_samples):
                for k, v in enumerate(row):
                    fh.write(f"{c},{k},{v!r}\n")

    violations = []
    if sc.get("expect", {}).get("balanced_ieff"):
        plus, minus = dec.sign_multiplicities()
        if plus != minus or plus + minus != N:
            violations.append(f"i_eff multiplicities (+i: {plus}, -i: {minus})")
    return {"ensemble.json": lambda p: Path(p).write_text(text),
            "traceH.csv": trace_csv}, violations


def _run_gravastar(sc, out: Path, threads: int):
    eos = EOSSpec(**sc["eos"])
    kw = {"rtol": sc["rtol"]} if "rtol" in sc else {}
    files, violations = {}, []
    if "sweep" in sc:
        rows = sweep(sc["sweep"], [eos], threads=threads, **kw)
        files["sweep.csv"] = lambda p: write_sweep_csv(rows, p)
    if "p_center" in sc:
        sol = integrate_star(sc["p_center"], eos, **kw)
        summary = dict(sol.summary(), exterior_deviation=sol.exterior_deviation(),
                       horizonless=sol.is_horizonless())
        files["profile.csv"] = sol.write_profile_csv
        files["summary.json"] = lambda p: Path(p).write_text(
            json.dumps(summary, indent=2, sort_keys=True))
        if sc.get("expect", {}).get("horizonless") and not sol.is_horizonless():
            violations.append("solution has a horizon or trapped surface")
    if not files:
        raise ConfigurationError("gravastar scenario needs 'p_center' or 'sweep'")
    return files, violations


def _run_check(sc, out: Path, threads: int):
    results = checks.run_suite(sc["suite"])
    text = "\n".join(r.line() for r in results) + "\n"
    return ({"check.txt": lambda p: Path(p).write_text(text)},
            [r.name for r in results if not r.passed])


RUNNERS = {"evolve": _run_evolve, "ensemble": _run_ensemble,
           "gravastar": _run_gravastar, "check": _run_check}


def run(path, out_dir=".", threads=1, seed_override=None) -> int:
    """Execute one scenario; returns the process exit code."""
    try:
        sc = load_scenario(path)
        if seed_override is not None:
            sc["seed"] = seed_override
        files, violations = RUNNERS[sc["kind"]](sc, Path(out_dir), threads)
    except ConfigurationError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except InvariantViolation as exc:
        log.error("invariant violation: %s", exc)
        return EXIT_INVARIANT
    # everything is computed before anything is written
    os.makedirs(out_dir, exist_ok=True)
    for name, writer in files.items():
        writer(os.path.join(out_dir, name))
        log.info("wrote %s", os.path.join(out_dir, name))
    if violations:
        for v in violations:
            log.error("invariant violation: %s", v)
        return EXIT_INVARIANT
    return EXIT_OK


def check(suite: str, stream=None) -> int:
    stream = stream or sys.stdout
    try:
        results = checks.run_suite(suite)
    except ConfigurationError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    for r in results:
        print(r.line(), file=stream)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="tracedyn", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute a scenario JSON file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out-dir", default=".")
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--seed-override", type=int, default=None)
    p_check = sub.add_parser("check", help="run an invariant suite")
    p_check.add_argument("suite", help=", ".join(checks.SUITES))
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if args.command == "run":
        return run(args.scenario, args.out_dir, args.threads, args.seed_override)
    return check(args.suite)


if __name__ == "__main__":
    sys.exit(main())
