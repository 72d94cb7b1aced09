"""Scenario-driven command line interface.

A scenario is a JSON document naming a space, a command, command-specific
inputs, numeric parameters, and a seed.  Reports are JSON; plot data exports
as RFC-4180 CSV.  Exit codes: 0 success, 2 validation error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import sys
import time

import numpy as np

from . import __version__
from .energy import (
    ConfigTangent,
    Configuration,
    candidate_gradients,
    candidate_to_dict,
    dplus_distance,
    dplus_uniform_energy,
    gradient_like,
    gradient_like_all,
    hessian_index_nullity,
    loop_energy,
    uniform_energy,
)
from .errors import GeometryError, ValidationError
from .flow import FlowParams, FlowTrace, birkhoff_shorten, descend, restart_step, restart_until_stable
from .geodesics import (
    TWO_PI,
    VariationSpec,
    geodesic_from_dict,
    geodesic_to_dict,
    is_k_geodesic,
    is_openly_k_geodesic,
    minimizing_index,
    point_at,
    torus_class_minind,
    variation_minind_profile,
)
from .spaces import Tangent, point_from_dict, space_from_dict

SCHEMA_VERSION = 1

COMMANDS = (
    "dist",
    "dplus",
    "energy",
    "candgrad",
    "gradlike",
    "minind",
    "openly",
    "probe",
    "hessian",
    "flow",
    "restart",
    "sweep",
)

# single source of truth for every numeric default the CLI reports
DEFAULTS = {
    "tol": 1e-9,
    "samples": None,
    "step": FlowParams.step,
    "max_iters": FlowParams.max_iters,
    "grad_tol": FlowParams.grad_tol,
    "energy_tol": FlowParams.energy_tol,
    "perturb_eps": FlowParams.perturb_eps,
    "backtrack": FlowParams.backtrack,
    "record_every": FlowParams.record_every,
}


def _require(data: dict, key: str, where: str):
    if key not in data:
        raise ValidationError(f"{where}.{key}: missing required field")
    return data[key]


def _resolve_params(scenario: dict, overrides: dict) -> dict:
    params = dict(DEFAULTS)
    file_params = scenario.get("params", {})
    if not isinstance(file_params, dict):
        raise ValidationError("params: expected an object")
    for key, val in file_params.items():
        if key not in params:
            raise ValidationError(f"params.{key}: unknown parameter")
        params[key] = val
    for key, val in overrides.items():
        if val is not None:
            params[key] = val
    return params


def _flow_params(params: dict) -> FlowParams:
    return FlowParams(
        step=float(params["step"]),
        max_iters=int(params["max_iters"]),
        grad_tol=float(params["grad_tol"]),
        energy_tol=float(params["energy_tol"]),
        perturb_eps=None if params["perturb_eps"] is None else float(params["perturb_eps"]),
        backtrack=float(params["backtrack"]),
        record_every=int(params["record_every"]),
        tol=float(params["tol"]),
    )


def _trace_to_dict(trace: FlowTrace) -> dict:
    from .energy import configuration_to_dict

    return {
        "status": trace.status,
        "iterations": trace.iterations,
        "energies": list(trace.energies),
        "grad_norms": list(trace.grad_norms),
        "record_every": trace.record_every,
        "nudges": [list(t) for t in trace.nudges],
        "final": configuration_to_dict(trace.final),
        "error": trace.error,
    }


def _config_from_inputs(space, inputs: dict, where: str) -> Configuration:
    pts = _require(inputs, "points", where)
    if not isinstance(pts, list) or len(pts) < 2:
        raise ValidationError(f"{where}.points: expected a list of at least two points")
    return Configuration(space, tuple(point_from_dict(space, p) for p in pts))


def _curve_samples(geod, count: int = 256) -> list[dict]:
    rows = []
    for j in range(count + 1):
        t = TWO_PI * (j % count) / count
        p = point_at(geod, t)
        rows.append({"t": TWO_PI * j / count, "coords": [float(c) for c in p.coords]})
    return rows


# -- command handlers -------------------------------------------------------------


def _run_dist(space, inputs, params, seed):
    p = point_from_dict(space, _require(inputs, "p", "inputs"))
    q = point_from_dict(space, _require(inputs, "q", "inputs"))
    segs = space.minimizing_geodesics(p, q, float(params["tol"]))
    return {
        "distance": space.distance(p, q),
        "num_minimizing": len(segs),
        "is_cut_pair": len(segs) >= 2,
        "minimizing": [
            {
                "length": s.length,
                "v0": [float(v) for v in s.v0],
                "v1": [float(v) for v in s.v1],
                "lift": _json_lift(s.lift),
            }
            for s in segs
        ],
    }


def _json_lift(lift):
    if isinstance(lift, tuple):
        return [_json_lift(v) for v in lift]
    return int(lift)


def _run_dplus(space, inputs, params, seed):
    p = point_from_dict(space, _require(inputs, "p", "inputs"))
    q = point_from_dict(space, _require(inputs, "q", "inputs"))
    v = np.asarray(_require(inputs, "v", "inputs"), dtype=float)
    w = np.asarray(_require(inputs, "w", "inputs"), dtype=float)
    return {"dplus": dplus_distance(space, p, q, v, w, float(params["tol"]))}


def _run_energy(space, inputs, params, seed):
    x = _config_from_inputs(space, inputs, "inputs")
    diag = loop_energy(x)
    out = {"uniform_energy": uniform_energy(x), "loop_energy": diag.energy, "loop_length": diag.length}
    if "tangent" in inputs:
        v = ConfigTangent.of(x, inputs["tangent"])
        out["dplus"] = dplus_uniform_energy(x, v, float(params["tol"]))
    return out


def _run_candgrad(space, inputs, params, seed):
    x = _config_from_inputs(space, inputs, "inputs")
    cands = candidate_gradients(x, float(params["tol"]))
    maxima = gradient_like_all(x, float(params["tol"]))
    return {
        "count": len(cands),
        "candidates": [candidate_to_dict(c) for c in cands],
        "gradient_like": [candidate_to_dict(c) for c in maxima],
    }


def _run_gradlike(space, inputs, params, seed):
    x = _config_from_inputs(space, inputs, "inputs")
    return {"gradient_like": candidate_to_dict(gradient_like(x, float(params["tol"])))}


def _run_minind(space, inputs, params, seed):
    geod = geodesic_from_dict(_require(inputs, "geodesic", "inputs"), space)
    samples = params["samples"]
    out = {
        "minind": minimizing_index(geod, samples, float(params["tol"])),
        "length": geod.length,
        "curve": _curve_samples(geod),
    }
    if geod.kind == "torus_class":
        out["closed_form_minind"] = torus_class_minind(geod)
    return out


def _run_openly(space, inputs, params, seed):
    geod = geodesic_from_dict(_require(inputs, "geodesic", "inputs"), space)
    k = int(_require(inputs, "k", "inputs"))
    samples = params["samples"]
    tol = float(params["tol"])
    is_k = is_k_geodesic(geod, k, samples, tol)
    return {
        "k": k,
        "is_k_geodesic": is_k,
        "openly": is_openly_k_geodesic(geod, k, samples, tol) if is_k else False,
    }


def _run_probe(space, inputs, params, seed):
    vdata = _require(inputs, "variation", "inputs")
    geod = geodesic_from_dict(_require(vdata, "geodesic", "inputs.variation"), space)
    var = VariationSpec(
        geodesic=geod,
        field=np.asarray(_require(vdata, "field", "inputs.variation"), dtype=float),
        s_max=float(_require(vdata, "s_max", "inputs.variation")),
        steps=int(_require(vdata, "steps", "inputs.variation")),
        perpendicular=bool(vdata.get("perpendicular", False)),
    )
    profile = variation_minind_profile(
        var, inputs.get("k"), params["samples"], float(params["tol"])
    )
    return {
        "k0": profile.k0,
        "cut_t": profile.cut_t,
        "cut_distance": profile.cut_distance,
        "dplus": profile.dplus,
        "openly_preserved": profile.openly_preserved,
        "forward_index_jump": profile.forward_index_jump,
        "profile": [
            {"s": r.s, "minind": r.minind, "openly": r.openly} for r in profile.rows
        ],
    }


def _run_hessian(space, inputs, params, seed):
    x = _config_from_inputs(space, inputs, "inputs")
    zero_tol = float(inputs.get("zero_tol", 1e-6))
    report = hessian_index_nullity(x, zero_tol=zero_tol, tol=float(params["tol"]))
    return {
        "index": report.index,
        "nullity": report.nullity,
        "eigenvalues": list(report.eigenvalues),
        "zero_tol": report.zero_tol,
        "degenerate": report.degenerate,
    }


def _run_flow(space, inputs, params, seed):
    x = _config_from_inputs(space, inputs, "inputs")
    if "perturb" in inputs:
        mag = float(_require(inputs["perturb"], "magnitude", "inputs.perturb"))
        rng = np.random.default_rng(seed)
        pts = tuple(
            space.exp_map(Tangent(p, rng.standard_normal(space.dim)), mag)
            for p in x.points
        )
        x = Configuration(space, pts)
    method = inputs.get("method", "descend")
    if method not in ("descend", "birkhoff"):
        raise ValidationError("inputs.method: expected 'descend' or 'birkhoff'")
    fp = _flow_params(params)
    trace = descend(x, fp) if method == "descend" else birkhoff_shorten(x, fp)
    out = {"method": method, "trace": _trace_to_dict(trace)}
    if trace.status == "error":
        raise PartialResultError("flow ended in an error state", out)
    return out


def _run_restart(space, inputs, params, seed):
    geod = geodesic_from_dict(_require(inputs, "geodesic", "inputs"), space)
    rounds = int(inputs.get("rounds", 1))
    fp = _flow_params(params)
    if rounds == 1:
        reports = [restart_step(geod, fp, params["samples"], float(params["tol"]))]
    else:
        reports = restart_until_stable(geod, fp, rounds, params["samples"], float(params["tol"]))
    return {"rounds": len(reports), "reports": [_restart_to_dict(r) for r in reports]}


def _restart_to_dict(r) -> dict:
    return {
        "status": r.status,
        "before": geodesic_to_dict(r.before),
        "before_minind": r.before_minind,
        "perturb_eps": r.perturb_eps,
        "direction": None if r.direction is None else candidate_to_dict(r.direction),
        "after": None if r.after is None else geodesic_to_dict(r.after),
        "after_minind": r.after_minind,
        "trace": None if r.trace is None else _trace_to_dict(r.trace),
    }


class PartialResultError(GeometryError):
    """A numerical failure that still carries a partial report."""

    def __init__(self, message: str, partial: dict):
        super().__init__(message)
        self.partial = partial


HANDLERS = {
    "dist": _run_dist,
    "dplus": _run_dplus,
    "energy": _run_energy,
    "candgrad": _run_candgrad,
    "gradlike": _run_gradlike,
    "minind": _run_minind,
    "openly": _run_openly,
    "probe": _run_probe,
    "hessian": _run_hessian,
    "flow": _run_flow,
    "restart": _run_restart,
}


def _canonical(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def _digest(scenario: dict) -> str:
    return hashlib.sha256(_canonical(scenario).encode()).hexdigest()


def execute_scenario(scenario: dict, overrides: dict | None = None) -> dict:
    """Run one scenario object and build its report (may raise)."""
    overrides = overrides or {}
    if not isinstance(scenario, dict):
        raise ValidationError("scenario: expected a JSON object")
    command = _require(scenario, "command", "scenario")
    if command not in COMMANDS:
        raise ValidationError(f"scenario.command: unknown command {command!r}")
    seed = _require(scenario, "seed", "scenario")
    if not isinstance(seed, int):
        raise ValidationError("scenario.seed: expected an integer")
    params = _resolve_params(scenario, overrides)

    started = time.perf_counter()
    if command == "sweep":
        subs = _require(scenario.get("inputs", {}), "scenarios", "inputs")
        if not isinstance(subs, list) or not subs:
            raise ValidationError("inputs.scenarios: expected a nonempty list")
        jobs = int(overrides.get("jobs") or scenario.get("jobs", 2) or 2)
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            sub_reports = list(pool.map(lambda s: execute_scenario(s, overrides), subs))
        outputs = {"reports": sub_reports}
    else:
        space = space_from_dict(_require(scenario, "space", "scenario"))
        inputs = scenario.get("inputs", {})
        if not isinstance(inputs, dict):
            raise ValidationError("inputs: expected an object")
        outputs = HANDLERS[command](space, inputs, params, seed)
    elapsed_ms = 1000.0 * (time.perf_counter() - started)

    return {
        "schema": SCHEMA_VERSION,
        "digest": _digest(scenario),
        "command": command,
        "seed": seed,
        "library_version": __version__,
        "params_resolved": params,
        "outputs": outputs,
        "wall_time_ms": elapsed_ms,
    }


def run_scenario(path: str, out_path: str | None = None, overrides: dict | None = None,
                 stream=None, seed: int | None = None) -> int:
    """Load, validate, and execute a scenario file; write the report.

    Returns the process exit code (0 ok, 2 validation, 3 numerical).
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            scenario = json.load(fh)
    except OSError as exc:
        print(f"error: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: scenario is not valid JSON (line {exc.lineno}): {exc.msg}", file=sys.stderr)
        return 2
    if seed is not None and isinstance(scenario, dict):
        scenario["seed"] = seed

    partial = None
    try:
        report = execute_scenario(scenario, overrides)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except PartialResultError as exc:
        partial = {
            "schema": SCHEMA_VERSION,
            "digest": _digest(scenario),
            "command": scenario.get("command"),
            "library_version": __version__,
            "error": str(exc),
            "outputs": exc.partial,
        }
        report = None
    except GeometryError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3

    payload = report if report is not None else partial
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if stream and report is not None and report["command"] == "flow":
        trace = report["outputs"]["trace"]
        with open(stream, "w", encoding="utf-8") as fh:
            for i, (e, gn) in enumerate(zip(trace["energies"], trace["grad_norms"])):
                fh.write(_canonical({"iteration": i * trace["record_every"], "energy": e,
                                     "grad_norm": gn}) + "\n")
    if stream and report is not None and report["command"] == "probe":
        with open(stream, "w", encoding="utf-8") as fh:
            for row in report["outputs"]["profile"]:
                fh.write(_canonical(row) + "\n")
    if report is None:
        print("numerical error: partial report written", file=sys.stderr)
        return 3
    return 0


# -- plot data ---------------------------------------------------------------------


def emit_plot_data(report_path: str, kind: str, out_path: str) -> int:
    """Extract a CSV series (trace, profile, or curve) from a report file."""
    try:
        with open(report_path, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read report: {exc}", file=sys.stderr)
        return 2
    outputs = report.get("outputs", {})
    try:
        if kind == "trace":
            trace = outputs.get("trace")
            if trace is None:
                raise ValidationError("report has no flow trace")
            rows = [
                (i * trace["record_every"], e, g)
                for i, (e, g) in enumerate(zip(trace["energies"], trace["grad_norms"]))
            ]
            header = ("iteration", "energy", "grad_norm")
        elif kind == "profile":
            prof = outputs.get("profile")
            if prof is None:
                raise ValidationError("report has no variation profile")
            rows = [(r["s"], r["minind"], int(r["openly"])) for r in prof]
            header = ("s", "minind", "openly")
        elif kind == "curve":
            curve = outputs.get("curve")
            if curve is None:
                raise ValidationError("report has no curve samples")
            dim = len(curve[0]["coords"])
            header = ("t",) + tuple(f"x{i}" for i in range(dim))
            rows = [tuple([r["t"]] + r["coords"]) for r in curve]
        else:
            raise ValidationError(f"unknown plot kind {kind!r}")
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return 0


# -- entry point --------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopflow",
        description="closed-geodesic energy flows on flat quotient geometries",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", help="path to the scenario JSON file")
    run.add_argument("--out", help="report output path (default: stdout)")
    run.add_argument("--tol", type=float, help="minimizer tie tolerance")
    run.add_argument("--samples", type=int, help="sample count for loop predicates")
    run.add_argument("--step", type=float, help="descent step size")
    run.add_argument("--max-iters", type=int, dest="max_iters")
    run.add_argument("--perturb-eps", type=float, dest="perturb_eps")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--jobs", type=int, help="concurrency bound for sweep scenarios")
    run.add_argument("--stream", help="also write a JSON-lines flow trace to this path")

    plot = sub.add_parser("plot", help="export plot data from a report")
    plot.add_argument("report", help="path to a report JSON file")
    plot.add_argument("--kind", required=True, choices=("trace", "profile", "curve"))
    plot.add_argument("--out", required=True, help="CSV output path")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.subcommand == "run":
        overrides = {
            "tol": args.tol,
            "samples": args.samples,
            "step": args.step,
            "max_iters": args.max_iters,
            "perturb_eps": args.perturb_eps,
            "jobs": args.jobs,
        }
        return run_scenario(args.scenario, args.out, overrides, args.stream, seed=args.seed)
    if args.subcommand == "plot":
        return emit_plot_data(args.report, args.kind, args.out)
    return 2


if __name__ == "__main__":
    sys.exit(main())
