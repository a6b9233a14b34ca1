"""Command-line front-end: problem files in, JSON reports and CSV out.

    cusp analyze-loop problem.json [--out report.json] [--csv path.csv]
                                   [--steps N] [--periods K]
    cusp localize     problem.json [--max-depth D] [--root-tol X]
    cusp shrink-scan  problem.json --at x,y
    cusp check-gcp    problem.json --at x,y

Exit codes: 0 ok, 2 input error, 3 numerical failure, 4 check failed.
Report floats are formatted with 17 significant digits so identical inputs
produce byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import cusp as cusp_mod
from . import loops as loops_mod
from . import model as model_mod
from ._kernels import active_backend
from .errors import CuspTrackError, ExprError
from .flow import FlowOptions, integrate_loop, monodromy, monodromy_at


class ProblemError(ValueError):
    """Problem-file validation failure (exit code 2)."""


# ---------------------------------------------------------------------------
# Deterministic JSON with fixed float formatting


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps_report(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return dumps_report(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps_report(v) for v in obj) + "]"
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + dumps_report(v) for k, v in obj.items()) + "}"
    raise TypeError(f"cannot serialize {type(obj)}")


# ---------------------------------------------------------------------------
# Problem files


@dataclass
class Problem:
    fn: model_mod.ParamMatrixFn
    loop: loops_mod.LoopSpec
    domain: cusp_mod.Rect
    options: dict


def _require(cond, message):
    if not cond:
        raise ProblemError(message)


def load_problem(path: str) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise ProblemError(f"cannot read problem file: {err}") from err
    except json.JSONDecodeError as err:
        raise ProblemError(f"problem file is not valid JSON: {err}") from err
    return problem_from_dict(doc)


def problem_from_dict(doc: dict) -> Problem:
    _require(isinstance(doc, dict), "problem file must be a JSON object")
    n = doc.get("n")
    _require(isinstance(n, int) and n >= 1, '"n" must be a positive integer')

    has_entries = "entries" in doc
    has_model = "model" in doc
    _require(has_entries != has_model, 'exactly one of "entries" and "model" is required')
    if has_model:
        name = doc["model"]
        _require(name in model_mod.BUILTIN_MODELS, f'unknown model {name!r}')
        fn = model_mod.BUILTIN_MODELS[name](epsilon=doc.get("epsilon"))
        _require(fn.n == n, f'"n"={n} does not match model {name!r} (n={fn.n})')
    else:
        entries = doc["entries"]
        _require(
            isinstance(entries, list) and len(entries) == n and all(
                isinstance(row, list) and len(row) == n for row in entries
            ),
            '"entries" must be an n x n grid of expression strings',
        )
        try:
            fn = model_mod.from_expressions(entries)
        except ExprError as err:
            raise ProblemError(f"bad entry expression: {err}") from err

    dom = doc.get("domain")
    _require(
        isinstance(dom, dict) and "x" in dom and "y" in dom,
        '"domain" must give "x" and "y" ranges',
    )
    try:
        domain = cusp_mod.Rect(float(dom["x"][0]), float(dom["x"][1]), float(dom["y"][0]), float(dom["y"][1]))
    except (ValueError, TypeError, IndexError) as err:
        raise ProblemError(f"bad domain rectangle: {err}") from err

    loop = _load_loop(doc.get("loop"), domain)
    options = doc.get("options", {})
    _require(isinstance(options, dict), '"options" must be an object')
    return Problem(fn=fn, loop=loop, domain=domain, options=options)


def _load_loop(spec, domain: cusp_mod.Rect) -> loops_mod.LoopSpec:
    _require(isinstance(spec, dict) and "kind" in spec, '"loop" must be an object with "kind"')
    kind = spec["kind"]
    try:
        if kind == "circle":
            loop = loops_mod.Circle(center=tuple(map(float, spec["center"])), radius=float(spec["radius"]))
        elif kind == "ellipse":
            loop = loops_mod.Ellipse(
                center=tuple(map(float, spec["center"])), semi_axes=tuple(map(float, spec["semi_axes"]))
            )
        elif kind == "polygon":
            verts = [tuple(map(float, v)) for v in spec["vertices"]]
            edges = [np.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(verts, verts[1:] + verts[:1])]
            radius = float(spec.get("corner_radius", 0.05 * min(edges)))
            loop = loops_mod.SmoothedPolygon(verts, corner_radius=radius)
        else:
            raise ProblemError(f'unknown loop kind {kind!r}')
    except ProblemError:
        raise
    except (KeyError, ValueError, TypeError) as err:
        raise ProblemError(f"bad loop specification: {err}") from err

    pts = loop.points(np.arange(256) / 256.0)
    if not all(domain.contains(p, margin=1e-12) for p in pts):
        raise ProblemError("loop does not lie within the domain rectangle")
    return loop


def _parse_at(text: str, domain: cusp_mod.Rect | None = None) -> np.ndarray:
    try:
        x, y = (float(part) for part in text.split(","))
    except ValueError as err:
        raise ProblemError(f"--at expects 'x,y', got {text!r}") from err
    p = np.array([x, y])
    if domain is not None and not domain.contains(p):
        raise ProblemError(f"point ({x}, {y}) lies outside the domain rectangle")
    return p


# ---------------------------------------------------------------------------
# Report assembly


def _report_skeleton(command: str) -> dict:
    return {"command": command, "monodromy": None, "gcps": None, "shrink": None, "diagnostics": None}


def _monodromy_section(mono) -> dict:
    return {
        "permutation": [int(p) for p in mono.permutation],
        "phases": [float(a) for a in mono.phases],
        "phase_sum_mod_pi": mono.phase_sum_mod_pi,
        "pattern_residual": mono.pattern_residual,
        "det_drift": mono.det_drift,
    }


def _candidate_section(cand) -> dict:
    out = {
        "location": [cand.location[0], cand.location[1]],
        "status": cand.status,
        "F_residual": cand.F_residual,
        "DF_condition": cand.DF_condition,
    }
    if cand.certification is not None:
        out["certification"] = cand.certification
    return out


def _path_diagnostics(path) -> dict:
    return {
        "residual_max": float(path.residual.max()),
        "norm_drift_max": float(path.norm_drift.max()),
        "gauge_identity_max": float(path.gauge_identity.max()),
        "im_diag_p_max": float(path.im_diag_p.max()),
        "steps_per_period": path.steps_per_period,
        "periods": path.periods,
        "refinements": path.refinements,
        "backend": path.backend,
    }


def write_path_csv(path, stream):
    n = path.n
    cols = ["t"]
    for j in range(n):
        cols += [f"re_lambda_{j + 1}", f"im_lambda_{j + 1}"]
    cols += ["norm_drift", "residual"]
    stream.write(",".join(cols) + "\n")
    for i in range(len(path.t)):
        row = [_format_float(float(path.t[i]))]
        for j in range(n):
            row.append(_format_float(float(path.lambdas[i, j].real)))
            row.append(_format_float(float(path.lambdas[i, j].imag)))
        row.append(_format_float(float(path.norm_drift[i])))
        row.append(_format_float(float(path.residual[i])))
        stream.write(",".join(row) + "\n")


def _flow_options(problem: Problem) -> FlowOptions:
    tol = problem.options.get("tolerances", {})
    kwargs = {}
    for key in ("gap_floor_rel", "norm_tol", "path_tol", "correction_interval"):
        if key in tol:
            kwargs[key] = tol[key]
    return FlowOptions(**kwargs)


def _steps(problem: Problem, args) -> int:
    if args.steps is not None:
        return args.steps
    return int(problem.options.get("steps", 2048))


# ---------------------------------------------------------------------------
# Commands


def cmd_analyze_loop(args) -> int:
    problem = load_problem(args.problem)
    periods = args.periods if args.periods is not None else int(problem.options.get("periods", 1))
    path = integrate_loop(
        problem.fn,
        problem.loop,
        periods=periods,
        steps_per_period=_steps(problem, args),
        options=_flow_options(problem),
    )
    mono = monodromy(path) if periods == 1 else monodromy_at(path, float(path.t[0]))
    report = _report_skeleton("analyze-loop")
    report["monodromy"] = _monodromy_section(mono)
    report["diagnostics"] = _path_diagnostics(path)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="\n") as fh:
            write_path_csv(path, fh)
    _emit(report, args)
    return 0


def cmd_localize(args) -> int:
    problem = load_problem(args.problem)
    kwargs = {}
    if args.max_depth is not None:
        kwargs["max_depth"] = args.max_depth
    if args.root_tol is not None:
        kwargs["root_tol"] = args.root_tol
    if "steps" in problem.options or args.steps is not None:
        kwargs["steps_per_period"] = _steps(problem, args) if args.steps is not None else int(problem.options["steps"])
    opts = cusp_mod.LocalizeOptions(**kwargs)
    result = cusp_mod.localize(problem.fn, problem.domain, opts)
    report = _report_skeleton("localize")
    report["gcps"] = [_candidate_section(c) for c in result.candidates]
    report["diagnostics"] = {
        "cells_processed": result.cells_processed,
        "seeds_tried": result.seeds_tried,
        "unresolved_cells": len(result.unresolved_cells),
        "indicated_cells": [
            {
                "rect": [c.rect.xlo, c.rect.xhi, c.rect.ylo, c.rect.yhi],
                "permutation": [int(p) for p in c.permutation],
                "coalescing_indices": [int(i) for i in c.coalescing_indices],
            }
            for c in result.indicated_cells
        ],
        "backend": active_backend(),
    }
    _emit(report, args)
    return 0


def cmd_shrink_scan(args) -> int:
    problem = load_problem(args.problem)
    anchor = _parse_at(args.at, problem.domain)
    scales = problem.options.get("scales")
    opts = cusp_mod.ShrinkScanOptions(steps_per_period=_steps(problem, args))
    scan = cusp_mod.shrink_scan(problem.fn, anchor, problem.loop, scales=scales, options=opts)
    report = _report_skeleton("shrink-scan")
    report["shrink"] = {
        "anchor": [scan.anchor[0], scan.anchor[1]],
        "scales": [float(s) for s in scan.scales],
        "phases": [[float(a) for a in row] for row in scan.phases],
        "exponent": None if scan.exponent_gcp is None else [float(e) for e in scan.exponent_gcp],
        "exponent_regular": None if scan.exponent_regular is None else [float(e) for e in scan.exponent_regular],
        "class": scan.classification,
        "fit_mode": scan.fit_mode,
    }
    report["diagnostics"] = {"backend": active_backend()}
    _emit(report, args)
    return 0


def cmd_check_gcp(args) -> int:
    problem = load_problem(args.problem)
    seed = _parse_at(args.at, problem.domain)
    root_tol = args.root_tol if args.root_tol is not None else 1e-10
    cand = cusp_mod.newton_refine(problem.fn, seed, root_tol=root_tol)
    report = _report_skeleton("check-gcp")
    report["gcps"] = [_candidate_section(cand)]
    report["diagnostics"] = {"seed": [float(seed[0]), float(seed[1])], "backend": active_backend()}
    _emit(report, args)
    return 0 if cand.status == "verified" else 4


def _emit(report: dict, args):
    text = dumps_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cusp", description="Eigenvalue monodromy and cuspidal point tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_at=False):
        p.add_argument("problem", help="problem JSON file")
        p.add_argument("--out", help="write the JSON report to this file instead of stdout")
        p.add_argument("--steps", type=int, help="RK4 steps per period")
        if with_at:
            p.add_argument("--at", required=True, help="point 'x,y'")

    p = sub.add_parser("analyze-loop", help="integrate the loop and report the monodromy")
    common(p)
    p.add_argument("--periods", type=int, help="number of loop traversals")
    p.add_argument("--csv", help="dump the sampled path to this CSV file")
    p.set_defaults(func=cmd_analyze_loop)

    p = sub.add_parser("localize", help="locate cuspidal points in the domain rectangle")
    common(p)
    p.add_argument("--max-depth", type=int, dest="max_depth", help="quadtree depth limit")
    p.add_argument("--root-tol", type=float, dest="root_tol", help="Newton acceptance tolerance")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("shrink-scan", help="classify a point by shrinking-loop phase asymptotics")
    common(p, with_at=True)
    p.set_defaults(func=cmd_shrink_scan)

    p = sub.add_parser("check-gcp", help="verify a cuspidal point from a seed")
    common(p, with_at=True)
    p.add_argument("--root-tol", type=float, dest="root_tol", help="Newton acceptance tolerance")
    p.set_defaults(func=cmd_check_gcp)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProblemError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CuspTrackError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
