"""Command-line front end: load problems, run analyses, emit reports.

Subcommands: analyze (full pipeline), criticality, sosc, cones, perturb.
Reports render as aligned text or canonical JSON; identical invocations
produce byte-identical JSON. Exit codes: 0 success, 1 usage, 2 bad or
uncertified input, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cones import cone_context, is_normal_cone_polyhedral, strict_complementarity
from .criticality import (
    build_system,
    check_rcq,
    check_srcq,
    classify_multiplier,
    xpart_condition,
)
from .errors import ConvergenceError, InputDataError, NumericError
from .perturb import error_bound_experiment, report_to_csv, report_to_dict
from .problem import (
    FAMILY_NAMES,
    PerturbationFamily,
    builtin_family,
    eval_G,
    kkt_point,
    load_point,
    load_problem,
)
from .sosc import check_soscy, theorem3_conditions
from .symmat import SymMat, as_symmat

SCHEMA = "kkt-spectra/1"


@dataclass(frozen=True)
class AnalysisRequest:
    """Validated invocation: one problem source plus knobs."""

    command: str
    problem: Optional[str] = None
    family: Optional[str] = None
    point: Optional[str] = None
    direction: Optional[list] = None
    tol_eig: Optional[float] = None
    tol_feas: float = 1e-8
    seed: int = 42
    fmt: str = "text"
    grid_points: int = 181
    samples: int = 64
    geo: Optional[tuple] = None
    p1: Optional[list] = None
    p2: Optional[list] = None
    csv: Optional[str] = None

    def __post_init__(self):
        if (self.problem is None) == (self.family is None):
            raise InputDataError("exactly one of --problem or --family is required")
        if self.tol_eig is not None and self.tol_eig <= 0:
            raise InputDataError("--tol-eig must be positive")
        if self.tol_feas <= 0:
            raise InputDataError("--tol-feas must be positive")
        if self.grid_points < 2:
            raise InputDataError("--grid-points must be at least 2")
        if self.samples < 1:
            raise InputDataError("--samples must be at least 1")


class _Parser(argparse.ArgumentParser):
    # usage problems exit with code 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _geo_schedule(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("--geo expects start:end:count")
    try:
        start, end = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad --geo value: {exc}") from exc
    if start <= 0 or end <= 0:
        raise argparse.ArgumentTypeError("--geo endpoints must be positive")
    if count < 1:
        raise argparse.ArgumentTypeError("--geo count must be at least 1")
    return (start, end, count)


def _inline_json(label):
    def parse(text: str):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise argparse.ArgumentTypeError(f"{label} is not valid JSON: {exc}") from exc

    return parse


def build_parser() -> _Parser:
    parser = _Parser(prog="kkt-spectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("analyze", "full pipeline: residuals, partition, qualifications, verdicts"),
        ("criticality", "multiplier classification and the x-part condition"),
        ("sosc", "second-order condition and the two local-bound conditions"),
        ("cones", "eigenvalue partition and complementarity flags"),
        ("perturb", "perturbation sweep with order fit and bound verdicts"),
    ):
        sp = sub.add_parser(name, help=blurb)
        src = sp.add_mutually_exclusive_group(required=True)
        src.add_argument("--problem", help="problem JSON file")
        src.add_argument(
            "--family", choices=FAMILY_NAMES, help="builtin perturbation family"
        )
        sp.add_argument("--point", help="point JSON file {x, Y} (default: family reference)")
        sp.add_argument(
            "--direction",
            type=_inline_json("--direction"),
            help="inline JSON matrix steering a builtin family's perturbation",
        )
        sp.add_argument("--tol-eig", type=float, help="eigenvalue zero-classification tolerance")
        sp.add_argument("--tol-feas", type=float, default=1e-8, help="feasibility tolerance")
        sp.add_argument("--seed", type=int, default=42, help="seed for all sampling")
        sp.add_argument("--format", choices=("text", "json"), default="text")
        sp.add_argument("--grid-points", type=int, default=181, help="rotation grid resolution")
        sp.add_argument("--samples", type=int, default=64, help="sampling budget")
        if name == "perturb":
            sp.add_argument(
                "--geo",
                type=_geo_schedule,
                required=True,
                help="geometric schedule start:end:count",
            )
            sp.add_argument("--p1", type=_inline_json("--p1"), help="inline JSON stationarity shift direction")
            sp.add_argument("--p2", type=_inline_json("--p2"), help="inline JSON cone shift direction")
            sp.add_argument("--csv", help="also write sweep rows to this CSV file")
    return parser


def request_from_args(args) -> AnalysisRequest:
    return AnalysisRequest(
        command=args.command,
        problem=args.problem,
        family=args.family,
        point=args.point,
        direction=args.direction,
        tol_eig=args.tol_eig,
        tol_feas=args.tol_feas,
        seed=args.seed,
        fmt=args.format,
        grid_points=args.grid_points,
        samples=args.samples,
        geo=getattr(args, "geo", None),
        p1=getattr(args, "p1", None),
        p2=getattr(args, "p2", None),
        csv=getattr(args, "csv", None),
    )


def _resolve_inputs(req: AnalysisRequest):
    """Problem data plus the point to analyze, from files or a builtin."""
    if req.family is not None:
        fam = builtin_family(req.family, req.direction)
        pd = fam.problem
        x, Y = fam.xbar, fam.ybar
    else:
        fam = None
        pd = load_problem(req.problem)
        if req.point is None:
            raise InputDataError("--problem requires --point")
        x, Y = None, None
    if req.point is not None:
        x, Y = load_point(req.point, pd.n, pd.p)
    return fam, pd, x, Y


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, SymMat):
        return _jsonable(value.full())
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def _flatten(prefix, value, lines):
    if isinstance(value, dict):
        for k in sorted(value):
            _flatten(f"{prefix}.{k}" if prefix else str(k), value[k], lines)
    elif isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, lines)
    else:
        if isinstance(value, list):
            body = "[" + ", ".join(_scalar_text(v) for v in value) + "]"
        else:
            body = _scalar_text(value)
        lines.append(f"{prefix} = {body}")


def _scalar_text(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, float):
        return f"{v:.10g}"
    return str(v)


def render(payload: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(payload), sort_keys=True, indent=2, allow_nan=False)
    lines = []
    _flatten("", _jsonable(payload), lines)
    return "\n".join(lines)


def _partition_payload(ctx):
    d = ctx.decomp
    return {
        "eigenvalues": [float(v) for v in d.lam],
        "alpha": [int(i) for i in d.alpha],
        "beta": [int(i) for i in d.beta],
        "gamma": [int(i) for i in d.gamma],
        "strict_complementarity": strict_complementarity(ctx),
        "normal_cone_polyhedral": is_normal_cone_polyhedral(ctx),
    }


def _criticality_payload(sysm, req: AnalysisRequest):
    verdict = classify_multiplier(
        sysm,
        {"grid_points": req.grid_points, "samples": req.samples, "seed": req.seed},
    )
    out = {
        "tag": verdict.tag,
        "certificate": verdict.certificate,
        "witness_residual": verdict.residual,
    }
    if verdict.witness is not None:
        xi, eta = verdict.witness
        out["witness"] = {"xi": xi, "eta": eta}
    else:
        out["witness"] = None
    return out


def _soscy_payload(pd, x, Y, req: AnalysisRequest):
    rep = check_soscy(pd, x, Y, {"starts": req.samples, "seed": req.seed})
    return {
        "verdict": rep.verdict,
        "sonc_verdict": rep.sonc_verdict,
        "min_value": rep.min_value,
        "minimizer": rep.minimizer,
        "search_stats": rep.search_stats,
    }


def cmd_analyze(req: AnalysisRequest) -> dict:
    _, pd, x, Y = _resolve_inputs(req)
    kkt = kkt_point(pd, x, Y)
    sysm = build_system(pd, kkt, tol=req.tol_eig)
    return {
        "schema": SCHEMA,
        "command": "analyze",
        "source": req.family or req.problem,
        "kkt_residuals": {
            "stationarity": kkt.residuals[0],
            "complementarity": kkt.residuals[1],
        },
        "partition": _partition_payload(sysm.ctx),
        "constraint_qualifications": {
            "rcq": check_rcq(pd, x, tol_feas=req.tol_feas),
            "srcq": check_srcq(pd, x, Y),
        },
        "criticality": _criticality_payload(sysm, req),
        "x_part_condition": xpart_condition(sysm),
        "soscy": _soscy_payload(pd, x, Y, req),
        "local_bound_conditions": theorem3_conditions(
            pd, x, Y, {"samples": req.samples, "seed": req.seed}
        ),
    }


def cmd_criticality(req: AnalysisRequest) -> dict:
    _, pd, x, Y = _resolve_inputs(req)
    sysm = build_system(pd, kkt_point(pd, x, Y), tol=req.tol_eig)
    return {
        "schema": SCHEMA,
        "command": "criticality",
        "source": req.family or req.problem,
        "partition": _partition_payload(sysm.ctx),
        "criticality": _criticality_payload(sysm, req),
        "x_part_condition": xpart_condition(sysm),
    }


def cmd_sosc(req: AnalysisRequest) -> dict:
    _, pd, x, Y = _resolve_inputs(req)
    build_system(pd, kkt_point(pd, x, Y), tol=req.tol_eig)  # certification gate
    return {
        "schema": SCHEMA,
        "command": "sosc",
        "source": req.family or req.problem,
        "soscy": _soscy_payload(pd, x, Y, req),
        "local_bound_conditions": theorem3_conditions(
            pd, x, Y, {"samples": req.samples, "seed": req.seed}
        ),
    }


def cmd_cones(req: AnalysisRequest) -> dict:
    _, pd, x, Y = _resolve_inputs(req)
    kkt = kkt_point(pd, x, Y)
    ctx = cone_context(eval_G(pd, x), as_symmat(Y), tol_zero=req.tol_eig)
    return {
        "schema": SCHEMA,
        "command": "cones",
        "source": req.family or req.problem,
        "kkt_residuals": {
            "stationarity": kkt.residuals[0],
            "complementarity": kkt.residuals[1],
        },
        "partition": _partition_payload(ctx),
    }


def cmd_perturb(req: AnalysisRequest) -> dict:
    fam, pd, x, Y = _resolve_inputs(req)
    if fam is None:
        if req.p1 is None or req.p2 is None:
            raise InputDataError("user problems need --p1 and --p2 perturbation directions")
        kkt = kkt_point(pd, x, Y)
        if not kkt.certified:
            raise InputDataError(
                f"KKT residuals {kkt.residuals} exceed certification tolerance"
            )
        p1d = np.asarray(req.p1, dtype=float).reshape(pd.n)
        p2d = as_symmat(req.p2)
        if p2d.p != pd.p:
            raise InputDataError("--p2 order does not match the problem")
        fam = PerturbationFamily(
            "user", pd, np.asarray(x, dtype=float), Y, lambda s: (s * p1d, float(s) * p2d)
        )
    start, end, count = req.geo
    schedule = np.geomspace(start, end, count)
    report = error_bound_experiment(fam, schedule, {"seed": req.seed})
    payload = {
        "schema": SCHEMA,
        "command": "perturb",
        "source": fam.name,
        **report_to_dict(report),
    }
    if req.csv:
        with open(req.csv, "w", encoding="utf-8") as fh:
            fh.write(report_to_csv(report))
        payload["csv"] = req.csv
    return payload


_DISPATCH = {
    "analyze": cmd_analyze,
    "criticality": cmd_criticality,
    "sosc": cmd_sosc,
    "cones": cmd_cones,
    "perturb": cmd_perturb,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        req = request_from_args(args)
        payload = _DISPATCH[req.command](req)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, ConvergenceError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    print(render(payload, req.fmt))
    return 0


if __name__ == "__main__":
    sys.exit(main())
