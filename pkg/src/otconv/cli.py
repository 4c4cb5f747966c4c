"""Command-line front end.

Exit codes: 0 ok / Satisfied, 1 other failure, 2 bad input, 3 dimension
mismatch, 4 Violated, 5 gradient unavailable. Machine output goes to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import counterexample as cx
from .convexity import (
    DEFAULT_SEED,
    DEFAULT_TOL,
    SamplerConfig,
    Verdict,
    check_convex_along_curve,
    check_displacement_monotonicity,
    check_equivalence_suite,
    check_first_order_suite,
)
from .curves import curve_from_plan, evaluate, generalized_geodesic, geodesic
from .errors import DimensionMismatch, GradientUnavailable, NonpositiveEpsilon, OTConvError, ParseError
from .functionals import parse_functional
from .measures import measure_from_dict
from .transport import plan_from_dict, plan_to_dict, solve_w2

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DIM, EXIT_VIOLATED, EXIT_NO_GRADIENT = 0, 1, 2, 3, 4, 5


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    inputs: tuple[str, ...] = ()
    functional: str = "second-moment"
    lam: float = 0.0
    grid_size: int = 101
    budget: int = 100
    seed: int = DEFAULT_SEED
    eps: float = 1.0
    sigma: float = 1.0
    tol: float = DEFAULT_TOL
    output_format: str = "json"
    include_known_pair: bool = False
    first_order: bool = False
    dims: Optional[tuple[int, int]] = None
    plan: Optional[str] = None
    anchor: Optional[str] = None
    output: Optional[str] = None

    def __post_init__(self):
        if self.grid_size < 3:
            raise ParseError("--grid must be at least 3")
        if not self.tol > 0:
            raise ParseError("--tol must be positive")
        if self.budget < 1:
            raise ParseError("--budget must be at least 1")
        if self.seed < 0:
            raise ParseError("--seed must be nonnegative")


def _fmt(x) -> str:
    return format(float(x), ".17g") if isinstance(x, (float, np.floating)) else str(x)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None


def load_measure(path: str):
    return measure_from_dict(_read_json(path))


def load_plan(path: str):
    return plan_from_dict(_read_json(path))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands


def cmd_distance(cfg: RunConfig) -> int:
    mu, nu = (load_measure(p) for p in _two_inputs(cfg))
    res = solve_w2(mu, nu)
    print(dumps({"w2": res.w2, "cost": res.cost, "plan": plan_to_dict(res.plan)}))
    return EXIT_OK


def cmd_plan(cfg: RunConfig) -> int:
    mu, nu = (load_measure(p) for p in _two_inputs(cfg))
    plan = solve_w2(mu, nu).plan
    if cfg.output_format == "csv":
        sys.stdout.write(_csv_text(["i", "j", "mass"], plan.entries))
    else:
        print(dumps(plan_to_dict(plan)))
    return EXIT_OK


def _two_inputs(cfg: RunConfig) -> tuple[str, str]:
    if len(cfg.inputs) != 2:
        raise ParseError(f"{cfg.subcommand} needs exactly two measure files")
    return cfg.inputs[0], cfg.inputs[1]


def _curve_from_inputs(cfg: RunConfig):
    if cfg.plan:
        if cfg.inputs:
            raise ParseError("give either --plan or measure files, not both")
        return curve_from_plan(load_plan(cfg.plan))
    mu, nu = (load_measure(p) for p in _two_inputs(cfg))
    if cfg.anchor:
        return generalized_geodesic(load_measure(cfg.anchor), mu, nu)
    return geodesic(mu, nu)


def cmd_curve(cfg: RunConfig) -> int:
    c = _curve_from_inputs(cfg)
    ts = np.linspace(0.0, 1.0, cfg.grid_size)
    rows = []
    for t in ts:
        mu = evaluate(c, float(t))
        for i in range(mu.size):
            rows.append((float(t), i, *mu.atoms[i].tolist(), float(mu.weights[i])))
    if cfg.output_format == "json":
        print(dumps({"kind": c.kind.value, "plan_cost": c.plan_cost, "rows": rows}))
    else:
        header = ["t", "atom_index", *[f"x_{k + 1}" for k in range(c.dim)], "weight"]
        sys.stdout.write(_csv_text(header, rows))
    return EXIT_OK


def cmd_check(cfg: RunConfig) -> int:
    F = parse_functional(cfg.functional, eps=cfg.eps, sigma=cfg.sigma)
    dims = cfg.dims
    if dims is None:
        # the tent kernel counterexample lives on the real line
        dims = (1, 1) if cfg.functional == "interaction:weps" else (1, 3)
    sampler = SamplerConfig(
        seed=cfg.seed,
        dims=dims,
        grid_size=cfg.grid_size,
        tol=cfg.tol,
        include_known_pair=cfg.include_known_pair,
        known_pair_eps=cfg.eps,
    )
    if cfg.first_order:
        F.require_gradient()
        if cfg.inputs:
            mu, nu = (load_measure(p) for p in _two_inputs(cfg))
            report = check_displacement_monotonicity(F, mu, nu, cfg.lam, cfg.tol)
            report.seed = cfg.seed
        else:
            report = check_first_order_suite(F, cfg.lam, sampler, cfg.budget)
    elif cfg.inputs or cfg.plan:
        report = check_convex_along_curve(F, _curve_from_inputs(cfg), cfg.lam, cfg.grid_size, cfg.tol)
        report.seed = cfg.seed
    else:
        report = check_equivalence_suite(F, cfg.lam, sampler, cfg.budget)
    out = report.to_dict()
    out["functional"] = F.name
    print(dumps(out))
    return EXIT_VIOLATED if report.verdict is Verdict.VIOLATED else EXIT_OK


def cmd_repro_example(cfg: RunConfig) -> int:
    eps = cfg.eps
    if not eps > 0:
        raise NonpositiveEpsilon(f"--eps must be positive, got {eps!r}")
    F = cx.w_epsilon(eps)
    crossing = cx.crossing_curve(eps)
    kink = cx.kink_geodesic(eps)
    ts, f_cross = cx.trace(F, crossing, 1001)
    _, f_kink = cx.trace(F, kink, 1001)
    rep_cross = check_convex_along_curve(F, crossing, 0.0, cfg.grid_size, cfg.tol)
    rep_kink = check_convex_along_curve(F, kink, 0.0, cfg.grid_size, cfg.tol)
    summary = {
        "eps": eps,
        "F_end": F(evaluate(crossing, 0.0)),
        "F_end_target": F(evaluate(crossing, 1.0)),
        "F_mid": F(evaluate(crossing, 0.5)),
        "kink_t": cx.gap_reaches(kink, eps),
        "kink_F0": F(evaluate(kink, 0.0)),
        "kink_profile_max_deviation": float(np.max(np.abs(f_kink - cx.kink_profile(ts, eps)))),
        "crossing_verdict": rep_cross.verdict.value,
        "crossing_witness_t": rep_cross.witness["t"] if rep_cross.witness else None,
        "geodesic_verdict": rep_kink.verdict.value,
    }
    if cfg.output:
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / "crossing_trace.csv").write_text(_csv_text(["t", "F"], zip(ts, f_cross)))
        (out / "geodesic_trace.csv").write_text(_csv_text(["t", "F"], zip(ts, f_kink)))
        (out / "summary.json").write_text(dumps(summary) + "\n")
    print(dumps(summary))
    return EXIT_OK


COMMANDS = {
    "distance": cmd_distance,
    "plan": cmd_plan,
    "curve": cmd_curve,
    "check": cmd_check,
    "repro-example": cmd_repro_example,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otconv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, inputs=True):
        if inputs:
            p.add_argument("inputs", nargs="*", help="measure JSON files")
        p.add_argument("--format", dest="output_format", choices=("json", "csv"), default=None)
        p.add_argument("--grid", dest="grid_size", type=int, default=101)
        p.add_argument("--tol", type=float, default=DEFAULT_TOL)
        p.add_argument("--seed", type=int, default=None, help="overrides $OTCONV_SEED")
        p.add_argument("--eps", type=float, default=1.0)

    p = sub.add_parser("distance", help="W2 distance and optimal plan between two measures")
    common(p)
    p = sub.add_parser("plan", help="optimal plan as plan JSON (or CSV entries)")
    common(p)
    p = sub.add_parser("curve", help="sample a geodesic / generalized geodesic / plan curve")
    common(p)
    p.add_argument("--plan", help="plan JSON defining an acceleration-free curve")
    p.add_argument("--anchor", help="base measure for a generalized geodesic")

    p = sub.add_parser("check", help="certify or refute lambda-convexity")
    common(p)
    p.add_argument("--functional", default="second-moment")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--sigma", type=float, default=1.0, help="width of gaussian kernels")
    p.add_argument(
        "--include-paper-pair",
        dest="include_known_pair",
        action="store_true",
        help="add the tent-kernel crossing pair to the random samples",
    )
    p.add_argument("--first-order", action="store_true", help="displacement monotonicity instead of chords")
    p.add_argument("--dims", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--plan")
    p.add_argument("--anchor")

    p = sub.add_parser("repro-example", help="tent-kernel counterexample traces")
    common(p, inputs=False)
    p.add_argument("--output", help="directory for CSV traces and summary.json")
    return parser


def _default_seed() -> int:
    env = os.environ.get("OTCONV_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise ParseError(f"OTCONV_SEED must be an integer, got {env!r}") from None


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fmt = args.output_format or ("csv" if args.subcommand == "curve" else "json")
    return RunConfig(
        subcommand=args.subcommand,
        inputs=tuple(getattr(args, "inputs", ()) or ()),
        functional=getattr(args, "functional", "second-moment"),
        lam=getattr(args, "lam", 0.0),
        grid_size=args.grid_size,
        budget=getattr(args, "budget", 100),
        seed=args.seed if args.seed is not None else _default_seed(),
        eps=args.eps,
        sigma=getattr(args, "sigma", 1.0),
        tol=args.tol,
        output_format=fmt,
        include_known_pair=getattr(args, "include_known_pair", False),
        first_order=getattr(args, "first_order", False),
        dims=tuple(args.dims) if getattr(args, "dims", None) else None,
        plan=getattr(args, "plan", None),
        anchor=getattr(args, "anchor", None),
        output=getattr(args, "output", None),
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        return COMMANDS[cfg.subcommand](cfg)
    except GradientUnavailable as exc:
        print(f"otconv: {exc}", file=sys.stderr)
        return EXIT_NO_GRADIENT
    except DimensionMismatch as exc:
        print(f"otconv: dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIM
    except (ParseError, NonpositiveEpsilon, ValueError) as exc:
        print(f"otconv: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OTConvError as exc:
        print(f"otconv: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
