"""Command line entry point ``atlas``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import atlas
from .coeffs import coefficient_report
from .cycles import DEFAULT_CYCLE_CONFIG, inventory, label_from_inventory
from .flow import IntegrationError, flow_filippov
from .model import CASES, SCENARIOS, ModelError, check_h0, check_hypotheses, load_model_file, load_scenario

EXIT_OK = 0
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3


class HypothesisFailure(RuntimeError):
    pass


def _model_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", choices=sorted(SCENARIOS))
    src.add_argument("--model", metavar="FILE", help="model file with a, m, f_plus, g_plus")
    p.add_argument("--case", choices=CASES, help="required with --model")


def _load(args) -> tuple:
    if args.scenario:
        model = load_scenario(args.scenario)
        case = args.case or SCENARIOS[args.scenario]["case"]
    else:
        if not args.case:
            raise ModelError("--case is required with --model")
        model = load_model_file(args.model)
        case = args.case
        if not check_h0(model).holds:
            raise HypothesisFailure("(H0) fails: no symmetric critical crossing cycle at alpha=0")
    return model, case


def _pair(text: str) -> tuple[float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated values")
    return parts[0], parts[1]


def _threads(requested: int) -> int:
    env = os.environ.get("ATLAS_THREADS")
    if env:
        return max(1, int(env))
    return max(1, requested)


def _write(text: str, path: str | None) -> None:
    if path and path != "-":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt_for(path: str | None, explicit: str | None) -> str:
    if explicit:
        return explicit
    return "csv" if path and path.endswith(".csv") else "json"


def cmd_scenario(args) -> int:
    for name in sorted(SCENARIOS):
        s = SCENARIOS[name]
        print(f"{name}\t{s['case']}\t{s['label']}")
    return EXIT_OK


def cmd_check(args) -> int:
    model, case = _load(args)
    rep = check_hypotheses(model, case)
    print(json.dumps(rep.to_dict(), sort_keys=True, indent=1, default=float))
    return EXIT_OK if rep.holds else EXIT_HYPOTHESIS


def cmd_coeffs(args) -> int:
    model, case = _load(args)
    rep = coefficient_report(model, case)
    if args.json:
        print(json.dumps(rep.to_dict(), sort_keys=True, indent=1, default=float))
    else:
        for k, v in sorted(rep.to_dict().items()):
            if k != "errors":
                print(f"{k}: {v}")
    return EXIT_OK


def cmd_classify(args) -> int:
    model, case = _load(args)
    inv = inventory(model, case, args.alpha, DEFAULT_CYCLE_CONFIG)
    lab = label_from_inventory(inv)
    out = {
        "case": case,
        "alpha": list(args.alpha),
        "label": lab.name(),
        "region": lab.to_dict(),
        "cycles": [c.to_dict() for c in inv.cycles],
        "connections": list(inv.connections),
        "gaps": inv.gaps,
    }
    print(json.dumps(out, sort_keys=True, indent=1, default=float))
    return EXIT_OK


def cmd_simulate(args) -> int:
    model, _ = _load(args)
    traj = flow_filippov(model, (args.x0, args.y0), args.alpha or (0.0,) * model.m, args.t)
    _write(traj.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    model, case = _load(args)
    grid = atlas.default_grid(case, args.n)
    coords = "alpha" if case == "codim1" else "beta"
    b1 = atlas.Axis.parse(args.b1) if args.b1 else grid.b1
    b2 = atlas.Axis.parse(args.b2) if args.b2 else grid.b2
    grid = atlas.GridSpec(coords, b1, b2, grid.scan)
    dia = atlas.run_sweep(model, case, grid, threads=_threads(args.threads))
    text = atlas.emit(dia, _fmt_for(args.out, args.format))
    _write(text, args.out)
    return EXIT_OK


def cmd_curves(args) -> int:
    model, case = _load(args)
    if case == "codim1":
        raise ModelError("curve extraction needs a two-parameter case")
    rays = atlas.default_rays(case, args.rays)
    curves = atlas.extract_curves(model, case, rays, atlas.DEFAULT_RAY_WINDOW[case])
    fmt = _fmt_for(args.out, args.format)
    if fmt == "json":
        payload = {"case": case, "curves": curves, "fits": atlas.fit_curves(model, case, curves)}
        text = atlas.emit(payload, "json")
    else:
        text = atlas.emit(curves, "csv")
    _write(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="atlas", description="Crossing-sliding bifurcation atlas for Z2-symmetric Filippov systems")
    sub = p.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="built-in scenarios")
    sc.add_argument("action", choices=["list"])
    sc.set_defaults(func=cmd_scenario)

    c = sub.add_parser("check", help="check the hypotheses of a case")
    _model_args(c)
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("coeffs", help="bifurcation coefficients")
    _model_args(c)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_coeffs)

    c = sub.add_parser("classify", help="cycle and connection inventory at one parameter value")
    _model_args(c)
    c.add_argument("--alpha", type=_pair, required=True, metavar="V1,V2")
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("simulate", help="Filippov trajectory as CSV")
    _model_args(c)
    c.add_argument("--x0", type=float, required=True)
    c.add_argument("--y0", type=float, required=True)
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--alpha", type=_pair, default=None, metavar="V1,V2")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("sweep", help="classify a parameter grid")
    _model_args(c)
    c.add_argument("--b1", metavar="LO:HI:N")
    c.add_argument("--b2", metavar="LO:HI:N")
    c.add_argument("--n", type=int, default=101, help="resolution of the default grid")
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--format", choices=["json", "csv"])
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_sweep)

    c = sub.add_parser("curves", help="bifurcation curve points and asymptotic fits")
    _model_args(c)
    c.add_argument("--rays", type=int, default=None, help="rays per sign of beta1")
    c.add_argument("--format", choices=["json", "csv"])
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_curves)
    return p


_VALUE_OPTIONS = ("--alpha", "--b1", "--b2", "--x0", "--y0")


def _glue_negative_values(argv: list[str]) -> list[str]:
    """Turn ``--b1 -1e-3:1e-3:5`` into ``--b1=-1e-3:1e-3:5`` so argparse does not
    read the value as an option."""
    out: list[str] = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_OPTIONS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_glue_negative_values(argv))
    try:
        return args.func(args)
    except HypothesisFailure as exc:
        print(f"atlas: hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except ModelError as exc:
        print(f"atlas: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ArithmeticError, IntegrationError, RuntimeError, ValueError) as exc:
        print(f"atlas: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
