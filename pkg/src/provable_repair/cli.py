"""Command-line interface.

Exit codes: 0 success or Repaired, 1 Infeasible, 2 invalid input,
3 timeout or solver iteration cap.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import (
    InputError,
    IterationLimitError,
    RepairTimeoutError,
    SolverProtocolError,
    SolverUnavailableError,
    UnsupportedActivationError,
)
from .formats import (
    _read_json,
    load_labeled_csv,
    load_network,
    load_spec,
    save_network,
    write_regions_csv,
)
from .lp import dump_lp
from .metrics import metrics_report
from .regions import Polygon2D, Segment, exactline, plane_transfer
from .repair import evaluate, point_repair, polytope_repair

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=np.float64)
    except ValueError:
        raise InputError(f"cannot parse vector {text!r}; expected comma-separated numbers") from None


def _segment(text: str) -> Segment:
    parts = text.split(";")
    if len(parts) != 2:
        raise InputError(f"segment must look like 'START;END' (components comma-separated), got {text!r}")
    return Segment(_vector(parts[0]), _vector(parts[1]))


def _fmt_vec(v) -> str:
    return ",".join(repr(float(x)) for x in v)


def _write_report(path, report: dict) -> None:
    Path(path).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")


def cmd_eval(args) -> int:
    net = load_network(args.net)
    print(_fmt_vec(evaluate(net, _vector(args.input))))
    return EXIT_OK


def cmd_regions(args) -> int:
    net = load_network(args.net)
    if (args.segment is None) == (args.polygon_file is None):
        raise InputError("give exactly one of --segment or --polygon-file")
    if args.segment is not None:
        part = exactline(net, _segment(args.segment))
        for r in part:
            print(f"[{_fmt_vec(r.vertices[0])}] -> [{_fmt_vec(r.vertices[1])}]  t=[{r.coords[0]!r}, {r.coords[1]!r}]  pattern={r.pattern.bits()}")
    else:
        obj = _read_json(args.polygon_file)
        verts = obj.get("vertices") if isinstance(obj, dict) else obj
        part = plane_transfer(net, Polygon2D(verts))
        for r in part:
            print(f"{len(r.vertices)} vertices  area={r.measure!r}  pattern={r.pattern.bits()}")
    print(f"{len(part)} regions")
    if args.csv:
        write_regions_csv(part, args.csv)
    return EXIT_OK


def _repair(args, polytopes: bool) -> int:
    deadline = None
    if args.timeout_seconds is not None:
        deadline = time.monotonic() + args.timeout_seconds
    net = load_network(args.net)
    points, polys = load_spec(args.spec, net.out_dim)
    solver = args.solver
    if solver == "external":
        solver = "scipy"
    mask = args.mask
    if polytopes:
        if not len(polys):
            raise InputError(f"{args.spec}: no polytopes to repair")
        result = polytope_repair(net, args.layer, polys, args.norm, mask, solver=solver, deadline=deadline)
    else:
        if not len(points):
            raise InputError(f"{args.spec}: no points to repair")
        result = point_repair(net, args.layer, points, args.norm, mask, solver=solver, deadline=deadline)
    if args.dump_lp and result.program is not None:
        Path(args.dump_lp).write_text(dump_lp(result.program.lp))
    if args.report:
        _write_report(args.report, result.report())
    if result.ok:
        if args.out:
            save_network(result.repaired, args.out)
        print(f"repaired layer {result.layer}: {result.norm.value} norm {result.norm_value!r}")
        return EXIT_OK
    print(f"infeasible: no repair of layer {result.layer} satisfies the spec")
    return EXIT_INFEASIBLE


def cmd_repair_points(args) -> int:
    return _repair(args, polytopes=False)


def cmd_repair_polytopes(args) -> int:
    return _repair(args, polytopes=True)


def cmd_metrics(args) -> int:
    buggy = load_network(args.buggy)
    repaired = load_network(args.repaired)
    rep = metrics_report(
        buggy,
        repaired,
        repair_set=load_labeled_csv(args.repair_set) if args.repair_set else None,
        drawdown_set=load_labeled_csv(args.drawdown_set) if args.drawdown_set else None,
        generalization_set=load_labeled_csv(args.generalization_set) if args.generalization_set else None,
    )
    for key in ("efficacy", "drawdown", "generalization"):
        val = getattr(rep, key)
        if val is not None:
            print(f"{key}: {val!r}")
    if args.report:
        _write_report(args.report, rep.to_dict())
    return EXIT_OK


def cmd_plot(args) -> int:
    net = load_network(args.net)
    seg = _segment(args.segment)
    if args.samples < 2:
        raise InputError("--samples must be at least 2")
    ts = np.linspace(0.0, 1.0, args.samples)
    with open(args.csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i}" for i in range(seg.dim)] + [f"y{i}" for i in range(net.out_dim)])
        for t in ts:
            x = seg.point(t)
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x] + [repr(float(v)) for v in evaluate(net, x)])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="provable-repair", description="Provable single-layer repair of ReLU networks.")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", help="evaluate a network at one input")
    e.add_argument("net")
    e.add_argument("--input", required=True, help="comma-separated input vector")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("regions", help="linear regions on a segment or plane polygon")
    r.add_argument("net")
    r.add_argument("--segment", help="'START;END', components comma-separated")
    r.add_argument("--polygon-file", help="JSON file with a vertex list")
    r.add_argument("--csv", help="write the partition as CSV")
    r.set_defaults(fn=cmd_regions)

    for name, fn, helptext in (
        ("repair-points", cmd_repair_points, "repair a point specification"),
        ("repair-polytopes", cmd_repair_polytopes, "repair a polytope specification"),
    ):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("net")
        q.add_argument("spec")
        q.add_argument("--layer", type=int, required=True, help="1-based layer to repair")
        q.add_argument("--norm", choices=["l1", "linf"], default="l1")
        q.add_argument("--mask", help="comma-separated parameter names (L1.w[0][2], L1.b[2]) or 'paper4'")
        q.add_argument("--solver", default="builtin", help="builtin, external, or a registered solver name")
        q.add_argument("--timeout-seconds", type=float)
        q.add_argument("--out", help="write the repaired network here")
        q.add_argument("--report", help="write a JSON repair report here")
        q.add_argument("--dump-lp", help="write the encoded LP in text form here")
        q.set_defaults(fn=fn)

    m = sub.add_parser("metrics", help="efficacy, drawdown, generalization")
    m.add_argument("buggy")
    m.add_argument("repaired")
    m.add_argument("--repair-set")
    m.add_argument("--drawdown-set")
    m.add_argument("--generalization-set")
    m.add_argument("--report")
    m.set_defaults(fn=cmd_metrics)

    pl = sub.add_parser("plot", help="sample a network along a segment into CSV")
    pl.add_argument("net")
    pl.add_argument("--segment", required=True)
    pl.add_argument("--samples", type=int, default=101)
    pl.add_argument("--csv", required=True)
    pl.set_defaults(fn=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (RepairTimeoutError, IterationLimitError, SolverProtocolError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (InputError, UnsupportedActivationError, SolverUnavailableError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
