"""Command-line entry point: ``smds <command> [options]``.

Exit status: 0 success, 1 usage error, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from typing import Optional, Sequence

from .embedder import LayoutConfig, Schedule
from .geometry import GEOMETRIES, SPHERICAL, Geometry, SingularGradientError
from .graph_io import DisconnectedGraphError, GraphParseError, apsp, read_distance_csv
from .harness import (COMPARE_COLUMNS, SAMPLE_COLUMNS, SWEEP_COLUMNS, DEFAULT_SAMPLE_EXTENT,
                      GraphSource, cities_inputs, compare, dilation_sweep, layout,
                      layout_payload, sample_experiment, sweep_factors, synthetic_cities)
from .metrics import evaluate, report_csv
from .projection import ALIASES, ProjectionError, ProjectionKind, RenderOptions, render_svg

log = logging.getLogger("spherical_mds")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

SCHEDULE_NAMES = {"fixed": "fixed", "piecewise": "piecewise", "frac-t": "frac_t", "frac-sqrt-t": "frac_sqrt_t"}
PROJECTION_NAMES = ("ortho", "stereo", "mercator", "equal-earth")
WEIGHT_NAMES = {"invsq": "inverse_square", "binary": "binary"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for input errors here
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------

def _dilation(text: str) -> tuple[str, Optional[float]]:
    if text in ("none", "heuristic", "auto"):
        return text, None
    if text == "optimize-radius":
        return "optimize_radius", None
    if text.startswith("factor="):
        try:
            alpha = float(text.partition("=")[2])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad dilation factor in {text!r}") from None
        if not alpha > 0 or not math.isfinite(alpha):
            raise argparse.ArgumentTypeError("dilation factor must be positive")
        return "factor", alpha
    raise argparse.ArgumentTypeError(
        f"expected none, heuristic, optimize-radius or factor=ALPHA, got {text!r}")


def _center(text: str) -> tuple[float, float]:
    try:
        phi, lam = (float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected PHI,LAMBDA in radians, got {text!r}") from None
    return phi, lam


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_source(p: argparse.ArgumentParser, multiple: bool = False) -> None:
    action = "append" if multiple else "store"
    p.add_argument("--input", action=action, metavar="PATH",
                   help="graph file (.mtx Matrix Market, otherwise an edge list)")
    p.add_argument("--generate", action=action, metavar="SPEC",
                   help="generated graph: polytope name, cycle:N, path:N, grid:RxC, complete:N")
    p.add_argument("--subdivide", type=int, default=0, metavar="K",
                   help="edge-subdivision rounds applied to every graph")


def _add_config(p: argparse.ArgumentParser, geometry: bool = True,
                schedule_default: Optional[str] = "piecewise") -> None:
    if geometry:
        p.add_argument("--geometry", choices=GEOMETRIES, default=SPHERICAL)
    p.add_argument("--dilation", type=_dilation, default=("auto", None),
                   help="none | heuristic | optimize-radius | factor=ALPHA (default: heuristic on the sphere)")
    p.add_argument("--schedule", choices=sorted(SCHEDULE_NAMES), default=schedule_default)
    p.add_argument("--lr-cap", type=float, default=0.1)
    p.add_argument("--max-epochs", type=_positive_int, default=300)
    p.add_argument("--eps", type=float, default=1e-7, help="convergence threshold on |change in stress|")
    p.add_argument("--weights", choices=sorted(WEIGHT_NAMES), default="invsq")
    p.add_argument("--seed", type=int, default=0)


def _add_render(p: argparse.ArgumentParser) -> None:
    p.add_argument("--projection", choices=PROJECTION_NAMES, default="ortho")
    p.add_argument("--center", type=_center, default=None, metavar="PHI,LAMBDA")
    p.add_argument("--width", type=_positive_int, default=600)
    p.add_argument("--vertex-radius", type=float, default=4.0)
    p.add_argument("--segments", type=_positive_int, default=16)
    p.add_argument("--hidden-opacity", type=float, default=0.15,
                   help="opacity of far-side orthographic parts; 0 leaves them out")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smds", description="Stress-based graph embedding on the sphere, plane and hyperbolic plane.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("layout", help="lay out one graph and write JSON, CSV and optional SVG")
    _add_source(p)
    _add_config(p)
    _add_render(p)
    p.add_argument("--optimizer", choices=("sgd", "gd"), default="sgd")
    p.add_argument("--svg", nargs="?", const="", default=None, metavar="PROJECTION",
                   help="also write layout.svg (projection defaults to --projection)")
    p.add_argument("--out", default=".", metavar="DIR")

    p = sub.add_parser("compare", help="distortion of every geometry on each input graph")
    _add_source(p, multiple=True)
    _add_config(p, geometry=False)
    p.add_argument("--geometries", default=",".join(GEOMETRIES))
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--out", default=None, metavar="DIR")

    p = sub.add_parser("dilation-sweep", help="distortion as a function of the dilation factor")
    _add_source(p)
    _add_config(p)
    p.add_argument("--factors", type=_float_list, default=None,
                   help="explicit comma-separated factors (default: sweep around the heuristic)")
    p.add_argument("--points", type=_positive_int, default=20)
    p.add_argument("--repeats", type=_positive_int, default=1)
    p.add_argument("--out", default=None, metavar="DIR")

    p = sub.add_parser("sample-experiment", help="embed points sampled from each geometry with each variant")
    _add_config(p, geometry=False)
    p.add_argument("--n-points", type=int, default=50)
    p.add_argument("--extent", type=float, default=DEFAULT_SAMPLE_EXTENT)
    p.add_argument("--geometries", default=",".join(GEOMETRIES))
    p.add_argument("--repeats", type=_positive_int, default=5)
    p.add_argument("--out", default=None, metavar="DIR")

    p = sub.add_parser("cities", help="recover a globe from a labeled distance table")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--distances", metavar="CSV", help="labeled square distance table")
    src.add_argument("--synthetic", type=int, metavar="N", help="use N random points on a globe instead")
    # no --schedule means a fixed step at the learning-rate cap
    _add_config(p, geometry=False, schedule_default=None)
    _add_render(p)
    p.add_argument("--out", default=".", metavar="DIR")
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def config_from_args(args: argparse.Namespace, geometry: Optional[str] = None) -> LayoutConfig:
    mode, alpha = args.dilation
    return LayoutConfig(
        geometry=Geometry(geometry or getattr(args, "geometry", SPHERICAL)),
        schedule=Schedule(SCHEDULE_NAMES[args.schedule or "piecewise"]),
        lr_cap=args.lr_cap,
        max_epochs=args.max_epochs,
        convergence_eps=args.eps,
        weight_policy=WEIGHT_NAMES[args.weights],
        seed=args.seed,
        dilation_mode=mode,
        dilation_factor=alpha,
    )


def _single_source(args: argparse.Namespace) -> GraphSource:
    if (args.input is None) == (args.generate is None):
        raise UsageError("give exactly one of --input or --generate")
    return GraphSource(args.input, args.generate, args.subdivide)


def _sources(args: argparse.Namespace) -> list[GraphSource]:
    out = [GraphSource(path=p, subdivide=args.subdivide) for p in args.input or []]
    out += [GraphSource(spec=s, subdivide=args.subdivide) for s in args.generate or []]
    if not out:
        raise UsageError("give at least one --input or --generate")
    return out


def _geometries(text: str) -> list[str]:
    kinds = [k.strip() for k in text.split(",") if k.strip()]
    bad = [k for k in kinds if k not in GEOMETRIES]
    if bad or not kinds:
        raise UsageError(f"unknown geometries {bad}; choose from {GEOMETRIES}")
    return kinds


def _render_opts(args: argparse.Namespace) -> RenderOptions:
    return RenderOptions(width=args.width, vertex_radius=args.vertex_radius, segments=args.segments,
                         hidden_opacity=args.hidden_opacity if args.hidden_opacity > 0 else None)


def _write(out_dir: str, name: str, text: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", path)
    return path


def _rows_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _emit(args: argparse.Namespace, name: str, text: str) -> None:
    if getattr(args, "out", None):
        _write(args.out, name, text)
    sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _layout_outputs(args, dm, cfg, optimizer, graph, name, out_dir, kinds) -> dict:
    t0 = time.perf_counter()
    emb, trace = layout(dm, cfg, optimizer)
    runtime = time.perf_counter() - t0
    report = evaluate(emb, trace, dm, cfg.weight_policy, runtime)
    payload = layout_payload(emb, trace, report, cfg)
    _write(out_dir, "layout.json", json.dumps(payload, indent=2) + "\n")
    _write(out_dir, "trace.csv", trace.to_csv())
    row = {"graph": name, "geometry": report.geometry, "n": report.n,
           "mean_distortion": report.distortion, "sd_distortion": 0.0,
           "mean_stress": report.stress, "runtime_s": report.runtime, "dilation": report.dilation}
    _write(out_dir, "report.csv", report_csv([row]))
    opts = _render_opts(args)
    for fname, kind in kinds:
        _write(out_dir, fname, render_svg(emb, graph, kind, opts))
    print(f"n={emb.n} geometry={emb.geometry.kind} distortion={report.distortion:.6g} "
          f"stress={report.stress:.6g} epochs={trace.epochs}")
    return payload


def cmd_layout(args: argparse.Namespace) -> int:
    src = _single_source(args)
    cfg = config_from_args(args)
    g = src.load()
    print(f"graph {src.name}: n={g.n} m={g.m}")
    dm = apsp(g)
    kinds = []
    if args.svg is not None:
        name = args.svg or args.projection
        if name not in ALIASES:
            raise UsageError(f"unknown projection {name!r}")
        kinds = [("layout.svg", ProjectionKind.parse(name, args.center))]
    _layout_outputs(args, dm, cfg, args.optimizer, g, src.name, args.out, kinds)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    rows = compare(_sources(args), config_from_args(args), args.repeats, _geometries(args.geometries))
    _emit(args, "compare.csv", _rows_csv(rows, COMPARE_COLUMNS))
    return EXIT_OK


def cmd_dilation_sweep(args: argparse.Namespace) -> int:
    src = _single_source(args)
    dm = apsp(src.load())
    factors = args.factors if args.factors is not None else sweep_factors(dm, args.points)
    rows = dilation_sweep(dm, factors, config_from_args(args), args.repeats)
    _emit(args, "dilation_sweep.csv", _rows_csv(rows, SWEEP_COLUMNS))
    return EXIT_OK


def cmd_sample_experiment(args: argparse.Namespace) -> int:
    if args.n_points < 3:
        raise UsageError("--n-points must be at least 3")
    rows = sample_experiment(args.n_points, _geometries(args.geometries), args.extent,
                             args.repeats, args.seed, config_from_args(args, SPHERICAL))
    _emit(args, "sample_experiment.csv", _rows_csv(rows, SAMPLE_COLUMNS))
    return EXIT_OK


def cmd_cities(args: argparse.Namespace) -> int:
    if args.distances is not None:
        with open(args.distances, encoding="utf-8") as fh:
            dm = read_distance_csv(fh.read())
        name = os.path.splitext(os.path.basename(args.distances))[0]
    else:
        if args.synthetic < 3:
            raise UsageError("--synthetic needs at least 3 points")
        dm, _ = synthetic_cities(args.synthetic, args.seed)
        name = f"synthetic{args.synthetic}"
    schedule = Schedule(SCHEDULE_NAMES[args.schedule]) if args.schedule else None
    dm, cfg = cities_inputs(dm, config_from_args(args, SPHERICAL), schedule)
    if args.center is not None:
        centers = [args.center]
    else:
        # both hemispheres
        centers = [(0.0, 0.0), (0.0, math.pi)]
    kinds = [(f"cities_{i}.svg", ProjectionKind.parse("ortho", c)) for i, c in enumerate(centers)]
    _layout_outputs(args, dm, cfg, "sgd", None, name, args.out, kinds)
    return EXIT_OK


COMMANDS = {
    "layout": cmd_layout,
    "compare": cmd_compare,
    "dilation-sweep": cmd_dilation_sweep,
    "sample-experiment": cmd_sample_experiment,
    "cities": cmd_cities,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"smds: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"smds: input error: no such file: {exc.filename}", file=sys.stderr)
        return EXIT_INPUT
    except (GraphParseError, DisconnectedGraphError, OSError) as exc:
        print(f"smds: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FloatingPointError, SingularGradientError, ProjectionError, ArithmeticError) as exc:
        print(f"smds: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"smds: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
