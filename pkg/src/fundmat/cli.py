"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 I/O, 3 degenerate data, 4 solver failure.
The default output directory is $FUNDMAT_OUT, else the working directory.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import io as fio
from .epipolar import algebraic_cost
from .errors import DegenerateDataError, SolverFailure
from .lasserre import DEFAULT_RANK_TOL
from .multiview import estimate, evaluate, method_name, reports_to_csv
from .simulator import METHODS, SWEEP_COLUMNS, run_sweep, synthesize

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DEGENERATE, EXIT_SOLVER = 0, 1, 2, 3, 4

log = logging.getLogger("fundmat")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s):
    v = int(s)
    if v <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {s}")
    return v


def _positive_float(s):
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fundmat", description="Fundamental matrix estimation and evaluation.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--method", choices=("eightpoint", "global", "both"), default="both")
        sp.add_argument("--order", type=_positive_int, default=2, help="relaxation order t")
        sp.add_argument("--no-standardize", action="store_true",
                        help="solve the relaxation in pixel coordinates")
        sp.add_argument("--rank-tol", type=_positive_float, default=DEFAULT_RANK_TOL)
        sp.add_argument("--gap-tol", type=_positive_float, default=1e-9)
        sp.add_argument("--out", default=None, help="output directory")

    est = sub.add_parser("estimate", help="estimate F from a match file")
    est.add_argument("matches")
    common(est)
    est.add_argument("--dump-sdp", metavar="PATH", help="write the relaxation SDP as text")

    ev = sub.add_parser("evaluate", help="estimate F and report reprojection errors")
    ev.add_argument("matches")
    common(ev)
    ev.add_argument("--max-ba-iters", type=_positive_int, default=1000)
    ev.add_argument("--no-timing", action="store_true",
                    help="write 0 for timings so reports are reproducible")

    sim = sub.add_parser("simulate", help="Monte-Carlo sweep on synthetic scenes")
    common(sim)
    sim.add_argument("--sweep", choices=("noise", "points"), required=True)
    sim.add_argument("--motion", type=int, choices=(1, 2), default=1)
    sim.add_argument("--sigma", type=_nonneg_float, default=0.5,
                     help="noise std in pixels for the point sweep")
    sim.add_argument("--npoints", type=_positive_int, default=50)
    sim.add_argument("--trials", type=_positive_int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--max-ba-iters", type=_positive_int, default=1000)
    sim.add_argument("--plot-data", action="store_true", help="also write x/y series per curve")

    gen = sub.add_parser("generate", help="write synthetic matches to a file")
    gen.add_argument("--motion", type=int, choices=(1, 2), default=1)
    gen.add_argument("--sigma", type=_nonneg_float, default=0.0)
    gen.add_argument("--npoints", type=_positive_int, default=50)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="match file to write")
    return p


def _out_dir(args) -> str:
    d = args.out or os.environ.get("FUNDMAT_OUT") or "."
    os.makedirs(d, exist_ok=True)
    return d


def _methods(args):
    return list(METHODS) if args.method == "both" else [method_name(args.method)]


def _global_opts(args) -> dict:
    return {"order": args.order, "standardize_coords": not args.no_standardize,
            "rank_tol": args.rank_tol, "gap_tol": args.gap_tol}


def cmd_estimate(args) -> int:
    matches = fio.read_matches(args.matches)
    out = _out_dir(args)
    if args.dump_sdp:
        from .epipolar import global_relaxation
        with open(args.dump_sdp, "w", encoding="utf-8") as fh:
            global_relaxation(matches, args.order, not args.no_standardize).dump(fh)
    for m in _methods(args):
        F, _ = estimate(matches, m, _global_opts(args))
        path = os.path.join(out, f"F_{m.lower()}.txt")
        fio.write_f(path, F.m)
        line = f"{m}: cost={algebraic_cost(F.m, matches):.6g} |det|={abs(F.det):.3g}"
        if F.global_certificate is not None:
            c = F.global_certificate
            line += (f" certified={str(c.certified).lower()} rank={c.rank}"
                     f" solver={c.solver_status.value}")
        print(f"{line} -> {path}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    matches = fio.read_matches(args.matches)
    out = _out_dir(args)
    reports, table_row, worst = [], {}, EXIT_OK
    for m in _methods(args):
        try:
            F, dt = estimate(matches, m, _global_opts(args))
            rep = evaluate(F, matches, method=m, time_s=dt,
                           ba_opts={"max_iter": args.max_ba_iters})
        except (DegenerateDataError, SolverFailure) as exc:
            print(f"{m}: failed: {exc}", file=sys.stderr)
            table_row[m] = None
            worst = max(worst, EXIT_DEGENERATE if isinstance(exc, DegenerateDataError) else EXIT_SOLVER)
            continue
        reports.append(rep)
        table_row[m] = rep
    label = os.path.splitext(os.path.basename(args.matches))[0]
    timing = not args.no_timing
    with open(os.path.join(out, "report.csv"), "w", encoding="utf-8") as fh:
        fh.write(reports_to_csv(reports, timing))
    table = fio.format_table({label: table_row}, timing)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(table)
    sys.stdout.write(table)
    return worst if not reports else EXIT_OK


def cmd_simulate(args) -> int:
    out = _out_dir(args)

    def progress(value, i):
        log.info("%s=%s trial %d done", args.sweep, value, i)

    res = run_sweep(args.sweep, args.motion, trials=args.trials, base_seed=args.seed,
                    n_points=args.npoints, sigma=args.sigma, methods=tuple(_methods(args)),
                    ba_opts={"max_iter": args.max_ba_iters}, global_opts=_global_opts(args),
                    progress=progress)
    stem = f"sweep_{args.sweep}_motion{args.motion}"
    path = os.path.join(out, stem + ".csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(res.to_csv())
    print(f"wrote {path}")
    if args.plot_data:
        for m in _methods(args):
            for col in SWEEP_COLUMNS[2:5]:
                x, y = res.series(m, col)
                p = os.path.join(out, f"{stem}_{m}_{col}.dat")
                np.savetxt(p, np.column_stack([x, y]), fmt="%.6g",
                           header=f"{args.sweep} {col}")
                print(f"wrote {p}")
    return EXIT_OK


def cmd_generate(args) -> int:
    matches = synthesize(args.motion, args.npoints, args.sigma, args.seed)
    d = os.path.dirname(args.out)
    if d:
        os.makedirs(d, exist_ok=True)
    fio.write_matches(args.out, matches,
                      header=f"motion {args.motion} npoints {args.npoints} sigma {args.sigma} seed {args.seed}")
    print(f"wrote {len(matches)} matches to {args.out}")
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "evaluate": cmd_evaluate,
            "simulate": cmd_simulate, "generate": cmd_generate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except fio.ParseError as exc:
        print(f"error: {getattr(args, 'matches', '')}: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DegenerateDataError as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (SolverFailure, np.linalg.LinAlgError) as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
