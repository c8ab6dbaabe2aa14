"""Command line entry point.

Exit codes: 0 success, 1 solver failure or failed verification,
2 input error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import (
    ConfigurationError,
    EvaluationError,
    InvalidArgument,
    NoConvergence,
    ParseError,
    StepFailed,
    TimestepTooSmall,
)

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_INPUT = 2

ELEMENTS = ("q1q1", "q2q1", "p1p1", "p2p1")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser():
    p = _Parser(prog="insfem", description="Stabilized incompressible Navier-Stokes finite element solver.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an input file")
    run.add_argument("file")
    run.add_argument("--output-dir", default=".", help="directory for VTK and CSV output")

    ver = sub.add_parser("verify", help="run a verification suite")
    ver.add_argument("suite", help="suite name or 'all'")

    st = sub.add_parser("study", help="run a refinement study and print the error table")
    st.add_argument("case", help="mms, jeffery_hamel, advection1d or advection2d")
    st.add_argument("--levels", type=int, default=3, help="number of refinement levels")
    st.add_argument("--base", type=int, default=8, help="elements per direction on the coarsest level")
    st.add_argument("--element", choices=ELEMENTS, default="q1q1")
    st.add_argument("--regime", choices=("diffusion", "advection"), default="diffusion")
    return p


def _location(exc, filename):
    msg = str(exc)
    if isinstance(exc, ParseError) and exc.filename is None:
        prefix = f"{filename}:{exc.line}:" if exc.line is not None else f"{filename}:"
        return f"{prefix} {exc.message}"
    if not msg.startswith(filename):
        return f"{filename}: {msg}"
    return msg


def _cmd_run(args):
    from .inputdsl.builder import load_simulation
    from .runner import run_simulation

    try:
        with open(args.file) as fh:
            text = fh.read()
    except OSError as exc:
        print(f"insfem: cannot read {args.file}: {exc.strerror}", file=sys.stderr)
        return EXIT_INPUT
    try:
        spec = load_simulation(text, args.file)
        result = run_simulation(spec, args.output_dir)
    except (ParseError, ConfigurationError, InvalidArgument, EvaluationError) as exc:
        print(f"insfem: {_location(exc, args.file)}", file=sys.stderr)
        return EXIT_INPUT
    except (StepFailed, TimestepTooSmall, NoConvergence) as exc:
        print(f"insfem: solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    run = result.run
    status = "steady state reached" if run.steady_state else "finished"
    print(f"{args.file}: {status} after {len(run.steps)} step(s), t = {run.time:.6g}")
    if result.postprocessors:
        for name, value in result.postprocessors[-1][1].items():
            print(f"  {name} = {value:.10g}")
    for f in result.files:
        print(f"  wrote {f}")
    return EXIT_OK


def _cmd_verify(args):
    from .verify.study import SUITES

    names = list(SUITES) if args.suite == "all" else [args.suite]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"insfem: unknown suite {unknown[0]!r}; choose from {', '.join(SUITES)} or all", file=sys.stderr)
        return EXIT_INPUT
    ok = True
    for n in names:
        res = SUITES[n]()
        print(res.report(), flush=True)
        ok &= res.passed
    return EXIT_OK if ok else EXIT_SOLVER


def _cmd_study(args):
    from .verify.study import run_convergence_study

    if args.levels < 2 or args.base < 1:
        print("insfem: a study needs --levels >= 2 and --base >= 1", file=sys.stderr)
        return EXIT_INPUT
    levels = [args.base * 2**k for k in range(args.levels)]
    try:
        st = run_convergence_study(args.case, args.element, levels, args.regime)
    except (InvalidArgument, ConfigurationError) as exc:
        print(f"insfem: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (StepFailed, NoConvergence) as exc:
        print(f"insfem: solve failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    print(st.table())
    return EXIT_OK


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INPUT
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "verify": _cmd_verify, "study": _cmd_study}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
