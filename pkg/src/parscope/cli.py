"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 decode or validation failure,
3 I/O failure.  With ``--json`` errors are also written to stderr as a JSON
object.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import canonical_trace
from .eventlog import LogFormatError, Log, decode_log, encode_log, errors_only, validate_wellformed
from .metrics import ReportOptions, build_report, report_json, report_text
from .prepass import PrepassError
from .reconstruct import ReconstructError, build_model, render_model

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_IO = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csc_pair(text: str) -> tuple[str, int]:
    sid, sep, n = text.rpartition("=")
    if not sep or not sid:
        raise argparse.ArgumentTypeError(f"expected STATIC_ID=COUNT, got {text!r}")
    try:
        value = int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"count in {text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"count in {text!r} is negative")
    return sid, value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text!r} must be positive")
    return value


def _nonneg(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text!r} must not be negative")
    return value


def _add_metric_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--csc", type=_positive, metavar="N",
                   help="sequential call count; enables nanoseconds per call")
    p.add_argument("--conj-csc", type=_csc_pair, action="append", default=[],
                   metavar="SID=N", help="sequential calls of one conjunction site")
    p.add_argument("--static", action="append", metavar="SID",
                   help="only report these conjunction sites (repeatable)")
    p.add_argument("--no-spark-runnable", action="store_true",
                   help="do not count sparks as runnable tasks")
    p.add_argument("--mutator-only", action="store_true",
                   help="count only mutator time as CPU use")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="machine-readable output and errors")

    parser = _Parser(prog="parscope", description="Analyze parallel runtime event logs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("validate", parents=[common], help="check log well-formedness")
    p.add_argument("log")

    p = sub.add_parser("dump", parents=[common], help="list events or the reconstructed model")
    p.add_argument("log")
    p.add_argument("--model", action="store_true", help="show the execution model")
    p.add_argument("--canonical", action="store_true",
                   help="list events after id canonicalization")

    p = sub.add_parser("canonicalize", parents=[common], help="rewrite with unique ids")
    p.add_argument("log")
    p.add_argument("-o", "--output", required=True)

    p = sub.add_parser("report", parents=[common], help="compute the metric report")
    p.add_argument("log")
    p.add_argument("--text", action="store_true", help="plain text report (default)")
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    p.add_argument("--instances", action="store_true",
                   help="include per-instance curves in JSON output")
    p.add_argument("--figures", metavar="DIR", help="also write SVG summary figures")
    p.add_argument("--workers", type=_positive, default=1,
                   help="threads for per-site evaluation")
    _add_metric_flags(p)

    p = sub.add_parser("timeline", parents=[common], help="render the engine timeline as SVG")
    p.add_argument("log")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--from", dest="t_from", type=_nonneg, metavar="NS")
    p.add_argument("--to", dest="t_to", type=_nonneg, metavar="NS")
    p.add_argument("--mutator-only", action="store_true")

    p = sub.add_parser("simulate", parents=[common], help="run a workload spec")
    p.add_argument("spec", help="workload spec as YAML or JSON")
    p.add_argument("-o", "--output", required=True, help="log file to write")
    p.add_argument("--truth", metavar="FILE", help="write the expected report here")
    p.add_argument("--structure", metavar="FILE", help="write the conjunction forest here")
    p.add_argument("--chunk", type=_positive, default=512,
                   help="events per engine buffer flush")
    _add_metric_flags(p)
    return parser


# ------------------------------------------------------------------ helpers

def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _write(path: Optional[str], data, binary: bool = False) -> None:
    if path is None or path == "-":
        if binary:
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
        return
    if binary:
        Path(path).write_bytes(data)
    else:
        Path(path).write_text(data, encoding="utf-8")


def _load(path: str) -> Log:
    return decode_log(_read(path))


def _options(args) -> ReportOptions:
    return ReportOptions(
        count_sparks_as_runnable=not args.no_spark_runnable,
        mutator_only=args.mutator_only,
        csc_count=args.csc,
        conj_csc=dict(args.conj_csc),
        static_filter=set(args.static) if args.static else None,
        include_instances=getattr(args, "instances", False),
        workers=getattr(args, "workers", 1),
    )


def _format_event(i: int, ev) -> str:
    eng = "-" if ev.engine is None else str(ev.engine)
    args = " ".join(repr(a) if isinstance(a, (bytes, str)) else str(a) for a in ev.args)
    return f"{i:8d} {ev.time:14d} {eng:>3} {ev.name} {args}".rstrip()


# ----------------------------------------------------------------- commands

def cmd_validate(args) -> int:
    log = _load(args.log)
    found = validate_wellformed(log.events)
    if args.json:
        _write(None, json.dumps({"ok": not found, "events": len(log.events),
                                 "violations": [v.to_json() for v in found]},
                                indent=2) + "\n")
    else:
        for v in found:
            eng = "-" if v.engine is None else v.engine
            print(f"{v.severity}: event {v.index} t={v.time} engine {eng}: {v.kind}: {v.message}")
        print(f"{len(log.events)} events, {len(errors_only(found))} errors,"
              f" {len(found) - len(errors_only(found))} warnings")
    return EXIT_INVALID if found else EXIT_OK


def cmd_dump(args) -> int:
    log = _load(args.log)
    if args.model:
        model = build_model(canonical_trace(log))
        _write(None, render_model(model) + "\n")
        return EXIT_OK
    events = canonical_trace(log).events if args.canonical else log.events
    if args.json:
        rows = [{"kind": ev.kind, "name": ev.name, "time": ev.time, "engine": ev.engine,
                 "args": [a.hex() if isinstance(a, bytes) else a for a in ev.args]}
                for ev in events]
        _write(None, json.dumps({"declarations": [d.__dict__ for d in log.declarations],
                                 "events": rows}, indent=2) + "\n")
        return EXIT_OK
    out = sys.stdout
    for d in log.declarations:
        out.write(f"# type {d.type_id} size {d.size} {d.name}\n")
    for i, ev in enumerate(events):
        out.write(_format_event(i, ev) + "\n")
    return EXIT_OK


def cmd_canonicalize(args) -> int:
    log = _load(args.log)
    trace = canonical_trace(log)
    _write(args.output, encode_log(log.declarations, trace.events), binary=True)
    if args.json:
        _write(None, json.dumps({"events": len(trace.events),
                                 "conjunctions": trace.conjunction_count,
                                 "futures": trace.future_count}) + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.json and args.text:
        raise UsageError("report: --json and --text are mutually exclusive")
    if args.instances and not args.json:
        raise UsageError("report: --instances needs --json")
    model = build_model(canonical_trace(_load(args.log)))
    report = build_report(model, _options(args))
    _write(args.output, report_json(report) if args.json else report_text(report))
    if args.figures:
        from .plotting import write_report_figures
        write_report_figures(report, Path(args.figures))
    return EXIT_OK


def cmd_timeline(args) -> int:
    from .plotting import timeline_svg

    if args.t_from is not None and args.t_to is not None and args.t_to < args.t_from:
        raise UsageError("timeline: --to is before --from")
    model = build_model(canonical_trace(_load(args.log)))
    try:
        svg = timeline_svg(model, args.t_from, args.t_to, args.mutator_only)
    except ValueError as exc:
        raise UsageError(f"timeline: {exc}") from None
    _write(args.output, svg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simulator import export_truth, load_spec, simulate

    path = Path(args.spec)
    if not path.is_file():
        raise FileNotFoundError(f"no such spec file: {args.spec}")
    spec = load_spec(path)
    result = simulate(spec, chunk=args.chunk)
    _write(args.output, result.log, binary=True)
    if args.truth:
        doc = export_truth(result.truth, count_sparks=not args.no_spark_runnable,
                           mutator_only=args.mutator_only, csc_count=args.csc,
                           conj_csc=dict(args.conj_csc),
                           static_filter=set(args.static) if args.static else None)
        _write(args.truth, report_json(doc))
    if args.structure:
        _write(args.structure, json.dumps(result.truth.structure(), indent=2,
                                          sort_keys=True) + "\n")
    if args.json:
        _write(None, json.dumps({"events": len(result.events),
                                 "bytes": len(result.log)}) + "\n")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "dump": cmd_dump,
    "canonicalize": cmd_canonicalize,
    "report": cmd_report,
    "timeline": cmd_timeline,
    "simulate": cmd_simulate,
}


def _fail(code: int, kind: str, message: str, as_json: bool) -> int:
    if as_json:
        sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    else:
        sys.stderr.write(f"parscope: {message}\n")
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc), as_json)
    from .simulator import SimulationError, SpecError

    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc), as_json)
    except (LogFormatError, PrepassError, ReconstructError) as exc:
        return _fail(EXIT_INVALID, type(exc).__name__, str(exc), as_json)
    except (SpecError, SimulationError) as exc:
        return _fail(EXIT_INVALID, type(exc).__name__, str(exc), as_json)
    except BrokenPipeError:
        # reader went away, e.g. piped into head
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except OSError as exc:
        return _fail(EXIT_IO, "io", str(exc), as_json)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
