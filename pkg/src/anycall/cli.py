"""Command-line front end: ``anycall verify|run|bench|find-magic|report|emit``.

Exit codes: 0 success, 1 program rejected by the verifier, 2 usage, input
or decode error, 3 runtime trap (only reachable with ``--unsafe-skip-verify``).
"""
from __future__ import annotations

import argparse
import codecs
import json
import os
import sys

from . import bench, costmodel, findmagic, programs
from .assembler import AssemblyError, assemble
from .isa import FILE_MAGIC, EncodingError, Program, dump_binary, load_binary
from .syskernel import ARENA_BASE, O_RDONLY, SandboxError, SimKernel, traditional_syscall
from .verifier import Limits, explain, verify
from .vm import ExecutionContext, dump_trace, run

EXIT_OK, EXIT_REJECTED, EXIT_USAGE, EXIT_TRAP = 0, 1, 2, 3
SANDBOX_ENV = "ANYCALL_SANDBOX"
POKE_SCRATCH = 0xE0_0000   # arena offset used for --open path strings


class UsageError(Exception):
    pass


def load_program(path: str) -> Program:
    """Assembly text or the binary container, told apart by the magic bytes."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    name = os.path.splitext(os.path.basename(path))[0]
    try:
        if data.startswith(FILE_MAGIC):
            return load_binary(data, name=name)
        return assemble(data.decode("utf-8"), name=name)
    except UnicodeDecodeError:
        raise UsageError(f"{path}: neither assembly text nor a binary program") from None
    except (AssemblyError, EncodingError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _limits(args) -> Limits:
    return Limits(max_insns=args.max_insns, max_states=args.max_states)


def _cost_params(args) -> costmodel.CostParams | None:
    if getattr(args, "cost_file", None):
        try:
            with open(args.cost_file, encoding="utf-8") as fh:
                return costmodel.loads(fh.read())
        except (OSError, ValueError) as exc:
            raise UsageError(f"{args.cost_file}: {exc}") from None
    if getattr(args, "cost_preset", None):
        try:
            return costmodel.preset(args.cost_preset)
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    return None


def _sandbox(args, required: bool = False) -> str | None:
    root = args.sandbox or os.environ.get(SANDBOX_ENV)
    if required and not root:
        raise UsageError(f"a sandbox root is required (--sandbox or ${SANDBOX_ENV})")
    if root and not os.path.isdir(root):
        raise UsageError(f"sandbox root {root!r} is not a directory")
    return root


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    program = load_program(args.program)
    verdict = verify(program, _limits(args))
    if args.format == "json":
        rec = verdict.to_dict()
        rec["program"] = program.name
        rec["instructions"] = len(program)
        print(json.dumps(rec, indent=2, sort_keys=True))
    else:
        sys.stdout.write(explain(verdict, program))
    return EXIT_OK if verdict.accepted else EXIT_REJECTED


# --------------------------------------------------------------------------
# run


def _parse_arg(text: str) -> int:
    """Integer, or ``@OFFSET`` for an arena address."""
    try:
        if text.startswith("@"):
            return ARENA_BASE + int(text[1:], 0)
        return int(text, 0)
    except ValueError:
        raise UsageError(f"bad --arg {text!r}") from None


def _poke(kernel: SimKernel, spec: str) -> None:
    """``OFFSET:v1,v2,...`` writes little-endian u64 values into the arena."""
    try:
        where, _, values = spec.partition(":")
        offset = int(where, 0)
        words = [int(v, 0) & (1 << 64) - 1 for v in values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --poke {spec!r}") from None
    data = b"".join(w.to_bytes(8, "little") for w in words)
    if not kernel.arena.contains(ARENA_BASE + offset, len(data)):
        raise UsageError(f"--poke {spec!r} is outside the user arena")
    kernel.arena.write(ARENA_BASE + offset, data)


def cmd_run(args) -> int:
    program = load_program(args.program)
    verdict = verify(program, _limits(args))
    if not verdict.accepted and not args.unsafe_skip_verify:
        sys.stderr.write(explain(verdict, program))
        sys.stderr.write("refusing to run a rejected program\n")
        return EXIT_REJECTED
    params = _cost_params(args)
    stdin = b""
    if args.stdin_file:
        with open(args.stdin_file, "rb") as fh:
            stdin = fh.read()
    try:
        kernel = SimKernel(_sandbox(args), stdin=stdin, trace=args.trace is not None)
    except SandboxError as exc:
        raise UsageError(str(exc)) from None
    with kernel:
        for path in args.open:
            addr = ARENA_BASE + POKE_SCRATCH
            kernel.arena.write(addr, os.fsencode(path) + b"\0")
            fd = traditional_syscall(kernel, "open", (addr, O_RDONLY))
            if fd < 0:
                raise UsageError(f"cannot open {path!r} in the sandbox ({fd})")
        for spec in args.poke:
            _poke(kernel, spec)
        before = kernel.counters.copy()
        kernel.counters.anycall_invocations += 1
        kernel.enter("anycall")
        result = run(ExecutionContext(program, kernel, arg=_parse_arg(args.arg), fuel=args.fuel))
        kernel.leave("anycall")
        counters = kernel.counters - before
        sys.stdout.buffer.write(bytes(kernel.stdout))
        sys.stderr.buffer.write(bytes(kernel.stderr))
        record = {"return_value": result.return_value, "executed_insns": result.executed_insns,
                  "counters": counters.as_record()}
        if params is not None:
            record["modeled_us"] = costmodel.model_time(counters, params).t
        if result.fault is not None:
            record["fault"] = str(result.fault)
        if args.trace is not None:
            text = dump_trace(kernel.trace)
            if args.trace == "-":
                sys.stderr.write(text)
            else:
                with open(args.trace, "w", encoding="utf-8") as fh:
                    fh.write(text)
    if args.format == "json":
        print(json.dumps(record, indent=2, sort_keys=True))
    else:
        print(f"r0 = {result.return_value}")
        for key, value in record["counters"].items():
            print(f"{key} = {value}")
        if "modeled_us" in record:
            print(f"modeled_us = {record['modeled_us']:.6f}")
    if result.fault is not None:
        print(f"anycall: {result.fault}", file=sys.stderr)
        return EXIT_TRAP
    return EXIT_OK


# --------------------------------------------------------------------------
# bench


def cmd_bench(args) -> int:
    try:
        points = tuple(bench.parse_points(args.calls))
        chunks = tuple(bench.parse_points(args.chunk_size))
        spec = bench.BenchSpec(
            benchmark=args.benchmark, invocations=args.invocations, points=points,
            chunk_sizes=chunks, preset=args.cost_preset,
            sandbox=_sandbox(args, required=args.benchmark != "getpid"),
            fmt=args.format, params=_cost_params(args) if args.cost_file else None)
        spec.cost_params()
        result = bench.run_bench(spec)
    except (bench.BenchError, KeyError) as exc:
        raise UsageError(exc.args[0] if exc.args else str(exc)) from None
    except findmagic.ChunkTooLarge as exc:
        print(f"anycall: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    if args.format == "csv":
        text = bench.to_csv(result)
        print(bench.breakeven_line(result.params), file=sys.stderr)
    elif args.format == "json":
        text = json.dumps(bench.to_records(result), indent=2, sort_keys=True) + "\n"
    else:
        text = bench.to_table(result)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# find-magic


def _magic(args) -> bytes:
    if args.magic_hex:
        try:
            return bytes.fromhex(args.magic_hex)
        except ValueError:
            raise UsageError("bad --magic-hex") from None
    return codecs.escape_decode(args.magic.encode())[0]


def cmd_find_magic(args) -> int:
    try:
        config = findmagic.FindMagicConfig(
            magic=_magic(args), offset=args.offset, variant=args.variant,
            chunk_size=args.chunk_size, limits=_limits(args))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    root = _sandbox(args, required=True)
    if args.input:
        with open(args.input, "rb") as fh:
            listing = fh.read()
    else:
        listing = sys.stdin.buffer.read()
    try:
        result = findmagic.run_variant(root, listing, config)
    except findmagic.ChunkTooLarge as exc:
        print(f"anycall: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except findmagic.FindMagicError as exc:
        raise UsageError(str(exc)) from None
    sys.stdout.buffer.write(result.stdout)
    sys.stdout.flush()
    sys.stderr.buffer.write(result.stderr)
    if args.stats:
        rec = {"variant": config.variant, "files": result.files, "matches": result.matches,
               "invocations": result.invocations, "counters": result.counters.as_record()}
        params = _cost_params(args)
        if params is not None:
            rec["modeled_us"] = costmodel.model_time(result.counters, params).t
        with open(args.stats, "w", encoding="utf-8") if args.stats != "-" else _stderr() as fh:
            fh.write(json.dumps(rec, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


class _stderr:
    def __enter__(self):
        return sys.stderr

    def __exit__(self, *exc):
        return False


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    params = _cost_params(args) or costmodel.preset("paper-kpti-getpid")
    rows = []
    for path in args.csv:
        try:
            with open(path, encoding="utf-8") as fh:
                rows += bench.parse_csv(fh.read())
        except OSError as exc:
            raise UsageError(f"{path}: {exc.strerror}") from None
        except bench.ReportError as exc:
            raise UsageError(f"{path}: {exc}") from None
    report = bench.build_report(rows, params)
    if args.format == "json":
        print(json.dumps({
            "rows": len(report.rows), "slope_traditional": report.slope_traditional,
            "slope_anycall": report.slope_anycall, "breakeven_units": report.breakeven_units,
            "breakeven_syscalls": report.breakeven_syscalls, "c_load": report.c_load,
        }, indent=2, sort_keys=True))
    else:
        sys.stdout.write(bench.render_report(report))
    if args.svg:
        try:
            bench.render_svg(report, args.svg)
        except bench.ReportError as exc:
            raise UsageError(str(exc)) from None
    return EXIT_OK


# --------------------------------------------------------------------------
# emit


EMITTERS = {
    "pin-check": lambda a: programs.pin_check_source(a.variant or "valid"),
    "disk-usage": lambda a: programs.disk_usage_source(a.size or 16),
    "getpid": lambda a: programs.getpid_source(a.size or 300),
    "vector-open": lambda a: programs.vector_open_source(a.size or 300),
    "vector-close": lambda a: programs.vector_close_source(a.size or 300),
    "find-magic": lambda a: programs.find_magic_source(a.size or 4, findmagic.DEFAULT_MAGIC, 0),
}


def cmd_emit(args) -> int:
    try:
        source = EMITTERS[args.name](args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.binary:
        if not args.output:
            raise UsageError("--binary needs --output")
        with open(args.output, "wb") as fh:
            fh.write(dump_binary(assemble(source, name=args.name)))
    elif args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(source)
    else:
        sys.stdout.write(source)
    return EXIT_OK


# --------------------------------------------------------------------------


def _add_limits(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-insns", type=int, default=Limits.max_insns,
                   help="explored-instruction budget (default %(default)s)")
    p.add_argument("--max-states", type=int, default=Limits.max_states,
                   help="pending-state budget (default %(default)s)")


def _add_cost(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cost-preset", choices=sorted(costmodel.PRESETS), help="cost preset")
    p.add_argument("--cost-file", help="key=value cost parameter file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="anycall", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="statically check a program")
    p.add_argument("program", help="assembly text or binary program file")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_limits(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", help="verify and run a program as one aggregated call")
    p.add_argument("program")
    p.add_argument("--arg", default="0", help="initial r1: integer or @ARENA_OFFSET")
    p.add_argument("--sandbox", help=f"sandbox root (default ${SANDBOX_ENV})")
    p.add_argument("--open", action="append", default=[], metavar="PATH",
                   help="open PATH read-only before the run (fds from 3 upward)")
    p.add_argument("--poke", action="append", default=[], metavar="OFF:V1,V2",
                   help="store u64 values at an arena offset before the run")
    p.add_argument("--stdin-file", help="bytes served on fd 0")
    p.add_argument("--trace", nargs="?", const="-", help="write NDJSON trace (default stderr)")
    p.add_argument("--fuel", type=int, default=10_000_000)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--unsafe-skip-verify", action="store_true",
                   help="run rejected programs (testing only)")
    _add_limits(p)
    _add_cost(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="modeled benchmark sweep")
    p.add_argument("benchmark", choices=bench.BENCHMARKS)
    p.add_argument("--invocations", type=int, default=150)
    p.add_argument("--calls", default="1-300", help="calls per invocation, e.g. 1-300:10 or 1,150")
    p.add_argument("--chunk-size", default="512,1024", help="find-magic chunk sizes")
    p.add_argument("--sandbox", help=f"sandbox root (default ${SANDBOX_ENV})")
    p.add_argument("--format", choices=bench.FORMATS, default="csv")
    p.add_argument("-o", "--output")
    _add_cost(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("find-magic", help="print files carrying a magic value; paths on stdin")
    p.add_argument("--variant", choices=findmagic.VARIANTS, default="anycall")
    p.add_argument("--chunk-size", type=int, default=findmagic.DEFAULT_CHUNK)
    p.add_argument("--magic", default=findmagic.DEFAULT_MAGIC.decode(),
                   help="magic value, backslash escapes allowed (default %(default)s)")
    p.add_argument("--magic-hex", help="magic value as hex")
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--sandbox", help=f"sandbox root (default ${SANDBOX_ENV})")
    p.add_argument("--input", help="read the path list from a file instead of stdin")
    p.add_argument("--stats", help="write counters as JSON to a file, or - for stderr")
    _add_limits(p)
    _add_cost(p)
    p.set_defaults(func=cmd_find_magic)

    p = sub.add_parser("report", help="summarize bench CSV files")
    p.add_argument("csv", nargs="+")
    p.add_argument("--svg", help="also write a line chart")
    p.add_argument("--format", choices=("text", "json"), default="text")
    _add_cost(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("emit", help="print a built-in program")
    p.add_argument("name", choices=sorted(EMITTERS))
    p.add_argument("--variant", help="pin-check variant: valid, oob, use_after_unmap, no_null_check, leak")
    p.add_argument("--size", type=int, help="loop bound or chunk size")
    p.add_argument("--binary", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_emit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"anycall: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
