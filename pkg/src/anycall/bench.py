"""Benchmark harness and report rendering.

Each point runs the traditional and the aggregated mode through a fresh
simulated kernel, then prices the counters with a cost preset.  Columns are
per invocation: for ``getpid`` and ``vector-open-close`` an invocation is
one aggregated call of ``k`` units, for ``find-magic`` it is one run of the
tool over the whole file list with ``k`` as the chunk size.
"""
from __future__ import annotations

import csv
import io
import math
import os
import statistics
from dataclasses import dataclass, field

from . import costmodel
from .costmodel import CostParams
from .findmagic import FindMagicConfig, run_variant, walk
from .isa import Program
from .programs import (
    getpid_program, vector_close_program, vector_dir_addr, vector_fd_array_addr,
    vector_open_program,
)
from .syskernel import MAX_OPEN_FILES, O_RDWR, O_TMPFILE, EventCounters, SimKernel, traditional_syscall
from .verifier import verify
from .vm import invoke_anycall

BENCHMARKS = ("getpid", "vector-open-close", "find-magic")
FORMATS = ("csv", "json", "table")
CSV_HEADER = ("k", "modeled_us_traditional", "modeled_us_anycall",
              "transitions_traditional", "transitions_anycall", "kcalls_anycall")
DEFAULT_PRESET = {"getpid": "paper-kpti-getpid", "vector-open-close": "paper-kpti-vector",
                  "find-magic": "paper-kpti-getpid"}
MAX_GETPID_CALLS = 1 << 16
MAX_VECTOR_FILES = MAX_OPEN_FILES - 8


class BenchError(Exception):
    pass


def parse_points(text: str) -> list[int]:
    """``"1-300"``, ``"1-300:10"`` (with step) or ``"1,10,150"``."""
    points: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "-" in part:
                span, _, step = part.partition(":")
                lo, hi = (int(x) for x in span.split("-", 1))
                points.extend(range(lo, hi + 1, int(step) if step else 1))
            else:
                points.append(int(part))
        except ValueError:
            raise BenchError(f"bad point list {text!r}") from None
    if not points:
        raise BenchError("empty range of calls per invocation")
    if min(points) < 1:
        raise BenchError("calls per invocation must be >= 1")
    return points


@dataclass(frozen=True)
class BenchSpec:
    benchmark: str = "getpid"
    invocations: int = 150
    points: tuple[int, ...] = tuple(range(1, 301))
    chunk_sizes: tuple[int, ...] = (512,)
    preset: str | None = None
    sandbox: str | None = None
    fmt: str = "csv"
    params: CostParams | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.benchmark not in BENCHMARKS:
            raise BenchError(f"unknown benchmark {self.benchmark!r}")
        if self.fmt not in FORMATS:
            raise BenchError(f"unknown format {self.fmt!r}")
        if self.invocations < 1:
            raise BenchError("invocations must be >= 1")
        ks = self.chunk_sizes if self.benchmark == "find-magic" else self.points
        if not ks:
            raise BenchError("empty range")
        if min(ks) < 1:
            raise BenchError("k must be >= 1")
        if self.benchmark == "vector-open-close" and max(self.points) > MAX_VECTOR_FILES:
            raise BenchError(f"vector benchmark supports at most {MAX_VECTOR_FILES} files")
        if self.benchmark == "getpid" and max(self.points) > MAX_GETPID_CALLS:
            raise BenchError(f"getpid benchmark supports at most {MAX_GETPID_CALLS} calls")
        if self.benchmark != "getpid" and not self.sandbox:
            raise BenchError(f"{self.benchmark} needs a sandbox root")

    def cost_params(self) -> CostParams:
        if self.params is not None:
            return self.params
        return costmodel.preset(self.preset or DEFAULT_PRESET[self.benchmark])


@dataclass(frozen=True)
class BenchRow:
    k: int
    modeled_us_traditional: float
    modeled_us_anycall: float
    transitions_traditional: int
    transitions_anycall: int
    kcalls_anycall: int
    modeled_us_anycall_with_load: float

    def csv_fields(self) -> list[str]:
        return [str(self.k), f"{self.modeled_us_traditional:.6f}", f"{self.modeled_us_anycall:.6f}",
                str(self.transitions_traditional), str(self.transitions_anycall),
                str(self.kcalls_anycall)]


@dataclass
class BenchResult:
    spec: BenchSpec
    params: CostParams
    rows: list[BenchRow]

    @property
    def breakeven(self) -> int | None:
        return costmodel.breakeven_or_never(self.params)


def _verified(program: Program) -> Program:
    verdict = verify(program)
    if not verdict.accepted:
        raise BenchError(f"benchmark program {program.name} rejected: {verdict.diagnostics[0]}")
    return program


def _row(k: int, invocations: int, params: CostParams,
         trad: EventCounters, agg: EventCounters) -> BenchRow:
    t = costmodel.model_time(trad, params).t / invocations
    a = costmodel.model_time(agg, params).t / invocations
    return BenchRow(
        k, t, a,
        trad.user_kernel_transitions // invocations,
        agg.user_kernel_transitions // invocations,
        agg.total_kernel_calls // invocations,
        a + params.c_load / invocations,
    )


def _getpid_point(k: int, spec: BenchSpec, program: Program, params: CostParams) -> BenchRow:
    trad = SimKernel()
    for _ in range(spec.invocations):
        for _ in range(k):
            traditional_syscall(trad, "getpid")
    agg = SimKernel()
    for _ in range(spec.invocations):
        result = invoke_anycall(program, k, agg)
        if result.fault is not None or result.return_value != k:
            raise BenchError(f"getpid program misbehaved at k={k}: {result}")
    return _row(k, spec.invocations, params, trad.counters, agg.counters)


def _vector_point(k: int, spec: BenchSpec, programs: tuple[Program, Program],
                  params: CostParams) -> BenchRow:
    open_prog, close_prog = programs
    dir_path = b".\0"
    fds_addr = vector_fd_array_addr()
    with SimKernel(spec.sandbox) as trad:
        trad.arena.write(vector_dir_addr(), dir_path)
        for _ in range(spec.invocations):
            fds = [traditional_syscall(trad, "open", (vector_dir_addr(), O_TMPFILE | O_RDWR))
                   for _ in range(k)]
            if min(fds) < 0:
                raise BenchError(f"cannot create temporary files in the sandbox ({min(fds)})")
            for fd in fds:
                traditional_syscall(trad, "close", (fd,))
        trad_counters = trad.counters.copy()
    with SimKernel(spec.sandbox) as agg:
        agg.arena.write(vector_dir_addr(), dir_path)
        for _ in range(spec.invocations):
            opened = invoke_anycall(open_prog, k, agg)
            fds = [int.from_bytes(agg.arena.read(fds_addr + 8 * i, 8), "little", signed=True)
                   for i in range(k)]
            if opened.fault is not None or min(fds) < 0:
                raise BenchError(f"vector open failed at k={k}")
            closed = invoke_anycall(close_prog, k, agg)
            if closed.fault is not None:
                raise BenchError(f"vector close failed at k={k}")
        agg_counters = agg.counters.copy()
    return _row(k, spec.invocations, params, trad_counters, agg_counters)


def _find_magic_point(chunk: int, spec: BenchSpec, listing: bytes, params: CostParams) -> BenchRow:
    trad = agg = None
    for _ in range(spec.invocations):
        sys_run = run_variant(spec.sandbox, listing, FindMagicConfig(variant="sys", chunk_size=chunk))
        any_run = run_variant(spec.sandbox, listing, FindMagicConfig(variant="anycall", chunk_size=chunk))
        if sys_run.stdout != any_run.stdout:
            raise BenchError("find-magic variants disagree")
        trad = sys_run.counters if trad is None else trad + sys_run.counters
        agg = any_run.counters if agg is None else agg + any_run.counters
    return _row(chunk, spec.invocations, params, trad, agg)


def run_bench(spec: BenchSpec) -> BenchResult:
    params = spec.cost_params()
    rows: list[BenchRow] = []
    if spec.benchmark == "getpid":
        program = _verified(getpid_program(max(300, max(spec.points))))
        rows = [_getpid_point(k, spec, program, params) for k in spec.points]
    elif spec.benchmark == "vector-open-close":
        if not os.path.isdir(spec.sandbox):
            raise BenchError(f"sandbox root {spec.sandbox!r} is not a directory")
        n = max(300, max(spec.points))
        programs = (_verified(vector_open_program(n)), _verified(vector_close_program(n)))
        rows = [_vector_point(k, spec, programs, params) for k in spec.points]
    else:
        if not os.path.isdir(spec.sandbox):
            raise BenchError(f"sandbox root {spec.sandbox!r} is not a directory")
        listing = "".join(p + "\n" for p in walk(spec.sandbox)).encode()
        rows = [_find_magic_point(c, spec, listing, params) for c in spec.chunk_sizes]
    return BenchResult(spec, params, rows)


# --------------------------------------------------------------------------
# Rendering


def to_csv(result: BenchResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in result.rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


def to_records(result: BenchResult) -> dict:
    be = result.breakeven
    return {
        "benchmark": result.spec.benchmark,
        "invocations": result.spec.invocations,
        "preset": result.params.preset,
        "unit": list(result.params.unit),
        "breakeven_units": be,
        "breakeven_syscalls": None if be is None else be * len(result.params.unit),
        "rows": [
            {name: getattr(row, name) for name in (*CSV_HEADER, "modeled_us_anycall_with_load")}
            for row in result.rows
        ],
    }


def to_table(result: BenchResult) -> str:
    cols = (*CSV_HEADER, "modeled_us_anycall_with_load")
    body = [[str(getattr(r, c)) if isinstance(getattr(r, c), int) else f"{getattr(r, c):.3f}"
             for c in cols] for r in result.rows]
    widths = [max(len(c), *(len(line[i]) for line in body)) if body else len(c)
              for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in body]
    lines.append(breakeven_line(result.params))
    return "\n".join(lines) + "\n"


def breakeven_line(params: CostParams) -> str:
    be = costmodel.breakeven_or_never(params)
    unit = "+".join(params.unit)
    if be is None:
        return f"break-even ({params.preset}): never"
    return (f"break-even ({params.preset}): {be} x {unit} "
            f"({be * len(params.unit)} system calls)")


# --------------------------------------------------------------------------
# Reports from CSV


class ReportError(Exception):
    pass


@dataclass
class Report:
    rows: list[dict]
    slope_traditional: float | None
    slope_anycall: float | None
    syscalls_per_unit: float | None
    breakeven_units: int | None
    c_load: float

    @property
    def breakeven_syscalls(self) -> int | None:
        if self.breakeven_units is None or self.syscalls_per_unit is None:
            return None
        return round(self.breakeven_units * self.syscalls_per_unit)


def parse_csv(text: str) -> list[dict]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ReportError("empty CSV") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ReportError(f"unexpected CSV header; expected {','.join(CSV_HEADER)}")
    rows = []
    for number, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != len(CSV_HEADER):
            raise ReportError(f"line {number}: expected {len(CSV_HEADER)} fields")
        try:
            rows.append({
                "k": int(fields[0]),
                "modeled_us_traditional": float(fields[1]),
                "modeled_us_anycall": float(fields[2]),
                "transitions_traditional": int(fields[3]),
                "transitions_anycall": int(fields[4]),
                "kcalls_anycall": int(fields[5]),
            })
        except ValueError as exc:
            raise ReportError(f"line {number}: {exc}") from None
    if not rows:
        raise ReportError("CSV has no data rows")
    return rows


def build_report(rows: list[dict], params: CostParams) -> Report:
    ks = [r["k"] for r in rows]
    if len(set(ks)) < 2:
        return Report(rows, None, None, None, None, params.c_load)
    st, _ = statistics.linear_regression(ks, [r["modeled_us_traditional"] for r in rows])
    sa, _ = statistics.linear_regression(ks, [r["modeled_us_anycall"] for r in rows])
    # a traditional syscall is one round trip, i.e. two transitions
    per_unit, _ = statistics.linear_regression(ks, [r["transitions_traditional"] / 2 for r in rows])
    be = math.ceil(params.c_load / (st - sa)) if st > sa else None
    return Report(rows, st, sa, per_unit, be, params.c_load)


def render_report(report: Report) -> str:
    lines = [f"{'k':>6} {'traditional_us':>16} {'anycall_us':>12} {'trans_trad':>10} {'trans_any':>9}"]
    for r in report.rows:
        lines.append(f"{r['k']:>6} {r['modeled_us_traditional']:>16.3f} {r['modeled_us_anycall']:>12.3f} "
                     f"{r['transitions_traditional']:>10} {r['transitions_anycall']:>9}")
    if report.slope_traditional is None:
        lines.append("single point: no slope, no break-even line")
    else:
        lines.append(f"slope traditional: {report.slope_traditional:.6f} us per k")
        lines.append(f"slope anycall:     {report.slope_anycall:.6f} us per k")
        if report.breakeven_units is None:
            lines.append("break-even: never")
        else:
            lines.append(f"break-even: {report.breakeven_units} per-k units, "
                         f"~{report.breakeven_syscalls} system calls (load {report.c_load:g} us)")
    return "\n".join(lines) + "\n"


def render_svg(report: Report, path: str | os.PathLike) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise ReportError("SVG output needs matplotlib (pip install 'artifact[plot]')") from None
    ks = [r["k"] for r in report.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ks, [r["modeled_us_traditional"] for r in report.rows], label="traditional")
    ax.plot(ks, [r["modeled_us_anycall"] for r in report.rows], label="aggregated")
    ax.set_xlabel("calls per invocation")
    ax.set_ylabel("modeled time per invocation (us)")
    if report.breakeven_units is not None:
        ax.set_title(f"break-even at {report.breakeven_units} units")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
