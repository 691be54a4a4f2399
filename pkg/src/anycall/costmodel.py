"""Modeled execution time from event counters, and break-even analysis.

All costs are in microseconds.  A preset is calibrated from two measured
slopes (traditional and aggregated cost per unit of work) and the one-time
load cost.  A *unit* is the group of syscalls one step of the experiment
performs: a single ``getpid`` for the microbenchmark, an ``open`` plus a
``close`` for the vector benchmark.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping

from .syskernel import HELPERS_BY_NAME, EventCounters

WORK_SHARE = 0.10  # fraction of the aggregated per-call cost attributed to syscall work


@dataclass(frozen=True)
class CostParams:
    c_transition: float = 0.0   # per user/kernel round trip
    c_kcall: float = 0.0        # per kernel call, on top of syscall work
    c_load: float = 0.0         # one-time load + verify + compile
    c_entry: float = 0.0        # per aggregated invocation (its own round trip)
    c_mem_helper: float = 0.0   # per map/unmap/copy helper call
    c_work: Mapping[str, float] = field(default_factory=dict)
    unit: tuple[str, ...] = ("getpid",)
    preset: str = "custom"

    def __post_init__(self) -> None:
        object.__setattr__(self, "c_work", MappingProxyType(dict(self.c_work)))
        object.__setattr__(self, "unit", tuple(self.unit))
        for name in ("c_transition", "c_kcall", "c_load", "c_entry", "c_mem_helper"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if any(v < 0 for v in self.c_work.values()):
            raise ValueError("c_work entries must be >= 0")

    def work(self, syscall: str) -> float:
        return self.c_work.get(syscall, 0.0)

    @property
    def traditional_per_unit(self) -> float:
        return sum(self.c_transition + self.work(s) for s in self.unit)

    @property
    def anycall_per_unit(self) -> float:
        return sum(self.c_kcall + self.work(s) for s in self.unit)


class NoBreakEven(Exception):
    pass


NEVER = None


def calibrate(name: str, unit: tuple[str, ...], traditional_per_unit: float,
              anycall_per_unit: float, load: float, work_share: float = WORK_SHARE) -> CostParams:
    """Split measured per-unit slopes into per-event costs.

    Only the two sums are observable; ``work_share`` of the aggregated
    per-call cost is booked as syscall work and the rest as kernel-call
    overhead, so both slopes are reproduced exactly for any share.
    """
    n = len(unit)
    any_per_call = anycall_per_unit / n
    work = work_share * any_per_call
    return CostParams(
        c_transition=traditional_per_unit / n - work,
        c_kcall=any_per_call - work,
        c_load=load,
        c_work={s: work for s in unit},
        unit=unit,
        preset=name,
    )


def _presets() -> dict[str, CostParams]:
    return {
        # 131.8 us per 150 traditional calls, 2.0 us per 150 kernel calls, 22.34 ms load
        "paper-kpti-getpid": calibrate("paper-kpti-getpid", ("getpid",),
                                       131.8 / 150, 2.0 / 150, 22_340.0),
        # 0.87 ms vs 0.56 ms per processed file over 150 invocations, 33.65 ms load
        "paper-kpti-vector": calibrate("paper-kpti-vector", ("open", "close"),
                                       870.0 / 150, 560.0 / 150, 33_650.0),
        "custom": CostParams(),
    }


PRESETS = MappingProxyType(_presets())


def preset(name: str) -> CostParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown cost preset {name!r}; choose from {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class CostReport:
    t: float              # sum of per-event costs
    t_prime: float        # t plus the one-time load cost when requested
    breakeven_calls: int | None
    components: Mapping[str, float] = field(default_factory=dict)

    def speedup_at(self, params: CostParams, k: int, include_load: bool = True) -> float:
        return speedup(params, k, include_load)


def model_time(counters: EventCounters, params: CostParams, include_load: bool = False) -> CostReport:
    """Affine map from event counts to modeled microseconds."""
    invocations = counters.anycall_invocations
    round_trips = counters.user_to_kernel - invocations
    syscall_calls = 0
    mem_calls = 0
    for name, count in counters.kernel_calls.items():
        if HELPERS_BY_NAME[name].category == "kcall":
            syscall_calls += count
        else:
            mem_calls += count
    parts = {
        "transitions": round_trips * params.c_transition,
        "entries": invocations * params.c_entry,
        "kernel_calls": syscall_calls * params.c_kcall,
        "memory_helpers": mem_calls * params.c_mem_helper,
        "work": math.fsum(n * params.work(s) for s, n in counters.syscall_work.items()),
    }
    t = math.fsum(parts.values())
    load = params.c_load if include_load else 0.0
    parts["load"] = load
    try:
        be = breakeven(params)
    except NoBreakEven:
        be = NEVER
    return CostReport(t, t + load, be, MappingProxyType(parts))


def breakeven(params: CostParams) -> int:
    """Smallest unit count ``k`` with ``c_load + k*any < k*trad``."""
    trad, agg = params.traditional_per_unit, params.anycall_per_unit
    saving = trad - agg
    if saving <= 0:
        raise NoBreakEven("aggregation never amortizes its load cost: no per-call saving")
    k = max(1, math.ceil(params.c_load / saving))
    # guard the strict inequality against rounding at the boundary
    while params.c_load + k * agg >= k * trad:
        k += 1
    while k > 1 and params.c_load + (k - 1) * agg < (k - 1) * trad:
        k -= 1
    return k


def breakeven_or_never(params: CostParams) -> int | None:
    try:
        return breakeven(params)
    except NoBreakEven:
        return NEVER


def speedup(params: CostParams, k: int, include_load: bool = False) -> float:
    """Traditional total over aggregated total for ``k`` units."""
    if k < 1:
        raise ValueError("k must be >= 1")
    trad = k * params.traditional_per_unit
    agg = k * params.anycall_per_unit + (params.c_load if include_load else 0.0)
    return trad / agg if agg else math.inf


def asymptotic_speedup(params: CostParams) -> float:
    return params.traditional_per_unit / params.anycall_per_unit


# -- flat key=value persistence

def dumps(params: CostParams) -> str:
    lines = [f"preset={params.preset}", f"unit={','.join(params.unit)}"]
    for name in ("c_transition", "c_kcall", "c_load", "c_entry", "c_mem_helper"):
        lines.append(f"{name}={getattr(params, name)!r}")
    for syscall in sorted(params.c_work):
        lines.append(f"c_work.{syscall}={params.c_work[syscall]!r}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> CostParams:
    fields: dict = {}
    work: dict[str, float] = {}
    base = CostParams()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {number}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "preset":
            if value in PRESETS:
                base = PRESETS[value]
            fields["preset"] = value
        elif key == "unit":
            fields["unit"] = tuple(s.strip() for s in value.split(",") if s.strip())
        elif key.startswith("c_work."):
            work[key[len("c_work."):]] = float(value)
        elif key in ("c_transition", "c_kcall", "c_load", "c_entry", "c_mem_helper"):
            fields[key] = float(value)
        else:
            raise ValueError(f"line {number}: unknown key {key!r}")
    if work:
        fields["c_work"] = {**base.c_work, **work}
    return replace(base, **fields)
