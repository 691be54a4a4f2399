"""Interpreter for verified programs, with helper dispatch into :mod:`syskernel`.

Register values are unsigned 64-bit integers.  Pointers are plain
addresses in a small tagged address space: the frame lives just below
:data:`STACK_TOP`, region handles carry their region id in bits 32..59
(see :func:`syskernel.region_pointer`), and everything else is a user
address or a scalar.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from collections import Counter

from . import isa
from .isa import Instruction, Program
from .syskernel import (
    ARG_MEM, ARG_REGION_MEM, EFAULT, HELPERS_BY_ID, SimKernel, TraceEvent,
    split_region_pointer,
)

MASK = (1 << 64) - 1
SIGN = 1 << 63
STACK_TAG = 0xB
STACK_TOP = (STACK_TAG << 60) | 0x1_0000
DEFAULT_FUEL = 10_000_000

CONTINUE = "continue"


def signed(v: int) -> int:
    return v - (1 << 64) if v & SIGN else v


@dataclass(frozen=True)
class Trap:
    kind: str   # stack, stale_region, region_bounds, misaligned, fuel, div_by_zero, ...
    pc: int
    message: str

    def __str__(self) -> str:
        return f"trap {self.kind} at insn {self.pc}: {self.message}"


@dataclass(frozen=True)
class Exited:
    r0: int


class VMTrap(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.message = message


@dataclass
class RunResult:
    return_value: int
    executed_insns: int
    helper_calls: dict[int, int]
    fault: Trap | None = None


@dataclass
class ExecutionContext:
    program: Program
    kernel: SimKernel
    arg: int = 0
    fuel: int = DEFAULT_FUEL
    registers: list[int] = field(default_factory=lambda: [0] * isa.NUM_REGS)
    stack: bytearray = field(default_factory=lambda: bytearray(isa.STACK_SIZE))
    pc: int = 0
    executed: int = 0
    helper_calls: Counter = field(default_factory=Counter)
    owned_regions: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.registers[1] = self.arg & MASK
        self.registers[isa.FP] = STACK_TOP

    @property
    def mapped_regions(self) -> dict[int, tuple[int, int]]:
        """Region id -> (arena offset, size) for every currently pinned window."""
        return self.kernel.arena.pinned


# --------------------------------------------------------------------------
# Memory


def _resolve(ctx: ExecutionContext, addr: int, width: int) -> tuple[bytearray, int]:
    """Buffer and index backing ``[addr, addr+width)``; traps if not accessible."""
    tag = addr >> 60
    if tag == STACK_TAG:
        frame_off = addr - STACK_TOP
        if frame_off < -isa.STACK_SIZE or frame_off + width > 0:
            raise VMTrap("stack", f"out-of-frame access at frame offset {frame_off}")
        if width and frame_off % width:
            raise VMTrap("misaligned", f"misaligned {width}-byte stack access at {frame_off}")
        return ctx.stack, isa.STACK_SIZE + frame_off
    parts = split_region_pointer(addr)
    if parts is None:
        raise VMTrap("bad_address", f"access to unmapped address 0x{addr:x}")
    region_id, off = parts
    region = ctx.kernel.arena.pinned.get(region_id)
    if region is None:
        raise VMTrap("stale_region", f"access through stale region #{region_id}")
    base, size = region
    if off + width > size:
        raise VMTrap("region_bounds", f"access [{off}, {off + width}) beyond region size {size}")
    if width and off % width:
        raise VMTrap("misaligned", f"misaligned {width}-byte region access at offset {off}")
    return ctx.kernel.arena.bytes, base + off


def _buffer(ctx: ExecutionContext, addr: int, length: int, region_only: bool) -> tuple[bytearray, int]:
    if length < 0:
        raise VMTrap("helper", "negative buffer length")
    if region_only and addr >> 60 != 0xA:
        raise VMTrap("helper", "buffer must be a mapped region")
    # alignment does not apply to helper buffers: resolve the first byte, then bound-check the span
    tag = addr >> 60
    if tag == STACK_TAG:
        frame_off = addr - STACK_TOP
        if frame_off < -isa.STACK_SIZE or frame_off + length > 0:
            raise VMTrap("stack", f"helper buffer [{frame_off}, {frame_off + length}) outside frame")
        return ctx.stack, isa.STACK_SIZE + frame_off
    parts = split_region_pointer(addr)
    if parts is None:
        raise VMTrap("bad_address", f"helper buffer at unmapped address 0x{addr:x}")
    region_id, off = parts
    region = ctx.kernel.arena.pinned.get(region_id)
    if region is None:
        raise VMTrap("stale_region", f"helper buffer in stale region #{region_id}")
    if off + length > region[1]:
        raise VMTrap("region_bounds", "helper buffer exceeds region")
    return ctx.kernel.arena.bytes, region[0] + off


# --------------------------------------------------------------------------
# Helpers


def _call_helper(ctx: ExecutionContext, helper_id: int) -> int:
    spec = HELPERS_BY_ID.get(helper_id)
    if spec is None:
        raise VMTrap("helper", f"unknown helper {helper_id}")
    regs = ctx.registers
    kernel = ctx.kernel
    ctx.helper_calls[helper_id] += 1
    name = spec.name
    if name in ("read", "write"):
        fd, buf, count = signed(regs[1]), regs[2], regs[3]
        mem, index = _buffer(ctx, buf, count, region_only=True)
        user_addr = kernel.arena.base + index
        return kernel.kcall(name, fd, user_addr, count)
    if spec.category == "kcall":
        args = []
        for i, arg in enumerate(spec.args):
            v = regs[1 + i]
            args.append(v if arg.kind == "user_address" else signed(v))
        return kernel.kcall(name, *args)
    if name == "map":
        ptr = kernel.map(regs[1], signed(regs[2]))
        if ptr:
            ctx.owned_regions.add(split_region_pointer(ptr)[0])
        return ptr
    if name == "unmap":
        parts = split_region_pointer(regs[1])
        if parts is None or parts[0] not in kernel.arena.pinned:
            raise VMTrap("stale_region", "unmap of a region that is not mapped")
        kernel.unmap(parts[0])
        ctx.owned_regions.discard(parts[0])
        return 0
    if name == "copy_from_user":
        size = signed(regs[2])
        mem, index = _buffer(ctx, regs[1], size, region_only=False)
        return kernel.copy_from_user(mem, index, size, regs[3])
    if name == "copy_to_user":
        size = signed(regs[2])
        mem, index = _buffer(ctx, regs[3], size, region_only=False)
        return kernel.copy_to_user(regs[1], size, mem, index)
    raise VMTrap("helper", f"helper {name} has no runtime implementation")


# --------------------------------------------------------------------------
# Execution


def _alu(op: int, a: int, b: int) -> int:
    if op == 0x00:
        return (a + b) & MASK
    if op == 0x10:
        return (a - b) & MASK
    if op == 0x20:
        return (a * b) & MASK
    if op == 0x30 or op == 0x90:
        sb = signed(b)
        if sb == 0:
            raise VMTrap("div_by_zero", "division by zero")
        sa = signed(a)
        q = abs(sa) // abs(sb)
        if (sa < 0) != (sb < 0):
            q = -q
        if op == 0x30:
            return q & MASK
        return (sa - q * sb) & MASK
    if op == 0x40:
        return a | b
    if op == 0x50:
        return a & b
    if op == 0x60:
        return (a << (b & 63)) & MASK
    if op == 0x70:
        return a >> (b & 63)
    if op == 0xa0:
        return a ^ b
    if op == 0xb0:
        return b
    raise VMTrap("bad_opcode", f"unknown ALU op 0x{op:02x}")


def _cond(op: int, a: int, b: int) -> bool:
    if op == 0x10:
        return a == b
    if op == 0x50:
        return a != b
    if op == 0x20:
        return a > b
    if op == 0x30:
        return a >= b
    if op == 0xa0:
        return a < b
    if op == 0xb0:
        return a <= b
    sa, sb = signed(a), signed(b)
    if op == 0x60:
        return sa > sb
    if op == 0x70:
        return sa >= sb
    if op == 0xc0:
        return sa < sb
    if op == 0xd0:
        return sa <= sb
    raise VMTrap("bad_opcode", f"unknown jump op 0x{op:02x}")


def _execute(ctx: ExecutionContext, insn: Instruction):
    """Run one instruction; returns CONTINUE or Exited, raises VMTrap."""
    regs = ctx.registers
    opcode = insn.opcode
    cls = opcode & 0x07
    if cls == isa.CLS_ALU64:
        b = regs[insn.src] if opcode & isa.SRC_X else insn.imm & MASK
        regs[insn.dst] = _alu(opcode & 0xF0, regs[insn.dst], b)
        ctx.pc += 1
        return CONTINUE
    if cls == isa.CLS_JMP:
        op = opcode & 0xF0
        if opcode == isa.EXIT:
            return Exited(signed(regs[0]))
        if opcode == isa.CALL:
            result = _call_helper(ctx, insn.imm)
            regs[0] = result & MASK
            regs[1] = regs[2] = regs[3] = regs[4] = regs[5] = 0
            ctx.pc += 1
            return CONTINUE
        if opcode == isa.JA:
            ctx.pc += 1 + insn.off
            return CONTINUE
        b = regs[insn.src] if opcode & isa.SRC_X else insn.imm & MASK
        ctx.pc += 1 + (insn.off if _cond(op, regs[insn.dst], b) else 0)
        return CONTINUE
    width = isa.SIZE_WIDTH[opcode & 0x18]
    if cls == isa.CLS_LDX:
        mem, i = _resolve(ctx, (regs[insn.src] + insn.off) & MASK, width)
        regs[insn.dst] = int.from_bytes(mem[i:i + width], "little")
    else:
        value = regs[insn.src] if cls == isa.CLS_STX else insn.imm & MASK
        mem, i = _resolve(ctx, (regs[insn.dst] + insn.off) & MASK, width)
        mem[i:i + width] = (value & ((1 << (8 * width)) - 1)).to_bytes(width, "little")
    ctx.pc += 1
    return CONTINUE


def step(ctx: ExecutionContext):
    """Execute one instruction: returns CONTINUE, :class:`Exited` or :class:`Trap`."""
    if not 0 <= ctx.pc < len(ctx.program.instructions):
        return Trap("pc", ctx.pc, "program counter out of bounds")
    if ctx.fuel <= 0:
        return Trap("fuel", ctx.pc, "instruction budget exhausted")
    pc = ctx.pc
    ctx.fuel -= 1
    ctx.executed += 1
    try:
        return _execute(ctx, ctx.program.instructions[pc])
    except VMTrap as exc:
        return Trap(exc.kind, pc, exc.message)


def run(ctx: ExecutionContext) -> RunResult:
    insns = ctx.program.instructions
    n = len(insns)
    outcome = None
    while outcome is None:
        pc = ctx.pc
        if not 0 <= pc < n:
            outcome = Trap("pc", pc, "program counter out of bounds")
            break
        if ctx.fuel <= 0:
            outcome = Trap("fuel", pc, "instruction budget exhausted")
            break
        ctx.fuel -= 1
        ctx.executed += 1
        try:
            r = _execute(ctx, insns[pc])
        except VMTrap as exc:
            outcome = Trap(exc.kind, pc, exc.message)
            break
        if r is not CONTINUE:
            outcome = r
    fault = outcome if isinstance(outcome, Trap) else None
    if fault is None and ctx.owned_regions:
        fault = Trap("region_leak", ctx.pc, f"exit with {len(ctx.owned_regions)} region(s) mapped")
    for region_id in sorted(ctx.owned_regions):
        ctx.kernel.arena.unpin(region_id)
    ctx.owned_regions.clear()
    r0 = outcome.r0 if isinstance(outcome, Exited) else signed(ctx.registers[0])
    return RunResult(r0, ctx.executed, dict(ctx.helper_calls), fault)


def invoke_anycall(program: Program, arg: int, kernel: SimKernel, fuel: int = DEFAULT_FUEL) -> RunResult:
    """Run ``program`` behind exactly one user->kernel->user round trip."""
    kernel.counters.anycall_invocations += 1
    kernel.enter("anycall")
    try:
        return run(ExecutionContext(program, kernel, arg=arg, fuel=fuel))
    finally:
        kernel.leave("anycall")


def trace_events(ctx_or_kernel) -> list[TraceEvent]:
    kernel = ctx_or_kernel.kernel if isinstance(ctx_or_kernel, ExecutionContext) else ctx_or_kernel
    if kernel.trace is None:
        raise ValueError("tracing is not enabled on this kernel")
    return list(kernel.trace)


def dump_trace(events: list[TraceEvent]) -> str:
    """Newline-delimited JSON records."""
    return "".join(json.dumps(e.as_record(), sort_keys=True) + "\n" for e in events)
