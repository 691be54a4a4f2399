"""Path-sensitive abstract interpreter that accepts or rejects programs.

Each pending path carries an :class:`AbstractState`.  States are explored
depth first; an exact (instruction, state) pair already explored is pruned,
and one that is still on the current path is a non-terminating loop.
Loops are therefore admitted only when the tracked intervals change on each
iteration and eventually decide the loop condition.

Rule ids used in diagnostics:

R1  read of an uninitialized register or stack byte
R2  memory access outside the frame or a live region, misalignment,
    illegal pointer arithmetic or pointer leak
R3  use of a maybe-null region before a null check
R4  dereference of a user-space address
R5  access through a handle whose region was unmapped
R6  exit with a region still mapped
R7  helper contract violation (also: possibly-zero divisor)
R8  termination: unbounded loop or analysis budget exhausted
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import isa
from .isa import Instruction, Program
from .syskernel import (
    ARG_CONST_SIZE, ARG_MEM, ARG_REGION, ARG_REGION_MEM, ARG_SCALAR, ARG_SIZE,
    ARG_USER_ADDR, HELPERS_BY_ID, RET_MAYBE_NULL_REGION,
)

MIN64 = -(1 << 63)
MAX64 = (1 << 63) - 1
U64 = 1 << 64

UNINIT = "uninitialized"
SCALAR = "scalar"
USER = "user_address"
REGION = "region_handle"
MAYBE_NULL = "maybe_null_region"
STACK = "stack_pointer"

_SCALARS = (SCALAR, USER)
_POINTERS = (REGION, MAYBE_NULL, STACK)

SLOT = 8


@dataclass(frozen=True, slots=True)
class AbstractValue:
    kind: str
    lo: int = 0
    hi: int = 0
    region: int = 0  # region id for region handles
    size: int = 0    # region size for region handles

    @property
    def const(self) -> int | None:
        return self.lo if self.lo == self.hi else None

    def __str__(self) -> str:
        if self.kind == UNINIT:
            return "?"
        rng = f"{self.lo}" if self.lo == self.hi else f"[{self.lo}, {self.hi}]"
        if self.kind in (REGION, MAYBE_NULL):
            return f"{self.kind}#{self.region}(size={self.size}, off={rng})"
        return f"{self.kind}({rng})"


UNINIT_VALUE = AbstractValue(UNINIT)
UNKNOWN = AbstractValue(SCALAR, MIN64, MAX64)


def scalar(lo: int, hi: int | None = None) -> AbstractValue:
    return AbstractValue(SCALAR, lo, lo if hi is None else hi)


@dataclass(frozen=True, slots=True)
class AbstractState:
    regs: tuple[AbstractValue, ...]
    # one entry per 8-byte slot: None (uninitialized), int bitmask of
    # initialized bytes holding unknown data, or a spilled AbstractValue
    stack: tuple
    live_regions: frozenset[int] = frozenset()
    next_region: int = 1


@dataclass(frozen=True)
class Limits:
    max_insns: int = 100_000
    max_states: int = 10_000


@dataclass(frozen=True, order=True)
class Diagnostic:
    index: int
    rule: str
    message: str
    severity: str = "error"


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    diagnostics: tuple[Diagnostic, ...]
    explored_insns: int
    peak_pending_states: int
    budget_exhausted: bool = False

    @property
    def rules(self) -> set[str]:
        return {d.rule for d in self.diagnostics}

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "diagnostics": [
                {"index": d.index, "rule": d.rule, "severity": d.severity, "message": d.message}
                for d in self.diagnostics
            ],
            "stats": {
                "explored_insns": self.explored_insns,
                "peak_pending_states": self.peak_pending_states,
                "budget_exhausted": self.budget_exhausted,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class Reject(Exception):
    def __init__(self, rule: str, message: str):
        super().__init__(message)
        self.rule = rule
        self.message = message


# --------------------------------------------------------------------------
# Interval arithmetic


def _clamp(lo: int, hi: int) -> tuple[int, int]:
    if lo < MIN64 or hi > MAX64:
        return MIN64, MAX64
    return lo, hi


def _to_signed(v: int) -> int:
    v &= U64 - 1
    return v - U64 if v > MAX64 else v


def _sdiv(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return _to_signed(-q if (a < 0) != (b < 0) else q)


def _smod(a: int, b: int) -> int:
    return _to_signed(a - _sdiv(a, b) * b)


def _interval_alu(name: str, a: AbstractValue, b: AbstractValue) -> tuple[int, int]:
    alo, ahi, blo, bhi = a.lo, a.hi, b.lo, b.hi
    if name == "add":
        return _clamp(alo + blo, ahi + bhi)
    if name == "sub":
        return _clamp(alo - bhi, ahi - blo)
    if name == "mul":
        corners = (alo * blo, alo * bhi, ahi * blo, ahi * bhi)
        return _clamp(min(corners), max(corners))
    if name == "div":
        if alo == ahi and blo == bhi:
            q = _sdiv(alo, blo)
            return q, q
        m = max(abs(alo), abs(ahi))
        return _clamp(-m, m)
    if name == "mod":
        if alo == ahi and blo == bhi:
            r = _smod(alo, blo)
            return r, r
        m = max(abs(blo), abs(bhi)) - 1
        if alo >= 0:
            return 0, min(ahi, m)
        if ahi <= 0:
            return max(alo, -m), 0
        return -m, m
    if alo == ahi and blo == bhi and name in ("and", "or", "xor"):
        v = {"and": alo & blo, "or": alo | blo, "xor": alo ^ blo}[name]
        return v, v
    if name == "and":
        if alo >= 0 and blo >= 0:
            return 0, min(ahi, bhi)
        if alo >= 0:
            return 0, ahi
        if blo >= 0:
            return 0, bhi
        return MIN64, MAX64
    if name in ("or", "xor"):
        if alo >= 0 and blo >= 0:
            top = (1 << max(ahi, bhi).bit_length()) - 1
            return (max(alo, blo) if name == "or" else 0), top
        return MIN64, MAX64
    if name in ("lsh", "rsh"):
        if blo != bhi:
            return MIN64, MAX64
        s = blo & 63
        if name == "lsh":
            return _clamp(alo << s, ahi << s)
        if s == 0:
            return alo, ahi
        if alo >= 0:
            return alo >> s, ahi >> s
        return 0, (U64 - 1) >> s
    raise AssertionError(name)


# --------------------------------------------------------------------------
# Branch refinement

def _to_unsigned(lo: int, hi: int) -> tuple[int, int]:
    if lo >= 0:
        return lo, hi
    if hi < 0:
        return lo + U64, hi + U64
    return 0, U64 - 1


def _from_unsigned(lo: int, hi: int, orig: tuple[int, int]) -> tuple[int, int] | None:
    if hi <= MAX64:
        s = (lo, hi)
    elif lo > MAX64:
        s = (lo - U64, hi - U64)
    else:
        s = orig
    lo2, hi2 = max(s[0], orig[0]), min(s[1], orig[1])
    return (lo2, hi2) if lo2 <= hi2 else None


def _refine_cmp(op: str, a: tuple[int, int], b: tuple[int, int]):
    """Refine intervals for ``a OP b`` being true; returns (a', b') or None if impossible."""
    alo, ahi = a
    blo, bhi = b
    if op == "eq":
        lo, hi = max(alo, blo), min(ahi, bhi)
        return ((lo, hi), (lo, hi)) if lo <= hi else None
    if op == "ne":
        if alo == ahi == blo == bhi:
            return None
        if blo == bhi:
            alo += alo == blo
            ahi -= ahi == blo
        if alo == ahi:
            blo += blo == alo
            bhi -= bhi == alo
        return ((alo, ahi), (blo, bhi)) if alo <= ahi and blo <= bhi else None
    if op == "gt":
        if ahi <= blo:
            return None
        return (max(alo, blo + 1), ahi), (blo, min(bhi, ahi - 1))
    if op == "ge":
        if ahi < blo:
            return None
        return (max(alo, blo), ahi), (blo, min(bhi, ahi))
    if op == "lt":
        r = _refine_cmp("gt", b, a)
        return None if r is None else (r[1], r[0])
    if op == "le":
        r = _refine_cmp("ge", b, a)
        return None if r is None else (r[1], r[0])
    raise AssertionError(op)


_NEGATE = {"eq": "ne", "ne": "eq", "gt": "le", "ge": "lt", "lt": "ge", "le": "gt"}
_JMP_SEMANTICS = {
    "jeq": ("eq", False), "jne": ("ne", False),
    "jgt": ("gt", False), "jge": ("ge", False), "jlt": ("lt", False), "jle": ("le", False),
    "jsgt": ("gt", True), "jsge": ("ge", True), "jslt": ("lt", True), "jsle": ("le", True),
}


def _branch(name: str, taken: bool, a: AbstractValue, b: AbstractValue):
    op, signed = _JMP_SEMANTICS[name]
    if not taken:
        op = _NEGATE[op]
    if op in ("eq", "ne") or signed:
        r = _refine_cmp(op, (a.lo, a.hi), (b.lo, b.hi))
        return r
    ua, ub = _to_unsigned(a.lo, a.hi), _to_unsigned(b.lo, b.hi)
    r = _refine_cmp(op, ua, ub)
    if r is None:
        return None
    ra = _from_unsigned(*r[0], (a.lo, a.hi))
    rb = _from_unsigned(*r[1], (b.lo, b.hi))
    if ra is None or rb is None:
        return None
    return ra, rb


# --------------------------------------------------------------------------
# Analyzer


def initial_state() -> AbstractState:
    regs = [UNINIT_VALUE] * isa.NUM_REGS
    regs[1] = AbstractValue(USER, MIN64, MAX64)
    regs[isa.FP] = AbstractValue(STACK, 0, 0)
    return AbstractState(tuple(regs), (None,) * (isa.STACK_SIZE // SLOT))


class _Analyzer:
    def __init__(self, program: Program):
        self.program = program
        self.insns = program.instructions

    # -- register helpers

    @staticmethod
    def read(st: AbstractState, reg: int) -> AbstractValue:
        v = st.regs[reg]
        if v.kind == UNINIT:
            raise Reject("R1", f"read of uninitialized register r{reg}")
        return v

    @staticmethod
    def set_reg(st: AbstractState, reg: int, value: AbstractValue) -> AbstractState:
        regs = list(st.regs)
        regs[reg] = value
        return replace(st, regs=tuple(regs))

    # -- transfer

    def step(self, pc: int, st: AbstractState) -> list[tuple[int, AbstractState]]:
        insn = self.insns[pc]
        kind = insn.kind
        if kind == "alu":
            return [(pc + 1, self.alu(insn, st))]
        if kind == "ldx":
            return [(pc + 1, self.load(insn, st))]
        if kind in ("st", "stx"):
            return [(pc + 1, self.store(insn, st))]
        if kind == "ja":
            return [(pc + 1 + insn.off, st)]
        if kind == "jcond":
            return self.cond_jump(pc, insn, st)
        if kind == "call":
            return [(pc + 1, self.call(insn, st))]
        self.exit(st)
        return []

    def alu(self, insn: Instruction, st: AbstractState) -> AbstractState:
        name = isa.ALU_NAMES[insn.op]
        if insn.uses_reg_source:
            src = self.read(st, insn.src)
        else:
            src = scalar(insn.imm)
        if name == "mov":
            return self.set_reg(st, insn.dst, src)
        dst = self.read(st, insn.dst)
        if name in ("div", "mod"):
            if src.kind not in _SCALARS or dst.kind not in _SCALARS:
                raise Reject("R2", f"{name} on pointer")
            if src.lo <= 0 <= src.hi:
                raise Reject("R7", "divisor may be zero")
        if dst.kind in _POINTERS or src.kind in _POINTERS:
            return self.set_reg(st, insn.dst, self.pointer_alu(name, dst, src))
        lo, hi = _interval_alu(name, dst, src)
        kind = SCALAR
        if name in ("add", "sub") and (dst.kind == USER) != (src.kind == USER):
            if name == "add" or dst.kind == USER:
                kind = USER
        return self.set_reg(st, insn.dst, AbstractValue(kind, lo, hi))

    def pointer_alu(self, name: str, dst: AbstractValue, src: AbstractValue) -> AbstractValue:
        if MAYBE_NULL in (dst.kind, src.kind):
            raise Reject("R3", "arithmetic on a region handle that may be null")
        if name == "sub" and dst.kind in _POINTERS and src.kind in _POINTERS:
            if dst.kind == src.kind and dst.region == src.region:
                return AbstractValue(SCALAR, *_clamp(dst.lo - src.hi, dst.hi - src.lo))
            raise Reject("R2", "subtraction of unrelated pointers")
        if name not in ("add", "sub") or (name == "sub" and src.kind in _POINTERS):
            raise Reject("R2", f"pointer arithmetic '{name}' prohibited")
        if dst.kind in _POINTERS and src.kind in _POINTERS:
            raise Reject("R2", "addition of two pointers")
        ptr, delta = (dst, src) if dst.kind in _POINTERS else (src, dst)
        if name == "add":
            lo, hi = ptr.lo + delta.lo, ptr.hi + delta.hi
        else:
            lo, hi = ptr.lo - delta.hi, ptr.hi - delta.lo
        if ptr.kind == STACK:
            if lo < -isa.STACK_SIZE or hi > 0:
                raise Reject("R2", f"stack pointer offset [{lo}, {hi}] leaves the frame")
        elif lo < 0 or hi > ptr.size:
            raise Reject("R2", f"region pointer offset [{lo}, {hi}] outside region of size {ptr.size}")
        return replace(ptr, lo=lo, hi=hi)

    def check_access(self, st: AbstractState, ptr: AbstractValue, reg: int, off: int,
                     width: int) -> None:
        kind = ptr.kind
        if kind == USER:
            raise Reject("R4", f"dereference of user-space address in r{reg}")
        if kind == MAYBE_NULL:
            raise Reject("R3", f"r{reg} may be null; check it before dereferencing")
        if kind == SCALAR:
            raise Reject("R2", f"dereference of non-pointer r{reg}")
        lo, hi = ptr.lo + off, ptr.hi + off
        if kind == STACK:
            if lo != hi:
                raise Reject("R2", "variable-offset stack access")
            if lo < -isa.STACK_SIZE or lo + width > 0:
                raise Reject("R2", f"stack access at {lo} width {width} out-of-bounds")
            if lo % width:
                raise Reject("R2", f"misaligned stack access at {lo} width {width}")
            return
        if ptr.region not in st.live_regions:
            raise Reject("R5", f"access through r{reg} after its region was unmapped")
        if lo < 0 or hi + width > ptr.size:
            raise Reject("R2", f"out-of-bounds access [{lo}, {hi + width}) in region of size {ptr.size}")
        if width > 1 and (lo != hi or lo % width):
            raise Reject("R2", f"misaligned or variable-offset {width}-byte region access")

    def load(self, insn: Instruction, st: AbstractState) -> AbstractState:
        ptr = self.read(st, insn.src)
        width = insn.width
        self.check_access(st, ptr, insn.src, insn.off, width)
        if ptr.kind == STACK:
            value = self.stack_load(st, ptr.lo + insn.off, width)
        else:
            value = UNKNOWN if width == 8 else scalar(0, (1 << (8 * width)) - 1)
        return self.set_reg(st, insn.dst, value)

    def store(self, insn: Instruction, st: AbstractState) -> AbstractState:
        ptr = self.read(st, insn.dst)
        width = insn.width
        value = self.read(st, insn.src) if insn.kind == "stx" else scalar(insn.imm)
        self.check_access(st, ptr, insn.dst, insn.off, width)
        if ptr.kind == STACK:
            return self.stack_store(st, ptr.lo + insn.off, width, value)
        if value.kind in _POINTERS:
            raise Reject("R2", "storing a pointer into user memory leaks it")
        return st

    # -- stack map

    @staticmethod
    def _slot(frame_off: int) -> tuple[int, int]:
        pos = frame_off + isa.STACK_SIZE
        return pos // SLOT, pos % SLOT

    def stack_load(self, st: AbstractState, frame_off: int, width: int) -> AbstractValue:
        slot, byte = self._slot(frame_off)
        entry = st.stack[slot]
        if isinstance(entry, AbstractValue):
            if width == SLOT:
                return entry
            return scalar(0, (1 << (8 * width)) - 1)
        need = ((1 << width) - 1) << byte
        if entry is None or entry & need != need:
            raise Reject("R1", f"read of uninitialized stack at {frame_off}")
        return UNKNOWN if width == 8 else scalar(0, (1 << (8 * width)) - 1)

    def stack_store(self, st: AbstractState, frame_off: int, width: int,
                    value: AbstractValue) -> AbstractState:
        slot, byte = self._slot(frame_off)
        stack = list(st.stack)
        if width == SLOT:
            stack[slot] = value
        else:
            if value.kind in _POINTERS:
                raise Reject("R2", "partial spill of a pointer")
            entry = stack[slot]
            mask = 0xFF if isinstance(entry, AbstractValue) else (entry or 0)
            stack[slot] = mask | (((1 << width) - 1) << byte)
        return replace(st, stack=tuple(stack))

    def stack_mark_written(self, st: AbstractState, start: int, length: int) -> AbstractState:
        stack = list(st.stack)
        for frame_off in range(start, start + length):
            slot, byte = self._slot(frame_off)
            entry = stack[slot]
            mask = 0xFF if isinstance(entry, AbstractValue) else (entry or 0)
            stack[slot] = mask | (1 << byte)
        return replace(st, stack=tuple(stack))

    def stack_require_init(self, st: AbstractState, start: int, length: int) -> None:
        for frame_off in range(start, start + length):
            slot, byte = self._slot(frame_off)
            entry = st.stack[slot]
            if isinstance(entry, AbstractValue):
                continue
            if entry is None or not entry & (1 << byte):
                raise Reject("R1", f"helper reads uninitialized stack at {frame_off}")

    # -- control flow

    def cond_jump(self, pc: int, insn: Instruction, st: AbstractState):
        name = isa.JMP_NAMES[insn.op]
        a = self.read(st, insn.dst)
        b = self.read(st, insn.src) if insn.uses_reg_source else scalar(insn.imm)
        taken_pc, fall_pc = pc + 1 + insn.off, pc + 1
        if a.kind in _POINTERS or b.kind in _POINTERS:
            return self.pointer_jump(name, insn, a, b, st, taken_pc, fall_pc)
        out = []
        for taken, target in ((True, taken_pc), (False, fall_pc)):
            r = _branch(name, taken, a, b)
            if r is None:
                continue
            (alo, ahi), (blo, bhi) = r
            nst = self.set_reg(st, insn.dst, replace(a, lo=alo, hi=ahi))
            if insn.uses_reg_source and insn.src != insn.dst:
                nst = self.set_reg(nst, insn.src, replace(b, lo=blo, hi=bhi))
            out.append((target, nst))
        # fall-through explored last: push order is reversed by the caller
        return out

    def pointer_jump(self, name, insn, a, b, st, taken_pc, fall_pc):
        if name not in ("jeq", "jne"):
            raise Reject("R2", "ordered comparison involving a pointer")
        ptr, other, ptr_reg = (a, b, insn.dst) if a.kind in _POINTERS else (b, a, insn.src)
        if other.kind in _POINTERS or other.const != 0:
            if ptr.kind == MAYBE_NULL:
                raise Reject("R3", "maybe-null region compared against non-null value")
            raise Reject("R2", "pointer comparison against non-null value")
        is_null_on_taken = name == "jeq"
        if ptr.kind != MAYBE_NULL:
            # non-null pointer: comparison with 0 is decided
            return [(fall_pc if is_null_on_taken else taken_pc, st)]
        null_state = self.resolve_null(st, ptr.region, null=True)
        live_state = self.resolve_null(st, ptr.region, null=False)
        if is_null_on_taken:
            return [(taken_pc, null_state), (fall_pc, live_state)]
        return [(taken_pc, live_state), (fall_pc, null_state)]

    @staticmethod
    def resolve_null(st: AbstractState, region: int, null: bool) -> AbstractState:
        def fix(v):
            if isinstance(v, AbstractValue) and v.kind == MAYBE_NULL and v.region == region:
                return scalar(0) if null else replace(v, kind=REGION)
            return v
        regs = tuple(fix(v) for v in st.regs)
        stack = tuple(fix(e) for e in st.stack)
        live = st.live_regions - {region} if null else st.live_regions
        return replace(st, regs=regs, stack=stack, live_regions=live)

    def exit(self, st: AbstractState) -> None:
        r0 = self.read(st, 0)
        if r0.kind in _POINTERS:
            raise Reject("R2", "returning a pointer leaks a kernel address")
        if st.live_regions:
            ids = ", ".join(f"#{r}" for r in sorted(st.live_regions))
            raise Reject("R6", f"exit with mapped region(s) {ids}; unmap is required")

    # -- helpers

    def call(self, insn: Instruction, st: AbstractState) -> AbstractState:
        spec = HELPERS_BY_ID.get(insn.imm)
        if spec is None:
            raise Reject("R7", f"call to unknown helper {insn.imm}")
        args = [self.read(st, 1 + i) for i in range(len(spec.args))]
        for i, (arg, value) in enumerate(zip(spec.args, args)):
            reg = i + 1
            k = arg.kind
            if k in (ARG_SCALAR, ARG_USER_ADDR):
                if value.kind not in _SCALARS:
                    rule = "R3" if value.kind == MAYBE_NULL else "R7"
                    raise Reject(rule, f"{spec.name}: argument {arg.name} (r{reg}) must be a scalar, got {value.kind}")
            elif k in (ARG_CONST_SIZE, ARG_SIZE):
                if value.kind not in _SCALARS:
                    raise Reject("R7", f"{spec.name}: size argument {arg.name} (r{reg}) must be a scalar")
                if k == ARG_CONST_SIZE and value.const is None:
                    raise Reject("R7", f"{spec.name}: {arg.name} (r{reg}) must be a compile-time constant")
                if value.lo < arg.min_value:
                    raise Reject("R7", f"{spec.name}: {arg.name} (r{reg}) may be below {arg.min_value}")
            elif k == ARG_REGION:
                self._require_live_region(st, spec.name, arg.name, reg, value)
        for i, (arg, value) in enumerate(zip(spec.args, args)):
            if arg.kind not in (ARG_MEM, ARG_REGION_MEM):
                continue
            reg = i + 1
            size = args[arg.size_arg]
            if arg.kind == ARG_REGION_MEM or value.kind != STACK:
                self._require_live_region(st, spec.name, arg.name, reg, value)
                if value.lo < 0 or value.hi + size.hi > value.size:
                    raise Reject("R2", f"{spec.name}: buffer r{reg} [{value.lo}, {value.hi + size.hi}) "
                                       f"out-of-bounds in region of size {value.size}")
                continue
            if value.const is None:
                raise Reject("R2", f"{spec.name}: variable-offset stack buffer")
            if value.lo < -isa.STACK_SIZE or value.lo + size.hi > 0:
                raise Reject("R2", f"{spec.name}: stack buffer at {value.lo} size {size.hi} out-of-bounds")
            if arg.access == "w":
                st = self.stack_mark_written(st, value.lo, size.lo)
            else:
                self.stack_require_init(st, value.lo, size.hi)

        if spec.name == "unmap":
            st = replace(st, live_regions=st.live_regions - {args[0].region})
        regs = list(st.regs)
        for r in range(1, 6):
            regs[r] = UNINIT_VALUE
        if spec.ret == RET_MAYBE_NULL_REGION:
            rid = st.next_region
            regs[0] = AbstractValue(MAYBE_NULL, 0, 0, rid, args[1].lo)
            return replace(st, regs=tuple(regs), live_regions=st.live_regions | {rid},
                           next_region=rid + 1)
        regs[0] = UNKNOWN
        return replace(st, regs=tuple(regs))

    @staticmethod
    def _require_live_region(st, helper, argname, reg, value):
        if value.kind == MAYBE_NULL:
            raise Reject("R3", f"{helper}: {argname} (r{reg}) may be null")
        if value.kind == USER:
            raise Reject("R4", f"{helper}: {argname} (r{reg}) is a user address, map it first")
        if value.kind != REGION:
            raise Reject("R7", f"{helper}: {argname} (r{reg}) must be a region handle, got {value.kind}")
        if value.region not in st.live_regions:
            raise Reject("R5", f"{helper}: {argname} (r{reg}) refers to an unmapped region")


def verify(program: Program, limits: Limits = Limits()) -> Verdict:
    """Statically check ``program``; never raises for bad programs."""
    insns = program.instructions
    if not insns:
        return Verdict(False, (Diagnostic(0, "R8", "empty program"),), 0, 0)
    analyzer = _Analyzer(program)
    diags: set[Diagnostic] = set()
    explored = 0
    peak = 1
    exhausted = False
    seen: list[set] = [set() for _ in insns]
    active: set[tuple[int, AbstractState]] = set()
    # work items: (pc, state, is_completion_marker)
    work: list[tuple[int, AbstractState, bool]] = [(0, initial_state(), False)]
    pending = 1
    while work:
        pc, st, done = work.pop()
        if done:
            active.discard((pc, st))
            continue
        pending -= 1
        key = (pc, st)
        if key in active:
            diags.add(Diagnostic(pc, "R8", "unbounded loop: state repeats without progress"))
            continue
        if st in seen[pc]:
            continue
        explored += 1
        if explored > limits.max_insns:
            diags.add(Diagnostic(pc, "R8", f"program too complex: explored instruction budget "
                                           f"{limits.max_insns} exhausted"))
            exhausted = True
            break
        seen[pc].add(st)
        try:
            succ = analyzer.step(pc, st)
        except Reject as exc:
            diags.add(Diagnostic(pc, exc.rule, exc.message))
            continue
        if not succ:
            continue
        active.add(key)
        work.append((pc, st, True))
        for item in reversed(succ):
            work.append((item[0], item[1], False))
        pending += len(succ)
        peak = max(peak, pending)
        if pending > limits.max_states:
            diags.add(Diagnostic(pc, "R8", f"program too complex: pending state budget "
                                           f"{limits.max_states} exhausted"))
            exhausted = True
            break
    ordered = tuple(sorted(diags))
    return Verdict(not ordered, ordered, explored, peak, exhausted)


def explain(verdict: Verdict, program: Program | None = None) -> str:
    """Deterministic human-readable report."""
    from .assembler import disassemble_lines

    lines = []
    status = "accepted" if verdict.accepted else "rejected"
    name = f" {program.name}" if program is not None else ""
    lines.append(f"program{name}: {status}")
    lines.append(f"explored instructions: {verdict.explored_insns}, "
                 f"peak pending states: {verdict.peak_pending_states}")
    text = disassemble_lines(program) if program is not None else None
    for d in verdict.diagnostics:
        where = f"insn {d.index}"
        if text is not None and 0 <= d.index < len(text):
            where += f" `{text[d.index]}`"
        lines.append(f"{d.severity} {d.rule} at {where}: {d.message}")
    return "\n".join(lines) + "\n"
