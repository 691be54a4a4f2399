"""Line-oriented textual assembly.

Grammar, one statement per line::

    label:                       ; a label may also prefix an instruction
    mov r0, 42                   ; ALU: add sub mul div mod and or xor lsh rsh mov
    add r1, r2
    ldxdw r0, [r10-8]            ; loads:  ldxb ldxh ldxw ldxdw
    stxw [r1+4], r2              ; stores: stxb .. stxdw (register), stb .. stdw (immediate)
    stw [r1+0], 4
    jeq r1, 0, label             ; jeq jne jgt jge jlt jle jsgt jsge jslt jsle
    jsgt r1, r2, +3              ; relative offsets are accepted too
    ja label
    call getpid                  ; helper by name or by number
    exit

Immediates are decimal or ``0x`` hexadecimal and may be negative.
"""
from __future__ import annotations

import re

from . import isa
from .isa import Instruction, Program
from .syskernel import HELPERS_BY_ID, HELPERS_BY_NAME


class AssemblyError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


_LABEL = re.compile(r"\s*([A-Za-z_.][\w.]*)\s*:")
_MEM = re.compile(r"\[\s*(r\d+)\s*(?:([+-])\s*(\w+))?\s*\]$")
_REG = re.compile(r"r(\d+)$")
_INT = re.compile(r"[+-]?(0x[0-9a-fA-F]+|\d+)$")

_LOADS = {f"ldx{s}": w for w, s in isa.WIDTH_SUFFIX.items()}
_STORES_X = {f"stx{s}": w for w, s in isa.WIDTH_SUFFIX.items()}
_STORES_K = {f"st{s}": w for w, s in isa.WIDTH_SUFFIX.items()}


class _Line:
    __slots__ = ("number", "text", "mnemonic", "operands", "col")

    def __init__(self, number, text, mnemonic, operands, col):
        self.number = number
        self.text = text
        self.mnemonic = mnemonic
        self.operands = operands  # list of (token, column)
        self.col = col

    def error(self, message: str, index: int | None = None) -> AssemblyError:
        col = self.col if index is None else self.operands[index][1]
        return AssemblyError(message, self.number, col)


def _split_operands(body: str, start_col: int) -> list[tuple[str, int]]:
    ops = []
    depth = 0
    begin = 0
    for i, ch in enumerate(body + ","):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            token = body[begin:i]
            stripped = token.strip()
            if stripped or i < len(body):
                lead = len(token) - len(token.lstrip())
                ops.append((stripped, start_col + begin + lead))
            begin = i + 1
    return ops


def _parse_lines(source: str) -> tuple[list[_Line], dict[str, int]]:
    lines: list[_Line] = []
    labels: dict[str, int] = {}
    for number, raw in enumerate(source.splitlines(), start=1):
        text = raw.split(";", 1)[0]
        pos = 0
        while True:
            m = _LABEL.match(text, pos)
            if not m:
                break
            name = m.group(1)
            if name in labels:
                raise AssemblyError(f"duplicate label {name!r}", number, m.start(1) + 1)
            labels[name] = len(lines)
            pos = m.end()
        rest = text[pos:]
        if not rest.strip():
            continue
        lead = len(rest) - len(rest.lstrip())
        body = rest.strip()
        col = pos + lead + 1
        parts = body.split(None, 1)
        mnemonic = parts[0].lower()
        operand_text = parts[1] if len(parts) > 1 else ""
        op_col = col + (body.index(operand_text) if operand_text else len(body))
        operands = _split_operands(operand_text, op_col) if operand_text else []
        if any(not tok for tok, _ in operands):
            raise AssemblyError("empty operand", number, op_col)
        lines.append(_Line(number, raw, mnemonic, operands, col))
    return lines, labels


def _reg(line: _Line, index: int) -> int:
    tok = line.operands[index][0].lower()
    m = _REG.match(tok)
    if not m or int(m.group(1)) >= isa.NUM_REGS:
        raise line.error(f"expected register r0..r10, got {tok!r}", index)
    return int(m.group(1))


def _int(line: _Line, index: int, token: str | None = None) -> int:
    tok = token if token is not None else line.operands[index][0]
    if not _INT.match(tok):
        raise line.error(f"expected integer, got {tok!r}", index)
    return int(tok, 0)


def _mem(line: _Line, index: int) -> tuple[int, int]:
    tok = line.operands[index][0]
    m = _MEM.match(tok)
    if not m:
        raise line.error(f"expected memory operand [rN+off], got {tok!r}", index)
    reg = int(_REG.match(m.group(1)).group(1))
    if reg >= isa.NUM_REGS:
        raise line.error(f"register {m.group(1)} out of range", index)
    off = 0
    if m.group(2):
        off = _int(line, index, m.group(3))
        if m.group(2) == "-":
            off = -off
    return reg, off


def _arity(line: _Line, n: int) -> None:
    if len(line.operands) != n:
        raise line.error(f"{line.mnemonic} takes {n} operand(s), got {len(line.operands)}")


def _target(line: _Line, index: int, pc: int, labels: dict[str, int]) -> int:
    tok = line.operands[index][0]
    if tok[0] in "+-" and _INT.match(tok):
        return int(tok, 0)
    if tok not in labels:
        raise line.error(f"undefined label {tok!r}", index)
    return labels[tok] - pc - 1


def _is_reg(line: _Line, index: int) -> bool:
    return bool(_REG.match(line.operands[index][0].lower()))


def _assemble_line(line: _Line, pc: int, labels: dict[str, int]) -> Instruction:
    mn = line.mnemonic
    if mn in isa.ALU_OPS:
        _arity(line, 2)
        dst = _reg(line, 0)
        if dst == isa.FP:
            raise line.error("write to read-only frame pointer r10", 0)
        if _is_reg(line, 1):
            return isa.alu(mn, dst, _reg(line, 1))
        return isa.alu(mn, dst, imm=_int(line, 1))
    if mn in _LOADS:
        _arity(line, 2)
        dst = _reg(line, 0)
        if dst == isa.FP:
            raise line.error("write to read-only frame pointer r10", 0)
        src, off = _mem(line, 1)
        return isa.ldx(_LOADS[mn], dst, src, off)
    if mn in _STORES_X:
        _arity(line, 2)
        dst, off = _mem(line, 0)
        return isa.stx(_STORES_X[mn], dst, off, _reg(line, 1))
    if mn in _STORES_K:
        _arity(line, 2)
        dst, off = _mem(line, 0)
        return isa.st(_STORES_K[mn], dst, off, _int(line, 1))
    if mn in isa.COND_JMP_OPS:
        _arity(line, 3)
        dst = _reg(line, 0)
        off = _target(line, 2, pc, labels)
        if _is_reg(line, 1):
            return isa.jcond(mn, dst, off, src=_reg(line, 1))
        return isa.jcond(mn, dst, off, imm=_int(line, 1))
    if mn == "ja":
        _arity(line, 1)
        return isa.ja(_target(line, 0, pc, labels))
    if mn == "call":
        _arity(line, 1)
        tok = line.operands[0][0]
        if _INT.match(tok):
            return isa.call(int(tok, 0))
        spec = HELPERS_BY_NAME.get(tok)
        if spec is None:
            raise line.error(f"unknown helper {tok!r}", 0)
        return isa.call(spec.id)
    if mn == "exit":
        _arity(line, 0)
        return isa.exit_()
    raise line.error(f"unknown mnemonic {mn!r}")


def assemble(source: str, name: str = "prog") -> Program:
    """Assemble ``source`` into a :class:`Program`; raises :class:`AssemblyError`."""
    lines, labels = _parse_lines(source)
    for label, index in labels.items():
        if index >= len(lines):
            raise AssemblyError(f"label {label!r} does not precede an instruction", len(source.splitlines()) or 1)
    insns = []
    for pc, line in enumerate(lines):
        insn = _assemble_line(line, pc, labels)
        try:
            insn.check()
        except isa.EncodingError as exc:
            raise line.error(str(exc)) from None
        target = isa.jump_target(pc, insn)
        if target is not None and not 0 <= target < len(lines):
            raise line.error(f"jump target {target} outside program")
        insns.append(insn)
    return Program(name, tuple(insns))


def _mem_text(reg: int, off: int) -> str:
    return f"[r{reg}{off:+d}]"


def format_instruction(insn: Instruction, pc: int | None = None,
                       labels: dict[int, str] | None = None) -> str:
    kind = insn.kind
    if kind == "alu":
        name = isa.ALU_NAMES[insn.op]
        operand = f"r{insn.src}" if insn.uses_reg_source else str(insn.imm)
        return f"{name} r{insn.dst}, {operand}"
    if kind == "ldx":
        return f"ldx{isa.WIDTH_SUFFIX[insn.width]} r{insn.dst}, {_mem_text(insn.src, insn.off)}"
    if kind == "stx":
        return f"stx{isa.WIDTH_SUFFIX[insn.width]} {_mem_text(insn.dst, insn.off)}, r{insn.src}"
    if kind == "st":
        return f"st{isa.WIDTH_SUFFIX[insn.width]} {_mem_text(insn.dst, insn.off)}, {insn.imm}"
    if kind in ("jcond", "ja"):
        if labels is not None and pc is not None:
            target = labels[pc + 1 + insn.off]
        else:
            target = f"{insn.off:+d}"
        if kind == "ja":
            return f"ja {target}"
        operand = f"r{insn.src}" if insn.uses_reg_source else str(insn.imm)
        return f"{isa.JMP_NAMES[insn.op]} r{insn.dst}, {operand}, {target}"
    if kind == "call":
        spec = HELPERS_BY_ID.get(insn.imm)
        return f"call {spec.name if spec else insn.imm}"
    return "exit"


def disassemble_lines(program: Program) -> list[str]:
    """One canonical text line per instruction, without label lines."""
    labels = _label_map(program)
    return [format_instruction(insn, pc, labels) for pc, insn in enumerate(program.instructions)]


def _label_map(program: Program) -> dict[int, str]:
    targets = sorted({t for pc, insn in enumerate(program.instructions)
                      if (t := isa.jump_target(pc, insn)) is not None})
    return {t: f"L{t}" for t in targets}


def disassemble(program: Program) -> str:
    labels = _label_map(program)
    out = []
    for pc, insn in enumerate(program.instructions):
        if pc in labels:
            out.append(f"{labels[pc]}:")
        out.append(format_instruction(insn, pc, labels))
    return "".join(line + "\n" for line in out)
