"""Instruction set, 8-byte encoding and the :class:`Program` container.

The layout follows classic eBPF: one opcode byte, a register byte with the
destination in the low nibble and the source in the high nibble, a signed
16-bit offset and a signed 32-bit immediate, all little-endian.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .syskernel import HELPERS_BY_ID

# Instruction classes
CLS_LDX = 0x01
CLS_ST = 0x02
CLS_STX = 0x03
CLS_JMP = 0x05
CLS_ALU64 = 0x07

SRC_K = 0x00
SRC_X = 0x08

MODE_MEM = 0x60
SIZE_W, SIZE_H, SIZE_B, SIZE_DW = 0x00, 0x08, 0x10, 0x18
SIZE_WIDTH = {SIZE_B: 1, SIZE_H: 2, SIZE_W: 4, SIZE_DW: 8}
WIDTH_SUFFIX = {1: "b", 2: "h", 4: "w", 8: "dw"}

ALU_OPS = {
    "add": 0x00, "sub": 0x10, "mul": 0x20, "div": 0x30, "or": 0x40, "and": 0x50,
    "lsh": 0x60, "rsh": 0x70, "mod": 0x90, "xor": 0xa0, "mov": 0xb0,
}
COND_JMP_OPS = {
    "jeq": 0x10, "jgt": 0x20, "jge": 0x30, "jne": 0x50, "jsgt": 0x60, "jsge": 0x70,
    "jlt": 0xa0, "jle": 0xb0, "jslt": 0xc0, "jsle": 0xd0,
}
JA = 0x00 | CLS_JMP
CALL = 0x80 | CLS_JMP
EXIT = 0x90 | CLS_JMP

ALU_NAMES = {v: k for k, v in ALU_OPS.items()}
JMP_NAMES = {v: k for k, v in COND_JMP_OPS.items()}

FP = 10
NUM_REGS = 11
STACK_SIZE = 512
INSN_SIZE = 8

FILE_MAGIC = b"AGGV"
FILE_VERSION = 1
_HEADER = struct.Struct("<4sHI")
_WORD = struct.Struct("<BBhi")


def _valid_opcodes() -> dict[int, str]:
    table: dict[int, str] = {}
    for name, op in ALU_OPS.items():
        table[op | SRC_K | CLS_ALU64] = "alu"
        table[op | SRC_X | CLS_ALU64] = "alu"
    for name, op in COND_JMP_OPS.items():
        table[op | SRC_K | CLS_JMP] = "jcond"
        table[op | SRC_X | CLS_JMP] = "jcond"
    table[JA] = "ja"
    table[CALL] = "call"
    table[EXIT] = "exit"
    for size in SIZE_WIDTH:
        table[MODE_MEM | size | CLS_LDX] = "ldx"
        table[MODE_MEM | size | CLS_ST] = "st"
        table[MODE_MEM | size | CLS_STX] = "stx"
    return table


OPCODE_KINDS = _valid_opcodes()


class EncodingError(ValueError):
    """Raised for byte sequences or instructions that are not well formed."""


@dataclass(frozen=True, slots=True)
class Instruction:
    opcode: int
    dst: int = 0
    src: int = 0
    off: int = 0
    imm: int = 0

    @property
    def kind(self) -> str:
        return OPCODE_KINDS[self.opcode]

    @property
    def uses_reg_source(self) -> bool:
        return bool(self.opcode & SRC_X)

    @property
    def width(self) -> int:
        return SIZE_WIDTH[self.opcode & 0x18]

    @property
    def op(self) -> int:
        return self.opcode & 0xF0

    def check(self) -> None:
        """Raise :class:`EncodingError` unless every field is legal for the opcode."""
        kind = OPCODE_KINDS.get(self.opcode)
        if kind is None:
            raise EncodingError(f"unknown opcode 0x{self.opcode:02x}")
        if not (0 <= self.dst < NUM_REGS and 0 <= self.src < NUM_REGS):
            raise EncodingError("register index out of range")
        if not -0x8000 <= self.off <= 0x7FFF:
            raise EncodingError("offset does not fit in 16 bits")
        if not -0x8000_0000 <= self.imm <= 0x7FFF_FFFF:
            raise EncodingError("immediate does not fit in 32 bits")
        x = self.uses_reg_source
        if kind == "alu":
            _require_zero(self, off=self.off, src=0 if x else self.src, imm=self.imm if x else 0)
            if self.dst == FP:
                raise EncodingError("write to read-only frame pointer r10")
        elif kind == "ldx":
            _require_zero(self, imm=self.imm)
            if self.dst == FP:
                raise EncodingError("write to read-only frame pointer r10")
        elif kind == "st":
            _require_zero(self, src=self.src)
        elif kind == "stx":
            _require_zero(self, imm=self.imm)
        elif kind == "jcond":
            _require_zero(self, src=0 if x else self.src, imm=self.imm if x else 0)
        elif kind == "ja":
            _require_zero(self, dst=self.dst, src=self.src, imm=self.imm)
        elif kind == "call":
            _require_zero(self, dst=self.dst, src=self.src, off=self.off)
        else:
            _require_zero(self, dst=self.dst, src=self.src, off=self.off, imm=self.imm)


def _require_zero(insn: Instruction, **fields: int) -> None:
    for name, value in fields.items():
        if value:
            raise EncodingError(f"reserved field {name} must be zero for opcode 0x{insn.opcode:02x}")


# Constructors used by program generators and tests.

def alu(name: str, dst: int, src: int | None = None, imm: int = 0) -> Instruction:
    op = ALU_OPS[name]
    if src is None:
        return Instruction(op | SRC_K | CLS_ALU64, dst, 0, 0, imm)
    return Instruction(op | SRC_X | CLS_ALU64, dst, src, 0, 0)


def ldx(width: int, dst: int, src: int, off: int) -> Instruction:
    return Instruction(MODE_MEM | _size_bits(width) | CLS_LDX, dst, src, off, 0)


def stx(width: int, dst: int, off: int, src: int) -> Instruction:
    return Instruction(MODE_MEM | _size_bits(width) | CLS_STX, dst, src, off, 0)


def st(width: int, dst: int, off: int, imm: int) -> Instruction:
    return Instruction(MODE_MEM | _size_bits(width) | CLS_ST, dst, 0, off, imm)


def jcond(name: str, dst: int, off: int, src: int | None = None, imm: int = 0) -> Instruction:
    op = COND_JMP_OPS[name]
    if src is None:
        return Instruction(op | SRC_K | CLS_JMP, dst, 0, off, imm)
    return Instruction(op | SRC_X | CLS_JMP, dst, src, off, 0)


def ja(off: int) -> Instruction:
    return Instruction(JA, 0, 0, off, 0)


def call(helper_id: int) -> Instruction:
    return Instruction(CALL, 0, 0, 0, helper_id)


def exit_() -> Instruction:
    return Instruction(EXIT)


def _size_bits(width: int) -> int:
    for bits, w in SIZE_WIDTH.items():
        if w == width:
            return bits
    raise ValueError(f"unsupported access width {width}")


def jump_target(pc: int, insn: Instruction) -> int | None:
    kind = OPCODE_KINDS.get(insn.opcode)
    if kind in ("ja", "jcond"):
        return pc + 1 + insn.off
    return None


@dataclass(frozen=True)
class Program:
    name: str
    instructions: tuple[Instruction, ...]
    stack_size: int = STACK_SIZE
    helper_imports: tuple[tuple[str, int], ...] = field(init=False)

    def __post_init__(self) -> None:
        insns = tuple(self.instructions)
        object.__setattr__(self, "instructions", insns)
        n = len(insns)
        imports: dict[str, int] = {}
        for pc, insn in enumerate(insns):
            insn.check()
            target = jump_target(pc, insn)
            if target is not None and not 0 <= target < n:
                raise EncodingError(f"instruction {pc}: jump target {target} outside program")
            if insn.opcode == CALL and insn.imm in HELPERS_BY_ID:
                imports[HELPERS_BY_ID[insn.imm].name] = insn.imm
        object.__setattr__(self, "helper_imports", tuple(sorted(imports.items(), key=lambda kv: kv[1])))

    def __len__(self) -> int:
        return len(self.instructions)

    def same_code(self, other: "Program") -> bool:
        return self.instructions == other.instructions


def encode_instruction(insn: Instruction) -> bytes:
    return _WORD.pack(insn.opcode, (insn.src << 4) | insn.dst, insn.off, insn.imm)


def encode(program: Program) -> bytes:
    return b"".join(encode_instruction(i) for i in program.instructions)


def decode(data: bytes, name: str = "prog") -> Program:
    if len(data) % INSN_SIZE:
        raise EncodingError("truncated input: length is not a multiple of 8")
    insns = []
    for pos in range(0, len(data), INSN_SIZE):
        opcode, regs, off, imm = _WORD.unpack_from(data, pos)
        if opcode not in OPCODE_KINDS:
            raise EncodingError(f"unknown opcode byte 0x{opcode:02x} at instruction {pos // 8}")
        insns.append(Instruction(opcode, regs & 0x0F, regs >> 4, off, imm))
    return Program(name, tuple(insns))


def dump_binary(program: Program) -> bytes:
    return _HEADER.pack(FILE_MAGIC, FILE_VERSION, len(program)) + encode(program)


def load_binary(data: bytes, name: str = "prog") -> Program:
    if len(data) < _HEADER.size:
        raise EncodingError("truncated input: missing program header")
    magic, version, count = _HEADER.unpack_from(data)
    if magic != FILE_MAGIC:
        raise EncodingError("bad magic, not a program file")
    if version != FILE_VERSION:
        raise EncodingError(f"unsupported program file version {version}")
    body = data[_HEADER.size:]
    if len(body) != count * INSN_SIZE:
        raise EncodingError(f"truncated input: header promises {count} instructions")
    return decode(body, name)
