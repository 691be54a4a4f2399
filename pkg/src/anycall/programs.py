"""Aggregation programs used by the harness, tests and benchmarks.

All programs are produced as assembly text and assembled here, so the
generated source can be inspected with ``anycall`` tooling.  Absolute user
addresses are materialized with ``mov``/``lsh``/``or`` since immediates are
32 bits wide.
"""
from __future__ import annotations

from .assembler import assemble
from .isa import Program
from .syskernel import ARENA_BASE, O_RDONLY, O_RDWR, O_TMPFILE, STAT_SIZE, STAT_SIZE_OFFSET


def load_address(reg: str, addr: int) -> list[str]:
    hi, lo = addr >> 32, addr & 0xFFFF_FFFF
    if hi >= 1 << 31 or lo >= 1 << 31:
        raise ValueError(f"address 0x{addr:x} cannot be materialized")
    out = [f"mov {reg}, {hi}", f"lsh {reg}, 32"]
    if lo:
        out.append(f"or {reg}, {lo}")
    return out


def _join(lines: list[str]) -> str:
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Memory-pinning fixture

PIN_CHECK_VALID = """\
; r1 = user address of an int
mov r2, 4
call map
mov r6, r0
jeq r6, 0, fail            ; null check
stw [r6+0], 4              ; in bounds
mov r1, r6
call unmap
mov r0, 0
exit
fail:
mov r0, -1
exit
"""


def pin_check_source(variant: str = "valid") -> str:
    """The map/check/store/unmap skeleton and its single-line mutations.

    ``oob``: 8-byte store into the 4-byte region; ``use_after_unmap``: store
    after unmap; ``no_null_check``: the null check removed; ``leak``: the
    unmap removed.
    """
    lines = PIN_CHECK_VALID.splitlines()
    if variant == "valid":
        pass
    elif variant == "oob":
        lines.insert(lines.index("stw [r6+0], 4              ; in bounds") + 1, "stdw [r6+0], 4")
    elif variant == "use_after_unmap":
        lines.insert(lines.index("call unmap") + 1, "stw [r6+0], 4")
    elif variant == "no_null_check":
        lines.remove("jeq r6, 0, fail            ; null check")
    elif variant == "leak":
        lines.remove("mov r1, r6")
        lines.remove("call unmap")
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return _join(lines)


def pin_check_program(variant: str = "valid") -> Program:
    return assemble(pin_check_source(variant), name=f"pin-check-{variant}")


# --------------------------------------------------------------------------
# Disk usage estimation loop

def disk_usage_layout(max_files: int) -> dict[str, int]:
    """Offsets inside the argument block: count, fd array, stat buffer."""
    header = 8 + 8 * max_files
    return {"count": 0, "fds": 8, "header_size": header, "stat": (header + 7) // 8 * 8}


def disk_usage_source(max_files: int = 16) -> str:
    """Sum ``st_size`` over ``n`` descriptors, ``n`` bounded by ``max_files``.

    The argument is the user address of ``{u64 n; u64 fd[max_files]; stat buf}``.
    """
    lay = disk_usage_layout(max_files)
    frame = -STAT_SIZE
    return _join([
        "mov r6, r1                 ; user block",
        f"mov r2, {lay['header_size']}",
        "call map",
        "jeq r0, 0, fail",
        "mov r7, r0                 ; header region",
        "mov r8, 0                  ; i",
        "mov r9, 0                  ; total",
        "loop:",
        f"jge r8, {max_files}, done   ; i < N",
        "ldxdw r1, [r7+0]",
        "jge r8, r1, done           ; i < n",
        "mov r2, r8",
        "lsh r2, 3",
        "mov r3, r7",
        "add r3, r2",
        "ldxdw r1, [r3+8]           ; fd[i]",
        "mov r2, r6",
        f"add r2, {lay['stat']}",
        "call fstat",
        "mov r1, r10",
        f"add r1, {frame}",
        f"mov r2, {STAT_SIZE}",
        "mov r3, r6",
        f"add r3, {lay['stat']}",
        "call copy_from_user",
        f"ldxdw r1, [r10{frame + STAT_SIZE_OFFSET:+d}]  ; s.st_size",
        "add r9, r1",
        "add r8, 1",
        "ja loop",
        "done:",
        "mov r1, r7",
        "call unmap",
        "mov r0, r9",
        "exit",
        "fail:",
        "mov r0, -1",
        "exit",
    ])


def disk_usage_program(max_files: int = 16) -> Program:
    return assemble(disk_usage_source(max_files), name="disk-usage")


# --------------------------------------------------------------------------
# getpid aggregation

def getpid_source(max_calls: int = 300) -> str:
    """Perform ``min(arg, max_calls)`` getpid kernel calls; returns the count."""
    return _join([
        "mov r7, r1",
        "mov r6, 0",
        "loop:",
        f"jge r6, {max_calls}, done",
        "jge r6, r7, done",
        "call getpid",
        "add r6, 1",
        "ja loop",
        "done:",
        "mov r0, r6",
        "exit",
    ])


def getpid_program(max_calls: int = 300) -> Program:
    return assemble(getpid_source(max_calls), name="getpid-aggregate")


# --------------------------------------------------------------------------
# Vector open / close

VECTOR_BLOCK = 0x10_0000           # arena offset of the vector argument block
VECTOR_DIR_OFFSET = 0              # zero-terminated directory path
VECTOR_FDS_OFFSET = 256            # u64 fd[max_files]


def vector_fd_array_addr() -> int:
    return ARENA_BASE + VECTOR_BLOCK + VECTOR_FDS_OFFSET


def vector_dir_addr() -> int:
    return ARENA_BASE + VECTOR_BLOCK + VECTOR_DIR_OFFSET


def _vector_loop(max_files: int, body: list[str]) -> list[str]:
    return [
        "mov r7, r1                 ; n",
        *load_address("r1", vector_fd_array_addr()),
        f"mov r2, {8 * max_files}",
        "call map",
        "jeq r0, 0, fail",
        "mov r6, r0                 ; fd array region",
        "mov r8, 0",
        "loop:",
        f"jge r8, {max_files}, done",
        "jge r8, r7, done",
        "mov r2, r8",
        "lsh r2, 3",
        "mov r9, r6",
        "add r9, r2                 ; &fd[i]",
        *body,
        "add r8, 1",
        "ja loop",
        "done:",
        "mov r1, r6",
        "call unmap",
        "mov r0, r8",
        "exit",
        "fail:",
        "mov r0, -1",
        "exit",
    ]


def vector_open_source(max_files: int = 300) -> str:
    """Create ``n`` unnamed temporary files, storing descriptors in the fd array."""
    return _join(_vector_loop(max_files, [
        *load_address("r1", vector_dir_addr()),
        f"mov r2, {O_TMPFILE | O_RDWR}",
        "call open",
        "stxdw [r9+0], r0",
    ]))


def vector_close_source(max_files: int = 300) -> str:
    """Close the first ``n`` descriptors of the fd array."""
    return _join(_vector_loop(max_files, [
        "ldxdw r1, [r9+0]",
        "call close",
    ]))


def vector_open_program(max_files: int = 300) -> Program:
    return assemble(vector_open_source(max_files), name="vector-open")


def vector_close_program(max_files: int = 300) -> Program:
    return assemble(vector_close_source(max_files), name="vector-close")


# --------------------------------------------------------------------------
# find-magic

MAGIC_BUF_LEN = 16                 # magic values up to this many bytes
PATH_CAP = 4096                    # path bytes per slot, terminator and newline included
SLOT_LEN_OFFSET = 0                # u64 path length (without terminator)
SLOT_STATUS_OFFSET = 8             # i64 result of open, written by the program
SLOT_BUF_OFFSET = 16               # magic read buffer
SLOT_PATH_OFFSET = SLOT_BUF_OFFSET + MAGIC_BUF_LEN
SLOT_SIZE = SLOT_PATH_OFFSET + PATH_CAP
FIND_MAGIC_BLOCK = 0x1000          # arena offset of slot 0
STATUS_UNTOUCHED = 1


def find_magic_slot_addr(index: int) -> int:
    return ARENA_BASE + FIND_MAGIC_BLOCK + index * SLOT_SIZE


def find_magic_source(chunk_size: int, magic: bytes, offset: int) -> str:
    """Check up to ``arg`` (at most ``chunk_size``) paths for ``magic`` at ``offset``.

    Slot ``i`` holds ``{u64 len; i64 status; u8 buf[16]; char path[4096]}``;
    a match is printed as ``path\\n`` on fd 1 by overwriting the terminator.
    """
    if not 0 < len(magic) <= MAGIC_BUF_LEN:
        raise ValueError(f"magic must be 1..{MAGIC_BUF_LEN} bytes")
    if not 0 <= offset < 1 << 31:
        raise ValueError("offset must fit in a 32-bit immediate")
    if chunk_size < 1:
        raise ValueError("chunk size must be >= 1")
    out = ["mov r7, r1                 ; number of paths in this chunk"]
    for i in range(chunk_size):
        slot = find_magic_slot_addr(i)
        skip, unmap, stop = f"skip{i}", f"unmap{i}", f"stop{i}"
        out += [
            f"jle r7, {i}, {stop}",
            *load_address("r1", slot),
            f"mov r2, {SLOT_SIZE}",
            "call map",
            "mov r8, r0",
            f"jeq r8, 0, {skip}",
            *load_address("r1", slot + SLOT_PATH_OFFSET),
            f"mov r2, {O_RDONLY}",
            "call open",
            f"stxdw [r8+{SLOT_STATUS_OFFSET}], r0",
            f"jslt r0, 0, {unmap}",
            "mov r9, r0",
            "mov r1, r9",
            f"mov r2, {offset}",
            "mov r3, 0",
            "call lseek",
            "mov r1, r9",
            "mov r2, r8",
            f"add r2, {SLOT_BUF_OFFSET}",
            f"mov r3, {len(magic)}",
            "call read",
            "stxdw [r10-8], r0",
            "mov r1, r9",
            "call close",
            "ldxdw r0, [r10-8]",
            f"jne r0, {len(magic)}, {unmap}",
        ]
        for j, byte in enumerate(magic):
            out += [f"ldxb r1, [r8+{SLOT_BUF_OFFSET + j}]", f"jne r1, {byte}, {unmap}"]
        out += [
            f"ldxdw r3, [r8+{SLOT_LEN_OFFSET}]",
            f"jgt r3, {PATH_CAP - 2}, {unmap}",
            "mov r2, r8",
            f"add r2, {SLOT_PATH_OFFSET}",
            "add r2, r3",
            "stb [r2+0], 10             ; newline over the terminator",
            "add r3, 1",
            "mov r1, 1",
            "mov r2, r8",
            f"add r2, {SLOT_PATH_OFFSET}",
            "call write",
            f"{unmap}:",
            "mov r1, r8",
            "call unmap",
            f"{skip}:",
            "mov r8, 0",
            "mov r9, 0",
            "mov r0, 0",
            "stdw [r10-8], 0",
            f"ja next{i}",
            # per-block exit keeps every jump within the 16-bit offset range
            f"{stop}:",
            "mov r0, 0",
            "exit",
            f"next{i}:",
        ]
    out += ["mov r0, 0", "exit"]
    return _join(out)


def find_magic_program(chunk_size: int, magic: bytes = b"#!/bin/sh", offset: int = 0) -> Program:
    return assemble(find_magic_source(chunk_size, magic, offset), name=f"find-magic-{chunk_size}")
