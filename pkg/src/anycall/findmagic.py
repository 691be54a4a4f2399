"""The find-magic tool: print every listed file that carries a magic value.

The file list arrives on standard input, one path per line, as produced by
a directory walker.  Four variants drive the same simulated kernel:

``anycall``
    paths are copied into an array of slots in user memory and checked by a
    generated program, one invocation per ``chunk_size`` paths.
``sys``
    open, lseek, read and close per file, each a full syscall; one write per
    match.
``sys-burst``
    the same syscalls issued phase by phase over a chunk (all opens, then
    all seeks, ...), with the chunk's matches written in one call.
``libc-style``
    stdio-like buffering: a 4096-byte read replaces lseek+read whenever the
    magic lies in the first buffer, and output is flushed in 4096-byte blocks.

Every variant reads standard input the same way and reports unreadable
files with the same warning line on standard error, so standard output and
standard error are byte-identical across variants; only the counters differ.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache

from .isa import Program
from .programs import (
    FIND_MAGIC_BLOCK, MAGIC_BUF_LEN, PATH_CAP, SLOT_LEN_OFFSET, SLOT_PATH_OFFSET,
    SLOT_SIZE, SLOT_STATUS_OFFSET, STATUS_UNTOUCHED, find_magic_program, find_magic_slot_addr,
)
from .syskernel import (
    ARENA_BASE, EACCES, ENAMETOOLONG, O_RDONLY, SEEK_SET, EventCounters, SimKernel,
    errno_name, traditional_syscall,
)
from .verifier import Limits, Verdict, verify
from .vm import invoke_anycall

VARIANTS = ("anycall", "sys-burst", "sys", "libc-style")
DEFAULT_MAGIC = b"#!/bin/sh"
DEFAULT_CHUNK = 512
IO_BLOCK = 4096

# Harness scratch memory, above the slot array.
SCRATCH = ARENA_BASE + 0xF0_0000
STDIN_BUF = SCRATCH
PATH_BUF = SCRATCH + IO_BLOCK
READ_BUF = SCRATCH + 2 * IO_BLOCK
OUT_BUF = SCRATCH + 4 * IO_BLOCK
BURST_BUF = SCRATCH + 5 * IO_BLOCK   # per-path read buffers for sys-burst


class FindMagicError(Exception):
    pass


class PathOutsideSandbox(FindMagicError):
    pass


class ChunkTooLarge(FindMagicError):
    def __init__(self, chunk_size: int, verdict: Verdict):
        rules = ", ".join(sorted(verdict.rules))
        super().__init__(
            f"the generated program for chunk size {chunk_size} is too large for the verifier "
            f"({rules}: {verdict.diagnostics[0].message}); lower --chunk-size")
        self.chunk_size = chunk_size
        self.verdict = verdict


@dataclass(frozen=True)
class FindMagicConfig:
    magic: bytes = DEFAULT_MAGIC
    offset: int = 0
    variant: str = "anycall"
    chunk_size: int = DEFAULT_CHUNK
    limits: Limits = field(default_factory=Limits)

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {', '.join(VARIANTS)}")
        if not 0 < len(self.magic) <= MAGIC_BUF_LEN:
            raise ValueError(f"magic must be 1..{MAGIC_BUF_LEN} bytes")
        if not 0 <= self.offset < 1 << 31:
            raise ValueError("offset must be in [0, 2**31)")
        if self.chunk_size < 1:
            raise ValueError("chunk size must be >= 1")
        if FIND_MAGIC_BLOCK + self.chunk_size * SLOT_SIZE > SCRATCH - ARENA_BASE:
            raise ValueError(f"chunk size {self.chunk_size} does not fit the user arena")


@dataclass
class FindMagicResult:
    stdout: bytes
    stderr: bytes
    counters: EventCounters
    files: int
    matches: int
    invocations: int


@lru_cache(maxsize=16)
def loaded_program(chunk_size: int, magic: bytes, offset: int, limits: Limits) -> Program:
    """Generate and verify the per-chunk program; raises :class:`ChunkTooLarge`."""
    program = find_magic_program(chunk_size, magic, offset)
    verdict = verify(program, limits)
    if not verdict.accepted:
        if "R8" in verdict.rules:
            raise ChunkTooLarge(chunk_size, verdict)
        raise FindMagicError(f"generated program rejected: {verdict.diagnostics[0]}")
    return program


def _sys(kernel: SimKernel, name: str, *args: int) -> int:
    return traditional_syscall(kernel, name, args)


def read_path_list(kernel: SimKernel) -> list[bytes]:
    """Drain fd 0 with ordinary reads and split it into non-empty lines."""
    data = bytearray()
    while True:
        n = _sys(kernel, "read", 0, STDIN_BUF, IO_BLOCK)
        if n <= 0:
            break
        data += kernel.arena.read(STDIN_BUF, n)
    return [line for line in bytes(data).split(b"\n") if line]


def _check_paths(kernel: SimKernel, paths: list[bytes]) -> None:
    for path in paths:
        if len(path) > PATH_CAP - 2:
            continue
        if b"\0" in path:
            raise FindMagicError(f"path contains a NUL byte: {path!r}")
        host = kernel.resolve(path)
        if isinstance(host, int) and host == -EACCES:
            raise PathOutsideSandbox(f"path outside the sandbox: {os.fsdecode(path)}")


def _warn(kernel: SimKernel, path: bytes, code: int) -> None:
    line = b"find-magic: " + path + b": " + errno_name(code).encode() + b"\n"
    kernel.arena.write(OUT_BUF, line)
    _sys(kernel, "write", 2, OUT_BUF, len(line))


def _write_out(kernel: SimKernel, data: bytes) -> None:
    for start in range(0, len(data), IO_BLOCK):
        block = data[start:start + IO_BLOCK]
        kernel.arena.write(OUT_BUF, block)
        _sys(kernel, "write", 1, OUT_BUF, len(block))


def _too_long(path: bytes) -> bool:
    return len(path) > PATH_CAP - 2


def _put_path(kernel: SimKernel, path: bytes) -> int:
    kernel.arena.write(PATH_BUF, path + b"\0")
    return PATH_BUF


def _open(kernel: SimKernel, path: bytes) -> int:
    return _sys(kernel, "open", _put_path(kernel, path), O_RDONLY)


def _run_sys(kernel: SimKernel, paths: list[bytes], cfg: FindMagicConfig) -> int:
    n = len(cfg.magic)
    matches = 0
    for path in paths:
        if _too_long(path):
            _warn(kernel, path, -ENAMETOOLONG)
            continue
        fd = _open(kernel, path)
        if fd < 0:
            _warn(kernel, path, fd)
            continue
        _sys(kernel, "lseek", fd, cfg.offset, SEEK_SET)
        got = _sys(kernel, "read", fd, READ_BUF, n)
        _sys(kernel, "close", fd)
        if got == n and kernel.arena.read(READ_BUF, n) == cfg.magic:
            _write_out(kernel, path + b"\n")
            matches += 1
    return matches


def _run_sys_burst(kernel: SimKernel, paths: list[bytes], cfg: FindMagicConfig) -> int:
    n = len(cfg.magic)
    matches = 0
    for start in range(0, len(paths), cfg.chunk_size):
        chunk = paths[start:start + cfg.chunk_size]
        fds = []
        for path in chunk:
            fd = -ENAMETOOLONG if _too_long(path) else _open(kernel, path)
            fds.append(fd)
        for fd in fds:
            if fd >= 0:
                _sys(kernel, "lseek", fd, cfg.offset, SEEK_SET)
        got = [_sys(kernel, "read", fd, BURST_BUF + i * MAGIC_BUF_LEN, n) if fd >= 0 else fd
               for i, fd in enumerate(fds)]
        for fd in fds:
            if fd >= 0:
                _sys(kernel, "close", fd)
        out = bytearray()
        for i, (path, fd) in enumerate(zip(chunk, fds)):
            if fd < 0:
                _warn(kernel, path, fd)
            elif got[i] == n and kernel.arena.read(BURST_BUF + i * MAGIC_BUF_LEN, n) == cfg.magic:
                out += path + b"\n"
                matches += 1
        if out:
            _write_out(kernel, bytes(out))
    return matches


def _run_libc(kernel: SimKernel, paths: list[bytes], cfg: FindMagicConfig) -> int:
    n = len(cfg.magic)
    matches = 0
    pending = bytearray()
    for path in paths:
        if _too_long(path):
            _warn(kernel, path, -ENAMETOOLONG)
            continue
        fd = _open(kernel, path)
        if fd < 0:
            _warn(kernel, path, fd)
            continue
        # fseek within the first buffer costs nothing; otherwise seek to the block
        base = cfg.offset - cfg.offset % IO_BLOCK
        if cfg.offset + n > IO_BLOCK:
            _sys(kernel, "lseek", fd, base, SEEK_SET)
        else:
            base = 0
        got = _sys(kernel, "read", fd, READ_BUF, IO_BLOCK)
        start = cfg.offset - base
        if start + n > IO_BLOCK:
            # value straddles a block boundary: one more buffered read
            extra = _sys(kernel, "read", fd, READ_BUF + IO_BLOCK, IO_BLOCK) if got == IO_BLOCK else 0
            got += max(extra, 0)
        _sys(kernel, "close", fd)
        if got >= start + n and kernel.arena.read(READ_BUF + start, n) == cfg.magic:
            pending += path + b"\n"
            matches += 1
            if len(pending) >= IO_BLOCK:
                full = len(pending) - len(pending) % IO_BLOCK
                _write_out(kernel, bytes(pending[:full]))
                del pending[:full]
    if pending:
        _write_out(kernel, bytes(pending))
    return matches


def _run_anycall(kernel: SimKernel, paths: list[bytes], cfg: FindMagicConfig) -> tuple[int, int]:
    program = loaded_program(cfg.chunk_size, cfg.magic, cfg.offset, cfg.limits)
    before = len(kernel.stdout)
    invocations = 0
    for start in range(0, len(paths), cfg.chunk_size):
        chunk = paths[start:start + cfg.chunk_size]
        # overlong paths never reach the program; the order of output is unaffected
        batch = [p for p in chunk if not _too_long(p)]
        for i, path in enumerate(batch):
            slot = find_magic_slot_addr(i)
            kernel.arena.write(slot + SLOT_LEN_OFFSET, len(path).to_bytes(8, "little"))
            kernel.arena.write(slot + SLOT_STATUS_OFFSET, STATUS_UNTOUCHED.to_bytes(8, "little"))
            kernel.arena.write(slot + SLOT_PATH_OFFSET, path + b"\0")
        if batch:
            result = invoke_anycall(program, len(batch), kernel)
            invocations += 1
            if result.fault is not None:
                raise FindMagicError(f"program faulted: {result.fault}")
        statuses = iter(
            int.from_bytes(kernel.arena.read(find_magic_slot_addr(i) + SLOT_STATUS_OFFSET, 8),
                           "little", signed=True)
            for i in range(len(batch)))
        for path in chunk:
            code = -ENAMETOOLONG if _too_long(path) else next(statuses)
            if code < 0:
                _warn(kernel, path, code)
    matches = kernel.stdout[before:].count(b"\n")
    return matches, invocations


def find_magic(kernel: SimKernel, config: FindMagicConfig | None = None) -> FindMagicResult:
    """Run one variant against ``kernel``, whose stdin holds the path list."""
    cfg = config or FindMagicConfig()
    if cfg.variant == "anycall":
        loaded_program(cfg.chunk_size, cfg.magic, cfg.offset, cfg.limits)
    paths = read_path_list(kernel)
    _check_paths(kernel, paths)
    invocations = 0
    if cfg.variant == "anycall":
        matches, invocations = _run_anycall(kernel, paths, cfg)
    elif cfg.variant == "sys":
        matches = _run_sys(kernel, paths, cfg)
    elif cfg.variant == "sys-burst":
        matches = _run_sys_burst(kernel, paths, cfg)
    else:
        matches = _run_libc(kernel, paths, cfg)
    return FindMagicResult(bytes(kernel.stdout), bytes(kernel.stderr), kernel.counters.copy(),
                           len(paths), matches, invocations)


def run_variant(sandbox: str | os.PathLike, listing: bytes, config: FindMagicConfig) -> FindMagicResult:
    """Fresh kernel over ``sandbox`` with ``listing`` as standard input."""
    with SimKernel(sandbox, stdin=listing) as kernel:
        return find_magic(kernel, config)


def walk(root: str | os.PathLike) -> list[str]:
    """Sandbox-relative paths of every entry below ``root``, in sorted walk order."""
    out = []
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames.sort()
        for name in sorted(filenames):
            out.append(os.path.relpath(os.path.join(dirpath, name), root))
    return out
