"""Simulated kernel: helper table, sandboxed syscalls, user arena and event accounting.

Every syscall body lives on :class:`SimKernel` and takes user addresses for
its buffer arguments.  The two entry paths differ only in accounting:

* :meth:`SimKernel.kcall` is what a running program uses; it counts one
  kernel call and no transition.
* :func:`traditional_syscall` brackets the same body with a user->kernel
  and a kernel->user transition (and therefore one iTLB flush).
"""
from __future__ import annotations

import errno as _host_errno
import os
import stat as _stat
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

# Linux errno values; results are negative errno codes.
EPERM = 1
ENOENT = 2
EBADF = 9
EACCES = 13
EFAULT = 14
EEXIST = 17
ENOTDIR = 20
EISDIR = 21
EINVAL = 22
EMFILE = 24
ESPIPE = 29
ENAMETOOLONG = 36

ERRNO_NAMES = {
    EPERM: "EPERM", ENOENT: "ENOENT", EBADF: "EBADF", EACCES: "EACCES",
    EFAULT: "EFAULT", EEXIST: "EEXIST", ENOTDIR: "ENOTDIR", EISDIR: "EISDIR",
    EINVAL: "EINVAL", EMFILE: "EMFILE", ESPIPE: "ESPIPE",
    ENAMETOOLONG: "ENAMETOOLONG",
}

# open(2) flags, Linux x86-64 values.
O_RDONLY = 0
O_WRONLY = 1
O_RDWR = 2
O_ACCMODE = 3
O_CREAT = 0o100
O_EXCL = 0o200
O_TRUNC = 0o1000
O_APPEND = 0o2000
O_DIRECTORY = 0o200000
O_TMPFILE = 0o20000000 | O_DIRECTORY
_KNOWN_FLAGS = O_ACCMODE | O_CREAT | O_EXCL | O_TRUNC | O_APPEND | O_TMPFILE

AT_FDCWD = -100
SEEK_SET, SEEK_CUR, SEEK_END = 0, 1, 2

PATH_MAX = 4096
MAX_OPEN_FILES = 1024

ARENA_BASE = 0x0000_7000_0000_0000
DEFAULT_ARENA_SIZE = 16 * 1024 * 1024
MAX_ARENA_SIZE = 1 << 32

# Region handles as seen by programs: tag | id << 32 | byte offset.
REGION_TAG = 0xA
REGION_ID_MASK = (1 << 28) - 1

STAT_SIZE = 144
STAT_SIZE_OFFSET = 48
# dev, ino, nlink, mode, uid, gid, pad, rdev, size, blksize, blocks, 9 x i64 (times + reserved)
_STAT_STRUCT = struct.Struct("<QQQIIIIQqqq9q")
assert _STAT_STRUCT.size == STAT_SIZE

DEFAULT_PID = 4242
TMPFILE_DIR = ".anycall-tmp"


def region_pointer(region_id: int, offset: int = 0) -> int:
    return (REGION_TAG << 60) | (region_id << 32) | offset


def split_region_pointer(value: int) -> tuple[int, int] | None:
    """Return ``(region_id, offset)`` for a region pointer, else ``None``."""
    if value >> 60 != REGION_TAG:
        return None
    return (value >> 32) & REGION_ID_MASK, value & 0xFFFF_FFFF


# --------------------------------------------------------------------------
# Helper table

ARG_SCALAR = "scalar"
ARG_USER_ADDR = "user_address"
ARG_CONST_SIZE = "const_size"
ARG_SIZE = "size"
ARG_MEM = "mem"                # stack or live region, sized by another arg
ARG_REGION_MEM = "region_mem"  # live region only, sized by another arg
ARG_REGION = "region"          # handle of a live region

RET_SCALAR = "scalar"
RET_MAYBE_NULL_REGION = "maybe_null_region"


class HelperArg(NamedTuple):
    name: str
    kind: str
    size_arg: int | None = None   # index of the argument giving the buffer size
    access: str | None = None     # "r" or "w" for buffer arguments
    min_value: int = 0            # lower bound for size arguments


@dataclass(frozen=True)
class HelperSpec:
    name: str
    id: int
    args: tuple[HelperArg, ...]
    ret: str
    category: str  # "kcall" or "memory"


HELPERS: tuple[HelperSpec, ...] = (
    HelperSpec("getpid", 1, (), RET_SCALAR, "kcall"),
    HelperSpec("open", 2, (HelperArg("path", ARG_USER_ADDR),
                           HelperArg("flags", ARG_SCALAR)), RET_SCALAR, "kcall"),
    HelperSpec("openat", 3, (HelperArg("dirfd", ARG_SCALAR),
                             HelperArg("path", ARG_USER_ADDR),
                             HelperArg("flags", ARG_SCALAR)), RET_SCALAR, "kcall"),
    HelperSpec("close", 4, (HelperArg("fd", ARG_SCALAR),), RET_SCALAR, "kcall"),
    HelperSpec("lseek", 5, (HelperArg("fd", ARG_SCALAR),
                            HelperArg("offset", ARG_SCALAR),
                            HelperArg("whence", ARG_SCALAR)), RET_SCALAR, "kcall"),
    HelperSpec("read", 6, (HelperArg("fd", ARG_SCALAR),
                           HelperArg("buf", ARG_REGION_MEM, size_arg=2, access="w"),
                           HelperArg("count", ARG_SIZE)), RET_SCALAR, "kcall"),
    HelperSpec("write", 7, (HelperArg("fd", ARG_SCALAR),
                            HelperArg("buf", ARG_REGION_MEM, size_arg=2, access="r"),
                            HelperArg("count", ARG_SIZE)), RET_SCALAR, "kcall"),
    HelperSpec("fstat", 8, (HelperArg("fd", ARG_SCALAR),
                            HelperArg("statbuf", ARG_USER_ADDR)), RET_SCALAR, "kcall"),
    HelperSpec("map", 9, (HelperArg("addr", ARG_USER_ADDR),
                          HelperArg("size", ARG_CONST_SIZE, min_value=1)),
               RET_MAYBE_NULL_REGION, "memory"),
    HelperSpec("unmap", 10, (HelperArg("region", ARG_REGION),), RET_SCALAR, "memory"),
    HelperSpec("copy_from_user", 11, (HelperArg("dst", ARG_MEM, size_arg=1, access="w"),
                                      HelperArg("size", ARG_CONST_SIZE),
                                      HelperArg("src", ARG_USER_ADDR)), RET_SCALAR, "memory"),
    HelperSpec("copy_to_user", 12, (HelperArg("dst", ARG_USER_ADDR),
                                    HelperArg("size", ARG_CONST_SIZE),
                                    HelperArg("src", ARG_MEM, size_arg=1, access="r")),
               RET_SCALAR, "memory"),
)

HELPERS_BY_NAME = {h.name: h for h in HELPERS}
HELPERS_BY_ID = {h.id: h for h in HELPERS}
SYSCALL_NAMES = tuple(h.name for h in HELPERS if h.category == "kcall")


def helper_table() -> tuple[HelperSpec, ...]:
    return HELPERS


def lookup(name: str) -> HelperSpec | None:
    return HELPERS_BY_NAME.get(name)


# --------------------------------------------------------------------------
# State


class UserArena:
    """Contiguous simulated user memory plus the set of pinned windows."""

    def __init__(self, size: int = DEFAULT_ARENA_SIZE, base: int = ARENA_BASE):
        if not 0 < size <= MAX_ARENA_SIZE:
            raise ValueError(f"arena size must be in (0, {MAX_ARENA_SIZE}]")
        self.base = base
        self.size = size
        self.bytes = bytearray(size)
        self.pinned: dict[int, tuple[int, int]] = {}  # id -> (offset, size)
        self._next_region = 1

    def contains(self, addr: int, length: int) -> bool:
        return length >= 0 and self.base <= addr and addr + length <= self.base + self.size

    def offset(self, addr: int) -> int:
        return addr - self.base

    def read(self, addr: int, length: int) -> bytes:
        if not self.contains(addr, length):
            raise IndexError("arena read out of bounds")
        off = addr - self.base
        return bytes(self.bytes[off:off + length])

    def write(self, addr: int, data: bytes) -> None:
        if not self.contains(addr, len(data)):
            raise IndexError("arena write out of bounds")
        off = addr - self.base
        self.bytes[off:off + len(data)] = data

    def read_cstring(self, addr: int) -> bytes | int:
        """Zero-terminated string at ``addr`` or a negative errno."""
        if not self.contains(addr, 1):
            return -EFAULT
        off = addr - self.base
        end = self.bytes.find(0, off, min(off + PATH_MAX, self.size))
        if end < 0:
            return -ENAMETOOLONG if off + PATH_MAX <= self.size else -EFAULT
        return bytes(self.bytes[off:end])

    def pin(self, addr: int, size: int) -> int:
        """Pin ``[addr, addr+size)``; returns a fresh region id or 0."""
        if size <= 0 or not self.contains(addr, size):
            return 0
        off = addr - self.base
        for other_off, other_size in self.pinned.values():
            if off < other_off + other_size and other_off < off + size:
                return 0
        if self._next_region > REGION_ID_MASK:
            return 0
        region_id = self._next_region
        self._next_region += 1
        self.pinned[region_id] = (off, size)
        return region_id

    def unpin(self, region_id: int) -> bool:
        return self.pinned.pop(region_id, None) is not None


@dataclass
class OpenFile:
    path: str              # sandbox-relative, or "<stdin>" etc.
    mode: int              # O_ACCMODE bits
    cursor: int = 0
    host_fd: int | None = None
    append: bool = False
    kind: str = "file"     # "file", "stdin", "stdout", "stderr"


class FdTable:
    def __init__(self) -> None:
        self.entries: dict[int, OpenFile] = {}

    @property
    def next_fd(self) -> int:
        fd = 0
        while fd in self.entries:
            fd += 1
        return fd

    def allocate(self, record: OpenFile) -> int:
        fd = self.next_fd
        if fd >= MAX_OPEN_FILES:
            return -EMFILE
        self.entries[fd] = record
        return fd

    def get(self, fd: int) -> OpenFile | None:
        return self.entries.get(fd)

    def remove(self, fd: int) -> OpenFile | None:
        return self.entries.pop(fd, None)


@dataclass
class EventCounters:
    user_kernel_transitions: int = 0   # both directions
    user_to_kernel: int = 0
    kernel_to_user: int = 0
    anycall_invocations: int = 0
    itlb_flushes: int = 0
    kernel_calls: Counter = field(default_factory=Counter)
    syscall_work: Counter = field(default_factory=Counter)

    @property
    def total_kernel_calls(self) -> int:
        return sum(self.kernel_calls.values())

    def as_record(self) -> dict[str, int]:
        rec = {
            "user_kernel_transitions": self.user_kernel_transitions,
            "user_to_kernel": self.user_to_kernel,
            "kernel_to_user": self.kernel_to_user,
            "anycall_invocations": self.anycall_invocations,
            "itlb_flushes": self.itlb_flushes,
        }
        for name in sorted(self.kernel_calls):
            rec[f"kernel_calls.{name}"] = self.kernel_calls[name]
        for name in sorted(self.syscall_work):
            rec[f"syscall_work.{name}"] = self.syscall_work[name]
        return rec

    def copy(self) -> "EventCounters":
        return EventCounters(
            self.user_kernel_transitions, self.user_to_kernel, self.kernel_to_user,
            self.anycall_invocations, self.itlb_flushes,
            Counter(self.kernel_calls), Counter(self.syscall_work))

    def __add__(self, other: "EventCounters") -> "EventCounters":
        return EventCounters(
            self.user_kernel_transitions + other.user_kernel_transitions,
            self.user_to_kernel + other.user_to_kernel,
            self.kernel_to_user + other.kernel_to_user,
            self.anycall_invocations + other.anycall_invocations,
            self.itlb_flushes + other.itlb_flushes,
            self.kernel_calls + other.kernel_calls,
            self.syscall_work + other.syscall_work)

    def __sub__(self, other: "EventCounters") -> "EventCounters":
        kc = Counter(self.kernel_calls)
        kc.subtract(other.kernel_calls)
        sw = Counter(self.syscall_work)
        sw.subtract(other.syscall_work)
        return EventCounters(
            self.user_kernel_transitions - other.user_kernel_transitions,
            self.user_to_kernel - other.user_to_kernel,
            self.kernel_to_user - other.kernel_to_user,
            self.anycall_invocations - other.anycall_invocations,
            self.itlb_flushes - other.itlb_flushes,
            +kc, +sw)


@dataclass(frozen=True)
class TraceEvent:
    seq: int
    kind: str        # user_to_kernel, kernel_to_user, kcall, map, unmap
    helper_id: int   # 0 for transitions
    payload: str = ""

    def as_record(self) -> dict:
        return {"seq": self.seq, "kind": self.kind, "helper_id": self.helper_id,
                "payload": self.payload}


class SandboxError(Exception):
    pass


_HOST_ERRNO = {
    _host_errno.ENOENT: ENOENT, _host_errno.EACCES: EACCES, _host_errno.EPERM: EACCES,
    _host_errno.EISDIR: EISDIR, _host_errno.ENOTDIR: ENOTDIR, _host_errno.EEXIST: EEXIST,
    _host_errno.EBADF: EBADF, _host_errno.EMFILE: EMFILE, _host_errno.ENFILE: EMFILE,
    _host_errno.ENAMETOOLONG: ENAMETOOLONG, _host_errno.ELOOP: EACCES,
}


def _from_oserror(exc: OSError) -> int:
    return -_HOST_ERRNO.get(exc.errno, EINVAL)


class SimKernel:
    """Single-client simulated kernel.

    ``sandbox`` is the host directory all paths resolve under; without one,
    every filesystem call fails with ``-ENOENT``.
    """

    def __init__(self, sandbox: str | os.PathLike | None = None, *,
                 arena_size: int = DEFAULT_ARENA_SIZE, pid: int = DEFAULT_PID,
                 stdin: bytes = b"", trace: bool = False):
        self.root = os.path.realpath(sandbox) if sandbox is not None else None
        if self.root is not None and not os.path.isdir(self.root):
            raise SandboxError(f"sandbox root {sandbox!r} is not a directory")
        self.arena = UserArena(arena_size)
        self.fds = FdTable()
        self.counters = EventCounters()
        self.pid = pid
        self.stdin = bytes(stdin)
        self.stdout = bytearray()
        self.stderr = bytearray()
        self.trace: list[TraceEvent] | None = [] if trace else None
        self._seq = 0
        self._tmp_serial = 0
        self.fds.entries[0] = OpenFile("<stdin>", O_RDONLY, kind="stdin")
        self.fds.entries[1] = OpenFile("<stdout>", O_WRONLY, kind="stdout")
        self.fds.entries[2] = OpenFile("<stderr>", O_WRONLY, kind="stderr")
        self._syscalls: dict[str, Callable[..., int]] = {
            "getpid": self.sys_getpid, "open": self.sys_open, "openat": self.sys_openat,
            "close": self.sys_close, "lseek": self.sys_lseek, "read": self.sys_read,
            "write": self.sys_write, "fstat": self.sys_fstat,
        }

    # -- lifecycle

    def close(self) -> None:
        for rec in self.fds.entries.values():
            if rec.host_fd is not None:
                os.close(rec.host_fd)
                rec.host_fd = None
        self.fds.entries.clear()

    def __enter__(self) -> "SimKernel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- accounting

    def _emit(self, kind: str, helper_id: int = 0, payload: str = "") -> None:
        if self.trace is not None:
            self.trace.append(TraceEvent(self._seq, kind, helper_id, payload))
            self._seq += 1

    def enter(self, payload: str = "") -> None:
        """Charge one user->kernel transition; each entry flushes the iTLB once."""
        c = self.counters
        c.user_kernel_transitions += 1
        c.user_to_kernel += 1
        c.itlb_flushes += 1
        self._emit("user_to_kernel", 0, payload)

    def leave(self, payload: str = "") -> None:
        c = self.counters
        c.user_kernel_transitions += 1
        c.kernel_to_user += 1
        self._emit("kernel_to_user", 0, payload)

    def note_helper(self, name: str, payload: str = "") -> None:
        spec = HELPERS_BY_NAME[name]
        self.counters.kernel_calls[name] += 1
        kind = name if name in ("map", "unmap") else "kcall"
        self._emit(kind, spec.id, payload)

    def dispatch(self, name: str, *args: int) -> int:
        try:
            impl = self._syscalls[name]
        except KeyError:
            raise ValueError(f"unknown syscall {name!r}") from None
        self.counters.syscall_work[name] += 1
        return impl(*args)

    def kcall(self, name: str, *args: int) -> int:
        """Kernel-call entry: syscall body with no mode switch."""
        result = self.dispatch(name, *args)
        self.note_helper(name, str(result))
        return result

    # -- sandbox paths

    def resolve(self, path: bytes) -> str | int:
        """Host path for a sandbox path, or a negative errno."""
        if self.root is None:
            return -ENOENT
        if not path:
            return -ENOENT
        if len(path) >= PATH_MAX:
            return -ENAMETOOLONG
        text = os.fsdecode(path)
        parts: list[str] = []
        for comp in text.split("/"):
            if comp in ("", "."):
                continue
            if comp == "..":
                if not parts:
                    return -EACCES
                parts.pop()
            else:
                parts.append(comp)
        host = os.path.join(self.root, *parts)
        real = os.path.realpath(host)
        if real != self.root and not real.startswith(self.root + os.sep):
            return -EACCES
        return real

    def relpath(self, host: str) -> str:
        return os.path.relpath(host, self.root) if self.root else host

    # -- syscalls (buffers are user addresses)

    def sys_getpid(self) -> int:
        return self.pid

    def sys_open(self, path_addr: int, flags: int) -> int:
        return self.sys_openat(AT_FDCWD, path_addr, flags)

    def sys_openat(self, dirfd: int, path_addr: int, flags: int) -> int:
        if dirfd != AT_FDCWD:
            # directory file descriptors are not modeled
            return -EBADF if self.fds.get(dirfd) is None else -ENOTDIR
        path = self.arena.read_cstring(path_addr)
        if isinstance(path, int):
            return path
        if flags & ~_KNOWN_FLAGS or flags & O_ACCMODE == O_ACCMODE:
            return -EINVAL
        host = self.resolve(path)
        if isinstance(host, int):
            return host
        acc = flags & O_ACCMODE
        if flags & O_TMPFILE == O_TMPFILE:
            return self._open_tmpfile(host, acc)
        host_flags = {O_RDONLY: os.O_RDONLY, O_WRONLY: os.O_WRONLY, O_RDWR: os.O_RDWR}[acc]
        if flags & O_CREAT:
            host_flags |= os.O_CREAT
        if flags & O_EXCL:
            host_flags |= os.O_EXCL
        if flags & O_TRUNC:
            host_flags |= os.O_TRUNC
        if os.path.isdir(host):
            if flags & O_DIRECTORY:
                return -EINVAL  # directory fds are not modeled
            return -EISDIR
        if flags & O_DIRECTORY:
            return -ENOTDIR if os.path.exists(host) else -ENOENT
        try:
            host_fd = os.open(host, host_flags, 0o644)
        except OSError as exc:
            return _from_oserror(exc)
        rec = OpenFile(self.relpath(host), acc, host_fd=host_fd, append=bool(flags & O_APPEND))
        fd = self.fds.allocate(rec)
        if fd < 0:
            os.close(host_fd)
        return fd

    def _open_tmpfile(self, host_dir: str, acc: int) -> int:
        # Unnamed temporary file: auto-named under a temp subdirectory, unlinked at once.
        if acc == O_RDONLY:
            return -EINVAL
        if not os.path.isdir(host_dir):
            return -ENOTDIR if os.path.exists(host_dir) else -ENOENT
        tmp_dir = os.path.join(host_dir, TMPFILE_DIR)
        os.makedirs(tmp_dir, exist_ok=True)
        self._tmp_serial += 1
        name = os.path.join(tmp_dir, f"anon-{self.pid}-{self._tmp_serial}")
        try:
            host_fd = os.open(name, os.O_RDWR | os.O_CREAT | os.O_EXCL, 0o600)
        except OSError as exc:
            return _from_oserror(exc)
        os.unlink(name)
        fd = self.fds.allocate(OpenFile(self.relpath(name), acc, host_fd=host_fd))
        if fd < 0:
            os.close(host_fd)
        return fd

    def sys_close(self, fd: int) -> int:
        rec = self.fds.remove(fd)
        if rec is None:
            return -EBADF
        if rec.host_fd is not None:
            os.close(rec.host_fd)
        return 0

    def _size(self, rec: OpenFile) -> int:
        if rec.kind == "file":
            return os.fstat(rec.host_fd).st_size
        return len(self.stdin) if rec.kind == "stdin" else 0

    def sys_lseek(self, fd: int, offset: int, whence: int) -> int:
        rec = self.fds.get(fd)
        if rec is None:
            return -EBADF
        if rec.kind != "file":
            return -ESPIPE
        if whence == SEEK_SET:
            pos = offset
        elif whence == SEEK_CUR:
            pos = rec.cursor + offset
        elif whence == SEEK_END:
            pos = self._size(rec) + offset
        else:
            return -EINVAL
        if pos < 0:
            return -EINVAL
        rec.cursor = pos
        return pos

    def sys_read(self, fd: int, buf_addr: int, count: int) -> int:
        rec = self.fds.get(fd)
        if rec is None or rec.mode == O_WRONLY:
            return -EBADF
        if count < 0:
            return -EINVAL
        if not self.arena.contains(buf_addr, count):
            return -EFAULT
        if rec.kind == "stdin":
            data = self.stdin[rec.cursor:rec.cursor + count]
        else:
            try:
                data = os.pread(rec.host_fd, count, rec.cursor)
            except OSError as exc:
                return _from_oserror(exc)
        self.arena.write(buf_addr, data)
        rec.cursor += len(data)
        return len(data)

    def sys_write(self, fd: int, buf_addr: int, count: int) -> int:
        rec = self.fds.get(fd)
        if rec is None or rec.mode == O_RDONLY:
            return -EBADF
        if count < 0:
            return -EINVAL
        if not self.arena.contains(buf_addr, count):
            return -EFAULT
        data = self.arena.read(buf_addr, count)
        if rec.kind == "stdout":
            self.stdout += data
            return count
        if rec.kind == "stderr":
            self.stderr += data
            return count
        if rec.append:
            rec.cursor = self._size(rec)
        try:
            written = os.pwrite(rec.host_fd, data, rec.cursor)
        except OSError as exc:
            return _from_oserror(exc)
        rec.cursor += written
        return written

    def sys_fstat(self, fd: int, stat_addr: int) -> int:
        rec = self.fds.get(fd)
        if rec is None:
            return -EBADF
        if not self.arena.contains(stat_addr, STAT_SIZE):
            return -EFAULT
        if rec.kind == "file":
            st = os.fstat(rec.host_fd)
            mode = _stat.S_IFREG | _stat.S_IMODE(st.st_mode)
            size = st.st_size
        else:
            mode, size = _stat.S_IFCHR | 0o620, 0
        record = _STAT_STRUCT.pack(0, 0, 1, mode, 0, 0, 0, 0, size, 4096,
                                   (size + 511) // 512, *([0] * 9))
        self.arena.write(stat_addr, record)
        return 0

    # -- memory helpers

    def map(self, user_addr: int, size: int) -> int:
        """Pin a user window; returns a region pointer or 0 (null)."""
        region_id = self.arena.pin(user_addr, size)
        self.note_helper("map", str(region_id))
        return region_pointer(region_id) if region_id else 0

    def unmap(self, region_id: int) -> bool:
        ok = self.arena.unpin(region_id)
        self.note_helper("unmap", str(region_id))
        return ok

    def copy_from_user(self, dst: bytearray, dst_index: int, size: int, user_addr: int) -> int:
        self.note_helper("copy_from_user")
        if not self.arena.contains(user_addr, size):
            return -EFAULT
        off = user_addr - self.arena.base
        dst[dst_index:dst_index + size] = self.arena.bytes[off:off + size]
        return 0

    def copy_to_user(self, user_addr: int, size: int, src: bytearray | bytes, src_index: int) -> int:
        self.note_helper("copy_to_user")
        if not self.arena.contains(user_addr, size):
            return -EFAULT
        off = user_addr - self.arena.base
        self.arena.bytes[off:off + size] = src[src_index:src_index + size]
        return 0

    # -- introspection used by tests and the harness

    def stat_size(self, stat_addr: int) -> int:
        return int.from_bytes(self.arena.read(stat_addr + STAT_SIZE_OFFSET, 8), "little", signed=True)


def traditional_syscall(kernel: SimKernel, name: str, args: tuple[int, ...] | list[int] = ()) -> int:
    """Baseline path: one full user->kernel->user round trip per call."""
    if name not in kernel._syscalls:
        raise ValueError(f"unknown syscall {name!r}")
    kernel.enter(name)
    try:
        return kernel.dispatch(name, *args)
    finally:
        kernel.leave(name)


def errno_name(code: int) -> str:
    return ERRNO_NAMES.get(-code, str(code))
