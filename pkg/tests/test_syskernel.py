import os
import struct

import pytest
from hypothesis import given, settings, strategies as st

from anycall.syskernel import (
    ARENA_BASE, EACCES, EBADF, EFAULT, EISDIR, ENAMETOOLONG, ENOENT, ESPIPE, O_CREAT, O_RDONLY,
    O_RDWR, O_TMPFILE, O_WRONLY, PATH_MAX, SEEK_END, STAT_SIZE, STAT_SIZE_OFFSET, SandboxError,
    SimKernel, errno_name, helper_table, lookup, traditional_syscall,
)

PATH = ARENA_BASE + 0x100
BUF = ARENA_BASE + 0x2000


def put(kernel, path: bytes) -> int:
    kernel.arena.write(PATH, path + b"\0")
    return PATH


def test_helper_ids_are_stable():
    assert [(h.name, h.id) for h in helper_table()] == [
        ("getpid", 1), ("open", 2), ("openat", 3), ("close", 4), ("lseek", 5), ("read", 6),
        ("write", 7), ("fstat", 8), ("map", 9), ("unmap", 10), ("copy_from_user", 11),
        ("copy_to_user", 12)]
    assert lookup("map").category == "memory"
    assert lookup("nope") is None


def test_missing_sandbox_root(tmp_path):
    with pytest.raises(SandboxError):
        SimKernel(tmp_path / "absent")


def test_no_sandbox_means_enoent():
    k = SimKernel()
    assert k.kcall("open", put(k, b"x"), O_RDONLY) == -ENOENT


@pytest.mark.parametrize("path,code", [
    (b"../etc/passwd", -EACCES),
    (b"a/../../x", -EACCES),
    (b"missing", -ENOENT),
    (b"dir", -EISDIR),
    (b"", -ENOENT),
])
def test_open_errors(sandbox, path, code):
    (sandbox / "dir").mkdir()
    k = SimKernel(sandbox)
    assert k.kcall("open", put(k, path), O_RDONLY) == code


def test_symlink_escape_denied(sandbox, tmp_path):
    outside = tmp_path / "secret"
    outside.write_text("x")
    os.symlink(outside, sandbox / "link")
    k = SimKernel(sandbox)
    assert k.kcall("open", put(k, b"link"), O_RDONLY) == -EACCES


def test_path_too_long(sandbox):
    k = SimKernel(sandbox)
    assert k.kcall("open", put(k, b"a" * PATH_MAX), O_RDONLY) == -ENAMETOOLONG


def test_absolute_paths_are_rooted(sandbox):
    (sandbox / "f").write_bytes(b"hi")
    k = SimKernel(sandbox)
    assert k.kcall("open", put(k, b"/f"), O_RDONLY) == 3


def test_read_write_lseek_fstat(sandbox):
    k = SimKernel(sandbox)
    fd = k.kcall("open", put(k, b"new"), O_RDWR | O_CREAT)
    assert fd == 3
    k.arena.write(BUF, b"hello world")
    assert k.kcall("write", fd, BUF, 11) == 11
    assert k.kcall("lseek", fd, 6, 0) == 6
    assert k.kcall("read", fd, BUF + 100, 64) == 5
    assert k.arena.read(BUF + 100, 5) == b"world"
    assert k.kcall("lseek", fd, -1, SEEK_END) == 10
    assert k.kcall("fstat", fd, BUF) == 0
    assert k.stat_size(BUF) == 11
    record = struct.unpack("<QQQIIIIQqqq9q", k.arena.read(BUF, STAT_SIZE))
    assert record[8] == 11 and record[9] == 4096 and STAT_SIZE_OFFSET == 48
    assert k.kcall("close", fd) == 0
    assert k.kcall("close", fd) == -EBADF
    assert (sandbox / "new").read_bytes() == b"hello world"


def test_lowest_free_fd(sandbox):
    for name in "abc":
        (sandbox / name).write_bytes(b"")
    k = SimKernel(sandbox)
    fds = [k.kcall("open", put(k, n.encode()), O_RDONLY) for n in "abc"]
    assert fds == [3, 4, 5]
    k.kcall("close", 4)
    assert k.kcall("open", put(k, b"c"), O_RDONLY) == 4


def test_access_modes_and_faults(sandbox):
    (sandbox / "r").write_bytes(b"data")
    k = SimKernel(sandbox)
    fd = k.kcall("open", put(k, b"r"), O_RDONLY)
    assert k.kcall("write", fd, BUF, 1) == -EBADF
    assert k.kcall("read", fd, 0x10, 1) == -EFAULT
    wfd = k.kcall("open", put(k, b"r"), O_WRONLY)
    assert k.kcall("read", wfd, BUF, 1) == -EBADF
    assert k.kcall("lseek", 1, 0, 0) == -ESPIPE


def test_stdio(sandbox):
    k = SimKernel(sandbox, stdin=b"abc")
    assert k.kcall("read", 0, BUF, 2) == 2
    assert k.kcall("read", 0, BUF + 2, 9) == 1
    assert k.arena.read(BUF, 3) == b"abc"
    assert k.kcall("write", 1, BUF, 3) == 3
    assert k.kcall("write", 2, BUF, 1) == 1
    assert bytes(k.stdout) == b"abc" and bytes(k.stderr) == b"a"


def test_tmpfile_is_anonymous(sandbox):
    k = SimKernel(sandbox)
    fd = k.kcall("open", put(k, b"."), O_TMPFILE | O_RDWR)
    assert fd >= 3
    k.arena.write(BUF, b"xyz")
    assert k.kcall("write", fd, BUF, 3) == 3
    assert k.kcall("fstat", fd, BUF) == 0 and k.stat_size(BUF) == 3
    assert k.kcall("close", fd) == 0
    leftovers = [f for _, _, files in os.walk(sandbox) for f in files]
    assert leftovers == []


def test_openat_cwd_only(sandbox):
    (sandbox / "f").write_bytes(b"q")
    k = SimKernel(sandbox)
    assert k.kcall("openat", -100, put(k, b"f"), O_RDONLY) == 3
    # directory descriptors are not modeled
    assert k.kcall("openat", 3, put(k, b"f"), O_RDONLY) < 0
    assert k.kcall("openat", 77, put(k, b"f"), O_RDONLY) == -EBADF


def test_two_entry_paths_differ_only_in_counters(sandbox):
    k = SimKernel()
    assert traditional_syscall(k, "getpid") == k.kcall("getpid")
    c = k.counters
    assert c.user_kernel_transitions == 2 and c.itlb_flushes == 1
    assert c.kernel_calls["getpid"] == 1 and c.syscall_work["getpid"] == 2


def test_unknown_syscall():
    with pytest.raises(ValueError):
        traditional_syscall(SimKernel(), "fork")


def test_pin_rules():
    k = SimKernel(arena_size=4096)
    a = k.arena.pin(ARENA_BASE, 16)
    assert a and k.arena.pin(ARENA_BASE + 8, 16) == 0     # overlap
    assert k.arena.pin(ARENA_BASE + 4090, 16) == 0        # past the end
    assert k.arena.unpin(a) and not k.arena.unpin(a)


def test_counter_arithmetic():
    k = SimKernel()
    before = k.counters.copy()
    traditional_syscall(k, "getpid")
    delta = k.counters - before
    assert (delta + delta).user_kernel_transitions == 4
    assert delta.as_record()["kernel_to_user"] == 1


def test_errno_name():
    assert errno_name(-ENOENT) == "ENOENT"


@settings(max_examples=60, deadline=None)
@given(st.text(alphabet="ab./", min_size=1, max_size=12))
def test_resolve_never_escapes(tmp_path_factory, path):
    root = tmp_path_factory.mktemp("sb")
    k = SimKernel(root)
    host = k.resolve(path.encode())
    if isinstance(host, str):
        real = os.path.realpath(root)
        assert host == real or host.startswith(real + os.sep)
    else:
        assert host in (-EACCES, -ENOENT)
