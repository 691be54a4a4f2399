import json

import pytest
from hypothesis import given, strategies as st

from anycall import programs
from anycall.assembler import assemble
from anycall.syskernel import ARENA_BASE, DEFAULT_PID, SimKernel, region_pointer
from anycall.vm import (
    STACK_TOP, ExecutionContext, Exited, Trap, dump_trace, invoke_anycall, run, step, trace_events,
)


def execute(src, arg=0, kernel=None, fuel=100_000):
    kernel = kernel or SimKernel()
    return run(ExecutionContext(assemble(src), kernel, arg=arg, fuel=fuel))


@pytest.mark.parametrize("src,expected", [
    ("mov r0, 7\nexit", 7),
    ("mov r0, -1\nexit", -1),
    ("mov r0, 1\nlsh r0, 63\nexit", -(1 << 63)),
    ("mov r0, -1\nrsh r0, 60\nexit", 15),                 # logical shift
    ("mov r0, -7\nmov r1, 2\ndiv r0, r1\nexit", -3),     # signed, truncating
    ("mov r0, -7\nmov r1, 2\nmod r0, r1\nexit", -1),
    ("mov r0, 6\nmul r0, -3\nexit", -18),
    ("mov r0, 12\nxor r0, 10\nor r0, 1\nand r0, 7\nexit", 7),
    ("mov r0, 5\nsub r0, 7\nexit", -2),
    ("mov r0, 1\nlsh r0, 65\nexit", 2),                  # shift amount masked to 6 bits
])
def test_alu_semantics(src, expected):
    assert execute(src).return_value == expected


@pytest.mark.parametrize("op,a,b,taken", [
    ("jgt", -1, 1, True),      # unsigned: 0xfff.. > 1
    ("jsgt", -1, 1, False),
    ("jlt", 1, -1, True),
    ("jslt", -1, 1, True),
    ("jge", 3, 3, True),
    ("jsle", -5, -5, True),
    ("jne", 2, 3, True),
    ("jeq", 2, 3, False),
])
def test_branches(op, a, b, taken):
    src = f"mov r1, {a}\nmov r2, {b}\nmov r0, 0\n{op} r1, r2, +1\nexit\nmov r0, 1\nexit\n"
    assert execute(src).return_value == int(taken)


def test_stack_round_trip_widths():
    src = "stdw [r10-8], -1\nstb [r10-8], 0\nldxdw r0, [r10-8]\nexit\n"
    assert execute(src).return_value == -256


def test_argument_in_r1_and_frame_pointer():
    ctx = ExecutionContext(assemble("mov r0, r1\nexit"), SimKernel(), arg=41)
    assert ctx.registers[10] == STACK_TOP
    assert run(ctx).return_value == 41


def test_helper_clobbers_r1_to_r5_and_keeps_r6_to_r9():
    src = "mov r6, 6\nmov r9, 9\nmov r3, 3\ncall getpid\nmov r0, r6\nadd r0, r9\nadd r0, r3\nexit\n"
    assert execute(src).return_value == 15


def test_getpid_kcall():
    res = execute("call getpid\nexit\n")
    assert res.return_value == DEFAULT_PID
    assert res.helper_calls == {1: 1}


@pytest.mark.parametrize("src,kind", [
    ("mov r0, 1\nmov r1, 0\ndiv r0, r1\nexit", "div_by_zero"),
    ("stdw [r10+0], 1\nmov r0, 0\nexit", "stack"),
    ("stdw [r10-12], 1\nmov r0, 0\nexit", "misaligned"),
    ("mov r1, 0\nldxdw r0, [r1+0]\nexit", "bad_address"),
    ("loop: ja loop", "fuel"),
    ("mov r2, 4\ncall map\nmov r0, 0\nexit", "region_leak"),
])
def test_unverified_programs_trap(src, kind):
    res = execute(src, arg=ARENA_BASE, fuel=1000)
    assert res.fault is not None and res.fault.kind == kind


def test_region_bounds_and_stale_traps():
    kernel = SimKernel()
    oob = execute(programs.pin_check_source("oob"), arg=ARENA_BASE, kernel=kernel)
    assert oob.fault.kind == "region_bounds"
    stale = execute(programs.pin_check_source("use_after_unmap"), arg=ARENA_BASE, kernel=kernel)
    assert stale.fault.kind == "stale_region"
    assert not kernel.arena.pinned      # everything unpinned after the faults


def test_pin_check_valid_writes_user_memory():
    kernel = SimKernel()
    res = execute(programs.pin_check_source("valid"), arg=ARENA_BASE + 16, kernel=kernel)
    assert res.fault is None and res.return_value == 0
    assert kernel.arena.read(ARENA_BASE + 16, 4) == (4).to_bytes(4, "little")
    assert not kernel.arena.pinned


def test_map_failure_returns_null_path():
    res = execute(programs.pin_check_source("valid"), arg=0x1234)   # not an arena address
    assert res.return_value == -1 and res.fault is None


def test_step_api():
    ctx = ExecutionContext(assemble("mov r0, 2\nexit"), SimKernel())
    assert step(ctx) == "continue"
    assert step(ctx) == Exited(2)
    ctx.pc = 5
    assert isinstance(step(ctx), Trap)


@pytest.mark.parametrize("k", [1, 10, 150, 300])
def test_invoke_counts_one_round_trip(k):
    kernel = SimKernel()
    res = invoke_anycall(programs.getpid_program(), k, kernel)
    c = kernel.counters
    assert res.return_value == k
    assert (c.user_kernel_transitions, c.itlb_flushes, c.anycall_invocations) == (2, 1, 1)
    assert c.kernel_calls["getpid"] == k


def test_trace_records_kcalls_between_transitions():
    kernel = SimKernel(trace=True)
    invoke_anycall(programs.getpid_program(), 3, kernel)
    kinds = [e.kind for e in trace_events(kernel)]
    assert kinds == ["user_to_kernel", "kcall", "kcall", "kcall", "kernel_to_user"]
    lines = dump_trace(trace_events(kernel)).splitlines()
    assert json.loads(lines[1]) == {"seq": 1, "kind": "kcall", "helper_id": 1, "payload": str(DEFAULT_PID)}


def test_trace_requires_enabling():
    with pytest.raises(ValueError):
        trace_events(SimKernel())


def test_disk_usage_sums_sizes(sandbox):
    sizes = [9, 0, 4097]
    for i, n in enumerate(sizes):
        (sandbox / f"f{i}").write_bytes(b"z" * n)
    kernel = SimKernel(sandbox)
    from anycall.syskernel import O_RDONLY, traditional_syscall
    fds = []
    for i in range(len(sizes)):
        kernel.arena.write(ARENA_BASE + 0x8000, f"f{i}\0".encode())
        fds.append(traditional_syscall(kernel, "open", (ARENA_BASE + 0x8000, O_RDONLY)))
    block = [len(fds), *fds]
    kernel.arena.write(ARENA_BASE, b"".join(v.to_bytes(8, "little") for v in block))
    res = invoke_anycall(programs.disk_usage_program(16), ARENA_BASE, kernel)
    assert res.fault is None
    assert res.return_value == sum(sizes)
    assert kernel.counters.kernel_calls["fstat"] == 3


@given(st.integers(-(1 << 31), (1 << 31) - 1), st.integers(-(1 << 31), (1 << 31) - 1))
def test_add_sub_wraparound(a, b):
    src = f"mov r0, {a}\nlsh r0, 32\nadd r0, {b}\nsub r0, {b}\nrsh r0, 32\nexit"
    assert execute(src).return_value == a & 0xFFFF_FFFF


def test_region_pointer_layout():
    assert region_pointer(3, 5) == (0xA << 60) | (3 << 32) | 5
