"""Random program generation for soundness fuzzing.

Programs are stitched from snippets that exercise every rule the verifier
enforces: ALU with possibly-zero divisors, stack spills at random offsets,
forward branches, small counted loops, and map/access/unmap blocks with
random sizes, offsets and deliberately dropped null checks or unmaps.  A
fair share of the output is accepted, which is what makes the
accepted-implies-no-trap property meaningful.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .assembler import assemble
from .isa import ALU_NAMES, COND_JMP_OPS, Program
from .programs import load_address
from .syskernel import ARENA_BASE, SimKernel
from .verifier import Limits, Verdict, verify
from .vm import ExecutionContext, RunResult, run

FUZZ_ARENA = 64 * 1024
_ALU = sorted(set(ALU_NAMES.values()))
_JMP = sorted(COND_JMP_OPS)
_WIDTHS = ("b", "h", "w", "dw")
_WIDTH_BYTES = {"b": 1, "h": 2, "w": 4, "dw": 8}
_SCRATCH = (0, 2, 3, 4, 5, 9)   # r6..r8 are reserved by snippets


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.labels = 0

    def label(self) -> str:
        self.labels += 1
        return f"l{self.labels}"

    def imm(self) -> int:
        r = self.rng.random()
        if r < 0.5:
            return self.rng.randint(-8, 64)
        if r < 0.8:
            return self.rng.randint(-(1 << 31), (1 << 31) - 1)
        return self.rng.choice((0, 1, -1, 63, 64, 0x7FFF_FFFF))

    def reg(self, allow_fp: bool = False) -> int:
        pool = _SCRATCH + ((10,) if allow_fp else ())
        return self.rng.choice(pool)

    def alu(self) -> list[str]:
        op = self.rng.choice(_ALU)
        dst = self.reg()
        if self.rng.random() < 0.5:
            return [f"{op} r{dst}, r{self.reg(allow_fp=op == 'mov')}"]
        return [f"{op} r{dst}, {self.imm()}"]

    def stack_store(self) -> list[str]:
        w = self.rng.choice(_WIDTHS)
        off = -self.rng.choice((8, 16, 24, 32, 64, 256, 512)) + self.rng.choice((0, 0, 0, 4, 1, -8))
        if self.rng.random() < 0.5:
            return [f"st{w} [r10{off:+d}], {self.imm()}"]
        return [f"stx{w} [r10{off:+d}], r{self.reg()}"]

    def stack_load(self) -> list[str]:
        w = self.rng.choice(_WIDTHS)
        off = -self.rng.choice((8, 16, 24, 32, 64)) + self.rng.choice((0, 0, 4))
        out = []
        if self.rng.random() < 0.7:
            out.append(f"stdw [r10{off - off % 8:+d}], {self.imm()}")
        return out + [f"ldx{w} r{self.reg()}, [r10{off:+d}]"]

    def refresh(self) -> list[str]:
        """Helpers clobber r1..r5; usually put fresh scalars back."""
        if self.rng.random() < 0.05:
            return []
        return [f"mov r{r}, {self.imm()}" for r in (0, 2, 3, 4, 5)]

    def branch(self, body: list[str]) -> list[str]:
        skip = self.label()
        op = self.rng.choice(_JMP)
        rhs = f"r{self.reg()}" if self.rng.random() < 0.4 else str(self.imm())
        return [f"{op} r{self.reg()}, {rhs}, {skip}", *body, f"{skip}:", "mov r7, 0"]

    def loop(self, body: list[str]) -> list[str]:
        top = self.label()
        bound = self.rng.randint(1, 6)
        step = 1 if self.rng.random() < 0.95 else 0   # occasional non-terminating loop
        return ["mov r8, 0", f"{top}:", *body, f"add r8, {step}", f"jlt r8, {bound}, {top}"]

    def helper(self) -> list[str]:
        r = self.rng.random()
        if r < 0.6:
            return ["call getpid", *self.refresh()]
        return [f"mov r1, {self.rng.randint(0, 3)}", "call close", *self.refresh()]

    def map_block(self) -> list[str]:
        rng = self.rng
        size = rng.choice((1, 4, 8, 16, 64, 128))
        base_off = rng.choice((0, 64, 1024, FUZZ_ARENA - 64, FUZZ_ARENA + 4096))
        fail = self.label()
        out = []
        if rng.random() < 0.3:
            out.append("mov r1, r6")
        else:
            out += load_address("r1", ARENA_BASE + base_off)
        out += [f"mov r2, {size}", "call map", "mov r7, r0"]
        null_check = rng.random() < 0.9
        if null_check:
            out.append(f"jeq r7, 0, {fail}")
        for _ in range(rng.randint(1, 3)):
            w = rng.choice(_WIDTHS)
            nbytes = _WIDTH_BYTES[w]
            limit = max(size - nbytes, 0)
            off = rng.choice((0, 0, limit, limit, rng.randint(0, size), size, -nbytes))
            off -= off % nbytes if rng.random() < 0.9 else 0
            kind = rng.random()
            if kind < 0.3:
                out.append(f"st{w} [r7{off:+d}], {self.imm()}")
            elif kind < 0.6:
                out.append(f"stx{w} [r7{off:+d}], r{self.reg()}")
            elif kind < 0.8:
                out.append(f"ldx{w} r{self.reg()}, [r7{off:+d}]")
            else:
                # variable index bounded by masking
                mask = rng.choice((0, 1, 3, 7, 15, 63))
                idx = self.reg()
                out += [f"mov r3, r{idx}", f"and r3, {mask}", "mov r4, r7", "add r4, r3",
                        f"ldxb r{self.reg()}, [r4+0]"]
        if rng.random() < 0.15:
            out += ["mov r1, 1", "mov r2, r7", f"mov r3, {rng.choice((1, size, size + 1))}", "call write"]
        unmap = rng.random() < 0.93
        if unmap:
            out += ["mov r1, r7", "call unmap"]
            if rng.random() < 0.05:
                out.append("stb [r7+0], 1")
        out += [f"{fail}:", "mov r7, 0", *self.refresh()]
        return out

    def snippet(self, depth: int = 0) -> list[str]:
        r = self.rng.random()
        if r < 0.30:
            return self.alu()
        if r < 0.42:
            return self.stack_store()
        if r < 0.50:
            return self.stack_load()
        if r < 0.58:
            return self.helper()
        if r < 0.75:
            return self.map_block()
        inner = [line for _ in range(self.rng.randint(1, 3)) for line in self.snippet(depth + 1)] \
            if depth < 2 else self.alu()
        if r < 0.90:
            return self.branch(inner)
        return self.loop(inner)

    def program(self) -> str:
        rng = self.rng
        out = ["mov r6, r1"]
        for reg in _SCRATCH:
            if rng.random() < 0.95:
                out.append(f"mov r{reg}, {self.imm()}")
        for _ in range(rng.randint(2, 10)):
            out += self.snippet()
        if rng.random() < 0.9:
            out.append(f"mov r0, {self.imm()}")
        out.append("exit")
        return "\n".join(out) + "\n"


def random_source(rng: random.Random) -> str:
    return _Gen(rng).program()


def random_program(rng: random.Random, name: str = "fuzz") -> Program:
    return assemble(random_source(rng), name=name)


def random_arg(rng: random.Random) -> int:
    r = rng.random()
    if r < 0.4:
        return ARENA_BASE + rng.randrange(0, FUZZ_ARENA)
    if r < 0.7:
        return rng.randrange(0, 1 << 64)
    return rng.randint(0, 256)


@dataclass
class FuzzOutcome:
    programs: int = 0
    accepted: int = 0
    runs: int = 0
    unsound: list = None

    def __post_init__(self) -> None:
        if self.unsound is None:
            self.unsound = []


def fuzz(count: int, seed: int = 0, args_per_program: int = 3,
         limits: Limits = Limits(max_insns=20_000, max_states=2_000)) -> FuzzOutcome:
    """Generate ``count`` programs; run every accepted one on random arguments."""
    rng = random.Random(seed)
    outcome = FuzzOutcome()
    kernel = SimKernel(arena_size=FUZZ_ARENA)
    for i in range(count):
        source = random_source(rng)
        program = assemble(source, name=f"fuzz-{i}")
        verdict: Verdict = verify(program, limits)
        outcome.programs += 1
        if not verdict.accepted:
            continue
        outcome.accepted += 1
        for _ in range(args_per_program):
            arg = random_arg(rng)
            result: RunResult = run(ExecutionContext(program, kernel, arg=arg, fuel=200_000))
            outcome.runs += 1
            if result.fault is not None:
                outcome.unsound.append((source, arg, str(result.fault)))
        kernel.stdout.clear()
    kernel.close()
    return outcome
