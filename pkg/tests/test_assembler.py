import pytest
from hypothesis import given, settings, strategies as st

from anycall import isa
from anycall.assembler import AssemblyError, assemble, disassemble, disassemble_lines, format_instruction


def test_labels_and_comments():
    prog = assemble("""
    start:  mov r1, 3      ; counter
    loop:   sub r1, 1
            jne r1, 0, loop
            mov r0, r1
            exit
    """)
    assert len(prog) == 5
    assert prog.instructions[2].off == -2


def test_relative_offsets_and_hex():
    prog = assemble("jeq r1, 0x10, +1\nmov r0, -1\nexit\n")
    assert prog.instructions[0].imm == 16
    assert prog.instructions[0].off == 1


def test_call_by_name_and_number():
    prog = assemble("call getpid\ncall 9\nexit\n")
    assert [i.imm for i in prog.instructions[:2]] == [1, 9]
    assert format_instruction(prog.instructions[1]) == "call map"


def test_disassemble_labels():
    prog = assemble("ja end\nmov r0, 1\nend: exit\n")
    assert disassemble(prog) == "ja L2\nmov r0, 1\nL2:\nexit\n"
    assert disassemble_lines(prog) == ["ja L2", "mov r0, 1", "exit"]


@pytest.mark.parametrize("source,line,column,fragment", [
    ("mov r0, 1\nfoo r1\n", 2, 1, "unknown mnemonic"),
    ("mov r11, 1\n", 1, 5, "expected register"),
    ("ja nowhere\n", 1, 4, "undefined label"),
    ("mov r10, 1\n", 1, 5, "read-only"),
    ("a:\na: exit\n", 2, 1, "duplicate label"),
    ("ldxdw r0, r1\n", 1, 11, "memory operand"),
    ("mov r0\n", 1, 1, "takes 2 operand"),
    ("call nosuch\n", 1, 6, "unknown helper"),
    ("ja +5\nexit\n", 1, 1, "outside program"),
    ("exit\nend:\n", 2, 1, "does not precede"),
])
def test_errors_have_positions(source, line, column, fragment):
    with pytest.raises(AssemblyError) as info:
        assemble(source)
    err = info.value
    assert fragment in err.message
    assert (err.line, err.column) == (line, column)


def test_fixture_roundtrip(fixture_programs):
    for prog in fixture_programs:
        again = assemble(disassemble(prog), name=prog.name)
        assert again.same_code(prog), prog.name


@settings(max_examples=200)
@given(st.data())
def test_text_roundtrip_random_programs(data):
    body = data.draw(st.lists(st.sampled_from([
        "mov r0, 1", "add r1, r2", "ldxw r3, [r10-8]", "stdw [r10-16], -5", "stxb [r1+3], r9",
        "rsh r4, 63", "mod r5, r6", "call getpid", "xor r7, 0x7fffffff", "stw [r2-4], 2147483647",
    ]), max_size=30))
    insns = [assemble(line).instructions[0] for line in body] + [isa.exit_()]
    n_jumps = data.draw(st.integers(0, 4))
    for _ in range(n_jumps):
        pos = data.draw(st.integers(0, len(insns) - 1))
        insns.insert(pos, None)
    n = len(insns)
    out = []
    for pc, insn in enumerate(insns):
        if insn is None:
            target = data.draw(st.integers(0, n - 1))
            op = data.draw(st.sampled_from(sorted(isa.COND_JMP_OPS)))
            insn = isa.jcond(op, 1, target - pc - 1, imm=data.draw(st.integers(-5, 5)))
        out.append(insn)
    prog = isa.Program("p", tuple(out))
    assert assemble(disassemble(prog)).same_code(prog)
