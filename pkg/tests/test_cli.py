import json

import pytest

from anycall import programs
from anycall.cli import main
from anycall.isa import dump_binary


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        path = tmp_path / name
        if isinstance(text, bytes):
            path.write_bytes(text)
        else:
            path.write_text(text)
        return str(path)
    return _write


def test_verify_exit_codes(write, capsys):
    assert main(["verify", write("ok.s", programs.pin_check_source("valid"))]) == 0
    assert main(["verify", write("bad.s", programs.pin_check_source("oob"))]) == 1
    assert "R2" in capsys.readouterr().out
    assert main(["verify", "/nonexistent.s"]) == 2
    assert main(["verify", write("junk.s", "bogus r1\n")]) == 2
    assert main(["verify", write("junk.bin", b"AGGV\x01\x00\x05\x00\x00\x00")]) == 2


def test_verify_json_and_binary(write, capsys):
    path = write("p.bin", dump_binary(programs.pin_check_program("no_null_check")))
    assert main(["verify", path, "--format", "json"]) == 1
    rec = json.loads(capsys.readouterr().out)
    assert rec["diagnostics"][0]["rule"] == "R3"


def test_run_trivial(write, capsys):
    assert main(["run", write("t.s", "mov r0, 7\nexit\n")]) == 0
    out = capsys.readouterr().out
    assert "r0 = 7" in out and "user_kernel_transitions = 2" in out


def test_run_refuses_rejected_and_traps_when_forced(write, capsys):
    path = write("oob.s", programs.pin_check_source("oob"))
    assert main(["run", path]) == 1
    assert main(["run", path, "--unsafe-skip-verify", "--arg", "@0"]) == 3
    assert "trap region_bounds" in capsys.readouterr().err


def test_run_disk_usage(write, sandbox, capsys):
    for name, size in (("a", 9), ("b", 2), ("c", 4)):
        (sandbox / name).write_bytes(b"x" * size)
    path = write("du.s", programs.disk_usage_source(16))
    rc = main(["run", path, "--sandbox", str(sandbox), "--open", "a", "--open", "b", "--open", "c",
               "--poke", "0:3,3,4,5", "--arg", "@0", "--format", "json",
               "--cost-preset", "paper-kpti-getpid"])
    assert rc == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["return_value"] == 15
    assert rec["counters"]["kernel_calls.fstat"] == 3
    assert rec["counters"]["user_kernel_transitions"] == 2


def test_run_trace_to_file(write, tmp_path):
    trace = tmp_path / "t.ndjson"
    assert main(["run", write("g.s", programs.getpid_source(5)), "--arg", "2", "--trace", str(trace)]) == 0
    assert len(trace.read_text().splitlines()) == 4


def test_env_sandbox(write, sandbox, monkeypatch, capsys):
    (sandbox / "x").write_bytes(b"#!/bin/sh")
    monkeypatch.setenv("ANYCALL_SANDBOX", str(sandbox))
    inp = write("list", "x\n")
    assert main(["find-magic", "--input", inp, "--chunk-size", "4"]) == 0
    assert capsys.readouterr().out == "x\n"


def test_find_magic_errors(write, sandbox, capsys, monkeypatch):
    monkeypatch.delenv("ANYCALL_SANDBOX", raising=False)
    inp = write("list", "../x\n")
    assert main(["find-magic", "--sandbox", str(sandbox), "--input", inp, "--chunk-size", "4"]) == 2
    assert "outside the sandbox" in capsys.readouterr().err
    assert main(["find-magic", "--sandbox", str(sandbox), "--input", inp, "--chunk-size", "64",
                 "--max-insns", "500"]) == 1
    assert "lower --chunk-size" in capsys.readouterr().err
    assert main(["find-magic", "--input", inp]) == 2


def test_find_magic_stats(write, sandbox, tmp_path):
    (sandbox / "x").write_bytes(b"#!/bin/sh")
    stats = tmp_path / "stats.json"
    inp = write("list", "x\n")
    assert main(["find-magic", "--sandbox", str(sandbox), "--input", inp, "--chunk-size", "4",
                 "--variant", "libc-style", "--stats", str(stats), "--cost-preset", "paper-kpti-getpid"]) == 0
    rec = json.loads(stats.read_text())
    assert rec["matches"] == 1 and rec["variant"] == "libc-style" and rec["modeled_us"] > 0


def test_bench_and_report(tmp_path, capsys):
    out = tmp_path / "g.csv"
    assert main(["bench", "getpid", "--calls", "1,150,300", "--invocations", "2", "-o", str(out)]) == 0
    assert "25817" in capsys.readouterr().err
    assert main(["report", str(out)]) == 0
    assert "break-even: 25817" in capsys.readouterr().out
    assert main(["report", str(out), "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["breakeven_units"] == 25817


def test_bench_usage_errors(capsys):
    assert main(["bench", "getpid", "--calls", "0"]) == 2
    assert main(["bench", "vector-open-close", "--calls", "1"]) == 2
    assert "sandbox" in capsys.readouterr().err


def test_report_rejects_empty_csv(write):
    assert main(["report", write("e.csv", "")]) == 2


def test_emit(write, tmp_path, capsys):
    assert main(["emit", "pin-check", "--variant", "leak"]) == 0
    assert "call unmap" not in capsys.readouterr().out
    target = tmp_path / "fm.bin"
    assert main(["emit", "find-magic", "--size", "2", "--binary", "-o", str(target)]) == 0
    assert main(["verify", str(target)]) == 0


def test_argparse_usage_exit():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
