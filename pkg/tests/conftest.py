import os
import random

import pytest

from anycall import programs

SHEBANG = b"#!/bin/sh"


def make_corpus(root, n_files: int, seed: int = 0) -> tuple[list[str], list[str]]:
    """Mixed corpus under ``root``; returns (listing, expected matches in order)."""
    rng = random.Random(seed)
    listing, expected = [], []
    for i in range(n_files):
        sub = os.path.join(root, f"d{i % 7}", f"e{i % 3}")
        os.makedirs(sub, exist_ok=True)
        rel = os.path.relpath(os.path.join(sub, f"f{i:05d}"), root)
        kind = rng.random()
        if kind < 0.3:
            data = SHEBANG + b"\n" + os.urandom(rng.randint(0, 64))
        elif kind < 0.4:
            data = b""
        elif kind < 0.5:
            data = SHEBANG[:rng.randint(1, len(SHEBANG) - 1)]     # shorter than the magic
        elif kind < 0.6:
            data = b"#!/bin/bash\n"
        elif kind < 0.65:
            data = b"x" + SHEBANG                                   # magic at the wrong offset
        else:
            data = bytes(rng.getrandbits(8) for _ in range(rng.randint(1, 200)))
        with open(os.path.join(root, rel), "wb") as fh:
            fh.write(data)
        listing.append(rel)
        if data[:len(SHEBANG)] == SHEBANG:
            expected.append(rel)
    return listing, expected


def reference_find_magic(root, listing, magic=SHEBANG, offset=0) -> bytes:
    """Host-filesystem oracle."""
    out = []
    for rel in listing:
        path = os.path.join(root, rel)
        if not os.path.isfile(path):
            continue
        with open(path, "rb") as fh:
            fh.seek(offset)
            if fh.read(len(magic)) == magic:
                out.append(rel.encode() + b"\n")
    return b"".join(out)


@pytest.fixture
def sandbox(tmp_path):
    root = tmp_path / "sandbox"
    root.mkdir()
    return root


@pytest.fixture
def fixture_programs():
    progs = [programs.pin_check_program(v) for v in ("valid", "oob", "use_after_unmap", "no_null_check", "leak")]
    progs += [
        programs.disk_usage_program(16),
        programs.getpid_program(300),
        programs.vector_open_program(300),
        programs.vector_close_program(300),
        programs.find_magic_program(4),
    ]
    return progs


# -- acceptance reporting: one PASS/FAIL line per criterion at the end of the run

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    status = "PASS" if report.passed else "FAIL"
    if report.when == "call" or status == "FAIL":
        _CRITERIA[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title}")
