import os

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from anycall.findmagic import (
    VARIANTS, ChunkTooLarge, FindMagicConfig, PathOutsideSandbox, loaded_program, run_variant, walk,
)
from anycall.verifier import Limits

from conftest import make_corpus, reference_find_magic


def listing_bytes(listing):
    return "".join(p + "\n" for p in listing).encode()


def test_small_corpus_all_variants(sandbox):
    (sandbox / "a.sh").write_bytes(b"#!/bin/sh\necho hi\n")
    (sandbox / "b").write_bytes(b"hello")
    (sandbox / "empty").write_bytes(b"")
    (sandbox / "short").write_bytes(b"#!")
    (sandbox / "d").mkdir()
    (sandbox / "d" / "c").write_bytes(b"#!/bin/sh")
    listing = b"a.sh\nb\nempty\nshort\nd/c\nmissing\nd\n"
    outs = {v: run_variant(sandbox, listing, FindMagicConfig(variant=v, chunk_size=4)) for v in VARIANTS}
    for res in outs.values():
        assert res.stdout == b"a.sh\nd/c\n"
        assert res.stderr == b"find-magic: missing: ENOENT\nfind-magic: d: EISDIR\n"
        assert res.files == 7 and res.matches == 2
    assert outs["anycall"].invocations == 2
    sys_t = outs["sys"].counters.user_kernel_transitions
    assert outs["anycall"].counters.user_kernel_transitions < outs["libc-style"].counters.user_kernel_transitions < sys_t


def test_matches_reference_and_order(sandbox):
    listing, expected = make_corpus(sandbox, 60, seed=3)
    listing = listing[::-1]
    ref = reference_find_magic(sandbox, listing)
    assert ref == "".join(p + "\n" for p in expected[::-1]).encode()
    res = run_variant(sandbox, listing_bytes(listing), FindMagicConfig(chunk_size=8))
    assert res.stdout == ref


def test_magic_at_offset(sandbox):
    (sandbox / "x").write_bytes(b"\0" * 5000 + b"MAGIC")
    (sandbox / "y").write_bytes(b"\0" * 4094 + b"MAGIC")     # straddles a 4096-byte block
    (sandbox / "z").write_bytes(b"MAGIC")
    for offset, want in ((5000, b"x\n"), (4094, b"y\n"), (0, b"z\n")):
        for v in VARIANTS:
            res = run_variant(sandbox, b"x\ny\nz\n", FindMagicConfig(magic=b"MAGIC", offset=offset, variant=v, chunk_size=2))
            assert res.stdout == want, (v, offset)


def test_empty_input(sandbox):
    for v in VARIANTS:
        res = run_variant(sandbox, b"", FindMagicConfig(variant=v, chunk_size=4))
        assert res.stdout == b"" and res.stderr == b""
        c = res.counters
        assert c.anycall_invocations == 0
        # only the single end-of-input read
        assert c.user_kernel_transitions == 2 and c.syscall_work == {"read": 1}


def test_outside_sandbox_is_an_error(sandbox):
    for v in VARIANTS:
        with pytest.raises(PathOutsideSandbox):
            run_variant(sandbox, b"../x\n", FindMagicConfig(variant=v, chunk_size=4))


def test_overlong_path_warned_identically(sandbox):
    (sandbox / "ok").write_bytes(b"#!/bin/sh")
    listing = b"ok\n" + b"p" * 5000 + b"\nok\n"
    outs = [run_variant(sandbox, listing, FindMagicConfig(variant=v, chunk_size=2)) for v in VARIANTS]
    assert {o.stdout for o in outs} == {b"ok\nok\n"}
    assert len({o.stderr for o in outs}) == 1 and b"ENAMETOOLONG" in outs[0].stderr


def test_chunk_four_kernel_calls(sandbox):
    listing, _ = make_corpus(sandbox, 40, seed=5)
    res = run_variant(sandbox, listing_bytes(listing), FindMagicConfig(chunk_size=4))
    assert res.invocations == 10
    assert res.counters.total_kernel_calls / res.invocations >= 24


def test_chunk_too_large_is_reported():
    loaded_program.cache_clear()
    with pytest.raises(ChunkTooLarge, match="lower --chunk-size"):
        loaded_program(64, b"#!/bin/sh", 0, Limits(max_insns=1000))


def test_config_validation():
    with pytest.raises(ValueError):
        FindMagicConfig(variant="bogus")
    with pytest.raises(ValueError):
        FindMagicConfig(magic=b"")
    with pytest.raises(ValueError):
        FindMagicConfig(magic=b"x" * 17)
    with pytest.raises(ValueError):
        FindMagicConfig(chunk_size=0)
    with pytest.raises(ValueError):
        FindMagicConfig(chunk_size=100_000)


def test_walk_is_sorted(sandbox):
    (sandbox / "b").mkdir()
    (sandbox / "b" / "2").write_bytes(b"")
    (sandbox / "a").write_bytes(b"")
    assert walk(sandbox) == ["a", os.path.join("b", "2")]


file_contents = st.one_of(st.just(b""), st.just(b"#!/bin/sh"), st.just(b"#!/bin/sh\n..."),
                          st.binary(max_size=20), st.just(b"#!/bin"))


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.lists(file_contents, min_size=0, max_size=12), st.integers(1, 5), st.randoms())
def test_variants_agree(tmp_path_factory, contents, chunk, rnd):
    root = tmp_path_factory.mktemp("corpus")
    names = []
    for i, data in enumerate(contents):
        (root / f"f{i}").write_bytes(data)
        names.append(f"f{i}")
    names += ["nope"] * rnd.randint(0, 2)
    rnd.shuffle(names)
    listing = listing_bytes(names)
    outs = [run_variant(root, listing, FindMagicConfig(variant=v, chunk_size=chunk)) for v in VARIANTS]
    assert len({o.stdout for o in outs}) == 1
    assert len({o.stderr for o in outs}) == 1
    assert outs[0].stdout == reference_find_magic(root, names)
