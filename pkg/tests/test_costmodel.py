import math
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from anycall import costmodel
from anycall.costmodel import CostParams, NoBreakEven, breakeven, model_time, preset, speedup
from anycall.syskernel import EventCounters

GETPID = preset("paper-kpti-getpid")
VECTOR = preset("paper-kpti-vector")


def traditional(n, names=("getpid",)):
    c = EventCounters()
    for name in names:
        c.user_kernel_transitions += 2 * n
        c.user_to_kernel += n
        c.kernel_to_user += n
        c.itlb_flushes += n
        c.syscall_work[name] += n
    return c


def aggregated(invocations, kcalls, names=("getpid",), mem=0):
    c = EventCounters(2 * invocations, invocations, invocations, invocations, invocations)
    for name in names:
        c.kernel_calls[name] += kcalls
        c.syscall_work[name] += kcalls
    if mem:
        c.kernel_calls["map"] += mem
    return c


def test_preset_values():
    assert GETPID.c_load == 22_340
    assert VECTOR.c_load == 33_650
    assert GETPID.traditional_per_unit == pytest.approx(131.8 / 150, rel=1e-12)
    assert GETPID.anycall_per_unit == pytest.approx(2.0 / 150, rel=1e-12)
    assert VECTOR.traditional_per_unit == pytest.approx(870 / 150, rel=1e-12)
    assert VECTOR.anycall_per_unit == pytest.approx(560 / 150, rel=1e-12)


def test_unknown_preset():
    with pytest.raises(KeyError, match="bogus"):
        preset("bogus")


def test_presets_are_immutable():
    with pytest.raises(Exception):
        GETPID.c_load = 1
    with pytest.raises(TypeError):
        GETPID.c_work["getpid"] = 0


def test_negative_costs_rejected():
    with pytest.raises(ValueError):
        CostParams(c_load=-1)
    with pytest.raises(ValueError):
        CostParams(c_work={"getpid": -0.1})


def test_calibration_examples():
    assert model_time(traditional(150), GETPID).t == pytest.approx(131.8, abs=1e-9)
    assert model_time(aggregated(1, 150), GETPID).t == pytest.approx(2.0, abs=1e-12)
    rep = model_time(aggregated(1, 150), GETPID, include_load=True)
    assert rep.t_prime == pytest.approx(22_342.0)
    assert rep.breakeven_calls == 25_817


def test_zero_events():
    assert model_time(EventCounters(), GETPID).t == 0
    assert model_time(EventCounters(), GETPID, include_load=True).t_prime == GETPID.c_load


def test_memory_helpers_are_free_by_default():
    assert model_time(aggregated(1, 10, mem=5), GETPID).t == model_time(aggregated(1, 10), GETPID).t


def test_breakeven_oracles():
    assert breakeven(GETPID) == math.ceil(22_340 / ((131.8 - 2.0) / 150)) == 25_817
    assert abs(breakeven(GETPID) - 25_500) / 25_500 < 0.02
    assert breakeven(VECTOR) == math.ceil(33_650 / ((870 - 560) / 150)) == 16_283
    assert abs(breakeven(VECTOR) - 16_500) / 16_500 < 0.05


def test_breakeven_never():
    p = CostParams(c_transition=1, c_kcall=1, c_load=10)
    with pytest.raises(NoBreakEven):
        breakeven(p)
    assert costmodel.breakeven_or_never(p) is None
    assert model_time(EventCounters(), p).breakeven_calls is None


def test_speedup():
    assert speedup(GETPID, 150) == pytest.approx(65.9)
    assert speedup(GETPID, 1, include_load=True) < 1
    assert speedup(GETPID, 10**9) == pytest.approx(costmodel.asymptotic_speedup(GETPID))
    with pytest.raises(ValueError):
        speedup(GETPID, 0)


def test_dump_and_load_roundtrip():
    text = costmodel.dumps(VECTOR)
    again = costmodel.loads(text)
    assert again == VECTOR
    custom = costmodel.loads("preset=mine\nunit=getpid\nc_transition=1.5\nc_work.getpid=0.5  # note\n")
    assert custom.c_transition == 1.5 and custom.work("getpid") == 0.5 and custom.preset == "mine"
    with pytest.raises(ValueError):
        costmodel.loads("nonsense\n")
    with pytest.raises(ValueError):
        costmodel.loads("c_bogus=1\n")


counts = st.integers(0, 10_000)


@given(counts, counts, counts, counts)
def test_model_is_affine(trips, invocations, kcalls, mem):
    c = traditional(trips) + aggregated(invocations, kcalls, mem=mem)
    doubled = c + c
    assert model_time(doubled, GETPID).t == pytest.approx(2 * model_time(c, GETPID).t, rel=1e-12, abs=1e-9)


@given(st.floats(0.01, 100), st.floats(0.0, 0.99), st.floats(0, 1e6))
def test_breakeven_is_the_first_winning_k(trad, ratio, load):
    p = costmodel.calibrate("x", ("getpid",), trad, trad * ratio, load)
    k = breakeven(p)
    total = lambda n: (n * p.traditional_per_unit, p.c_load + n * p.anycall_per_unit)
    t, a = total(k)
    assert a < t
    if k > 1:
        t, a = total(k - 1)
        assert a >= t


@given(st.integers(1, 300))
def test_linear_in_calls(k):
    per = model_time(aggregated(150, 150 * k), GETPID).t / 150
    assert per == pytest.approx(k * 2.0 / 150, rel=1e-9)
