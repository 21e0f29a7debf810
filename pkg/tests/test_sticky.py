import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcsmr.sticky import HELP_FLAG, MAX_COUNT, ZERO_FLAG, StickyCounter
from rcsmr.verification import sched
from rcsmr.verification.explorer import explore, sequential_apply, unit_distributions

OPS = {"inc": "increment_if_not_zero", "dec": "decrement", "load": "load"}


def test_sequential_basics():
    c = StickyCounter(2)
    assert c.load() == 2
    assert c.increment_if_not_zero()
    assert not c.decrement()
    assert not c.decrement()
    assert c.decrement()
    assert c.load() == 0
    assert not c.increment_if_not_zero()
    assert c.load() == 0
    assert c.raw & ZERO_FLAG


def test_zero_start_is_not_yet_zero():
    # stored 0 only becomes logical zero once a load helps
    c = StickyCounter(0)
    assert c.load() == 0
    assert c.raw == ZERO_FLAG | HELP_FLAG
    assert not c.increment_if_not_zero()


def test_initial_range():
    StickyCounter(MAX_COUNT)
    with pytest.raises(ValueError):
        StickyCounter(-1)
    with pytest.raises(ValueError):
        StickyCounter(MAX_COUNT + 1)


@settings(max_examples=300)
@given(st.integers(1, 20), st.lists(st.sampled_from(sorted(OPS)), max_size=60))
def test_matches_sequential_model(start, ops):
    """Against a plain integer that sticks at zero."""
    c = StickyCounter(start)
    n = start
    for op in ops:
        if op == "dec" and n == 0:
            continue  # decrementing without a unit is outside the contract
        got = getattr(c, OPS[op])()
        if op == "inc":
            assert got == (n > 0)
            n += n > 0
        elif op == "dec":
            n -= 1
            assert got == (n == 0)
        else:
            assert got == n


@given(st.integers(1, 5), st.lists(st.sampled_from(["inc", "dec", "load"]), max_size=12))
def test_sequential_apply_agrees_with_counter(start, ops):
    c = StickyCounter(start)
    count = start
    for op in ops:
        if op == "dec" and count == 0:
            continue
        count, expected = sequential_apply(count, op)
        assert getattr(c, OPS[op])() == expected


def test_unit_distributions():
    assert sorted(unit_distributions(2, 3)) == sorted(
        {(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)}
    )
    assert list(unit_distributions(0, 3)) == [(0, 0, 0)]


def test_explore_helping_case():
    rep = explore(1, [["dec"], ["load"]])
    assert rep.ok
    assert rep.help_schedules >= 1


def test_explore_credit_needs_final_zero():
    # a late inc can win, leaving the count at 1 and nobody credited
    rep = explore(2, [["inc"], ["dec"], ["dec"]])
    assert rep.ok
    assert 0 < rep.credited_schedules < rep.schedules


def test_explore_strict_flags_aba_history():
    rep = explore(1, [["dec"], ["inc", "load", "dec"]])
    assert rep.complete
    assert any("not linearizable" in v for v in rep.violations)
    relaxed = explore(1, [["dec"], ["inc", "load", "dec"]], strict=False)
    assert relaxed.ok


def test_explore_small_open_sweep():
    for start in (0, 1, 2):
        for units in unit_distributions(start, 2):
            rep = explore(start, threads=2, max_ops=2, units=units, strict=False)
            assert rep.ok, rep.violations[:2]


def _real_outcomes(start, programs):
    outs = []

    def setup():
        c = StickyCounter(start)
        res = [[] for _ in programs]

        def body(i, prog):
            def run():
                for op in prog:
                    res[i].append(getattr(c, OPS[op])())

            return run

        def check():
            outs.append((tuple(map(tuple, res)), c.load()))
            return None

        return [body(i, p) for i, p in enumerate(programs)], check

    r = sched.explore(setup, max_preemptions=100, max_schedules=10**6)
    assert r.ok and not r.truncated
    return outs, r.schedules


@pytest.mark.parametrize(
    "start, programs",
    [
        (1, [["dec"], ["load"]]),
        (2, [["inc"], ["dec"], ["dec"]]),
        (1, [["dec"], ["inc", "load", "dec"]]),
        (2, [["dec", "inc"], ["dec", "load"]]),
        (3, [["dec", "dec"], ["inc", "dec"], ["load"]]),
    ],
)
def test_real_counter_credit_matches_final_count(start, programs):
    """Every interleaving of the real counter: one credit exactly when it ends at zero."""
    outs, n = _real_outcomes(start, programs)
    # one schedule per interleaving of atomic steps, on both sides
    assert n == explore(start, programs, strict=False).schedules
    for results, final in outs:
        credits = sum(r is True for prog, res in zip(programs, results) for op, r in zip(prog, res) if op == "dec")
        assert credits == (1 if final == 0 else 0)
        incs = sum(r for prog, res in zip(programs, results) for op, r in zip(prog, res) if op == "inc")
        decs = sum(prog.count("dec") for prog in programs)
        if final:
            assert final == start + incs - decs


def test_real_counter_reaches_explorer_counterexample():
    # dec is credited although the other thread saw the count at 1 after its own inc
    outs, _ = _real_outcomes(1, [["dec"], ["inc", "load", "dec"]])
    assert (((True,), (True, 1, False)), 0) in outs
