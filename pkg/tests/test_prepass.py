import pytest

from parscope.eventlog import Event, EventKind as K, decode_log
from parscope.prepass import (
    EndOnInactiveConjunction,
    RenameState,
    SignalOnInactiveFuture,
    canonicalize,
)
from parscope.analysis import canonical_trace

from tracekit import Trace, run_spec


def two_on_one_barrier() -> list[Event]:
    """Two successive conjunctions at barrier 0xA0, the second with a future."""
    tr = Trace(1)
    tr.add(0, 0, K.CREATE_THREAD, 1).add(0, 0, K.RUN_THREAD, 1)
    t = 0
    for rep in range(2):
        if rep:
            tr.add(t, 0, K.FUTURE_CREATE, 0x500, "x")
        tr.add(t, 0, K.START_PAR_CONJUNCTION, 0xA0, "m.m:7")
        tr.add(t, 0, K.CREATE_SPARK, rep + 1, 0xA0)
        if rep:
            tr.add(t + 5, 0, K.FUTURE_SIGNAL, 0x500)
        tr.add(t + 10, 0, K.END_PAR_CONJUNCT, 0xA0)
        tr.add(t + 10, 0, K.RUN_SPARK, 1, rep + 1)
        if rep:
            tr.add(t + 12, 0, K.FUTURE_WAIT_NO_SUSPEND, 0x500)
        tr.add(t + 20, 0, K.END_PAR_CONJUNCT, 0xA0)
        tr.add(t + 20, 0, K.END_PAR_CONJUNCTION, 0xA0)
        t += 30
    tr.add(t, 0, K.STOP_THREAD, 1, 3)
    return tr.events(t)


def conj_ids(events, kinds=(K.START_PAR_CONJUNCTION, K.END_PAR_CONJUNCTION,
                            K.END_PAR_CONJUNCT)):
    return [e.args[0] for e in events if e.kind in kinds]


def test_reused_barrier_gets_two_ids():
    out = canonicalize(two_on_one_barrier())
    assert out.conjunction_count == 2
    assert conj_ids(out.events, (K.START_PAR_CONJUNCTION,)) == [1, 2]
    # every event of an incarnation carries its own id
    assert conj_ids(out.events) == [1, 1, 1, 1, 2, 2, 2, 2]
    sparks = [e.args[1] for e in out.events if e.kind == K.CREATE_SPARK]
    assert sparks == [1, 2]


def test_futures_numbered_separately_from_conjunctions():
    out = canonicalize(two_on_one_barrier())
    assert out.future_count == 1
    fut = [e.args[0] for e in out.events
           if e.kind in (K.FUTURE_CREATE, K.FUTURE_SIGNAL, K.FUTURE_WAIT_NO_SUSPEND)]
    assert fut == [1, 1, 1]


def test_names_and_other_fields_untouched():
    raw = two_on_one_barrier()
    out = canonicalize(raw)
    assert len(out.events) == len(raw)
    for a, b in zip(raw, out.events):
        assert (a.kind, a.time, a.engine) == (b.kind, b.time, b.engine)
        if a.kind == K.START_PAR_CONJUNCTION:
            assert a.args[1] == b.args[1]


def test_idempotent():
    once = canonicalize(two_on_one_barrier())
    twice = canonicalize(once.events)
    assert twice.events == once.events
    assert (twice.conjunction_count, twice.future_count) == (2, 1)


def test_start_on_live_id_opens_new_incarnation():
    evs = two_on_one_barrier()
    # drop the first END_PAR_CONJUNCTION so the second START finds a live id
    first_end = next(i for i, e in enumerate(evs) if e.kind == K.END_PAR_CONJUNCTION)
    out = canonicalize(evs[:first_end] + evs[first_end + 1:])
    assert conj_ids(out.events, (K.START_PAR_CONJUNCTION,)) == [1, 2]


def test_end_on_inactive_conjunction():
    evs = [Event(K.STARTUP, 0, None, (1,)), Event(K.END_PAR_CONJUNCTION, 1, 0, (0xA0,))]
    with pytest.raises(EndOnInactiveConjunction):
        canonicalize(evs)


def test_signal_on_inactive_future():
    evs = [Event(K.STARTUP, 0, None, (1,)), Event(K.FUTURE_SIGNAL, 1, 0, (0x77,))]
    with pytest.raises(SignalOnInactiveFuture):
        canonicalize(evs)


def test_future_dies_with_its_conjunction():
    evs = two_on_one_barrier()
    late = Event(K.FUTURE_SIGNAL, 60, 0, (0x500,))
    with pytest.raises(SignalOnInactiveFuture):
        canonicalize(evs[:-1] + [late] + evs[-1:])


def test_state_carries_across_chunks():
    evs = two_on_one_barrier()
    whole = canonicalize(evs)
    st = RenameState()
    cut = len(evs) // 2
    a = canonicalize(evs[:cut], st)
    b = canonicalize(evs[cut:], st)
    assert a.events + b.events == whole.events


def test_reused_future_handles_match_simulator_incarnations():
    doc = {
        "n_engines": 2,
        "conjunctions": {
            "dep": {
                "static_id": "d.m:3",
                "futures": ["a", "b"],
                "conjuncts": [
                    {"work_ns": 100, "signals": [{"var": "a", "at_ns": 40},
                                                 {"var": "b", "at_ns": 90}]},
                    {"work_ns": 100, "waits": [{"var": "a", "at_ns": 10}]},
                    {"work_ns": 50, "waits": [{"var": "b", "at_ns": 0}]},
                ],
            },
        },
        "main": [{"conj": "dep", "repeat": 10}],
        "addresses": {"barrier_pool": 2, "future_pool": 3},
    }
    res = run_spec(doc)
    assert res.truth.structure()["raw_future_addresses"] <= 3
    out = canonical_trace(decode_log(res.log))
    assert out.future_count == 20 == res.truth.structure()["future_count"]
    assert out.conjunction_count == 10
    created = [e.args[0] for e in out.events if e.kind == K.FUTURE_CREATE]
    assert sorted(created) == list(range(1, 21))
