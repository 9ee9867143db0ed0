import struct

import pytest
from hypothesis import given, settings, strategies as st

from parscope import analyze
from parscope.eventlog import (
    BUILTIN_DECLS,
    MAGIC,
    VARIABLE,
    BadMagic,
    DeclarationMismatch,
    Event,
    EventKind as K,
    EventTypeDecl,
    NegativeSizeMismatch,
    TimestampRegression,
    TruncatedEvent,
    TruncatedHeader,
    UndeclaredTypeId,
    UnknownKindWithoutDecl,
    analysis_order,
    decode_log,
    encode_log,
    errors_only,
    validate_wellformed,
)

from codecfuzz import random_stream
from tracekit import pair_spec, run_spec


def minimal_events(n=2):
    return [Event(K.STARTUP, 0, None, (n,)), Event(K.SHUTDOWN, 0, None, ())]


def test_minimal_log_has_no_blocks():
    log = decode_log(encode_log(None, minimal_events()))
    assert len(log.events) == 2
    assert log.block_count == 0
    assert log.events[0].args == (2,)


def test_minimal_round_trip():
    evs = minimal_events()
    assert decode_log(encode_log(None, evs)).events == evs


def test_variable_payload_is_length_prefixed():
    ev = Event(K.START_PAR_CONJUNCTION, 5, 0, (0xA0, "m.m:1"))
    data = encode_log(None, minimal_events(1)[:1] + [ev])
    # the length prefix covers the u64 id and the string
    tail = struct.pack(">HQH", K.START_PAR_CONJUNCTION, 5, 13) + struct.pack(">Q", 0xA0) + b"m.m:1"
    assert data.endswith(tail)
    assert decode_log(data).events[-1] == ev


def test_unknown_type_is_preserved_and_ignored_by_analysis():
    plain = run_spec(pair_spec(2))
    log = decode_log(plain.log)
    decls = list(log.declarations) + [EventTypeDecl(900, 4, "mystery")]
    mixed = []
    for ev in log.events:
        mixed.append(ev)
        if ev.engine is not None:
            mixed.append(Event(900, ev.time, ev.engine, (b"\x01\x02\x03\x04",)))
    data = encode_log(decls, mixed)
    back = decode_log(data)
    assert [e for e in back.events if e.kind == 900]
    assert back.events == mixed
    assert analyze(data) == analyze(plain.log)


def test_decoded_simulator_log_matches_emitted_events():
    res = run_spec(pair_spec(2))
    assert decode_log(res.log).events == res.events


def test_events_carry_block_engine():
    evs = minimal_events(3)[:1] + [
        Event(K.CREATE_THREAD, 1, 2, (7,)),
        Event(K.RUN_THREAD, 1, 2, (7,)),
        Event(K.CREATE_THREAD, 2, 0, (8,)),
    ] + minimal_events()[1:]
    log = decode_log(encode_log(None, evs))
    assert [e.engine for e in log.events] == [None, 2, 2, 0, None]
    assert log.block_count == 2


@pytest.mark.parametrize("seed", range(20))
def test_fuzzed_stream_reencodes_byte_identically(seed):
    decls, evs = random_stream(seed, 1000, n_unknown=seed % 3)
    data = encode_log(decls, evs)
    log = decode_log(data)
    assert log.events == evs
    assert encode_log(log.declarations, log.events) == data


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(0, 300), unknown=st.integers(0, 4))
def test_round_trip_property(seed, n, unknown):
    decls, evs = random_stream(seed, n, unknown)
    data = encode_log(decls, evs)
    assert decode_log(data).events == evs


@settings(max_examples=60, deadline=None)
@given(name=st.text(max_size=40), ident=st.integers(0, 2**64 - 1))
def test_string_payload_round_trip(name, ident):
    evs = [Event(K.STARTUP, 0, None, (1,)), Event(K.FUTURE_CREATE, 3, 0, (ident, name))]
    assert decode_log(encode_log(None, evs)).events == evs


# -- decode errors

def test_bad_magic():
    with pytest.raises(BadMagic):
        decode_log(b"NOTALOG!" + bytes(8))


def test_truncated_header():
    data = encode_log(None, minimal_events())
    with pytest.raises(TruncatedHeader):
        decode_log(data[:20])


def test_truncated_event_reports_offset():
    data = encode_log(None, minimal_events())
    with pytest.raises(TruncatedEvent) as info:
        decode_log(data[:-3])
    assert info.value.offset is not None


def test_undeclared_type_id():
    decls = [d for d in BUILTIN_DECLS if d.type_id != K.GC_START]
    header = encode_log(decls, [])
    full = encode_log(None, minimal_events()[:1] + [Event(K.GC_START, 1, 0, ())])
    body = full[full.index(b"DATA") + 4:]
    with pytest.raises(UndeclaredTypeId):
        decode_log(header + body)


def test_variable_length_overrunning_block():
    evs = minimal_events(1)[:1] + [Event(K.FUTURE_CREATE, 1, 0, (5, "abc"))]
    data = bytearray(encode_log(None, evs))
    pos = len(data) - (2 + 8 + 3)
    data[pos:pos + 2] = struct.pack(">H", 200)
    with pytest.raises(NegativeSizeMismatch):
        decode_log(bytes(data))


def test_builtin_declared_with_wrong_size():
    decls = [EventTypeDecl(d.type_id, 3 if d.type_id == K.RUN_THREAD else d.size, d.name)
             for d in BUILTIN_DECLS]
    data = bytearray(encode_log(None, minimal_events()))
    with pytest.raises(DeclarationMismatch):
        decode_log(MAGIC + struct.pack(">I", len(decls))
                   + b"".join(struct.pack(">HhH", d.type_id, d.size, len(d.name)) + d.name.encode()
                              for d in decls)
                   + data[data.index(b"DATA"):])


# -- encode errors

def test_encode_kind_without_declaration():
    with pytest.raises(UnknownKindWithoutDecl):
        encode_log(None, minimal_events()[:1] + [Event(777, 0, 0, (b"",))])


def test_encode_rejects_timestamp_regression():
    evs = minimal_events()[:1] + [Event(K.GC_START, 10, 0, ()), Event(K.GC_END, 5, 0, ())]
    with pytest.raises(TimestampRegression):
        encode_log(None, evs)


def test_variable_unknown_kind_round_trips():
    decls = list(BUILTIN_DECLS) + [EventTypeDecl(901, VARIABLE, "blob")]
    evs = minimal_events()[:1] + [Event(901, 4, 1, (b"xyz",))]
    assert decode_log(encode_log(decls, evs)).events == evs


# -- ordering and well-formedness

def test_analysis_order_puts_startup_first_and_shutdown_last():
    evs = [Event(K.STARTUP, 5, None, (1,)), Event(K.GC_START, 5, 0, ()),
           Event(K.GC_END, 5, 0, ()), Event(K.SHUTDOWN, 5, None, ())]
    shuffled = [evs[3], evs[1], evs[0], evs[2]]
    assert analysis_order(shuffled) == [evs[0], evs[1], evs[2], evs[3]]


def test_simulator_output_is_wellformed():
    res = run_spec(pair_spec(3, works=(300, 200, 100)))
    assert validate_wellformed(decode_log(res.log).events) == []


def test_unmatched_end():
    evs = minimal_events(1)[:1] + [
        Event(K.CREATE_THREAD, 0, 0, (1,)),
        Event(K.RUN_THREAD, 0, 0, (1,)),
        Event(K.END_PAR_CONJUNCTION, 3, 0, (0x40,)),
    ] + minimal_events()[1:]
    found = validate_wellformed(evs)
    assert [v.kind for v in found] == ["UnmatchedEnd"]


def test_orphan_spark_thread():
    evs = minimal_events(1)[:1] + [Event(K.CREATE_SPARK_THREAD, 2, 0, (4,))] \
        + minimal_events()[1:]
    found = errors_only(validate_wellformed(evs))
    assert [v.kind for v in found] == ["OrphanSparkThread"]
