"""
Binary event log: type catalog, encoder, decoder and well-formedness checks.

Wire format (all integers big-endian)::

    "MTSLOG01"
    u32 decl_count
    decl_count x {u16 type_id, i16 size (-1 = variable), u16 name_len, name}
    "DATA"
    top-level events and blocks

A block is a BLOCK_HEADER event ``{u16 0, u64 timestamp, u16 engine, u32 len}``
followed by ``len`` bytes of events.  Every event is ``{u16 type_id, u64
timestamp, [u16 var_len], payload}``.  Type ids the decoder has no built-in
meaning for are kept as opaque UNKNOWN events, so logs written by a newer
runtime stay readable.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, NamedTuple, Optional, Sequence

from ._gcpause import gc_paused

MAGIC = b"MTSLOG01"
DATA_MARK = b"DATA"
VARIABLE = -1


class EventKind(IntEnum):
    BLOCK_HEADER = 0
    STARTUP = 1
    SHUTDOWN = 2
    CREATE_THREAD = 3
    RUN_THREAD = 4
    STOP_THREAD = 5
    THREAD_RUNNABLE = 6
    RUN_SPARK = 7
    STEAL_SPARK = 8
    CREATE_SPARK_THREAD = 9
    GC_START = 10
    GC_END = 11
    START_PAR_CONJUNCTION = 12
    END_PAR_CONJUNCTION = 13
    CREATE_SPARK = 14
    END_PAR_CONJUNCT = 15
    FUTURE_CREATE = 16
    FUTURE_SIGNAL = 17
    FUTURE_WAIT_NO_SUSPEND = 18
    FUTURE_WAIT_SUSPEND = 19
    TRY_GET_RUNNABLE_CONTEXT = 20
    TRY_GET_LOCAL_SPARK = 21
    TRY_STEAL_SPARK = 22
    ENGINE_WILL_SLEEP = 23


class StopReason(IntEnum):
    OTHER = 0
    GC_HEAP_FULL = 1
    BLOCKED = 2
    FINISHED = 3


# Plain-int aliases for hot loops; IntEnum comparisons are noticeably slower.
BLOCK_HEADER = 0
STARTUP = 1
SHUTDOWN = 2
CREATE_THREAD = 3
RUN_THREAD = 4
STOP_THREAD = 5
THREAD_RUNNABLE = 6
RUN_SPARK = 7
STEAL_SPARK = 8
CREATE_SPARK_THREAD = 9
GC_START = 10
GC_END = 11
START_PAR_CONJUNCTION = 12
END_PAR_CONJUNCTION = 13
CREATE_SPARK = 14
END_PAR_CONJUNCT = 15
FUTURE_CREATE = 16
FUTURE_SIGNAL = 17
FUTURE_WAIT_NO_SUSPEND = 18
FUTURE_WAIT_SUSPEND = 19
TRY_GET_RUNNABLE_CONTEXT = 20
TRY_GET_LOCAL_SPARK = 21
TRY_STEAL_SPARK = 22
ENGINE_WILL_SLEEP = 23

TRY_KINDS = frozenset((TRY_GET_RUNNABLE_CONTEXT, TRY_GET_LOCAL_SPARK, TRY_STEAL_SPARK))

# kind -> (struct format of the fixed part, trailing string?)
_LAYOUT: dict[int, tuple[str, bool]] = {
    BLOCK_HEADER: ("HI", False),
    STARTUP: ("H", False),
    SHUTDOWN: ("", False),
    CREATE_THREAD: ("I", False),
    RUN_THREAD: ("I", False),
    STOP_THREAD: ("IH", False),
    THREAD_RUNNABLE: ("I", False),
    RUN_SPARK: ("IQ", False),
    STEAL_SPARK: ("IQH", False),
    CREATE_SPARK_THREAD: ("I", False),
    GC_START: ("", False),
    GC_END: ("", False),
    START_PAR_CONJUNCTION: ("Q", True),
    END_PAR_CONJUNCTION: ("Q", False),
    CREATE_SPARK: ("QQ", False),
    END_PAR_CONJUNCT: ("Q", False),
    FUTURE_CREATE: ("Q", True),
    FUTURE_SIGNAL: ("Q", False),
    FUTURE_WAIT_NO_SUSPEND: ("Q", False),
    FUTURE_WAIT_SUSPEND: ("Q", False),
    TRY_GET_RUNNABLE_CONTEXT: ("", False),
    TRY_GET_LOCAL_SPARK: ("", False),
    TRY_STEAL_SPARK: ("", False),
    ENGINE_WILL_SLEEP: ("", False),
}

_HEAD = struct.Struct(">HQ")
_U16 = struct.Struct(">H")
_U32 = struct.Struct(">I")
_DECL = struct.Struct(">HhH")
_FIXED = {k: struct.Struct(">" + fmt) for k, (fmt, _) in _LAYOUT.items()}


@dataclass(frozen=True)
class EventTypeDecl:
    type_id: int
    size: int  # byte count, or VARIABLE
    name: str


def _builtin_size(kind: int) -> int:
    fmt, var = _LAYOUT[kind]
    return VARIABLE if var else struct.calcsize(">" + fmt)


BUILTIN_DECLS: tuple[EventTypeDecl, ...] = tuple(
    EventTypeDecl(int(k), _builtin_size(int(k)), k.name) for k in EventKind
)


class Event(NamedTuple):
    """One log record.

    ``engine`` is the id from the enclosing block header, or None for
    top-level events.  ``args`` holds the payload fields in wire order; for
    unknown kinds it is ``(raw_bytes,)``.
    """

    kind: int
    time: int
    engine: Optional[int]
    args: tuple = ()

    @property
    def name(self) -> str:
        try:
            return EventKind(self.kind).name
        except ValueError:
            return f"UNKNOWN[{self.kind}]"


def is_builtin(kind: int) -> bool:
    return kind in _LAYOUT


# -- errors ---------------------------------------------------------------


class LogFormatError(Exception):
    """Base class for encode and decode failures."""


class DecodeError(LogFormatError):
    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)


class BadMagic(DecodeError):
    pass


class TruncatedHeader(DecodeError):
    pass


class TruncatedEvent(DecodeError):
    pass


class UndeclaredTypeId(DecodeError):
    pass


class NegativeSizeMismatch(DecodeError):
    """A variable-size event's length prefix runs past the end of its block."""


class DeclarationMismatch(DecodeError):
    """A built-in type id is declared with a size that contradicts the catalog."""


class EncodeError(LogFormatError):
    pass


class UnknownKindWithoutDecl(EncodeError):
    pass


class TimestampRegression(EncodeError):
    pass


# -- decoding -------------------------------------------------------------


@dataclass
class Log:
    declarations: list[EventTypeDecl]
    events: list[Event]
    block_count: int = 0


@gc_paused
def decode_log(data: bytes) -> Log:
    """Parse a complete log held in memory."""
    data = bytes(data)
    n = len(data)
    if data[:8] != MAGIC:
        raise BadMagic("log does not start with MTSLOG01", 0)
    pos = 8
    if n < pos + 4:
        raise TruncatedHeader("missing declaration count", pos)
    (count,) = _U32.unpack_from(data, pos)
    pos += 4
    decls: list[EventTypeDecl] = []
    sizes: dict[int, int] = {}
    for _ in range(count):
        if n < pos + 6:
            raise TruncatedHeader("declaration cut short", pos)
        type_id, size, name_len = _DECL.unpack_from(data, pos)
        pos += 6
        if n < pos + name_len:
            raise TruncatedHeader("declaration name cut short", pos)
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        if type_id in sizes:
            raise DecodeError(f"type id {type_id} declared twice", pos)
        if size < VARIABLE:
            raise DecodeError(f"type id {type_id} has invalid size {size}", pos)
        if type_id in _LAYOUT and size != _builtin_size(type_id):
            raise DeclarationMismatch(
                f"built-in type id {type_id} declared with size {size}", pos)
        sizes[type_id] = size
        decls.append(EventTypeDecl(type_id, size, name))
    if data[pos:pos + 4] != DATA_MARK:
        raise TruncatedHeader("missing DATA marker", pos)
    pos += 4

    events: list[Event] = []
    append = events.append
    new_event = tuple.__new__
    blocks = 0
    head_unpack = _HEAD.unpack_from
    u16_unpack = _U16.unpack_from
    block_unpack = _FIXED[BLOCK_HEADER].unpack_from
    # kind -> (declared size, payload unpacker, fixed payload size, built-in)
    decoders: dict[int, tuple] = {}
    for kind, size in sizes.items():
        st = _FIXED.get(kind)
        if st is None:
            decoders[kind] = (size, None, 0, False)
        else:
            decoders[kind] = (size, st.unpack_from if st.size else None, st.size, True)
    engine: Optional[int] = None
    limit = n  # end of the current block, or end of data at top level
    while pos < n:
        if pos == limit and engine is not None:
            engine, limit = None, n
            continue
        if pos + 10 > limit:
            raise TruncatedEvent("event header cut short", pos)
        kind, ts = head_unpack(data, pos)
        start = pos
        pos += 10
        dec = decoders.get(kind)
        if dec is None:
            raise UndeclaredTypeId(f"type id {kind} not declared in header", start)
        size, unpack, fixed_size, builtin = dec
        if kind == BLOCK_HEADER:
            if engine is not None:
                raise DecodeError("block header inside a block", start)
            if pos + 6 > n:
                raise TruncatedEvent("block header cut short", start)
            eng, blen = block_unpack(data, pos)
            pos += 6
            if pos + blen > n:
                raise TruncatedEvent("block extends past end of log", start)
            engine, limit = eng, pos + blen
            blocks += 1
            continue
        if size == VARIABLE:
            if pos + 2 > limit:
                raise TruncatedEvent("length prefix cut short", start)
            (size,) = u16_unpack(data, pos)
            pos += 2
            if pos + size > limit:
                raise NegativeSizeMismatch(
                    f"variable event of {size} bytes overruns its block", start)
            if not builtin:
                args: tuple = (data[pos:pos + size],)
            elif size < fixed_size:
                raise TruncatedEvent(f"event of type {kind} too short", start)
            else:
                head = unpack(data, pos) if unpack else ()
                args = head + (data[pos + fixed_size:pos + size].decode("utf-8"),)
        else:
            if pos + size > limit:
                raise TruncatedEvent(f"event of type {kind} cut short", start)
            if not builtin:
                args = (data[pos:pos + size],)
            elif unpack is not None:
                args = unpack(data, pos)
            else:
                args = ()
        pos += size
        append(new_event(Event, (kind, ts, engine, args)))
    if engine is not None and pos != limit:
        raise TruncatedEvent("block extends past end of log", pos)
    return Log(decls, events, blocks)


# -- encoding -------------------------------------------------------------


def _payload(ev: Event, size: int) -> bytes:
    kind = ev.kind
    spec = _LAYOUT.get(kind)
    if spec is None:
        (raw,) = ev.args
        raw = bytes(raw)
        if size != VARIABLE and len(raw) != size:
            raise EncodeError(
                f"opaque event of type {kind} has {len(raw)} bytes, declared {size}")
        return raw
    fmt, var = spec
    if var:
        head = _FIXED[kind].pack(*ev.args[:-1])
        return head + ev.args[-1].encode("utf-8")
    return _FIXED[kind].pack(*ev.args) if fmt else b""


def _event_bytes(ev: Event, sizes: dict[int, int]) -> bytes:
    try:
        size = sizes[ev.kind]
    except KeyError:
        raise UnknownKindWithoutDecl(f"event type {ev.kind} has no declaration") from None
    body = _payload(ev, size)
    if size == VARIABLE:
        if len(body) > 0xFFFF:
            raise EncodeError("variable payload longer than 65535 bytes")
        return _HEAD.pack(ev.kind, ev.time) + _U16.pack(len(body)) + body
    return _HEAD.pack(ev.kind, ev.time) + body


def encode_log(declarations: Optional[Sequence[EventTypeDecl]],
               events: Iterable[Event],
               max_block_bytes: int = 0xFFFFFFFF) -> bytes:
    """Serialize events; consecutive events of one engine share a block.

    ``declarations=None`` means the built-in catalog only.
    """
    decls = list(BUILTIN_DECLS if declarations is None else declarations)
    sizes = {d.type_id: d.size for d in decls}
    for tid, size in sizes.items():
        if tid in _LAYOUT and size != _builtin_size(tid):
            raise EncodeError(f"built-in type id {tid} declared with size {size}")
    out = [MAGIC, _U32.pack(len(decls))]
    for d in decls:
        name = d.name.encode("utf-8")
        out.append(_DECL.pack(d.type_id, d.size, len(name)) + name)
    out.append(DATA_MARK)

    last_time: dict[int, int] = {}
    block: list[bytes] = []
    block_len = 0
    block_engine: Optional[int] = None
    block_time = 0

    def flush():
        if block:
            out.append(_HEAD.pack(BLOCK_HEADER, block_time)
                       + _FIXED[BLOCK_HEADER].pack(block_engine, block_len))
            out.extend(block)

    for ev in events:
        if ev.kind == BLOCK_HEADER:
            raise EncodeError("block headers are generated by the encoder")
        raw = _event_bytes(ev, sizes)
        eng = ev.engine
        if eng is None:
            flush()
            block, block_len, block_engine = [], 0, None
            out.append(raw)
            continue
        prev = last_time.get(eng)
        if prev is not None and ev.time < prev:
            raise TimestampRegression(
                f"engine {eng}: timestamp {ev.time} after {prev}")
        last_time[eng] = ev.time
        if eng != block_engine or block_len + len(raw) > max_block_bytes:
            flush()
            block, block_len, block_engine, block_time = [], 0, eng, ev.time
        block.append(raw)
        block_len += len(raw)
    flush()
    return b"".join(out)


# -- ordering -------------------------------------------------------------


@gc_paused
def analysis_permutation(events: Sequence[Event]) -> list[int]:
    """File positions of the events in global analysis order.

    The order is (timestamp, engine, block order); STARTUP sorts before and
    SHUTDOWN after engine events with the same timestamp.  The sort is
    stable, so per-engine byte order is kept on ties.
    """
    def key(i):
        ev = events[i]
        kind = ev.kind
        rank = 0 if kind == STARTUP else 2 if kind == SHUTDOWN else 1
        return (ev.time, rank, -1 if ev.engine is None else ev.engine)
    return sorted(range(len(events)), key=key)


def analysis_order(events: Sequence[Event]) -> list[Event]:
    return [events[i] for i in analysis_permutation(events)]


# -- well-formedness ------------------------------------------------------


@dataclass(frozen=True)
class WellformednessViolation:
    kind: str
    index: int
    time: int
    engine: Optional[int]
    message: str
    severity: str = "error"

    def to_json(self) -> dict:
        return {"kind": self.kind, "index": self.index, "time": self.time,
                "engine": self.engine, "message": self.message,
                "severity": self.severity}


@gc_paused
def validate_wellformed(events: Sequence[Event]) -> list[WellformednessViolation]:
    """Check the structural invariants of a decoded event list.

    Events are examined in analysis order; reported indices refer to the
    input list.  Dynamic ids may be raw (reused) or canonical; only live
    incarnations are tracked.  Context-id mismatches in RUN_SPARK/STEAL_SPARK
    are warnings.
    """
    out: list[WellformednessViolation] = []
    perm = analysis_permutation(events)

    def bad(kind, i, ev, msg, severity="error"):
        out.append(WellformednessViolation(kind, perm[i], ev.time, ev.engine, msg, severity))

    events = [events[j] for j in perm]

    live_conj: dict[int, int] = {}  # dyn id -> index of its START
    sparks_created: set[int] = set()
    sparks_used: set[int] = set()
    spark_conj: dict[int, int] = {}
    futures_live: set[int] = set()
    conj_futures: dict[int, list[int]] = {}
    pending_futures: dict[Optional[int], list[int]] = {}
    in_gc: dict[Optional[int], bool] = {}
    running: dict[Optional[int], Optional[int]] = {}
    pending_spark: dict[Optional[int], Optional[tuple[int, int]]] = {}
    frames: dict[int, list[int]] = {}

    for i, ev in enumerate(events):
        k, eng, a = ev.kind, ev.engine, ev.args
        if k not in _LAYOUT:
            continue
        if eng is None and k not in (STARTUP, SHUTDOWN):
            bad("OutsideBlock", i, ev, f"{ev.name} outside any engine block")
        # a pending spark must be taken up by the very next event on its engine
        if pending_spark.get(eng) is not None and k != CREATE_SPARK_THREAD:
            pending_spark[eng] = None
        if k == RUN_THREAD:
            running[eng] = a[0]
        elif k == STOP_THREAD:
            if running.get(eng) != a[0]:
                bad("StopNotRunning", i, ev, f"context {a[0]} is not running here")
            running[eng] = None
        elif k in (RUN_SPARK, STEAL_SPARK):
            ctx, spark = a[0], a[1]
            if spark not in sparks_created:
                bad("SparkBeforeCreation", i, ev, f"spark {spark:#x} not yet created")
            elif spark in sparks_used:
                bad("SparkReused", i, ev, f"spark {spark:#x} consumed twice")
            sparks_used.add(spark)
            if k == STEAL_SPARK and a[2] == eng:
                bad("SelfSteal", i, ev, "spark stolen from own engine")
            if running.get(eng) is not None:
                if running[eng] != ctx:
                    bad("ContextMismatch", i, ev,
                        f"spark names context {ctx}, engine runs {running[eng]}",
                        "warning")
                conj = spark_conj.get(spark)
                if conj is not None:
                    frames.setdefault(ctx, []).append(conj)
            else:
                pending_spark[eng] = (ctx, spark)
        elif k == CREATE_SPARK_THREAD:
            p = pending_spark.get(eng)
            if p is None:
                bad("OrphanSparkThread", i, ev,
                    "CREATE_SPARK_THREAD not preceded by RUN_SPARK or STEAL_SPARK")
            else:
                if p[0] != a[0]:
                    bad("ContextMismatch", i, ev,
                        f"spark named context {p[0]}, thread is {a[0]}", "warning")
                conj = spark_conj.get(p[1])
                frames[a[0]] = [conj] if conj is not None else []
            pending_spark[eng] = None
        elif k == GC_START:
            if in_gc.get(eng):
                bad("GcNesting", i, ev, "GC_START while already collecting")
            in_gc[eng] = True
        elif k == GC_END:
            if not in_gc.get(eng):
                bad("GcNesting", i, ev, "GC_END without GC_START")
            in_gc[eng] = False
        elif k == FUTURE_CREATE:
            futures_live.add(a[0])
            pending_futures.setdefault(eng, []).append(a[0])
        elif k == START_PAR_CONJUNCTION:
            dyn = a[0]
            if dyn in live_conj:
                bad("OverlappingConjunction", i, ev, f"conjunction {dyn:#x} already live")
            live_conj[dyn] = i
            conj_futures[dyn] = pending_futures.pop(eng, [])
            ctx = running.get(eng)
            if ctx is None:
                bad("NoContext", i, ev, "parallel conjunction started with no context")
            else:
                frames.setdefault(ctx, []).append(dyn)
        elif k == CREATE_SPARK:
            spark, dyn = a
            if dyn not in live_conj:
                bad("SparkForDeadConjunction", i, ev, f"conjunction {dyn:#x} not live")
            if spark in sparks_created:
                bad("DuplicateSpark", i, ev, f"spark {spark:#x} created twice")
            sparks_created.add(spark)
            spark_conj[spark] = dyn
        elif k == END_PAR_CONJUNCT:
            ctx = running.get(eng)
            st = frames.get(ctx) if ctx is not None else None
            if not st or st[-1] != a[0]:
                bad("ConjunctNotRunning", i, ev,
                    f"conjunction {a[0]:#x} is not being executed on this engine")
            else:
                st.pop()
        elif k == END_PAR_CONJUNCTION:
            dyn = a[0]
            if dyn not in live_conj:
                bad("UnmatchedEnd", i, ev, f"END_PAR_CONJUNCTION({dyn:#x}) without START")
            else:
                del live_conj[dyn]
                for f in conj_futures.pop(dyn, []):
                    futures_live.discard(f)
        elif k in (FUTURE_SIGNAL, FUTURE_WAIT_NO_SUSPEND, FUTURE_WAIT_SUSPEND):
            if a[0] not in futures_live:
                bad("UnknownFuture", i, ev, f"{ev.name} on future {a[0]:#x} never created")
    for dyn, i in live_conj.items():
        ev = events[i]
        bad("UnmatchedStart", i, ev, f"conjunction {dyn:#x} never ends")
    for eng, flag in in_gc.items():
        if flag:
            bad("GcNesting", len(events) - 1, events[-1], f"engine {eng} still collecting")
    return out


def errors_only(violations: Iterable[WellformednessViolation]) -> list[WellformednessViolation]:
    return [v for v in violations if v.severity == "error"]
