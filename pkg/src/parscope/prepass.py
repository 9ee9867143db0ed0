"""
Renaming of reused dynamic ids.

Barrier and future addresses are recycled by the runtime, so the same raw id
can stand for many conjunctions (or futures) over a run.  A single forward
pass gives every incarnation a fresh id: a table maps each raw id to an
active flag and its current replacement; an inactive raw id seen again starts
a new incarnation.  FUTURE_CREATE ids queue up until the next
START_PAR_CONJUNCTION on the same engine, and END_PAR_CONJUNCTION retires the
conjunction together with all of its futures.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from ._gcpause import gc_paused
from .eventlog import (
    CREATE_SPARK,
    END_PAR_CONJUNCT,
    END_PAR_CONJUNCTION,
    Event,
    FUTURE_CREATE,
    FUTURE_SIGNAL,
    FUTURE_WAIT_NO_SUSPEND,
    FUTURE_WAIT_SUSPEND,
    SHUTDOWN,
    START_PAR_CONJUNCTION,
    STARTUP,
)


class PrepassError(Exception):
    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"{message} (event {index})")


class SignalOnInactiveFuture(PrepassError):
    pass


class EndOnInactiveConjunction(PrepassError):
    pass


@dataclass
class _FutureEntry:
    active: bool
    replacement: int


@dataclass
class _ConjEntry:
    active: bool
    replacement: int
    futures: list[int] = field(default_factory=list)


@dataclass
class RenameState:
    future_map: dict[int, _FutureEntry] = field(default_factory=dict)
    conj_map: dict[int, _ConjEntry] = field(default_factory=dict)
    pending_futures: dict[Optional[int], list[int]] = field(default_factory=dict)
    next_conj: int = 1
    next_future: int = 1


@dataclass
class CanonicalTrace:
    """Events in analysis order with globally unique conjunction/future ids."""

    events: list[Event]
    n_engines: int
    start: int
    end: int
    conjunction_count: int
    future_count: int


@gc_paused
def canonicalize(events: Sequence[Event], state: Optional[RenameState] = None) -> CanonicalTrace:
    st = state if state is not None else RenameState()
    fmap, cmap, pending = st.future_map, st.conj_map, st.pending_futures
    out: list[Event] = []
    append = out.append
    n_engines = 0
    start: Optional[int] = None
    end: Optional[int] = None

    def conj_id(raw: int, i: int) -> int:
        ent = cmap.get(raw)
        if ent is None or not ent.active:
            raise EndOnInactiveConjunction(f"conjunction {raw:#x} is not live", i)
        return ent.replacement

    def future_id(raw: int, i: int) -> int:
        ent = fmap.get(raw)
        if ent is None or not ent.active:
            raise SignalOnInactiveFuture(f"future {raw:#x} is not live", i)
        return ent.replacement

    for i, ev in enumerate(events):
        k = ev.kind
        if k < START_PAR_CONJUNCTION or k > FUTURE_WAIT_SUSPEND:
            if k == STARTUP:
                n_engines = ev.args[0]
                if start is None:
                    start = ev.time
            elif k == SHUTDOWN:
                end = ev.time
            append(ev)
            continue
        a = ev.args
        if k == START_PAR_CONJUNCTION:
            raw = a[0]
            ent = cmap.get(raw)
            if ent is None:
                ent = cmap[raw] = _ConjEntry(True, st.next_conj)
                st.next_conj += 1
            else:
                # a START on a still-active id means its END was lost
                ent.active = True
                ent.replacement = st.next_conj
                st.next_conj += 1
            ent.futures = pending.pop(ev.engine, [])
            append(ev._replace(args=(ent.replacement, a[1])))
        elif k == FUTURE_CREATE:
            raw = a[0]
            ent = fmap.get(raw)
            if ent is None:
                ent = fmap[raw] = _FutureEntry(True, st.next_future)
            else:
                ent.active = True
                ent.replacement = st.next_future
            st.next_future += 1
            lst = pending.get(ev.engine)
            if lst is None:
                pending[ev.engine] = [raw]
            else:
                lst.append(raw)
            append(ev._replace(args=(ent.replacement, a[1])))
        elif k == END_PAR_CONJUNCTION:
            raw = a[0]
            new = conj_id(raw, i)
            ent = cmap[raw]
            ent.active = False
            for f in ent.futures:
                fmap[f].active = False
            ent.futures = []
            append(ev._replace(args=(new,)))
        elif k == CREATE_SPARK:
            append(ev._replace(args=(a[0], conj_id(a[1], i))))
        elif k == END_PAR_CONJUNCT:
            append(ev._replace(args=(conj_id(a[0], i),)))
        elif k in (FUTURE_SIGNAL, FUTURE_WAIT_NO_SUSPEND, FUTURE_WAIT_SUSPEND):
            append(ev._replace(args=(future_id(a[0], i),)))
        else:
            append(ev)
    if start is None:
        start = out[0].time if out else 0
    if end is None:
        end = out[-1].time if out else start
    return CanonicalTrace(out, n_engines, start, end,
                          st.next_conj - 1, st.next_future - 1)
