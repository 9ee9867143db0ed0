"""
Execution model reconstruction.

One forward pass over a canonical trace recovers what every engine and
context was doing at each instant: engine activity (IDLE, SEARCHING,
MUTATOR, GC), context phases (RUNNING, RUNNABLE, BLOCKED), the dynamic
conjunction forest with conjunct positions, future signal/wait records and
the idle-engine search episodes.

Linkage rules:

* conjunct 1 runs in the context that posts START_PAR_CONJUNCTION;
* sparks of a conjunction are created in conjunct order, so the i-th
  CREATE_SPARK of a conjunction is conjunct i+1;
* RUN_SPARK/STEAL_SPARK naming the context already running on the engine
  executes the spark in place, otherwise the next CREATE_SPARK_THREAD on that
  engine receives it;
* FUTURE_CREATE belongs to the next START_PAR_CONJUNCTION on the same engine;
* a conjunction started while a context executes conjunct c is a child of c.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Optional

from ._gcpause import gc_paused
from .eventlog import (
    CREATE_SPARK,
    CREATE_SPARK_THREAD,
    CREATE_THREAD,
    END_PAR_CONJUNCT,
    END_PAR_CONJUNCTION,
    ENGINE_WILL_SLEEP,
    FUTURE_CREATE,
    FUTURE_SIGNAL,
    FUTURE_WAIT_NO_SUSPEND,
    FUTURE_WAIT_SUSPEND,
    GC_END,
    GC_START,
    RUN_SPARK,
    RUN_THREAD,
    SHUTDOWN,
    STARTUP,
    START_PAR_CONJUNCTION,
    STEAL_SPARK,
    STOP_THREAD,
    StopReason,
    THREAD_RUNNABLE,
    TRY_GET_LOCAL_SPARK,
    TRY_GET_RUNNABLE_CONTEXT,
    TRY_STEAL_SPARK,
)
from .prepass import CanonicalTrace

IDLE = "IDLE"
SEARCHING = "SEARCHING"
MUTATOR = "MUTATOR"
GC = "GC"

RUNNING = "RUNNING"
RUNNABLE = "RUNNABLE"
BLOCKED = "BLOCKED"

NEW = "NEW"
REUSED = "REUSED"

SOURCE_OF_TRY = {
    TRY_GET_RUNNABLE_CONTEXT: "runnable_context",
    TRY_GET_LOCAL_SPARK: "local_spark",
    TRY_STEAL_SPARK: "steal_spark",
}
SOURCES = ("runnable_context", "local_spark", "steal_spark")


class ReconstructError(Exception):
    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(f"{message} (event {index})")


class InconsistentLinkage(ReconstructError):
    pass


class DanglingConjunct(ReconstructError):
    pass


@dataclass(eq=False)
class Conjunct:
    conjunction: "Conjunction"
    position: int
    spark: Optional[int]
    spark_created: int
    exec_start: Optional[int] = None
    end: Optional[int] = None
    context: Optional[int] = None
    end_engine: Optional[int] = None
    children: list["Conjunction"] = field(default_factory=list)

    def __repr__(self):
        return f"<Conjunct {self.conjunction.id}.{self.position}>"

    @property
    def key(self) -> tuple[int, int]:
        return (self.conjunction.id, self.position)


@dataclass(eq=False)
class Conjunction:
    id: int
    static_id: str
    start: int
    start_engine: Optional[int]
    context: Optional[int]
    parent: Optional[Conjunct]
    conjuncts: list[Conjunct] = field(default_factory=list)
    futures: list["Future"] = field(default_factory=list)
    end: Optional[int] = None
    end_engine: Optional[int] = None
    last_end_engine: Optional[int] = None

    def __repr__(self):
        return f"<Conjunction {self.id} {self.static_id}>"

    @property
    def complete(self) -> bool:
        return self.end is not None and all(c.end is not None for c in self.conjuncts)

    def descendants(self):
        """This conjunction and every conjunction nested under it, preorder."""
        stack = [self]
        while stack:
            c = stack.pop()
            yield c
            for cj in reversed(c.conjuncts):
                stack.extend(reversed(cj.children))


@dataclass(eq=False)
class Wait:
    time: int
    suspended: bool
    chain: tuple[Conjunct, ...]
    consumer: Optional[Conjunct]
    first: bool


@dataclass(eq=False)
class Future:
    id: int
    name: str
    conjunction: Optional[Conjunction]
    created: int
    signal_time: Optional[int] = None
    signal_chain: tuple[Conjunct, ...] = ()
    producer: Optional[Conjunct] = None
    waited: bool = False
    waits: list[Wait] = field(default_factory=list)


@dataclass(eq=False)
class ContextTimeline:
    id: int
    created: Optional[int]
    finished: Optional[int] = None
    # (start, end, phase, detail): detail is the engine for RUNNING and the
    # future id (or None for a barrier) for BLOCKED
    intervals: list[tuple[int, int, str, Optional[int]]] = field(default_factory=list)
    _starts: Optional[list[int]] = field(default=None, repr=False)

    def clip(self, a: int, b: int):
        """Phase intervals intersected with ``[a, b)``."""
        if self._starts is None or len(self._starts) != len(self.intervals):
            self._starts = [iv[0] for iv in self.intervals]
        i = max(0, bisect_right(self._starts, a) - 1)
        j = bisect_left(self._starts, b, i)
        out = self.intervals[i:j]
        if out:
            s, e, ph, d = out[0]
            if e <= a:
                del out[0]
            elif s < a or e > b:
                out[0] = (max(s, a), min(e, b), ph, d)
        if out:
            s, e, ph, d = out[-1]
            if e > b:
                out[-1] = (s, b, ph, d)
        return out


@dataclass(eq=False)
class IdleEpisode:
    engine: int
    start: int
    end: Optional[int] = None
    source: Optional[str] = None  # None: ended in ENGINE_WILL_SLEEP
    after_sleep: bool = False
    enabling: Optional[int] = None
    last_try: Optional[int] = None

    @property
    def succeeded(self) -> bool:
        return self.end is not None and self.source is not None


@dataclass
class SparkThread:
    time: int
    engine: int
    context: int
    classification: str


@dataclass
class ExecutionModel:
    n_engines: int
    start: int
    end: int
    engines: list[list[tuple[int, int, str, Optional[int]]]]
    contexts: dict[int, ContextTimeline]
    conjunctions: list[Conjunction]
    futures: list[Future]
    episodes: list[IdleEpisode]
    spark_threads: list[SparkThread]
    gc_intervals: list[list[tuple[int, int]]]
    open_gc: int = 0

    @property
    def roots(self) -> list[Conjunction]:
        return [c for c in self.conjunctions if c.parent is None]

    def conjunct(self, conj_id: int, position: int) -> Conjunct:
        return self.conjunctions[conj_id - 1].conjuncts[position - 1]


def _chain(top: Optional[Conjunct], owner: Optional[Conjunction]):
    """Conjuncts from ``top`` up to the one belonging to ``owner``.

    Returns (chain, owner-level conjunct or None if ``owner`` is not an
    ancestor).
    """
    out = []
    x = top
    while x is not None:
        out.append(x)
        if x.conjunction is owner:
            return tuple(out), x
        x = x.conjunction.parent
    return tuple(out), None


class _Builder:
    def __init__(self, trace: CanonicalTrace):
        self.trace = trace
        n = trace.n_engines
        self.n = n
        t0 = trace.start
        self.eng_ctx: list[Optional[int]] = [None] * n
        self.act: list[list] = [[IDLE, t0, None] for _ in range(n)]
        self.engines: list[list] = [[] for _ in range(n)]
        self.gc_saved: list[Optional[tuple]] = [None] * n
        self.gc_paused: list[Optional[int]] = [None] * n
        self.gc_open: list[Optional[int]] = [None] * n
        self.gc_intervals: list[list] = [[] for _ in range(n)]
        self.contexts: dict[int, ContextTimeline] = {}
        self.phase: dict[int, list] = {}
        self.finished_ids: set[int] = set()
        self.frames: dict[int, list[Conjunct]] = {}
        self.conjs: list[Conjunction] = []
        self.by_id: dict[int, Conjunction] = {}
        self.sparks: dict[int, Conjunct] = {}
        self.consumed: set[int] = set()
        self.pending_spark: dict[int, tuple[Conjunct, int]] = {}
        self.pending_futures: dict[int, list[Future]] = {}
        self.futures: dict[int, Future] = {}
        self.blocked_on: dict[int, set[int]] = {}
        self.first_seen: set[tuple[int, int]] = set()
        self.episode: list[Optional[IdleEpisode]] = [None] * n
        self.episodes: list[IdleEpisode] = []
        self.sleeping: list[bool] = [False] * n
        self.sleep_enabling: list[Optional[int]] = [None] * n
        self.awaiting: list[int] = []
        self.spark_threads: list[SparkThread] = []

    # -- helpers ------------------------------------------------------
    def set_act(self, e, label, t, ctx=None):
        cur = self.act[e]
        if cur[0] == label and cur[2] == ctx:
            return
        if t > cur[1]:
            self.engines[e].append((cur[1], t, cur[0], cur[2]))
        cur[0], cur[1], cur[2] = label, t, ctx

    def ctx_new(self, c, t):
        tl = self.contexts.get(c)
        if tl is None:
            tl = self.contexts[c] = ContextTimeline(c, t)
        tl.finished = None
        self.finished_ids.discard(c)
        self.set_phase(c, RUNNABLE, None, t)

    def set_phase(self, c, ph, detail, t):
        cur = self.phase.get(c)
        if cur is None:
            if c not in self.contexts:
                self.contexts[c] = ContextTimeline(c, t)
            if ph is not None:
                self.phase[c] = [ph, t, detail]
            return
        if cur[0] == ph and cur[2] == detail:
            return
        if t > cur[1]:
            self.contexts[c].intervals.append((cur[1], t, cur[0], cur[2]))
        if ph is None:
            del self.phase[c]
        else:
            cur[0], cur[1], cur[2] = ph, t, detail

    def enabling(self, t):
        if self.awaiting:
            for e in self.awaiting:
                self.sleep_enabling[e] = t
            self.awaiting = []

    def close_episode(self, e, t, source):
        ep = self.episode[e]
        if ep is not None:
            ep.end = t
            ep.source = source
            self.episode[e] = None

    # -- main loop ----------------------------------------------------
    def run(self) -> ExecutionModel:
        n = self.n
        lookup = _DISPATCH.get
        for i, ev in enumerate(self.trace.events):
            k, t, e, a = ev
            if k > 23 or k == STARTUP or k == SHUTDOWN:
                continue
            if e is None or e >= n:
                raise InconsistentLinkage(f"event outside a valid engine block: {ev}", i)
            handler = lookup(k)
            if handler is not None:
                handler(self, i, t, e, a)
        return self.finish()

    def finish(self) -> ExecutionModel:
        end = self.trace.end
        for e in range(self.n):
            cur = self.act[e]
            if end > cur[1]:
                self.engines[e].append((cur[1], end, cur[0], cur[2]))
            if self.gc_open[e] is not None:
                self.gc_intervals[e].append((self.gc_open[e], end))
        for c, cur in self.phase.items():
            if end > cur[1]:
                self.contexts[c].intervals.append((cur[1], end, cur[0], cur[2]))
        for ep in self.episodes:
            if ep.end is None:
                ep.source = None
        return ExecutionModel(
            n_engines=self.n, start=self.trace.start, end=end,
            engines=self.engines, contexts=self.contexts,
            conjunctions=self.conjs,
            futures=sorted(self.futures.values(), key=lambda f: f.id),
            episodes=self.episodes, spark_threads=self.spark_threads,
            gc_intervals=self.gc_intervals,
            open_gc=sum(1 for g in self.gc_open if g is not None))

    # -- handlers -----------------------------------------------------
    def on_create_thread(self, i, t, e, a):
        self.ctx_new(a[0], t)

    def on_run_thread(self, i, t, e, a):
        c = a[0]
        prev = self.eng_ctx[e]
        if prev is not None and prev != c:
            self.set_phase(prev, RUNNABLE, None, t)
        if self.episode[e] is not None:
            ep = self.episode[e]
            self.close_episode(e, t, SOURCE_OF_TRY.get(ep.last_try, "runnable_context"))
        self.eng_ctx[e] = c
        if c not in self.contexts:
            self.contexts[c] = ContextTimeline(c, t)
        if self.gc_open[e] is not None:
            self.gc_saved[e] = (MUTATOR, c)
            self.gc_paused[e] = c
            self.set_phase(c, RUNNABLE, None, t)
        else:
            self.set_phase(c, RUNNING, e, t)
            self.set_act(e, MUTATOR, t, c)

    def on_stop_thread(self, i, t, e, a):
        c, reason = a
        if self.eng_ctx[e] == c:
            self.eng_ctx[e] = None
        if self.gc_open[e] is not None:
            self.gc_saved[e] = (IDLE, None)
            self.gc_paused[e] = None
        else:
            self.set_act(e, IDLE, t)
        if reason == StopReason.FINISHED:
            self.set_phase(c, None, None, t)
            tl = self.contexts.get(c)
            if tl is not None:
                tl.finished = t
            self.finished_ids.add(c)
            self.frames.pop(c, None)
        elif reason == StopReason.BLOCKED:
            cur = self.phase.get(c)
            if cur is None or cur[0] != BLOCKED:
                self.set_phase(c, BLOCKED, None, t)
        else:
            self.set_phase(c, RUNNABLE, None, t)

    def on_thread_runnable(self, i, t, e, a):
        c = a[0]
        if c not in self.finished_ids:
            self.set_phase(c, RUNNABLE, None, t)
        self.enabling(t)

    def _take_spark(self, i, t, e, c, s, source):
        if self.episode[e] is not None:
            self.close_episode(e, t, source)
        cj = self.sparks.get(s)
        if cj is not None:
            if s in self.consumed:
                raise InconsistentLinkage(f"spark {s:#x} consumed twice", i)
            self.consumed.add(s)
        if self.eng_ctx[e] is not None and self.eng_ctx[e] == c:
            if cj is not None:
                cj.exec_start = t
                cj.context = c
                self.frames.setdefault(c, []).append(cj)
        else:
            if self.gc_open[e] is None:
                self.set_act(e, IDLE, t)
            if cj is not None:
                self.pending_spark[e] = (cj, c)

    def on_run_spark(self, i, t, e, a):
        self._take_spark(i, t, e, a[0], a[1], "local_spark")

    def on_steal_spark(self, i, t, e, a):
        if a[2] == e:
            raise InconsistentLinkage("spark stolen from own engine", i)
        self._take_spark(i, t, e, a[0], a[1], "steal_spark")

    def on_create_spark_thread(self, i, t, e, a):
        c = a[0]
        tl = self.contexts.get(c)
        cls = REUSED if (tl is not None and c in self.finished_ids) else NEW
        self.spark_threads.append(SparkThread(t, e, c, cls))
        self.ctx_new(c, t)
        p = self.pending_spark.pop(e, None)
        if p is not None:
            cj, _named = p
            cj.exec_start = t
            cj.context = c
            self.frames[c] = [cj]
        else:
            self.frames[c] = []

    def on_gc_start(self, i, t, e, a):
        if self.gc_open[e] is not None:
            return
        self.gc_open[e] = t
        cur = self.act[e]
        self.gc_saved[e] = (cur[0], cur[2])
        c = self.eng_ctx[e]
        if c is not None and self.phase.get(c, [None])[0] == RUNNING:
            self.gc_paused[e] = c
            self.set_phase(c, RUNNABLE, None, t)
        self.set_act(e, GC, t)

    def on_gc_end(self, i, t, e, a):
        g = self.gc_open[e]
        if g is None:
            return
        self.gc_intervals[e].append((g, t))
        self.gc_open[e] = None
        label, ctx = self.gc_saved[e]
        self.gc_saved[e] = None
        self.set_act(e, label, t, ctx)
        c = self.gc_paused[e]
        self.gc_paused[e] = None
        if c is not None and self.eng_ctx[e] == c:
            self.set_phase(c, RUNNING, e, t)

    def on_start_conj(self, i, t, e, a):
        d, static = a
        c = self.eng_ctx[e]
        if c is None:
            raise InconsistentLinkage("START_PAR_CONJUNCTION with no running context", i)
        st = self.frames.setdefault(c, [])
        parent = st[-1] if st else None
        conj = Conjunction(d, static, t, e, c, parent)
        if d in self.by_id:
            raise InconsistentLinkage(f"conjunction id {d} started twice", i)
        self.by_id[d] = conj
        self.conjs.append(conj)
        if parent is not None:
            parent.children.append(conj)
        first = Conjunct(conj, 1, None, t, exec_start=t, context=c)
        conj.conjuncts.append(first)
        st.append(first)
        for f in self.pending_futures.pop(e, []):
            f.conjunction = conj
            conj.futures.append(f)

    def _conj(self, d, i) -> Conjunction:
        conj = self.by_id.get(d)
        if conj is None:
            raise InconsistentLinkage(f"conjunction id {d} never started", i)
        return conj

    def on_create_spark(self, i, t, e, a):
        s, d = a
        conj = self._conj(d, i)
        if s in self.sparks:
            raise InconsistentLinkage(f"spark {s:#x} created twice", i)
        cj = Conjunct(conj, len(conj.conjuncts) + 1, s, t)
        conj.conjuncts.append(cj)
        self.sparks[s] = cj
        self.enabling(t)

    def on_end_conjunct(self, i, t, e, a):
        d = a[0]
        c = self.eng_ctx[e]
        st = self.frames.get(c) if c is not None else None
        if not st or st[-1].conjunction.id != d:
            raise DanglingConjunct(
                f"END_PAR_CONJUNCT({d}) but engine {e} is not executing that conjunction", i)
        cj = st.pop()
        cj.end = t
        cj.end_engine = e
        cj.conjunction.last_end_engine = e

    def on_end_conj(self, i, t, e, a):
        conj = self._conj(a[0], i)
        conj.end = t
        conj.end_engine = e

    def on_future_create(self, i, t, e, a):
        f = Future(a[0], a[1], None, t)
        self.futures[f.id] = f
        self.pending_futures.setdefault(e, []).append(f)

    def _top(self, e):
        c = self.eng_ctx[e]
        st = self.frames.get(c) if c is not None else None
        return c, (st[-1] if st else None)

    def _future(self, f, i) -> Future:
        fut = self.futures.get(f)
        if fut is None:
            raise InconsistentLinkage(f"future {f} never created", i)
        return fut

    def on_signal(self, i, t, e, a):
        fut = self._future(a[0], i)
        c, top = self._top(e)
        fut.signal_chain, fut.producer = _chain(top, fut.conjunction)
        fut.signal_time = t
        waiters = self.blocked_on.pop(fut.id, None)
        fut.waited = bool(waiters)
        if waiters:
            for w in sorted(waiters):
                cur = self.phase.get(w)
                if cur is not None and cur[0] == BLOCKED and cur[2] == fut.id:
                    self.set_phase(w, RUNNABLE, None, t)

    def _wait(self, i, t, e, a, suspended):
        fut = self._future(a[0], i)
        c, top = self._top(e)
        chain, consumer = _chain(top, fut.conjunction)
        first = False
        if consumer is not None:
            key = (fut.id, consumer.position)
            if key not in self.first_seen:
                self.first_seen.add(key)
                first = True
        fut.waits.append(Wait(t, suspended, chain, consumer, first))
        if suspended and c is not None:
            self.set_phase(c, BLOCKED, fut.id, t)
            self.blocked_on.setdefault(fut.id, set()).add(c)

    def on_wait_no_suspend(self, i, t, e, a):
        self._wait(i, t, e, a, False)

    def on_wait_suspend(self, i, t, e, a):
        self._wait(i, t, e, a, True)

    def on_try(self, i, t, e, a, kind):
        ep = self.episode[e]
        if ep is None:
            ep = IdleEpisode(e, t, after_sleep=self.sleeping[e],
                             enabling=self.sleep_enabling[e] if self.sleeping[e] else None)
            self.episode[e] = ep
            self.episodes.append(ep)
            if self.sleeping[e]:
                self.sleeping[e] = False
                self.sleep_enabling[e] = None
                if e in self.awaiting:
                    self.awaiting.remove(e)
            if self.gc_open[e] is None:
                self.set_act(e, SEARCHING, t)
        ep.last_try = kind

    def on_sleep(self, i, t, e, a):
        self.close_episode(e, t, None)
        if self.gc_open[e] is None:
            self.set_act(e, IDLE, t)
        self.sleeping[e] = True
        self.sleep_enabling[e] = None
        self.awaiting.append(e)


_DISPATCH = {
    CREATE_THREAD: _Builder.on_create_thread,
    RUN_THREAD: _Builder.on_run_thread,
    STOP_THREAD: _Builder.on_stop_thread,
    THREAD_RUNNABLE: _Builder.on_thread_runnable,
    RUN_SPARK: _Builder.on_run_spark,
    STEAL_SPARK: _Builder.on_steal_spark,
    CREATE_SPARK_THREAD: _Builder.on_create_spark_thread,
    GC_START: _Builder.on_gc_start,
    GC_END: _Builder.on_gc_end,
    START_PAR_CONJUNCTION: _Builder.on_start_conj,
    END_PAR_CONJUNCTION: _Builder.on_end_conj,
    CREATE_SPARK: _Builder.on_create_spark,
    END_PAR_CONJUNCT: _Builder.on_end_conjunct,
    FUTURE_CREATE: _Builder.on_future_create,
    FUTURE_SIGNAL: _Builder.on_signal,
    FUTURE_WAIT_NO_SUSPEND: _Builder.on_wait_no_suspend,
    FUTURE_WAIT_SUSPEND: _Builder.on_wait_suspend,
    TRY_GET_RUNNABLE_CONTEXT: lambda b, i, t, e, a: b.on_try(i, t, e, a, TRY_GET_RUNNABLE_CONTEXT),
    TRY_GET_LOCAL_SPARK: lambda b, i, t, e, a: b.on_try(i, t, e, a, TRY_GET_LOCAL_SPARK),
    TRY_STEAL_SPARK: lambda b, i, t, e, a: b.on_try(i, t, e, a, TRY_STEAL_SPARK),
    ENGINE_WILL_SLEEP: _Builder.on_sleep,
}


@gc_paused
def build_model(trace: CanonicalTrace) -> ExecutionModel:
    return _Builder(trace).run()


def context_reuse_classification(model: ExecutionModel, event) -> str:
    """NEW or REUSED for a CREATE_SPARK_THREAD event of the model's trace."""
    for st in model.spark_threads:
        if st.time == event.time and st.engine == event.engine and st.context == event.args[0]:
            return st.classification
    raise KeyError("event is not a CREATE_SPARK_THREAD of this model")


def conjunct_phases(model: ExecutionModel, cj: Conjunct):
    """Phase intervals of a conjunct between its execution start and end."""
    if cj.exec_start is None or cj.context is None:
        return []
    end = cj.end if cj.end is not None else model.end
    tl = model.contexts.get(cj.context)
    if tl is None:
        return []
    return tl.clip(cj.exec_start, end)


def precedes(a: Conjunct, b: Conjunct) -> bool:
    """True if ``a`` comes logically before ``b``.

    That holds when some ancestor-or-self of ``a`` sits left of some
    ancestor-or-self of ``b`` in one conjunction.
    """
    pos_b: dict[int, int] = {}
    x: Optional[Conjunct] = b
    while x is not None:
        pos_b[x.conjunction.id] = x.position
        x = x.conjunction.parent
    x = a
    while x is not None:
        p = pos_b.get(x.conjunction.id)
        if p is not None:
            return x.position < p
        x = x.conjunction.parent
    return False


def render_model(model: ExecutionModel) -> str:
    """Human-readable dump of a model."""
    lines = [f"engines: {model.n_engines}  span: {model.start}..{model.end} ns"]
    for e, ivs in enumerate(model.engines):
        busy = sum(b - a for a, b, lab, _ in ivs if lab == MUTATOR)
        gc = sum(b - a for a, b, lab, _ in ivs if lab == GC)
        lines.append(f"  engine {e}: {len(ivs)} intervals, mutator {busy} ns, gc {gc} ns")
    lines.append(f"contexts: {len(model.contexts)}")
    lines.append(f"conjunctions: {len(model.conjunctions)}")

    def walk(conj: Conjunction, depth: int):
        pad = "  " * (depth + 1)
        end = conj.end if conj.end is not None else "?"
        lines.append(f"{pad}#{conj.id} {conj.static_id} [{conj.start}..{end}]"
                     f" engine {conj.start_engine}->{conj.end_engine}")
        for cj in conj.conjuncts:
            spark = f"spark {cj.spark:#x}" if cj.spark is not None else "direct"
            lines.append(f"{pad}  conjunct {cj.position}: {spark}, ctx {cj.context},"
                         f" created {cj.spark_created}, start {cj.exec_start}, end {cj.end}")
            for child in cj.children:
                walk(child, depth + 2)
        for f in conj.futures:
            lines.append(f"{pad}  future {f.id} '{f.name}': signal {f.signal_time},"
                         f" {len(f.waits)} waits")

    for root in model.roots:
        walk(root, 0)
    ok = sum(1 for ep in model.episodes if ep.succeeded)
    lines.append(f"idle episodes: {len(model.episodes)} ({ok} found work)")
    return "\n".join(lines)
