"""
Discrete-event simulation of a spark-based dependent-AND-parallel runtime.

Scheduling model
----------------
* Engine 0 starts the main context at time 0; every other engine starts
  searching for work.
* A parallel conjunction allocates a barrier address and one address per
  future, posts FUTURE_CREATE for each future and START_PAR_CONJUNCTION, then
  runs conjunct 1 in the current context.  Conjunct k spawns the spark for
  conjunct k+1 onto its engine's local queue as its first action.
* A finished conjunct reports to the barrier.  The original context blocks
  there if others are outstanding; the last finisher resumes it according to
  ``resume_policy``.
* Idle engines probe the global runnable queue, their own spark queue (LIFO)
  and then the other engines' queues (oldest first), posting a TRY event
  before each probe.  After three failures they retry if work they could take
  exists, otherwise they sleep.  Every CREATE_SPARK and THREAD_RUNNABLE wakes
  all sleeping engines after ``wakeup_latency_ns``.
* Garbage collection stops the world: all pending activity is postponed by
  the collection's duration.

Steps that happen at the same instant run in engine order, and effects on a
different engine always take at least one nanosecond, so processing order
equals the (time, engine) order that analysis imposes on the log.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from ..eventlog import (
    CREATE_SPARK,
    CREATE_SPARK_THREAD,
    CREATE_THREAD,
    END_PAR_CONJUNCT,
    END_PAR_CONJUNCTION,
    ENGINE_WILL_SLEEP,
    Event,
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
    encode_log,
)
from .records import (
    GroundTruth,
    TrueConjunct,
    TrueConjunction,
    TrueEpisode,
    TrueFuture,
    TrueWait,
)
from .workload import ConjunctionSpec, WorkloadSpec, validate_spec

BARRIER_BASE = 0x10000
FUTURE_BASE = 0x80000

# op codes
WORK, SPAWN, SIGNAL, WAIT, CALL, END, FINISH_MAIN, FINISH_BG = range(8)

# heap item kinds
RESUME, PROBE, WAKE, START_MAIN, SEARCH, BG_ARRIVE, GC_BEGIN, GC_FINISH = range(8)

IDLE, SEARCHING, MUTATOR, GC = "IDLE", "SEARCHING", "MUTATOR", "GC"
RUNNING, RUNNABLE, BLOCKED = "RUNNING", "RUNNABLE", "BLOCKED"


class SimulationError(RuntimeError):
    pass


@dataclass
class _Activation:
    ops: tuple
    pc: int = 0
    run: Optional["_ConjRun"] = None
    conjunct: Optional[TrueConjunct] = None


@dataclass(eq=False)
class _Context:
    id: int
    stack: list[_Activation] = field(default_factory=list)
    pending_barrier: Optional["_ConjRun"] = None


@dataclass(eq=False)
class _ConjRun:
    rec: TrueConjunction
    spec: ConjunctionSpec
    ops: list[tuple]
    origin: _Context
    barrier: int
    barrier_index: int
    future_indices: list[int]
    futures: list[TrueFuture]
    signalled: list[bool]
    waiters: list[list[_Context]]
    done: int = 0


class _Engine:
    __slots__ = ("id", "ctx", "sparks", "buf", "sleeping", "wake_pending", "enabling",
                 "spark_seq", "episode", "activity", "gc_saved", "gc_stopped")

    def __init__(self, i: int):
        self.id = i
        self.ctx: Optional[_Context] = None
        self.sparks: deque = deque()
        self.buf: list[Event] = []
        self.sleeping = False
        self.wake_pending = False
        self.enabling: Optional[int] = None
        self.spark_seq = 0
        self.episode: Optional[TrueEpisode] = None
        self.activity = [IDLE, 0]
        self.gc_saved: Optional[str] = None
        self.gc_stopped: Optional[_Context] = None


def _compile(spec: ConjunctionSpec, overhead: int) -> list[tuple]:
    n = len(spec.conjuncts)
    var_index = {v: i for i, v in enumerate(spec.futures)}
    out = []
    for k, cj in enumerate(spec.conjuncts, start=1):
        ops: list[tuple] = []
        if k < n:
            ops.append((SPAWN,))
            if overhead:
                ops.append((WORK, overhead, False))
        pos = 0
        for a in cj.ordered_actions():
            if a.at_ns > pos:
                ops.append((WORK, a.at_ns - pos, True))
                pos = a.at_ns
            if a.kind == "signal":
                ops.append((SIGNAL, var_index[a.target]))
            elif a.kind == "wait":
                ops.append((WAIT, var_index[a.target]))
            else:
                ops.append((CALL, a.target))
        if cj.work_ns > pos:
            ops.append((WORK, cj.work_ns - pos, True))
        ops.append((END,))
        out.append(tuple(ops))
    return out


class Simulator:
    def __init__(self, spec: WorkloadSpec):
        validate_spec(spec)
        self.spec = spec
        sp = spec.scheduler
        self.sched = sp
        self.n = spec.n_engines
        self.rng = random.Random(spec.seed)
        self.engines = [_Engine(i) for i in range(self.n)]
        self.heap: list = []
        self.seq = 0
        self.now = 0
        self.stopped = False
        self.truth = GroundTruth(self.n)
        self.truth.activity = [[] for _ in range(self.n)]
        self.phase: dict[int, list] = {}
        self.compiled = {name: _compile(c, sp.spark_overhead_ns)
                         for name, c in spec.conjunctions.items()}
        self.global_queue: deque = deque()
        self.pool: list[int] = []
        self.next_ctx = 1
        self.barrier_free: deque = deque(range(spec.barrier_pool))
        self.barrier_count = spec.barrier_pool
        self.future_free: deque = deque(range(spec.future_pool))
        self.future_count = spec.future_pool
        self.conj_count = 0
        self.top_events: list[Event] = []

    # -- scheduling ---------------------------------------------------
    def push(self, t: int, key: int, kind: int, payload=None):
        self.seq += 1
        heapq.heappush(self.heap, (t, key, self.seq, kind, payload))

    def post(self, e: int, kind: int, t: int, args=()):
        self.engines[e].buf.append(Event(kind, t, e, args))

    def set_activity(self, e: int, label: str, t: int):
        eng = self.engines[e]
        cur = eng.activity
        if cur[0] == label:
            return
        if t > cur[1]:
            self.truth.activity[e].append((cur[1], t, cur[0]))
        eng.activity = [label, t]

    def set_phase(self, c: int, ph: Optional[str], t: int, detail=None):
        cur = self.phase.get(c)
        if cur is not None:
            if cur[0] == ph and cur[2] == detail:
                return
            if t > cur[1]:
                self.truth.phases.setdefault(c, []).append((cur[1], t, cur[0], cur[2]))
        if ph is None:
            self.phase.pop(c, None)
        else:
            self.phase[c] = [ph, t, detail]

    def work_time(self, d: int, jitter: bool) -> int:
        j = self.sched.jitter_ns
        if jitter and j:
            return d + self.rng.randint(0, j)
        return d

    # -- contexts -----------------------------------------------------
    def new_context(self) -> tuple[_Context, bool]:
        if self.pool:
            return _Context(self.pool.pop()), True
        c = _Context(self.next_ctx)
        self.next_ctx += 1
        return c, False

    def retire_context(self, ctx: _Context, e: int, t: int):
        self.post(e, STOP_THREAD, t, (ctx.id, StopReason.FINISHED))
        self.set_phase(ctx.id, None, t)
        if len(self.pool) < self.sched.context_pool_size:
            self.pool.append(ctx.id)
        self.engines[e].ctx = None
        self.set_activity(e, IDLE, t)

    def make_runnable(self, ctx: _Context, e: int, t: int, affinity: Optional[int] = None):
        self.post(e, THREAD_RUNNABLE, t, (ctx.id,))
        self.set_phase(ctx.id, RUNNABLE, t)
        self.global_queue.append((ctx, affinity))
        self.broadcast(t)

    def broadcast(self, t: int):
        lat = self.sched.wakeup_latency_ns
        for eng in self.engines:
            if eng.sleeping and not eng.wake_pending:
                eng.wake_pending = True
                eng.enabling = t
                self.push(t + lat, eng.id, WAKE)

    # -- run loop -----------------------------------------------------
    def run(self) -> GroundTruth:
        self.top_events.append(Event(STARTUP, 0, None, (self.n,)))
        self.push(0, 0, START_MAIN)
        for e in range(1, self.n):
            self.push(0, e, SEARCH)
        for b in self.spec.background:
            self.push(b.at_ns, 0, BG_ARRIVE, b.work_ns)
        if self.spec.gc is not None:
            self.push(self.spec.gc.first, -1, GC_BEGIN)
        heap = self.heap
        while heap and not self.stopped:
            t, key, _, kind, payload = heapq.heappop(heap)
            self.now = t
            if kind == RESUME:
                self.run_ops(key, payload, t)
            elif kind == PROBE:
                self.probe(key, payload, t)
            elif kind == WAKE:
                eng = self.engines[key]
                eng.wake_pending = False
                if eng.sleeping:
                    eng.sleeping = False
                    self.search_start(key, t, True, eng.enabling)
            elif kind == SEARCH:
                self.search_start(key, t, False, None)
            elif kind == START_MAIN:
                ctx, _ = self.new_context()
                self.post(0, CREATE_THREAD, t, (ctx.id,))
                self.set_phase(ctx.id, RUNNABLE, t)
                ctx.stack.append(_Activation(self.main_ops()))
                self.dispatch(0, ctx, t)
            elif kind == BG_ARRIVE:
                ctx, _ = self.new_context()
                ctx.stack.append(_Activation(((WORK, payload, True), (FINISH_BG,))))
                self.post(0, CREATE_THREAD, t, (ctx.id,))
                self.make_runnable(ctx, 0, t)
            elif kind == GC_BEGIN:
                self.gc_begin(t)
            elif kind == GC_FINISH:
                self.gc_finish(t, payload)
        if not self.stopped:
            raise SimulationError("simulation ran out of work before the main context finished")
        return self.finish()

    def main_ops(self) -> tuple:
        ops: list[tuple] = []
        for s in self.spec.main:
            if s.conj is None:
                ops.append((WORK, s.work_ns, True))
            else:
                ops.extend([(CALL, s.conj)] * s.repeat)
        ops.append((FINISH_MAIN,))
        return tuple(ops)

    def finish(self) -> GroundTruth:
        T = self.now
        tr = self.truth
        tr.end = T
        for e, eng in enumerate(self.engines):
            label, since = eng.activity
            if T > since:
                tr.activity[e].append((since, T, label))
        for c, (ph, since, detail) in self.phase.items():
            if T > since:
                tr.phases.setdefault(c, []).append((since, T, ph, detail))
        self.phase = {}
        tr.raw_barriers = {BARRIER_BASE + 64 * i for i in range(self.barrier_count)}
        tr.raw_futures = {FUTURE_BASE + 32 * i for i in range(self.future_count)}
        return tr

    # -- contexts on engines -------------------------------------------
    def dispatch(self, e: int, ctx: _Context, t: int):
        """RUN_THREAD ``ctx`` on engine ``e`` and continue it."""
        eng = self.engines[e]
        eng.ctx = ctx
        self.post(e, RUN_THREAD, t, (ctx.id,))
        self.set_phase(ctx.id, RUNNING, t, e)
        self.set_activity(e, MUTATOR, t)
        if ctx.pending_barrier is not None:
            run = ctx.pending_barrier
            ctx.pending_barrier = None
            self.end_conjunction(e, run, t)
        self.run_ops(e, ctx, t)

    def run_ops(self, e: int, ctx: _Context, t: int):
        while True:
            act = ctx.stack[-1]
            op = act.ops[act.pc]
            act.pc += 1
            code = op[0]
            if code == WORK:
                self.push(t + self.work_time(op[1], op[2]), e, RESUME, ctx)
                return
            if code == SPAWN:
                self.spawn(e, act, t)
            elif code == SIGNAL:
                self.signal(e, act, op[1], t)
            elif code == WAIT:
                if not self.wait(e, ctx, act, op[1], t):
                    return
            elif code == CALL:
                self.start_conjunction(e, ctx, op[1], t)
            elif code == END:
                if not self.end_conjunct(e, ctx, act, t):
                    return
            elif code == FINISH_MAIN:
                self.post(e, STOP_THREAD, t, (ctx.id, StopReason.FINISHED))
                self.set_phase(ctx.id, None, t)
                self.engines[e].ctx = None
                self.set_activity(e, IDLE, t)
                self.top_events.append(Event(SHUTDOWN, t, None, ()))
                self.stopped = True
                return
            elif code == FINISH_BG:
                ctx.stack.pop()
                self.retire_context(ctx, e, t)
                self.search_start(e, t, False, None)
                return

    def start_conjunction(self, e: int, ctx: _Context, name: str, t: int):
        spec = self.spec.conjunctions[name]
        if not self.barrier_free:
            self.barrier_free.append(self.barrier_count)
            self.barrier_count += 1
        bi = self.barrier_free.popleft()
        barrier = BARRIER_BASE + 64 * bi
        parent_act = ctx.stack[-1]
        self.conj_count += 1
        rec = TrueConjunction(self.conj_count, name, spec.static_id, t, e, ctx.id,
                              parent_act.conjunct, barrier)
        if parent_act.conjunct is not None:
            parent_act.conjunct.children.append(rec)
        fidx, futs = [], []
        for v in spec.futures:
            if not self.future_free:
                self.future_free.append(self.future_count)
                self.future_count += 1
            fi = self.future_free.popleft()
            addr = FUTURE_BASE + 32 * fi
            f = TrueFuture(len(self.truth.futures) + 1, v, rec, addr, t)
            self.truth.futures.append(f)
            self.post(e, FUTURE_CREATE, t, (addr, v))
            fidx.append(fi)
            futs.append(f)
        rec.futures = futs
        self.post(e, START_PAR_CONJUNCTION, t, (barrier, spec.static_id))
        self.truth.conjunctions.append(rec)
        run = _ConjRun(rec, spec, self.compiled[name], ctx, barrier, bi, fidx, futs,
                       [False] * len(futs), [[] for _ in futs])
        first = TrueConjunct(rec, 1, None, t, exec_start=t, context=ctx.id)
        rec.conjuncts.append(first)
        ctx.stack.append(_Activation(run.ops[0], run=run, conjunct=first))

    def spawn(self, e: int, act: _Activation, t: int):
        run = act.run
        eng = self.engines[e]
        eng.spark_seq += 1
        sid = (e << 48) | eng.spark_seq
        pos = act.conjunct.position + 1
        cj = TrueConjunct(run.rec, pos, sid, t)
        run.rec.conjuncts.append(cj)
        eng.sparks.append((sid, run, cj))
        self.post(e, CREATE_SPARK, t, (sid, run.barrier))
        self.broadcast(t)

    def signal(self, e: int, act: _Activation, vi: int, t: int):
        run = act.run
        f = run.futures[vi]
        self.post(e, FUTURE_SIGNAL, t, (f.address,))
        f.signal_time = t
        f.producer = act.conjunct
        run.signalled[vi] = True
        waiters = run.waiters[vi]
        f.waiters_at_signal = len(waiters)
        run.waiters[vi] = []
        for w in waiters:
            self.make_runnable(w, e, t)

    def wait(self, e: int, ctx: _Context, act: _Activation, vi: int, t: int) -> bool:
        """True if the context keeps running."""
        run = act.run
        f = run.futures[vi]
        seq = len(f.waits)
        if run.signalled[vi]:
            self.post(e, FUTURE_WAIT_NO_SUSPEND, t, (f.address,))
            f.waits.append(TrueWait(t, False, act.conjunct, seq))
            return True
        self.post(e, FUTURE_WAIT_SUSPEND, t, (f.address,))
        f.waits.append(TrueWait(t, True, act.conjunct, seq))
        self.post(e, STOP_THREAD, t, (ctx.id, StopReason.BLOCKED))
        self.set_phase(ctx.id, BLOCKED, t, f.id)
        run.waiters[vi].append(ctx)
        self.engines[e].ctx = None
        self.set_activity(e, IDLE, t)
        self.search_start(e, t, False, None)
        return False

    def end_conjunct(self, e: int, ctx: _Context, act: _Activation, t: int) -> bool:
        """True if ``ctx`` keeps running on ``e``."""
        run = act.run
        self.post(e, END_PAR_CONJUNCT, t, (run.barrier,))
        act.conjunct.end = t
        run.rec.last_end_engine = e
        run.done += 1
        ctx.stack.pop()
        all_done = run.done == len(run.spec.conjuncts)
        origin = run.origin
        if ctx is origin:
            if all_done:
                self.end_conjunction(e, run, t)
                return True
            self.post(e, STOP_THREAD, t, (ctx.id, StopReason.BLOCKED))
            self.set_phase(ctx.id, BLOCKED, t)
            ctx.pending_barrier = run
            self.engines[e].ctx = None
            self.set_activity(e, IDLE, t)
            self.search_start(e, t, False, None)
            return False
        self.retire_context(ctx, e, t)
        if all_done:
            policy = self.sched.resume_policy
            if policy == "LAST_ENGINE":
                self.dispatch(e, origin, t)
                return False
            affinity = run.rec.start_engine if policy == "BEFORE_ENGINE" else None
            self.make_runnable(origin, e, t, affinity)
        self.search_start(e, t, False, None)
        return False

    def end_conjunction(self, e: int, run: _ConjRun, t: int):
        self.post(e, END_PAR_CONJUNCTION, t, (run.barrier,))
        run.rec.end = t
        run.rec.end_engine = e
        self.barrier_free.append(run.barrier_index)
        self.future_free.extend(run.future_indices)

    # -- idle search --------------------------------------------------
    def search_start(self, e: int, t: int, after_sleep: bool, enabling: Optional[int]):
        eng = self.engines[e]
        if eng.episode is None:
            ep = TrueEpisode(e, t, after_sleep, enabling if after_sleep else None)
            eng.episode = ep
            self.truth.episodes.append(ep)
        self.post(e, TRY_GET_RUNNABLE_CONTEXT, t)
        self.set_activity(e, SEARCHING, t)
        self.push(t + self.sched.probe_latency_ns, e, PROBE, 0)

    def end_episode(self, e: int, t: int, source: Optional[str]):
        eng = self.engines[e]
        ep = eng.episode
        ep.end = t
        ep.source = source
        eng.episode = None

    def take_global(self, e: int) -> Optional[_Context]:
        q = self.global_queue
        for i, (ctx, aff) in enumerate(q):
            if aff is None or aff == e:
                del q[i]
                return ctx
        return None

    def takeable(self, e: int) -> bool:
        if any(aff is None or aff == e for _, aff in self.global_queue):
            return True
        return any(eng.sparks for eng in self.engines)

    def probe(self, e: int, stage: int, t: int):
        eng = self.engines[e]
        if stage == 0:
            ctx = self.take_global(e)
            if ctx is not None:
                self.end_episode(e, t, "runnable_context")
                self.dispatch(e, ctx, t)
                return
            self.post(e, TRY_GET_LOCAL_SPARK, t)
            self.push(t + self.sched.probe_latency_ns, e, PROBE, 1)
        elif stage == 1:
            if eng.sparks:
                sid, run, cj = eng.sparks.pop()
                self.end_episode(e, t, "local_spark")
                ctx = self.spark_context(e, t, RUN_SPARK, (sid,), run, cj)
                self.run_ops(e, ctx, t)
                return
            self.post(e, TRY_STEAL_SPARK, t)
            self.push(t + self.sched.steal_latency_ns, e, PROBE, 2)
        else:
            for k in range(1, self.n):
                v = (e + k) % self.n
                victim = self.engines[v]
                if victim.sparks:
                    sid, run, cj = victim.sparks.popleft()
                    self.end_episode(e, t, "steal_spark")
                    ctx = self.spark_context(e, t, STEAL_SPARK, (sid, v), run, cj)
                    self.run_ops(e, ctx, t)
                    return
            if self.takeable(e):
                self.post(e, TRY_GET_RUNNABLE_CONTEXT, t)
                self.push(t + self.sched.probe_latency_ns, e, PROBE, 0)
                return
            self.post(e, ENGINE_WILL_SLEEP, t)
            self.end_episode(e, t, None)
            self.set_activity(e, IDLE, t)
            eng.sleeping = True
            eng.enabling = None

    def spark_context(self, e, t, kind, extra, run, cj) -> _Context:
        ctx, reused = self.new_context()
        self.post(e, kind, t, (ctx.id,) + extra)
        self.post(e, CREATE_SPARK_THREAD, t, (ctx.id,))
        self.truth.spark_threads.append((t, e, ctx.id, reused))
        self.post(e, RUN_THREAD, t, (ctx.id,))
        cj.exec_start = t
        cj.context = ctx.id
        ctx.stack.append(_Activation(run.ops[cj.position - 1], run=run, conjunct=cj))
        eng = self.engines[e]
        eng.ctx = ctx
        self.set_phase(ctx.id, RUNNING, t, e)
        self.set_activity(e, MUTATOR, t)
        return ctx

    # -- garbage collection --------------------------------------------
    def gc_begin(self, t: int):
        if not self.heap:
            raise SimulationError("no runnable activity left; the workload cannot finish")
        d = self.spec.gc.duration_ns
        for eng in self.engines:
            e = eng.id
            if eng.ctx is not None:
                self.post(e, STOP_THREAD, t, (eng.ctx.id, StopReason.GC_HEAP_FULL))
                self.set_phase(eng.ctx.id, RUNNABLE, t)
                eng.gc_stopped = eng.ctx
            self.post(e, GC_START, t)
            eng.gc_saved = eng.activity[0]
            self.set_activity(e, GC, t)
        # adding a constant to every key keeps the heap ordered
        self.heap[:] = [(it[0] + d,) + it[1:] for it in self.heap]
        self.push(t + d, -1, GC_FINISH, t)

    def gc_finish(self, t: int, began: int):
        self.truth.gc.append((began, t))
        for eng in self.engines:
            e = eng.id
            self.post(e, GC_END, t)
            self.set_activity(e, eng.gc_saved, t)
            eng.gc_saved = None
            if eng.gc_stopped is not None:
                c = eng.gc_stopped
                eng.gc_stopped = None
                self.post(e, RUN_THREAD, t, (c.id,))
                self.set_phase(c.id, RUNNING, t, e)
                self.set_activity(e, MUTATOR, t)
        self.push(began + self.spec.gc.period_ns, -1, GC_BEGIN)

    # -- output -------------------------------------------------------
    def file_events(self, chunk: int = 512) -> list[Event]:
        """Events in file order: per-engine buffers cut into chunks, ordered by time."""
        pieces = []
        for eng in self.engines:
            buf = eng.buf
            for i in range(0, len(buf), chunk):
                part = buf[i:i + chunk]
                pieces.append((part[0].time, eng.id, i, part))
        pieces.sort(key=lambda p: p[:3])
        out = [self.top_events[0]]
        for p in pieces:
            out.extend(p[3])
        out.extend(self.top_events[1:])
        return out


@dataclass
class SimulationResult:
    log: bytes
    events: list[Event]
    truth: GroundTruth


def simulate(spec: WorkloadSpec, chunk: int = 512) -> SimulationResult:
    """Run ``spec`` and return the encoded log, the emitted events and the truth."""
    sim = Simulator(spec)
    truth = sim.run()
    events = sim.file_events(chunk)
    truth.event_count = len(events)
    return SimulationResult(encode_log(None, events), events, truth)
