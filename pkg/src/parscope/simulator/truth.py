"""
Expected report values computed directly from simulator records.

Nothing here reuses the analyzer's algorithms: curves are re-evaluated from
scratch at every breakpoint, out-of-order relations are checked pair by pair,
and phase times come from the simulator's own state bookkeeping.  Only the
output layout and SummaryStats are shared so documents compare field by field.
"""

from __future__ import annotations

from bisect import bisect_right
from fractions import Fraction
from typing import Optional

from ..stats import SummaryStats, to_json_number
from .records import GroundTruth, TrueConjunct, TrueConjunction

SCHEMA = "parscope.report/1"
CURVES = ("parconj_runnable_self", "parconj_runnable_self_and_desc", "parconj_running_self",
          "parconj_running_self_and_desc", "parconj_avail_cpus")


def _div(a: int, b: int) -> Optional[float]:
    return None if b == 0 else a / b


class _Lookup:
    """Point queries on one entity's disjoint, sorted (start, end, state, detail) list."""

    def __init__(self, intervals):
        self.ivs = intervals
        self.starts = [iv[0] for iv in intervals]

    def at(self, t: int):
        i = bisect_right(self.starts, t) - 1
        if i >= 0:
            s, e, st, d = self.ivs[i]
            if s <= t < e:
                return st, d
        return None, None


def _curve_doc(values: list[tuple[int, int]], end: int) -> dict:
    points: list[list[int]] = []
    for t, v in values:
        if points and points[-1][1] == v:
            continue
        if points and points[-1][0] == t:
            points[-1][1] = v
            if len(points) > 1 and points[-2][1] == v:
                points.pop()
            continue
        points.append([t, v])
    integral = 0
    mx = None
    for i, (t, v) in enumerate(points):
        t1 = points[i + 1][0] if i + 1 < len(points) else end
        if t1 > t:
            integral += (t1 - t) * v
            mx = v if mx is None else max(mx, v)
    if mx is None:
        mx = points[0][1]
    span = end - points[0][0]
    avg = Fraction(integral, span) if span > 0 else None
    return {"points": points, "end_ns": end, "max": mx, "integral": integral,
            "time_weighted_avg": to_json_number(avg), "_avg": avg}


class TruthReport:
    def __init__(self, truth: GroundTruth, count_sparks: bool = True,
                 mutator_only: bool = False, csc_count: Optional[int] = None,
                 conj_csc: Optional[dict] = None, static_filter=None):
        self.t = truth
        self.count_sparks = count_sparks
        self.mutator_only = mutator_only
        self.csc = csc_count
        self.conj_csc = conj_csc or {}
        self.static_filter = static_filter
        self.ctx = {c: _Lookup(ivs) for c, ivs in truth.phases.items()}
        self.eng = [_Lookup([(a, b, lab, None) for a, b, lab in ivs]) for ivs in truth.activity]

    # ---------------------------------------------------------- helpers
    def phase(self, ctx: Optional[int], t: int) -> Optional[str]:
        lk = self.ctx.get(ctx)
        return lk.at(t)[0] if lk is not None else None

    def cpus_at(self, t: int) -> int:
        labels = ("MUTATOR",) if self.mutator_only else ("MUTATOR", "GC")
        return sum(1 for lk in self.eng if lk.at(t)[0] in labels)

    def cpus_doc(self) -> dict:
        tr = self.t
        bps = {tr.start}
        for ivs in tr.activity:
            for a, b, _ in ivs:
                bps.add(a)
                bps.add(b)
        vals = [(t, self.cpus_at(t)) for t in sorted(bps) if tr.start <= t < tr.end]
        if not vals:
            vals = [(tr.start, 0)]
        return _curve_doc(vals, tr.end)

    @staticmethod
    def subtree(conj: TrueConjunction) -> list[TrueConjunct]:
        out = []
        todo = [conj]
        while todo:
            c = todo.pop()
            for cj in c.conjuncts:
                out.append(cj)
                todo.extend(cj.children)
        return out

    def conjunct_phase(self, cj: TrueConjunct, t: int) -> Optional[str]:
        """RUNNING/RUNNABLE/BLOCKED while executing, SPARK while queued, else None."""
        if cj.spark is not None and cj.created <= t and (cj.exec_start is None or t < cj.exec_start):
            return "SPARK"
        end = cj.end if cj.end is not None else self.t.end
        if cj.exec_start is not None and cj.exec_start <= t < end:
            return self.phase(cj.context, t)
        return None

    # ---------------------------------------------------------- curves
    def instance_curves(self, conj: TrueConjunction) -> dict[str, dict]:
        s, e = conj.start, conj.end
        own = conj.conjuncts
        sub = self.subtree(conj)
        bps = {s}
        ctxs = {cj.context for cj in sub if cj.context is not None}
        for c in ctxs:
            for a, b, _, _ in self.t.phases.get(c, ()):
                bps.add(a)
                bps.add(b)
        for cj in sub:
            bps.update(x for x in (cj.created, cj.exec_start, cj.end) if x is not None)
        for ivs in self.t.activity:
            for a, b, _ in ivs:
                bps.add(a)
                bps.add(b)
        times = sorted(t for t in bps if s <= t < e)
        cols = {k: [] for k in CURVES}
        n = self.t.n_engines
        for t in times:
            run_s = rbl_s = 0
            for cj in own:
                ph = self.conjunct_phase(cj, t)
                if ph == "RUNNING":
                    run_s += 1
                    rbl_s += 1
                elif ph == "RUNNABLE" or (ph == "SPARK" and self.count_sparks):
                    rbl_s += 1
            running_ctx, runnable_ctx = set(), set()
            sparks = 0
            for cj in sub:
                ph = self.conjunct_phase(cj, t)
                if ph == "SPARK":
                    sparks += 1
                elif ph == "RUNNING":
                    running_ctx.add(cj.context)
                elif ph == "RUNNABLE":
                    runnable_ctx.add(cj.context)
            run_sd = len(running_ctx)
            rbl_sd = len(running_ctx | runnable_ctx) + (sparks if self.count_sparks else 0)
            cols["parconj_running_self"].append((t, run_s))
            cols["parconj_runnable_self"].append((t, rbl_s))
            cols["parconj_running_self_and_desc"].append((t, run_sd))
            cols["parconj_runnable_self_and_desc"].append((t, rbl_sd))
            cols["parconj_avail_cpus"].append((t, n - self.cpus_at(t) + run_sd))
        return {k: _curve_doc(v, e) for k, v in cols.items()}

    # ---------------------------------------------------------- sections
    def conj_section(self, sid: str, insts: list[TrueConjunction], npc) -> dict:
        done = [c for c in insts if c.end is not None and all(cj.end is not None for cj in c.conjuncts)]
        curves = {k: [] for k in CURVES}
        for c in done:
            for k, doc in self.instance_curves(c).items():
                curves[k].append(doc)
        times = SummaryStats.of([c.end - c.start for c in done])
        sec = {"instances": len(done), "truncated": len(insts) - len(done),
               "parconj_time": times.to_json()}
        for k in CURVES:
            sec[k] = {
                "max": SummaryStats.of([d["max"] for d in curves[k]]).to_json(),
                "avg": SummaryStats.of([d["_avg"] for d in curves[k] if d["_avg"] is not None]).to_json(),
            }
        before = sum(1 for c in done if c.start_engine == c.end_engine)
        last = sum(1 for c in done if c.last_end_engine == c.end_engine)
        sec["continue_on_before"] = {"observed": len(done), "same": before,
                                     "probability": _div(before, len(done))}
        sec["continue_on_last"] = {"observed": len(done), "same": last,
                                   "probability": _div(last, len(done))}
        sec["conjuncts"] = self.conjunct_section(done)
        sec["futures"] = self.future_section(done)
        if sid in self.conj_csc:
            n = self.conj_csc[sid]
            est = n * npc if npc is not None else None
            sec["csc"] = {
                "sequential_csc": n,
                "sequential_ns_estimate": to_json_number(est),
                "parallel_speedup_estimate": (to_json_number(Fraction(est) / times.mean)
                                              if est is not None and times.count and times.mean
                                              else None),
            }
        return sec

    def conjunct_section(self, done: list[TrueConjunction]) -> dict:
        per: dict[int, dict[str, list]] = {}
        keys = ("time_as_spark", "time_as_context", "time_blocked", "time_runnable",
                "time_running", "time_after", "signal_to_end", "waited_signal_to_end")
        for c in done:
            for cj in c.conjuncts:
                d = per.setdefault(cj.position, {k: [] for k in keys})
                tot = {"RUNNING": 0, "RUNNABLE": 0, "BLOCKED": 0}
                for a, b, ph, _ in self.t.phases.get(cj.context, ()):
                    lo, hi = max(a, cj.exec_start), min(b, cj.end)
                    if hi > lo:
                        tot[ph] += hi - lo
                created = c.start if cj.spark is None else cj.created
                d["time_as_spark"].append(cj.exec_start - created)
                d["time_as_context"].append(cj.end - cj.exec_start)
                d["time_blocked"].append(tot["BLOCKED"])
                d["time_runnable"].append(tot["RUNNABLE"])
                d["time_running"].append(tot["RUNNING"])
                d["time_after"].append(c.end - cj.end)
            for f in c.futures:
                if f.signal_time is None or f.producer is None:
                    continue
                d = per[f.producer.position]
                d["signal_to_end"].append(f.producer.end - f.signal_time)
                if f.waiters_at_signal:
                    d["waited_signal_to_end"].append(f.producer.end - f.signal_time)
        return {str(p): {k: SummaryStats.of(v).to_json() for k, v in per[p].items()}
                for p in sorted(per)}

    @staticmethod
    def _suspend(waits) -> dict:
        sus = sum(1 for w in waits if w.suspended)
        return {"signals_first": len(waits) - sus, "waits_first": sus,
                "p_suspend": _div(sus, len(waits))}

    def future_section(self, done: list[TrueConjunction]) -> dict:
        by_var: dict[str, list] = {}
        for c in done:
            for f in c.futures:
                by_var.setdefault(f.name, []).append(f)
        out = {}
        for var in sorted(by_var):
            all_w, first_w = [], []
            for f in by_var[var]:
                earliest: dict[int, object] = {}
                for w in f.waits:
                    cur = earliest.get(id(w.consumer))
                    if cur is None or (w.time, w.seq) < (cur.time, cur.seq):
                        earliest[id(w.consumer)] = w
                for w in f.waits:
                    all_w.append((f, w))
                first_w.extend((f, w) for w in earliest.values())
            signalled_all = [w.time - f.signal_time for f, w in all_w if f.signal_time is not None]
            signalled_first = [w.time - f.signal_time for f, w in first_w if f.signal_time is not None]
            out[var] = {
                "first_waits": SummaryStats.of(signalled_first).to_json(),
                "all_waits": SummaryStats.of(signalled_all).to_json(),
                "wait_count": len(signalled_all),
                "suspend_first": self._suspend([w for _, w in first_w]),
                "suspend_all": self._suspend([w for _, w in all_w]),
                "unsignalled_waits": sum(1 for f, _ in all_w if f.signal_time is None),
            }
        return out

    # ---------------------------------------------------------- out of order
    @staticmethod
    def before(a: TrueConjunct, b: TrueConjunct) -> bool:
        anc_a = []
        x = a
        while x is not None:
            anc_a.append(x)
            x = x.conj.parent
        y = b
        while y is not None:
            for xa in anc_a:
                if xa.conj is y.conj:
                    return xa.position < y.position
            y = y.conj.parent
        return False

    def out_of_order(self) -> dict:
        tr = self.t
        conjuncts = [cj for c in tr.conjunctions for cj in c.conjuncts]
        producer = {f.id: f.producer for f in tr.futures if f.producer is not None}
        # conjunct -> producers of the futures it waited for anywhere in the run
        waits_on: dict[int, set] = {}
        for f in tr.futures:
            if f.producer is None:
                continue
            for w in f.waits:
                waits_on.setdefault(id(w.consumer), set()).add(f.producer)

        def upstream(p: TrueConjunct) -> set:
            seen = {id(p): p}
            todo = [p]
            while todo:
                x = todo.pop()
                for q in waits_on.get(id(x), ()):
                    if id(q) not in seen:
                        seen[id(q)] = q
                        todo.append(q)
            return set(seen)

        tc_blockers = {fid: upstream(p) for fid, p in producer.items()}

        bps = set()
        for cj in conjuncts:
            for x in (cj.created, cj.exec_start, cj.end):
                if x is not None:
                    bps.add(x)
        for ivs in tr.phases.values():
            for a, b, _, _ in ivs:
                bps.add(a)
                bps.add(b)
        times = sorted(t for t in bps if tr.start <= t < tr.end)
        times.append(tr.end)
        spans = list(zip(times, times[1:]))
        # conjuncts alive (created..end) for a quick filter
        order = sorted(conjuncts, key=lambda c: c.created)
        t_run = t_ooo = t_dir = t_tc = 0
        k = 0
        alive: list[TrueConjunct] = []
        for t0, t1 in spans:
            while k < len(order) and order[k].created <= t0:
                alive.append(order[k])
                k += 1
            alive = [c for c in alive if c.end is None or c.end > t0]
            running, waiting = [], []
            for cj in alive:
                ph = self.conjunct_phase(cj, t0)
                if ph == "RUNNING":
                    running.append(cj)
                elif ph == "RUNNABLE" or (ph == "SPARK" and self.count_sparks):
                    waiting.append(cj)
            if not running:
                continue
            span = t1 - t0
            t_run += span
            pairs = [a for a in waiting if any(self.before(a, b) for b in running)]
            if not pairs:
                continue
            t_ooo += span
            blocked = set()
            for c, lk in self.ctx.items():
                st, d = lk.at(t0)
                if st == "BLOCKED" and d is not None:
                    blocked.add(d)
            if any(producer.get(f) is a for f in blocked for a in pairs):
                t_dir += span
            if any(id(a) in tc_blockers.get(f, ()) for f in blocked for a in pairs):
                t_tc += span
        return {"running_ns": t_run, "out_of_order_ns": t_ooo, "blocks_direct_ns": t_dir,
                "blocks_transitive_ns": t_tc, "p_out_of_order": _div(t_ooo, t_run),
                "p_blocks_direct": _div(t_dir, t_ooo), "p_blocks_transitive": _div(t_tc, t_ooo)}

    # ---------------------------------------------------------- idle
    def idle(self) -> dict:
        eps = self.t.episodes
        done = [e for e in eps if e.end is not None]
        ok = [e for e in done if e.source is not None]
        fail = [e for e in done if e.source is None]
        by = {"runnable_context": 0, "local_spark": 0, "steal_spark": 0}
        for e in ok:
            by[e.source] += 1
        return {
            "episodes": len(done),
            "successes": len(ok),
            "p_find_work": _div(len(ok), len(done)),
            "time_to_work": SummaryStats.of([e.end - e.start for e in ok]).to_json(),
            "time_to_sleep": SummaryStats.of([e.end - e.start for e in fail]).to_json(),
            "wakeup_latency": SummaryStats.of([e.start - e.enabling for e in eps
                                               if e.after_sleep and e.enabling is not None]).to_json(),
            "success_by_source": by,
            "truncated": len(eps) - len(done),
        }

    # ---------------------------------------------------------- document
    def document(self) -> dict:
        tr = self.t
        cols = []
        for a, b in sorted(tr.gc):
            if cols and a <= cols[-1][1]:
                cols[-1][1] = max(cols[-1][1], b)
            else:
                cols.append([a, b])
        gc_time = sum(b - a for a, b in cols)
        elapsed = tr.end - tr.start
        user = sum(b - a for ivs in tr.activity for a, b, lab in ivs if lab == "MUTATOR")
        npc = Fraction(user, self.csc) if self.csc and user > 0 else None
        cpus = self.cpus_doc()
        cpus.pop("_avg")
        reused = sum(1 for s in tr.spark_threads if s[3])
        program = {
            "n_engines": tr.n_engines,
            "start_ns": tr.start,
            "end_ns": tr.end,
            "elapsed_ns": elapsed,
            "user_time_ns": user,
            "cpus_over_time": cpus,
            "gc_stats": {"count": len(cols), "elapsed": SummaryStats.of([b - a for a, b in cols]).to_json()},
            "mutator_vs_gc": {"gc_time_ns": gc_time, "gc_fraction": _div(gc_time, elapsed),
                              "amdahl_bound": _div(elapsed, gc_time)},
            "nanosecs_per_call": to_json_number(npc),
            "contexts": {"spark_threads_new": len(tr.spark_threads) - reused,
                         "spark_threads_reused": reused},
        }
        groups: dict[str, list] = {}
        for c in tr.conjunctions:
            groups.setdefault(c.static_id, []).append(c)
        sids = sorted(s for s in groups if self.static_filter is None or s in self.static_filter)
        return {
            "schema": SCHEMA,
            "options": {
                "count_sparks_as_runnable": self.count_sparks,
                "mutator_only": self.mutator_only,
                "csc_count": self.csc,
                "static_filter": sorted(self.static_filter) if self.static_filter else None,
            },
            "program": program,
            "conjunctions": {s: self.conj_section(s, groups[s], npc) for s in sids},
            "out_of_order": self.out_of_order(),
            "idle_engines": self.idle(),
        }


def export_truth(truth: GroundTruth, **options) -> dict:
    """Expected report document for ``truth`` under the given report options."""
    return TruthReport(truth, **options).document()
