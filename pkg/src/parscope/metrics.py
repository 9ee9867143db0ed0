"""
Metric suite over an ExecutionModel.

Every time value is an integer count of nanoseconds and every derived mean or
ratio is kept exact until the report is serialized.
"""

from __future__ import annotations

import json
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from ._gcpause import gc_paused
from .reconstruct import (
    BLOCKED,
    GC,
    MUTATOR,
    RUNNABLE,
    RUNNING,
    SOURCES,
    Conjunct,
    Conjunction,
    ExecutionModel,
)
from .stats import StepCurve, SummaryStats, curve_stats, ratio, to_json_number

SCHEMA = "parscope.report/1"

SELF = "SELF"
SELF_AND_DESC = "SELF_AND_DESC"
FIRST_WAITS = "FIRST_WAITS"
ALL_WAITS = "ALL_WAITS"

CURVE_NAMES = (
    "parconj_runnable_self",
    "parconj_runnable_self_and_desc",
    "parconj_running_self",
    "parconj_running_self_and_desc",
    "parconj_avail_cpus",
)
PHASE_NAMES = (
    "time_as_spark",
    "time_as_context",
    "time_blocked",
    "time_runnable",
    "time_running",
    "time_after",
)


class ZeroUserTime(ValueError):
    pass


@dataclass
class ReportOptions:
    count_sparks_as_runnable: bool = True
    mutator_only: bool = False
    csc_count: Optional[int] = None
    conj_csc: dict[str, int] = field(default_factory=dict)
    static_filter: Optional[set[str]] = None
    include_instances: bool = False
    workers: int = 1

    def to_json(self) -> dict:
        return {
            "count_sparks_as_runnable": self.count_sparks_as_runnable,
            "mutator_only": self.mutator_only,
            "csc_count": self.csc_count,
            "static_filter": sorted(self.static_filter) if self.static_filter else None,
        }


# ---------------------------------------------------------------- program

def cpus_over_time(model: ExecutionModel, mutator_only: bool = False) -> StepCurve:
    labels = (MUTATOR,) if mutator_only else (MUTATOR, GC)
    ivs = [(a, b) for eng in model.engines for a, b, lab, _ in eng if lab in labels]
    return StepCurve.from_intervals(ivs, model.start, model.end)


def user_time(model: ExecutionModel) -> int:
    return sum(b - a for eng in model.engines for a, b, lab, _ in eng if lab == MUTATOR)


def gc_collections(model: ExecutionModel) -> list[tuple[int, int]]:
    """Maximal intervals of the union of per-engine GC intervals."""
    ivs = sorted(iv for eng in model.gc_intervals for iv in eng if iv[1] > iv[0])
    out: list[list[int]] = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def gc_stats(model: ExecutionModel) -> tuple[int, SummaryStats]:
    cols = gc_collections(model)
    return len(cols), SummaryStats.of([b - a for a, b in cols])


def mutator_vs_gc(model: ExecutionModel) -> tuple[Optional[float], Optional[float], int]:
    """(gc_fraction, amdahl_bound, gc_time_ns)."""
    gc = sum(b - a for a, b in gc_collections(model))
    elapsed = model.end - model.start
    frac = ratio(gc, elapsed)
    bound = ratio(elapsed, gc)
    return frac, bound, gc


def nanosecs_per_call(model: ExecutionModel, csc_count: int) -> Fraction:
    """Total user time over the call-sequence count of a sequential profile."""
    if csc_count <= 0:
        raise ValueError("csc_count must be positive")
    m = user_time(model)
    if m == 0:
        raise ZeroUserTime("trace contains no mutator time")
    return Fraction(m, csc_count)


# ------------------------------------------------------- per-conjunction

def group_by_static(model: ExecutionModel) -> dict[str, list[Conjunction]]:
    groups: dict[str, list[Conjunction]] = defaultdict(list)
    for c in model.conjunctions:
        groups[c.static_id].append(c)
    return dict(groups)


def parconj_time(model: ExecutionModel) -> dict[str, tuple[SummaryStats, int]]:
    """Per static site: (stats over complete instances, truncated count)."""
    out = {}
    for sid, insts in group_by_static(model).items():
        done = [c.end - c.start for c in insts if c.complete]
        out[sid] = (SummaryStats.of(done), len(insts) - len(done))
    return out


def _merge(windows: list[tuple[int, int]]) -> list[tuple[int, int]]:
    windows.sort()
    out: list[list[int]] = []
    for a, b in windows:
        if out and a <= out[-1][1]:
            if b > out[-1][1]:
                out[-1][1] = b
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _window(model: ExecutionModel, cj: Conjunct) -> Optional[tuple[int, int]]:
    if cj.exec_start is None or cj.context is None:
        return None
    return cj.exec_start, (cj.end if cj.end is not None else model.end)


def _task_curves(model: ExecutionModel, conjuncts: Iterable[Conjunct], a: int, b: int,
                 count_sparks: bool) -> tuple[StepCurve, StepCurve]:
    """(running, runnable) counts of distinct contexts executing ``conjuncts``."""
    by_ctx: dict[int, list[tuple[int, int]]] = defaultdict(list)
    run_d: list[tuple[int, int]] = []
    rbl_d: list[tuple[int, int]] = []
    for cj in conjuncts:
        w = _window(model, cj)
        if w is not None:
            by_ctx[cj.context].append(w)
        if count_sparks and cj.spark is not None:
            s0 = cj.spark_created
            s1 = cj.exec_start if cj.exec_start is not None else model.end
            if s1 > s0:
                rbl_d.append((s0, 1))
                rbl_d.append((s1, -1))
    for ctx, wins in by_ctx.items():
        tl = model.contexts.get(ctx)
        if tl is None:
            continue
        for w0, w1 in _merge(wins):
            for s, e, ph, _ in tl.clip(w0, w1):
                if ph == RUNNING:
                    run_d.append((s, 1))
                    run_d.append((e, -1))
                    rbl_d.append((s, 1))
                    rbl_d.append((e, -1))
                elif ph == RUNNABLE:
                    rbl_d.append((s, 1))
                    rbl_d.append((e, -1))
    return StepCurve.from_deltas(run_d, a, b), StepCurve.from_deltas(rbl_d, a, b)


def subtree_conjuncts(conj: Conjunction) -> list[Conjunct]:
    return [cj for c in conj.descendants() for cj in c.conjuncts]


def parconj_task_curve(model: ExecutionModel, conj: Conjunction, scope: str = SELF,
                       mode: str = RUNNABLE, count_sparks_as_runnable: bool = True):
    """(curve, max, time-weighted average) of running or runnable tasks of one instance."""
    cjs = conj.conjuncts if scope == SELF else subtree_conjuncts(conj)
    end = conj.end if conj.end is not None else model.end
    running, runnable = _task_curves(model, cjs, conj.start, end, count_sparks_as_runnable)
    c = running if mode == RUNNING else runnable
    return c, c.max(), c.time_weighted_avg()


def parconj_avail_cpus(model: ExecutionModel, conj: Conjunction, mutator_only: bool = False,
                       cpus: Optional[StepCurve] = None):
    end = conj.end if conj.end is not None else model.end
    if cpus is None:
        cpus = cpus_over_time(model, mutator_only)
    running_sd, _ = _task_curves(model, subtree_conjuncts(conj), conj.start, end, False)
    c = StepCurve.combine([(-1, cpus), (1, running_sd)], model.n_engines, conj.start, end)
    return c, c.max(), c.time_weighted_avg()


def instance_curves(model: ExecutionModel, conj: Conjunction, cpus: StepCurve,
                    count_sparks: bool = True) -> dict[str, StepCurve]:
    end = conj.end if conj.end is not None else model.end
    a = conj.start
    run_s, rbl_s = _task_curves(model, conj.conjuncts, a, end, count_sparks)
    if any(cj.children for cj in conj.conjuncts):
        run_sd, rbl_sd = _task_curves(model, subtree_conjuncts(conj), a, end, count_sparks)
    else:
        run_sd, rbl_sd = run_s, rbl_s
    avail = StepCurve.combine([(-1, cpus), (1, run_sd)], model.n_engines, a, end)
    return {
        "parconj_runnable_self": rbl_s,
        "parconj_runnable_self_and_desc": rbl_sd,
        "parconj_running_self": run_s,
        "parconj_running_self_and_desc": run_sd,
        "parconj_avail_cpus": avail,
    }


def _continuation(insts: list[Conjunction]) -> dict:
    obs = [c for c in insts if c.complete and c.end_engine is not None]
    before = sum(1 for c in obs if c.start_engine == c.end_engine)
    last = sum(1 for c in obs if c.last_end_engine == c.end_engine)
    return {
        "continue_on_before": {"observed": len(obs), "same": before,
                               "probability": ratio(before, len(obs))},
        "continue_on_last": {"observed": len(obs), "same": last,
                             "probability": ratio(last, len(obs))},
    }


def parconj_continuation(model: ExecutionModel) -> dict[str, dict]:
    return {sid: _continuation(insts) for sid, insts in group_by_static(model).items()}


def conjunct_phases(model: ExecutionModel, conj: Conjunction, cj: Conjunct) -> dict[str, int]:
    blocked = runnable = running = 0
    tl = model.contexts.get(cj.context)
    if tl is not None:
        for s, e, ph, _ in tl.clip(cj.exec_start, cj.end):
            if ph == RUNNING:
                running += e - s
            elif ph == RUNNABLE:
                runnable += e - s
            elif ph == BLOCKED:
                blocked += e - s
    return {
        "time_as_spark": cj.exec_start - cj.spark_created,
        "time_as_context": cj.end - cj.exec_start,
        "time_blocked": blocked,
        "time_runnable": runnable,
        "time_running": running,
        "time_after": conj.end - cj.end,
    }


def _phase_section(model: ExecutionModel, insts: list[Conjunction]) -> dict[str, dict]:
    acc: dict[int, dict[str, list[int]]] = {}
    s2e: dict[int, list[int]] = defaultdict(list)
    s2e_w: dict[int, list[int]] = defaultdict(list)
    for conj in insts:
        if not conj.complete:
            continue
        for cj in conj.conjuncts:
            d = acc.setdefault(cj.position, {k: [] for k in PHASE_NAMES})
            for k, v in conjunct_phases(model, conj, cj).items():
                d[k].append(v)
        for f in conj.futures:
            p = f.producer
            if p is None or f.signal_time is None or p.end is None:
                continue
            s2e[p.position].append(p.end - f.signal_time)
            if f.waited:
                s2e_w[p.position].append(p.end - f.signal_time)
    out = {}
    for pos in sorted(acc):
        sec = {k: SummaryStats.of(v).to_json() for k, v in acc[pos].items()}
        sec["signal_to_end"] = SummaryStats.of(s2e.get(pos, [])).to_json()
        sec["waited_signal_to_end"] = SummaryStats.of(s2e_w.get(pos, [])).to_json()
        out[str(pos)] = sec
    return out


def conjunct_phase_times(model: ExecutionModel) -> dict[str, dict]:
    """Per static site and conjunct position, summaries of the six phase times."""
    return {sid: _phase_section(model, insts) for sid, insts in group_by_static(model).items()}


def signal_to_conjunct_end(model: ExecutionModel, waited_only: bool = False) -> dict:
    key = "waited_signal_to_end" if waited_only else "signal_to_end"
    return {sid: {pos: sec[key] for pos, sec in secs.items()}
            for sid, secs in conjunct_phase_times(model).items()}


def _suspend(waits) -> dict:
    sus = sum(1 for w in waits if w.suspended)
    return {"signals_first": len(waits) - sus, "waits_first": sus,
            "p_suspend": ratio(sus, len(waits))}


def _future_section(insts: list[Conjunction]) -> dict[str, dict]:
    by_var: dict[str, list] = {}
    for conj in insts:
        if not conj.complete:
            continue
        for f in conj.futures:
            by_var.setdefault(f.name, []).append(f)
    out = {}
    for var in sorted(by_var):
        all_d, first_d, all_w, first_w = [], [], [], []
        unsignalled = 0
        for f in by_var[var]:
            for w in f.waits:
                all_w.append(w)
                if w.first:
                    first_w.append(w)
                if f.signal_time is None:
                    unsignalled += 1
                    continue
                all_d.append(w.time - f.signal_time)
                if w.first:
                    first_d.append(w.time - f.signal_time)
        out[var] = {
            "first_waits": SummaryStats.of(first_d).to_json(),
            "all_waits": SummaryStats.of(all_d).to_json(),
            "wait_count": len(all_d),
            "suspend_first": _suspend(first_w),
            "suspend_all": _suspend(all_w),
            "unsignalled_waits": unsignalled,
        }
    return out


def future_suspend_times(model: ExecutionModel, which: str = FIRST_WAITS) -> dict:
    key = "first_waits" if which == FIRST_WAITS else "all_waits"
    out = {}
    for sid, insts in group_by_static(model).items():
        for var, sec in _future_section(insts).items():
            out[(sid, var)] = (sec[key], sec["wait_count"])
    return out


def future_suspend_probability(model: ExecutionModel, which: str = FIRST_WAITS) -> dict:
    key = "suspend_first" if which == FIRST_WAITS else "suspend_all"
    out = {}
    for sid, insts in group_by_static(model).items():
        for var, sec in _future_section(insts).items():
            out[(sid, var)] = sec[key]
    return out


# ----------------------------------------------------------- out of order

def _dependency_maps(model: ExecutionModel):
    """Producer sets per future and transitive upstream blockers per future.

    A conjunct that waits for a future depends on every producer of it; the
    transitive blockers of a future are its producers plus everything those
    producers depend on, closed under the relation.
    """
    producers: dict[int, frozenset] = {}
    upstream: dict[Conjunct, set] = defaultdict(set)
    for f in model.futures:
        if f.signal_time is None:
            continue
        prods = frozenset(f.signal_chain)
        producers[f.id] = prods
        for w in f.waits:
            for x in w.chain:
                upstream[x].update(prods)
    closure: dict[Conjunct, frozenset] = {}

    def close(x: Conjunct) -> frozenset:
        got = closure.get(x)
        if got is not None:
            return got
        seen = {x}
        stack = [x]
        while stack:
            y = stack.pop()
            for z in upstream.get(y, ()):
                if z not in seen:
                    seen.add(z)
                    stack.append(z)
        closure[x] = fs = frozenset(seen)
        return fs

    tc: dict[int, frozenset] = {}
    for fid, prods in producers.items():
        acc: set = set()
        for p in prods:
            acc |= close(p)
        tc[fid] = frozenset(acc)
    return producers, tc


def _chain_of(cj: Conjunct) -> tuple[tuple[int, int], ...]:
    out = []
    x: Optional[Conjunct] = cj
    while x is not None:
        out.append((x.conjunction.id, x.position))
        x = x.conjunction.parent
    return tuple(out)


def _any_before(cands, running_chains) -> bool:
    for a in cands:
        ca = dict(_chain_of(a))
        for chain in running_chains:
            for cid, pos in chain:
                pa = ca.get(cid)
                if pa is not None:
                    if pa < pos:
                        return True
                    break
    return False


def out_of_order(model: ExecutionModel, count_sparks_as_runnable: bool = True) -> dict:
    """Exact interval sweep of the out-of-order measures over the whole trace."""
    WAIT, RUN, BLK = 0, 1, 2
    bounds: list[tuple[int, int, int, object]] = []  # (time, +1/-1, kind, key)

    def add(a, b, kind, key):
        if b > a:
            bounds.append((a, 1, kind, key))
            bounds.append((b, -1, kind, key))

    for conj in model.conjunctions:
        for cj in conj.conjuncts:
            if count_sparks_as_runnable and cj.spark is not None:
                add(cj.spark_created,
                    cj.exec_start if cj.exec_start is not None else model.end, WAIT, cj)
            w = _window(model, cj)
            if w is None:
                continue
            tl = model.contexts.get(cj.context)
            if tl is None:
                continue
            for s, e, ph, _ in tl.clip(*w):
                if ph == RUNNING:
                    add(s, e, RUN, cj)
                elif ph == RUNNABLE:
                    add(s, e, WAIT, cj)
    for tl in model.contexts.values():
        for s, e, ph, d in tl.intervals:
            if ph == BLOCKED and d is not None:
                add(s, e, BLK, d)
    bounds.sort(key=lambda x: x[0])

    producers, tc = _dependency_maps(model)
    chains: dict[Conjunct, tuple] = {}
    waiting: dict[Conjunct, int] = defaultdict(int)
    running: dict[Conjunct, int] = defaultdict(int)
    blocked: dict[int, int] = defaultdict(int)
    # minimum-position bookkeeping of waiting conjuncts' chains, per conjunction
    left: dict[int, dict[int, int]] = defaultdict(lambda: defaultdict(int))

    def chain(cj):
        c = chains.get(cj)
        if c is None:
            c = chains[cj] = _chain_of(cj)
        return c

    t_run = t_ooo = t_direct = t_tc = 0
    i, n = 0, len(bounds)
    while i < n:
        t = bounds[i][0]
        while i < n and bounds[i][0] == t:
            _, d, kind, key = bounds[i]
            i += 1
            if kind == RUN:
                v = running[key] + d
                if v:
                    running[key] = v
                else:
                    del running[key]
            elif kind == WAIT:
                v = waiting[key] + d
                if v:
                    waiting[key] = v
                else:
                    del waiting[key]
                for cid, pos in chain(key):
                    m = left[cid]
                    m[pos] += d
                    if not m[pos]:
                        del m[pos]
            else:
                v = blocked[key] + d
                if v:
                    blocked[key] = v
                else:
                    del blocked[key]
        if i >= n:
            break
        span = bounds[i][0] - t
        if not running:
            continue
        t_run += span
        ooo = False
        for b in running:
            for cid, pos in chain(b):
                m = left.get(cid)
                if m and any(p < pos for p in m):
                    ooo = True
                    break
            if ooo:
                break
        if not ooo:
            continue
        t_ooo += span
        if not blocked:
            continue
        rchains = [chain(b) for b in running]
        direct: set = set()
        trans: set = set()
        for fid in blocked:
            for p in producers.get(fid, ()):
                if p in waiting:
                    direct.add(p)
            for p in tc.get(fid, ()):
                if p in waiting:
                    trans.add(p)
        if direct and _any_before(direct, rchains):
            t_direct += span
        if trans and _any_before(trans, rchains):
            t_tc += span
    return {
        "running_ns": t_run,
        "out_of_order_ns": t_ooo,
        "blocks_direct_ns": t_direct,
        "blocks_transitive_ns": t_tc,
        "p_out_of_order": ratio(t_ooo, t_run),
        "p_blocks_direct": ratio(t_direct, t_ooo),
        "p_blocks_transitive": ratio(t_tc, t_ooo),
    }


# ------------------------------------------------------------ idle engines

def idle_engine_stats(model: ExecutionModel) -> dict:
    done = [ep for ep in model.episodes if ep.end is not None]
    ok = [ep for ep in done if ep.source is not None]
    slept = [ep for ep in done if ep.source is None]
    wake = [ep.start - ep.enabling for ep in model.episodes
            if ep.after_sleep and ep.enabling is not None]
    by_src = {s: 0 for s in SOURCES}
    for ep in ok:
        by_src[ep.source] += 1
    return {
        "episodes": len(done),
        "successes": len(ok),
        "p_find_work": ratio(len(ok), len(done)),
        "time_to_work": SummaryStats.of([ep.end - ep.start for ep in ok]).to_json(),
        "time_to_sleep": SummaryStats.of([ep.end - ep.start for ep in slept]).to_json(),
        "wakeup_latency": SummaryStats.of(wake).to_json(),
        "success_by_source": by_src,
        "truncated": len(model.episodes) - len(done),
    }


# ------------------------------------------------------------------ report

def _conj_section(model: ExecutionModel, sid: str, insts: list[Conjunction],
                  cpus: StepCurve, opts: ReportOptions, npc: Optional[Fraction]) -> dict:
    complete = [c for c in insts if c.complete]
    curves = {k: [] for k in CURVE_NAMES}
    inst_out = []
    for c in complete:
        cs = instance_curves(model, c, cpus, opts.count_sparks_as_runnable)
        for k in CURVE_NAMES:
            curves[k].append(cs[k])
        if opts.include_instances:
            inst_out.append({"dyn_id": c.id, "start_ns": c.start, "end_ns": c.end,
                             "curves": {k: cs[k].to_json() for k in CURVE_NAMES}})
    times = SummaryStats.of([c.end - c.start for c in complete])
    sec = {
        "instances": len(complete),
        "truncated": len(insts) - len(complete),
        "parconj_time": times.to_json(),
    }
    for k in CURVE_NAMES:
        sec[k] = curve_stats(curves[k])
    sec.update(_continuation(insts))
    sec["conjuncts"] = _phase_section(model, insts)
    sec["futures"] = _future_section(insts)
    if sid in opts.conj_csc:
        n = opts.conj_csc[sid]
        est = n * npc if npc is not None else None
        sec["csc"] = {
            "sequential_csc": n,
            "sequential_ns_estimate": to_json_number(est),
            "parallel_speedup_estimate": (to_json_number(Fraction(est) / times.mean)
                                          if est is not None and times.count and times.mean
                                          else None),
        }
    if opts.include_instances:
        sec["instance_curves"] = inst_out
    return sec


@gc_paused
def build_report(model: ExecutionModel, options: Optional[ReportOptions] = None) -> dict:
    opts = options or ReportOptions()
    cpus = cpus_over_time(model, opts.mutator_only)
    n_gc, gc_ss = gc_stats(model)
    frac, bound, gc_time = mutator_vs_gc(model)
    m = user_time(model)
    npc = None
    if opts.csc_count and m > 0:
        npc = nanosecs_per_call(model, opts.csc_count)
    spark_new = sum(1 for s in model.spark_threads if s.classification == "NEW")
    program = {
        "n_engines": model.n_engines,
        "start_ns": model.start,
        "end_ns": model.end,
        "elapsed_ns": model.end - model.start,
        "user_time_ns": m,
        "cpus_over_time": cpus.to_json(),
        "gc_stats": {"count": n_gc, "elapsed": gc_ss.to_json()},
        "mutator_vs_gc": {"gc_time_ns": gc_time, "gc_fraction": frac, "amdahl_bound": bound},
        "nanosecs_per_call": to_json_number(npc),
        "contexts": {"spark_threads_new": spark_new,
                     "spark_threads_reused": len(model.spark_threads) - spark_new},
    }
    groups = group_by_static(model)
    sids = sorted(s for s in groups
                  if opts.static_filter is None or s in opts.static_filter)

    def one(sid):
        return _conj_section(model, sid, groups[sid], cpus, opts, npc)

    if opts.workers > 1 and len(sids) > 1:
        with ThreadPoolExecutor(max_workers=opts.workers) as ex:
            sections = list(ex.map(one, sids))
    else:
        sections = [one(s) for s in sids]
    return {
        "schema": SCHEMA,
        "options": opts.to_json(),
        "program": program,
        "conjunctions": dict(zip(sids, sections)),
        "out_of_order": out_of_order(model, opts.count_sparks_as_runnable),
        "idle_engines": idle_engine_stats(model),
    }


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _ss_line(name: str, ss: dict) -> str:
    if not ss.get("count"):
        return f"{name}: n=0"
    return (f"{name}: n={ss['count']} min={_fmt(ss['min'])} max={_fmt(ss['max'])}"
            f" mean={_fmt(ss['mean'])} var={_fmt(ss['variance'])}")


def report_text(report: dict) -> str:
    p = report["program"]
    lines = [
        f"engines {p['n_engines']}, elapsed {p['elapsed_ns']} ns, user time {p['user_time_ns']} ns",
        f"cpus over time: max {p['cpus_over_time']['max']},"
        f" avg {_fmt(p['cpus_over_time']['time_weighted_avg'])}",
        _ss_line(f"gc collections ({p['gc_stats']['count']})", p["gc_stats"]["elapsed"]),
        f"gc fraction {_fmt(p['mutator_vs_gc']['gc_fraction'])},"
        f" amdahl bound {_fmt(p['mutator_vs_gc']['amdahl_bound'])}",
        f"ns per call {_fmt(p['nanosecs_per_call'])}",
        f"spark threads: {p['contexts']['spark_threads_new']} new,"
        f" {p['contexts']['spark_threads_reused']} reused",
    ]
    for sid, sec in report["conjunctions"].items():
        lines.append("")
        lines.append(f"conjunction {sid}: {sec['instances']} instances"
                     f" ({sec['truncated']} truncated)")
        lines.append("  " + _ss_line("time", sec["parconj_time"]))
        for k in CURVE_NAMES:
            lines.append("  " + _ss_line(f"{k[8:]} max", sec[k]["max"]))
            lines.append("  " + _ss_line(f"{k[8:]} avg", sec[k]["avg"]))
        for k in ("continue_on_before", "continue_on_last"):
            c = sec[k]
            lines.append(f"  {k}: {c['same']}/{c['observed']} ({_fmt(c['probability'])})")
        for pos, cs in sec["conjuncts"].items():
            lines.append(f"  conjunct {pos}")
            for k in PHASE_NAMES + ("signal_to_end", "waited_signal_to_end"):
                lines.append("    " + _ss_line(k, cs[k]))
        for var, fs in sec["futures"].items():
            lines.append(f"  future {var}: {fs['wait_count']} waits,"
                         f" p_suspend first {_fmt(fs['suspend_first']['p_suspend'])}"
                         f" all {_fmt(fs['suspend_all']['p_suspend'])}")
            lines.append("    " + _ss_line("first waits", fs["first_waits"]))
            lines.append("    " + _ss_line("all waits", fs["all_waits"]))
    o = report["out_of_order"]
    lines.append("")
    lines.append(f"out of order: {_fmt(o['p_out_of_order'])}, blocks direct"
                 f" {_fmt(o['p_blocks_direct'])}, transitive {_fmt(o['p_blocks_transitive'])}")
    ie = report["idle_engines"]
    lines.append(f"idle episodes {ie['episodes']}, found work {ie['successes']}"
                 f" ({_fmt(ie['p_find_work'])})")
    lines.append("  " + _ss_line("time to work", ie["time_to_work"]))
    lines.append("  " + _ss_line("time to sleep", ie["time_to_sleep"]))
    lines.append("  " + _ss_line("wakeup latency", ie["wakeup_latency"]))
    lines.append("  by source: " + ", ".join(f"{k} {v}" for k, v in ie["success_by_source"].items()))
    return "\n".join(lines) + "\n"
