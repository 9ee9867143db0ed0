"""Acceptance suite: one test per criterion, each printing a PASS/FAIL verdict.

Verdict lines go to stderr as each test finishes and are repeated in the
pytest terminal summary.
"""

import json
import os
import random
import subprocess
import sys
import textwrap
import time
from bisect import bisect_right
from functools import lru_cache

import pytest

from parscope import analyze, build_report, decode_log, encode_log
from parscope.analysis import canonical_trace, model_from_log
from parscope.cli import run as cli_run
from parscope.eventlog import VARIABLE, Event, EventTypeDecl
from parscope.metrics import CURVE_NAMES, ReportOptions, cpus_over_time, instance_curves
from parscope.reconstruct import BLOCKED, GC, MUTATOR, RUNNABLE, RUNNING, conjunct_phases
from parscope.simulator import export_truth, generate_workload, simulate, spec_from_dict
from parscope.simulator.truth import TruthReport

from acceptlog import criterion
from codecfuzz import random_stream
from tracekit import diff_documents

ORACLE_SEEDS = range(50)
FUZZ_TRACES = 500
SMALL_TRACE = 10_000


@lru_cache(maxsize=None)
def oracle_run(seed: int):
    return simulate(generate_workload(seed))


def fuzz_spec(k: int):
    """Workload generator with its own limits drawn at random."""
    rng = random.Random(7919 * k + 1)
    lo = rng.randint(1, 200)
    return generate_workload(
        100_000 + k,
        max_engines=rng.randint(1, 8),
        max_conjunctions=rng.randint(1, 30),
        max_conjuncts=rng.randint(2, 6),
        max_depth=rng.randint(1, 3),
        work=(lo, lo + rng.randint(0, 3000)),
    )


@lru_cache(maxsize=None)
def fuzz_run(k: int):
    return simulate(fuzz_spec(k))


def all_runs():
    for s in ORACLE_SEEDS:
        yield f"seed {s}", oracle_run(s)
    for k in range(FUZZ_TRACES):
        yield f"fuzz {k}", fuzz_run(k)


def lookup(points, t):
    return points[bisect_right([p[0] for p in points], t) - 1][1]


# ---------------------------------------------------------------- 1

def test_codec_round_trip_1000_logs():
    with criterion(1, "codec round-trip, 1000 seeded logs up to 1e5 events, < 60 s") as notes:
        rng = random.Random(1)
        # ten logs at the cap, the rest log-uniform below it
        sizes = [100_000] * 10 + [int(10 ** rng.uniform(0.3, 4)) for _ in range(990)]
        t0 = time.perf_counter()
        total = 0
        for i, n in enumerate(sizes):
            decls, evs = random_stream(10_000 + i, n, n_unknown=i % 4)
            data = encode_log(decls, evs)
            log = decode_log(data)
            assert log.events == evs, f"log {i}: events differ after decode"
            assert encode_log(log.declarations, log.events) == data, f"log {i}: bytes differ"
            total += len(evs)
        elapsed = time.perf_counter() - t0
        notes.append(f"{total} events in {elapsed:.1f}s")
        assert len(sizes) == 1000 and max(sizes) == 100_000
        assert elapsed < 60, f"took {elapsed:.1f}s"


# ---------------------------------------------------------------- 2

UNKNOWN_SIZES = [0, 1, 2, 4, 8, 16, VARIABLE, VARIABLE, VARIABLE, 3]


def inject_unknown(data: bytes, seed: int) -> bytes:
    log = decode_log(data)
    rng = random.Random(seed)
    decls = list(log.declarations) + [EventTypeDecl(2000 + j, s, f"vendor_{j}")
                                      for j, s in enumerate(UNKNOWN_SIZES)]
    out = []
    for ev in log.events:
        out.append(ev)
        if ev.engine is not None and rng.random() < 0.3:
            j = rng.randrange(len(UNKNOWN_SIZES))
            size = UNKNOWN_SIZES[j]
            n = rng.randint(0, 30) if size == VARIABLE else size
            out.append(Event(2000 + j, ev.time, ev.engine, (rng.randbytes(n),)))
    return encode_log(decls, out)


def test_unknown_event_types_change_no_metric():
    with criterion(2, "10 injected unknown event types change no metric") as notes:
        opts = ReportOptions(include_instances=True, csc_count=1000)
        injected = 0
        for seed in range(20):
            plain = oracle_run(seed).log
            mixed = inject_unknown(plain, seed)
            kinds = {e.kind for e in decode_log(mixed).events if e.kind >= 2000}
            injected += len(kinds)
            assert analyze(mixed, opts) == analyze(plain, opts), f"seed {seed}"
        notes.append(f"20 logs, {injected} log/type pairs")
        assert injected >= 20 * 9


# ---------------------------------------------------------------- 3

def test_prepass_unique_ids_and_cost():
    with criterion(3, "10k incarnations over 16 barriers, canonicalize <= 2x decode") as notes:
        spec = spec_from_dict({
            "n_engines": 4,
            "addresses": {"barrier_pool": 16},
            "conjunctions": {"trio": {"static_id": "t.m:1", "conjuncts": [
                {"work_ns": 300}, {"work_ns": 200}, {"work_ns": 100}]}},
            "main": [{"conj": "trio", "repeat": 10_000}],
        })
        res = simulate(spec)
        assert len(res.truth.raw_barriers) == 16
        log = decode_log(res.log)
        ct = canonical_trace(log)
        starts = [e.args[0] for e in ct.events if e.name == "START_PAR_CONJUNCTION"]
        assert ct.conjunction_count == 10_000
        assert len(starts) == 10_000 and sorted(set(starts)) == list(range(1, 10_001))

        def best(fn, reps=5):
            out = []
            for _ in range(reps):
                t = time.perf_counter()
                fn()
                out.append(time.perf_counter() - t)
            return min(out)

        t_dec = best(lambda: decode_log(res.log))
        t_can = best(lambda: canonical_trace(log))
        notes.append(f"decode {t_dec:.3f}s, canonicalize {t_can:.3f}s, ratio {t_can / t_dec:.2f}")
        assert t_can <= 2 * t_dec


# ---------------------------------------------------------------- 4

def depth(conj) -> int:
    d = 1
    while conj.parent is not None:
        conj = conj.parent.conj
        d += 1
    return d


def test_oracle_equivalence_50_seeds():
    with criterion(4, "analyzer report equals simulator truth on 50 seeds, < 120 s") as notes:
        t0 = time.perf_counter()
        conj = 0
        failures = []
        for s in ORACLE_SEEDS:
            spec = generate_workload(s)
            res = simulate(spec)
            assert spec.n_engines <= 8
            assert len(res.truth.conjunctions) <= 200
            assert all(len(c.conjuncts) <= 6 for c in res.truth.conjunctions)
            assert max((depth(c) for c in res.truth.conjunctions), default=0) <= 3
            conj += len(res.truth.conjunctions)
            diffs = diff_documents(analyze(res.log), export_truth(res.truth))
            if diffs:
                failures.append(f"seed {s}: {diffs[:3]}")
        elapsed = time.perf_counter() - t0
        with_futures = sum(1 for s in ORACLE_SEEDS if oracle_run(s).truth.futures)
        notes.append(f"{conj} conjunctions, {with_futures} seeds with futures, {elapsed:.1f}s")
        assert not failures, failures[0]
        assert with_futures >= 25
        assert elapsed < 120


# ---------------------------------------------------------------- 5

def _probabilities(doc, path="$"):
    if isinstance(doc, dict):
        for k, v in doc.items():
            p = f"{path}.{k}"
            if k.startswith("p_") or k in ("probability", "gc_fraction"):
                yield p, v
            else:
                yield from _probabilities(v, p)


def identity_violations(res) -> list[str]:
    model = model_from_log(decode_log(res.log))
    report = build_report(model)
    n = model.n_engines
    bad = []
    for conj in model.conjunctions:
        for cj in conj.conjuncts:
            if cj.end is None or cj.exec_start is None:
                continue
            tot = {RUNNING: 0, RUNNABLE: 0, BLOCKED: 0}
            for a, b, ph, _ in conjunct_phases(model, cj):
                tot[ph] += b - a
            if sum(tot.values()) != cj.end - cj.exec_start:
                bad.append(f"conjunct {cj.key}: phases {tot} vs {cj.end - cj.exec_start}")

    cpus = cpus_over_time(model)
    busy = [[(s, e) for s, e, lab, _ in ivs if lab in (MUTATOR, GC)] for ivs in model.engines]

    def busy_at(t):
        return sum(1 for ivs in busy for s, e in ivs if s <= t < e)

    def running_contexts(subtree, t):
        out = set()
        for cj in subtree:
            if cj.exec_start is None or cj.context is None:
                continue
            end = cj.end if cj.end is not None else model.end
            if cj.exec_start <= t < end:
                for s, e, ph, _ in model.contexts[cj.context].clip(t, t + 1):
                    if ph == RUNNING:
                        out.add(cj.context)
        return out

    for conj in model.conjunctions:
        if not conj.complete:
            continue
        cs = instance_curves(model, conj, cpus)
        for run_k, rbl_k in (("parconj_running_self", "parconj_runnable_self"),
                             ("parconj_running_self_and_desc", "parconj_runnable_self_and_desc")):
            run_c, rbl_c = cs[run_k], cs[rbl_k]
            for t in sorted({p[0] for p in run_c.points} | {p[0] for p in rbl_c.points}):
                r, q = run_c.value_at(t), rbl_c.value_at(t)
                if r > min(q, n):
                    bad.append(f"conj {conj.id} t={t}: running {r} > min({q}, {n})")
        subtree = [cj for c in conj.descendants() for cj in c.conjuncts]
        avail = cs["parconj_avail_cpus"]
        ts = {p[0] for p in avail.points} | {p[0] for p in cs["parconj_running_self_and_desc"].points}
        ts |= {t for t, _ in cpus.points if conj.start <= t < conj.end}
        for t in sorted(ts):
            outside = busy_at(t) - len(running_contexts(subtree, t))
            if avail.value_at(t) + outside != n:
                bad.append(f"conj {conj.id} t={t}: avail {avail.value_at(t)} + outside {outside} != {n}")

    for path, v in _probabilities(report):
        if v is not None and not 0.0 <= v <= 1.0:
            bad.append(f"{path} = {v}")
    return bad


def test_identity_suite():
    with criterion(5, "identity suite over 50 oracle and 500 fuzzed traces") as notes:
        count = 0
        viol = []
        for name, res in all_runs():
            viol.extend(f"{name}: {v}" for v in identity_violations(res))
            count += 1
        notes.append(f"{count} traces, {len(viol)} violations")
        assert count == len(ORACLE_SEEDS) + FUZZ_TRACES
        assert not viol, viol[0]


# ---------------------------------------------------------------- 6

@pytest.mark.parametrize("n_engines", [1, 4])
def test_gc_third_of_elapsed(n_engines):
    with criterion(6, f"GC at 1/3 of elapsed gives fraction 1/3, bound 3 ({n_engines} engines)"):
        res = simulate(spec_from_dict({
            "n_engines": n_engines, "main": [{"work_ns": 200}],
            "gc": {"period_ns": 1000, "duration_ns": 100, "first_at_ns": 100}}))
        prog = analyze(res.log)["program"]
        assert prog["elapsed_ns"] == 300 and prog["mutator_vs_gc"]["gc_time_ns"] == 100
        assert abs(prog["mutator_vs_gc"]["gc_fraction"] - 1 / 3) <= 1e-9
        assert abs(prog["mutator_vs_gc"]["amdahl_bound"] - 3.0) <= 1e-9


# ---------------------------------------------------------------- 7

def test_nanosecs_per_call():
    with criterion(7, "user time 1e9 ns over 1e6 calls gives 1000 ns per call"):
        res = simulate(spec_from_dict({
            "n_engines": 2,
            "conjunctions": {"pair": {"static_id": "p.m:1", "conjuncts": [
                {"work_ns": 300_000_000}, {"work_ns": 300_000_000}]}},
            "main": [{"work_ns": 400_000_000}, {"conj": "pair"}],
        }))
        prog = analyze(res.log, ReportOptions(csc_count=1_000_000))["program"]
        assert prog["user_time_ns"] == 10 ** 9
        assert prog["nanosecs_per_call"] == 1000 and isinstance(prog["nanosecs_per_call"], int)


# ---------------------------------------------------------------- 8

def recount(tr: TruthReport, conj, t: int) -> dict:
    """The five instance curves evaluated from simulator state at one instant."""
    run_s = rbl_s = 0
    for cj in conj.conjuncts:
        ph = tr.conjunct_phase(cj, t)
        run_s += ph == "RUNNING"
        rbl_s += ph in ("RUNNING", "RUNNABLE", "SPARK")
    running, runnable, sparks = set(), set(), 0
    for cj in TruthReport.subtree(conj):
        ph = tr.conjunct_phase(cj, t)
        if ph == "SPARK":
            sparks += 1
        elif ph == "RUNNING":
            running.add(cj.context)
        elif ph == "RUNNABLE":
            runnable.add(cj.context)
    return {
        "parconj_running_self": run_s,
        "parconj_runnable_self": rbl_s,
        "parconj_running_self_and_desc": len(running),
        "parconj_runnable_self_and_desc": len(running | runnable) + sparks,
        "parconj_avail_cpus": tr.t.n_engines - tr.cpus_at(t) + len(running),
    }


def curve_mismatches(res) -> tuple[int, list[str]]:
    report = analyze(res.log, ReportOptions(include_instances=True))
    tr = TruthReport(res.truth)
    times = sorted({e.time for e in res.events})
    bad = []
    checks = 0
    cpus = report["program"]["cpus_over_time"]["points"]
    for t in times:
        if res.truth.start <= t < res.truth.end:
            checks += 1
            if lookup(cpus, t) != tr.cpus_at(t):
                bad.append(f"cpus t={t}: {lookup(cpus, t)} != {tr.cpus_at(t)}")
    by_id = {c.id: c for c in res.truth.conjunctions}
    for sid, sec in report["conjunctions"].items():
        for inst in sec["instance_curves"]:
            conj = by_id[inst["dyn_id"]]
            assert conj.static_id == sid and conj.start == inst["start_ns"]
            lo, hi = bisect_right(times, conj.start - 1), bisect_right(times, conj.end - 1)
            for t in times[lo:hi]:
                want = recount(tr, conj, t)
                for k in CURVE_NAMES:
                    got = lookup(inst["curves"][k]["points"], t)
                    checks += 1
                    if got != want[k]:
                        bad.append(f"conj {conj.id} {k} t={t}: {got} != {want[k]}")
    return checks, bad


def test_curves_match_brute_force_recount():
    with criterion(8, "every curve equals a per-event recount on traces <= 1e4 events") as notes:
        traces = checks = 0
        bad = []
        for name, res in all_runs():
            if len(res.events) > SMALL_TRACE:
                continue
            n, b = curve_mismatches(res)
            traces += 1
            checks += n
            bad.extend(f"{name}: {x}" for x in b)
        notes.append(f"{traces} traces, {checks} point checks")
        assert traces >= 400
        assert not bad, bad[0]


# ---------------------------------------------------------------- 9

def test_report_is_deterministic(tmp_path):
    with criterion(9, "report --json is byte-identical across runs, workers and hash seeds"):
        # many static sites so the worker pool actually splits work
        seed = max(ORACLE_SEEDS, key=lambda s: len({c.static_id for c in oracle_run(s).truth.conjunctions}))
        log = tmp_path / "d.log"
        log.write_bytes(oracle_run(seed).log)
        outs = []
        for workers in (1, 1, 4, 8):
            out = tmp_path / f"r{len(outs)}.json"
            assert cli_run(["report", str(log), "--json", "--instances", "--csc", "999",
                            "--workers", str(workers), "-o", str(out)]) == 0
            outs.append(out.read_bytes())
        for hs in ("1", "2"):
            env = dict(os.environ, PYTHONHASHSEED=hs)
            proc = subprocess.run([sys.executable, "-m", "parscope.cli", "report", str(log),
                                   "--json", "--instances", "--csc", "999", "--workers", "3"],
                                  capture_output=True, env=env, check=True)
            outs.append(proc.stdout)
        assert len(json.loads(outs[0])["conjunctions"]) > 1
        assert all(o == outs[0] for o in outs)


# ---------------------------------------------------------------- 10

BIG_SPEC = {
    "n_engines": 8, "seed": 1,
    "scheduler": {"steal_latency_ns": 20, "wakeup_latency_ns": 50, "probe_latency_ns": 2,
                  "resume_policy": "ANY"},
    "gc": {"period_ns": 200_000, "duration_ns": 5000},
    "conjunctions": {
        "inner": {"static_id": "i.m:1", "conjuncts": [
            {"work_ns": 300}, {"work_ns": 400}, {"work_ns": 200}]},
        "outer": {"static_id": "o.m:1", "futures": ["x"], "conjuncts": [
            {"work_ns": 1000, "signals": [{"var": "x", "at_ns": 600}]},
            {"work_ns": 900, "waits": [{"var": "x", "at_ns": 100}],
             "calls": [{"conj": "inner", "at_ns": 300}]},
            {"work_ns": 700},
            {"work_ns": 500, "calls": [{"conj": "inner", "at_ns": 10}]}]},
    },
    "main": [{"conj": "outer", "repeat": 5000}],
}

MEASURE = textwrap.dedent("""
    import json, resource, sys, time
    from parscope import build_report, decode_log
    from parscope.analysis import model_from_log
    from parscope.metrics import report_json
    data = open(sys.argv[1], "rb").read()
    t0 = time.perf_counter()
    log = decode_log(data)
    text = report_json(build_report(model_from_log(log)))
    dt = time.perf_counter() - t0
    print(json.dumps({"seconds": dt, "events": len(log.events),
                      "max_rss_kb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
                      "report_bytes": len(text)}))
""")


def test_million_event_log_performance(tmp_path):
    with criterion(10, "decode and full analysis of a 1e6-event log, < 10 s and < 1 GB") as notes:
        path = tmp_path / "big.log"
        path.write_bytes(simulate(spec_from_dict(BIG_SPEC)).log)
        proc = subprocess.run([sys.executable, "-c", MEASURE, str(path)],
                              capture_output=True, text=True, check=True)
        m = json.loads(proc.stdout)
        notes.append(f"{m['events']} events, {m['seconds']:.2f}s, {m['max_rss_kb'] / 1024:.0f} MB")
        assert m["events"] >= 1_000_000
        assert m["seconds"] < 10
        assert m["max_rss_kb"] < 1024 * 1024
