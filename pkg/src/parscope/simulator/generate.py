"""Seeded random workloads for property and oracle tests."""

from __future__ import annotations

import random
from typing import Optional

from .workload import (
    Action,
    BackgroundTask,
    ConjunctSpec,
    ConjunctionSpec,
    GcParams,
    MainStep,
    RESUME_POLICIES,
    SchedulerParams,
    WorkloadSpec,
    validate_spec,
)


def _instances(name: str, defs: dict[str, ConjunctionSpec], memo: dict[str, int]) -> int:
    """Dynamic conjunction instances produced by one call of ``name``."""
    if name in memo:
        return memo[name]
    n = 1
    for cj in defs[name].conjuncts:
        for a in cj.actions:
            if a.kind == "call":
                n += _instances(a.target, defs, memo)
    memo[name] = n
    return n


def _conjunction(rng: random.Random, name: str, callees: list[str], max_conjuncts: int,
                 work: tuple[int, int], call_p: float) -> ConjunctionSpec:
    n = rng.randint(2, max_conjuncts)
    conjuncts = [ConjunctSpec(rng.randint(*work)) for _ in range(n)]
    futures = []
    for v in range(rng.randint(0, min(3, n - 1))):
        var = f"v{v}"
        p = rng.randint(0, n - 2)
        cons = [k for k in range(p + 1, n) if rng.random() < 0.6] or [rng.randint(p + 1, n - 1)]
        futures.append(var)
        prod = conjuncts[p]
        prod.actions.append(Action("signal", rng.randint(0, prod.work_ns), var))
        for k in cons:
            c = conjuncts[k]
            for _ in range(1 if rng.random() < 0.8 else 2):
                c.actions.append(Action("wait", rng.randint(0, c.work_ns), var))
    for cj in conjuncts:
        if callees and rng.random() < call_p:
            cj.actions.append(Action("call", rng.randint(0, cj.work_ns), rng.choice(callees)))
    return ConjunctionSpec(name, f"{name}.m:{rng.randint(1, 999)}", futures, conjuncts)


def generate_workload(seed: int, max_engines: int = 8, max_conjunctions: int = 200,
                      max_conjuncts: int = 6, max_depth: int = 3,
                      work: tuple[int, int] = (20, 2000), gc: Optional[bool] = None,
                      background: Optional[bool] = None) -> WorkloadSpec:
    """Random valid workload.

    Conjunction definitions are layered so that nested calls stay within
    ``max_depth`` levels, and the main program is cut off once it would
    exceed ``max_conjunctions`` dynamic instances.
    """
    rng = random.Random(seed)
    n_engines = rng.randint(1, max_engines)
    depth = rng.randint(1, max_depth)
    layers: list[list[str]] = []
    defs: dict[str, ConjunctionSpec] = {}
    for level in reversed(range(depth)):
        below = layers[0] if layers else []
        names = []
        for i in range(rng.randint(1, 3)):
            name = f"c{level}_{i}"
            defs[name] = _conjunction(rng, name, below, max_conjuncts, work, 0.35)
            names.append(name)
        layers.insert(0, names)
    memo: dict[str, int] = {}
    main: list[MainStep] = []
    budget = max_conjunctions
    for _ in range(rng.randint(1, 8)):
        if rng.random() < 0.3:
            main.append(MainStep(work_ns=rng.randint(*work)))
            continue
        name = rng.choice(layers[0])
        per = _instances(name, defs, memo)
        rep = min(rng.randint(1, 6), budget // per)
        if rep <= 0:
            continue
        budget -= rep * per
        main.append(MainStep(conj=name, repeat=rep))
    if not any(s.conj for s in main) and budget >= _instances(layers[0][0], defs, memo):
        main.append(MainStep(conj=layers[0][0], repeat=1))
    used = set()

    def mark(n: str):
        if n in used:
            return
        used.add(n)
        for cj in defs[n].conjuncts:
            for a in cj.actions:
                if a.kind == "call":
                    mark(a.target)

    for s in main:
        if s.conj:
            mark(s.conj)
    defs = {k: v for k, v in defs.items() if k in used}

    sched = SchedulerParams(
        spark_overhead_ns=rng.choice([0, 0, rng.randint(1, 30)]),
        steal_latency_ns=rng.randint(0, 60),
        wakeup_latency_ns=rng.randint(1, 120),
        probe_latency_ns=rng.randint(0, 8),
        context_pool_size=rng.randint(0, 8),
        resume_policy=rng.choice(RESUME_POLICIES),
        jitter_ns=rng.choice([0, 0, 0, rng.randint(1, 50)]),
    )
    gcp = None
    if gc if gc is not None else rng.random() < 0.3:
        period = rng.randint(2000, 30000)
        gcp = GcParams(period, rng.randint(10, period // 4), rng.randint(0, period))
    bg = []
    if background if background is not None else rng.random() < 0.3:
        for _ in range(rng.randint(1, 3)):
            bg.append(BackgroundTask(rng.randint(0, 20000), rng.randint(*work)))
    spec = WorkloadSpec(n_engines, defs, main, seed, sched, gcp, bg,
                        barrier_pool=rng.randint(1, 16), future_pool=rng.randint(1, 4))
    validate_spec(spec)
    return spec
