"""
Workload description for the simulator.

A workload is a YAML or JSON document::

    spec_version: 1
    n_engines: 2
    seed: 7
    scheduler: {steal_latency_ns: 5, wakeup_latency_ns: 10, resume_policy: LAST_ENGINE}
    gc: {period_ns: 100000, duration_ns: 1000, first_at_ns: 5000}
    background: [{at_ns: 100, work_ns: 500}]
    addresses: {barrier_pool: 16, future_pool: 3}
    conjunctions:
      fib:
        static_id: "fib.m:12"
        futures: [x]
        conjuncts:
          - work_ns: 1000
            signals: [{var: x, at_ns: 500}]
          - work_ns: 800
            waits: [{var: x, at_ns: 100}]
            calls: [{conj: leaf, at_ns: 400}]
    main:
      - work_ns: 100
      - {conj: fib, repeat: 10}

Offsets are measured in the conjunct's own work time: time spent inside a
nested conjunction, blocked or queued does not advance them.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

SPEC_VERSION = 1
RESUME_POLICIES = ("LAST_ENGINE", "BEFORE_ENGINE", "ANY")

# equal offsets run signal, then wait, then call
_ACTION_ORDER = {"signal": 0, "wait": 1, "call": 2}


class SpecError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class CyclicFutureGraph(SpecError):
    pass


@dataclass(frozen=True)
class Action:
    kind: str  # signal | wait | call
    at_ns: int
    target: str


@dataclass
class ConjunctSpec:
    work_ns: int
    actions: list[Action] = field(default_factory=list)

    def ordered_actions(self) -> list[Action]:
        idx = {id(a): i for i, a in enumerate(self.actions)}
        return sorted(self.actions, key=lambda a: (a.at_ns, _ACTION_ORDER[a.kind], idx[id(a)]))


@dataclass
class ConjunctionSpec:
    name: str
    static_id: str
    futures: list[str]
    conjuncts: list[ConjunctSpec]


@dataclass
class MainStep:
    work_ns: int = 0
    conj: Optional[str] = None
    repeat: int = 1


@dataclass
class SchedulerParams:
    spark_overhead_ns: int = 0
    steal_latency_ns: int = 1
    wakeup_latency_ns: int = 1
    probe_latency_ns: int = 0
    context_pool_size: int = 8
    resume_policy: str = "LAST_ENGINE"
    jitter_ns: int = 0


@dataclass
class GcParams:
    period_ns: int
    duration_ns: int
    first_at_ns: Optional[int] = None

    @property
    def first(self) -> int:
        return self.period_ns if self.first_at_ns is None else self.first_at_ns


@dataclass
class BackgroundTask:
    at_ns: int
    work_ns: int


@dataclass
class WorkloadSpec:
    n_engines: int
    conjunctions: dict[str, ConjunctionSpec]
    main: list[MainStep]
    seed: int = 0
    scheduler: SchedulerParams = field(default_factory=SchedulerParams)
    gc: Optional[GcParams] = None
    background: list[BackgroundTask] = field(default_factory=list)
    barrier_pool: int = 16
    future_pool: int = 3
    spec_version: int = SPEC_VERSION

    def to_dict(self) -> dict:
        conjs = {}
        for name, c in self.conjunctions.items():
            cjs = []
            for cj in c.conjuncts:
                d: dict[str, Any] = {"work_ns": cj.work_ns}
                for kind, key, tkey in (("signal", "signals", "var"), ("wait", "waits", "var"),
                                        ("call", "calls", "conj")):
                    acts = [{tkey: a.target, "at_ns": a.at_ns} for a in cj.actions if a.kind == kind]
                    if acts:
                        d[key] = acts
                cjs.append(d)
            conjs[name] = {"static_id": c.static_id, "futures": list(c.futures), "conjuncts": cjs}
        main = []
        for s in self.main:
            if s.conj is None:
                main.append({"work_ns": s.work_ns})
            else:
                main.append({"conj": s.conj, "repeat": s.repeat})
        out: dict[str, Any] = {
            "spec_version": self.spec_version,
            "n_engines": self.n_engines,
            "seed": self.seed,
            "scheduler": asdict(self.scheduler),
            "addresses": {"barrier_pool": self.barrier_pool, "future_pool": self.future_pool},
            "conjunctions": conjs,
            "main": main,
        }
        if self.gc is not None:
            out["gc"] = asdict(self.gc)
        if self.background:
            out["background"] = [asdict(b) for b in self.background]
        return out

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


# ---------------------------------------------------------------- parsing

def _int(d: dict, key: str, path: str, default=None, minimum: Optional[int] = None) -> int:
    if key not in d:
        if default is None:
            raise SpecError(f"{path}.{key}", "required field missing")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise SpecError(f"{path}.{key}", f"expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise SpecError(f"{path}.{key}", f"must be >= {minimum}, got {v}")
    return v


def _mapping(v, path: str) -> dict:
    if not isinstance(v, dict):
        raise SpecError(path, f"expected a mapping, got {type(v).__name__}")
    return v


def _list(v, path: str) -> list:
    if v is None:
        return []
    if not isinstance(v, list):
        raise SpecError(path, f"expected a list, got {type(v).__name__}")
    return v


def _check_keys(d: dict, allowed: set, path: str):
    extra = set(d) - allowed
    if extra:
        raise SpecError(path, f"unknown field(s): {', '.join(sorted(map(str, extra)))}")


def spec_from_dict(doc: Any) -> WorkloadSpec:
    doc = _mapping(doc, "$")
    _check_keys(doc, {"spec_version", "n_engines", "seed", "scheduler", "gc", "background",
                      "addresses", "conjunctions", "main"}, "$")
    ver = _int(doc, "spec_version", "$", default=SPEC_VERSION)
    if ver != SPEC_VERSION:
        raise SpecError("$.spec_version", f"unsupported version {ver}")
    n = _int(doc, "n_engines", "$", minimum=1)
    if n > 0xFFFF:
        raise SpecError("$.n_engines", "too many engines")
    seed = _int(doc, "seed", "$", default=0)

    sd = _mapping(doc.get("scheduler") or {}, "$.scheduler")
    _check_keys(sd, set(SchedulerParams.__dataclass_fields__), "$.scheduler")
    dflt = SchedulerParams()
    sched = SchedulerParams(
        spark_overhead_ns=_int(sd, "spark_overhead_ns", "$.scheduler", dflt.spark_overhead_ns, 0),
        steal_latency_ns=_int(sd, "steal_latency_ns", "$.scheduler", dflt.steal_latency_ns, 0),
        wakeup_latency_ns=_int(sd, "wakeup_latency_ns", "$.scheduler", dflt.wakeup_latency_ns, 1),
        probe_latency_ns=_int(sd, "probe_latency_ns", "$.scheduler", dflt.probe_latency_ns, 0),
        context_pool_size=_int(sd, "context_pool_size", "$.scheduler", dflt.context_pool_size, 0),
        resume_policy=sd.get("resume_policy", dflt.resume_policy),
        jitter_ns=_int(sd, "jitter_ns", "$.scheduler", dflt.jitter_ns, 0),
    )
    if sched.resume_policy not in RESUME_POLICIES:
        raise SpecError("$.scheduler.resume_policy",
                        f"expected one of {', '.join(RESUME_POLICIES)}")

    gc = None
    if doc.get("gc") is not None:
        gd = _mapping(doc["gc"], "$.gc")
        _check_keys(gd, {"period_ns", "duration_ns", "first_at_ns"}, "$.gc")
        gc = GcParams(_int(gd, "period_ns", "$.gc", minimum=1),
                      _int(gd, "duration_ns", "$.gc", minimum=1),
                      _int(gd, "first_at_ns", "$.gc", minimum=0) if "first_at_ns" in gd else None)
        if gc.period_ns <= gc.duration_ns:
            raise SpecError("$.gc.period_ns", "must exceed duration_ns")

    bg = []
    for i, b in enumerate(_list(doc.get("background"), "$.background")):
        p = f"$.background[{i}]"
        b = _mapping(b, p)
        _check_keys(b, {"at_ns", "work_ns"}, p)
        bg.append(BackgroundTask(_int(b, "at_ns", p, minimum=0), _int(b, "work_ns", p, minimum=1)))

    ad = _mapping(doc.get("addresses") or {}, "$.addresses")
    _check_keys(ad, {"barrier_pool", "future_pool"}, "$.addresses")
    bpool = _int(ad, "barrier_pool", "$.addresses", 16, 1)
    fpool = _int(ad, "future_pool", "$.addresses", 3, 1)

    conjs: dict[str, ConjunctionSpec] = {}
    cdoc = _mapping(doc.get("conjunctions") or {}, "$.conjunctions")
    for name, cd in cdoc.items():
        p = f"$.conjunctions.{name}"
        cd = _mapping(cd, p)
        _check_keys(cd, {"static_id", "futures", "conjuncts"}, p)
        sid = cd.get("static_id", str(name))
        if not isinstance(sid, str) or not sid:
            raise SpecError(f"{p}.static_id", "must be a non-empty string")
        futs = [str(f) for f in _list(cd.get("futures"), f"{p}.futures")]
        if len(set(futs)) != len(futs):
            raise SpecError(f"{p}.futures", "duplicate variable name")
        cjs = []
        for k, cjd in enumerate(_list(cd.get("conjuncts"), f"{p}.conjuncts")):
            q = f"{p}.conjuncts[{k}]"
            cjd = _mapping(cjd, q)
            _check_keys(cjd, {"work_ns", "signals", "waits", "calls"}, q)
            w = _int(cjd, "work_ns", q, minimum=1)
            acts = []
            for kind, key, tkey in (("signal", "signals", "var"), ("wait", "waits", "var"),
                                    ("call", "calls", "conj")):
                for j, ad_ in enumerate(_list(cjd.get(key), f"{q}.{key}")):
                    r = f"{q}.{key}[{j}]"
                    ad_ = _mapping(ad_, r)
                    _check_keys(ad_, {tkey, "at_ns"}, r)
                    if tkey not in ad_:
                        raise SpecError(f"{r}.{tkey}", "required field missing")
                    at = _int(ad_, "at_ns", r, default=0, minimum=0)
                    if at > w:
                        raise SpecError(f"{r}.at_ns", f"offset {at} beyond work_ns {w}")
                    acts.append(Action(kind, at, str(ad_[tkey])))
            cjs.append(ConjunctSpec(w, acts))
        if len(cjs) < 2:
            raise SpecError(f"{p}.conjuncts", "a parallel conjunction needs at least 2 conjuncts")
        conjs[str(name)] = ConjunctionSpec(str(name), sid, futs, cjs)

    main = []
    for i, sdoc in enumerate(_list(doc.get("main"), "$.main")):
        p = f"$.main[{i}]"
        sdoc = _mapping(sdoc, p)
        _check_keys(sdoc, {"work_ns", "conj", "repeat"}, p)
        if "conj" in sdoc:
            if "work_ns" in sdoc:
                raise SpecError(p, "a step is either work_ns or conj, not both")
            main.append(MainStep(conj=str(sdoc["conj"]), repeat=_int(sdoc, "repeat", p, 1, 0)))
        else:
            main.append(MainStep(work_ns=_int(sdoc, "work_ns", p, minimum=1)))

    spec = WorkloadSpec(n, conjs, main, seed, sched, gc, bg, bpool, fpool, ver)
    validate_spec(spec)
    return spec


def validate_spec(spec: WorkloadSpec) -> None:
    """Structural checks; raises SpecError or CyclicFutureGraph."""
    names = spec.conjunctions
    for i, s in enumerate(spec.main):
        if s.conj is not None and s.conj not in names:
            raise SpecError(f"$.main[{i}].conj", f"unknown conjunction {s.conj!r}")
    for name, c in names.items():
        p = f"$.conjunctions.{name}"
        producer: dict[str, int] = {}
        consumers: dict[str, list[int]] = {v: [] for v in c.futures}
        for k, cj in enumerate(c.conjuncts):
            for a in cj.actions:
                q = f"{p}.conjuncts[{k}]"
                if a.kind == "call":
                    if a.target not in names:
                        raise SpecError(q, f"unknown conjunction {a.target!r}")
                    continue
                if a.target not in consumers:
                    raise SpecError(q, f"variable {a.target!r} is not a future of {name}")
                if a.kind == "signal":
                    if a.target in producer:
                        raise SpecError(q, f"variable {a.target!r} has more than one producer")
                    producer[a.target] = k
                else:
                    consumers[a.target].append(k)
        for v in c.futures:
            if v not in producer:
                raise SpecError(f"{p}.futures", f"variable {v!r} has no producer")
        # dependency edges producer -> consumer; a cycle can never be satisfied
        succ: dict[int, set[int]] = {k: set() for k in range(len(c.conjuncts))}
        for v, cons in consumers.items():
            for k in cons:
                if k != producer[v]:
                    succ[producer[v]].add(k)
        _check_acyclic(succ, f"{p}.futures")
        for v, cons in consumers.items():
            for k in cons:
                if k <= producer[v]:
                    raise SpecError(f"{p}.conjuncts[{k}]",
                                    f"waits for {v!r} which is produced at or right of it")
    # nested calls must not recurse
    state: dict[str, int] = {}

    def visit(n: str, trail: list[str]):
        st = state.get(n)
        if st == 2:
            return
        if st == 1:
            raise SpecError(f"$.conjunctions.{n}", "recursive call chain: " + " -> ".join(trail + [n]))
        state[n] = 1
        for cj in names[n].conjuncts:
            for a in cj.actions:
                if a.kind == "call":
                    visit(a.target, trail + [n])
        state[n] = 2

    for n in names:
        visit(n, [])


def _check_acyclic(succ: dict[int, set[int]], path: str) -> None:
    color: dict[int, int] = {}
    for root in succ:
        if root in color:
            continue
        stack = [(root, iter(sorted(succ[root])))]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node] = 2
                stack.pop()
            elif color.get(nxt) == 1:
                raise CyclicFutureGraph(path, f"conjuncts {node} and {nxt} wait on each other")
            elif nxt not in color:
                color[nxt] = 1
                stack.append((nxt, iter(sorted(succ[nxt]))))


def load_spec(source: Union[str, Path, dict]) -> WorkloadSpec:
    """From a dict, a path to a YAML/JSON file, or YAML text."""
    if isinstance(source, dict):
        return spec_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).exists()):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecError("$", f"not valid YAML/JSON: {exc}") from None
    return spec_from_dict(doc)


def spec_json(spec: WorkloadSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True)
