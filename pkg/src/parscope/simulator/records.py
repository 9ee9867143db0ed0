"""Ground-truth records kept by the simulator while it runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass(eq=False)
class TrueConjunct:
    conj: "TrueConjunction"
    position: int
    spark: Optional[int]
    created: int
    exec_start: Optional[int] = None
    end: Optional[int] = None
    context: Optional[int] = None
    children: list["TrueConjunction"] = field(default_factory=list)


@dataclass(eq=False)
class TrueConjunction:
    id: int
    name: str
    static_id: str
    start: int
    start_engine: int
    context: int
    parent: Optional[TrueConjunct]
    barrier: int
    conjuncts: list[TrueConjunct] = field(default_factory=list)
    futures: list["TrueFuture"] = field(default_factory=list)
    end: Optional[int] = None
    end_engine: Optional[int] = None
    last_end_engine: Optional[int] = None


@dataclass(eq=False)
class TrueWait:
    time: int
    suspended: bool
    consumer: TrueConjunct
    seq: int


@dataclass(eq=False)
class TrueFuture:
    id: int
    name: str
    conj: TrueConjunction
    address: int
    created: int
    signal_time: Optional[int] = None
    producer: Optional[TrueConjunct] = None
    waiters_at_signal: int = 0
    waits: list[TrueWait] = field(default_factory=list)


@dataclass
class TrueEpisode:
    engine: int
    start: int
    after_sleep: bool
    enabling: Optional[int]
    end: Optional[int] = None
    source: Optional[str] = None


@dataclass
class GroundTruth:
    """Everything the simulator knows about one run."""

    n_engines: int
    start: int = 0
    end: int = 0
    # per engine: (start, end, label)
    activity: list[list[tuple[int, int, str]]] = field(default_factory=list)
    # per context id: (start, end, phase, future id or None)
    phases: dict[int, list[tuple[int, int, str, Optional[int]]]] = field(default_factory=dict)
    conjunctions: list[TrueConjunction] = field(default_factory=list)
    futures: list[TrueFuture] = field(default_factory=list)
    gc: list[tuple[int, int]] = field(default_factory=list)
    episodes: list[TrueEpisode] = field(default_factory=list)
    # (time, engine, context, reused)
    spark_threads: list[tuple[int, int, int, bool]] = field(default_factory=list)
    raw_barriers: set[int] = field(default_factory=set)
    raw_futures: set[int] = field(default_factory=set)
    event_count: int = 0

    def structure(self) -> dict:
        """Conjunction forest as plain data."""
        out = []
        for c in self.conjunctions:
            out.append({
                "id": c.id,
                "static_id": c.static_id,
                "parent": [c.parent.conj.id, c.parent.position] if c.parent else None,
                "conjuncts": len(c.conjuncts),
                "start_ns": c.start,
                "end_ns": c.end,
                "futures": [f.id for f in c.futures],
            })
        return {
            "conjunctions": out,
            "future_count": len(self.futures),
            "raw_barrier_addresses": len(self.raw_barriers),
            "raw_future_addresses": len(self.raw_futures),
        }
