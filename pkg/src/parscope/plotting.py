"""SVG figures: the per-engine timeline and report summaries."""

from __future__ import annotations

import io
import re
from pathlib import Path
from typing import Optional

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
from matplotlib.patches import Patch

from .metrics import PHASE_NAMES, cpus_over_time
from .reconstruct import GC, IDLE, MUTATOR, SEARCHING, ExecutionModel
from .stats import StepCurve

ACTIVITY_COLORS = {
    IDLE: "#f2f2f2",
    SEARCHING: "#f0c419",
    MUTATOR: "#2e8b57",
    GC: "#c0392b",
}
PHASE_COLORS = {
    "time_as_spark": "#9b59b6",
    "time_blocked": "#c0392b",
    "time_runnable": "#f0c419",
    "time_running": "#2e8b57",
    "time_after": "#7f8c8d",
}
# fixed salt and no date so identical inputs give identical bytes
_SVG_RC = {"svg.hashsalt": "parscope", "svg.fonttype": "none", "path.simplify": False}


def _svg(fig: Figure) -> str:
    FigureCanvasSVG(fig)
    buf = io.StringIO()
    with matplotlib.rc_context(_SVG_RC):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def _step_xy(curve: StepCurve):
    xs, ys = [], []
    for t, v in curve.points:
        xs.append(t)
        ys.append(v)
    xs.append(curve.end)
    ys.append(ys[-1])
    return xs, ys


def timeline_svg(model: ExecutionModel, t_from: Optional[int] = None,
                 t_to: Optional[int] = None, mutator_only: bool = False) -> str:
    """Engine rows colored by activity under the CPUs-in-use curve."""
    a = model.start if t_from is None else max(model.start, t_from)
    b = model.end if t_to is None else min(model.end, t_to)
    if b < a:
        raise ValueError(f"empty time range {a}..{b}")
    span = max(b - a, 1)
    n = model.n_engines
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=(10, 2.2 + 0.35 * max(n, 1)))
        gs = fig.add_gridspec(2, 1, height_ratios=[1.5, max(n, 1) * 0.35], hspace=0.08)
        ax_c = fig.add_subplot(gs[0])
        ax_e = fig.add_subplot(gs[1], sharex=ax_c)

        if b > a:
            curve = cpus_over_time(model, mutator_only).restrict(a, b)
        else:
            curve = StepCurve.constant(0, a, b)
        xs, ys = _step_xy(curve)
        ax_c.step(xs, ys, where="post", color="black", linewidth=0.8)
        ax_c.set_ylim(0, max(n, 1) + 0.5)
        ax_c.set_ylabel("CPUs")
        ax_c.tick_params(labelbottom=False)

        for e in range(n):
            row: dict[str, list[tuple[int, int]]] = {}
            for s, t, label, _ in model.engines[e] if e < len(model.engines) else ():
                s, t = max(s, a), min(t, b)
                if t > s:
                    row.setdefault(label, []).append((s, t - s))
            for label in (IDLE, SEARCHING, MUTATOR, GC):
                if label in row:
                    ax_e.broken_barh(row[label], (e - 0.4, 0.8),
                                     facecolors=ACTIVITY_COLORS[label], linewidth=0)
        ax_e.set_ylim(-0.6, max(n, 1) - 0.4)
        ax_e.set_yticks(range(n))
        ax_e.set_yticklabels([f"engine {e}" for e in range(n)])
        ax_e.invert_yaxis()
        ax_e.set_xlim(a, a + span)
        ax_e.set_xlabel("time (ns)")
        handles = [Patch(color=c, label=lab)
                   for lab, c in ACTIVITY_COLORS.items()]
        ax_c.legend(handles=handles, loc="upper right", ncol=4, fontsize="small",
                    frameon=False)
        return _svg(fig)


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text).strip("_") or "site"


def cpus_figure(report: dict) -> str:
    doc = report["program"]["cpus_over_time"]
    curve = StepCurve([tuple(p) for p in doc["points"]], doc["end_ns"])
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=(8, 3))
        ax = fig.add_subplot()
        xs, ys = _step_xy(curve)
        ax.step(xs, ys, where="post", color="black", linewidth=0.8)
        ax.set_xlabel("time (ns)")
        ax.set_ylabel("CPUs in use")
        ax.set_ylim(0, report["program"]["n_engines"] + 0.5)
        fig.tight_layout()
        return _svg(fig)


def phase_figure(sid: str, section: dict) -> str:
    """Stacked mean phase times per conjunct position of one site."""
    positions = sorted(section["conjuncts"], key=int)
    names = ("time_as_spark",) + tuple(p for p in PHASE_NAMES
                                      if p not in ("time_as_spark", "time_as_context"))
    with matplotlib.rc_context(_SVG_RC):
        fig = Figure(figsize=(6, 3.5))
        ax = fig.add_subplot()
        bottom = [0.0] * len(positions)
        for name in names:
            vals = [section["conjuncts"][p][name].get("mean") or 0.0 for p in positions]
            ax.bar(positions, vals, bottom=bottom, color=PHASE_COLORS.get(name, "#999999"),
                   label=name[5:])
            bottom = [x + y for x, y in zip(bottom, vals)]
        ax.set_xlabel("conjunct position")
        ax.set_ylabel("mean time (ns)")
        ax.set_title(sid, fontsize="medium")
        ax.legend(fontsize="small", frameon=False)
        fig.tight_layout()
        return _svg(fig)


def write_report_figures(report: dict, directory: Path) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    path = directory / "cpus_over_time.svg"
    path.write_text(cpus_figure(report), encoding="utf-8")
    written.append(path)
    for sid, sec in report["conjunctions"].items():
        if not sec["conjuncts"]:
            continue
        path = directory / f"phases_{_slug(sid)}.svg"
        path.write_text(phase_figure(sid, sec), encoding="utf-8")
        written.append(path)
    return written
