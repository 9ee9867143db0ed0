"""Trace analysis for spark-based dependent AND-parallel runtimes."""

from .analysis import analyze, canonical_trace, model_from_log
from .eventlog import Event, EventKind, Log, decode_log, encode_log, validate_wellformed
from .metrics import ReportOptions, build_report
from .prepass import canonicalize
from .reconstruct import build_model

__version__ = "0.1.0"

__all__ = [
    "Event",
    "EventKind",
    "Log",
    "ReportOptions",
    "analyze",
    "build_model",
    "build_report",
    "canonical_trace",
    "canonicalize",
    "decode_log",
    "encode_log",
    "model_from_log",
    "validate_wellformed",
]
