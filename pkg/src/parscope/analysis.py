"""Decode, canonicalize and model a log in one call."""

from __future__ import annotations

from typing import Optional

from .eventlog import Log, analysis_order, decode_log
from .metrics import ReportOptions, build_report
from .prepass import CanonicalTrace, canonicalize
from .reconstruct import ExecutionModel, build_model


def canonical_trace(log: Log) -> CanonicalTrace:
    return canonicalize(analysis_order(log.events))


def model_from_log(log: Log) -> ExecutionModel:
    return build_model(canonical_trace(log))


def analyze(data: bytes, options: Optional[ReportOptions] = None) -> dict:
    """Report document for an encoded log."""
    return build_report(model_from_log(decode_log(data)), options)
