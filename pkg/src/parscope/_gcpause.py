"""Pause the cyclic garbage collector around bulk allocation."""

from __future__ import annotations

import functools
import gc


def gc_paused(fn):
    """Run ``fn`` with automatic collection off.

    Building millions of small tuples and records otherwise triggers
    repeated full scans of objects that are all still alive.  The previous
    collector state is restored on exit, so nesting is harmless.
    """
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            return fn(*args, **kwargs)
        finally:
            if was_enabled:
                gc.enable()
    return wrapper
