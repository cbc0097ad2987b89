"""Hot numeric kernels: transducer lattice recursion and Levenshtein DP.

Two interchangeable backends exist: ``_fast`` (compiled extension) and
``_pure`` (NumPy fallback).  The compiled one is preferred when importable;
set ASRKIT_KERNEL=pure or ASRKIT_KERNEL=compiled to force a choice.
``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import importlib
import os

from ..errors import ConfigError


def backend_module(name: str):
    """Import a backend by name ('compiled' or 'pure')."""
    if name == "pure":
        return importlib.import_module("asrkit.kernels._pure")
    if name == "compiled":
        return importlib.import_module("asrkit.kernels._fast")
    raise ConfigError(f"unknown kernel backend {name!r}")


def _select():
    requested = os.environ.get("ASRKIT_KERNEL", "auto").strip().lower()
    if requested in ("", "auto"):
        try:
            return "compiled", backend_module("compiled")
        except ImportError:
            return "pure", backend_module("pure")
    if requested in ("compiled", "fast"):
        return "compiled", backend_module("compiled")
    if requested in ("pure", "python"):
        return "pure", backend_module("pure")
    raise ConfigError(f"ASRKIT_KERNEL must be 'auto', 'compiled' or 'pure', "
                      f"got {requested!r}")


BACKEND, _impl = _select()

transducer_loss = _impl.transducer_loss
edit_distance = _impl.edit_distance
edit_matrix = _impl.edit_matrix

__all__ = ["BACKEND", "backend_module", "transducer_loss",
           "edit_distance", "edit_matrix"]
