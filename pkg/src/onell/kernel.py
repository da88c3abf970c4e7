"""Kernel selection.

The compiled ``_ckernel`` is used when it imports; otherwise the pure-Python
``_pykernel`` takes over.  Setting ``ONELL_PURE_PYTHON=1`` forces the fallback.
Both expose ``NAME``, ``generate_clauses``, ``run_engine`` and
``round_half_up`` with identical semantics.
"""

from __future__ import annotations

import logging
import os

from . import _pykernel

log = logging.getLogger(__name__)


def _select():
    if os.environ.get("ONELL_PURE_PYTHON", "").strip() not in ("", "0"):
        return _pykernel
    try:
        from . import _ckernel
    except ImportError as exc:  # pragma: no cover - depends on build
        log.debug("compiled kernel unavailable (%s); using pure Python", exc)
        return _pykernel
    return _ckernel


kernel = _select()
pykernel = _pykernel


def compiled_kernel():
    """The compiled kernel module, or ``None`` when it was not built."""
    try:
        from . import _ckernel
    except ImportError:
        return None
    return _ckernel
