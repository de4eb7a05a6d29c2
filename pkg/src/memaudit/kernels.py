"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``MEMAUDIT_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and by the kernel-agreement tests).
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_ext = None
if os.environ.get("MEMAUDIT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _ext  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _ext = None


def _i32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.int32)


def suffix_array(text) -> np.ndarray:
    if _ext is not None:
        return _ext.suffix_array(_i32(text))
    return _fallback.suffix_array(np.asarray(text))


def sa_range(text, sa, query, text_list=None) -> tuple[int, int]:
    if _ext is not None:
        return _ext.sa_range(_i32(text), np.ascontiguousarray(sa, dtype=np.int64), _i32(query))
    return _fallback.sa_range(text_list if text_list is not None else text, sa, query)


def lcs(a, b) -> tuple[int, int, int]:
    if len(a) == 0 or len(b) == 0:
        return 0, 0, 0
    if _ext is not None:
        return _ext.lcs(_i32(a), _i32(b))
    return _fallback.lcs(a, b)


def best_window(gen, doc, offset, anchor_start, anchor_end, window) -> tuple[int, int]:
    if _ext is not None:
        return _ext.best_window(_i32(gen), _i32(doc), offset, anchor_start, anchor_end, window)
    return _fallback.best_window(gen, doc, offset, anchor_start, anchor_end, window)
