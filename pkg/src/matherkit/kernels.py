"""Backend selection for the min-plus kernels.

The compiled extension ``matherkit._core`` is used when importable, unless
``MATHERKIT_PURE_PYTHON`` is set to a true value. ``MATHERKIT_THREADS`` caps
the OpenMP thread count of the compiled kernels (0 = auto).
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on build
    _core = None


def _truthy(value: str | None) -> bool:
    return (value or "").strip().lower() in {"1", "true", "yes", "on"}


def thread_count() -> int:
    raw = os.environ.get("MATHERKIT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"MATHERKIT_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("MATHERKIT_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


if _core is not None and not _truthy(os.environ.get("MATHERKIT_PURE_PYTHON")):
    backend = _core
    BACKEND = "compiled"
else:
    backend = _fallback
    BACKEND = "python"


def _prep(band, offsets):
    return (np.ascontiguousarray(band, dtype=np.float64),
            np.ascontiguousarray(offsets, dtype=np.int64))


def lax_oleinik(band, offsets, u0, n_iters: int, keep: int = 0, impl=None):
    impl = impl or backend
    band, offsets = _prep(band, offsets)
    u0 = np.ascontiguousarray(u0, dtype=np.float64)
    return impl.lax_oleinik(band, offsets, u0, int(n_iters), int(keep), thread_count())


def minplus_band(table, band, offsets, impl=None):
    impl = impl or backend
    band, offsets = _prep(band, offsets)
    table = np.ascontiguousarray(table, dtype=np.float64)
    return impl.minplus_band(table, band, offsets, thread_count())
