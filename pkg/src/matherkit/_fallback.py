"""Pure numpy versions of the kernels in ``_core.pyx``.

Same signatures and results; selected automatically when the compiled
extension is missing or ``MATHERKIT_PURE_PYTHON=1``.
"""

import numpy as np


def _sources(nx, offsets):
    return (np.arange(nx)[:, None] - np.asarray(offsets)[None, :]) % nx


def lax_oleinik(band, offsets, u0, n_iters, keep, num_threads=1):
    band = np.asarray(band, dtype=float)
    nx = band.shape[0]
    src = _sources(nx, offsets)
    u = np.array(u0, dtype=float)
    keep = min(keep, n_iters)
    mins = np.empty(n_iters + 1)
    kept = np.empty((keep + 1, nx))
    mins[0] = u.min()
    kept[0] = u
    for n in range(1, n_iters + 1):
        u = (u[src] + band).min(axis=1)
        mins[n] = u.min()
        if n <= keep:
            kept[n] = u
    return u, mins, kept


def minplus_band(table, band, offsets, num_threads=1):
    table = np.asarray(table, dtype=float)
    band = np.asarray(band, dtype=float)
    if table.shape[1] != band.shape[0]:
        raise ValueError("table and band disagree on nx")
    out = np.full(table.shape, np.inf)
    for m, k in enumerate(offsets):
        np.minimum(out, np.roll(table, int(k), axis=1) + band[:, m][None, :], out=out)
    return out
