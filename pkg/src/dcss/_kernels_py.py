"""NumPy implementation of the batched consensus kernel.

Used when the compiled ``_ckernels`` extension is unavailable.  Both
implementations share one contract, documented on :func:`consensus_batch`.
"""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def spread_db(x: np.ndarray) -> np.ndarray:
    """Max-minus-min of the states in dB along the last axis."""
    return 10.0 * np.log10(x.max(axis=-1)) - 10.0 * np.log10(x.min(axis=-1))


def consensus_batch(x0, ei, ej, cij, cji, masks, max_iters, threshold_db, stop):
    """Run ``trials`` independent consensus iterations in edge form.

    For every active edge ``e = (i, j)`` at step ``k`` the synchronous update is
    ``x_i += cij[e] (x_j - x_i)`` and ``x_j += cji[e] (x_i - x_j)``.

    Args:
        x0: ``(trials, n)`` positive initial states.
        ei, ej: edge endpoints, shape ``(E,)``.
        cij, cji: per-edge coefficients, shape ``(E,)``.
        masks: ``(trials, max_iters, E)`` uint8 link survival, or None for a
            fixed network.
        max_iters: iteration cap ``K``.
        threshold_db: spread threshold for convergence.
        stop: when true a trial freezes at its first converged iteration.

    Returns:
        ``(x, conv_iter, bad_trial)`` where ``x`` holds the frozen (or final)
        states, ``conv_iter[t]`` is the first ``k`` with spread <= threshold or
        -1, and ``bad_trial`` is the first trial that produced a nonpositive
        state (-1 if none).
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    trials, n = x.shape
    ei = np.asarray(ei, dtype=np.intp)
    ej = np.asarray(ej, dtype=np.intp)
    cij = np.asarray(cij, dtype=np.float64)
    cji = np.asarray(cji, dtype=np.float64)
    conv = np.full(trials, -1, dtype=np.int64)
    if np.any(x <= 0):
        return x, conv, int(np.argmax(np.any(x <= 0, axis=1)))
    m = ei.size
    bi = np.zeros((m, n))
    bj = np.zeros((m, n))
    bi[np.arange(m), ei] = 1.0
    bj[np.arange(m), ej] = 1.0

    hit = spread_db(x) <= threshold_db
    conv[hit] = 0
    active = ~hit if stop else np.ones(trials, dtype=bool)
    for k in range(max_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        diff = xa[:, ej] - xa[:, ei]
        if masks is None:
            fi = diff * cij
            fj = diff * cji
        else:
            mk = masks[idx, k, :].astype(np.float64)
            fi = diff * cij * mk
            fj = diff * cji * mk
        xa = xa + fi @ bi - fj @ bj
        x[idx] = xa
        if np.any(xa <= 0):
            return x, conv, int(idx[np.argmax(np.any(xa <= 0, axis=1))])
        newly = (spread_db(xa) <= threshold_db) & (conv[idx] < 0)
        conv[idx[newly]] = k + 1
        if stop:
            active[idx[newly]] = False
    return x, conv, -1
