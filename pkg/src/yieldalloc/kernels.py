"""Hot inner loops, each with a numba kernel and a numpy twin.

The module-level names (``assign``, ``tally``, ...) point at whichever
backend :mod:`yieldalloc._accel` selected. ``BACKENDS`` exposes both so the
benchmark and the equivalence tests can call them side by side.

Conventions: ``q`` is an (n, m) float64 quality matrix, ``b2`` the (n,)
second-highest RTB bids, ``lam``/``alpha`` are (m,) vectors. Winners are
0-based contract indices, ``-1`` meaning RTB.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# --
# greedy allocation under fixed bid shifts


def _assign_py(q, b2, lam, alpha, out):
    n, m = q.shape
    beta_sum = 0.0
    for i in range(n):
        best = -np.inf
        jbest = -1
        for j in range(m):
            b = lam[j] * q[i, j] + alpha[j]
            if b > best:
                best = b
                jbest = j
        if jbest >= 0 and best > b2[i]:
            out[i] = jbest
            beta_sum += best - b2[i]
        else:
            out[i] = -1
    return beta_sum


_assign_nb = njit(_assign_py)


def _assign_np(q, b2, lam, alpha, out):
    n, m = q.shape
    if m == 0 or n == 0:
        out[:] = -1
        return 0.0
    bids = q * lam + alpha
    j = bids.argmax(axis=1)
    best = bids[np.arange(n), j]
    win = best > b2
    out[:] = np.where(win, j, -1)
    return float(np.sum((best - b2)[win]))


# --
# Ledger increments for a block of decided impressions


def _tally_py(winners, q, b2, delivered, quality_sum):
    rtb = 0.0
    for i in range(winners.shape[0]):
        j = winners[i]
        if j < 0:
            rtb += b2[i]
        else:
            delivered[j] += 1
            quality_sum[j] += q[i, j]
    return rtb


_tally_nb = njit(_tally_py)


def _tally_np(winners, q, b2, delivered, quality_sum):
    m = delivered.shape[0]
    won = winners >= 0
    if m:
        idx = winners[won]
        delivered += np.bincount(idx, minlength=m)
        quality_sum += np.bincount(idx, weights=q[won, idx], minlength=m)
    return float(np.sum(b2[~won]))


# --
# Contract-First fallback: serve unfulfilled contracts regardless of RTB


def _fallback_py(q, b2, lam, alpha, remaining, out):
    n, m = q.shape
    for i in range(n):
        best = -np.inf
        jbest = -1
        for j in range(m):
            if remaining[j] > 0:
                b = lam[j] * q[i, j] + alpha[j]
                if b > best:
                    best = b
                    jbest = j
        if jbest >= 0:
            out[i] = jbest
            remaining[jbest] -= 1
            continue
        # every demand met: normal rule
        best = -np.inf
        for j in range(m):
            b = lam[j] * q[i, j] + alpha[j]
            if b > best:
                best = b
                jbest = j
        if jbest >= 0 and best > b2[i]:
            out[i] = jbest
        else:
            out[i] = -1


_fallback_nb = njit(_fallback_py)


def _fallback_np(q, b2, lam, alpha, remaining, out):
    n, m = q.shape
    bids = q * lam + alpha
    start = 0
    while start < n:
        open_ = remaining > 0
        if not open_.any():
            _assign_np(q[start:], b2[start:], lam, alpha, out[start:])
            return
        masked = np.where(open_, bids[start:], -np.inf)
        j = masked.argmax(axis=1)
        # run the greedy rule until the first contract saturates
        hits = np.zeros((n - start, m), dtype=np.int64)
        hits[np.arange(n - start), j] = 1
        cum = np.cumsum(hits, axis=0)
        full = cum >= remaining
        full[:, ~open_] = False
        rows = np.flatnonzero(full.any(axis=1))
        stop = n - start if rows.size == 0 else rows[0] + 1
        out[start:start + stop] = j[:stop]
        remaining -= cum[stop - 1]
        start += stop


# --
# Exhaustive search over assignments {RTB, 1..m}^n


def _brute_py(gain, d, p):
    # gain[i, j] = lam_j q_ij - b2_i; constants are re-added by the caller
    n, m = gain.shape
    digits = np.zeros(n, dtype=np.int64)
    best_digits = np.zeros(n, dtype=np.int64)
    counts = np.zeros(m, dtype=np.int64)
    acc = 0.0
    best = -np.inf
    while True:
        pen = 0.0
        for j in range(m):
            short = d[j] - counts[j]
            if short > 0:
                pen += p[j] * short
        val = acc - pen
        if val > best:
            best = val
            best_digits[:] = digits
        i = 0
        while i < n:
            dg = digits[i]
            if dg > 0:
                acc -= gain[i, dg - 1]
                counts[dg - 1] -= 1
            dg += 1
            if dg > m:
                digits[i] = 0
                i += 1
                continue
            digits[i] = dg
            acc += gain[i, dg - 1]
            counts[dg - 1] += 1
            break
        if i == n:
            break
    return best_digits


_brute_nb = njit(_brute_py)


def _brute_np(gain, d, p, chunk=1 << 16):
    n, m = gain.shape
    total = (m + 1) ** n
    g = np.concatenate([np.zeros((n, 1)), gain], axis=1)
    radix = (m + 1) ** np.arange(n, dtype=np.int64)
    best = -np.inf
    best_digits = np.zeros(n, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // radix) % (m + 1)
        acc = g[np.arange(n), digits].sum(axis=1) if n else np.zeros(idx.size)
        counts = (digits[:, :, None] == np.arange(1, m + 1)).sum(axis=1)
        pen = (np.maximum(d - counts, 0) * p).sum(axis=1)
        val = acc - pen
        k = int(val.argmax())
        if val[k] > best:
            best = val[k]
            best_digits = digits[k].copy()
    return best_digits


BACKENDS = {
    "numba": {
        "assign": _assign_nb,
        "tally": _tally_nb,
        "fallback": _fallback_nb,
        "brute": _brute_nb,
    },
    "numpy": {
        "assign": _assign_np,
        "tally": _tally_np,
        "fallback": _fallback_np,
        "brute": _brute_np,
    },
}

_active = BACKENDS["numba" if USE_NUMBA else "numpy"]
assign = _active["assign"]
tally = _active["tally"]
fallback = _active["fallback"]
brute = _active["brute"]
