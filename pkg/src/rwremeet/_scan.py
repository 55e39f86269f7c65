"""Compiled single-pass scan for stable minima and separating maxima.

The scan alternates between three states: looking for the first stable
minimum (running minimum until a rise of ``h``), tracking a candidate maximum
(until a drop of ``h``), and tracking a candidate minimum (until a rise of
``h``). Ties resolve to the leftmost index. Threshold comparisons are written
as ``w[hi] >= w[lo] + h`` everywhere so that the exhaustive checker in the
tests evaluates the very same floating point expression.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def scan_extrema(w, h, max_minima, stop_index):
    """Return ``(minima, maxima, n_min, n_max, deepest)``.

    ``maxima[i]`` separates ``minima[i]`` and ``minima[i + 1]``; only maxima
    followed by a confirmed minimum are counted in ``n_max``. The scan stops
    early once ``max_minima`` minima are confirmed (``max_minima <= 0``: no
    limit) or once no further minimum at or before ``stop_index`` can be
    confirmed (``stop_index < 0``: no limit). ``deepest`` is the running
    minimum index while the first minimum is still unconfirmed, else -1.
    """
    n = w.shape[0]
    cap = n // 2 + 2
    minima = np.empty(cap, np.int64)
    maxima = np.empty(cap, np.int64)
    n_min = 0
    n_max = 0
    state = 0
    cand = 0
    for x in range(1, n):
        wx = w[x]
        if state == 0:
            if wx < w[cand]:
                cand = x
            elif wx >= w[cand] + h:
                minima[n_min] = cand
                n_min += 1
                if max_minima > 0 and n_min >= max_minima:
                    break
                state = 1
                cand = x
        elif state == 1:
            if wx > w[cand]:
                cand = x
            elif w[cand] >= wx + h:
                maxima[n_max] = cand
                n_max += 1
                state = 2
                cand = x
        else:
            if wx < w[cand]:
                cand = x
            elif wx >= w[cand] + h:
                minima[n_min] = cand
                n_min += 1
                if max_minima > 0 and n_min >= max_minima:
                    break
                state = 1
                cand = x
        if stop_index >= 0 and cand > stop_index:
            break
    deepest = cand if n_min == 0 else -1
    if n_max > n_min - 1:
        n_max = max(n_min - 1, 0)
    return minima[:n_min].copy(), maxima[:n_max].copy(), n_min, n_max, deepest


@njit(cache=True, nogil=True)
def leftmost_argmax_open(w, a, b):
    """Leftmost argmax of ``w`` over the open index range ``(a, b)``."""
    best = a + 1
    for x in range(a + 2, b):
        if w[x] > w[best]:
            best = x
    return best
