"""Potential-landscape analysis: stable points and wells, elevation, barrier
heights, the weighted-depth functional ``zeta`` and the multiscale cascade.

All functions take a :class:`~rwremeet.env.Path` (or a bare array, read as a
path with unit step) and work on grid indices. ``t`` only ever enters through
``lnt = ln(t)``; a point is ``t``-stable when it is protected by rises of at
least ``lnt``. Ties between equal grid values resolve to the leftmost index.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._scan import leftmost_argmax_open, scan_extrema
from .env import Path
from .errors import ConfigurationError, HorizonError


def _values(path):
    if isinstance(path, Path):
        return path.values
    w = np.asarray(path, dtype=float)
    if w.ndim != 1:
        raise ConfigurationError("path values must be 1-d")
    return w


def _check_lnt(lnt):
    if not (lnt > 0 and math.isfinite(lnt)):
        raise ConfigurationError(f"lnt must be a positive finite number, got {lnt}")


@dataclass(frozen=True)
class StableDecomposition:
    """Stable points, separating peaks and wells of a landscape at one scale.

    ``peaks[0]`` is always 0 and ``peaks[i]`` (``i >= 1``) is the leftmost
    argmax strictly between ``minima[i - 1]`` and ``minima[i]``. Well ``i`` is
    the half-open interval ``[peaks[i], peaks[i + 1])``; the last well is closed
    off at ``end``.
    """

    lnt: float
    minima: tuple
    peaks: tuple
    end: int

    @property
    def wells(self):
        return wells(self)

    def to_dict(self):
        return {
            "lnt": self.lnt,
            "minima": [int(m) for m in self.minima],
            "peaks": [int(p) for p in self.peaks],
            "wells": [[int(a), int(b)] for a, b in self.wells],
            "end": int(self.end),
        }


def first_stable_point(path, lnt):
    """Smallest ``m`` with ``W(m) = min W[0, r]``, ``r`` the first index after
    ``m`` where ``W`` rises by ``lnt`` above ``W(m)``."""
    _check_lnt(lnt)
    w = _values(path)
    minima, _, n_min, _, deepest = scan_extrema(w, float(lnt), 1, -1)
    if n_min == 0:
        raise HorizonError(
            f"horizon too short: no rise of {lnt} above the running minimum "
            f"(deepest running minimum at index {deepest}, value {w[deepest]:.6g})",
            deepest=int(deepest),
        )
    return int(minima[0])


def stable_points(path, lnt, x_max=None):
    """All stable points at or before ``x_max`` and the peaks separating them."""
    _check_lnt(lnt)
    w = _values(path)
    if x_max is None:
        x_max = len(w) - 1
    x_max = int(x_max)
    minima, maxima, n_min, n_max, deepest = scan_extrema(w, float(lnt), 0, x_max)
    minima = minima[minima <= x_max]
    if len(minima) == 0:
        where = f"deepest running minimum at index {deepest}" if deepest >= 0 else f"none at or before {x_max}"
        raise HorizonError(f"horizon too short for a single stable point at lnt={lnt} ({where})",
                           deepest=int(deepest) if deepest >= 0 else None)
    peaks = (0,) + tuple(int(p) for p in maxima[: len(minima) - 1])
    return StableDecomposition(float(lnt), tuple(int(m) for m in minima), peaks, x_max)


def wells(dec):
    """Half-open wells ``[max H cap [0, m), min H cap (m, inf))`` per stable point."""
    bounds = list(dec.peaks) + [dec.end]
    return [(bounds[i], bounds[i + 1]) for i in range(len(dec.minima))]


def elevation(path, a, b):
    """Worst inner barrier of ``[a, b]`` relative to its minimum.

    Uses ``E = max_z (W(z) - max(min W[a, z], min W[z, b]))``: for a fixed
    ``z`` the best pair of valley points is the lowest point on each side, and
    one of them is the global minimum of the interval.
    """
    w = _values(path)
    a, b = int(a), int(b)
    if not 0 <= a < b < len(w):
        raise ConfigurationError(f"need 0 <= a < b < {len(w)}, got a={a}, b={b}")
    seg = w[a : b + 1]
    pre = np.minimum.accumulate(seg)
    suf = np.minimum.accumulate(seg[::-1])[::-1]
    vals = seg - np.maximum(pre, suf)
    return float(vals.max())


def barrier_H(path, a, b):
    """``(H_plus, H_minus, H)`` for ``[a, b]`` with ``H = min(H_plus, H_minus)``.

    ``H_plus = max_x (max V[x, b] - min V[a, x))`` and
    ``H_minus = max_x (max V[a, x] - min V(x, b])``, the empty-range terms
    being skipped.
    """
    w = _values(path)
    a, b = int(a), int(b)
    if not 0 <= a < b < len(w):
        raise ConfigurationError(f"need 0 <= a < b < {len(w)}, got a={a}, b={b}")
    seg = w[a : b + 1]
    pre_min = np.minimum.accumulate(seg)
    pre_max = np.maximum.accumulate(seg)
    suf_max = np.maximum.accumulate(seg[::-1])[::-1]
    suf_min = np.minimum.accumulate(seg[::-1])[::-1]
    h_plus = float(np.max(suf_max[1:] - pre_min[:-1]))
    h_minus = float(np.max(pre_max[:-1] - suf_min[1:]))
    return h_plus, h_minus, min(h_plus, h_minus)


def _depth(w, hi, lo, lnt):
    return (w[hi] - w[lo]) / lnt


def weighted_depth_sum(r, gamma):
    """``sum_{i=1}^{gamma-1} (gamma - i) * r_i``, accumulated left to right."""
    total = 0.0
    for i, ri in enumerate(r, start=1):
        total += (gamma - i) * ri
    return total


def first_stable_points(path, lnt, k):
    """First ``k`` stable points and the ``k - 1`` leftmost separating argmaxes."""
    _check_lnt(lnt)
    w = _values(path)
    minima, maxima, n_min, _, deepest = scan_extrema(w, float(lnt), int(k), -1)
    if n_min < k:
        raise HorizonError(
            f"horizon too short: found {n_min} of {k} stable points at lnt={lnt} "
            f"within {len(w)} grid points",
            deepest=int(deepest) if deepest >= 0 else None,
        )
    return minima, maxima


def zeta(path, lnt, gamma):
    """``sum_{i<gamma} (gamma - i) (W(h_i) - W(m_i)) / lnt`` over the first
    ``gamma`` stable points ``m_i`` and separating argmaxes ``h_i``."""
    gamma = int(gamma)
    if gamma < 2:
        raise ConfigurationError("gamma must be >= 2")
    w = _values(path)
    minima, maxima = first_stable_points(w, lnt, gamma)
    r = [_depth(w, maxima[i], minima[i], lnt) for i in range(gamma - 1)]
    return weighted_depth_sum(r, gamma)


# ---------------------------------------------------------------------------
# cascade


@dataclass(frozen=True)
class CascadeLevel:
    """State at level ``n`` plus the step taken from it (absent at level N).

    ``m`` holds ``m_1..m_{gamma-1}``; ``points`` appends ``m_prime``. ``r`` and
    ``l`` are depths to the left and right of each ``h_j`` in units of lnt.
    The ``step_*`` fields describe the move to level ``n + 1``.
    """

    n: int
    a: float
    m: tuple
    m_prime: int
    h: tuple
    r: tuple
    l: tuple
    case: int = None
    family: str = None
    index: int = None
    m_prime_stable: bool = None
    m_gamma: int = None
    m_gamma_next: int = None
    h_gamma: int = None
    r_gamma: float = None
    l_gamma: float = None
    h_star: int = None

    @property
    def points(self):
        return tuple(self.m) + (self.m_prime,)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        for k in ("m", "h", "r", "l"):
            d[k] = list(d[k])
        return d


@dataclass(frozen=True)
class CascadeTrace:
    lnt: float
    gamma: int
    alpha: float
    levels: tuple
    scan_end: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def N(self):
        return len(self.levels)

    @property
    def a(self):
        return [lv.a for lv in self.levels]

    @property
    def stable_points(self):
        """``m_1(N), ..., m_gamma(N)``: the first ``gamma`` t-stable points."""
        last = self.levels[-1]
        return tuple(last.m) + (last.m_gamma,)

    def zeta(self):
        """Weighted depth sum evaluated on the terminal level."""
        return weighted_depth_sum(self.levels[-1].r, self.gamma)

    def to_dict(self):
        return {
            "lnt": self.lnt,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "N": self.N,
            "a": self.a,
            "zeta": self.zeta(),
            "scan_end": self.scan_end,
            "levels": [lv.to_dict() for lv in self.levels],
        }


class _Scales:
    """Full-path stable decompositions, cached per scale."""

    def __init__(self, w):
        self.w = w
        self._cache = {}

    def get(self, h):
        if h not in self._cache:
            minima, maxima, _, _, _ = scan_extrema(self.w, h, 0, -1)
            self._cache[h] = (minima, maxima)
        return self._cache[h]


_SCALE_SHIFT = 1e-10


def _profile(w, points, lnt):
    h, r, l = [], [], []
    for left, right in zip(points[:-1], points[1:]):
        hj = int(leftmost_argmax_open(w, left, right))
        h.append(hj)
        r.append(_depth(w, hj, left, lnt))
        l.append(_depth(w, hj, right, lnt))
    return tuple(h), tuple(r), tuple(l)


def _select(r, l, a):
    """Which depth attains the minimum: r-family first, then smallest index."""
    for i, ri in enumerate(r, start=1):
        if ri == a:
            return "r", i
    for i, li in enumerate(l, start=1):
        if li == a:
            return "l", i
    raise AssertionError("minimum not attained")


def _well_owner(smin, smax, mp, n, a):
    """Index of the stable point whose well contains ``mp``, and whether
    ``mp`` is that point."""
    pos = int(np.searchsorted(smin, mp))
    if pos < len(smin) and smin[pos] == mp:
        return pos, True
    # wells are [peak_k, peak_{k+1}) with peaks = (0, smax...)
    peaks = np.concatenate(([0], smax[: max(len(smin) - 1, 0)]))
    k = int(np.searchsorted(peaks, mp, side="right")) - 1
    if k < 0 or (k == len(smin) - 1 and mp > smin[k]):
        raise HorizonError(f"cascade level {n}: well of m'_gamma={mp} not closed within the path "
                           f"at scale a_n={a:.6g}", level=n)
    if smin[k] < mp:
        raise RuntimeError(f"cascade level {n}: m'_gamma={mp} lies in the well of an earlier point")
    return k, False


def construct_cascade(path, lnt, gamma, alpha, max_levels=10_000):
    """Grow the stability scale from ``t**alpha`` to ``t``.

    Level 1 takes the first ``gamma`` ``t**alpha``-stable points. At each level
    the smallest depth ``a_n`` (in units of lnt) decides which point is
    replaced, following the two cases of the construction; the cascade stops at
    the first ``N`` with ``a_N >= 1``.
    """
    _check_lnt(lnt)
    gamma = int(gamma)
    if gamma < 2:
        raise ConfigurationError("gamma must be >= 2")
    if not 0 < alpha < 1:
        raise ConfigurationError("alpha must lie in (0, 1)")
    w = _values(path)
    scales = _Scales(w)
    try:
        minima, _ = first_stable_points(w, alpha * lnt, gamma)
    except HorizonError as exc:
        raise HorizonError(f"cascade level 1: {exc}", level=1, deepest=exc.deepest) from exc
    m = [int(x) for x in minima[: gamma - 1]]
    mp = int(minima[gamma - 1])
    h, r, l = _profile(w, m + [mp], lnt)
    a = min(min(r), min(l))
    levels = []
    scan_end = mp
    n = 1
    while a < 1:
        if n > max_levels:
            raise HorizonError(f"cascade did not terminate within {max_levels} levels", level=n)
        # depths equal to a_n count as protecting at scale a_n; the relative
        # shift keeps that true after rounding a_n * lnt
        smin, smax = scales.get(a * lnt * (1.0 - _SCALE_SHIFT))
        family, idx = _select(r, l, a)
        case = 1 if (family == "l" and idx == gamma - 1) else 2
        k, mp_stable = _well_owner(smin, smax, mp, n, a)
        step = dict(case=case, family=family, index=idx, m_prime_stable=mp_stable)
        x_r = int(smin[k])
        if case == 1 and not mp_stable:
            hs = int(leftmost_argmax_open(w, mp, x_r))
            step.update(m_gamma=x_r, h_star=hs, r_gamma=_depth(w, hs, mp, lnt))
            new_points = m + [x_r]
        else:
            if k + 1 >= len(smin):
                raise HorizonError(f"cascade level {n}: no stable point after {x_r} at scale a_n={a:.6g}",
                                   level=n)
            nxt = int(smin[k + 1])
            hg = int(leftmost_argmax_open(w, x_r, nxt))
            step.update(m_gamma=x_r, m_gamma_next=nxt, h_gamma=hg,
                        r_gamma=_depth(w, hg, x_r, lnt), l_gamma=_depth(w, hg, nxt, lnt))
            scan_end = max(scan_end, nxt)
            if case == 1:
                new_points = m + [nxt]
            else:
                pts = m + [x_r, nxt]
                drop = idx - 1 if family == "r" else idx
                new_points = pts[:drop] + pts[drop + 1 :]
        levels.append(CascadeLevel(n, a, tuple(m), mp, h, r, l, **step))
        m, mp = new_points[: gamma - 1], new_points[gamma - 1]
        scan_end = max(scan_end, mp)
        h, r, l = _profile(w, m + [mp], lnt)
        a = min(min(r), min(l))
        n += 1
    # at level N the last point is the t-stable point whose well holds m'_gamma
    smin, smax = scales.get(float(lnt))
    k, mp_stable = _well_owner(smin, smax, mp, n, a)
    levels.append(CascadeLevel(n, a, tuple(m), mp, h, r, l, m_prime_stable=mp_stable, m_gamma=int(smin[k])))
    scan_end = max(scan_end, int(smin[k]))
    return CascadeTrace(float(lnt), gamma, float(alpha), tuple(levels), int(scan_end))


def elevation_bounds(path, trace):
    """Per level ``n``: (largest listed elevation, ``a_{n-1} * lnt``), ``a_0 = alpha``."""
    out = []
    prev = trace.alpha
    for lv in trace.levels:
        pts = lv.points
        worst = 0.0
        for j, hj in enumerate(lv.h):
            worst = max(worst, elevation(path, pts[j], hj), elevation(path, hj, pts[j + 1]))
        out.append((worst, prev * trace.lnt))
        prev = lv.a
    return out


def _count_in(sorted_points, lo, hi):
    return int(np.searchsorted(sorted_points, hi, side="right") - np.searchsorted(sorted_points, lo, side="left"))


def j_intervals(level, gamma):
    """Closed intervals whose stable wells are counted at this level."""
    pts = list(level.m) + [level.m_gamma if level.m_gamma is not None else level.m_prime]
    iv = []
    for k in range(gamma - 1):
        iv.append((pts[k], level.h[k]))
        iv.append((level.h[k], pts[k + 1]))
    if level.h_gamma is not None:
        iv.append((level.m_gamma, level.h_gamma))
        iv.append((level.h_gamma, level.m_gamma_next))
    return iv


def t_good_diagnostics(path, lnt, gamma, alpha=None, eps=None):
    """Raw good-trajectory metrics with ``alpha = lnt**(-5/6)``, ``eps = lnt**(-11/12)``.

    Returns a dict with ``N``, ``m_prime_gamma_N`` and ``m_prime_gamma_1``
    (real positions), ``j_counts`` (per level, the number of
    ``t**(a_n - eps)``-stable points inside the listed intervals) and
    ``max_abs_w`` over the scanned range. No pass/fail is attached.
    """
    _check_lnt(lnt)
    if alpha is None:
        alpha = lnt ** (-5.0 / 6.0)
    if eps is None:
        eps = lnt ** (-11.0 / 12.0)
    w = _values(path)
    step = path.step if isinstance(path, Path) else 1.0
    trace = construct_cascade(w, lnt, gamma, alpha)
    scales = _Scales(w)
    counts = []
    for lv in trace.levels:
        smin, _ = scales.get((lv.a - eps) * lnt)
        counts.append(sum(_count_in(smin, lo, hi) for lo, hi in j_intervals(lv, gamma)))
    return {
        "N": trace.N,
        "m_prime_gamma_N": trace.levels[-1].m_prime * step,
        "m_prime_gamma_1": trace.levels[0].m_prime * step,
        "j_counts": counts,
        "max_abs_w": float(np.max(np.abs(w[: trace.scan_end + 1]))),
    }
