"""Exact event-driven simulation of independent walks in a quenched environment.

Each walk (or, for coalescing dynamics, each cluster of merged walks) carries
its own exponential clock with rate ``w_plus[y] + w_minus[y]`` at its site
``y`` (only ``w_plus[0]`` at the reflecting origin). The earliest clock fires,
the direction is drawn with probability ``w_plus[y] / rate`` for a step up,
and only that walk's clock is redrawn. Since the rates of the other walks did
not change, their pending clocks stay valid.

Randomness is consumed from a flat buffer of uniforms, two per jump plus one
per walk at start. All three dynamics read the buffer identically until the
first pair meets, so outcomes obtained from one seed are pathwise comparable.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ConfigurationError
from .rng import STREAM_WALK, make_rng, rng_metadata

MODES = {"meeting": 0, "coalescing": 1, "simultaneous": 2}
KINDS = ("met", "censored", "boundary")
BLOCK_SIZE = 4096

_MET, _CENSORED, _BOUNDARY = 0, 1, 2


@dataclass(frozen=True)
class WalkerConfig:
    """Number of walks, their starting sites (default ``1..gamma``) and the
    censoring horizon."""

    gamma: int
    t_max: float
    starts: tuple = None

    def __post_init__(self):
        g = int(self.gamma)
        if g < 2:
            raise ConfigurationError("gamma must be >= 2")
        object.__setattr__(self, "gamma", g)
        starts = tuple(range(1, g + 1)) if self.starts is None else tuple(int(s) for s in self.starts)
        if len(starts) != g:
            raise ConfigurationError(f"need {g} starting sites, got {len(starts)}")
        if starts[0] < 0 or any(b <= a for a, b in zip(starts, starts[1:])):
            raise ConfigurationError("starting sites must be non-negative and strictly increasing")
        object.__setattr__(self, "starts", starts)
        if not (self.t_max >= 0 and math.isfinite(self.t_max)):
            raise ConfigurationError("t_max must be a finite non-negative number")

    def check(self, env):
        if self.starts[-1] >= env.n_sites - 1:
            raise ConfigurationError(
                f"starting sites must lie below the last site {env.n_sites - 1} of the environment"
            )

    def to_dict(self):
        return {"gamma": self.gamma, "starts": list(self.starts), "t_max": self.t_max}


@dataclass(frozen=True)
class MeetingOutcome:
    """``pair`` holds the 0-based labels of the walks that met (meeting mode only)."""

    kind: str
    time: float
    meeting_site: int = None
    pair: tuple = None
    jumps: int = 0
    trace: tuple = field(default=None, compare=False, repr=False)

    def to_dict(self):
        return {"kind": self.kind, "time": self.time, "meeting_site": self.meeting_site,
                "pair": list(self.pair) if self.pair else None, "jumps": self.jumps}


@dataclass(frozen=True)
class SurvivalCurve:
    t_grid: np.ndarray
    p: np.ndarray
    stderr: np.ndarray
    n_replicas: int
    seed: int
    mode: str = "meeting"
    n_boundary: int = 0
    n_censored: int = 0
    outcomes: dict = field(default=None, compare=False, repr=False)

    def to_csv(self, fname):
        with open(fname, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "p", "stderr", "n_replicas"])
            for t, p, s in zip(self.t_grid, self.p, self.stderr):
                wr.writerow([repr(float(t)), repr(float(p)), repr(float(s)), self.n_replicas])

    def to_dict(self):
        return {"t": [float(v) for v in self.t_grid], "p": [float(v) for v in self.p],
                "stderr": [float(v) for v in self.stderr], "n_replicas": self.n_replicas,
                "seed": self.seed, "mode": self.mode, "n_boundary": self.n_boundary,
                "n_censored": self.n_censored, "rng": rng_metadata()}


# ---------------------------------------------------------------------------
# kernel


@njit(cache=True, nogil=True)
def _rate(wp, wm, y):
    return wp[0] if y == 0 else wp[y] + wm[y]


@njit(cache=True, nogil=True)
def _run(wp, wm, starts, mode, t_max, n_rep, u, pos, kind, time, site, pair_a, pair_b, jumps,
         trace_t, trace_k, trace_x):
    """Simulate replicas ``0..n_rep-1`` from ``u[pos:]``.

    Returns ``(done, pos)``: the number of completed replicas and the buffer
    position after the last completed one. ``done < n_rep`` means the buffer ran
    out; the caller extends it and resumes at replica ``done``.
    """
    g = starts.shape[0]
    last = wp.shape[0] - 1
    x = np.empty(g, np.int64)
    clock = np.empty(g)
    alive = np.empty(g, np.bool_)
    n_trace = trace_t.shape[0]
    nu = u.shape[0]
    for rep in range(n_rep):
        p = pos
        if p + g > nu:
            return rep, pos
        for k in range(g):
            x[k] = starts[k]
            alive[k] = True
            clock[k] = -math.log1p(-u[p]) / _rate(wp, wm, x[k])
            p += 1
        n_alive = g
        n_jumps = 0
        outcome = -1
        t = 0.0
        while True:
            k = -1
            best = np.inf
            for j in range(g):
                if alive[j] and clock[j] < best:
                    best = clock[j]
                    k = j
            if best > t_max:
                outcome = _CENSORED
                t = t_max
                break
            if p + 2 > nu:
                break
            y = x[k]
            if y == 0 or u[p] * (wp[y] + wm[y]) < wp[y]:
                x[k] = y + 1
            else:
                x[k] = y - 1
            t = best
            n_jumps += 1
            if n_jumps <= n_trace:
                trace_t[n_jumps - 1] = t
                trace_k[n_jumps - 1] = k
                trace_x[n_jumps - 1] = x[k]
            if mode == 0:
                if k > 0 and x[k] == x[k - 1]:
                    outcome = _MET
                    pair_a[rep], pair_b[rep] = k - 1, k
                elif k < g - 1 and x[k] == x[k + 1]:
                    outcome = _MET
                    pair_a[rep], pair_b[rep] = k, k + 1
            elif mode == 1:
                for j in range(g):
                    if j != k and alive[j] and x[j] == x[k]:
                        alive[k] = False
                        n_alive -= 1
                        break
                if n_alive == 1:
                    outcome = _MET
            else:
                same = True
                for j in range(g):
                    if x[j] != x[k]:
                        same = False
                        break
                if same:
                    outcome = _MET
            if outcome < 0 and x[k] == last:
                outcome = _BOUNDARY
            p += 2
            if outcome >= 0:
                break
            if alive[k]:
                clock[k] = t - math.log1p(-u[p - 1]) / _rate(wp, wm, x[k])
        if outcome < 0:
            return rep, pos
        kind[rep] = outcome
        time[rep] = t
        site[rep] = x[k] if outcome != _CENSORED else -1
        jumps[rep] = n_jumps
        pos = p
    return n_rep, pos


def _simulate_block(env, cfg, mode, n_rep, seed, block, trace_cap=0):
    """Run ``n_rep`` replicas from the stream ``(seed, STREAM_WALK, block)``."""
    if mode not in MODES:
        raise ConfigurationError(f"unknown mode {mode!r}; expected one of {tuple(MODES)}")
    cfg.check(env)
    rng = make_rng(seed, STREAM_WALK, block)
    wp, wm = env.w_plus, env.w_minus
    starts = np.asarray(cfg.starts, dtype=np.int64)
    kind = np.full(n_rep, -1, np.int8)
    time = np.zeros(n_rep)
    site = np.full(n_rep, -1, np.int64)
    pa = np.full(n_rep, -1, np.int64)
    pb = np.full(n_rep, -1, np.int64)
    jumps = np.zeros(n_rep, np.int64)
    tt = np.zeros(trace_cap)
    tk = np.zeros(trace_cap, np.int64)
    tx = np.zeros(trace_cap, np.int64)
    u = rng.random(max(64 * n_rep, 1024))
    pos = 0
    done = 0
    while done < n_rep:
        sl = slice(done, n_rep)
        k, pos_new = _run(wp, wm, starts, MODES[mode], float(cfg.t_max), n_rep - done, u, pos,
                          kind[sl], time[sl], site[sl], pa[sl], pb[sl], jumps[sl], tt, tk, tx)
        done += k
        pos = pos_new
        if done < n_rep:
            # keep the unread tail and append fresh draws from the same stream
            u = np.concatenate((u[pos:], rng.random(max(len(u), 1024))))
            pos = 0
    n_trace = min(int(jumps[0]), trace_cap) if n_rep else 0
    trace = (tt[:n_trace], tk[:n_trace], tx[:n_trace])
    return kind, time, site, pa, pb, jumps, trace


def _sample_one(env, cfg, seed, mode, trace):
    cap = 1_000_000 if trace else 0
    kind, time, site, pa, pb, jumps, tr = _simulate_block(env, cfg, mode, 1, seed, 0, cap)
    k = KINDS[int(kind[0])]
    pair = (int(pa[0]), int(pb[0])) if pa[0] >= 0 else None
    return MeetingOutcome(k, float(time[0]), int(site[0]) if site[0] >= 0 else None, pair, int(jumps[0]),
                          tr if trace else None)


def sample_meeting(env, cfg, seed, trace=False):
    """First instant at which two of the walks occupy one site.

    With ``trace=True`` the outcome carries ``(times, walk labels, new sites)``
    of every jump.
    """
    return _sample_one(env, cfg, seed, "meeting", trace)


def sample_coalescing(env, cfg, seed, trace=False):
    """Walks merge on meeting and move on as one; the time is that of the last merge."""
    return _sample_one(env, cfg, seed, "coalescing", trace)


def sample_simultaneous(env, cfg, seed, trace=False):
    """Independent walks; the time is the first jump instant at which all share a site."""
    return _sample_one(env, cfg, seed, "simultaneous", trace)


def survival_curve(env, cfg, t_grid, n_replicas, master_seed, mode="meeting", workers=1,
                   keep_outcomes=False):
    """Estimate ``P[T > t]`` on ``t_grid`` from ``n_replicas`` replicas.

    Replicas are grouped into fixed blocks of :data:`BLOCK_SIZE`, block ``b``
    drawing from the stream ``(master_seed, b)``; integer counts are summed,
    so the result does not depend on ``workers``. Censored replicas count as
    surviving; a replica stopped at the environment's last site counts as
    surviving up to that time (``n_boundary`` reports how many).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(t_grid < 0) or np.any(np.diff(t_grid) <= 0):
        raise ConfigurationError("t_grid must be a non-empty, strictly increasing sequence of times >= 0")
    if cfg.t_max < t_grid[-1]:
        raise ConfigurationError(f"t_max={cfg.t_max} is below the last grid time {t_grid[-1]}")
    n_replicas = int(n_replicas)
    if n_replicas < 1:
        raise ConfigurationError("n_replicas must be >= 1")
    cfg.check(env)
    n_blocks = -(-n_replicas // BLOCK_SIZE)
    sizes = [min(BLOCK_SIZE, n_replicas - b * BLOCK_SIZE) for b in range(n_blocks)]

    def work(b):
        kind, time, *_ = _simulate_block(env, cfg, mode, sizes[b], master_seed, b)
        eff = np.where(kind == _CENSORED, np.inf, time)
        # number of replicas with eff > t for each grid point
        surv = sizes[b] - np.searchsorted(np.sort(eff), t_grid, side="right")
        return (surv.astype(np.int64), int(np.sum(kind == _BOUNDARY)), int(np.sum(kind == _CENSORED)),
                (kind, time) if keep_outcomes else None)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=int(workers)) as pool:
            parts = list(pool.map(work, range(n_blocks)))
    else:
        parts = [work(b) for b in range(n_blocks)]
    counts = np.sum([pt[0] for pt in parts], axis=0)
    p = counts / n_replicas
    stderr = np.sqrt(p * (1 - p) / n_replicas)
    outcomes = None
    if keep_outcomes:
        outcomes = {"kind": [KINDS[int(k)] for pt in parts for k in pt[3][0]],
                    "time": [float(t) for pt in parts for t in pt[3][1]]}
    return SurvivalCurve(t_grid, p, stderr, n_replicas, int(master_seed), mode,
                         sum(pt[1] for pt in parts), sum(pt[2] for pt in parts), outcomes)
