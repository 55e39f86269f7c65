"""Exact quenched computations on finite state spaces.

Hitting probabilities come from the scale function of the birth-death chain,
invariant measures from detailed balance, spectral gaps from the
``sqrt(mu)``-symmetrised generator, and the survival probability of ``gamma``
walks from uniformization of the chain of ordered tuples
``x_1 < ... < x_gamma <= L``.

Uniformization. With ``Lambda`` the largest total exit rate and
``P = I + Q / Lambda``,

    P[T > t] = sum_k Poisson(k; Lambda t) * s_k,    s_k = mass left after k steps.

The vector is renormalised after every step and ``log s_k`` accumulated, so
deep tails stay representable; the series is cut at the first ``K`` whose
Poisson right tail is at most ``tol``, which bounds the error by ``tol * s_K``.
Entries below 1e-300 of the normalised vector are flushed to zero.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import linalg, sparse, special, stats

from .env import potential
from .errors import ConfigurationError, FeasibilityError

SPECTRAL_CAP = 2000
TUPLE_CAPS = {2: 3000, 3: 120}
MAX_STATES = 2_000_000
SERIES_CAP = 20_000_000
_FLUSH = 1e-300


def _check_site(env, *sites):
    for s in sites:
        if not 0 <= s < env.n_sites:
            raise ConfigurationError(f"site {s} outside the environment [0, {env.n_sites - 1}]")


def hit_before(env, a, x, b):
    """Probability that the walk from ``x`` reaches ``b`` before ``a``.

    ``sum_{y=a+1}^{x} exp(V(y)) / sum_{y=a+1}^{b} exp(V(y))`` with ``V``
    shifted by its maximum on ``(a, b]`` before exponentiating.
    """
    a, x, b = int(a), int(x), int(b)
    _check_site(env, a, x, b)
    if not a <= x <= b or a == b:
        raise ConfigurationError(f"need a <= x <= b with a < b, got a={a}, x={x}, b={b}")
    if x == a:
        return 0.0
    if x == b:
        return 1.0
    v = potential(env).values[a + 1 : b + 1]
    e = np.exp(v - v.max())
    return float(e[: x - a].sum() / e.sum())


@dataclass(frozen=True)
class ReflectedInterval:
    """The walk restricted to ``[a, b]`` with reflection at both ends."""

    env: object
    a: int
    b: int

    def __post_init__(self):
        _check_site(self.env, self.a, self.b)
        if not self.a < self.b:
            raise ConfigurationError("need a < b")

    @property
    def n(self):
        return self.b - self.a + 1

    def _rates(self):
        up = np.array(self.env.w_plus[self.a : self.b + 1], dtype=float)
        dn = np.array(self.env.w_minus[self.a : self.b + 1], dtype=float)
        up[-1] = 0.0
        dn[0] = 0.0
        return up, dn

    def generator(self):
        up, dn = self._rates()
        q = np.diag(-(up + dn))
        q += np.diag(up[:-1], 1) + np.diag(dn[1:], -1)
        return q


def invariant_measure(ri):
    """Detailed balance ``mu(i) w_plus(i) = mu(i+1) w_minus(i+1)``, normalised."""
    up, dn = ri._rates()
    logmu = np.concatenate(([0.0], np.cumsum(np.log(up[:-1]) - np.log(dn[1:]))))
    mu = np.exp(logmu - logmu.max())
    return mu / mu.sum()


def spectral_gap(ri, cap=SPECTRAL_CAP):
    """Smallest non-zero eigenvalue of ``-Q``."""
    if ri.n > cap:
        raise FeasibilityError(f"interval of {ri.n} sites exceeds the eigensolve cap {cap}")
    up, dn = ri._rates()
    diag = up + dn
    off = np.sqrt(up[:-1] * dn[1:])
    ev = linalg.eigvalsh_tridiagonal(diag, -off, select="i", select_range=(0, 1))
    return float(ev[1])


# ---------------------------------------------------------------------------
# tuple chain


def _exit_rates(env, L):
    """Per-site exit rates of the lowest walk (``lo``), of the top walk (``hi``)
    and of interior walks (``mid``), with reflection at 0 and at ``L``."""
    wp = np.asarray(env.w_plus[: L + 1], dtype=float)
    wm = np.asarray(env.w_minus[: L + 1], dtype=float)
    up = wp.copy()
    up[L] = 0.0
    dn = wm.copy()
    dn[0] = 0.0
    return up, dn


class TupleChain:
    """Ordered tuples ``x_1 < ... < x_gamma <= L`` killed when two walks meet.

    ``Q`` is the sub-generator as a CSR matrix; rows lose exactly the rate of
    the jumps that would put two walks on one site. Site ``L`` reflects.
    """

    def __init__(self, env, gamma, L, max_states=MAX_STATES):
        gamma, L = int(gamma), int(L)
        if gamma < 2:
            raise ConfigurationError("gamma must be >= 2")
        if not gamma <= L < env.n_sites:
            raise ConfigurationError(f"need gamma <= L < {env.n_sites}, got L={L}")
        n_states = math.comb(L + 1, gamma)
        if n_states > max_states:
            raise FeasibilityError(f"{n_states} tuple states exceed the cap of {max_states}")
        self.env, self.gamma, self.L = env, gamma, L
        states = np.array(list(itertools.combinations(range(L + 1), gamma)), dtype=np.int64)
        self.states = states
        index = np.full((L + 1,) * gamma, -1, dtype=np.int64)
        index[tuple(states.T)] = np.arange(len(states))
        self._index = index
        up, dn = _exit_rates(env, L)
        rows, cols, vals = [], [], []
        out = np.zeros(len(states))
        ar = np.arange(len(states))
        for k in range(gamma):
            for step, rate in ((1, up), (-1, dn)):
                r = rate[states[:, k]]
                out += r
                tgt = states.copy()
                tgt[:, k] += step
                ok = r > 0
                if k + 1 < gamma:
                    ok &= tgt[:, k] != states[:, k + 1]
                if k > 0:
                    ok &= tgt[:, k] != states[:, k - 1]
                rows.append(ar[ok])
                cols.append(index[tuple(tgt[ok].T)])
                vals.append(r[ok])
        rows.append(ar)
        cols.append(ar)
        vals.append(-out)
        self.Q = sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(states),) * 2
        )
        self.exit_rate = out

    @property
    def n_states(self):
        return len(self.states)

    def index_of(self, tup):
        tup = tuple(int(v) for v in tup)
        if len(tup) != self.gamma or any(not 0 <= v <= self.L for v in tup):
            raise ConfigurationError(f"{tup} is not a state of the chain")
        i = int(self._index[tup])
        if i < 0:
            raise ConfigurationError(f"{tup} is not strictly increasing")
        return i


# ---------------------------------------------------------------------------
# uniformization


@njit(cache=True, fastmath=True, nogil=True)
def _pair_step(v, out, stay1, stay2, up_lo, dn_lo, up_hi, dn_hi, inv, L, watch):
    """One step of the two-walk chain on the padded array ``v[x2, x1 + 1]``.

    Cells with ``x1 >= x2`` and the padding stay zero, which encodes both the
    killing and the reflection. Returns the new total mass and the mass on row
    ``watch``.
    """
    total = 0.0
    row = 0.0
    for r in range(1, L + 1):
        s2 = stay2[r]
        uh = up_hi[r - 1]
        dh = dn_hi[r + 1] if r < L else 0.0
        for c in range(r):
            val = (v[r, c + 1] * (stay1[c] + s2)
                   + v[r, c] * up_lo[c]
                   + v[r, c + 2] * dn_lo[c + 1]
                   + v[r - 1, c + 1] * uh
                   + v[r + 1, c + 1] * dh) * inv
            if val < _FLUSH:
                val = 0.0
            out[r, c + 1] = val
            total += val
        if r == watch:
            for c in range(r):
                row += out[r, c + 1]
    return total, row


def _pair_sweep(env, starts, L, lam, n_steps):
    """``log s_k`` and the per-step arrival mass at ``L`` for the two-walk chain."""
    up, dn = _exit_rates(env, L)
    pad = np.zeros(L + 2)
    stay1 = -(up + dn) / lam
    stay2 = 1.0 - (up + dn) / lam
    # up_lo[c] multiplies v[x2, c] = mass at x1 = c - 1 moving up
    up_lo = np.concatenate(([0.0], up[:L])) / lam
    dn_lo = np.concatenate((dn, [0.0])) / lam
    up_hi = up / lam
    dn_hi = np.concatenate((dn, [0.0, 0.0])) / lam
    stay1 = np.concatenate((stay1, pad[:1]))
    stay2 = np.concatenate((stay2, pad[:1]))
    v = np.zeros((L + 2, L + 2))
    out = np.zeros_like(v)
    v[starts[1], starts[0] + 1] = 1.0
    log_s = np.zeros(n_steps + 1)
    arrivals = np.zeros(n_steps + 1)
    watch = L - 1
    rate_in = up[L - 1] / lam
    arrivals[0] = v[watch, 1 : L + 1].sum() * rate_in
    total = 1.0
    for k in range(1, n_steps + 1):
        total, row = _pair_step(v, out, stay1, stay2, up_lo, dn_lo, up_hi, dn_hi, 1.0 / total, L, watch)
        if total == 0.0:
            log_s[k:] = -np.inf
            arrivals[k:] = 0.0
            break
        log_s[k] = log_s[k - 1] + math.log(total)
        arrivals[k] = row / total * rate_in
        v, out = out, v
    return log_s, arrivals


def _generic_sweep(chain, starts, lam, n_steps):
    PT = (sparse.identity(chain.n_states, format="csr") + chain.Q / lam).T.tocsr()
    w = np.zeros(chain.n_states)
    w[chain.index_of(starts)] = 1.0
    watch = chain.states[:, -1] == chain.L - 1
    up, _ = _exit_rates(chain.env, chain.L)
    rate_in = up[chain.L - 1] / lam
    log_s = np.zeros(n_steps + 1)
    arrivals = np.zeros(n_steps + 1)
    arrivals[0] = w[watch].sum() * rate_in
    for k in range(1, n_steps + 1):
        w = PT @ w
        total = w.sum()
        if total == 0.0:
            log_s[k:] = -np.inf
            arrivals[k:] = 0.0
            break
        w /= total
        w[w < _FLUSH] = 0.0
        log_s[k] = log_s[k - 1] + math.log(total)
        arrivals[k] = w[watch].sum() * rate_in
    return log_s, arrivals


@dataclass(frozen=True)
class SurvivalRecord:
    """``boundary_mass`` bounds from above the probability that a walk ever
    reached ``L`` by time ``t`` (expected number of arrivals there).
    ``error_bound`` bounds the series truncation error of ``p``."""

    t: float
    p: float
    log_p: float
    boundary_mass: float
    L: int
    tol: float
    error_bound: float = 0.0
    n_terms: int = 0

    def to_dict(self):
        return {"t": self.t, "p": self.p, "log_p": self.log_p, "boundary_mass": self.boundary_mass,
                "L": self.L, "tol": self.tol, "error_bound": self.error_bound, "n_terms": self.n_terms}


def _check_caps(gamma, L, caps):
    caps = TUPLE_CAPS if caps is None else caps
    if gamma in caps:
        if L > caps[gamma]:
            raise FeasibilityError(f"L={L} exceeds the cap {caps[gamma]} for gamma={gamma}")
    elif math.comb(L + 1, gamma) > MAX_STATES:
        raise FeasibilityError(f"gamma={gamma}, L={L} exceeds {MAX_STATES} tuple states")


def _log_poisson(k, mu):
    return k * math.log(mu) - mu - special.gammaln(k + 1) if mu > 0 else np.where(k == 0, 0.0, -np.inf)


def exact_survival_many(env, cfg, ts, L, tol=1e-10, method="auto", caps=None):
    """Survival records for every time in ``ts`` from one uniformization sweep.

    ``method`` is ``"pair"`` (compiled two-walk stencil), ``"sparse"``
    (generic CSR chain) or ``"auto"`` (``pair`` when ``gamma == 2``).
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    if np.any(ts < 0) or not np.all(np.isfinite(ts)):
        raise ConfigurationError("times must be finite and non-negative")
    if not 0 < tol < 1:
        raise ConfigurationError("tol must lie in (0, 1)")
    gamma, L = cfg.gamma, int(L)
    starts = cfg.starts
    if not gamma <= L < env.n_sites:
        raise ConfigurationError(f"need gamma <= L < {env.n_sites}, got L={L}")
    if starts[-1] >= L:
        raise ConfigurationError(f"all starting sites must lie below L={L}")
    _check_caps(gamma, L, caps)
    if method == "auto":
        method = "pair" if gamma == 2 else "sparse"
    up, dn = _exit_rates(env, L)
    if method == "pair":
        if gamma != 2:
            raise ConfigurationError("the pair stencil needs gamma == 2")
        a = up + dn
        # largest a(x1) + a(x2) over x1 < x2
        lam = float(np.max(np.maximum.accumulate(a[:-1]) + a[1:]))
    elif method == "sparse":
        chain = TupleChain(env, gamma, L)
        lam = float(chain.exit_rate.max())
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    mus = lam * ts
    n_terms = np.array([int(stats.poisson.isf(tol, mu)) if mu > 0 else 0 for mu in mus])
    if n_terms.max(initial=0) > SERIES_CAP:
        raise FeasibilityError(
            f"uniformization needs {n_terms.max()} terms (> {SERIES_CAP}); reduce t or tol requirements"
        )
    n_steps = int(n_terms.max(initial=0))
    if method == "pair":
        log_s, arrivals = _pair_sweep(env, starts, L, lam, n_steps)
    else:
        log_s, arrivals = _generic_sweep(chain, starts, lam, n_steps)
    ks = np.arange(n_steps + 1)
    log_arr = np.where(arrivals > 0, np.log(np.where(arrivals > 0, arrivals, 1.0)), -np.inf) + log_s
    records = []
    for t, mu, K in zip(ts, mus, n_terms):
        if t == 0:
            records.append(SurvivalRecord(0.0, 1.0, 0.0, 0.0, L, tol, 0.0, 0))
            continue
        lp = _log_poisson(ks[: K + 1], mu)
        log_p = float(special.logsumexp(lp + log_s[: K + 1]))
        # arrival during step k -> k+1 happens by time t with probability P[N_t > k]
        tail = special.pdtrc(ks[:K], mu)
        with np.errstate(divide="ignore"):
            bm = float(np.exp(special.logsumexp(np.log(tail) + log_arr[:K]))) if K > 0 else 0.0
        err = float(math.exp(log_s[K]) * special.pdtrc(K, mu))
        p = math.exp(log_p)
        records.append(SurvivalRecord(float(t), min(p, 1.0), min(log_p, 0.0), bm, L, tol, err, int(K)))
    return records


def exact_survival(env, cfg, t, L, tol=1e-10, method="auto", caps=None):
    """``P[T > t]`` for the walks of ``cfg``; see :func:`exact_survival_many`."""
    return exact_survival_many(env, cfg, [t], L, tol, method, caps)[0]


@dataclass(frozen=True)
class TailExponent:
    t: tuple
    log_p: tuple
    e: tuple
    slope: float
    records: tuple

    def to_dict(self):
        return {"t": list(self.t), "log_p": list(self.log_p), "e": list(self.e), "slope": self.slope,
                "records": [r.to_dict() for r in self.records]}


def tail_exponent(env, cfg, t_grid, L, tol=1e-10, method="auto", caps=None):
    """``e(t) = -ln P[T > t] / ln t`` on ``t_grid`` (all ``t > 1``) and the
    least-squares slope of ``-ln P`` against ``ln t``."""
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 1) or np.any(np.diff(t_grid) <= 0):
        raise ConfigurationError("t_grid must be strictly increasing with every t > 1")
    recs = exact_survival_many(env, cfg, t_grid, L, tol, method, caps)
    lnt = np.log(t_grid)
    neg = np.array([-r.log_p for r in recs])
    e = neg / lnt
    slope = float(np.polyfit(lnt, neg, 1)[0]) if len(t_grid) >= 2 else float("nan")
    return TailExponent(tuple(float(v) for v in t_grid), tuple(-neg), tuple(float(v) for v in e), slope,
                        tuple(recs))
