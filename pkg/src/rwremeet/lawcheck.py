"""Limit law of the weighted-depth functional and goodness-of-fit tooling.

The limit of ``zeta_gamma - gamma*(gamma-1)/2`` has density

    f_gamma(x) = sum_{i=1}^{gamma-1} (-1)**(gamma-1-i) * i**(gamma-2)
                 / (i! (gamma-1-i)!) * exp(-x / i),   x >= 0,

which is the law of a sum of independent exponentials with means
``1, 2, ..., gamma-1``. The alternating sum is benign for the small ``gamma``
used here; coefficients are built from exact integers and ``gamma`` is capped
at :data:`GAMMA_MAX`.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import landscape
from ._scan import scan_extrema
from .env import brownian_increments
from .errors import ConfigurationError
from .rng import STREAM_BROWNIAN, STREAM_ZETA_LIMIT, make_rng

GAMMA_MAX = 12
KS_MIN_SAMPLES = 10


def _check_gamma(gamma):
    if int(gamma) != gamma or not 2 <= gamma <= GAMMA_MAX:
        raise ConfigurationError(f"gamma must be an integer in [2, {GAMMA_MAX}], got {gamma}")
    return int(gamma)


def _coefficients(gamma):
    """``(i, c_i)`` with ``c_i = (-1)**(gamma-1-i) i**(gamma-2) / (i! (gamma-1-i)!)``."""
    out = []
    for i in range(1, gamma):
        num = (-1) ** (gamma - 1 - i) * i ** (gamma - 2)
        den = math.factorial(i) * math.factorial(gamma - 1 - i)
        out.append((i, num / den))
    return out


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ConfigurationError("the limit law lives on [0, inf); got a negative or NaN argument")
    return x


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def density_f(gamma, x):
    """Density of ``zeta_gamma - gamma*(gamma-1)/2`` at ``x >= 0``."""
    gamma = _check_gamma(gamma)
    xa = _check_x(x)
    out = np.zeros_like(xa)
    for i, c in _coefficients(gamma):
        out = out + c * np.exp(-xa / i)
    return _scalar_or_array(x, np.maximum(out, 0.0))


def cdf_F(gamma, x):
    """Distribution function, integrating the density termwise:
    ``int_0^x exp(-u/i) du = -i * expm1(-x/i)``."""
    gamma = _check_gamma(gamma)
    xa = _check_x(x)
    out = np.zeros_like(xa)
    for i, c in _coefficients(gamma):
        out = out + c * i * -np.expm1(-xa / i)
    return _scalar_or_array(x, np.clip(out, 0.0, 1.0))


def sample_zeta_limit(gamma, seed, size=None):
    """Draws of ``zeta - offset`` as a sum of exponentials with means ``gamma - i``."""
    gamma = _check_gamma(gamma)
    rng = make_rng(seed, STREAM_ZETA_LIMIT, gamma)
    shape = () if size is None else (int(size),)
    total = np.zeros(shape)
    for i in range(1, gamma):
        total = total + rng.exponential(gamma - i, size=shape)
    return float(total) if size is None else total


@dataclass(frozen=True)
class ZetaLaw:
    gamma: int

    def __post_init__(self):
        _check_gamma(self.gamma)

    @property
    def offset(self):
        return self.gamma * (self.gamma - 1) / 2

    @property
    def mean(self):
        return self.offset

    @property
    def variance(self):
        g = self.gamma
        return (g - 1) * g * (2 * g - 1) / 6

    def pdf(self, x):
        return density_f(self.gamma, x)

    def cdf(self, x):
        return cdf_F(self.gamma, x)

    def sample(self, seed, size=None):
        return sample_zeta_limit(self.gamma, seed, size)


@dataclass(frozen=True)
class GoFReport:
    """Kolmogorov-Smirnov outcome. ``n2`` is set for two-sample tests."""

    n: int
    ks_stat: float
    p_value: float
    passed: bool
    level: float = 0.01
    n2: int = None

    def to_dict(self):
        d = {"n": self.n, "ks_stat": self.ks_stat, "p_value": self.p_value,
             "passed": self.passed, "level": self.level}
        if self.n2 is not None:
            d["n2"] = self.n2
        return d


def _sample_array(samples, name="samples"):
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    if len(x) < KS_MIN_SAMPLES:
        raise ConfigurationError(f"{name}: need at least {KS_MIN_SAMPLES} values, got {len(x)}")
    return x


def ks_statistic(samples, cdf, level=0.01):
    """One-sample KS test with the asymptotic p-value.

    Unsorted input is sorted internally.
    """
    x = _sample_array(samples)
    res = stats.kstest(x, cdf, method="asymp")
    p = float(res.pvalue)
    return GoFReport(len(x), float(res.statistic), p, bool(p > level), level)


def ks_two_sample(a, b, level=0.01):
    """Two-sample KS test with the asymptotic p-value."""
    xa, xb = _sample_array(a, "first sample"), _sample_array(b, "second sample")
    res = stats.ks_2samp(xa, xb, method="asymp")
    p = float(res.pvalue)
    return GoFReport(len(xa), float(res.statistic), p, bool(p > level), level, n2=len(xb))


# ---------------------------------------------------------------------------
# zeta on sampled Brownian landscapes


def _chunk_length(lnt, sigma2, step):
    # a few multiples of the natural length lnt**2 / sigma2 per chunk
    return max(int(4 * lnt * lnt / (sigma2 * step)), 1024)


def brownian_zeta(lnts, gammas, seed, index, sigma2=1.0, step=1e-3, max_length=10**9):
    """``zeta`` for every ``(lnt, gamma)`` pair on one Brownian path.

    The path is the ``index``-th path of ``seed``. It is grown in chunks until
    the scan at the largest ``lnt`` confirms ``max(gammas)`` stable points; by
    nesting, every smaller ``lnt`` then has its points as well. Returns an
    array of shape ``(len(lnts), len(gammas))``.
    """
    gammas = [_check_gamma(g) for g in np.atleast_1d(gammas)]
    lnts = [float(v) for v in np.atleast_1d(lnts)]
    top, need = max(lnts), max(gammas)
    rng = make_rng(seed, STREAM_BROWNIAN, index)
    chunk = _chunk_length(top, sigma2, step)
    w = np.zeros(1)
    while True:
        inc = brownian_increments(rng, chunk, sigma2, step)
        w = np.concatenate((w, w[-1] + np.cumsum(inc)))
        _, _, n_min, _, _ = scan_extrema(w, top, need, -1)
        if n_min >= need:
            break
        if len(w) > max_length:
            raise ConfigurationError(f"path exceeded {max_length} points without {need} stable points at lnt={top}")
    return np.array([[landscape.zeta(w, lnt, g) for g in gammas] for lnt in lnts])


def sample_brownian_zeta(lnts, gammas, n_paths, seed, sigma2=1.0, step=1e-3, first_index=0):
    """``zeta`` on ``n_paths`` independent paths, shape ``(len(lnts), len(gammas), n_paths)``."""
    lnts, gammas = np.atleast_1d(lnts), np.atleast_1d(gammas)
    out = np.empty((len(lnts), len(gammas), int(n_paths)))
    for k in range(int(n_paths)):
        out[:, :, k] = brownian_zeta(lnts, gammas, seed, first_index + k, sigma2, step)
    return out
