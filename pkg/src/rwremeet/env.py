"""Random environments, their potential, and sampled Brownian landscapes.

An environment is a sequence of jump-rate pairs ``(w_plus, w_minus)`` on the
sites ``0, 1, ..., n-1``. Laws are i.i.d. over sites and are parametrised by the
magnitude ``ln(rho)`` of the log-ratio ``X = ln(w_plus / w_minus)``. Rates are
normalised so that ``w_plus * w_minus = 1``, i.e. ``w_plus = exp(X / 2)``.
"""

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .rng import STREAM_BROWNIAN, STREAM_ENV, make_rng

LAW_KINDS = ("bernoulli-symmetric", "uniform-logratio", "custom-table")

_RATE_RTOL = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EnvironmentLaw:
    """Marginal law of one site.

    ``table`` is only used by ``custom-table``: a sequence of
    ``(w_plus, w_minus, probability)`` triples.
    """

    kind: str = "bernoulli-symmetric"
    rho: float = math.e
    kappa: float = math.e
    table: tuple = ()

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ConfigurationError(f"unknown law kind {self.kind!r}; expected one of {LAW_KINDS}")
        object.__setattr__(self, "table", tuple(tuple(float(v) for v in row) for row in self.table))

    def to_dict(self):
        d = {"kind": self.kind, "rho": self.rho, "kappa": self.kappa}
        if self.kind == "custom-table":
            d["table"] = [list(row) for row in self.table]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(kind=d["kind"], rho=float(d.get("rho", math.e)), kappa=float(d["kappa"]),
                   table=tuple(tuple(r) for r in d.get("table", ())))


@dataclass(frozen=True)
class ConditionReport:
    mean_log_ratio: float
    sigma2: float
    rate_min: float
    rate_max: float
    kappa_feasible: bool
    problems: tuple

    @property
    def ok(self):
        return not self.problems

    def to_dict(self):
        return {
            "mean_log_ratio": self.mean_log_ratio,
            "sigma2": self.sigma2,
            "rate_min": self.rate_min,
            "rate_max": self.rate_max,
            "kappa_feasible": self.kappa_feasible,
            "problems": list(self.problems),
        }


def validate_conditions(law):
    """Check the zero-mean / finite-variance and ellipticity conditions.

    For the two parametric kinds the moments are closed forms: the log-ratio
    is ``+-ln(rho)`` (mean 0, ``sigma2 = ln(rho)**2``) or uniform on
    ``[-ln(rho), ln(rho)]`` (mean 0, ``sigma2 = ln(rho)**2 / 3``). Custom
    tables are checked numerically.
    """
    problems = []
    if law.kind == "custom-table":
        if not law.table:
            problems.append("custom-table law needs at least one (w_plus, w_minus, p) row")
            return ConditionReport(float("nan"), float("nan"), float("nan"), float("nan"), False, tuple(problems))
        tab = np.array(law.table, dtype=float)
        wp, wm, p = tab[:, 0], tab[:, 1], tab[:, 2]
        if np.any(wp <= 0) or np.any(wm <= 0):
            problems.append("rates must be positive")
            wp, wm = np.abs(wp) + 1e-300, np.abs(wm) + 1e-300
        if np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-12):
            problems.append("table probabilities must be non-negative and sum to 1")
        x = np.log(wp / wm)
        mean = float(np.dot(p, x))
        sigma2 = float(np.dot(p, x * x))
        rmin = float(min(wp.min(), wm.min()))
        rmax = float(max(wp.max(), wm.max()))
        if abs(mean) > 1e-12:
            problems.append(f"Condition S violated: E ln(w+/w-) = {mean:.3g} != 0")
    else:
        if not law.rho > 1:
            problems.append("rho must exceed 1 (log-ratio magnitude ln(rho) > 0)")
        lr = math.log(law.rho) if law.rho > 0 else float("nan")
        mean = 0.0
        sigma2 = lr * lr if law.kind == "bernoulli-symmetric" else lr * lr / 3.0
        rmax = math.exp(abs(lr) / 2) if law.rho > 0 else float("nan")
        rmin = 1.0 / rmax
    if not (sigma2 > 0 and math.isfinite(sigma2)):
        problems.append("Condition S violated: sigma^2 must lie in (0, inf)")
    feasible = law.kappa > 1 and rmax <= law.kappa * (1 + _RATE_RTOL) and rmin >= (1 - _RATE_RTOL) / law.kappa
    if not law.kappa > 1:
        problems.append(f"Condition B violated: kappa must be > 1 (got {law.kappa})")
    elif not feasible:
        problems.append(
            f"Condition B unsatisfiable: rates span [{rmin:.6g}, {rmax:.6g}] but kappa = {law.kappa}"
        )
    return ConditionReport(mean, sigma2, rmin, rmax, bool(feasible), tuple(problems))


@dataclass(frozen=True)
class Environment:
    """Quenched environment on sites ``0..n-1``."""

    w_plus: np.ndarray
    w_minus: np.ndarray
    kappa: float
    seed: int = -1
    law: EnvironmentLaw = None

    def __post_init__(self):
        wp = _frozen(self.w_plus)
        wm = _frozen(self.w_minus)
        object.__setattr__(self, "w_plus", wp)
        object.__setattr__(self, "w_minus", wm)
        if wp.ndim != 1 or wp.shape != wm.shape:
            raise ConfigurationError("w_plus and w_minus must be 1-d arrays of equal length")
        if len(wp) < 2:
            raise ConfigurationError("an environment needs at least 2 sites")
        lo, hi = (1 - _RATE_RTOL) / self.kappa, self.kappa * (1 + _RATE_RTOL)
        for name, w in (("w_plus", wp), ("w_minus", wm)):
            if not (np.all(w >= lo) and np.all(w <= hi)):
                raise ConfigurationError(f"{name} has rates outside [1/kappa, kappa] with kappa={self.kappa}")

    @property
    def n_sites(self):
        return len(self.w_plus)

    @classmethod
    def flat(cls, n_sites, rate=1.0, kappa=math.e):
        """Homogeneous environment: every rate equal to ``rate``."""
        w = np.full(n_sites, float(rate))
        return cls(w, w.copy(), kappa=kappa, seed=-1,
                   law=EnvironmentLaw("custom-table", kappa=kappa, table=((rate, rate, 1.0),)))

    def to_dict(self):
        return {
            "schema": 1,
            "law": self.law.to_dict() if self.law is not None else None,
            "kappa": self.kappa,
            "seed": self.seed,
            "sites": [{"wp": float(a), "wm": float(b)} for a, b in zip(self.w_plus, self.w_minus)],
        }

    @classmethod
    def from_dict(cls, d):
        sites = d["sites"]
        law = EnvironmentLaw.from_dict(d["law"]) if d.get("law") else None
        return cls(np.array([s["wp"] for s in sites]), np.array([s["wm"] for s in sites]),
                   kappa=float(d["kappa"]), seed=int(d.get("seed", -1)), law=law)

    def save(self, fname):
        with open(fname, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, fname):
        with open(fname, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Path:
    """Real-valued landscape sampled on the grid ``x_k = k * step``."""

    step: float
    values: np.ndarray
    sigma2: float = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = _frozen(self.values)
        object.__setattr__(self, "values", v)
        if not self.step > 0:
            raise ConfigurationError("path step must be positive")
        if v.ndim != 1 or len(v) == 0:
            raise ConfigurationError("path values must be a non-empty 1-d array")
        if v[0] != 0:
            raise ConfigurationError("path must start at 0")

    def __len__(self):
        return len(self.values)

    @property
    def x(self):
        return np.arange(len(self.values)) * self.step

    def to_csv(self, fname):
        with open(fname, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "value"])
            for xi, vi in zip(self.x, self.values):
                wr.writerow([repr(float(xi)), repr(float(vi))])

    @classmethod
    def from_csv(cls, fname):
        with open(fname, encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        x = np.array([float(r["x"]) for r in rows])
        v = np.array([float(r["value"]) for r in rows])
        step = float(x[1] - x[0]) if len(x) > 1 else 1.0
        return cls(step, v)


def gen_environment(law, n_sites, seed):
    """Draw ``n_sites`` i.i.d. sites from ``law``; deterministic in ``seed``."""
    report = validate_conditions(law)
    if not report.ok:
        raise ConfigurationError("; ".join(report.problems))
    if int(n_sites) < 2:
        raise ConfigurationError("n_sites must be >= 2")
    n = int(n_sites)
    rng = make_rng(seed, STREAM_ENV)
    if law.kind == "custom-table":
        tab = np.array(law.table, dtype=float)
        idx = rng.choice(len(tab), size=n, p=tab[:, 2] / tab[:, 2].sum())
        wp, wm = tab[idx, 0], tab[idx, 1]
    else:
        lr = math.log(law.rho)
        if law.kind == "bernoulli-symmetric":
            x = np.where(rng.random(n) < 0.5, lr, -lr)
        else:
            x = rng.uniform(-lr, lr, size=n)
        wp, wm = np.exp(x / 2), np.exp(-x / 2)
    return Environment(wp, wm, kappa=law.kappa, seed=int(seed), law=law)


def potential(env):
    """``V(0) = 0``, ``V(x) = sum_{i<x} ln(w_minus_i / w_plus_i)`` for ``x = 0..n``."""
    incr = np.log(env.w_minus / env.w_plus)
    return Path(1.0, np.concatenate(([0.0], np.cumsum(incr))))


def brownian_increments(rng, n, sigma2, step):
    return rng.standard_normal(n) * math.sqrt(sigma2 * step)


def sample_brownian(sigma2, step, length, seed):
    """Brownian path with ``Var W(x) = sigma2 * x`` on ``length`` grid points."""
    if not (sigma2 > 0 and step > 0 and int(length) >= 1):
        raise ConfigurationError("sigma2, step and length must be positive")
    rng = make_rng(seed, STREAM_BROWNIAN)
    inc = brownian_increments(rng, int(length) - 1, sigma2, step)
    return Path(step, np.concatenate(([0.0], np.cumsum(inc))), sigma2=sigma2)
