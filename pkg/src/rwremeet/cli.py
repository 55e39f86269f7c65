"""Command-line front end.

Subcommands: ``gen-env``, ``analyze``, ``simulate`` and ``experiment``
(``theorem1`` / ``theorem3``). Every command that writes files also writes a
``<output>.manifest.json`` recording the full configuration, the tool
version, the wall time and a sha256 digest of each output file.

Exit codes: 0 success, 2 configuration error, 3 numerical feasibility error.
"""

import argparse
import hashlib
import json
import math
import sys
import time

import numpy as np

from . import __version__, landscape, lawcheck, oracle, simulate
from .env import EnvironmentLaw, Environment, Path, gen_environment, potential, sample_brownian, validate_conditions
from .errors import ConfigurationError, FeasibilityError, HorizonError
from .rng import rng_metadata

EXIT_OK, EXIT_CONFIG, EXIT_FEASIBILITY = 0, 2, 3
SCHEMA = 1

LAW_ALIASES = {"bernoulli": "bernoulli-symmetric", "uniform": "uniform-logratio", "custom": "custom-table"}


def _sha256(fname):
    h = hashlib.sha256()
    with open(fname, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(args, outputs, started):
    if not outputs:
        return
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "schema": SCHEMA,
        "command": args.command if not getattr(args, "driver", None) else f"{args.command} {args.driver}",
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "rng": rng_metadata(),
        "wall_time": time.time() - started,
        "outputs": [{"path": f, "sha256": _sha256(f)} for f in outputs],
    }
    with open(outputs[0] + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=str)


def _emit_json(obj, out):
    text = json.dumps(obj, indent=2, default=_json_default)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        return [out]
    print(text)
    return []


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


def _floats(text):
    """``"a,b,c"`` or ``"start:stop:num"`` (inclusive linspace)."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(f"expected start:stop:num, got {text!r}")
        return list(np.linspace(float(parts[0]), float(parts[1]), int(parts[2])))
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# commands


def cmd_gen_env(args):
    kind = LAW_ALIASES.get(args.law, args.law)
    table = ()
    if kind == "custom-table":
        if not args.table:
            raise ConfigurationError("--law custom needs --table FILE (JSON list of [w_plus, w_minus, p])")
        with open(args.table, encoding="utf-8") as fh:
            table = tuple(tuple(row) for row in json.load(fh))
    law = EnvironmentLaw(kind, rho=args.rho, kappa=args.kappa, table=table)
    report = validate_conditions(law)
    if not report.ok:
        raise ConfigurationError("; ".join(report.problems))
    env = gen_environment(law, args.n, args.seed)
    d = env.to_dict()
    d["conditions"] = report.to_dict()
    d["rng"] = rng_metadata()
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(d, fh)
    return [args.output]


def _load_path(args):
    given = [x for x in (args.env, args.path, args.values, args.brownian) if x]
    if len(given) != 1:
        raise ConfigurationError("give exactly one of --env, --path, --values, --brownian")
    if args.env:
        return potential(Environment.load(args.env))
    if args.path:
        return Path.from_csv(args.path)
    if args.values:
        return Path(1.0, np.array(_floats(args.values)))
    return sample_brownian(args.sigma2, args.step, args.length, args.seed)


def cmd_analyze(args):
    path = _load_path(args)
    out = {"schema": SCHEMA, "lnt": args.lnt, "gamma": args.gamma, "step": path.step}
    out["decomposition"] = landscape.stable_points(path, args.lnt, args.x_max).to_dict()
    out["zeta"] = landscape.zeta(path, args.lnt, args.gamma)
    if args.cascade:
        alpha = args.alpha if args.alpha is not None else args.lnt ** (-5 / 6)
        out["cascade"] = landscape.construct_cascade(path, args.lnt, args.gamma, alpha).to_dict()
    if args.diagnostics:
        out["diagnostics"] = landscape.t_good_diagnostics(path, args.lnt, args.gamma)
    return _emit_json(out, args.output)


def cmd_simulate(args):
    env = Environment.load(args.env)
    starts = tuple(_ints(args.starts)) if args.starts else None
    cfg = simulate.WalkerConfig(args.gamma, t_max=args.t_max, starts=starts)
    curve = simulate.survival_curve(env, cfg, _floats(args.t_grid), args.replicas, args.seed, mode=args.mode,
                                    workers=args.workers, keep_outcomes=bool(args.dump_replicas))
    outputs = []
    if args.output:
        curve.to_csv(args.output)
        outputs.append(args.output)
    else:
        print("t,p,stderr,n_replicas")
        for t, p, s in zip(curve.t_grid, curve.p, curve.stderr):
            print(f"{t!r},{p!r},{s!r},{curve.n_replicas}")
    if args.dump_replicas:
        with open(args.dump_replicas, "w", encoding="utf-8") as fh:
            json.dump({"schema": SCHEMA, **curve.to_dict(), "replicas": curve.outcomes}, fh)
        outputs.append(args.dump_replicas)
    if curve.n_boundary:
        print(f"warning: {curve.n_boundary} replicas reached the last site of the environment", file=sys.stderr)
    return outputs


def run_theorem1(n_envs, n_sites, rho, kappa, lnt_grid, L, tol, seed, gamma=2, progress=None):
    """Per environment: oracle tail exponents ``e(t)`` and landscape ``zeta(t)``."""
    law = EnvironmentLaw("bernoulli-symmetric", rho=rho, kappa=kappa)
    cfg = simulate.WalkerConfig(gamma, t_max=1.0)
    lnts = np.asarray(lnt_grid, dtype=float)
    series = []
    for k in range(n_envs):
        env = gen_environment(law, n_sites, seed + k)
        te = oracle.tail_exponent(env, cfg, np.exp(lnts), L, tol)
        pot = potential(env)
        zeta = [landscape.zeta(pot, lnt, gamma) for lnt in lnts]
        series.append({
            "env_seed": seed + k,
            "lnt": [float(v) for v in lnts],
            "t": list(te.t),
            "e": list(te.e),
            "zeta": zeta,
            "log_p": list(te.log_p),
            "boundary_mass": [r.boundary_mass for r in te.records],
            "slope": te.slope,
        })
        if progress:
            progress(k, series[-1])
    gaps = np.array([[abs(e - z) for e, z in zip(s["e"], s["zeta"])] for s in series])
    return {
        "schema": SCHEMA,
        "driver": "theorem1",
        "config": {"n_envs": n_envs, "n_sites": n_sites, "rho": rho, "kappa": kappa, "lnt_grid": list(map(float, lnts)),
                   "L": L, "tol": tol, "seed": seed, "gamma": gamma},
        "series": series,
        "median_abs_gap": [float(v) for v in np.median(gaps, axis=0)],
    }


def run_theorem3(gammas, n_paths, lnts, seed, sigma2=1.0, step=1e-3, level=0.01):
    """KS of ``zeta - offset`` against the limit law for each ``(lnt, gamma)``;
    with several ``lnt`` values, two-sample KS between each pair of them.
    Each ``lnt`` uses its own independent set of paths."""
    samples = {}
    for j, lnt in enumerate(lnts):
        z = lawcheck.sample_brownian_zeta([lnt], gammas, n_paths, seed, sigma2, step, first_index=j * n_paths)
        for gi, g in enumerate(gammas):
            samples[(lnt, g)] = z[0, gi] - g * (g - 1) / 2
    one = []
    for (lnt, g), x in samples.items():
        rep = lawcheck.ks_statistic(x, lambda v, g=g: lawcheck.cdf_F(g, v), level)
        one.append({"lnt": lnt, "gamma": g, "mean": float(np.mean(x)), "gof": rep.to_dict()})
    two = []
    for i, a in enumerate(lnts):
        for b in lnts[i + 1 :]:
            for g in gammas:
                rep = lawcheck.ks_two_sample(samples[(a, g)], samples[(b, g)], level)
                two.append({"lnt_a": a, "lnt_b": b, "gamma": g, "gof": rep.to_dict()})
    return {
        "schema": SCHEMA,
        "driver": "theorem3",
        "config": {"gammas": list(gammas), "n_paths": n_paths, "lnts": list(lnts), "seed": seed,
                   "sigma2": sigma2, "step": step, "level": level},
        "one_sample": one,
        "two_sample": two,
    }


def cmd_experiment(args):
    if args.driver == "theorem1":
        caps = oracle.TUPLE_CAPS
        if args.gamma in caps and args.L > caps[args.gamma]:
            raise FeasibilityError(
                f"L={args.L} exceeds the oracle cap {caps[args.gamma]} for gamma={args.gamma}; "
                f"choose L of a few lnt^2 wells, e.g. L <= {caps[args.gamma]}"
            )
        lam_t = 2 * (math.sqrt(args.rho) + 1 / math.sqrt(args.rho)) * args.gamma * math.exp(max(_floats(args.lnt_grid)))
        if lam_t > oracle.SERIES_CAP:
            raise FeasibilityError(
                f"largest lnt needs about {lam_t:.3g} uniformization steps (cap {oracle.SERIES_CAP}); "
                "lower the top of --lnt-grid"
            )
        report = run_theorem1(args.n_envs, args.n_sites, args.rho, args.kappa, _floats(args.lnt_grid), args.L,
                              args.tol, args.seed, args.gamma)
    else:
        report = run_theorem3(_ints(args.gamma_list), args.paths, _floats(args.lnt), args.seed, args.sigma2, args.step,
                              args.level)
    return _emit_json(report, args.output)


# ---------------------------------------------------------------------------
# parser


def build_parser():
    p = argparse.ArgumentParser(prog="rwremeet", description="Meeting times of random walks in random environment.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-env", help="draw an i.i.d. environment")
    g.add_argument("--law", default="bernoulli", choices=sorted(set(LAW_ALIASES) | set(LAW_ALIASES.values())))
    g.add_argument("--rho", type=float, default=math.e, help="log-ratio magnitude is ln(rho)")
    g.add_argument("--kappa", type=float, default=math.e, help="ellipticity bound, rates in [1/kappa, kappa]")
    g.add_argument("--table", help="JSON rows [w_plus, w_minus, p] for --law custom")
    g.add_argument("--n", type=int, required=True, help="number of sites")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_gen_env)

    a = sub.add_parser("analyze", help="stable points, zeta, cascade and diagnostics of a landscape")
    a.add_argument("--env", help="environment JSON (its potential is analysed)")
    a.add_argument("--path", help="path CSV with columns x,value")
    a.add_argument("--values", help="comma-separated path values starting with 0 (unit step)")
    a.add_argument("--brownian", action="store_true", help="sample a Brownian path")
    a.add_argument("--sigma2", type=float, default=1.0)
    a.add_argument("--step", type=float, default=1e-3)
    a.add_argument("--length", type=int, default=1_000_000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--lnt", type=float, required=True)
    a.add_argument("--gamma", type=int, default=2)
    a.add_argument("--x-max", type=int, default=None)
    a.add_argument("--cascade", action="store_true")
    a.add_argument("--alpha", type=float, default=None, help="cascade start exponent (default lnt^(-5/6))")
    a.add_argument("--diagnostics", action="store_true")
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo survival curve")
    s.add_argument("--env", required=True)
    s.add_argument("--gamma", type=int, default=2)
    s.add_argument("--starts", help="comma-separated starting sites (default 1..gamma)")
    s.add_argument("--t-max", type=float, required=True)
    s.add_argument("--t-grid", required=True, help="a,b,c or start:stop:num")
    s.add_argument("--replicas", type=int, default=10_000)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--mode", choices=tuple(simulate.MODES), default="meeting")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--dump-replicas", help="also write per-replica outcomes as JSON")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="theorem drivers")
    esub = e.add_subparsers(dest="driver", required=True)
    t1 = esub.add_parser("theorem1", help="oracle tail exponents against zeta")
    t1.add_argument("--n-envs", type=int, default=20)
    t1.add_argument("--n-sites", type=int, default=5000)
    t1.add_argument("--rho", type=float, default=math.e)
    t1.add_argument("--kappa", type=float, default=math.e)
    t1.add_argument("--gamma", type=int, default=2)
    t1.add_argument("--lnt-grid", default="4,6,8,10")
    t1.add_argument("--L", type=int, default=600)
    t1.add_argument("--tol", type=float, default=1e-10)
    t1.add_argument("--seed", type=int, default=0)
    t1.add_argument("-o", "--output")
    t1.set_defaults(func=cmd_experiment)
    t3 = esub.add_parser("theorem3", help="zeta on Brownian paths against the limit law")
    t3.add_argument("--gamma", dest="gamma_list", default="2")
    t3.add_argument("--paths", type=int, default=2000)
    t3.add_argument("--lnt", default="6", help="one or more lnt values, comma-separated")
    t3.add_argument("--sigma2", type=float, default=1.0)
    t3.add_argument("--step", type=float, default=1e-3)
    t3.add_argument("--level", type=float, default=0.01)
    t3.add_argument("--seed", type=int, default=0)
    t3.add_argument("-o", "--output")
    t3.set_defaults(func=cmd_experiment)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        outputs = args.func(args)
    except (ConfigurationError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FeasibilityError, HorizonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    _write_manifest(args, outputs, started)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
