import math

import numpy as np
import pytest

from rwremeet.env import (
    Environment,
    EnvironmentLaw,
    Path,
    gen_environment,
    potential,
    sample_brownian,
    validate_conditions,
)
from rwremeet.errors import ConfigurationError

E = math.e


def test_bernoulli_law_small():
    env = gen_environment(EnvironmentLaw("bernoulli-symmetric", rho=E, kappa=E), 4, 7)
    assert env.n_sites == 4
    ratio = env.w_plus / env.w_minus
    assert np.allclose(np.minimum(np.abs(ratio - E), np.abs(ratio - 1 / E)), 0, atol=1e-12)
    assert np.all(env.w_plus >= 1 / E) and np.all(env.w_plus <= E)
    assert np.all(env.w_minus >= 1 / E) and np.all(env.w_minus <= E)


def test_gen_environment_deterministic():
    law = EnvironmentLaw()
    a, b = gen_environment(law, 1000, 7), gen_environment(law, 1000, 7)
    assert a.w_plus.tobytes() == b.w_plus.tobytes()
    assert a.w_minus.tobytes() == b.w_minus.tobytes()
    assert not np.array_equal(a.w_plus, gen_environment(law, 1000, 8).w_plus)


def test_bernoulli_log_ratio_mean():
    n = 10**6
    env = gen_environment(EnvironmentLaw("bernoulli-symmetric", rho=E, kappa=E), n, 1)
    x = np.log(env.w_plus / env.w_minus)
    assert abs(x.mean()) < 4 * x.std() / math.sqrt(n)


def test_uniform_law_within_bounds():
    env = gen_environment(EnvironmentLaw("uniform-logratio", rho=E, kappa=E), 10_000, 2)
    x = np.log(env.w_plus / env.w_minus)
    assert x.min() >= -1 and x.max() <= 1
    assert abs(x.var() - 1 / 3) < 0.02


def test_custom_table():
    law = EnvironmentLaw("custom-table", kappa=3.0, table=((2.0, 1.0, 0.5), (1.0, 2.0, 0.5)))
    env = gen_environment(law, 500, 0)
    assert set(np.unique(env.w_plus)) <= {1.0, 2.0}
    assert validate_conditions(law).ok


def test_invalid_laws():
    with pytest.raises(ConfigurationError):
        gen_environment(EnvironmentLaw(rho=1.0), 10, 0)
    with pytest.raises(ConfigurationError):
        gen_environment(EnvironmentLaw(kappa=1.0), 10, 0)
    with pytest.raises(ConfigurationError):
        EnvironmentLaw("cauchy")


def test_potential_examples():
    flat = Environment.flat(6)
    assert np.array_equal(potential(flat).values, np.zeros(7))
    env = Environment(np.array([1 / E, E]), np.array([E, 1 / E]), kappa=E)
    assert np.allclose(potential(env).values, [0.0, 2.0, 0.0], atol=1e-15)


def test_potential_matches_independent_sum():
    env = gen_environment(EnvironmentLaw("uniform-logratio"), 50, 11)
    v = potential(env).values
    acc, ref = 0.0, [0.0]
    for wp, wm in zip(env.w_plus, env.w_minus):
        acc += math.log(wm / wp)
        ref.append(acc)
    assert np.array_equal(v, np.cumsum(np.concatenate(([0.0], np.log(env.w_minus / env.w_plus)))))
    assert np.allclose(v, ref, rtol=0, atol=1e-12)


def test_sample_brownian_increment_variance():
    p = sample_brownian(1.0, 0.01, 10**5, 3)
    d = p.values[100:] - p.values[:-100]
    assert abs(d.var() - 1.0) < 0.1
    assert p.step == 0.01 and p.values[0] == 0


def test_sample_brownian_errors_and_determinism():
    with pytest.raises(ConfigurationError):
        sample_brownian(1.0, 0.0, 10, 0)
    a, b = sample_brownian(1.0, 0.01, 500, 1), sample_brownian(1.0, 0.01, 500, 1)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_brownian(1.0, 0.01, 500, 2).values)


def test_validate_conditions():
    rep = validate_conditions(EnvironmentLaw("bernoulli-symmetric", rho=E, kappa=E))
    # log-ratio is +-ln(rho) = +-1 here
    assert rep.ok and rep.mean_log_ratio == 0 and rep.sigma2 == pytest.approx(1.0)
    rep = validate_conditions(EnvironmentLaw("uniform-logratio", rho=E, kappa=E))
    assert rep.sigma2 == pytest.approx(1 / 3)
    rep = validate_conditions(EnvironmentLaw(kappa=1.0))
    assert not rep.ok and any("Condition B" in s for s in rep.problems)
    # rates are e^{+-1/2}, so any kappa >= sqrt(e) is enough
    assert validate_conditions(EnvironmentLaw(kappa=math.sqrt(E))).ok
    assert not validate_conditions(EnvironmentLaw(kappa=1.5)).ok


def test_biased_table_violates_zero_mean():
    rep = validate_conditions(EnvironmentLaw("custom-table", kappa=3.0, table=((2.0, 1.0, 1.0),)))
    assert not rep.ok


def test_environment_rejects_out_of_range_rates():
    with pytest.raises(ConfigurationError):
        Environment(np.array([1.0, 5.0]), np.array([1.0, 1.0]), kappa=E)


def test_round_trips(tmp_path):
    env = gen_environment(EnvironmentLaw(), 30, 4)
    env.save(tmp_path / "e.json")
    back = Environment.load(tmp_path / "e.json")
    assert np.array_equal(back.w_plus, env.w_plus) and back.law == env.law and back.seed == 4
    p = Path(0.5, np.array([0.0, 1.25, -0.5]))
    p.to_csv(tmp_path / "p.csv")
    q = Path.from_csv(tmp_path / "p.csv")
    assert q.step == 0.5 and np.array_equal(q.values, p.values)
    with pytest.raises(ConfigurationError):
        Path(1.0, np.array([1.0, 2.0]))
