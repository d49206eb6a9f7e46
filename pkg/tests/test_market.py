import math

import numpy as np
import pytest
from scipy.integrate import quad

from cptq import functions as F
from cptq.choquet import DiscreteLaw, QuantileLaw
from cptq.errors import DivergenceError, DomainError
from cptq.market import (
    DiscreteKernel,
    LognormalKernel,
    TableKernel,
    budget,
    check_assumptions,
    hardy_littlewood_check,
)
from conftest import random_discrete_law

SIGMA = 0.2


@pytest.fixture(scope="module")
def lognormal():
    return LognormalKernel(SIGMA)


def lognormal_moment(p, sigma=SIGMA):
    return math.exp(0.5 * sigma ** 2 * p * (p - 1.0))


def test_median(lognormal):
    assert abs(lognormal.quantile(0.5) - math.exp(-0.5 * SIGMA ** 2)) < 1e-14


def test_degenerate_kernel_quantile():
    k = DiscreteKernel([1.0], [1.0])
    for p in (0.01, 0.5, 0.99):
        assert k.quantile(p) == 1.0


def test_quantile_grows_unbounded(lognormal):
    probes = [lognormal.quantile(1.0 - 10.0 ** -j) for j in range(1, 13)]
    assert all(b > a for a, b in zip(probes, probes[1:]))


def test_quantile_monotone_all_kernels(rng):
    kernels = [
        LognormalKernel(0.3),
        TableKernel([0.0, 0.3, 1.0], [0.5, 0.9, 2.0]),
        DiscreteKernel([0.5, 1.0, 1.5], [0.3, 0.4, 0.3]),
    ]
    grid = np.linspace(1e-6, 1.0 - 1e-6, 513)
    for k in kernels:
        qs = np.asarray(k.quantile(grid))
        assert np.all(np.diff(qs) >= 0.0)


def test_quantile_domain_error(lognormal):
    with pytest.raises(DomainError):
        lognormal.quantile(0.0)
    with pytest.raises(DomainError):
        lognormal.quantile(1.5)


def test_tail_expectation_closed_form(lognormal, rng):
    # MC oracle: E[rho; rho > q(1-eps)] at a few levels
    z = rng.standard_normal(1_000_000)
    rho = np.exp(lognormal.mu + SIGMA * z)
    for eps in (0.5, 0.1, 0.01):
        level = lognormal.quantile(1.0 - eps)
        samples = rho * (rho > level)
        mc = float(np.mean(samples))
        se = float(np.std(samples)) / 1000.0
        assert abs(lognormal.tail_expectation(eps) - mc) < 4.0 * se


def test_tail_expectation_tiny_eps_stable(lognormal):
    eps = 1e-25
    val = lognormal.tail_expectation(eps)
    assert 0.0 < val < 1e-20
    # lower bound from the derivation: E[rho; rho > b] >= b * eps
    assert val >= lognormal.quantile_upper(eps) * eps


def test_moments_lognormal(lognormal):
    for p, tol in ((1, 1e-6), (2, 1e-6), (4, 1e-5), (8, 1e-4)):
        est, finite = lognormal.moment(p)
        cf = lognormal_moment(p)
        assert finite
        assert abs(est - cf) < tol * cf, (p, est, cf)
        est_neg, finite_neg = lognormal.moment(-p)
        cf_neg = lognormal_moment(-p)
        assert finite_neg
        assert abs(est_neg - cf_neg) < tol * cf_neg


def test_unit_mean(lognormal):
    est, _ = lognormal.moment(1)
    assert abs(est - 1.0) < 1e-6
    assert lognormal.unit_mean


def test_check_assumptions_lognormal(lognormal):
    rep = check_assumptions(lognormal, moment_orders=(1, 2, 4, 8))
    assert rep.continuous_cdf == "yes"
    assert rep.unbounded_above == "yes"
    assert rep.all_satisfied
    assert len(rep.unbounded_evidence) >= 8


def test_check_assumptions_bounded_table():
    k = TableKernel([0.0, 0.5, 1.0], [0.5, 1.0, 1.5])
    rep = check_assumptions(k, moment_orders=(1, 2))
    assert rep.unbounded_above == "no"
    assert not rep.all_satisfied


def test_check_assumptions_discrete_kernel():
    k = DiscreteKernel([0.5, 1.5], [0.5, 0.5])
    rep = check_assumptions(k, moment_orders=(1,))
    assert rep.continuous_cdf == "no"


def test_flat_table_kernel_reported():
    k = TableKernel([0.0, 0.3, 0.6, 1.0], [0.5, 1.0, 1.0, 2.0])
    rep = check_assumptions(k, moment_orders=(1,))
    assert rep.continuous_cdf == "no"
    # atom mass visible through the cdf
    assert abs(k.cdf(1.0) - 0.6) < 1e-12


def test_budget_degenerate_kernel_is_expectation():
    k = DiscreteKernel([1.0], [1.0])
    law = DiscreteLaw([2.0, -1.0, 5.0], [0.3, 0.2, 0.5])
    expected = float(np.sum(law.values * law.probs))
    assert abs(budget(k, law) - expected) < 1e-14


def test_budget_constant_payoff(lognormal):
    assert abs(budget(lognormal, DiscreteLaw([3.0], [1.0])) - 3.0) < 1e-12


def test_budget_anticomonotone_copy(lognormal):
    # the payoff with the kernel's own law, held anti-comonotone, costs
    # exactly exp(-sigma^2): q(x) q(1-x) is constant for a lognormal kernel
    law = QuantileLaw(lognormal.quantile)
    lo = budget(lognormal, law)
    cf = math.exp(-SIGMA ** 2)
    assert abs(lo - cf) < 1e-6 * cf
    assert lo < 1.0  # strictly below independent pricing E[rho] E[X]


def test_budget_linear(lognormal):
    q1 = lambda p: np.asarray(p, dtype=float) ** 2
    q2 = lambda p: 1.0 + np.asarray(p, dtype=float)
    b1 = budget(lognormal, QuantileLaw(q1))
    b2 = budget(lognormal, QuantileLaw(q2))
    for a, b in ((2.0, 3.0), (0.5, 0.0), (1.0, 1.0)):
        combo = budget(lognormal, QuantileLaw(lambda p: a * q1(p) + b * q2(p)))
        assert abs(combo - (a * b1 + b * b2)) < 1e-9 * max(1.0, abs(combo))


def test_budget_divergent_negative_part(lognormal):
    bad = QuantileLaw(lambda p: -np.exp(3.0 / np.asarray(p, dtype=float)))
    with pytest.raises(DivergenceError):
        budget(lognormal, bad)


def test_hardy_littlewood_degenerate():
    k = DiscreteKernel([1.0], [1.0])
    law = DiscreteLaw([2.0, 5.0], [0.4, 0.6])
    lo, up = hardy_littlewood_check(k, law)
    expected = 2.0 * 0.4 + 5.0 * 0.6
    assert abs(lo - expected) < 1e-14 and abs(up - expected) < 1e-14


def test_hardy_littlewood_two_state_enumeration():
    # two equally likely kernel states and a two-atom law: only two
    # monotone couplings exist, and they bracket every mixture
    k = DiscreteKernel([0.5, 1.5], [0.5, 0.5])
    law = DiscreteLaw([1.0, 3.0], [0.5, 0.5])
    lo, up = hardy_littlewood_check(k, law)
    anti = 0.5 * (3.0 * 0.5 + 1.0 * 1.5)
    co = 0.5 * (1.0 * 0.5 + 3.0 * 1.5)
    assert abs(lo - anti) < 1e-14
    assert abs(up - co) < 1e-14


def test_hardy_littlewood_brackets_random_couplings(lognormal, rng):
    # X with a lognormal-type upper tail, coupled to the kernel through
    # random copulas: no coupling escapes [lower, upper]
    q_fn = lambda p: 2.0 * np.asarray(p, dtype=float) ** 1.5 + 0.1
    lo, up = hardy_littlewood_check(lognormal, QuantileLaw(q_fn))
    n = 400_000
    u = rng.random(n)
    couplings = {
        "comonotone": u,
        "anti": 1.0 - u,
        "independent": rng.random(n),
        "mixture": np.where(rng.random(n) < 0.5, u, rng.random(n)),
    }
    rho = lognormal.quantile(np.clip(u, 1e-12, 1 - 1e-12))
    for name, v in couplings.items():
        cost = float(np.mean(rho * q_fn(np.clip(v, 1e-12, 1 - 1e-12))))
        se = float(np.std(rho * q_fn(v))) / math.sqrt(n)
        assert cost > lo - 4 * se, (name, cost, lo)
        assert cost < up + 4 * se, (name, cost, up)


def test_budget_minimal_over_couplings(lognormal, rng):
    # anti-comonotone arrangement is the cheapest coupling
    q_fn = lambda p: np.asarray(p, dtype=float) ** 2 + 0.5
    lo = budget(lognormal, QuantileLaw(q_fn))
    n = 300_000
    u = rng.random(n)
    rho = lognormal.quantile(np.clip(u, 1e-12, 1 - 1e-12))
    for _ in range(5):
        v = rng.random(n)
        cost = float(np.mean(rho * q_fn(v)))
        se = float(np.std(rho * q_fn(v))) / math.sqrt(n)
        assert lo <= cost + 4 * se


def test_table_kernel_exact_partial_integrals():
    k = TableKernel([0.0, 0.25, 1.0], [0.2, 0.7, 2.0])
    num = quad(lambda x: k.quantile(x), 0.6, 1.0)[0]
    assert abs(k.tail_expectation(0.4) - num) < 1e-10
    assert abs(k.partial_expectation(0.1, 0.9) - quad(k.quantile, 0.1, 0.9)[0]) < 1e-10


def test_table_kernel_csv(tmp_path):
    path = tmp_path / "k.csv"
    path.write_text("p,q\n0.0,0.5\n0.5,1.0\n1.0,2.0\n")
    k = TableKernel.from_csv(path)
    assert k.quantile(0.25) == 0.75
    flat = tmp_path / "flat.csv"
    flat.write_text("p,q\n0.0,0.5\n0.5,1.0\n1.0,1.0\n")
    with pytest.raises(DomainError):
        TableKernel.from_csv(flat)  # CSV tables must be strictly increasing


def test_discrete_kernel_tail_expectation():
    k = DiscreteKernel([0.5, 1.5], [0.5, 0.5])
    assert abs(k.tail_expectation(0.5) - 0.75) < 1e-15
    assert abs(k.tail_expectation(1.0) - 1.0) < 1e-15
    assert abs(k.tail_expectation(0.25) - 1.5 * 0.25) < 1e-15
