import math

import numpy as np
import pytest

from cptq import functions as F
from cptq.choquet import (
    CPTValue,
    DiscreteLaw,
    QuantileLaw,
    choquet_oracle,
    choquet_positive,
    cpt_value,
    survival,
)
from cptq.errors import DivergenceError, DomainError
from conftest import random_discrete_law

IDENT = F.IdentityDistortion()
ID_U = F.PowerUtility(1.0)


def test_survival_discrete():
    law = DiscreteLaw([2.0, 0.0], [0.25, 0.75])
    assert survival(law, 1.0) == 0.25
    assert survival(law, -10.0) == 1.0
    assert survival(law, 2.0) == 0.0


def test_survival_quantile_uniform():
    unif = QuantileLaw(lambda p: np.asarray(p, dtype=float))
    assert abs(survival(unif, 0.5) - 0.5) < 1e-10


def test_single_atom_value():
    u = F.ExponentialUtility(1.0)
    w = F.PowerDistortion(2.0)
    law = DiscreteLaw([3.0], [1.0])
    assert abs(choquet_positive(law, u, w) - u(3.0)) < 1e-14
    assert abs(choquet_oracle(law, u, w) - u(3.0)) < 1e-14


def test_two_atom_hand_value():
    law = DiscreteLaw([2.0, 0.0], [0.25, 0.75])
    assert abs(choquet_positive(law, ID_U, F.PowerDistortion(2.0)) - 0.125) < 1e-15
    assert abs(choquet_oracle(law, ID_U, F.PowerDistortion(2.0)) - 0.125) < 1e-15


def test_identity_reduces_to_expectation(rng):
    u = F.LogUtility()
    for _ in range(200):
        law = random_discrete_law(rng)
        expected = float(np.sum(law.probs * u(law.values)))
        assert abs(choquet_positive(law, u, IDENT) - expected) <= 1e-10


def test_oracle_equivalence(rng):
    distortions = [IDENT, F.PowerDistortion(0.7), F.PrelecDistortion(1.0, 0.5)]
    utilities = [ID_U, F.ExponentialUtility(0.5), F.PowerUtility(2.0)]
    for i in range(300):
        law = random_discrete_law(rng)
        u = utilities[i % len(utilities)]
        w = distortions[i % len(distortions)]
        a = choquet_positive(law, u, w)
        b = choquet_oracle(law, u, w)
        assert abs(a - b) <= 1e-10


def test_oracle_equivalence_with_ties(rng):
    for _ in range(100):
        n = int(rng.integers(2, 30))
        vals = np.round(rng.exponential(3.0, n), 1)  # many exact ties
        law = DiscreteLaw(vals, rng.dirichlet(np.ones(n)))
        w = F.PrelecDistortion(0.8, 0.6)
        assert abs(choquet_positive(law, ID_U, w) - choquet_oracle(law, ID_U, w)) <= 1e-10


def test_monotone_in_distortion(rng):
    w_small = F.PowerDistortion(2.0)   # below identity on (0,1)
    w_big = F.PowerDistortion(0.5)     # above identity on (0,1)
    u = F.LogUtility()
    for _ in range(100):
        law = random_discrete_law(rng)
        v1 = choquet_positive(law, u, w_small)
        v2 = choquet_positive(law, u, w_big)
        assert v1 <= v2 + 1e-12


def test_identity_utility_positive_homogeneity(rng):
    w = F.PrelecDistortion(1.0, 0.5)
    for _ in range(100):
        law = random_discrete_law(rng, max_atoms=20)
        c = float(rng.uniform(0.1, 5.0))
        scaled = DiscreteLaw(c * law.values, law.probs)
        v = choquet_positive(law, ID_U, w)
        vc = choquet_positive(scaled, ID_U, w)
        assert abs(vc - c * v) <= 1e-10 * max(1.0, abs(vc))


def test_gain_value_below_saturation(rng):
    u = F.ExponentialUtility(1.0)
    w = F.PrelecDistortion(1.0, 0.5)
    for _ in range(100):
        law = random_discrete_law(rng, scale=50.0)
        assert choquet_positive(law, u, w) <= u.saturation


def test_negative_support_rejected():
    law = DiscreteLaw([-1.0, 2.0], [0.5, 0.5])
    with pytest.raises(DomainError):
        choquet_positive(law, ID_U, IDENT)


def test_quantile_law_closed_forms():
    unif = QuantileLaw(lambda p: np.asarray(p, dtype=float))
    # identity distortion: E[U] = 1/2
    assert abs(choquet_positive(unif, ID_U, IDENT) - 0.5) < 1e-7
    # power(2) distortion: integral_0^1 (1-s) d(s^2) = 1/3
    assert abs(choquet_positive(unif, ID_U, F.PowerDistortion(2.0)) - 1.0 / 3.0) < 1e-7


def test_quantile_matches_oracle_on_discretization(rng):
    q = lambda p: np.exp(np.asarray(p, dtype=float)) - 1.0
    law = QuantileLaw(q)
    u = F.LogUtility()
    w = F.PrelecDistortion(1.0, 0.65)
    smooth = choquet_positive(law, u, w)
    m = 1 << 13
    mids = (np.arange(m) + 0.5) / m
    disc = DiscreteLaw(q(mids), np.full(m, 1.0 / m))
    assert abs(smooth - choquet_oracle(disc, u, w)) < 1e-4


def test_cpt_value_zero_payoff():
    law = DiscreteLaw([0.0], [1.0])
    v = cpt_value(law, F.ExponentialUtility(1.0), F.LogUtility(), IDENT, IDENT)
    assert v.v_plus == 0.0 and v.v_minus == 0.0 and v.total == 0.0


def test_cpt_value_symmetric_cancels():
    law = DiscreteLaw([1.0, -1.0], [0.5, 0.5])
    v = cpt_value(law, ID_U, ID_U, IDENT, IDENT)
    assert abs(v.total) < 1e-15


def test_cpt_value_loss_divergence_is_minus_inf():
    heavy = QuantileLaw(lambda p: -1.0 / np.asarray(p, dtype=float) ** 3)
    v = cpt_value(heavy, F.ExponentialUtility(1.0), F.PowerUtility(2.0), IDENT, IDENT)
    assert math.isinf(v.v_minus)
    assert v.total == -math.inf


def test_quantile_negative_part():
    q = lambda p: np.asarray(p, dtype=float) - 0.3
    neg = QuantileLaw(q).negative_part()
    # E[(X)^-] = integral_0^0.3 (0.3 - u) du = 0.045
    assert abs(choquet_positive(neg, ID_U, IDENT) - 0.045) < 1e-7


def test_cpt_value_serialization_tokens():
    v = CPTValue(v_plus=0.5, v_minus=math.inf)
    d = v.as_dict()
    assert d["v_minus"] == "inf" and d["total"] == "-inf"
    assert "inf" in str(v)


def test_law_csv_round_trip(tmp_path):
    law = DiscreteLaw([1.5, -2.0, 0.25], [0.2, 0.3, 0.5])
    path = tmp_path / "law.csv"
    law.to_csv(path, header_lines=["fixture"])
    back = DiscreteLaw.from_csv(path)
    assert np.array_equal(back.values, law.values)
    assert np.array_equal(back.probs, law.probs)


def test_law_validation():
    with pytest.raises(DomainError):
        DiscreteLaw([1.0], [0.5])  # probabilities must sum to 1
    with pytest.raises(DomainError):
        DiscreteLaw([math.inf], [1.0])
    with pytest.raises(DomainError):
        DiscreteLaw([1.0, 2.0], [1.0, -0.0])
