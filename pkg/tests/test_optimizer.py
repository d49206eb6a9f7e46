import math

import numpy as np
import pytest

from cptq import attainability as attn
from cptq import functions as F
from cptq.choquet import cpt_value
from cptq.errors import InfeasibleError, ParameterError
from cptq.market import DiscreteKernel, LognormalKernel
from cptq.optimizer import (
    QuantilePortfolio,
    SolveOptions,
    lattice_oracle,
    solve,
    tightness_report,
    value_and_cost,
)

IDENT = F.IdentityDistortion()
ID_U = F.PowerUtility(1.0)
U_EXP = F.ExponentialUtility(1.0)


@pytest.fixture(scope="module")
def lognormal():
    return LognormalKernel(0.2)


def test_constant_profile(lognormal):
    port = QuantilePortfolio(np.full(16, 1.0), lognormal, U_EXP, ID_U, IDENT, IDENT)
    cpt, cost = value_and_cost(port)
    assert abs(cost - 1.0) < 1e-12
    assert abs(cpt.total - U_EXP(1.0)) < 1e-12


def test_zero_profile(lognormal):
    port = QuantilePortfolio(np.zeros(16), lognormal, U_EXP, ID_U, IDENT, IDENT)
    assert port.cost == 0.0
    assert port.cpt.total == 0.0


def test_two_level_hand_computation(lognormal):
    port = QuantilePortfolio(np.array([-1.0, 3.0]), lognormal, ID_U, ID_U, IDENT, IDENT)
    assert abs(port.cpt.total - 1.0) < 1e-12  # E[X] = (-1+3)/2
    top_price = lognormal.tail_expectation(0.5)
    assert abs(port.cost - (-1.0 * top_price + 3.0 * (1.0 - top_price))) < 1e-12


def test_grid_valuation_matches_choquet(lognormal, rng):
    q = np.sort(rng.normal(0.5, 2.0, 64))
    w_p = F.PrelecDistortion(1.0, 0.65)
    w_m = F.PowerDistortion(1.3)
    u_m = F.PowerUtility(2.0)
    port = QuantilePortfolio(q, lognormal, U_EXP, u_m, w_p, w_m)
    ref = cpt_value(port.law, U_EXP, u_m, w_p, w_m)
    assert abs(port.cpt.v_plus - ref.v_plus) < 1e-12
    assert abs(port.cpt.v_minus - ref.v_minus) < 1e-12


def test_monotone_profile_required(lognormal):
    with pytest.raises(ParameterError):
        QuantilePortfolio(np.array([1.0, 0.5]), lognormal, U_EXP, ID_U, IDENT, IDENT)


def test_solve_risk_neutral_matches_oracle():
    kern = DiscreteKernel([0.4, 0.8, 1.2, 1.6], [0.25, 0.25, 0.25, 0.25])
    opts = SolveOptions(n_starts=8, max_iter=5000, seed=11, q_min=0.0, q_max=4.0)
    port, diag = solve(kern, ID_U, ID_U, IDENT, IDENT, 1.0, n_cells=4, opts=opts)
    best, _ = lattice_oracle(kern, ID_U, ID_U, IDENT, IDENT, 1.0,
                             np.linspace(0.0, 4.0, 17), 4)
    assert port.cpt.total >= best - 1e-6
    assert port.cost <= 1.0 + 1e-6


def test_solve_pushes_mass_to_cheap_states():
    kern = DiscreteKernel([0.4, 0.8, 1.2, 1.6], [0.25, 0.25, 0.25, 0.25])
    opts = SolveOptions(n_starts=8, max_iter=5000, seed=3, q_min=0.0, q_max=4.0)
    port, _ = solve(kern, ID_U, ID_U, IDENT, IDENT, 1.0, n_cells=4, opts=opts)
    # anti-comonotone arrangement: wealth against the kernel quantile
    rho = kern.quantile(port.grid)
    cov = float(np.cov(port.q[::-1], rho)[0, 1])
    assert cov < 0.0


def test_solve_value_trace_monotone(lognormal):
    opts = SolveOptions(n_starts=4, max_iter=2000, seed=5)
    port, diag = solve(lognormal, U_EXP, F.PowerUtility(2.0), IDENT,
                       F.PowerDistortion(1.0), 1.0, n_cells=32, opts=opts)
    vt = diag.value_trace
    assert all(b >= a for a, b in zip(vt, vt[1:]))
    assert port.cpt.total == vt[-1]


def test_solve_feasible_and_below_ceiling(lognormal):
    opts = SolveOptions(n_starts=4, max_iter=2000, seed=5)
    port, diag = solve(lognormal, U_EXP, F.PowerUtility(2.0), IDENT,
                       F.PowerDistortion(1.0), 1.0, n_cells=32, opts=opts)
    assert port.cost <= 1.0 + 1e-6
    assert port.cpt.total <= U_EXP.saturation


def test_solve_infeasible_box(lognormal):
    opts = SolveOptions(n_starts=2, max_iter=100, seed=0, q_min=5.0, q_max=6.0)
    with pytest.raises(InfeasibleError):
        solve(lognormal, U_EXP, ID_U, IDENT, IDENT, 1.0, n_cells=8, opts=opts)


def test_solve_records_existence_regime(lognormal):
    u_minus = F.PowerUtility(2.0)
    w_minus = F.associated_distortion(u_minus, 0.5)
    opts = SolveOptions(n_starts=2, max_iter=500, seed=1, delta=0.5)
    _, diag = solve(lognormal, U_EXP, u_minus, IDENT, w_minus, 1.0,
                    n_cells=16, opts=opts)
    assert diag.existence["in_regime"] is True
    w_bad = F.associated_distortion(u_minus, 1.5)
    opts = SolveOptions(n_starts=2, max_iter=500, seed=1, delta=1.5)
    _, diag = solve(lognormal, U_EXP, u_minus, IDENT, w_bad, 1.0,
                    n_cells=16, opts=opts)
    assert diag.existence["in_regime"] is False


def test_oracle_agreement_ten_instances():
    rng = np.random.default_rng(2024)
    for trial in range(10):
        vals = np.sort(rng.uniform(0.2, 2.5, 5))
        probs = rng.dirichlet(np.ones(5))
        kern = DiscreteKernel(vals, probs)
        u_p = U_EXP if trial % 2 else F.PowerUtility(-1.0)
        w_p = F.PrelecDistortion(1.0, 0.65) if trial % 3 else IDENT
        w_m = F.PowerDistortion(1.2)
        u_m = F.PowerUtility(2.0)
        x0 = float(rng.uniform(0.5, 1.5))
        best, _ = lattice_oracle(kern, u_p, u_m, w_p, w_m, x0,
                                 np.linspace(-1.0, 3.0, 15), 5)
        opts = SolveOptions(n_starts=12, max_iter=6000, seed=trial,
                            q_min=-1.0, q_max=3.0)
        port, _ = solve(kern, u_p, u_m, w_p, w_m, x0, n_cells=5, opts=opts)
        assert port.cpt.total >= best - 1e-6, (trial, port.cpt.total, best)


def test_tightness_report_in_regime(lognormal):
    u_minus = F.PowerUtility(2.0)
    delta, zeta, eta = 0.5, 1.5, 1.2
    w_minus = F.associated_distortion(u_minus, delta)
    opts = SolveOptions(n_starts=4, max_iter=2000, seed=9, delta=delta,
                        eta_moment=eta)
    _, diag = solve(lognormal, U_EXP, u_minus, IDENT, w_minus, 1.0,
                    n_cells=64, opts=opts)
    G = attn.g_function(u_minus, delta, zeta)
    report = tightness_report(diag, u_minus, delta, eta, zeta, G)
    assert report["violations"] == 0
    assert len(report["snapshots"]) >= 1
    assert report["max_neg_moment"] < math.inf


def test_tightness_report_flags_nothing_for_constant(lognormal):
    u_minus = F.PowerUtility(2.0)
    delta, zeta, eta = 0.5, 1.5, 1.2
    opts = SolveOptions(n_starts=1, max_iter=1, seed=0, eta_moment=eta)
    _, diag = solve(lognormal, U_EXP, u_minus, IDENT,
                    F.associated_distortion(u_minus, delta), 1.0,
                    n_cells=8, opts=opts)
    G = attn.g_function(u_minus, delta, zeta)
    report = tightness_report(diag, u_minus, delta, eta, zeta, G)
    assert report["violations"] == 0


def test_threshold_contrast_across_resolution(lognormal):
    # matched runs differing only in the association strength: in the
    # existence regime loss moments stay put, outside they grow with the
    # grid resolution
    u_minus = F.PowerUtility(2.0)
    maxima = {}
    for delta in (0.5, 1.5):
        w_minus = F.associated_distortion(u_minus, delta)
        out = []
        for n_cells in (256, 512, 1024):
            opts = SolveOptions(n_starts=4, max_iter=4000, seed=7,
                                eta_moment=1.2, delta=delta)
            _, diag = solve(lognormal, U_EXP, u_minus, IDENT, w_minus, 1.0,
                            n_cells=n_cells, opts=opts)
            out.append(max(diag.neg_moment_trace))
        maxima[delta] = out
    lo = maxima[0.5]
    hi = maxima[1.5]
    assert max(lo) <= 3.0 * min(lo)               # bounded across resolutions
    assert hi[0] < hi[1] < hi[2]                  # strictly increasing
    assert min(hi) > 10.0 * max(lo)               # and on another scale entirely


def test_portfolio_csv(tmp_path, lognormal):
    port = QuantilePortfolio(np.array([0.5, 1.0, 1.5, 2.0]), lognormal,
                             U_EXP, ID_U, IDENT, IDENT)
    path = tmp_path / "portfolio.csv"
    port.to_csv(path, header_lines=["fixture"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# fixture"
    assert lines[1] == "p,q"
    assert len(lines) == 6
