"""Pricing-kernel models, regularity checks, and the budget functional.

The market enters only through the law of the pricing kernel rho (the
state-price density): the cost of a terminal payoff X is E_P[rho X].  For a
payoff arranged anti-comonotonically with rho, X = q_nu(1 - U) with
U = F_rho(rho), this cost becomes

    budget = integral_0^1 q_rho(x) q_nu(1 - x) dx,

the cheapest arrangement of the law nu (Hardy-Littlewood).  Kernels expose
exact partial expectations of q_rho so that step-quantile payoffs are priced
without quadrature error.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import _quad
from .choquet import DiscreteLaw, QuantileLaw
from .errors import DivergenceError, DomainError

UNIT_MEAN_TOL = 1e-9


class PricingKernel:
    """Base class for models of the law of rho."""

    model = "abstract"

    def quantile(self, p):
        raise NotImplementedError

    def quantile_upper(self, eps):
        """q_rho(1 - eps), computed stably for tiny eps."""
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def survival(self, x):
        """P{rho > x}; overridden where the complement loses precision."""
        return 1.0 - self.cdf(x)

    def tail_expectation(self, eps):
        """integral_{1-eps}^1 q_rho(x) dx, exact per model, stable for tiny eps."""
        raise NotImplementedError

    def partial_expectation(self, lo, hi):
        """integral_lo^hi q_rho(x) dx."""
        return self.tail_expectation(1.0 - lo) - self.tail_expectation(1.0 - hi)

    @property
    def mean(self):
        """E_P[rho] = total mass of the state-price density."""
        return self.tail_expectation(1.0)

    @property
    def unit_mean(self):
        return abs(self.mean - 1.0) <= UNIT_MEAN_TOL

    def moment(self, order, rtol=1e-8):
        """(estimate, finite) for E[rho^order]; order may be negative."""
        def g(x):
            with np.errstate(over="ignore"):
                return self.quantile(x) ** order
        value, _ = _quad.unit_integral(g, rtol=rtol)
        if math.isinf(value):
            return math.inf, False
        return value, True


class LognormalKernel(PricingKernel):
    """Black-Scholes style kernel: log rho ~ N(-sigma^2/2, sigma^2).

    The location is pinned so that E_P[rho] = 1 (a change-of-measure density
    has unit mean).
    """

    model = "lognormal"

    def __init__(self, sigma):
        if sigma <= 0:
            raise DomainError("lognormal kernel needs sigma > 0")
        self.sigma = float(sigma)
        self.mu = -0.5 * self.sigma ** 2

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p <= 0.0) or np.any(p >= 1.0):
            raise DomainError("quantile level must lie in (0, 1)")
        out = np.exp(self.mu + self.sigma * ndtri(p))
        return float(out) if p.ndim == 0 else out

    def quantile_upper(self, eps):
        eps = np.asarray(eps, dtype=float)
        if np.any(eps <= 0.0) or np.any(eps >= 1.0):
            raise DomainError("tail level must lie in (0, 1)")
        out = np.exp(self.mu - self.sigma * ndtri(eps))
        return float(out) if eps.ndim == 0 else out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = ndtr((np.log(x) - self.mu) / self.sigma)
        out = np.where(x <= 0.0, 0.0, out)
        return float(out) if x.ndim == 0 else out

    def survival(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            out = ndtr(-(np.log(x) - self.mu) / self.sigma)
        out = np.where(x <= 0.0, 1.0, out)
        return float(out) if x.ndim == 0 else out

    def tail_expectation(self, eps):
        eps = np.asarray(eps, dtype=float)
        if np.any(eps < 0.0) or np.any(eps > 1.0):
            raise DomainError("tail mass must lie in [0, 1]")
        # integral over the top eps of the distribution: Phi-bar(z(eps) - sigma)
        with np.errstate(divide="ignore"):
            z = -ndtri(np.clip(eps, 0.0, 1.0))
        out = np.where(eps == 0.0, 0.0, np.where(eps == 1.0, 1.0, ndtr(-(z - self.sigma))))
        return float(out) if eps.ndim == 0 else out

    def __repr__(self):
        return f"LognormalKernel(sigma={self.sigma})"


class TableKernel(PricingKernel):
    """Kernel from a tabulated quantile function, piecewise linear between knots.

    Tables loaded from CSV must be strictly increasing; programmatic
    construction tolerates flat stretches (a kernel with atoms), which the
    regularity checks will then report.
    """

    model = "custom_quantile"

    def __init__(self, ps, qs, strict=False):
        ps = np.asarray(ps, dtype=float)
        qs = np.asarray(qs, dtype=float)
        if ps.ndim != 1 or ps.shape != qs.shape or ps.size < 2:
            raise DomainError("kernel table needs two equal-length columns")
        if ps[0] != 0.0 or ps[-1] != 1.0:
            raise DomainError("kernel table must cover probability range [0, 1]")
        if np.any(np.diff(ps) <= 0):
            raise DomainError("probability knots must be strictly increasing")
        if np.any(qs <= 0.0):
            raise DomainError("kernel quantile values must be positive")
        dq = np.diff(qs)
        if strict and np.any(dq <= 0):
            raise DomainError("kernel quantile table must be strictly increasing")
        if np.any(dq < 0):
            raise DomainError("kernel quantile table must be non-decreasing")
        self.ps = ps
        self.qs = qs

    @classmethod
    def from_csv(cls, path):
        ps, qs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                if row[0].strip() == "p":
                    continue
                ps.append(float(row[0]))
                qs.append(float(row[1]))
        return cls(ps, qs, strict=True)

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise DomainError("quantile level must lie in [0, 1]")
        out = np.interp(p, self.ps, self.qs)
        return float(out) if p.ndim == 0 else out

    def quantile_upper(self, eps):
        return self.quantile(1.0 - np.asarray(eps, dtype=float))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        # flat quantile stretches are atoms: keep the right-most knot of each
        # repeated value so the cdf jumps across the atom's full mass
        last = np.concatenate((self.qs[1:] != self.qs[:-1], [True]))
        out = np.interp(x, self.qs[last], self.ps[last], left=0.0, right=1.0)
        return float(out) if x.ndim == 0 else out

    def tail_expectation(self, eps):
        eps = np.asarray(eps, dtype=float)
        if np.any(eps < 0.0) or np.any(eps > 1.0):
            raise DomainError("tail mass must lie in [0, 1]")
        scalar = eps.ndim == 0
        out = np.array([self._tail_one(e) for e in np.atleast_1d(eps)])
        return float(out[0]) if scalar else out

    def _tail_one(self, eps):
        lo = 1.0 - eps
        # exact integral of the piecewise-linear quantile over [lo, 1]
        idx = np.searchsorted(self.ps, lo, side="right")
        knots = np.concatenate(([lo], self.ps[idx:]))
        vals = np.concatenate(([np.interp(lo, self.ps, self.qs)], self.qs[idx:]))
        return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(knots)))

    def __repr__(self):
        return f"TableKernel({self.ps.size} knots)"


class DiscreteKernel(PricingKernel):
    """Kernel taking finitely many values; for unit tests and toy markets.

    Violates the continuous-distribution regularity check by design.
    """

    model = "custom_quantile"

    def __init__(self, values, probs):
        law = DiscreteLaw(values, probs)  # validates
        order = np.argsort(law.values, kind="stable")
        self.values = law.values[order]
        self.probs = law.probs[order]
        if np.any(self.values <= 0.0):
            raise DomainError("kernel values must be positive")
        self.cum = np.cumsum(self.probs)
        self.cum[-1] = 1.0

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise DomainError("quantile level must lie in [0, 1]")
        idx = np.clip(np.searchsorted(self.cum, p, side="left"), 0, self.values.size - 1)
        out = self.values[idx]
        return float(out) if p.ndim == 0 else out

    def quantile_upper(self, eps):
        return self.quantile(1.0 - np.asarray(eps, dtype=float))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.values, x, side="right")
        out = np.where(idx > 0, self.cum[np.clip(idx - 1, 0, None)], 0.0)
        return float(out) if x.ndim == 0 else out

    def tail_expectation(self, eps):
        eps = np.asarray(eps, dtype=float)
        if np.any(eps < 0.0) or np.any(eps > 1.0):
            raise DomainError("tail mass must lie in [0, 1]")
        scalar = eps.ndim == 0
        out = []
        for e in np.atleast_1d(eps):
            lo = 1.0 - e
            acc = 0.0
            prev = 0.0
            for v, c in zip(self.values, self.cum):
                seg_lo = max(prev, lo)
                if c > seg_lo:
                    acc += v * (c - seg_lo)
                prev = c
            out.append(acc)
        out = np.asarray(out)
        return float(out[0]) if scalar else out

    def __repr__(self):
        return f"DiscreteKernel({self.values.size} states)"


# ---------------------------------------------------------------------------
# regularity checks


@dataclass
class MomentProbe:
    order: float
    positive: float
    positive_finite: bool
    negative: float
    negative_finite: bool

    def as_dict(self):
        return {
            "order": self.order,
            "E[rho^p]": self.positive,
            "E[rho^p]_finite": self.positive_finite,
            "E[rho^-p]": self.negative,
            "E[rho^-p]_finite": self.negative_finite,
        }


@dataclass
class AssumptionReport:
    """Numeric evidence for the market regularity conditions."""

    continuous_cdf: str
    continuous_evidence: list = field(default_factory=list)
    unbounded_above: str = "inconclusive"
    unbounded_evidence: list = field(default_factory=list)
    moments: list = field(default_factory=list)
    mean: float = math.nan

    @property
    def all_satisfied(self):
        return (
            self.continuous_cdf == "yes"
            and self.unbounded_above == "yes"
            and all(m.positive_finite and m.negative_finite for m in self.moments)
        )

    def as_dict(self):
        return {
            "continuous_cdf": self.continuous_cdf,
            "continuous_evidence": self.continuous_evidence,
            "unbounded_above": self.unbounded_above,
            "unbounded_evidence": self.unbounded_evidence,
            "moments": [m.as_dict() for m in self.moments],
            "mean": self.mean,
            "all_satisfied": self.all_satisfied,
        }


def check_assumptions(kernel, moment_orders=(1, 2, 4, 8, 16), tail_levels=14):
    """Probe the kernel's regularity: continuity, unbounded top, all moments.

    The verdicts are numeric evidence on finite ladders, not proofs; every
    probe is recorded in the report.
    """
    # continuity of the distribution <=> strictly increasing quantile
    grid = np.linspace(1e-6, 1.0 - 1e-6, 257)
    qs = np.asarray(kernel.quantile(grid), dtype=float)
    gaps = np.diff(qs)
    if isinstance(kernel, LognormalKernel):
        continuous = "yes"
        evidence = [[float(grid[0]), float(qs[0])], [float(grid[-1]), float(qs[-1])]]
    elif isinstance(kernel, DiscreteKernel):
        continuous = "no"
        evidence = [[float(p), float(q)] for p, q in zip(grid[::32], qs[::32])]
    else:
        continuous = "yes" if np.all(gaps > 0.0) else "no"
        flat = np.flatnonzero(gaps <= 0.0)[:8]
        evidence = [[float(grid[i]), float(qs[i])] for i in (flat if flat.size else range(0, 257, 32))]

    report = AssumptionReport(continuous_cdf=continuous, continuous_evidence=evidence)

    levels = [10.0 ** -j for j in range(1, tail_levels + 1)]
    top = [float(kernel.quantile_upper(e)) for e in levels]
    report.unbounded_evidence = [[e, q] for e, q in zip(levels, top)]
    growing = all(b > a for a, b in zip(top, top[1:]))
    if growing and top[-1] > 1.2 * top[len(top) // 2]:
        report.unbounded_above = "yes"
    elif top[-1] <= top[0] * (1.0 + 1e-12):
        report.unbounded_above = "no"
    else:
        report.unbounded_above = "no" if top[-1] < 1.0001 * top[len(top) // 2] else "inconclusive"

    for p in moment_orders:
        pos, pos_fin = kernel.moment(p)
        neg, neg_fin = kernel.moment(-p)
        report.moments.append(
            MomentProbe(order=float(p), positive=pos, positive_finite=pos_fin,
                        negative=neg, negative_finite=neg_fin)
        )
    report.mean = kernel.mean
    return report


# ---------------------------------------------------------------------------
# cost functional


def _as_quantile_fn(law):
    if isinstance(law, QuantileLaw):
        return law.quantile_fn
    if callable(law):
        return law
    return None


def budget(kernel, law, rtol=1e-8):
    """Cost of the payoff with law ``law`` arranged anti-comonotonically
    with the kernel: integral_0^1 q_rho(x) q_nu(1 - x) dx.

    Discrete laws are priced exactly through the kernel's partial
    expectations; quantile laws by adaptive quadrature.  A divergent
    negative part means the arrangement is inadmissible and raises.
    """
    if isinstance(law, DiscreteLaw):
        return _budget_steps(kernel, law, anti=True)
    q_fn = _as_quantile_fn(law)
    if q_fn is None:
        raise DomainError(f"cannot price object of type {type(law).__name__}")
    return _budget_smooth(kernel, q_fn, anti=True, rtol=rtol)


def _budget_steps(kernel, law, anti):
    order = np.argsort(law.values, kind="stable")
    vals = law.values[order]
    cum = np.cumsum(law.probs[order])
    cum[-1] = 1.0
    edges = np.concatenate(([0.0], cum))
    if anti:
        # payoff cell (c_{j-1}, c_j) occupies kernel states (1-c_j, 1-c_{j-1});
        # accumulate in tail space so tiny cells keep full precision
        tails = kernel.tail_expectation(edges)
        masses = np.diff(tails)
    else:
        tails = kernel.tail_expectation(1.0 - edges)
        masses = -np.diff(tails)
    return float(np.sum(vals * masses))


def _budget_smooth(kernel, q_fn, anti, rtol):
    def g(x):
        q_arg = 1.0 - x if anti else x
        return np.asarray(kernel.quantile(x), dtype=float) * np.asarray(
            q_fn(q_arg), dtype=float
        )

    def g_pos(x):
        return np.maximum(g(x), 0.0)

    def g_neg(x):
        return np.maximum(-g(x), 0.0)

    neg, _ = _quad.unit_integral(g_neg, rtol=rtol)
    if math.isinf(neg):
        raise DivergenceError("negative part of the cost diverges; payoff inadmissible")
    pos, _ = _quad.unit_integral(g_pos, rtol=rtol)
    if math.isinf(pos):
        return math.inf
    return pos - neg


def hardy_littlewood_check(kernel, law, rtol=1e-8):
    """Extreme costs of a payoff law over all couplings with the kernel.

    Returns (lower, upper): anti-comonotone and comonotone arrangements.
    Any joint arrangement with these marginals costs within the bracket.
    """
    if isinstance(law, DiscreteLaw):
        return (
            _budget_steps(kernel, law, anti=True),
            _budget_steps(kernel, law, anti=False),
        )
    q_fn = _as_quantile_fn(law)
    if q_fn is None:
        raise DomainError(f"cannot price object of type {type(law).__name__}")
    return (
        _budget_smooth(kernel, q_fn, anti=True, rtol=rtol),
        _budget_smooth(kernel, q_fn, anti=False, rtol=rtol),
    )
