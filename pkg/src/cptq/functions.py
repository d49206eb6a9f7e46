"""Catalog of utility and probability-distortion functions.

Utilities are strictly increasing maps on [0, inf) with u(0) = 0 and an
explicit (possibly infinite) upper limit ``saturation``.  Distortions are
strictly increasing maps of [0, 1] onto itself.  All objects are immutable
after construction and vectorized over numpy arrays.

Every utility also exposes two log-scale evaluators that the asymptotic
checkers rely on:

* ``log_eval(x)``  = log(u(x)), computed without forming huge intermediates,
* ``log_at_exp(t)`` = log(u(e^t)), the growth transform, stable for t far
  beyond the overflow range of e^t.
"""

from __future__ import annotations

import csv
import math

import numpy as np

from .errors import (
    AssociationError,
    DomainError,
    NormalizationError,
    SaturationError,
)

_LOG_MAX = 700.0  # exp() overflows shortly above this


def _eval(fn, x, lo=0.0, hi=math.inf, what="argument"):
    """Validate the domain and apply ``fn``, preserving scalar-ness."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < lo) or np.any(arr > hi):
        raise DomainError(f"{what} outside [{lo}, {hi}]")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = fn(arr)
    if arr.ndim == 0:
        return float(out)
    return out


def _log1p_exp(t):
    # log(1+e^t) = t + log1p(e^-t) for large t, log1p(e^t) otherwise
    t = np.asarray(t, dtype=float)
    small = np.minimum(t, 35.0)
    out = np.log1p(np.exp(small))
    big = t > 35.0
    if np.any(big):
        out = np.where(big, t + np.log1p(np.exp(-np.where(big, t, 35.0))), out)
    return out


class UtilityFunction:
    """Base class: strictly increasing on [0, inf) with u(0) = 0."""

    kind = "abstract"
    saturation = math.inf

    def __call__(self, x):
        raise NotImplementedError

    def inverse(self, y):
        raise NotImplementedError

    def log_eval(self, x):
        """log(u(x)); -inf where u(x) = 0."""
        return _eval(lambda a: np.log(self._raw(a)), x, what="utility argument")

    def log_at_exp(self, t):
        """log(u(e^t)) for t >= 0, the growth transform of the utility."""
        def f(a):
            if np.any(a > _LOG_MAX):
                raise DomainError("e^t overflows and no stable form is available")
            return np.log(self._raw(np.exp(a)))
        return _eval(f, t, what="transform argument")

    def _raw(self, arr):
        """Array evaluation without domain checks (arr already validated)."""
        raise NotImplementedError

    def _check_inverse_domain(self, y):
        arr = np.asarray(y, dtype=float)
        if np.any(arr < 0):
            raise DomainError("inversion target must be non-negative")
        if np.any(arr >= self.saturation):
            raise SaturationError(
                f"target {np.max(arr)} not attained; upper limit is {self.saturation}"
            )
        return arr

    def __repr__(self):
        return f"{type(self).__name__}({self._params()})"

    def _params(self):
        return ""


class PowerUtility(UtilityFunction):
    """u(x) = x^alpha for alpha > 0, u(x) = 1 - (1+x)^alpha for alpha < 0.

    Unbounded for positive exponents, saturates at 1 for negative ones.
    """

    kind = "power"

    def __init__(self, alpha):
        if alpha == 0:
            raise DomainError("power utility needs a nonzero exponent")
        self.alpha = float(alpha)
        self.saturation = math.inf if alpha > 0 else 1.0

    def __call__(self, x):
        if self.alpha > 0:
            return _eval(lambda a: a ** self.alpha, x)
        return _eval(lambda a: -np.expm1(self.alpha * np.log1p(a)), x)

    def inverse(self, y):
        arr = self._check_inverse_domain(y)
        with np.errstate(divide="ignore"):
            if self.alpha > 0:
                out = arr ** (1.0 / self.alpha)
            else:
                out = np.expm1(np.log1p(-arr) / self.alpha)
        return float(out) if arr.ndim == 0 else out

    def log_eval(self, x):
        if self.alpha > 0:
            return _eval(lambda a: self.alpha * np.log(a), x)
        return _eval(
            lambda a: np.log(-np.expm1(self.alpha * np.log1p(a))), x
        )

    def log_at_exp(self, t):
        if self.alpha > 0:
            return _eval(lambda a: self.alpha * a, t)
        return _eval(
            lambda a: np.log(-np.expm1(self.alpha * _log1p_exp(a))), t
        )

    def _raw(self, arr):
        if self.alpha > 0:
            return arr ** self.alpha
        return -np.expm1(self.alpha * np.log1p(arr))

    def _params(self):
        return f"alpha={self.alpha}"


class ExponentialUtility(UtilityFunction):
    """u(x) = 1 - e^(-alpha x), bounded above by 1."""

    kind = "exponential"
    saturation = 1.0

    def __init__(self, alpha):
        if alpha <= 0:
            raise DomainError("exponential utility needs alpha > 0")
        self.alpha = float(alpha)

    def __call__(self, x):
        return _eval(lambda a: -np.expm1(-self.alpha * a), x)

    def inverse(self, y):
        arr = self._check_inverse_domain(y)
        out = -np.log1p(-arr) / self.alpha
        return float(out) if arr.ndim == 0 else out

    def log_eval(self, x):
        return _eval(lambda a: np.log(-np.expm1(-self.alpha * a)), x)

    def log_at_exp(self, t):
        def f(a):
            e = np.exp(np.minimum(a, _LOG_MAX))
            z = self.alpha * e
            # u(e^t) -> 1 once alpha*e^t is huge, so log u -> 0
            return np.where(
                (a > _LOG_MAX) | (z > 700.0),
                0.0,
                np.log(-np.expm1(-np.minimum(z, 700.0))),
            )
        return _eval(f, t)

    def _raw(self, arr):
        return -np.expm1(-self.alpha * arr)

    def _params(self):
        return f"alpha={self.alpha}"


class LogUtility(UtilityFunction):
    """u(x) = log(1 + x)."""

    kind = "logarithmic"

    def __call__(self, x):
        return _eval(np.log1p, x)

    def inverse(self, y):
        arr = self._check_inverse_domain(y)
        out = np.expm1(arr)
        return float(out) if arr.ndim == 0 else out

    def log_eval(self, x):
        return _eval(lambda a: np.log(np.log1p(a)), x)

    def log_at_exp(self, t):
        return _eval(lambda a: np.log(_log1p_exp(a)), t)

    def _raw(self, arr):
        return np.log1p(arr)


class LogLogUtility(UtilityFunction):
    """u(x) = log(1 + log(1 + x))."""

    kind = "loglog"

    def __call__(self, x):
        return _eval(lambda a: np.log1p(np.log1p(a)), x)

    def inverse(self, y):
        arr = self._check_inverse_domain(y)
        out = np.expm1(np.expm1(arr))
        return float(out) if arr.ndim == 0 else out

    def log_eval(self, x):
        return _eval(lambda a: np.log(np.log1p(np.log1p(a))), x)

    def log_at_exp(self, t):
        return _eval(lambda a: np.log(np.log1p(_log1p_exp(a))), t)

    def _raw(self, arr):
        return np.log1p(np.log1p(arr))


class LogPowerUtility(UtilityFunction):
    """u(x) = exp(alpha * sign(x - 1) * |log x|^shape), u(0) = 0.

    Grows slower than any power; its associated distortion is the Prelec
    distortion with scale delta*alpha and the same shape.  We take u(1) = 1
    (the sign vanishes at x = 1), which matches the unit normalization used
    by the loss-side machinery.
    """

    kind = "log_power"

    def __init__(self, alpha, shape):
        if alpha <= 0:
            raise DomainError("log-power utility needs alpha > 0")
        if not 0 < shape < 1:
            raise DomainError("log-power utility needs shape in (0, 1)")
        self.alpha = float(alpha)
        self.shape = float(shape)

    def __call__(self, x):
        def f(a):
            with np.errstate(divide="ignore"):
                lx = np.log(a)
            return np.exp(self.alpha * np.sign(lx) * np.abs(lx) ** self.shape)
        return _eval(f, x)

    def inverse(self, y):
        arr = self._check_inverse_domain(y)
        with np.errstate(divide="ignore"):
            ly = np.log(arr)
        out = np.where(
            arr == 0.0,
            0.0,
            np.exp(np.sign(ly) * np.abs(ly / self.alpha) ** (1.0 / self.shape)),
        )
        return float(out) if arr.ndim == 0 else out

    def log_eval(self, x):
        def f(a):
            with np.errstate(divide="ignore"):
                lx = np.log(a)
            return self.alpha * np.sign(lx) * np.abs(lx) ** self.shape
        return _eval(f, x)

    def log_at_exp(self, t):
        return _eval(lambda a: self.alpha * a ** self.shape, t)

    def _raw(self, arr):
        with np.errstate(divide="ignore"):
            lx = np.log(arr)
        return np.exp(self.alpha * np.sign(lx) * np.abs(lx) ** self.shape)

    def _params(self):
        return f"alpha={self.alpha}, shape={self.shape}"


class TableUtility(UtilityFunction):
    """Monotone piecewise-linear utility from a tabulated (x, value) grid.

    The table must start at (0, 0) and be strictly increasing in both
    columns.  The upper limit is declared, never inferred from the data;
    evaluation beyond the tabulated range is refused.
    """

    kind = "custom"

    def __init__(self, xs, values, saturation=math.inf):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise DomainError("table needs two equal-length columns with >= 2 rows")
        if xs[0] != 0.0 or values[0] != 0.0:
            raise DomainError("utility table must start at (0, 0)")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(values) <= 0):
            raise DomainError("utility table must be strictly increasing in both columns")
        if saturation < values[-1]:
            raise DomainError("declared saturation below the last tabulated value")
        self.xs = xs
        self.values = values
        self.saturation = float(saturation)

    @classmethod
    def from_csv(cls, path):
        xs, values, saturation = _read_table_csv(path, "x")
        return cls(xs, values, saturation=saturation)

    def __call__(self, x):
        def f(a):
            if np.any(a > self.xs[-1]):
                raise DomainError("argument beyond the tabulated range")
            return np.interp(a, self.xs, self.values)
        return _eval(f, x)

    def inverse(self, y):
        arr = self._check_inverse_domain(y)
        if np.any(arr > self.values[-1]):
            raise DomainError("target beyond the tabulated range")
        out = np.interp(arr, self.values, self.xs)
        return float(out) if arr.ndim == 0 else out

    def log_at_exp(self, t):
        def f(a):
            hi = math.log(self.xs[-1]) if self.xs[-1] > 0 else -math.inf
            if np.any(a > hi):
                raise DomainError("argument beyond the tabulated range")
            return np.log(np.interp(np.exp(a), self.xs, self.values))
        return _eval(f, t)

    def _raw(self, arr):
        return np.interp(arr, self.xs, self.values)

    def _params(self):
        return f"{self.xs.size} rows, saturation={self.saturation}"


class ScaledUtility(UtilityFunction):
    """u(scale * x): the unit-normalized view of another utility."""

    kind = "scaled"

    def __init__(self, base, scale):
        self.base = base
        self.scale = float(scale)
        self.saturation = base.saturation
        self.kind = base.kind

    def __call__(self, x):
        return self.base(np.asarray(x, dtype=float) * self.scale)

    def inverse(self, y):
        inv = self.base.inverse(y)
        return inv / self.scale

    def log_eval(self, x):
        return self.base.log_eval(np.asarray(x, dtype=float) * self.scale)

    def log_at_exp(self, t):
        return self.base.log_at_exp(np.asarray(t, dtype=float) + math.log(self.scale))

    def _raw(self, arr):
        return self.base._raw(arr * self.scale)

    def _params(self):
        return f"base={self.base!r}, scale={self.scale}"


# ---------------------------------------------------------------------------
# distortions


class DistortionFunction:
    """Base class: strictly increasing [0,1] -> [0,1], w(0)=0, w(1)=1."""

    kind = "abstract"

    def __call__(self, p):
        raise NotImplementedError

    def log_eval(self, p):
        """log(w(p)); -inf at p = 0."""
        return _eval(lambda a: np.log(self._raw(a)), p, hi=1.0, what="probability")

    def _raw(self, arr):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self._params()})"

    def _params(self):
        return ""


class IdentityDistortion(DistortionFunction):
    """w(p) = p: no probability weighting."""

    kind = "identity"

    def __call__(self, p):
        return _eval(lambda a: a, p, hi=1.0, what="probability")

    def _raw(self, arr):
        return arr


class PowerDistortion(DistortionFunction):
    """w(p) = p^beta."""

    kind = "power"

    def __init__(self, beta):
        if beta <= 0:
            raise DomainError("power distortion needs beta > 0")
        self.beta = float(beta)

    def __call__(self, p):
        return _eval(lambda a: a ** self.beta, p, hi=1.0, what="probability")

    def log_eval(self, p):
        return _eval(lambda a: self.beta * np.log(a), p, hi=1.0, what="probability")

    def _raw(self, arr):
        return arr ** self.beta

    def _params(self):
        return f"beta={self.beta}"


class PrelecDistortion(DistortionFunction):
    """w(p) = exp(-beta * (-log p)^shape) on (0, 1], w(0) = 0."""

    kind = "prelec"

    def __init__(self, beta, shape):
        if beta <= 0:
            raise DomainError("Prelec distortion needs beta > 0")
        if not 0 < shape < 1:
            raise DomainError("Prelec distortion needs shape in (0, 1)")
        self.beta = float(beta)
        self.shape = float(shape)

    def __call__(self, p):
        return _eval(self._raw, p, hi=1.0, what="probability")

    def log_eval(self, p):
        def f(a):
            with np.errstate(divide="ignore"):
                return -self.beta * (-np.log(a)) ** self.shape
        return _eval(f, p, hi=1.0, what="probability")

    def _raw(self, arr):
        with np.errstate(divide="ignore"):
            return np.exp(-self.beta * (-np.log(arr)) ** self.shape)

    def _params(self):
        return f"beta={self.beta}, shape={self.shape}"


class AssociatedDistortion(DistortionFunction):
    """The distortion induced by a loss utility at a given strength.

    w(p) = u(1)^delta * u(1/p)^(-delta) on (0, 1], with w(0) = 0.  Only an
    unbounded utility yields a genuine distortion (otherwise w(0+) > 0).
    This family is the attainability threshold: loss distortions above it
    (pointwise) keep the portfolio problem solvable for delta < 1.
    """

    kind = "associated"

    def __init__(self, utility, delta):
        if delta <= 0:
            raise DomainError("association strength delta must be positive")
        if not math.isinf(utility.saturation):
            raise AssociationError(
                "associated distortion needs an unbounded utility "
                f"(saturation {utility.saturation})"
            )
        self.utility = utility
        self.delta = float(delta)
        self._log_u1 = utility.log_eval(1.0)

    def __call__(self, p):
        def f(a):
            out = np.exp(self._log_arr(a))
            return np.where(a == 0.0, 0.0, out)
        return _eval(f, p, hi=1.0, what="probability")

    def log_eval(self, p):
        return _eval(self._log_arr, p, hi=1.0, what="probability")

    def _log_arr(self, arr):
        with np.errstate(divide="ignore"):
            inv = np.where(arr > 0.0, 1.0 / arr, math.inf)
        lu = self.utility.log_eval(inv)
        return self.delta * (self._log_u1 - np.asarray(lu, dtype=float))

    def _raw(self, arr):
        return np.where(arr == 0.0, 0.0, np.exp(self._log_arr(arr)))

    def _params(self):
        return f"utility={self.utility!r}, delta={self.delta}"


class TableDistortion(DistortionFunction):
    """Monotone piecewise-linear distortion from a tabulated (x, value) grid."""

    kind = "custom"

    def __init__(self, xs, values):
        xs = np.asarray(xs, dtype=float)
        values = np.asarray(values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise DomainError("table needs two equal-length columns with >= 2 rows")
        if xs[0] != 0.0 or xs[-1] != 1.0:
            raise DomainError("distortion table must cover [0, 1]")
        if abs(values[0]) > 1e-12 or abs(values[-1] - 1.0) > 1e-12:
            raise DomainError("distortion table must map 0 -> 0 and 1 -> 1")
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(values) <= 0):
            raise DomainError("distortion table must be strictly increasing")
        self.xs = xs
        self.values = values

    @classmethod
    def from_csv(cls, path):
        xs, values, _ = _read_table_csv(path, "x")
        return cls(xs, values)

    def __call__(self, p):
        return _eval(self._raw, p, hi=1.0, what="probability")

    def _raw(self, arr):
        return np.interp(arr, self.xs, self.values)


# ---------------------------------------------------------------------------
# operations


class ZTransform:
    """The growth transform z(t) = log(u(e^t)) of a utility, for t >= 0.

    z diverges exactly when the utility is unbounded; its asymptotic
    elasticity governs the growth regularity checks on the loss side.
    """

    def __init__(self, base):
        self.base = base

    def __call__(self, t):
        return self.base.log_at_exp(t)

    def log_eval(self, t):
        """log(z(t)); domain error where z <= 0."""
        z = np.asarray(self(t), dtype=float)
        if np.any(z <= 0.0):
            raise DomainError("transform is non-positive on part of the grid")
        out = np.log(z)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"ZTransform({self.base!r})"


def z_transform(utility):
    """Growth transform of a utility; see ZTransform."""
    if utility(1.0) <= 0.0:
        raise DomainError("utility must be positive at 1")
    return ZTransform(utility)


def normalize_utility(utility):
    """Rescale the argument so the utility equals 1 at 1.

    Returns ``(scaled, scale)`` with ``scaled(x) = utility(x * scale)`` and
    ``scaled(1) = 1``.  The original object is returned unchanged when it is
    already normalized.
    """
    if utility.saturation <= 1.0:
        raise NormalizationError(
            "utility never reaches 1; upper limit is "
            f"{utility.saturation}"
        )
    scale = utility.inverse(1.0)
    if scale <= 0.0:
        raise NormalizationError("utility reaches 1 only at 0; table invalid")
    if scale == 1.0:
        return utility, 1.0
    return ScaledUtility(utility, scale), scale


def associated_distortion(utility, delta):
    """Distortion induced by a loss utility at strength ``delta``."""
    return AssociatedDistortion(utility, delta)


def bracketed_inverse(utility, y, rtol=1e-10):
    """Invert a utility by doubling bracket search plus bisection.

    Independent of the closed-form ``inverse`` methods; used to cross-check
    them.  The bracket grows from x = 1 by doubling (or shrinks by halving)
    until it straddles the target, then bisects to relative width ``rtol``.
    """
    if y < 0:
        raise DomainError("inversion target must be non-negative")
    if y >= utility.saturation:
        raise SaturationError(f"target {y} at or beyond the upper limit")
    if y == 0.0:
        return 0.0
    lo, hi = 1.0, 1.0
    while utility(hi) < y:
        hi *= 2.0
    while utility(lo) > y:
        lo /= 2.0
    while hi - lo > rtol * max(hi, 1.0):
        mid = 0.5 * (lo + hi)
        if utility(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _read_table_csv(path, first_column):
    """Read a two-column table CSV with an optional saturation comment."""
    saturation = math.inf
    xs, values = [], []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header_seen = False
    for row in rows:
        if not row:
            continue
        cell = row[0].strip()
        if cell.startswith("#"):
            text = ",".join(row).lstrip("#").strip()
            if text.startswith("saturation="):
                token = text.split("=", 1)[1].strip()
                saturation = math.inf if token == "inf" else float(token)
            continue
        if not header_seen:
            if cell != first_column:
                raise DomainError(
                    f"table header must be '{first_column},value', got {row!r}"
                )
            header_seen = True
            continue
        xs.append(float(row[0]))
        values.append(float(row[1]))
    if not header_seen or len(xs) < 2:
        raise DomainError("table CSV needs a header row and at least two rows")
    return np.asarray(xs), np.asarray(values), saturation


UTILITY_KINDS = {
    "power": PowerUtility,
    "exponential": ExponentialUtility,
    "logarithmic": LogUtility,
    "loglog": LogLogUtility,
    "log_power": LogPowerUtility,
}

DISTORTION_KINDS = {
    "identity": IdentityDistortion,
    "power": PowerDistortion,
    "prelec": PrelecDistortion,
}
