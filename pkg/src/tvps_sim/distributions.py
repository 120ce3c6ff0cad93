"""Job-size and interarrival distributions parameterized by mean and SCV.

Each distribution family is described by a (mean, scv) pair, where scv is
the squared coefficient of variation Var/mean^2.  Besides ordinary sampling,
every family supports sampling from its stationary-excess (equilibrium)
distribution, whose density is (1 - F(t)) / mean.  The equilibrium draw is
what makes a renewal-based arrival process start in steady state rather
than with a fresh renewal at time zero.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special


class Family(str, enum.Enum):
    EXPONENTIAL = "exponential"
    ERLANG = "erlang"
    LOGNORMAL = "lognormal"


_SCV_INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class DistributionSpec:
    """A distribution family pinned to a target mean and SCV."""

    family: Family
    mean: float
    scv: float

    def __post_init__(self) -> None:
        if not (self.mean > 0.0 and math.isfinite(self.mean)):
            raise ValueError(f"mean must be positive and finite, got {self.mean}")
        if not (self.scv > 0.0 and math.isfinite(self.scv)):
            raise ValueError(f"scv must be positive and finite, got {self.scv}")
        if self.family is Family.EXPONENTIAL and self.scv != 1.0:
            raise ValueError("exponential distribution has scv exactly 1")
        if self.family is Family.ERLANG:
            # Erlang-k has scv = 1/k, so 1/scv must land on a positive integer.
            shape = 1.0 / self.scv
            if abs(shape - round(shape)) > _SCV_INTEGER_TOL or round(shape) < 1:
                raise ValueError(
                    f"erlang requires 1/scv to be a positive integer, got scv={self.scv}"
                )

    @property
    def erlang_shape(self) -> int:
        if self.family is not Family.ERLANG:
            raise ValueError("erlang_shape is only defined for the erlang family")
        return round(1.0 / self.scv)

    @property
    def lognormal_params(self) -> tuple[float, float]:
        """(mu, sigma) of the underlying normal, matching mean and scv."""
        if self.family is not Family.LOGNORMAL:
            raise ValueError("lognormal_params is only defined for the lognormal family")
        sigma_sq = math.log1p(self.scv)
        mu = math.log(self.mean) - 0.5 * sigma_sq
        return mu, math.sqrt(sigma_sq)


def exponential(mean: float) -> DistributionSpec:
    return DistributionSpec(Family.EXPONENTIAL, mean, 1.0)


def erlang(mean: float, scv: float) -> DistributionSpec:
    return DistributionSpec(Family.ERLANG, mean, scv)


def lognormal(mean: float, scv: float) -> DistributionSpec:
    return DistributionSpec(Family.LOGNORMAL, mean, scv)


def sample(spec: DistributionSpec, rng: np.random.Generator, size: int | None = None):
    """Draw from the base distribution; scalar when size is None."""
    if spec.family is Family.EXPONENTIAL:
        return rng.exponential(spec.mean, size)
    if spec.family is Family.ERLANG:
        k = spec.erlang_shape
        return rng.gamma(k, spec.mean / k, size)
    mu, sigma = spec.lognormal_params
    return rng.lognormal(mu, sigma, size)


def cdf(spec: DistributionSpec, t):
    """Cumulative distribution function, vectorized over t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError("cdf is only defined for t >= 0")
    if spec.family is Family.EXPONENTIAL:
        out = -np.expm1(-t / spec.mean)
    elif spec.family is Family.ERLANG:
        k = spec.erlang_shape
        out = special.gammainc(k, t * (k / spec.mean))
    else:
        mu, sigma = spec.lognormal_params
        with np.errstate(divide="ignore"):
            z = (np.log(t) - mu) / sigma
        out = special.ndtr(z)
    return out if out.ndim else float(out)


def survival(spec: DistributionSpec, t):
    return 1.0 - cdf(spec, t)


def equilibrium_mean(spec: DistributionSpec) -> float:
    """Mean of the stationary-excess distribution: mean * (scv + 1) / 2."""
    return spec.mean * (spec.scv + 1.0) / 2.0


def sample_equilibrium(
    spec: DistributionSpec, rng: np.random.Generator, size: int | None = None
):
    """Draw from the stationary-excess distribution of spec.

    Exponential is its own equilibrium.  The Erlang-k equilibrium is an
    equal-weight mixture of Erlang-1..k with the same stage rate.  Other
    families fall back to numeric inversion of the equilibrium cdf.
    """
    if spec.family is Family.EXPONENTIAL:
        return rng.exponential(spec.mean, size)
    if spec.family is Family.ERLANG:
        k = spec.erlang_shape
        stages = rng.integers(1, k + 1, size=size)
        return rng.gamma(stages, spec.mean / k)
    inverter = _equilibrium_inverter(spec)
    u = rng.random(size)
    out = inverter(np.atleast_1d(np.asarray(u, dtype=float)))
    return float(out[0]) if size is None else out


_GL5_NODES = np.array(
    [0.046910077030668, 0.230765344947158, 0.5, 0.769234655052841, 0.953089922969332]
)
_GL5_WEIGHTS = np.array(
    [0.118463442528095, 0.239314335249683, 0.284444444444444, 0.239314335249683, 0.118463442528095]
)


class _EquilibriumInverter:
    """Inverts F_e(t) = (1/mean) * integral_0^t (1 - F(s)) ds on a cached grid.

    The grid stores the cumulative integral of the survival function at
    fixed knots; a draw locates its segment by binary search on the
    cumulative values and then bisects inside the segment, evaluating the
    local integral with a 5-point Gauss-Legendre rule.
    """

    def __init__(self, spec: DistributionSpec):
        self.spec = spec
        knee = 12.0 * equilibrium_mean(spec)
        t_max = knee
        # Extend until the neglected tail mass of the equilibrium cdf is
        # below 1e-12 of the total.
        while _survival_tail(spec, t_max) > 1e-12 * spec.mean:
            t_max *= 1.5
        bulk = np.linspace(0.0, knee, 3073)
        tail = np.geomspace(knee, t_max, 513)[1:]
        self.ts = np.concatenate([bulk, tail])
        widths = np.diff(self.ts)
        lo = self.ts[:-1]
        nodes = lo[None, :] + widths[None, :] * _GL5_NODES[:, None]
        seg = widths * (_GL5_WEIGHTS @ survival(spec, nodes))
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])

    def __call__(self, u: np.ndarray) -> np.ndarray:
        target = np.minimum(u * self.spec.mean, self.cum[-1] * (1.0 - 1e-12))
        idx = np.clip(np.searchsorted(self.cum, target, side="right") - 1, 0, len(self.ts) - 2)
        lo = self.ts[idx]
        hi = self.ts[idx + 1]
        seg_lo = lo.copy()
        base = self.cum[idx]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            width = mid - seg_lo
            nodes = seg_lo[None, :] + width[None, :] * _GL5_NODES[:, None]
            val = base + width * (_GL5_WEIGHTS @ survival(self.spec, nodes))
            below = val < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _survival_tail(spec: DistributionSpec, t: float) -> float:
    """integral_t^inf (1 - F(s)) ds, i.e. equilibrium mass beyond t times mean."""
    if spec.family is Family.LOGNORMAL:
        mu, sigma = spec.lognormal_params
        # Partial expectation of a lognormal minus the survival rectangle.
        z = (math.log(t) - mu) / sigma
        return spec.mean * special.ndtr(sigma - z) - t * special.ndtr(-z)
    from scipy.integrate import quad

    return quad(lambda s: float(survival(spec, s)), t, np.inf, limit=200)[0]


@lru_cache(maxsize=None)
def _equilibrium_inverter(spec: DistributionSpec) -> _EquilibriumInverter:
    return _EquilibriumInverter(spec)
