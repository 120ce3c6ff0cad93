"""Time-varying rate functions and their cumulative integrals.

A RateFunction gives an instantaneous nonnegative rate r(t).  A
CumulativeRate wraps one rate function and supports evaluating
R(t) = integral_0^t r(s) ds and inverting it, which is what both arrival
generation and the event loop need.  Sinusoidal and constant rates get
closed-form cumulatives; anything else goes through a cached grid built
once with an adaptive Gauss-Legendre rule and evaluated with cubic
Hermite interpolation, so per-call cost stays flat inside event loops.
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

_TWO_PI = 2.0 * math.pi
# Target accuracy, in time units, for numeric inversion of cumulatives.
_INVERT_TOL = 1e-10


class RateFunction:
    """Base class: a nonnegative instantaneous rate of events per time unit."""

    period: float | None = None

    def rate(self, t: float) -> float:
        raise NotImplementedError

    def rate_array(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bounds(self) -> tuple[float, float]:
        """(lower, upper) bounds on the rate over all t >= 0."""
        raise NotImplementedError


class ConstantRate(RateFunction):
    def __init__(self, value: float):
        if not (value > 0.0 and math.isfinite(value)):
            raise ValueError(f"constant rate must be positive and finite, got {value}")
        self.value = value

    def rate(self, t: float) -> float:
        return self.value

    def rate_array(self, t: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(t, dtype=float), self.value)

    def bounds(self) -> tuple[float, float]:
        return self.value, self.value

    def __repr__(self) -> str:
        return f"ConstantRate({self.value!r})"


class SinusoidalRate(RateFunction):
    """r(t) = base + amplitude * sin(frequency * t), with base > |amplitude|."""

    def __init__(self, base: float, amplitude: float, frequency: float):
        if not frequency > 0.0:
            raise ValueError("frequency must be positive")
        if not base > abs(amplitude):
            raise ValueError("base must exceed |amplitude| so the rate stays positive")
        self.base = base
        self.amplitude = amplitude
        self.frequency = frequency
        self.period = _TWO_PI / frequency

    def rate(self, t: float) -> float:
        return self.base + self.amplitude * math.sin(self.frequency * t)

    def rate_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.base + self.amplitude * np.sin(self.frequency * t)

    def bounds(self) -> tuple[float, float]:
        return self.base - abs(self.amplitude), self.base + abs(self.amplitude)

    def __repr__(self) -> str:
        return f"SinusoidalRate({self.base!r}, {self.amplitude!r}, {self.frequency!r})"


class CallableRate(RateFunction):
    """Adapter for ad-hoc rate functions (not picklable; mainly for tests)."""

    def __init__(self, fn, lower: float, upper: float, period: float | None = None, fn_array=None):
        if not 0.0 < lower <= upper:
            raise ValueError("need 0 < lower <= upper rate bounds")
        self._fn = fn
        self._fn_array = fn_array
        self._bounds = (lower, upper)
        self.period = period

    def rate(self, t: float) -> float:
        return self._fn(t)

    def rate_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self._fn_array is not None:
            return self._fn_array(t)
        return np.array([self._fn(float(x)) for x in np.ravel(t)]).reshape(t.shape)

    def bounds(self) -> tuple[float, float]:
        return self._bounds


class CumulativeRate:
    """Cumulative integral R(t) of a rate function, with inversion."""

    def __init__(self, rate: RateFunction):
        self.rate_fn = rate
        self.period = rate.period

    # --- primitive operations -------------------------------------------

    def value(self, t: float) -> float:
        """R(t) = integral_0^t of the rate."""
        raise NotImplementedError

    def value_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.array([self.value(float(x)) for x in np.ravel(t)]).reshape(t.shape)

    def inverse_value(self, target: float) -> float:
        """Smallest t >= 0 with R(t) >= target (R is strictly increasing)."""
        raise NotImplementedError

    def inverse_value_array(self, targets: np.ndarray) -> np.ndarray:
        targets = np.asarray(targets, dtype=float)
        return np.array([self.inverse_value(float(x)) for x in np.ravel(targets)]).reshape(
            targets.shape
        )

    # --- derived operations ---------------------------------------------

    def integrate(self, t0: float, t1: float) -> float:
        if not 0.0 <= t0 <= t1:
            raise ValueError(f"need 0 <= t0 <= t1, got ({t0}, {t1})")
        return self.value(t1) - self.value(t0)

    def inverse(self, x: float, origin: float = 0.0) -> float:
        """Smallest y >= origin with integral_origin^y of the rate >= x."""
        if x < 0.0 or origin < 0.0:
            raise ValueError("inverse needs x >= 0 and origin >= 0")
        if x == 0.0:
            return origin
        return self.inverse_value(self.value(origin) + x)


class _ConstantCumulative(CumulativeRate):
    def __init__(self, rate: ConstantRate):
        super().__init__(rate)
        self._c = rate.value

    def value(self, t: float) -> float:
        return self._c * t

    def value_array(self, t: np.ndarray) -> np.ndarray:
        return self._c * np.asarray(t, dtype=float)

    def inverse_value(self, target: float) -> float:
        return max(target, 0.0) / self._c

    def inverse_value_array(self, targets: np.ndarray) -> np.ndarray:
        return np.maximum(np.asarray(targets, dtype=float), 0.0) / self._c


class _SinusoidalCumulative(CumulativeRate):
    """R(t) = base*t + (amplitude/frequency) * (1 - cos(frequency*t))."""

    def __init__(self, rate: SinusoidalRate):
        super().__init__(rate)
        self._a = rate.base
        self._b = rate.amplitude
        self._g = rate.frequency
        self._k = rate.amplitude / rate.frequency

    def value(self, t: float) -> float:
        return self._a * t + self._k * (1.0 - math.cos(self._g * t))

    def value_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self._a * t + self._k * (1.0 - np.cos(self._g * t))

    def inverse_value(self, target: float) -> float:
        if target <= 0.0:
            return 0.0
        a = self._a
        b = self._b
        g = self._g
        k = self._k
        # The oscillating part of R is confined to [0, 2k] (or [2k, 0]),
        # which gives an immediate bracket around the root.
        w = 2.0 * abs(k)
        lo = max(0.0, (target - w) / a)
        hi = (target + w) / a
        t = target / a
        if t < lo or t > hi:
            t = 0.5 * (lo + hi)
        cos = math.cos
        sin = math.sin
        for _ in range(200):
            f = a * t + k * (1.0 - cos(g * t)) - target
            if f < 0.0:
                lo = t
            else:
                hi = t
            step = f / (a + b * sin(g * t))
            t_new = t - step
            if t_new <= lo or t_new >= hi:
                t_new = 0.5 * (lo + hi)
            if abs(t_new - t) < _INVERT_TOL:
                return t_new
            t = t_new
        return t

    def inverse_value_array(self, targets: np.ndarray) -> np.ndarray:
        c = np.maximum(np.asarray(targets, dtype=float), 0.0)
        a, b, g, k = self._a, self._b, self._g, self._k
        w = 2.0 * abs(k)
        lo = np.maximum(0.0, (c - w) / a)
        hi = (c + w) / a
        t = np.clip(c / a, lo, hi)
        for _ in range(200):
            f = a * t + k * (1.0 - np.cos(g * t)) - c
            lo = np.where(f < 0.0, t, lo)
            hi = np.where(f >= 0.0, t, hi)
            t_new = t - f / (a + b * np.sin(g * t))
            bad = (t_new <= lo) | (t_new >= hi)
            t_new = np.where(bad, 0.5 * (lo + hi), t_new)
            if np.max(np.abs(t_new - t)) < _INVERT_TOL:
                return t_new
            t = t_new
        return t


# 7- and 15-point Gauss-Legendre nodes/weights on [-1, 1].
_GL7 = np.polynomial.legendre.leggauss(7)
_GL15 = np.polynomial.legendre.leggauss(15)


def _segment_integrals(rate: RateFunction, edges: np.ndarray, tol: float) -> np.ndarray:
    """Integral of the rate over each [edges[i], edges[i+1]], error-checked.

    All segments are evaluated in one vectorized 15-point Gauss-Legendre
    pass; a 7-point pass supplies the error estimate and any segment over
    budget is refined by recursive bisection.
    """
    lo = edges[:-1]
    half = 0.5 * np.diff(edges)
    mid = lo + half

    def panel(nodes_weights):
        nodes, weights = nodes_weights
        ts = mid[None, :] + half[None, :] * nodes[:, None]
        return half * (weights @ rate.rate_array(ts))

    coarse = panel(_GL7)
    fine = panel(_GL15)
    err = np.abs(fine - coarse)
    budget = tol / max(len(lo), 1)
    for i in np.nonzero(err > budget)[0]:
        fine[i] = _adaptive_segment(rate, float(edges[i]), float(edges[i + 1]), budget)
    return fine


def _adaptive_segment(rate: RateFunction, a: float, b: float, tol: float, depth: int = 0) -> float:
    half = 0.5 * (b - a)
    mid = a + half
    ts = mid + half * _GL15[0]
    fine = half * float(_GL15[1] @ rate.rate_array(ts))
    ts7 = mid + half * _GL7[0]
    coarse = half * float(_GL7[1] @ rate.rate_array(ts7))
    if abs(fine - coarse) <= tol or depth >= 30:
        return fine
    return _adaptive_segment(rate, a, mid, tol / 2, depth + 1) + _adaptive_segment(
        rate, mid, b, tol / 2, depth + 1
    )


def _hermite(c0: float, c1: float, r0: float, r1: float, h: float, theta: float) -> float:
    """Cubic Hermite value on one segment given endpoint values and slopes."""
    t2 = theta * theta
    t3 = t2 * theta
    return (
        c0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + r0 * h * (t3 - 2.0 * t2 + theta)
        + c1 * (3.0 * t2 - 2.0 * t3)
        + r1 * h * (t3 - t2)
    )


class _CachedGridCumulative(CumulativeRate):
    """Cumulative rate on a uniform cached grid with cubic Hermite lookup.

    For periodic rates the cache covers one period and repeats; otherwise
    it covers [0, coverage] and grows on demand.  Construction verifies the
    interpolant against direct quadrature at random points.
    """

    def __init__(self, rate: RateFunction, tol: float = 1e-9, grid_points: int = 10_000):
        super().__init__(rate)
        self._tol = tol
        if rate.period is not None:
            self._h = rate.period / grid_points
            self._build(np.linspace(0.0, rate.period, grid_points + 1))
            self._periodic = True
            self._period_total = self._cum[-1]
        else:
            self._h = 1.0
            self._build(np.arange(grid_points + 1, dtype=float))
            self._periodic = False
        self._validate()

    def _build(self, edges: np.ndarray) -> None:
        seg = _segment_integrals(self.rate_fn, edges, self._tol)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._edges = edges
        self._cum = cum
        self._slope = self.rate_fn.rate_array(edges)
        # Plain lists index faster than numpy scalars in the event loop.
        self._cum_list = cum.tolist()
        self._slope_list = self._slope.tolist()

    def _extend(self, t_needed: float) -> None:
        grow = max(len(self._edges), int((t_needed - self._edges[-1]) / self._h) + 1024)
        new_edges = self._edges[-1] + self._h * np.arange(1, grow + 1)
        seg = _segment_integrals(self.rate_fn, np.concatenate([self._edges[-1:], new_edges]), self._tol)
        self._cum = np.concatenate([self._cum, self._cum[-1] + np.cumsum(seg)])
        self._edges = np.concatenate([self._edges, new_edges])
        self._slope = np.concatenate([self._slope, self.rate_fn.rate_array(new_edges)])
        self._cum_list = self._cum.tolist()
        self._slope_list = self._slope.tolist()

    def _validate(self) -> None:
        rng = np.random.default_rng(0)
        span = self._edges[-1]
        for t in rng.uniform(0.0, span, 64):
            j = min(int(t / self._h), len(self._edges) - 2)
            direct = self._cum[j] + _adaptive_segment(
                self.rate_fn, float(self._edges[j]), float(t), self._tol
            )
            got = self._value_in_cache(float(t))
            if abs(got - direct) > 100.0 * self._tol * max(1.0, abs(direct)):
                raise RuntimeError(
                    "cached cumulative failed verification; the rate may be too "
                    "rough for the grid, try more grid_points"
                )

    def _value_in_cache(self, t: float) -> float:
        h = self._h
        j = int(t / h)
        last = len(self._cum_list) - 1
        if j >= last:
            j = last - 1
        theta = t / h - j
        return _hermite(
            self._cum_list[j],
            self._cum_list[j + 1],
            self._slope_list[j],
            self._slope_list[j + 1],
            h,
            theta,
        )

    def value(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        if self._periodic:
            period = self.period
            k = int(t / period)
            r = t - k * period
            if r < 0.0:
                r = 0.0
            elif r >= period:
                k += 1
                r -= period
                if r < 0.0:
                    r = 0.0
            return k * self._period_total + self._value_in_cache(r)
        if t > self._edges[-1]:
            self._extend(t)
        return self._value_in_cache(t)

    def value_array(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = np.ravel(t)
        out = np.array([self.value(float(x)) for x in flat])
        return out.reshape(t.shape)

    def _invert_in_cache(self, r_target: float) -> float:
        cum = self._cum_list
        slope = self._slope_list
        h = self._h
        j = bisect_right(cum, r_target) - 1
        last = len(cum) - 1
        if j >= last:
            j = last - 1
        if j < 0:
            j = 0
        c0 = cum[j]
        c1 = cum[j + 1]
        r0 = slope[j] * h
        r1 = slope[j + 1] * h
        lo = 0.0
        hi = 1.0
        theta = (r_target - c0) / (c1 - c0) if c1 > c0 else 0.5
        for _ in range(200):
            t2 = theta * theta
            t3 = t2 * theta
            f = (
                c0 * (2.0 * t3 - 3.0 * t2 + 1.0)
                + r0 * (t3 - 2.0 * t2 + theta)
                + c1 * (3.0 * t2 - 2.0 * t3)
                + r1 * (t3 - t2)
                - r_target
            )
            if f < 0.0:
                lo = theta
            else:
                hi = theta
            deriv = (
                c0 * (6.0 * t2 - 6.0 * theta)
                + r0 * (3.0 * t2 - 4.0 * theta + 1.0)
                + c1 * (6.0 * theta - 6.0 * t2)
                + r1 * (3.0 * t2 - 2.0 * theta)
            )
            theta_new = theta - f / deriv if deriv > 0.0 else 0.5 * (lo + hi)
            if theta_new <= lo or theta_new >= hi:
                theta_new = 0.5 * (lo + hi)
            if abs(theta_new - theta) * h < _INVERT_TOL:
                theta = theta_new
                break
            theta = theta_new
        return (j + theta) * h

    def inverse_value(self, target: float) -> float:
        if target <= 0.0:
            return 0.0
        if self._periodic:
            total = self._period_total
            k = int(target / total)
            r = target - k * total
            if r >= total:
                k += 1
                r -= total
            if r < 0.0:
                r = 0.0
            return k * self.period + self._invert_in_cache(r)
        while target > self._cum[-1]:
            self._extend(self._edges[-1] * 2.0)
        return self._invert_in_cache(target)


def cumulative(rate: RateFunction, tol: float = 1e-9, grid_points: int = 10_000) -> CumulativeRate:
    """Build the cumulative integral of a rate, closed-form when possible."""
    if isinstance(rate, ConstantRate):
        return _ConstantCumulative(rate)
    if isinstance(rate, SinusoidalRate):
        return _SinusoidalCumulative(rate)
    return _CachedGridCumulative(rate, tol=tol, grid_points=grid_points)
