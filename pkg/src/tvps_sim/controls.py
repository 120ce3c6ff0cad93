"""Service-rate controls that aim to hold the virtual response time at a target.

Both controls map the instantaneous arrival rate lambda(t) to a service
rate mu(t), given the mean job size beta, the variability of interarrival
times and job sizes (as squared coefficients of variation), and a target
response time.  The square-root control inverts a heavy-traffic
approximation of the first-come-first-served response time; the
difference-matching control keeps mu(t) - beta*lambda(t) constant at the
value that the processor-sharing heavy-traffic approximation asks for.
A constant kind is included so the engine can be driven by a fixed rate
through the same interface.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .rates import ConstantRate, RateFunction, SinusoidalRate


class ControlKind(str, enum.Enum):
    SQUARE_ROOT = "sr"
    DIFFERENCE_MATCHING = "dm"
    CONSTANT = "const"


class UnstableParametersError(ValueError):
    """Raised when a control or predictor would need utilization >= 1."""


@dataclass(frozen=True)
class ControlSpec:
    kind: ControlKind
    beta: float  # mean job size
    arrival_scv: float  # squared coefficient of variation of interarrival times
    service_scv: float  # squared coefficient of variation of job sizes
    target: float | None = None  # desired virtual response time
    constant_mu: float | None = None  # fixed service rate, CONSTANT kind only

    def __post_init__(self) -> None:
        for name in ("beta", "arrival_scv", "service_scv"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.kind is ControlKind.CONSTANT:
            if self.constant_mu is None or not self.constant_mu > 0.0:
                raise ValueError("constant control needs a positive constant_mu")
        else:
            if self.target is None or not (self.target > 0.0 and math.isfinite(self.target)):
                raise ValueError(f"{self.kind.value} control needs a positive target")

    @property
    def v_fcfs(self) -> float:
        return variability_factors(self.arrival_scv, self.service_scv)[0]

    @property
    def v_ps(self) -> float:
        return variability_factors(self.arrival_scv, self.service_scv)[1]


def variability_factors(arrival_scv: float, service_scv: float) -> tuple[float, float]:
    """Variability factors of the two heavy-traffic approximations.

    Returns (first-come-first-served factor, processor-sharing factor):
    ((ca2 + cs2)/2, (ca2 + cs2)/(1 + cs2)).
    """
    total = arrival_scv + service_scv
    return total / 2.0, total / (1.0 + service_scv)


def square_root_rate(lam: float, spec: ControlSpec):
    """Service rate of the square-root control at arrival rate lam.

    Positive root of the quadratic obtained by equating the heavy-traffic
    first-come-first-served response-time approximation to the target.
    Works elementwise on arrays.
    """
    s = spec.target
    beta = spec.beta
    lin = (s * lam + 1.0) * beta
    disc = lin * lin + 4.0 * s * lam * beta * beta * (spec.v_fcfs - 1.0)
    if np.any(np.asarray(disc) < 0.0):
        raise UnstableParametersError(
            "square-root control has no real rate at this arrival rate and target"
        )
    return (lin + np.sqrt(disc)) / (2.0 * s)


def difference_matching_rate(lam: float, spec: ControlSpec):
    """Service rate of the difference-matching control at arrival rate lam.

    beta * (lam + v_ps/target), so mu - beta*lam stays constant at
    beta*v_ps/target.
    """
    return spec.beta * (lam + spec.v_ps / spec.target)


def light_traffic_constants(spec: ControlSpec) -> tuple[float, float]:
    """(square-root, difference-matching) service rates as the arrival rate -> 0."""
    return spec.beta / spec.target, spec.beta * spec.v_ps / spec.target


def predict_response_fcfs(mu: float, lam: float, spec: ControlSpec) -> float:
    """Heavy-traffic response-time approximation for a first-come-first-served queue."""
    rho = lam * spec.beta / mu
    if rho >= 1.0:
        raise UnstableParametersError(f"utilization {rho} >= 1")
    per_job = spec.beta / mu
    return per_job + per_job * (rho / (1.0 - rho)) * spec.v_fcfs


def predict_response_ps(mu: float, lam: float, spec: ControlSpec) -> float:
    """Heavy-traffic response-time approximation for a processor-sharing queue."""
    rho = lam * spec.beta / mu
    if rho >= 1.0:
        raise UnstableParametersError(f"utilization {rho} >= 1")
    return (spec.beta / mu) / (1.0 - rho) * spec.v_ps


class _ControlRate(RateFunction):
    """Service rate obtained by composing a control law with an arrival rate."""

    def __init__(self, spec: ControlSpec, lam: RateFunction):
        self.spec = spec
        self.lam = lam
        self.period = lam.period
        lam_lo, lam_hi = lam.bounds()
        probe = np.linspace(lam_lo, lam_hi, 2049)
        vals = self._law(probe)
        self._lo = float(np.min(vals))
        self._hi = float(np.max(vals))
        if not self._lo > 0.0:
            raise UnstableParametersError("control produced a nonpositive service rate")
        if np.any(vals <= probe * spec.beta):
            raise UnstableParametersError(
                "control does not keep utilization below 1 over the arrival-rate range"
            )

    def _law(self, lam_values):
        raise NotImplementedError

    def rate(self, t: float) -> float:
        return float(self._law(self.lam.rate(t)))

    def rate_array(self, t: np.ndarray) -> np.ndarray:
        return self._law(self.lam.rate_array(t))

    def bounds(self) -> tuple[float, float]:
        return self._lo, self._hi


class SquareRootControlRate(_ControlRate):
    def _law(self, lam_values):
        return square_root_rate(lam_values, self.spec)

    def rate(self, t: float) -> float:
        # Scalar fast path: this sits inside Newton iterations of the
        # cumulative-rate inversion.
        spec = self.spec
        s = spec.target
        beta = spec.beta
        lam = self.lam.rate(t)
        lin = (s * lam + 1.0) * beta
        disc = lin * lin + 4.0 * s * lam * beta * beta * (spec.v_fcfs - 1.0)
        return (lin + math.sqrt(disc)) / (2.0 * s)


class DifferenceMatchingControlRate(_ControlRate):
    def _law(self, lam_values):
        return difference_matching_rate(lam_values, self.spec)


def control_rate(spec: ControlSpec, lam: RateFunction) -> RateFunction:
    """Compose a control with an arrival-rate function, exactly when possible.

    The difference-matching control is affine in lambda, and the
    square-root control becomes affine when its variability factor is 1,
    so in those cases the result is again a constant or sinusoidal rate
    with a closed-form cumulative; otherwise a numeric composition is
    returned.  The square-root discriminant is validated against the
    arrival-rate bounds up front so infeasible configurations fail fast.
    """
    if spec.kind is ControlKind.CONSTANT:
        return ConstantRate(spec.constant_mu)
    if spec.kind is ControlKind.DIFFERENCE_MATCHING:
        offset = spec.beta * spec.v_ps / spec.target
        if isinstance(lam, ConstantRate):
            return ConstantRate(spec.beta * lam.value + offset)
        if isinstance(lam, SinusoidalRate):
            return SinusoidalRate(
                spec.beta * lam.base + offset, spec.beta * lam.amplitude, lam.frequency
            )
        return DifferenceMatchingControlRate(spec, lam)
    if isinstance(lam, ConstantRate):
        return ConstantRate(float(square_root_rate(lam.value, spec)))
    if spec.v_fcfs == 1.0 and isinstance(lam, SinusoidalRate):
        # With unit variability the square root collapses and the control
        # reduces to beta * (lambda + 1/target).
        return SinusoidalRate(
            spec.beta * (lam.base + 1.0 / spec.target),
            spec.beta * lam.amplitude,
            lam.frequency,
        )
    return SquareRootControlRate(spec, lam)
