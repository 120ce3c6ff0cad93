"""Ensemble statistics and the two stabilization metrics.

Relative amplitude (RA) measures how flat an expected-response series is
over one arrival-rate period: half the peak-to-trough range divided by
the spatial (time) average, in percent.  Relative gap (RG) measures
accuracy against the target: (target - spatial average)/target in
percent, negative when the series sits above the target.  A cell is
classified good when RA <= 10% and |RG| <= 0.1%.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GOOD_RA_PERCENT = 10.0
GOOD_RG_PERCENT = 0.1


class AlignmentError(ValueError):
    """Per-replication series do not share one epoch grid."""


@dataclass(frozen=True)
class EnsembleSeries:
    """Pointwise mean over replications with 95% confidence half-widths."""

    epochs: np.ndarray
    mean: np.ndarray
    ci_half: np.ndarray
    n_reps: int

    def __post_init__(self) -> None:
        if not (len(self.epochs) == len(self.mean) == len(self.ci_half)):
            raise AlignmentError("epochs, mean and ci_half must have equal length")
        if len(self.ci_half) and not np.all(self.ci_half >= 0.0):
            raise ValueError("confidence half-widths must be nonnegative")


@dataclass(frozen=True)
class StabilizationReport:
    """RA/RG evaluation of one expected-response series over one window."""

    amplitude: float
    spatial_average: float
    ra_percent: float
    rg_percent: float  # NaN when no target applies
    window: tuple[float, float]
    period_used: float
    grid_error: float  # worst-case amplitude underestimate from grid sampling


def ensemble_mean(per_rep_series) -> EnsembleSeries:
    """Pointwise mean and normal-approximation 95% CI across replications.

    Accepts (epochs, values) pairs; every replication must be on the same
    epoch grid.
    """
    series = list(per_rep_series)
    if len(series) < 2:
        raise ValueError("need at least 2 replications to form confidence intervals")
    epochs0 = np.asarray(series[0][0], dtype=float)
    rows = []
    for epochs, values in series:
        epochs = np.asarray(epochs, dtype=float)
        values = np.asarray(values, dtype=float)
        if epochs.shape != epochs0.shape or not np.array_equal(epochs, epochs0):
            raise AlignmentError("replication epoch grids differ")
        if values.shape != epochs0.shape:
            raise AlignmentError("values do not align with the epoch grid")
        rows.append(values)
    mat = np.vstack(rows)
    n = len(rows)
    mean = mat.mean(axis=0)
    stderr = mat.std(axis=0, ddof=1) / math.sqrt(n)
    return EnsembleSeries(epochs0, mean, 1.96 * stderr, n)


def _window_slice(epochs: np.ndarray, period: float, window_start: float):
    if not period > 0.0:
        raise ValueError("period must be positive")
    tol = 1e-6 * period
    lo = window_start - tol
    hi = window_start + period + tol
    if window_start < epochs[0] - tol or window_start + period > epochs[-1] + tol:
        raise ValueError(
            f"window [{window_start}, {window_start + period}] outside the epoch grid"
        )
    mask = (epochs >= lo) & (epochs <= hi)
    idx = np.nonzero(mask)[0]
    if len(idx) < 3:
        raise ValueError("window covers fewer than 3 epochs")
    return idx


def relative_amplitude(
    series: EnsembleSeries, period: float, window_start: float
) -> tuple[float, float, float, tuple[float, float]]:
    """(amplitude, spatial average, RA percent, window) over one period.

    RA = (max - min) / (2 * spatial average) * 100%, where the spatial
    average is the trapezoid integral over the window divided by the
    window length (the period factor cancels).
    """
    idx = _window_slice(series.epochs, period, window_start)
    t = series.epochs[idx]
    y = series.mean[idx]
    amplitude = float(np.max(y) - np.min(y))
    spatial = float(np.trapezoid(y, t) / (t[-1] - t[0]))
    ra = amplitude / (2.0 * spatial) * 100.0
    return amplitude, spatial, ra, (float(t[0]), float(t[-1]))


def relative_gap(
    series: EnsembleSeries, target_s: float, period: float, window_start: float
) -> float:
    """RG = (target - spatial average) / target * 100%; may be negative."""
    if not target_s > 0.0:
        raise ValueError("target_s must be positive")
    idx = _window_slice(series.epochs, period, window_start)
    t = series.epochs[idx]
    y = series.mean[idx]
    spatial = float(np.trapezoid(y, t) / (t[-1] - t[0]))
    return (target_s - spatial) / target_s * 100.0


def stabilization_report(
    series: EnsembleSeries,
    period: float,
    window_start: float | None = None,
    target_s: float | None = None,
) -> StabilizationReport:
    """Evaluate RA (and RG when a target applies) over one period window.

    The window defaults to the last full period of the grid, leaving the
    longest possible warm-up before measurement.
    """
    if window_start is None:
        window_start = float(series.epochs[-1]) - period
    amplitude, spatial, ra, window = relative_amplitude(series, period, window_start)
    rg = (
        relative_gap(series, target_s, period, window_start)
        if target_s is not None
        else math.nan
    )
    idx = _window_slice(series.epochs, period, window_start)
    spacing = float(np.median(np.diff(series.epochs[idx])))
    # A sinusoid sampled every `spacing` can hide at most this much of its
    # peak-to-trough range from the max/min scan.
    grid_error = amplitude * (1.0 - math.cos(math.pi * spacing / period))
    return StabilizationReport(
        amplitude=amplitude,
        spatial_average=spatial,
        ra_percent=ra,
        rg_percent=rg,
        window=window,
        period_used=period,
        grid_error=grid_error,
    )


def is_good(report: StabilizationReport) -> bool:
    """Good iff RA <= 10% and |RG| <= 0.1%."""
    return (
        report.ra_percent <= GOOD_RA_PERCENT
        and not math.isnan(report.rg_percent)
        and abs(report.rg_percent) <= GOOD_RG_PERCENT
    )
