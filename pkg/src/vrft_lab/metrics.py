"""Closed-loop performance scoring and batch statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import welch

from .errors import EmptySeries, SeriesTooShort, TooFewRuns
from .lti import SignalSeries

ELLIPSE_PSD_SCALE = 15.0
WELCH_WINDOW = "hann"
WELCH_SEGMENT = 256
WELCH_OVERLAP_FRACTION = 0.5
MIN_WELCH_LEN = 16

# Sentinel RMSE for runs whose closed loop diverged.
RMSE_SENTINEL = 1e6


def rmse(t: SignalSeries, r: float) -> float:
    """Root-mean-square tracking error against a constant setpoint."""
    if len(t) == 0:
        raise EmptySeries("cannot score an empty series")
    d = t.samples - r
    return float(np.sqrt(np.mean(d * d)))


def _segment_length(n: int) -> int:
    if n < MIN_WELCH_LEN:
        raise SeriesTooShort(f"need at least {MIN_WELCH_LEN} samples, got {n}")
    if n >= 2 * WELCH_SEGMENT:
        return WELCH_SEGMENT
    return 2 ** int(math.floor(math.log2(n / 2)))


def welch_psd(t: SignalSeries) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Welch PSD estimate (Hann window, 50% overlap, demeaned).

    Density scaling: the trapezoid integral of the PSD over [0, Nyquist]
    approximates the signal variance.
    """
    nseg = _segment_length(len(t))
    f, p = welch(
        t.samples,
        fs=1.0 / t.ts,
        window=WELCH_WINDOW,
        nperseg=nseg,
        noverlap=int(nseg * WELCH_OVERLAP_FRACTION),
        detrend="constant",
        scaling="density",
    )
    return f, p


def avg_psd(t: SignalSeries) -> float:
    """Average PSD level over [0, Nyquist]."""
    f, p = welch_psd(t)
    return float(getattr(np, "trapezoid", np.trapz)(p, f) / f[-1])


def classify_good(e_rmse: float, e_psd: float) -> bool:
    """Inside-or-on the quality ellipse: rmse^2 + (psd/15)^2 <= 1."""
    return e_rmse ** 2 + (e_psd / ELLIPSE_PSD_SCALE) ** 2 <= 1.0


@dataclass(frozen=True)
class MetricsReport:
    e_rmse: float
    e_psd: float
    good: bool
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "e_rmse": self.e_rmse,
            "e_psd": self.e_psd,
            "good": self.good,
            "n_samples": self.n_samples,
        }


def score_series(t: SignalSeries, setpoint: float) -> MetricsReport:
    e_rmse = rmse(t, setpoint)
    e_psd = avg_psd(t)
    return MetricsReport(
        e_rmse=e_rmse,
        e_psd=e_psd,
        good=classify_good(e_rmse, e_psd),
        n_samples=len(t),
    )


def failed_report(n_samples: int) -> MetricsReport:
    """Score for a diverged run: sentinel RMSE, never classified good."""
    return MetricsReport(
        e_rmse=RMSE_SENTINEL, e_psd=RMSE_SENTINEL, good=False, n_samples=n_samples)


def ci_halfwidth(xs: np.ndarray) -> float:
    """Half-width of the 95% normal-approximation confidence interval."""
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2:
        raise TooFewRuns("need at least 2 runs for a confidence interval")
    return float(1.96 * np.std(xs, ddof=1) / math.sqrt(xs.size))


@dataclass(frozen=True)
class BatchSummary:
    n_runs: int
    rmse_mean: float
    rmse_ci: float
    psd_mean: float
    psd_ci: float
    loss_mean: float
    loss_ci: float
    percent_good: float

    def to_dict(self) -> dict:
        return {
            "n_runs": self.n_runs,
            "rmse_mean": self.rmse_mean,
            "rmse_ci": self.rmse_ci,
            "psd_mean": self.psd_mean,
            "psd_ci": self.psd_ci,
            "loss_mean": self.loss_mean,
            "loss_ci": self.loss_ci,
            "percent_good": self.percent_good,
        }


def summarize(reports: list[MetricsReport],
              losses: list[float] | None = None) -> BatchSummary:
    """Per-metric means and 95% confidence half-widths over a batch of runs."""
    if len(reports) < 2:
        raise TooFewRuns("need at least 2 runs to summarize")
    rm = np.array([r.e_rmse for r in reports])
    ps = np.array([r.e_psd for r in reports])
    if losses is None:
        lo = np.full(len(reports), math.nan)
        loss_mean, loss_ci = math.nan, math.nan
    else:
        lo = np.asarray(losses, dtype=float)
        if lo.size != len(reports):
            raise TooFewRuns("losses and reports must align")
        loss_mean, loss_ci = float(np.mean(lo)), ci_halfwidth(lo)
    return BatchSummary(
        n_runs=len(reports),
        rmse_mean=float(np.mean(rm)),
        rmse_ci=ci_halfwidth(rm),
        psd_mean=float(np.mean(ps)),
        psd_ci=ci_halfwidth(ps),
        loss_mean=loss_mean,
        loss_ci=loss_ci,
        percent_good=float(np.mean([r.good for r in reports])),
    )
