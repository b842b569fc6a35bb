"""Decay-rate fitting and aggregation of repeated measurements into spectrum points."""
from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "DegenerateFitError",
    "FitResult",
    "SpectrumPoint",
    "fit_exponential",
    "fit_exponential_arrays",
    "local_decay_rate",
    "aggregate",
    "average_traces",
    "write_spectrum_csv",
    "write_plot_data",
]

MAX_ITER = 100
REL_TOL = 1e-8


class DegenerateFitError(ValueError):
    """The data carry no information about a decay rate."""


@dataclass(frozen=True)
class FitResult:
    rate: float  # s^-1
    amplitude: float  # at the window start
    offset: float
    rate_stddev: float
    window: tuple[float, float]
    converged: bool
    iterations: int = 0
    amplitude_stddev: float = 0.0
    offset_stddev: float = 0.0

    def model(self, t):
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.exp(-self.rate * (t - self.window[0])) + self.offset


@dataclass(frozen=True)
class SpectrumPoint:
    list_name: str
    normalized_signal: float
    stddev: float  # of the data, not of the mean
    n_reps: int
    method: str = ""

    def __post_init__(self):
        if self.n_reps < 1 or self.stddev < 0:
            raise ValueError("need n_reps >= 1 and stddev >= 0")


def _window_data(t, y, window):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = window
    if not lo < hi:
        raise ValueError("window start must precede its end")
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if sel.sum() < 10:
        raise ValueError("need at least 10 samples in the fit window, have %d" % sel.sum())
    return t[sel] - lo, y[sel]


def _initial_guess(t, y, offset):
    # log-linear regression on baseline-subtracted data, then linear amplitudes
    span = np.ptp(y)
    c0 = (y.min() - 0.1 * span) if offset else 0.0
    z = y - c0
    good = z > 0
    if good.sum() >= 2:
        slope = np.polyfit(t[good], np.log(z[good]), 1)[0]
        rate = -slope
    else:
        rate = 0.0
    if not np.isfinite(rate) or rate <= 0:
        rate = 1.0 / max(t[-1] - t[0], 1e-12)
    a, c = _linear_amplitudes(t, y, rate, offset)
    return np.array([a, rate, c])


def _linear_amplitudes(t, y, rate, offset):
    e = np.exp(-rate * t)
    if offset:
        X = np.column_stack([e, np.ones_like(t)])
        (a, c), *_ = np.linalg.lstsq(X, y, rcond=None)
        return a, c
    return float(e @ y / (e @ e)), 0.0


def _residual_jacobian(p, t, y, offset):
    a, g, c = p
    e = np.exp(-g * t)
    r = a * e + c - y
    cols = [e, -a * t * e]
    if offset:
        cols.append(np.ones_like(t))
    return r, np.column_stack(cols)


def fit_exponential_arrays(t, y, window=(0.0, 10.0), offset: bool = True) -> FitResult:
    """Least-squares fit of ``a * exp(-rate * (t - t0)) + c`` inside ``window``.

    Gauss-Newton iterations with Levenberg damping; ``offset=False`` fixes
    ``c = 0``.  ``converged`` is False if the relative parameter change did
    not fall below 1e-8 within 100 iterations, in which case the best iterate
    is returned.
    """
    tw, yw = _window_data(t, y, window)
    scale = np.max(np.abs(yw))
    if scale == 0 or np.ptp(yw) <= 1e-14 * scale:
        raise DegenerateFitError("constant data in the fit window")
    # work on unit-scale data so the iteration path does not depend on units
    yw = yw / scale

    npar = 3 if offset else 2
    p = _initial_guess(tw, yw, offset)
    r, Jf = _residual_jacobian(p, tw, yw, offset)
    cost = r @ r
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        JtJ = Jf.T @ Jf
        g = Jf.T @ r
        diag = np.diag(JtJ).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = -np.linalg.solve(JtJ + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p.copy()
            trial[:npar] += step
            r_t, J_t = _residual_jacobian(trial, tw, yw, offset)
            cost_t = r_t @ r_t
            if np.isfinite(cost_t) and cost_t <= cost:
                break
            lam *= 10.0
            if lam > 1e16:
                step = np.zeros(npar)
                trial, r_t, J_t, cost_t = p, r, Jf, cost
                break
        change = np.max(np.abs(step) / np.maximum(np.abs(p[:npar]), 1e-300))
        p, r, Jf, cost = trial, r_t, J_t, cost_t
        lam = max(lam / 10.0, 1e-12)
        if change < REL_TOL:
            converged = True
            break

    dof = len(tw) - npar
    s2 = cost / dof if dof > 0 else 0.0
    try:
        cov = np.linalg.inv(Jf.T @ Jf) * s2
        sd = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        sd = np.full(npar, np.inf)
    return FitResult(
        rate=float(p[1]), amplitude=float(p[0] * scale), offset=float(p[2] * scale),
        rate_stddev=float(sd[1]), window=(float(window[0]), float(window[1])),
        converged=converged, iterations=it,
        amplitude_stddev=float(sd[0] * scale), offset_stddev=float(sd[2] * scale) if offset else 0.0,
    )


def fit_exponential(trace, window=(0.0, 10.0), offset: bool = True) -> FitResult:
    """Fit the fluorescence of a :class:`~hdrot.protocol.DecayTrace`."""
    return fit_exponential_arrays(trace.times, trace.fluorescence, window, offset)


def local_decay_rate(t, y, window=(20.0, 30.0), baseline: float = 0.0) -> float:
    """Log-slope of ``y - baseline`` over ``window``, i.e. the rate at its centre."""
    tw, yw = _window_data(t, y, window)
    z = yw - baseline
    if np.any(z <= 0):
        raise DegenerateFitError("signal at or below baseline inside the window")
    return float(-np.polyfit(tw, np.log(z), 1)[0])


def aggregate(values: Sequence[float], normalization: float | None = None,
              list_name: str = "", method: str = "") -> SpectrumPoint:
    """Mean and sample standard deviation of per-repetition signals.

    With ``normalization`` both are divided by it (e.g. the mean background
    rate).  A single value gets stddev 0.  Sums are exactly rounded, so the
    result does not depend on the order of ``values``.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("nothing to aggregate")
    norm = 1.0 if normalization is None else float(normalization)
    if norm == 0:
        raise ValueError("normalization must be non-zero")
    mean = statistics.fmean(vals)
    sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return SpectrumPoint(list_name, mean / norm, abs(sd / norm), len(vals), method)


def average_traces(traces):
    """Pointwise mean of traces sampled on one time grid."""
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to average")
    first = traces[0]
    for tr in traces[1:]:
        if tr.times.shape != first.times.shape or not np.array_equal(tr.times, first.times):
            raise ValueError("traces are on different time grids")
    if len(traces) == 1:
        return first
    mean = np.mean(np.stack([tr.fluorescence for tr in traces]), axis=0)
    return first.replace(fluorescence=mean, rep=-1)


def write_spectrum_csv(points: Sequence[SpectrumPoint], path) -> None:
    rows = ["list,method,mean_signal,stddev,n_reps"]
    rows += ["%s,%s,%.17g,%.17g,%d" % (p.list_name, p.method, p.normalized_signal, p.stddev, p.n_reps)
             for p in points]
    Path(path).write_text("\n".join(rows) + "\n")


def write_plot_data(x, y, yerr, path, header: str = "x,y,yerr") -> None:
    rows = [header] + ["%.17g,%.17g,%.17g" % tuple(r) for r in zip(x, y, yerr)]
    Path(path).write_text("\n".join(rows) + "\n")
