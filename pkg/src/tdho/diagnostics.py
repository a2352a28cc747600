"""Norms, weighted time norms, decay-rate fits and the Strichartz sanity ratio."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
from scipy.integrate import simpson

from .errors import InadmissiblePair, InsufficientSamples, InsufficientSpan, NonPositiveError, OutOfRange
from .evolution import _k2
from .field import lp_norm
from .svg import loglog_svg
from .transforms import mdfm_propagator

__all__ = [
    "lp_norm",
    "sobolev_norm",
    "weighted_bochner_norm",
    "x_T_norm",
    "fit_decay_rate",
    "strichartz_ratio",
    "NormReport",
    "norm_report",
]


def sobolev_norm(f, gamma, nu=0.0):
    """|| <x>^nu <D>^gamma f ||_2 with the Fourier multiplier taken on f's own grid."""
    if gamma < 0 or nu < 0:
        raise OutOfRange("gamma and nu must be nonnegative")
    v = f.values
    if gamma != 0:
        v = scipy.fft.ifftn(scipy.fft.fftn(v) * (1.0 + _k2(f.grid)) ** (0.5 * gamma))
    if nu != 0:
        v = v * (1.0 + f.grid.r2()) ** (0.5 * nu)
    return float(np.sqrt(np.sum(np.abs(v) ** 2) * f.grid.cell_volume))


def _weight(t, lam):
    return (1.0 + np.asarray(t, dtype=float) ** 2) ** (-0.5 * lam)


def _bochner_from_norms(times, norms, q, lam, tau):
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if times.size < 1 or times[0] > tau * (1 + 1e-12) + 1e-300 or tau > times[-1]:
        raise InsufficientSamples(f"samples do not cover [{tau}, {times[-1] if times.size else tau}]")
    keep = times >= tau
    t = times[keep]
    y = norms[keep]
    if t.size == 0 or t[0] > tau:
        # start the window at tau by linear interpolation of the norm
        k = np.searchsorted(times, tau)
        y0 = np.interp(tau, times[k - 1 : k + 1], norms[k - 1 : k + 1])
        t = np.concatenate([[tau], t])
        y = np.concatenate([[y0], y])
    if math.isinf(q):
        return float(np.max(_weight(t, lam) * y))
    if t.size < 2:
        return 0.0
    integrand = _weight(t, lam) * y**q
    if t.size == 2:
        val = 0.5 * (t[1] - t[0]) * (integrand[0] + integrand[1])
    else:
        val = simpson(integrand, x=t)
    return float(max(val, 0.0) ** (1.0 / q))


def weighted_bochner_norm(traj, q, r, lam, tau):
    """( int_tau^end (1+t^2)^(-lam/2) ||F(t)||_r^q dt )^(1/q); q = inf gives the weighted sup."""
    if not (q >= 1 and r >= 2):
        raise OutOfRange("need q >= 1 and r >= 2")
    if len(traj.times) < 2 and not math.isinf(q):
        raise InsufficientSamples("need at least two samples")
    norms = [lp_norm(f, r) for f in traj.fields]
    return _bochner_from_norms(traj.times, norms, q, lam, tau)


def x_T_norm(traj_diff, b, lam, beta_n, alpha_n, T):
    """Discrete sup over sampled tau >= T of the two weighted pieces."""
    times = np.asarray(traj_diff.times, dtype=float)
    if times.size < 2 or times[0] > T * (1 + 1e-12):
        raise InsufficientSamples("trajectory must be sampled on [T, t_end] with at least two points")
    n2 = [lp_norm(f, 2.0) for f in traj_diff.fields]
    nr = [lp_norm(f, alpha_n) for f in traj_diff.fields]
    taus = times[(times >= T) & (times < times[-1])]
    first = max(tau**b * _bochner_from_norms(times, n2, math.inf, lam, tau) for tau in taus)
    second = max(tau ** (b - 2 * lam) * _bochner_from_norms(times, nr, beta_n, lam, tau) for tau in taus)
    return float(first + second)


def fit_decay_rate(times, errors):
    """Least squares on (log t, log err).  Returns (C, b_est, r_squared) with err ~ C t^-b_est."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(errors, dtype=float)
    if t.size != e.size:
        raise OutOfRange("times and errors differ in length")
    if np.any(e <= 0) or np.any(t <= 0):
        raise NonPositiveError("errors and times must be positive")
    if t.size < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {t.size}")
    if t.max() / t.min() < 10.0 * (1 - 1e-9):
        raise InsufficientSpan("samples must span at least one decade")
    x, y = np.log(t), np.log(e)
    A = np.stack([np.ones_like(x), x], axis=1)
    (c0, slope), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (c0 + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return float(np.exp(c0)), float(-slope), r2


def strichartz_ratio(cs, phi, q, r, lam, window, ratio=1.1):
    """|| U0(t,0) phi ||_{L^q(window; L^r), lam} / ||phi||_2 from geometric samples."""
    n = phi.grid.n
    lhs = (0.0 if math.isinf(q) else 1.0 / q) + n / (2.0 * r)
    if abs(lhs - n / 4.0) > 1e-12 or r < 2:
        raise InadmissiblePair(f"(q, r) = ({q}, {r}) violates 1/q + n/(2r) = n/4")
    a, b = window
    if not b > a > 0:
        raise OutOfRange("window must satisfy 0 < a < b")
    m = max(int(math.ceil(math.log(b / a) / math.log(ratio))), 2)
    m += m % 2
    ts = np.exp(np.linspace(math.log(a), math.log(b), m + 1))
    ts[0], ts[-1] = a, b
    norms = [lp_norm(mdfm_propagator(cs, t, phi), r) for t in ts]
    return _bochner_from_norms(ts, norms, q, lam, a) / phi.norm()


@dataclass
class NormReport:
    times: np.ndarray
    l2_error: np.ndarray
    weighted_sup_part: np.ndarray
    weighted_int_part: np.ndarray
    fit_times: tuple
    fitted_slope: float
    fitted_constant: float
    r_squared: float

    @property
    def b_est(self):
        return -self.fitted_slope

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "l2_error", "weighted_sup_part", "weighted_int_part", "fit_line"])
        for t, e, s, i in zip(self.times, self.l2_error, self.weighted_sup_part, self.weighted_int_part):
            w.writerow([repr(float(t)), repr(float(e)), repr(float(s)), repr(float(i)),
                        repr(float(self.fitted_constant * t**self.fitted_slope))])
        return buf.getvalue()

    def to_svg(self, title="||u - u_p||_2"):
        lo, hi = self.fit_times
        sel = (self.times >= lo) & (self.times <= hi)
        ft = self.times[sel]
        return loglog_svg(
            [
                {"x": self.times, "y": self.l2_error, "label": "L2 error", "style": "points"},
                {"x": ft, "y": self.fitted_constant * ft**self.fitted_slope,
                 "label": f"fit slope {self.fitted_slope:.3f}"},
            ],
            title=title,
            xlabel="t",
            ylabel="error",
        )


def norm_report(times, l2_error, weighted_sup=None, weighted_int=None, fit_window=None):
    """Fit over fit_window (default: the last decade of the samples)."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(l2_error, dtype=float)
    lo, hi = (t[-1] / 10.0 * (1 - 1e-12), t[-1]) if fit_window is None else fit_window
    sel = (t >= lo) & (t <= hi * (1 + 1e-12))
    C, b, r2 = fit_decay_rate(t[sel], e[sel])
    nan = np.full(t.size, np.nan)
    return NormReport(
        t,
        e,
        nan if weighted_sup is None else np.asarray(weighted_sup, dtype=float),
        nan if weighted_int is None else np.asarray(weighted_int, dtype=float),
        (float(lo), float(hi)),
        -b,
        C,
        r2,
    )
