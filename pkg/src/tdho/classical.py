"""Classical oscillator flow: zeta'' + sigma(t) zeta = 0 and its large-time exponents."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .errors import BadFit, NonFiniteSigma, OutOfDomain, OutOfRange, StepFailure, TrappedTrajectory

SIGMA_KINDS = ("zero", "constant", "inverse_square", "tabulated")
_KIND_CODES = {
    "zero": _kernels.SIGMA_ZERO,
    "constant": _kernels.SIGMA_CONSTANT,
    "inverse_square": _kernels.SIGMA_INVERSE_SQUARE,
    "tabulated": _kernels.SIGMA_TABULATED,
}


@dataclass(frozen=True)
class SigmaModel:
    """Oscillator coefficient sigma(t), units time^-2.

    ``inverse_square`` is sigma0/t^2 for |t| > r0 and the constant sigma0/r0^2
    inside, so it is continuous for every r0.  ``tabulated`` interpolates
    linearly between knots and holds the end values outside them.
    """

    kind: str = "zero"
    value: float = 0.0
    sigma0: float = 0.0
    r0: float = 1.0
    knots: tuple = ()

    def __post_init__(self):
        if self.kind not in SIGMA_KINDS:
            raise OutOfRange(f"unknown sigma kind {self.kind!r}")
        if self.kind == "constant" and not math.isfinite(self.value):
            raise NonFiniteSigma("constant sigma must be finite")
        if self.kind == "inverse_square":
            if not 0.0 < self.sigma0 < 0.25:
                raise OutOfRange(f"sigma0={self.sigma0} outside (0, 1/4)")
            if not self.r0 > 0.0:
                raise OutOfRange(f"r0={self.r0} must be positive")
        if self.kind == "tabulated":
            ts = np.array([k[0] for k in self.knots], dtype=float)
            ss = np.array([k[1] for k in self.knots], dtype=float)
            if ts.size < 2:
                raise OutOfRange("tabulated sigma needs at least two knots")
            if np.any(np.diff(ts) <= 0):
                raise OutOfRange("tabulated knots must be strictly increasing in t")
            if not (np.all(np.isfinite(ts)) and np.all(np.isfinite(ss))):
                raise NonFiniteSigma("tabulated sigma has non-finite knots")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def inverse_square(cls, sigma0, r0=1.0):
        return cls("inverse_square", sigma0=float(sigma0), r0=float(r0))

    @classmethod
    def tabulated(cls, knots):
        return cls("tabulated", knots=tuple((float(t), float(s)) for t, s in knots))

    def kernel_args(self):
        kt = np.array([k[0] for k in self.knots], dtype=float)
        ks = np.array([k[1] for k in self.knots], dtype=float)
        if self.kind == "constant":
            params = np.array([self.value, 0.0])
        elif self.kind == "inverse_square":
            params = np.array([self.sigma0, self.r0])
        else:
            params = np.zeros(2)
        return _KIND_CODES[self.kind], params, kt, ks

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(t)
        if self.kind == "constant":
            return np.full_like(t, self.value)
        if self.kind == "inverse_square":
            a = np.maximum(np.abs(t), self.r0)
            return self.sigma0 / (a * a)
        _, _, kt, ks = self.kernel_args()
        return np.interp(t, kt, ks)


class ClassicalSolution:
    """Sampled (zeta1, zeta2, zeta1', zeta2') with Dormand-Prince dense output.

    Immutable after construction.  ``at`` interpolates anywhere in [0, t_max].
    """

    def __init__(self, sigma, times, states, rcont, tol):
        self.sigma = sigma
        self.times = times
        self._states = states
        self._rcont = rcont
        self.tol = tol
        for a in (times, states, rcont):
            a.setflags(write=False)

    @property
    def t_max(self):
        return float(self.times[-1])

    @property
    def zeta1(self):
        return self._states[:, 0]

    @property
    def dzeta1(self):
        return self._states[:, 1]

    @property
    def zeta2(self):
        return self._states[:, 2]

    @property
    def dzeta2(self):
        return self._states[:, 3]

    def wronskian(self):
        return self.zeta1 * self.dzeta2 - self.dzeta1 * self.zeta2

    def at(self, t):
        """Return (zeta1, zeta2, zeta1', zeta2') at t (scalar or array)."""
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(tq < 0.0) or np.any(tq > self.t_max * (1 + 1e-12)):
            raise OutOfDomain(f"t outside [0, {self.t_max}]")
        y = _kernels.KERNELS.dense_eval(self.times, self._rcont, np.minimum(tq, self.t_max))
        out = (y[:, 0], y[:, 2], y[:, 1], y[:, 3])
        if scalar:
            return tuple(float(v[0]) for v in out)
        return out

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "zeta1", "zeta2", "dzeta1", "dzeta2"])
            for k in range(self.times.size):
                w.writerow(
                    [repr(float(v)) for v in (self.times[k], self.zeta1[k], self.zeta2[k], self.dzeta1[k], self.dzeta2[k])]
                )


class PowerLawSolution:
    """Exact pair zeta1 = a t^lam, zeta2 = c2 t^(1-lam) with unit Wronskian.

    Solves the ODE for sigma = lam(1-lam)/t^2 on t > 0 (singular at 0, so it
    only serves t bounded away from zero).
    """

    def __init__(self, lam, c2=1.0):
        if not 0.0 <= lam < 0.5:
            raise OutOfRange(f"lambda={lam} outside [0, 1/2)")
        if c2 == 0.0:
            raise OutOfRange("c2 must be nonzero")
        self.lam = float(lam)
        self.c2 = float(c2)
        self.a = 1.0 / (self.c2 * (1.0 - 2.0 * self.lam))
        s0 = self.lam * (1.0 - self.lam)
        self.sigma = SigmaModel.zero() if s0 == 0.0 else SigmaModel.inverse_square(s0, 1e-12)
        self.t_max = math.inf
        self.tol = 0.0

    def at(self, t):
        scalar = np.ndim(t) == 0
        tq = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(tq <= 0.0):
            raise OutOfDomain("power-law solution is defined for t > 0 only")
        lam = self.lam
        z1 = self.a * tq**lam
        z2 = self.c2 * tq ** (1.0 - lam)
        d1 = self.a * lam * tq ** (lam - 1.0)
        d2 = self.c2 * (1.0 - lam) * tq ** (-lam)
        out = (z1, z2, d1, d2)
        if scalar:
            return tuple(float(v[0]) for v in out)
        return out


def solve_zeta(sigma, t_max, tol=1e-10, max_steps=5_000_000):
    """Integrate both canonical solutions on [0, t_max] with DOPRI5.

    The controller runs at tol/100 so that dense output, not just the step
    endpoints, keeps the Wronskian within 10*tol of one.
    """
    if not t_max > 0:
        raise OutOfRange("t_max must be positive")
    if not tol > 0:
        raise OutOfRange("tol must be positive")
    kind, params, kt, ks = sigma.kernel_args()
    rtol = max(tol * 1e-2, 5e-15)
    h0 = min(1e-3, t_max / 100.0)
    times, states, rcont, status = _kernels.KERNELS.dopri5(
        kind, params, kt, ks, float(t_max), rtol, rtol, h0, max_steps
    )
    if status == _kernels.STATUS_NONFINITE_SIGMA:
        raise NonFiniteSigma(f"sigma is not finite near t={times[-1]}")
    if status != _kernels.STATUS_OK:
        raise StepFailure(f"integration stalled at t={times[-1]} (status {status})")
    if not np.all(np.isfinite(states)):
        raise StepFailure("non-finite state")
    cs = ClassicalSolution(sigma, times, states, rcont, tol)
    drift = np.max(np.abs(cs.wronskian() - 1.0))
    if drift > 10 * tol:
        raise StepFailure(f"Wronskian drift {drift:.3e} exceeds 10*tol")
    return cs


def zeta_at(cs, t):
    return cs.at(t)


def closed_form_lambda(sigma0):
    """Exponent for sigma = sigma0 t^-2: the smaller root of l^2 - l + sigma0 = 0."""
    if not 0.0 < sigma0 < 0.25:
        raise OutOfRange(f"sigma0={sigma0} outside (0, 1/4)")
    return (1.0 - math.sqrt(1.0 - 4.0 * sigma0)) / 2.0


@dataclass
class AsymptoticData:
    lam: float
    c1_plus: float
    c2_plus: float
    c3_plus: float
    fit_residuals: dict = field(default_factory=dict)
    lambda_loglog: float = float("nan")
    zeta1_growth: float = 0.0  # coefficient of t^(1-lam) in zeta1; zero when zeta1 stays bounded
    assumption1_zeta1: bool = True

    @property
    def c_plus(self):
        return abs(self.c2_plus) ** (1.0 / (1.0 - self.lam))


def _two_term(t, y, lam):
    """Least squares y ~ big*t^(1-lam) + small*t^lam, relative weighting."""
    w = 1.0 / np.abs(y)
    basis = np.column_stack([t ** (1.0 - lam), t**lam]) * w[:, None]
    coef, *_ = np.linalg.lstsq(basis, y * w, rcond=None)
    resid = basis @ coef - y * w
    return coef, float(np.sqrt(np.mean(resid**2)))


def extract_asymptotics(cs, fit_window, tol=1e-6, n_samples=400):
    """Fit lambda, c1+, c2+, c3+ on fit_window.

    lambda starts from the log-log slope of zeta2 and is refined by the
    two-term model zeta2 = c2 t^(1-lam) + A t^lam (A = +-c3), which removes
    the O(t^lam) bias of the bare slope.
    """
    t0, t1 = map(float, fit_window)
    if not 0 < t0 < t1 <= cs.t_max:
        raise OutOfDomain(f"fit window {fit_window} not inside (0, {cs.t_max}]")
    t = np.geomspace(t0, t1, n_samples)
    z1, z2, _, _ = cs.at(t)
    amax = np.max(np.abs(z2))
    if np.any(np.sign(z2) != np.sign(z2[0])) or np.min(np.abs(z2)) < 1e-6 * amax:
        raise TrappedTrajectory("zeta2 changes sign or nearly vanishes on the fit window")
    logt = np.log(t)
    logz = np.log(np.abs(z2))
    slope, icpt = np.polyfit(logt, logz, 1)
    lam0 = 1.0 - slope
    loglog_resid = float(np.sqrt(np.mean((slope * logt + icpt - logz) ** 2)))
    if not -0.05 < lam0 < 0.55:
        raise BadFit(f"log-log exponent {slope:.4f} incompatible with lambda in [0, 1/2)")

    lo = max(0.0, lam0 - 0.05)
    hi = min(0.5 - 1e-6, lam0 + 0.05)
    res = minimize_scalar(
        lambda lam: _two_term(t, z2, lam)[1],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    lam = float(res.x)
    (c2, a_small), r2 = _two_term(t, z2, lam)
    # zeta1 in the same basis; a bounded zeta1 needs the t^(1-lam) part to vanish.
    # zeta1 may cross zero, so rows are scaled by the dominant basis function.
    scale = t ** (1.0 - lam)
    basis1 = np.column_stack([t**lam, t ** (1.0 - lam)]) / scale[:, None]
    coef1, *_ = np.linalg.lstsq(basis1, z1 / scale, rcond=None)
    r1 = float(np.sqrt(np.mean((basis1 @ coef1 - z1 / scale) ** 2)))
    c1, growth = map(float, coef1)
    growth_weight = abs(growth) * t1 ** (1.0 - 2.0 * lam)
    zeta1_ok = growth_weight <= 1e-6 * max(abs(c1), 1e-300) + 1e-9
    resid = {"zeta2_loglog": loglog_resid, "zeta2_two_term": r2, "zeta1_two_term": r1}
    if r2 > tol:
        raise BadFit(f"two-term zeta2 fit residual {r2:.3e} exceeds tol {tol:.1e}")
    if c2 == 0.0:
        raise BadFit("c2+ vanished")
    return AsymptoticData(
        lam=lam,
        c1_plus=c1,
        c2_plus=float(c2),
        c3_plus=abs(float(a_small)),
        fit_residuals=resid,
        lambda_loglog=float(lam0),
        zeta1_growth=growth,
        assumption1_zeta1=bool(zeta1_ok),
    )

