"""Modified final-state profile w_hat(t), the approximate solution u_p(t) and the defect R(t)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import KERNELS
from .errors import NonpositiveTime, OutOfRange
from .field import Field
from .transforms import _chirp, _factor_params, dilate, fourier, inverse_fourier


@dataclass(frozen=True)
class ProfileSpec:
    """Final-state Fourier data and the constants of the nonlinearity.

    ``u_plus_hat`` lives on a frequency grid.  The power is tied to the
    oscillator exponent: rho = 2 / (n (1 - lam)), c_plus = |c2_plus|^(1/(1-lam)).
    """

    u_plus_hat: Field
    mu: float
    lam: float
    c2_plus: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lam < 0.5):
            raise OutOfRange(f"lambda = {self.lam} outside [0, 1/2)")
        if self.c2_plus == 0 or not math.isfinite(self.c2_plus):
            raise OutOfRange("c2_plus must be finite and nonzero")
        if not math.isfinite(self.mu):
            raise OutOfRange("mu must be finite")

    @property
    def n(self):
        return self.u_plus_hat.grid.n

    @property
    def rho(self):
        return 2.0 / (self.n * (1.0 - self.lam))

    @property
    def kappa(self):
        # n rho / 2, the power of zeta2 in the moving-frame coupling
        return 1.0 / (1.0 - self.lam)

    @property
    def c_plus(self):
        return abs(self.c2_plus) ** (1.0 / (1.0 - self.lam))

    def with_mu(self, mu):
        return ProfileSpec(self.u_plus_hat, mu, self.lam, self.c2_plus)


def gaussian(grid, amplitude, width=1.0, center=None):
    """amplitude * exp(-|xi - center|^2 / (2 width^2)) sampled on ``grid``."""
    r2 = np.zeros(grid.sizes)
    center = (0.0,) * grid.n if center is None else tuple(center)
    for a, ax in enumerate(grid.axes()):
        shape = [1] * grid.n
        shape[a] = ax.size
        r2 = r2 + ((ax - center[a]) ** 2).reshape(shape)
    return Field(grid, amplitude * np.exp(-r2 / (2.0 * width**2)))


def nonlinearity_values(v, mu, rho):
    a = np.abs(v)
    return mu * a**rho * v


def nonlinearity(f, spec):
    """mu |f|^rho f pointwise."""
    return f.with_values(nonlinearity_values(f.values, spec.mu, spec.rho))


def _rotate(f, coeff, rho):
    if coeff == 0.0:
        return f
    v = np.ascontiguousarray(f.values)
    return f.with_values(KERNELS.phase_rotate(v, f.grid.r2(), 0.0, float(coeff), rho))


def hat_w(spec, t):
    """u_plus_hat * exp(-i mu |u_plus_hat|^rho log(t) / c_plus)."""
    if not t > 0:
        raise NonpositiveTime(f"w_hat needs t > 0, got {t}")
    coeff = spec.mu * math.log(t) / spec.c_plus
    return _rotate(spec.u_plus_hat, coeff, spec.rho).tagged(t)


def u_p(spec, cs, t):
    """M(z2/z2') D(z2) w_hat(t)."""
    _, z2, _, dz2 = _factor_params(cs, t)
    g = dilate(hat_w(spec, t), z2)
    return _chirp(g, dz2 / z2).tagged(t)


def M2_conj(cs, t, g):
    """F M(z2/z1) F^-1 g, on g's own frequency grid."""
    z1, z2, _, _ = _factor_params(cs, t)
    h = inverse_fourier(g)
    h = _chirp(h, z1 / z2)
    return fourier(h, g.grid)


def R_op(cs, t, g):
    """M(z2/z2') D(z2) (F M(z2/z1) F^-1 - 1) g."""
    _, z2, _, dz2 = _factor_params(cs, t)
    h = M2_conj(cs, t, g)
    h = h.with_values(h.values - g.values)
    h = dilate(h, z2)
    return _chirp(h, dz2 / z2).tagged(t)


def load_profile(grid, family, **params):
    """Built-in analytic families for u_plus_hat."""
    if family == "gaussian":
        return gaussian(grid, params.get("amplitude", 0.05), params.get("width", 1.0))
    raise OutOfRange(f"unknown profile family {family!r}")

