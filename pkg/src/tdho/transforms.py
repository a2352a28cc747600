"""Modulation, dilation, Fourier transform and the factorized free-oscillator propagator.

Fourier convention (symmetric, unitary)::

    F f(xi) = (2 pi)^(-n/2) * integral exp(-i x.xi) f(x) dx

discretized per axis by a DFT with the phase corrections that account for
arbitrary grid origins, so sampled analytic functions map to samples of
their analytic transforms.  A grid with N points and spacing dx maps to the
centered frequency grid with spacing 2 pi / (N dx).
"""
from __future__ import annotations

import cmath
import math

import numpy as np
import scipy.fft

from ._kernels import KERNELS
from .errors import SingularFactor, ZeroTau
from .field import Field, Grid

# factorization is refused when |zeta2(t)| <= SINGULAR_RATIO * t
SINGULAR_RATIO = 1e-3
_DZETA_FLOOR = 1e-14


def _chirp(f, coeff):
    """Multiply by exp(i*coeff*|x|^2/2); coeff = 1/tau gives modulate(f, tau)."""
    if coeff == 0.0:
        return f
    v = np.ascontiguousarray(f.values)
    return f.with_values(KERNELS.multiply_phase(v, f.grid.r2(), float(coeff)))


def modulate(f, tau):
    """Pointwise factor exp(i|x|^2/(2 tau)) on the field's own grid."""
    if tau == 0:
        raise ZeroTau("modulate: tau = 0")
    return _chirp(f, 1.0 / tau)


def _dilation_factor(tau, n):
    # principal branch: (i tau)^(-n/2) = exp(-i n/2 (pi/2 + arg tau)) |tau|^(-n/2)
    arg = 0.0 if tau > 0 else math.pi
    return cmath.exp(-0.5j * n * (0.5 * math.pi + arg)) * abs(tau) ** (-0.5 * n)


def _reflect(f):
    v = f.values
    for a in range(v.ndim):
        v = np.flip(v, axis=a)
    return np.ascontiguousarray(v)


def _reflected_grid(g, tau):
    # points y_j = tau * x_{N-1-j}, tau < 0
    return Grid(
        g.sizes,
        tuple((x0 + (s - 1) * d) * tau for x0, d, s in zip(g.x_min, g.dx, g.sizes)),
        tuple(d * abs(tau) for d in g.dx),
    )


def dilate(f, tau):
    """(i tau)^(-n/2) f(x/tau): rescale the grid metadata, never resample."""
    if tau == 0:
        raise ZeroTau("dilate: tau = 0")
    c = _dilation_factor(tau, f.grid.n)
    if tau > 0:
        return f.with_values(f.values * c, grid=f.grid.scaled(tau))
    return f.with_values(_reflect(f) * c, grid=_reflected_grid(f.grid, tau))


def undilate(f, tau):
    """Exact inverse of dilate(., tau)."""
    if tau == 0:
        raise ZeroTau("undilate: tau = 0")
    c = 1.0 / _dilation_factor(tau, f.grid.n)
    if tau > 0:
        return f.with_values(f.values * c, grid=f.grid.scaled(1.0 / tau))
    return f.with_values(_reflect(f) * c, grid=_reflected_grid(f.grid, 1.0 / tau))


def _axis_vec(vec, a, n):
    shape = [1] * n
    shape[a] = vec.size
    return vec.reshape(shape)


def _dft(f, out_grid, sign):
    """Shared kernel for both directions.

    With j, k centered indices J = j - N/2, K = k - N/2 and origin offsets
    o_s, o_d (in grid units), x_j y_k = (2 pi/N)(K + o_d)(J + o_s).  The
    centered part reduces to (-1)^(j+k) times the plain DFT kernel, which is
    exact; only the (usually zero) offsets need explicit phases.
    """
    g = f.grid
    n = g.n
    v = f.values
    scale = 1.0
    post = []
    pre = []
    for a in range(n):
        N = g.sizes[a]
        o_s = g.offsets()[a]
        o_d = out_grid.offsets()[a]
        j = np.arange(N)
        J = j - N // 2
        alt = np.where(j % 2 == 0, 1.0, -1.0)
        w = 2.0 * math.pi / N
        pre_a = alt * np.exp(sign * 1j * w * o_d * J) if o_d != 0.0 else alt.astype(complex)
        post_a = alt * np.exp(sign * 1j * w * (J * o_s + o_d * o_s)) if o_s != 0.0 else alt.astype(complex)
        pre.append(_axis_vec(pre_a, a, n))
        post.append(_axis_vec(post_a, a, n))
        scale *= g.dx[a] / math.sqrt(2.0 * math.pi)
    for p in pre:
        v = v * p
    if sign < 0:
        v = scipy.fft.fftn(v)
    else:
        v = scipy.fft.ifftn(v, norm="forward")
    for p in post:
        v = v * p
    return f.with_values(v * scale, grid=out_grid)


def fourier(f, out_grid=None):
    """Unitary transform onto the dual (by default centered) frequency grid."""
    target = f.grid.dual() if out_grid is None else _check_dual(f.grid, out_grid)
    return _dft(f, target, -1)


def inverse_fourier(f, out_grid=None):
    """Inverse of fourier(); lands on the centered position grid unless out_grid is given."""
    target = f.grid.dual() if out_grid is None else _check_dual(f.grid, out_grid)
    return _dft(f, target, +1)


def _check_dual(g, h):
    for s, d, e in zip(g.sizes, g.dx, h.dx):
        if abs(s * d * e / (2.0 * math.pi) - 1.0) > 1e-12:
            raise ValueError("out_grid spacing is not dual to the input spacing")
    if h.sizes != g.sizes:
        raise ValueError("out_grid sizes differ from input sizes")
    return h


def resample(f, grid):
    """Band-limited (trigonometric) interpolation of f onto another grid.

    Target points outside the source box get zero; the fields handled here
    decay well inside their boxes.
    """
    if grid.n != f.grid.n:
        raise ValueError("dimension mismatch")
    spec = fourier(f)
    v = spec.values
    for a, (ys, xi) in enumerate(zip(grid.axes(), spec.grid.axes())):
        g = f.grid
        lo = g.x_min[a]
        hi = lo + g.sizes[a] * g.dx[a]
        mat = np.exp(1j * np.outer(ys, xi)) * (spec.grid.dx[a] / math.sqrt(2.0 * math.pi))
        mat[(ys < lo - 1e-12 * g.dx[a]) | (ys > hi)] = 0.0
        v = np.moveaxis(np.tensordot(mat, v, axes=([1], [a])), 0, a)
    return Field(grid, v, f.time_tag)


def _factor_params(cs, t):
    z1, z2, dz1, dz2 = cs.at(t)
    if not (abs(z2) > SINGULAR_RATIO * abs(t)) or z2 == 0.0:
        raise SingularFactor(f"zeta2({t}) = {z2} too close to zero")
    if abs(dz2) < _DZETA_FLOOR:
        raise SingularFactor(f"zeta2'({t}) = {dz2} vanishes")
    return z1, z2, dz1, dz2


def mdfm_propagator(cs, t, f):
    """U0(t,0) f as M(z2/z2') D(z2) F M(z2/z1), applied right to left."""
    z1, z2, _, dz2 = _factor_params(cs, t)
    g = _chirp(f, z1 / z2)
    g = fourier(g)
    g = dilate(g, z2)
    g = _chirp(g, dz2 / z2)
    return g.tagged(t)


def mdfm_inverse(cs, t, f, out_grid=None):
    """U0(t,0)^-1 f; the result lives on the centered grid dual to the frequency grid."""
    z1, z2, _, dz2 = _factor_params(cs, t)
    g = _chirp(f, -dz2 / z2)
    g = undilate(g, z2)
    g = inverse_fourier(g, out_grid)
    g = _chirp(g, -z1 / z2)
    return g.tagged(0.0)


def mdfm_between(cs, t, s, f):
    """U0(t,s) f = U0(t,0) U0(s,0)^-1 f."""
    return mdfm_propagator(cs, t, mdfm_inverse(cs, s, f))


def free_multiplier(f, t):
    """exp(-i t |xi|^2 / 2) applied spectrally; the sigma = 0 propagator on a periodic box."""
    spec = fourier(f)
    spec = _chirp(spec, -t)
    return inverse_fourier(spec, f.grid).tagged(None if f.time_tag is None else f.time_tag + t)
