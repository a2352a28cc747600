"""Hot inner loops, compiled with numba when available.

Every kernel has a pure-numpy twin.  ``TDHO_USE_NUMBA=0`` in the environment
(read once at import) selects the numpy path; so does a missing numba.
``KERNELS`` exposes whichever set is active, ``NUMPY_KERNELS`` and
``NUMBA_KERNELS`` expose both for benchmarking and cross-checks.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("TDHO_USE_NUMBA", "1").strip().lower() not in (
    "0",
    "false",
    "no",
    "off",
)

SIGMA_ZERO = 0
SIGMA_CONSTANT = 1
SIGMA_INVERSE_SQUARE = 2
SIGMA_TABULATED = 3

STATUS_OK = 0
STATUS_STEP_FAILURE = 1
STATUS_NONFINITE_SIGMA = 2
STATUS_MAX_STEPS = 3

# Dormand-Prince 5(4) tableau with Hairer's dense-output coefficients.
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_A71, _A73, _A74, _A75, _A76 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
_D1 = -12715105075.0 / 11282082432.0
_D3 = 87487479700.0 / 32700410799.0
_D4 = -10690763975.0 / 1880347072.0
_D5 = 701980252875.0 / 199316789632.0
_D6 = -1453857185.0 / 822651844.0
_D7 = 69997945.0 / 29380423.0


def _sigma_eval(kind, params, knots_t, knots_s, t):
    if kind == SIGMA_ZERO:
        return 0.0
    if kind == SIGMA_CONSTANT:
        return params[0]
    if kind == SIGMA_INVERSE_SQUARE:
        a = abs(t)
        if a < params[1]:
            a = params[1]
        return params[0] / (a * a)
    # tabulated: piecewise linear, clamped outside the knot range
    m = knots_t.shape[0]
    if t <= knots_t[0]:
        return knots_s[0]
    if t >= knots_t[m - 1]:
        return knots_s[m - 1]
    lo = 0
    hi = m - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if knots_t[mid] <= t:
            lo = mid
        else:
            hi = mid
    w = (t - knots_t[lo]) / (knots_t[hi] - knots_t[lo])
    return (1.0 - w) * knots_s[lo] + w * knots_s[hi]


def _rhs(kind, params, knots_t, knots_s, t, y, out):
    s = _sigma_eval(kind, params, knots_t, knots_s, t)
    out[0] = y[1]
    out[1] = -s * y[0]
    out[2] = y[3]
    out[3] = -s * y[2]
    return s


def _dopri5(kind, params, knots_t, knots_s, t_max, rtol, atol, h0, max_steps):
    """Integrate zeta'' + sigma zeta = 0 for both canonical initial pairs.

    State is (zeta1, zeta1', zeta2, zeta2').  Returns (times, states, rcont,
    status) where rcont[k] holds the five dense-output vectors of step k.
    """
    cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, 4))
    rcont = np.empty((cap, 5, 4))
    y = np.array([1.0, 0.0, 0.0, 1.0])
    t = 0.0
    times[0] = t
    states[0, :] = y
    n = 1
    k1 = np.empty(4)
    k2 = np.empty(4)
    k3 = np.empty(4)
    k4 = np.empty(4)
    k5 = np.empty(4)
    k6 = np.empty(4)
    k7 = np.empty(4)
    yt = np.empty(4)
    ynew = np.empty(4)
    s0 = _rhs(kind, params, knots_t, knots_s, t, y, k1)
    if not np.isfinite(s0):
        return times[:n], states[:n], rcont[:0], STATUS_NONFINITE_SIGMA
    h = h0
    h_floor = 1e-14 * max(1.0, t_max)
    steps = 0
    status = STATUS_OK
    while t < t_max:
        if steps >= max_steps:
            status = STATUS_MAX_STEPS
            break
        if t + h > t_max:
            h = t_max - t
        for i in range(4):
            yt[i] = y[i] + h * _A21 * k1[i]
        _rhs(kind, params, knots_t, knots_s, t + _C2 * h, yt, k2)
        for i in range(4):
            yt[i] = y[i] + h * (_A31 * k1[i] + _A32 * k2[i])
        _rhs(kind, params, knots_t, knots_s, t + _C3 * h, yt, k3)
        for i in range(4):
            yt[i] = y[i] + h * (_A41 * k1[i] + _A42 * k2[i] + _A43 * k3[i])
        _rhs(kind, params, knots_t, knots_s, t + _C4 * h, yt, k4)
        for i in range(4):
            yt[i] = y[i] + h * (_A51 * k1[i] + _A52 * k2[i] + _A53 * k3[i] + _A54 * k4[i])
        _rhs(kind, params, knots_t, knots_s, t + _C5 * h, yt, k5)
        for i in range(4):
            yt[i] = y[i] + h * (
                _A61 * k1[i] + _A62 * k2[i] + _A63 * k3[i] + _A64 * k4[i] + _A65 * k5[i]
            )
        _rhs(kind, params, knots_t, knots_s, t + h, yt, k6)
        for i in range(4):
            ynew[i] = y[i] + h * (
                _A71 * k1[i] + _A73 * k3[i] + _A74 * k4[i] + _A75 * k5[i] + _A76 * k6[i]
            )
        s7 = _rhs(kind, params, knots_t, knots_s, t + h, ynew, k7)
        if not np.isfinite(s7):
            status = STATUS_NONFINITE_SIGMA
            break
        err = 0.0
        for i in range(4):
            e = h * (
                _E1 * k1[i] + _E3 * k3[i] + _E4 * k4[i] + _E5 * k5[i] + _E6 * k6[i] + _E7 * k7[i]
            )
            sk = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            err += (e / sk) ** 2
        err = np.sqrt(err / 4.0)
        steps += 1
        if err <= 1.0:
            if n >= cap:
                cap *= 2
                times2 = np.empty(cap)
                states2 = np.empty((cap, 4))
                rcont2 = np.empty((cap, 5, 4))
                times2[:n] = times[:n]
                states2[:n] = states[:n]
                rcont2[: n - 1] = rcont[: n - 1]
                times = times2
                states = states2
                rcont = rcont2
            for i in range(4):
                ydiff = ynew[i] - y[i]
                bspl = h * k1[i] - ydiff
                rcont[n - 1, 0, i] = y[i]
                rcont[n - 1, 1, i] = ydiff
                rcont[n - 1, 2, i] = bspl
                rcont[n - 1, 3, i] = ydiff - h * k7[i] - bspl
                rcont[n - 1, 4, i] = h * (
                    _D1 * k1[i] + _D3 * k3[i] + _D4 * k4[i] + _D5 * k5[i] + _D6 * k6[i] + _D7 * k7[i]
                )
            t = t + h
            for i in range(4):
                y[i] = ynew[i]
                k1[i] = k7[i]
            times[n] = t
            states[n, :] = y
            n += 1
            fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * fac
        else:
            h = h * max(0.2, 0.9 * err ** -0.2)
            if h < h_floor:
                status = STATUS_STEP_FAILURE
                break
    return times[:n].copy(), states[:n].copy(), rcont[: n - 1].copy(), status


def _dense_eval_numpy(times, rcont, tq):
    idx = np.searchsorted(times, tq, side="right") - 1
    idx = np.clip(idx, 0, times.shape[0] - 2)
    h = times[idx + 1] - times[idx]
    th = ((tq - times[idx]) / h)[:, None]
    r = rcont[idx]
    return r[:, 0] + th * (r[:, 1] + (1.0 - th) * (r[:, 2] + th * (r[:, 3] + (1.0 - th) * r[:, 4])))


def _dense_eval_loop(times, rcont, tq):
    m = tq.shape[0]
    out = np.empty((m, 4))
    last = times.shape[0] - 2
    for j in range(m):
        t = tq[j]
        lo = 0
        hi = last + 1
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if times[mid] <= t:
                lo = mid
            else:
                hi = mid
        th = (t - times[lo]) / (times[lo + 1] - times[lo])
        for i in range(4):
            out[j, i] = rcont[lo, 0, i] + th * (
                rcont[lo, 1, i]
                + (1.0 - th)
                * (rcont[lo, 2, i] + th * (rcont[lo, 3, i] + (1.0 - th) * rcont[lo, 4, i]))
            )
    return out


def _phase_rotate_numpy(values, x2, quad_coeff, nl_coeff, rho):
    # exp(-i (quad_coeff |x|^2 / 2 + nl_coeff |v|^rho)) v ; |v| is invariant
    phase = 0.5 * quad_coeff * x2
    if nl_coeff != 0.0:
        phase = phase + nl_coeff * np.abs(values) ** rho
    return values * np.exp(-1j * phase)


def _phase_rotate_loop(values, x2, quad_coeff, nl_coeff, rho):
    out = np.empty_like(values)
    flat_v = values.ravel()
    flat_x = x2.ravel()
    flat_o = out.ravel()
    for k in range(flat_v.shape[0]):
        v = flat_v[k]
        ph = 0.5 * quad_coeff * flat_x[k]
        if nl_coeff != 0.0:
            a = np.sqrt(v.real * v.real + v.imag * v.imag)
            if a > 0.0:
                ph += nl_coeff * a**rho
        flat_o[k] = v * complex(np.cos(ph), -np.sin(ph))
    return out


def _multiply_phase_numpy(values, x2, coeff):
    # exp(i coeff |x|^2 / 2) v
    return values * np.exp(0.5j * coeff * x2)


def _multiply_phase_loop(values, x2, coeff):
    out = np.empty_like(values)
    flat_v = values.ravel()
    flat_x = x2.ravel()
    flat_o = out.ravel()
    for k in range(flat_v.shape[0]):
        ph = 0.5 * coeff * flat_x[k]
        flat_o[k] = flat_v[k] * complex(np.cos(ph), np.sin(ph))
    return out


class _KernelSet:
    def __init__(self, name, sigma_eval, dopri5, dense_eval, phase_rotate, multiply_phase):
        self.name = name
        self.sigma_eval = sigma_eval
        self.dopri5 = dopri5
        self.dense_eval = dense_eval
        self.phase_rotate = phase_rotate
        self.multiply_phase = multiply_phase

    def __repr__(self):
        return f"<kernels {self.name}>"


NUMPY_KERNELS = _KernelSet(
    "numpy", _sigma_eval, _dopri5, _dense_eval_numpy, _phase_rotate_numpy, _multiply_phase_numpy
)

if HAVE_NUMBA:
    _jit = numba.njit(cache=True)
    _sigma_eval_nb = _jit(_sigma_eval)

    # the integrator calls helpers by global name, so compile a namespace copy
    # in which those names resolve to jitted versions
    def _build_numba_dopri5():
        import types

        g = dict(globals())
        g["_sigma_eval"] = _sigma_eval_nb
        rhs = types.FunctionType(_rhs.__code__, g, "_rhs")
        g["_rhs"] = numba.njit(cache=True)(rhs)
        dopri = types.FunctionType(_dopri5.__code__, g, "_dopri5")
        return numba.njit(cache=True)(dopri)

    NUMBA_KERNELS = _KernelSet(
        "numba",
        _sigma_eval_nb,
        _build_numba_dopri5(),
        _jit(_dense_eval_loop),
        _jit(_phase_rotate_loop),
        _jit(_multiply_phase_loop),
    )
else:  # pragma: no cover
    NUMBA_KERNELS = None

KERNELS = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
