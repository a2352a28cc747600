"""Time splitting for the nonlinear oscillator equation, remainder integrals and
the backward Duhamel fixed point.

Two state representations are supported:

* ``lab``: u(t, x) itself on a fixed position grid.
* ``moving``: g(t, xi) with u = M(z2/z2') D(z2) g.  The linear spreading is
  absorbed by the frame, so g stays on the fixed frequency grid of the
  profile.  g obeys  i g_t = -Lap g / (2 z2^2) + z2^(-kappa) mu |g|^rho g,
  and ||u - u_p|| = ||g - w_hat|| exactly.

Both use the symmetric Strang composition kinetic(h/2) . phase(h) . kinetic(h/2)
with the phase substep solved exactly.
"""
from __future__ import annotations

import csv
import dataclasses
import functools
import math
import os
import warnings
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np
import scipy.fft

from ._kernels import KERNELS
from .errors import MassDrift, NoContraction, NonFinite, OutOfRange, QuadratureFailure
from .field import Field, write_snapshot, lp_norm
from .profile import hat_w, nonlinearity_values
from .transforms import _chirp, _factor_params, dilate, fourier, inverse_fourier, mdfm_propagator, undilate

_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


@dataclass(frozen=True)
class SolverSettings:
    dt_initial: float = 1e-3
    dt_control: str = "fixed"  # or "proportional": dt = dt_initial * t / t_start
    mass_tol: float = 1e-10
    quadrature: str = "simpson"  # or "trapezoid"
    t_truncate: float | None = None  # None -> 100 * starting time
    frame: str = "lab"  # or "moving"
    nodes_per_decade: int = 48
    far_factor: float = 100.0
    rel_step: float = 2e-3  # dt / t for the backward final-state march

    def __post_init__(self):
        checks = {
            "dt_initial": self.dt_initial > 0 and math.isfinite(self.dt_initial),
            "dt_control": self.dt_control in ("fixed", "proportional"),
            "mass_tol": self.mass_tol > 0,
            "quadrature": self.quadrature in ("simpson", "trapezoid"),
            "t_truncate": self.t_truncate is None or self.t_truncate > 0,
            "frame": self.frame in ("lab", "moving"),
            "nodes_per_decade": self.nodes_per_decade >= 4,
            "far_factor": self.far_factor > 1,
            "rel_step": 0 < self.rel_step < 0.5,
        }
        for key, ok in checks.items():
            if not ok:
                raise OutOfRange(f"invalid solver setting {key}={getattr(self, key)!r}")

    def truncation(self, t_start):
        t_tr = 100.0 * t_start if self.t_truncate is None else self.t_truncate
        if not t_tr > t_start:
            raise OutOfRange(f"t_truncate={t_tr} must exceed the starting time {t_start}")
        return t_tr


@dataclass
class Trajectory:
    """Snapshots in increasing time order plus solver metadata."""

    times: np.ndarray
    fields: list
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size != len(self.fields):
            raise ValueError("times and fields differ in length")
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.fields)

    def norms(self):
        return np.array([f.norm() for f in self.fields])

    def lab_field(self, k, cs):
        """Field k in the lab frame (identity for lab-frame trajectories)."""
        f = self.fields[k]
        if self.meta.get("frame", "lab") == "lab":
            return f
        return from_moving(cs, self.times[k], f)

    def export(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "index.csv"), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "t", "l2_norm", "linf_norm"])
            for k, (t, f) in enumerate(zip(self.times, self.fields)):
                write_snapshot(os.path.join(directory, f"snap_{k:05d}.tdho"), f)
                w.writerow([k, repr(float(t)), repr(f.norm()), repr(lp_norm(f, math.inf))])


# ---------------------------------------------------------------- substeps


@functools.lru_cache(maxsize=32)
def _k2(grid):
    out = np.zeros(grid.sizes)
    for a, (s, d) in enumerate(zip(grid.sizes, grid.dx)):
        k = 2.0 * math.pi * np.fft.fftfreq(s, d)
        shape = [1] * grid.n
        shape[a] = s
        out = out + (k**2).reshape(shape)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=16)
def _kinetic_factor(grid, theta):
    return np.exp(-0.5j * theta * _k2(grid))


def kinetic(values, grid, theta):
    """Spectral multiplier exp(-i theta |k|^2 / 2) on the periodic box of ``grid``."""
    return scipy.fft.ifftn(scipy.fft.fftn(values) * _kinetic_factor(grid, float(theta)))


def _phase(values, grid, quad, nl, rho):
    return KERNELS.phase_rotate(np.ascontiguousarray(values), grid.r2(), float(quad), float(nl), float(rho))


def _lab_step(v, grid, t, dt, sigma, mu, rho):
    v = kinetic(v, grid, 0.5 * dt)
    s = float(sigma(t + 0.5 * dt))
    v = _phase(v, grid, s * dt, mu * dt, rho)
    return kinetic(v, grid, 0.5 * dt)


def _gl(fun, a, b):
    half = 0.5 * (b - a)
    return half * float(np.dot(_GL_W, fun(0.5 * (a + b) + half * _GL_X)))


def _moving_coeffs(cs, t, h, kappa):
    inv2 = lambda s: cs.at(s)[1] ** -2.0
    th1 = _gl(inv2, t, t + 0.5 * h)
    th2 = _gl(inv2, t + 0.5 * h, t + h)
    phi = _gl(lambda s: np.abs(cs.at(s)[1]) ** -kappa, t, t + h)
    return th1, th2, phi


def _moving_step(v, grid, t, h, cs, mu, rho, kappa):
    th1, th2, phi = _moving_coeffs(cs, t, h, kappa)
    v = kinetic(v, grid, th1)
    v = _phase(v, grid, 0.0, mu * phi, rho)
    return kinetic(v, grid, th2)


def step_strang(f, t, dt, sigma, spec):
    """One lab-frame Strang step of length dt > 0 starting at t."""
    if not dt > 0:
        raise OutOfRange("dt must be positive")
    mu, rho = (0.0, 2.0) if spec is None else (spec.mu, spec.rho)
    v = _lab_step(f.values, f.grid, t, dt, sigma, mu, rho)
    if not np.all(np.isfinite(v)):
        raise NonFinite(f"non-finite field after step at t={t}")
    return f.with_values(v, time_tag=t + dt)


# ------------------------------------------------------------ frame maps


def to_moving(cs, t, u):
    """g = D(z2)^-1 M(z2/z2')^-1 u."""
    _, z2, _, dz2 = _factor_params(cs, t)
    return undilate(_chirp(u, -dz2 / z2), z2).tagged(t)


def from_moving(cs, t, g):
    _, z2, _, dz2 = _factor_params(cs, t)
    return _chirp(dilate(g, z2), dz2 / z2).tagged(t)


# ------------------------------------------------------------- marching


def _segment_steps(t_a, t_b, settings, t_ref):
    """Step sizes covering [t_a, t_b] (either direction), landing exactly on t_b."""
    span = t_b - t_a
    sign = 1.0 if span > 0 else -1.0
    steps = []
    t = t_a
    while sign * (t_b - t) > 1e-14 * max(abs(t_b), 1.0):
        if settings.dt_control == "fixed":
            dt = settings.dt_initial
        else:
            dt = settings.dt_initial * abs(t) / abs(t_ref)
        remaining = abs(t_b - t)
        n_left = math.ceil(remaining / dt - 1e-9)
        dt = remaining / max(n_left, 1)
        steps.append(sign * dt)
        t = t + sign * dt
        if n_left <= 1:
            break
    return steps


def evolve(f0, t0, t1, settings, sigma=None, spec=None, cs=None, save_times=None):
    """March f0 from t0 to t1 (t1 < t0 runs backward).

    Lab frame: needs ``sigma`` (a SigmaModel); f0 is u(t0) on a position grid.
    Moving frame: needs ``cs``; f0 is g(t0) on the profile's frequency grid.
    Snapshots are stored at t0, t1 and every entry of save_times between them.
    """
    if t1 == t0:
        raise OutOfRange("t1 must differ from t0")
    if t0 < 0 or t1 < 0:
        raise OutOfRange("times must be nonnegative")
    if settings.dt_control == "proportional" and min(t0, t1) <= 0:
        raise OutOfRange("proportional dt control needs t > 0")
    moving = settings.frame == "moving"
    if moving and cs is None:
        raise OutOfRange("moving frame needs a classical solution")
    if not moving and sigma is None:
        raise OutOfRange("lab frame needs a sigma model")
    mu, rho = (0.0, 2.0) if spec is None else (spec.mu, spec.rho)
    kappa = 1.0 if spec is None else spec.kappa

    lo, hi = min(t0, t1), max(t0, t1)
    marks = {float(t1)}
    eps = 1e-12 * hi
    for s in (() if save_times is None else save_times):
        if lo + eps < s < hi - eps:
            marks.add(float(s))
    marks = sorted(marks, reverse=bool(t1 < t0))

    grid = f0.grid
    v = np.ascontiguousarray(f0.values)
    m0 = math.sqrt(float(np.vdot(v, v).real))
    times, fields = [float(t0)], [f0.tagged(t0)]
    drift = 0.0
    n_steps = 0
    t = float(t0)
    for mark in marks:
        for h in _segment_steps(t, mark, settings, t0):
            if moving:
                v = _moving_step(v, grid, t, h, cs, mu, rho, kappa)
            else:
                v = _lab_step(v, grid, t, h, sigma, mu, rho)
            t += h
            n_steps += 1
            m = math.sqrt(float(np.vdot(v, v).real))
            if not math.isfinite(m) or not np.all(np.isfinite(v)):
                raise NonFinite(f"non-finite field at t={t}")
            drift = max(drift, abs(m - m0))
            if drift > settings.mass_tol * m0:
                raise MassDrift(f"mass drift {drift / m0:.3e} exceeds mass_tol at t={t}")
        t = mark
        times.append(mark)
        fields.append(Field(grid, v.copy(), mark))
    if t1 < t0:
        times.reverse()
        fields.reverse()
    meta = {
        "frame": settings.frame,
        "settings": asdict(settings),
        "steps": n_steps,
        "mass_drift": drift / m0 if m0 > 0 else 0.0,
    }
    return Trajectory(np.array(times), fields, meta)


def final_state_solve(spec, cs, t_end, settings, save_times=None, t_far=None):
    """Solution with prescribed large-time behaviour u_p, traced back to t_end.

    Starts from g(t_far) = w_hat(t_far) in the moving frame and marches
    backward with steps dt = settings.rel_step * t.  Returns the moving-frame trajectory on
    [t_end, t_far] and ||u - u_p|| = ||g - w_hat|| at each stored time.
    """
    t_far = settings.far_factor * t_end if t_far is None else t_far
    if not t_far > t_end > 0:
        raise OutOfRange("need t_far > t_end > 0")
    local = dataclasses.replace(
        settings, dt_initial=settings.rel_step * t_far, dt_control="proportional", frame="moving"
    )
    traj = evolve(hat_w(spec, t_far), t_far, t_end, local, spec=spec, cs=cs, save_times=save_times)
    diffs = np.array([np.linalg.norm(f.values - hat_w(spec, t).values) * math.sqrt(f.grid.cell_volume)
                      for t, f in zip(traj.times, traj.fields)])
    traj.meta["t_far"] = t_far
    return traj, diffs


# ----------------------------------------------------------- quadrature


def time_nodes(t, t_tr, per_decade):
    """Geometric nodes t = s_0 < ... < s_M = t_tr with M even."""
    m = max(int(math.ceil(per_decade * math.log10(t_tr / t))), 2)
    m += m % 2
    s = np.exp(np.linspace(math.log(t), math.log(t_tr), m + 1))
    s[0], s[-1] = t, t_tr
    return s


def _weights(nodes, rule):
    """Weights for integral over [s_0, s_M] in the log variable (includes ds = s du)."""
    m = nodes.size - 1
    du = math.log(nodes[-1] / nodes[0]) / m
    if rule == "trapezoid":
        w = np.full(m + 1, du)
        w[0] = w[-1] = 0.5 * du
    else:
        w = np.zeros(m + 1)
        w[0:-1:2] += du / 3.0
        w[1::2] += 4.0 * du / 3.0
        w[2::2] += du / 3.0
    return w * nodes


def _cumulative_weights(nodes, rule):
    """W[i, j]: weight of f(s_j) in the integral from s_i to s_M."""
    m = nodes.size - 1
    du = math.log(nodes[-1] / nodes[0]) / m
    seg = np.zeros((m, m + 1))  # seg[i] integrates [s_i, s_{i+1}]
    for i in range(m):
        if rule == "trapezoid" or m < 2:
            seg[i, i] += 0.5 * du
            seg[i, i + 1] += 0.5 * du
        elif i + 2 <= m:
            seg[i, i] += 5 * du / 12
            seg[i, i + 1] += 8 * du / 12
            seg[i, i + 2] -= du / 12
        else:
            seg[i, i - 1] -= du / 12
            seg[i, i] += 8 * du / 12
            seg[i, i + 1] += 5 * du / 12
    cum = np.zeros((m + 1, m + 1))
    for i in range(m - 1, -1, -1):
        cum[i] = cum[i + 1] + seg[i]
    return cum * nodes[None, :]


@dataclass
class RemainderResult:
    field: Field
    tail: float
    quad_error: float


def _integrate(stack, w):
    out = np.tensordot(w, stack, axes=(0, 0))
    if not np.all(np.isfinite(out)):
        raise QuadratureFailure("non-finite quadrature result")
    return out


def _x_grid(spec):
    return spec.u_plus_hat.grid.dual()


def _kappa_tail_exponent(lam):
    # an O(s^lam) correction in zeta2 leaves |c+ s z2^-kappa - 1| ~ s^(2 lam - 1)
    return 1.0 - 2.0 * lam


def remainder_A(spec, cs, t, settings, nodes=None):
    """i U0(t,0) F^-1 int_t^t_tr (z2^-kappa - 1/(c+ s)) F(w_hat(s)) ds.

    Returns the lab-frame field with a tail estimate for the truncated range
    and an estimate of the quadrature error.
    """
    pre, tail, qerr = _remainder_A_pre(spec, cs, t, settings, nodes)
    field = mdfm_propagator(cs, t, pre)
    return RemainderResult(field, tail, qerr)


def _remainder_A_pre(spec, cs, t, settings, nodes=None):
    t_tr = settings.truncation(t)
    s = time_nodes(t, t_tr, settings.nodes_per_decade) if nodes is None else nodes
    z2 = cs.at(s)[1]
    coef = np.abs(z2) ** -spec.kappa - 1.0 / (spec.c_plus * s)
    u0 = spec.u_plus_hat.values
    stack = np.stack([coef[j] * nonlinearity_values(hat_w(spec, sj).values, spec.mu, spec.rho)
                      for j, sj in enumerate(s)])
    vals = _integrate(stack, _weights(s, settings.quadrature))
    qerr = _qerr(stack, s, settings.quadrature, spec)
    pre = inverse_fourier(spec.u_plus_hat.with_values(1j * vals))
    # |c+ s z2^-kappa - 1| ~ C s^-q beyond t_tr; integrate the bound
    q = _kappa_tail_exponent(spec.lam)
    r_end = abs(coef[-1]) * spec.c_plus * s[-1]
    fnorm = np.linalg.norm(nonlinearity_values(u0, spec.mu, spec.rho)) * math.sqrt(spec.u_plus_hat.grid.cell_volume)
    tail = r_end * fnorm / (spec.c_plus * q)
    return pre, tail, qerr


def _qerr(stack, s, rule, spec):
    """Distance between the rule on all nodes and on every other node (nan if too few)."""
    if s.size < 5 or (s.size - 1) % 4 != 0:
        return math.nan
    fine = _integrate(stack, _weights(s, rule))
    coarse = _integrate(stack[::2], _weights(s[::2], rule))
    return float(np.linalg.norm(fine - coarse) * math.sqrt(spec.u_plus_hat.grid.cell_volume))


def _m2_inv(cs, s, xgrid):
    # exp(-i |x|^2 z1 / (2 z2)) on the position grid
    z1, z2, _, _ = _factor_params(cs, s)
    return np.exp(-0.5j * (z1 / z2) * xgrid.r2())


def _remainder_E_pre(spec, cs, t, settings, nodes=None):
    """Position-grid field E0 with E(t) = U0(t,0) E0, plus tail and quadrature estimates."""
    t_tr = settings.truncation(t)
    s = time_nodes(t, t_tr, settings.nodes_per_decade) if nodes is None else nodes
    xg = _x_grid(spec)
    z2 = np.abs(cs.at(s)[1])
    stack = []
    for j, sj in enumerate(s):
        fw = inverse_fourier(spec.u_plus_hat.with_values(
            nonlinearity_values(hat_w(spec, sj).values, spec.mu, spec.rho)))
        stack.append((1.0 - _m2_inv(cs, sj, xg)) * fw.values * z2[j] ** -spec.kappa)
    stack = np.stack(stack)
    integral = _integrate(stack, _weights(s, settings.quadrature))
    qerr = _qerr(stack, s, settings.quadrature, spec)
    # R(t) w_hat(t) in the same representation: (1 - M2(t)^-1) F^-1 w_hat(t)
    w0 = inverse_fourier(hat_w(spec, t))
    first = (1.0 - _m2_inv(cs, t, xg)) * w0.values
    pre = Field(xg, first - 1j * integral, 0.0)
    # beyond t_tr the integrand is bounded by 2 |F(u+)| z2^-kappa ~ s^-1 weighted by |1 - M2^-1|
    last = np.linalg.norm(stack[-1]) * math.sqrt(xg.cell_volume) * s[-1]
    tail = last / _kappa_tail_exponent(spec.lam) if spec.mu != 0 else 0.0
    return pre, tail, qerr


def remainder_E(spec, cs, t, settings, nodes=None):
    """R(t) w_hat(t) - i int_t^t_tr U0(t,s) R(s) F(w_hat(s)) z2(s)^-kappa ds, in the lab frame."""
    pre, tail, qerr = _remainder_E_pre(spec, cs, t, settings, nodes)
    return RemainderResult(mdfm_propagator(cs, t, pre), tail, qerr)


# ---------------------------------------------------------------- Picard


def picard_solve(spec, cs, T, settings, n_iter, tol=0.0):
    """Fixed-point iteration for the truncated backward Duhamel equation on [T, t_truncate].

    The iterate is held in the interaction picture a(t) = U0(t,0)^-1 u(t) on
    geometric time nodes, so every U0(t,s) becomes a pointwise product.
    Returns the lab-frame trajectory at the nodes and the successive
    sup-in-time L2 distances between iterates.
    """
    if n_iter < 1:
        raise OutOfRange("n_iter must be at least 1")
    amp = float(np.max(np.abs(spec.u_plus_hat.values)))
    if amp > 0.5:
        warnings.warn(f"|u_plus_hat|_inf = {amp:.3g} is not small; contraction may fail", stacklevel=2)
    t_tr = settings.truncation(T)
    s = time_nodes(T, t_tr, settings.nodes_per_decade)
    xg = _x_grid(spec)
    dv = math.sqrt(xg.cell_volume)
    cum = _cumulative_weights(s, settings.quadrature)
    z2 = np.abs(cs.at(s)[1])
    zk = z2**-spec.kappa
    m2inv = [_m2_inv(cs, sj, xg) for sj in s]
    w = [hat_w(spec, sj) for sj in s]
    a_p = np.stack([m2inv[j] * inverse_fourier(w[j]).values for j in range(s.size)])

    # fixed terms: E and A in the interaction picture
    fw_x = np.stack([inverse_fourier(w[j].with_values(nonlinearity_values(w[j].values, spec.mu, spec.rho))).values
                     for j in range(s.size)])
    e_int = np.stack([(1.0 - m2inv[j]) * fw_x[j] * zk[j] for j in range(s.size)])
    a_int = np.stack([(zk[j] - 1.0 / (spec.c_plus * s[j])) * fw_x[j] for j in range(s.size)])
    r_first = np.stack([(1.0 - m2inv[j]) * inverse_fourier(w[j]).values for j in range(s.size)])
    e_terms = r_first - 1j * np.tensordot(cum, e_int, axes=(1, 0))
    a_terms = 1j * np.tensordot(cum, a_int, axes=(1, 0))
    base = a_p + e_terms + a_terms

    fwhat = np.stack([nonlinearity_values(w[j].values, spec.mu, spec.rho) for j in range(s.size)])

    def duhamel(a):
        integrand = np.empty_like(a)
        for j in range(s.size):
            g = fourier(Field(xg, np.conj(m2inv[j]) * a[j]), w[j].grid).values
            diff = nonlinearity_values(g, spec.mu, spec.rho) - fwhat[j]
            integrand[j] = zk[j] * m2inv[j] * inverse_fourier(w[j].with_values(diff)).values
        return 1j * np.tensordot(cum, integrand, axes=(1, 0))

    a = a_p
    residuals = []
    rises = 0
    for _ in range(n_iter):
        nxt = base + duhamel(a)
        if not np.all(np.isfinite(nxt)):
            raise NonFinite("Picard iterate became non-finite")
        r = float(np.max(np.linalg.norm(nxt.reshape(s.size, -1) - a.reshape(s.size, -1), axis=1)) * dv)
        a = nxt
        if residuals and r >= residuals[-1] and r > 1e-14 * max(residuals[0], 1e-300):
            rises += 1
            if rises >= 2:
                residuals.append(r)
                raise NoContraction(f"Picard residuals stopped decreasing: {residuals}")
        else:
            rises = 0
        residuals.append(r)
        if r <= tol:
            break

    fields = [mdfm_propagator(cs, sj, Field(xg, a[j])) for j, sj in enumerate(s)]
    traj = Trajectory(s, fields, {"frame": "lab", "t_truncate": t_tr, "interaction": a, "x_grid": xg})
    return traj, residuals


def interaction_to_moving(cs, t, a, xgrid, kgrid):
    """g = F M2(t) a, the moving-frame state of the interaction-picture value a."""
    return fourier(Field(xgrid, np.conj(_m2_inv(cs, t, xgrid)) * a), kgrid).tagged(t)
