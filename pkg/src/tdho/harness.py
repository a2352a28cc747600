"""Experiment drivers, run persistence and parameter sweeps.

Every run writes into its own directory:

* ``status.json``  state (running/done), config digest, exit code
* ``result.json``  verdict, reason and scalar metrics
* ``summary.txt``  the same metrics as ``key=value`` lines
* experiment specific CSV / SVG files and trajectory directories

A run whose status says ``done`` for the same config digest is skipped
unless forced.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
import traceback

import numpy as np

from . import params as pw
from .classical import PowerLawSolution, SigmaModel, closed_form_lambda, extract_asymptotics, solve_zeta
from .config import EXPERIMENTS, RunConfig, parse_config, serialize
from .diagnostics import _bochner_from_norms, norm_report, x_T_norm
from .errors import (
    ConfigError,
    LambdaOutOfRange,
    NoContraction,
    NumericalError,
    TdhoError,
    ValidationError,
)
from .evolution import Trajectory, evolve, final_state_solve, from_moving, picard_solve
from .field import Field, Grid, lp_norm, read_snapshot
from .profile import ProfileSpec, gaussian, hat_w, u_p
from .transforms import resample

OUTPUT_ENV = "TDHO_OUTPUT_ROOT"

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def output_root():
    return os.environ.get(OUTPUT_ENV, "runs")


@dataclasses.dataclass
class RunResult:
    exit_code: int
    verdict: str  # PASS, FAIL, OK or ERROR
    reason: str = ""
    metrics: dict = dataclasses.field(default_factory=dict)
    skipped: bool = False

    def to_json(self):
        return {"exit_code": self.exit_code, "verdict": self.verdict, "reason": self.reason, "metrics": self.metrics}

    @classmethod
    def from_json(cls, d, skipped=False):
        return cls(d["exit_code"], d["verdict"], d.get("reason", ""), d.get("metrics", {}), skipped)


# ------------------------------------------------------------ builders


def build_sigma(cfg):
    s = cfg.sigma
    if s.kind == "zero":
        return SigmaModel.zero()
    if s.kind == "constant":
        return SigmaModel.constant(s.value)
    if s.kind == "inverse_square":
        return SigmaModel.inverse_square(s.sigma0, s.r0)
    if s.kind == "tabulated":
        knots = s.knots
        if s.knots_file is not None:
            knots = tuple(map(tuple, np.loadtxt(s.knots_file, delimiter=",", ndmin=2)[:, :2]))
        return SigmaModel.tabulated(knots)
    return None  # power law: exact pair, no sigma integration


def build_classical(cfg, t_max):
    if cfg.sigma.kind == "power_law":
        return PowerLawSolution(cfg.sigma.lam, cfg.sigma.c2)
    return solve_zeta(build_sigma(cfg), t_max, tol=cfg.classical.tol)


def classical_horizon(cfg):
    if cfg.classical.t_max is not None:
        return cfg.classical.t_max
    st = cfg.solver
    t_tr = st.t_truncate if st.t_truncate is not None else 100.0 * cfg.window.T
    return max(1e4, st.far_factor * cfg.window.t_end, t_tr)


def asymptotic_constants(cfg, cs):
    """(lambda, c2_plus, AsymptoticData or None); closed forms are used where they exist."""
    s = cfg.sigma
    if s.kind == "power_law":
        return s.lam, s.c2, None
    lo = cfg.classical.fit_lo if cfg.classical.fit_lo is not None else cs.t_max / 100.0
    hi = cfg.classical.fit_hi if cfg.classical.fit_hi is not None else cs.t_max
    ad = extract_asymptotics(cs, (lo, hi))
    if s.kind == "zero":
        return 0.0, 1.0, ad
    if s.kind == "inverse_square":
        return closed_form_lambda(s.sigma0), ad.c2_plus, ad
    return max(ad.lam, 0.0), ad.c2_plus, ad


def lambda_only(cfg):
    """Exponent for the parameter report, avoiding any integration when possible."""
    if cfg.parameters.lam is not None:
        return cfg.parameters.lam
    s = cfg.sigma
    if s.kind == "zero":
        return 0.0
    if s.kind == "power_law":
        return s.lam
    if s.kind == "inverse_square":
        return closed_form_lambda(s.sigma0)
    cs = build_classical(cfg, classical_horizon(cfg))
    return asymptotic_constants(cfg, cs)[0]


def build_u_plus_hat(cfg):
    p = cfg.profile
    if p.family == "snapshot":
        f = read_snapshot(p.file)
        if f.grid.n != p.n:
            raise ValidationError("profile.n", f"snapshot has dimension {f.grid.n}")
        return f
    grid = Grid.box((p.points,) * p.n, p.half_width)
    return gaussian(grid, p.amplitude, p.width)


def build_spec(cfg, lam, c2):
    return ProfileSpec(build_u_plus_hat(cfg), cfg.profile.mu, lam, c2)


def _report(cfg, n, lam):
    q = cfg.parameters
    return pw.parameter_report(n, lam, q.alpha, q.alpha_n)


def _geom_samples(T, t_end, per_decade):
    m = max(int(math.ceil(per_decade * math.log10(t_end / T))), 4)
    s = np.exp(np.linspace(math.log(T), math.log(t_end), m + 1))
    s[0], s[-1] = T, t_end
    return s


def _write(path, text):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _kv(metrics):
    return "".join(f"{k}={_fmt(v)}\n" for k, v in metrics.items())


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def _clean(v):
    # JSON-friendly scalars with stable text
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    return v


# ---------------------------------------------------------- experiments


def run_classical(cfg, out):
    t_max = classical_horizon(cfg)
    cs = build_classical(cfg, t_max)
    m = {"sigma_kind": cfg.sigma.kind, "t_max": float(t_max)}
    path = os.path.join(out, "classical.csv")
    if isinstance(cs, PowerLawSolution):
        ts = np.geomspace(1e-2, t_max, 400)
        z1, z2, d1, d2 = cs.at(ts)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "zeta1", "zeta2", "dzeta1", "dzeta2"])
        for row in zip(ts, z1, z2, d1, d2):
            w.writerow([repr(float(v)) for v in row])
        _write(path, buf.getvalue())
        m["wronskian_drift"] = 0.0
    else:
        cs.to_csv(path)
        m["steps"] = int(cs.times.size - 1)
        m["wronskian_drift"] = float(np.max(np.abs(cs.wronskian() - 1.0)))
    try:
        lam, c2, ad = asymptotic_constants(cfg, cs)
        m["lambda"] = float(lam)
        m["c2_plus"] = float(c2)
        if ad is not None:
            m["lambda_fit"] = ad.lam
            m["lambda_loglog"] = ad.lambda_loglog
            m["c1_plus"] = ad.c1_plus
            m["c3_plus"] = ad.c3_plus
            m["zeta1_growth"] = ad.zeta1_growth
            m["zeta1_bounded_by_t_lambda"] = bool(ad.assumption1_zeta1)
            for key, val in sorted(ad.fit_residuals.items()):
                m[f"fit_residual_{key}"] = float(val)
        if cfg.sigma.kind == "inverse_square":
            m["lambda_closed_form"] = closed_form_lambda(cfg.sigma.sigma0)
    except NumericalError as exc:
        m["asymptotics"] = f"unavailable: {type(exc).__name__}: {exc}"
    return RunResult(EXIT_OK, "OK", "", m)


def run_params(cfg, out):
    n = cfg.profile.n
    try:
        lam = lambda_only(cfg)
        rep = _report(cfg, n, lam)
    except LambdaOutOfRange as exc:
        _write(os.path.join(out, "params.txt"), f"admissible=false\nreason=inadmissible lambda: {exc}\n")
        return RunResult(EXIT_FAIL, "FAIL", f"inadmissible lambda: {exc}", {"n": n})
    _write(os.path.join(out, "params.txt"), rep.to_keyvalue())
    _write(os.path.join(out, "params.csv"), rep.to_csv())
    m = {k: v for k, v in rep.rows()}
    if rep.admissible:
        return RunResult(EXIT_OK, "PASS", "", m)
    failed = [k for k, ok in rep.verdicts.items() if not ok]
    return RunResult(EXIT_FAIL, "FAIL", "failed conditions: " + ", ".join(failed), m)


def _setup(cfg):
    cs = build_classical(cfg, classical_horizon(cfg))
    lam, c2, _ = asymptotic_constants(cfg, cs)
    return cs, lam, c2


def _weighted_parts(times, l2, lr, lam, b, beta_n):
    sup_part, int_part = [], []
    for k, t in enumerate(times):
        sup_part.append(t**b * _bochner_from_norms(times, l2, math.inf, lam, t))
        int_part.append(t ** (b - 2 * lam) * _bochner_from_norms(times, lr, beta_n, lam, t))
    return np.array(sup_part), np.array(int_part)


def _emit_norms(out, times, diffs, lab_diffs, lam, b, rep, title):
    l2 = np.array(diffs)
    lr = [lp_norm(f, rep.alpha_n) if math.isfinite(rep.alpha_n) else lp_norm(f, math.inf) for f in lab_diffs]
    sup_part, int_part = _weighted_parts(times, l2, lr, lam, b, rep.beta_n)
    nr = norm_report(times, l2, sup_part, int_part)
    _write(os.path.join(out, "norm_report.csv"), nr.to_csv())
    _write(os.path.join(out, "norm_report.svg"), nr.to_svg(title))
    xt = x_T_norm(Trajectory(times, lab_diffs), b, lam, rep.beta_n, rep.alpha_n, times[0])
    return nr, xt


def run_verify_theorem(cfg, out):
    n = cfg.profile.n
    try:
        lam = lambda_only(cfg)
        rep = _report(cfg, n, lam)
    except LambdaOutOfRange as exc:
        return RunResult(EXIT_FAIL, "FAIL", f"inadmissible lambda: {exc}", {"n": n})
    _write(os.path.join(out, "params.txt"), rep.to_keyvalue())
    m = {"n": n, "lambda": float(lam)}
    if not rep.admissible:
        failed = [k for k, ok in rep.verdicts.items() if not ok]
        return RunResult(EXIT_FAIL, "FAIL", "inadmissible parameters: " + ", ".join(failed), m)

    cs, lam_run, c2 = _setup(cfg)
    spec = build_spec(cfg, lam_run, c2)
    settings = cfg.solver_settings()
    T, t_end = cfg.window.T, cfg.window.t_end
    samples = _geom_samples(T, t_end, cfg.window.samples_per_decade)
    t_far = settings.far_factor * t_end
    traj, diffs = final_state_solve(spec, cs, T, settings, save_times=samples, t_far=t_far)
    keep = traj.times <= t_end * (1 + 1e-12)
    times = traj.times[keep]
    diffs = diffs[keep]
    lab = [from_moving(cs, t, g) for t, g in zip(times, [traj.fields[k] for k in np.flatnonzero(keep)])]
    lab_diffs = [from_moving(cs, t, g.with_values(g.values - hat_w(spec, t).values))
                 for t, g in zip(times, [traj.fields[k] for k in np.flatnonzero(keep)])]
    Trajectory(times, lab, {"frame": "lab"}).export(os.path.join(out, "trajectory"))

    lo, hi = rep.b_window_strict
    b = cfg.parameters.b if cfg.parameters.b is not None else 0.5 * (lo + hi)
    nr, xt = _emit_norms(out, times, diffs, lab_diffs, lam_run, b, rep, "final-state error ||u - u_p||_2")
    tol = cfg.verify.b_tolerance
    m.update({
        "lambda_used": float(lam_run),
        "c2_plus": float(c2),
        "mu": spec.mu,
        "amplitude_inf": float(np.max(np.abs(spec.u_plus_hat.values))),
        "T": T,
        "t_end": t_end,
        "t_far": float(t_far),
        "alpha": rep.alpha,
        "alpha_n": rep.alpha_n,
        "beta_n": rep.beta_n,
        "b_lo_eq16": rep.b_window_eq16[0],
        "b_lo_strict": lo,
        "b_hi": hi,
        "b_used": float(b),
        "b_est": nr.b_est,
        "fit_constant": nr.fitted_constant,
        "r_squared": nr.r_squared,
        "b_tolerance": tol,
        "x_T_norm": xt,
        "mass_drift": traj.meta["mass_drift"],
        "steps": traj.meta["steps"],
    })
    if spec.mu == 0:
        # linear case: u - u_p is the remainder alone and must shrink monotonically
        m["monotone_decrease"] = bool(np.all(np.diff(diffs) < 0))
        if not m["monotone_decrease"]:
            return RunResult(EXIT_FAIL, "FAIL", "linear-case error is not monotonically decreasing", m)
    if nr.b_est >= lo - tol:
        return RunResult(EXIT_OK, "PASS", "", m)
    return RunResult(EXIT_FAIL, "FAIL", f"b_est={nr.b_est:.4f} below b_lo_strict - tol = {lo - tol:.4f}", m)


def _lab_initial(cfg, cs, spec, T, t_end):
    """u_p(T) zero-padded onto a centered grid wide enough for the spreading up to t_end."""
    up = u_p(spec, cs, T)
    z_T = cs.at(T)[1]
    z_end = cs.at(t_end)[1]
    grow = 1.25 * abs(z_end / z_T)
    sizes = tuple(int(2 ** math.ceil(math.log2(s * grow))) for s in up.grid.sizes)
    grid = Grid.centered(sizes, up.grid.dx)
    v = np.zeros(sizes, dtype=complex)
    sl = tuple(slice((S - s) // 2, (S - s) // 2 + s) for S, s in zip(sizes, up.grid.sizes))
    v[sl] = up.values
    return Field(grid, v, T)


def run_evolve(cfg, out):
    cs, lam, c2 = _setup(cfg)
    spec = build_spec(cfg, lam, c2)
    settings = cfg.solver_settings()
    T, t_end = cfg.window.T, cfg.window.t_end
    samples = _geom_samples(T, t_end, cfg.window.samples_per_decade)
    if settings.frame == "moving":
        traj = evolve(hat_w(spec, T), T, t_end, settings, spec=spec, cs=cs, save_times=samples)
        diffs = np.array([np.linalg.norm(g.values - hat_w(spec, t).values) * math.sqrt(g.grid.cell_volume)
                          for t, g in zip(traj.times, traj.fields)])
        lab = [from_moving(cs, t, g) for t, g in zip(traj.times, traj.fields)]
    else:
        f0 = _lab_initial(cfg, cs, spec, T, t_end)
        traj = evolve(f0, T, t_end, settings, sigma=build_sigma(cfg) or PowerLawSolution(lam, c2).sigma,
                      spec=spec, save_times=samples)
        lab = traj.fields
        diffs = np.array([(f - resample(u_p(spec, cs, t), f.grid)).norm() for t, f in zip(traj.times, lab)])
    Trajectory(traj.times, lab, {"frame": "lab"}).export(os.path.join(out, "trajectory"))
    m = {"frame": settings.frame, "lambda": float(lam), "c2_plus": float(c2), "T": T, "t_end": t_end,
         "steps": traj.meta["steps"], "mass_drift": traj.meta["mass_drift"], "final_l2_diff": float(diffs[-1])}
    pos = diffs > 0
    try:
        nr = norm_report(traj.times[pos], diffs[pos])
        _write(os.path.join(out, "norm_report.csv"), nr.to_csv())
        _write(os.path.join(out, "norm_report.svg"), nr.to_svg("forward evolution ||u - u_p||_2"))
        m["fitted_slope"] = nr.fitted_slope
        m["r_squared"] = nr.r_squared
    except NumericalError as exc:
        m["fit"] = f"unavailable: {exc}"
    return RunResult(EXIT_OK, "OK", "", m)


def run_picard(cfg, out):
    cs, lam, c2 = _setup(cfg)
    spec = build_spec(cfg, lam, c2)
    settings = cfg.solver_settings()
    T = cfg.window.T
    m = {"lambda": float(lam), "c2_plus": float(c2), "mu": spec.mu, "T": T,
         "t_truncate": settings.truncation(T), "n_iter": cfg.picard.n_iter}
    try:
        traj, res = picard_solve(spec, cs, T, settings, cfg.picard.n_iter)
    except NoContraction as exc:
        return RunResult(EXIT_FAIL, "FAIL", f"no contraction: {exc}", m)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "residual", "ratio"])
    for k, r in enumerate(res):
        ratio = res[k] / res[k - 1] if k > 0 and res[k - 1] > 0 else math.nan
        w.writerow([k + 1, repr(float(r)), repr(float(ratio))])
    _write(os.path.join(out, "residuals.csv"), buf.getvalue())
    Trajectory(traj.times, traj.fields, {"frame": "lab"}).export(os.path.join(out, "trajectory"))
    ratios = [res[k] / res[k - 1] for k in range(1, len(res)) if res[k - 1] > 0]
    m["residuals"] = [float(r) for r in res]
    m["max_ratio"] = float(max(ratios)) if ratios else 0.0
    if all(r < 1.0 for r in ratios):
        return RunResult(EXIT_OK, "PASS", "", m)
    return RunResult(EXIT_FAIL, "FAIL", "residuals not monotonically decreasing", m)


RUNNERS = {
    "classical": run_classical,
    "params": run_params,
    "evolve": run_evolve,
    "verify_theorem": run_verify_theorem,
    "picard": run_picard,
}


# ---------------------------------------------------------- persistence


def config_digest(cfg):
    return hashlib.sha256(serialize(cfg).encode("utf-8")).hexdigest()


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, ValueError):
        return None


def _write_json(path, obj):
    _write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def execute(cfg, out, force=False):
    """Run one experiment with status bookkeeping; never raises TdhoError."""
    if cfg.experiment not in EXPERIMENTS:
        return RunResult(EXIT_CONFIG, "ERROR", "run.experiment is not set")
    os.makedirs(out, exist_ok=True)
    digest = config_digest(cfg)
    status_path = os.path.join(out, "status.json")
    result_path = os.path.join(out, "result.json")
    status = _read_json(status_path)
    if not force and status and status.get("state") == "done" and status.get("config_sha256") == digest:
        stored = _read_json(result_path)
        if stored is not None:
            return RunResult.from_json(stored, skipped=True)
    _write(os.path.join(out, "config.cfg"), serialize(cfg))
    _write_json(status_path, {"state": "running", "config_sha256": digest, "experiment": cfg.experiment})
    t0 = time.perf_counter()
    try:
        result = RUNNERS[cfg.experiment](cfg, out)
    except ConfigError as exc:
        result = RunResult(EXIT_CONFIG, "ERROR", f"{type(exc).__name__}: {exc}")
    except TdhoError as exc:
        result = RunResult(EXIT_NUMERICAL, "ERROR", f"{type(exc).__name__}: {exc}")
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        _write(os.path.join(out, "error.txt"), traceback.format_exc())
        result = RunResult(EXIT_NUMERICAL, "ERROR", f"unexpected {type(exc).__name__}: {exc}")
    result.metrics = {k: _clean(v) for k, v in result.metrics.items()}
    summary = {"experiment": cfg.experiment, "verdict": result.verdict, "exit_code": result.exit_code}
    if result.reason:
        summary["reason"] = result.reason
    summary.update(result.metrics)
    _write(os.path.join(out, "summary.txt"), _kv(summary))
    _write_json(result_path, result.to_json())
    _write_json(status_path, {
        "state": "done" if result.exit_code in (EXIT_OK, EXIT_FAIL) else "failed",
        "config_sha256": digest,
        "experiment": cfg.experiment,
        "exit_code": result.exit_code,
        "wall_seconds": round(time.perf_counter() - t0, 3),
    })
    return result


# ---------------------------------------------------------------- sweep

AGGREGATE_HEADER = ["run", "parameter", "value", "experiment", "lambda", "alpha", "b_lo_strict", "b_hi",
                    "b_est", "verdict", "exit_code", "reason"]


def sweep_configs(base):
    """One config per sweep value, or an empty list when no values are given."""
    sw = base.sweep
    if not sw.values:
        return []
    if sw.parameter is None:
        raise ValidationError("sweep.parameter", "required when sweep.values is given")
    return [base.with_value(sw.parameter, v) for v in sw.values]


def _sweep_task(args):
    index, text, out, force = args
    cfg = parse_config(text)
    res = execute(cfg, out, force)
    return index, res.to_json()


def _agg_value(metrics, *keys):
    for k in keys:
        if k in metrics:
            return _fmt(metrics[k])
    return ""


def run_sweep(base, out, workers=1, force=False):
    """Execute every sweep run and write aggregate.csv (rows in run order) plus sweep_status.json."""
    cfgs = sweep_configs(base)
    os.makedirs(out, exist_ok=True)
    tasks = [(i, serialize(c), os.path.join(out, f"run_{i:03d}"), force) for i, c in enumerate(cfgs)]
    results = {}
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            i, r = _sweep_task(t)
            results[i] = r
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            for i, r in ex.map(_sweep_task, tasks):
                results[i] = r
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for i, v in enumerate(base.sweep.values):
        r = results[i]
        mt = r["metrics"]
        w.writerow([
            i, base.sweep.parameter, repr(float(v)), base.experiment,
            _agg_value(mt, "lambda_used", "lambda"), _agg_value(mt, "alpha"), _agg_value(mt, "b_lo_strict"),
            _agg_value(mt, "b_hi"), _agg_value(mt, "b_est"), r["verdict"], r["exit_code"], r["reason"],
        ])
    _write(os.path.join(out, "aggregate.csv"), buf.getvalue())
    codes = [results[i]["exit_code"] for i in range(len(tasks))]
    _write_json(os.path.join(out, "sweep_status.json"), {
        "state": "done",
        "runs": [{"run": i, "exit_code": c, "verdict": results[i]["verdict"]} for i, c in enumerate(codes)],
    })
    if any(c in (EXIT_CONFIG, EXIT_NUMERICAL) for c in codes):
        return max(c for c in codes if c != EXIT_FAIL)
    return EXIT_FAIL if EXIT_FAIL in codes else EXIT_OK


__all__ = ["RunConfig", "RunResult", "execute", "run_sweep", "sweep_configs", "output_root", "OUTPUT_ENV"]
