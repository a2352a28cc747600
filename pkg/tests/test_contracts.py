"""Worked examples attached to each operation's contract."""
import cmath
import math

import numpy as np
import pytest

from oracles import matched_inverse_square
from tdho import (Field, Grid, PowerLawSolution, ProfileSpec, R_op, SigmaModel, SolverSettings, Trajectory,
                  admissible_pair, alpha_max, b_window, closed_form_lambda, cubic_ledger, dilate, evolve,
                  extract_asymptotics, fit_decay_rate, gaussian, hat_w, lambda_threshold, lp_norm,
                  mdfm_between, modulate, nonlinearity, picard_solve, remainder_A, remainder_E, resample,
                  sobolev_norm, solve_zeta, strichartz_ratio, u_p, weighted_bochner_norm, x_T_norm, zeta_at)
from tdho.errors import ZeroTau
from tdho.evolution import interaction_to_moving
from tdho.params import POLYNOMIALS, default_alpha
from tdho.transforms import free_multiplier


def _gauss(grid, w=1.0):
    return Field(grid, np.exp(-grid.r2() / (2 * w * w)))


# ------------------------------------------------------------ classical flow


def test_zeta_at_examples(inv_sq_solution):
    cs0 = solve_zeta(SigmaModel.zero(), 10.0)
    assert np.allclose(zeta_at(cs0, 3.5), (1.0, 3.5, 0.0, 1.0), atol=1e-12)
    rng = np.random.default_rng(7)
    t = rng.uniform(0, inv_sq_solution.t_max, 1000)
    z1, z2, d1, d2 = zeta_at(inv_sq_solution, t)
    assert np.max(np.abs(z1 * d2 - d1 * z2 - 1.0)) <= 10 * inv_sq_solution.tol
    want = matched_inverse_square(0.09, 1.0, 100.0)[1]
    assert abs(zeta_at(inv_sq_solution, 100.0)[1] / want - 1) < 1e-6


def test_free_asymptotics_and_closed_forms():
    ad = extract_asymptotics(solve_zeta(SigmaModel.zero(), 1e3), (10.0, 1e3))
    assert ad.lam == pytest.approx(0.0, abs=1e-9)
    assert ad.c2_plus == pytest.approx(1.0) and ad.c1_plus == pytest.approx(1.0)
    assert closed_form_lambda(3 / 16) == pytest.approx(0.25, abs=1e-15)
    assert closed_form_lambda(1e-12) == pytest.approx(0.0, abs=1e-11)


# --------------------------------------------------------------- transforms


def test_modulation_algebra():
    f = _gauss(Grid.box((64,), 6.0))
    assert np.allclose(modulate(modulate(f, 0.7), 0.7).values, modulate(f, 0.35).values, atol=1e-14)
    assert np.allclose(modulate(modulate(f, 0.7), -0.7).values, f.values, atol=1e-15)
    with pytest.raises(ZeroTau):
        modulate(f, 0.0)


def test_dilation_phase_and_composition():
    g1 = Grid.box((16,), 2.0)
    f1 = _gauss(g1)
    assert np.allclose(dilate(f1, 1.0).values, f1.values * cmath.exp(-0.25j * math.pi))
    g2 = Grid.box((8, 8), 2.0)
    f2 = _gauss(g2)
    d = dilate(f2, 1.0)
    assert d.grid == g2 and np.allclose(d.values, -1j * f2.values)
    a = dilate(dilate(f1, 2.0), 3.0)
    b = dilate(f1, 6.0)
    assert np.allclose(a.grid.dx, b.grid.dx) and np.allclose(a.grid.x_min, b.grid.x_min)
    ratio = a.values / b.values
    assert np.allclose(ratio, ratio[0]) and abs(abs(ratio[0]) - 1) < 1e-14
    with pytest.raises(ZeroTau):
        dilate(f1, 0.0)


def test_lp_scaling_under_dilation():
    f = _gauss(Grid.box((64,), 6.0))
    for p in (2.0, 3.0, 4.0, math.inf):
        want = 2.5 ** (-(0.5 - (0.0 if math.isinf(p) else 1 / p))) * lp_norm(f, p)
        assert lp_norm(dilate(f, 2.5), p) == pytest.approx(want, rel=1e-13)


def test_mdfm_between_identities(inv_sq_solution):
    f = _gauss(Grid.box((128,), 10.0))
    same = mdfm_between(inv_sq_solution, 5.0, 5.0, f)
    assert np.allclose(same.grid.dx, f.grid.dx) and np.max(np.abs(same.values - f.values)) < 1e-12
    two = mdfm_between(inv_sq_solution, 9.0, 4.0, mdfm_between(inv_sq_solution, 4.0, 2.0, f))
    one = mdfm_between(inv_sq_solution, 9.0, 2.0, f)
    assert np.max(np.abs(two.values - one.values)) < 1e-10
    g = Grid.box((1024,), 40.0)
    h = _gauss(g)
    cs0 = solve_zeta(SigmaModel.zero(), 10.0)
    got = resample(mdfm_between(cs0, 5.0, 2.0, h), g)
    assert (got - free_multiplier(h, 3.0)).norm() < 1e-10


# ------------------------------------------------------------------ profile


def test_nonlinearity_examples():
    g = Grid.box((8,), 1.0)
    spec = ProfileSpec(Field(g, np.ones(8)), 1.0, 0.0)
    assert np.all(nonlinearity(Field(g, np.zeros(8)), spec).values == 0)
    assert np.allclose(nonlinearity(Field(g, np.full(8, 2.0)), spec).values, 8.0)
    rng = np.random.default_rng(3)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    assert np.allclose(np.abs(nonlinearity(Field(g, v), spec).values), np.abs(v) ** 3)


def test_hat_w_solves_the_phase_ode():
    spec = ProfileSpec(gaussian(Grid.box((128,), 8.0), 0.5), 2.0, 0.1)
    assert np.array_equal(hat_w(spec, 1.0).values, spec.u_plus_hat.values)
    h = 1e-3
    worst = 0.0
    for t in np.geomspace(2.0, 100.0, 15):
        lhs = 1j * (hat_w(spec, t + h).values - hat_w(spec, t - h).values) / (2 * h)
        rhs = nonlinearity(hat_w(spec, t), spec).values / (spec.c_plus * t)
        worst = max(worst, np.linalg.norm(lhs - rhs) * math.sqrt(spec.u_plus_hat.grid.cell_volume))
    assert worst <= 1e-5 * spec.u_plus_hat.norm()


def test_u_p_sup_bound_and_free_closed_form():
    spec = ProfileSpec(gaussian(Grid.box((128,), 8.0), 0.05), 0.01, 0.0)
    cs = PowerLawSolution(0.0)
    for t in (3.0, 30.0):
        up = u_p(spec, cs, t)
        w = hat_w(spec, t)
        x2 = up.grid.r2()
        want = (1j * t) ** -0.5 * np.exp(1j * x2 / (2 * t)) * w.values
        assert np.max(np.abs(up.values - want)) < 1e-15
        assert lp_norm(up, math.inf) <= t**-0.5 * lp_norm(spec.u_plus_hat, math.inf) * (1 + 1e-14)


def test_R_op_decays_in_the_free_case():
    cs = solve_zeta(SigmaModel.zero(), 2e3)
    g = gaussian(Grid.box((256,), 10.0), 1.0)
    norms = [R_op(cs, t, g).norm() for t in (10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0)]
    assert np.all(np.diff(norms) < 0)


# ---------------------------------------------------------------- evolution


def test_linear_lab_evolution_matches_mdfm(inv_sq_solution):
    sig = SigmaModel.inverse_square(0.09, 1.0)
    g = Grid.box((2048,), 60.0)
    f2 = _gauss(g).tagged(2.0)
    ref = resample(mdfm_between(inv_sq_solution, 8.0, 2.0, f2), g)
    runs = [evolve(f2, 2.0, 8.0, SolverSettings(dt_initial=dt), sigma=sig).fields[-1] for dt in (2e-3, 1e-3)]
    assert (runs[1] - ref).norm() <= 1e-6
    extrapolated = runs[1].with_values((4 * runs[1].values - runs[0].values) / 3)
    assert (extrapolated - ref).norm() <= 1e-8


def test_homogeneous_data_rotate_exactly():
    g = Grid.box((32,), 4.0)
    u0 = Field(g, np.full(32, 0.7 + 0.2j))
    spec = ProfileSpec(u0, 1.5, 0.0)
    tr = evolve(u0, 0.0, 2.0, SolverSettings(dt_initial=0.1), sigma=SigmaModel.zero(), spec=spec)
    want = u0.values * np.exp(-1j * 1.5 * abs(0.7 + 0.2j) ** 2 * 2.0)
    assert np.max(np.abs(tr.fields[-1].values - want)) < 1e-13


def test_remainder_A_free_case_and_decay_rate(inv_sq_solution):
    st = SolverSettings()
    spec0 = ProfileSpec(gaussian(Grid.box((128,), 8.0), 0.05), 0.01, 0.0)
    cs0 = solve_zeta(SigmaModel.zero(), 1e4)
    assert remainder_A(spec0, cs0, 10.0, st).field.norm() < 1e-14 * spec0.u_plus_hat.norm()
    # the O(t^lam) correction of zeta2 sets the decay: |A(t)| ~ t^(2 lam - 1)
    cs = solve_zeta(SigmaModel.inverse_square(0.09, 1.0), 1e5)
    ad = extract_asymptotics(cs, (1e2, 1e4))
    spec = ProfileSpec(gaussian(Grid.box((128,), 8.0), 0.05), 0.01, ad.lam, ad.c2_plus)
    ts = np.array([10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0])
    norms = [remainder_A(spec, cs, t, st).field.norm() for t in ts]
    _, b, _ = fit_decay_rate(ts, norms)
    assert b == pytest.approx(1 - 2 * ad.lam, abs=0.02)


def test_remainder_E_linear_case_and_decay():
    st = SolverSettings()
    cs = PowerLawSolution(0.1)
    spec = ProfileSpec(gaussian(Grid.box((256,), 10.0), 0.05), 0.0, 0.1)
    E = remainder_E(spec, cs, 20.0, st).field
    R = R_op(cs, 20.0, spec.u_plus_hat)
    assert np.max(np.abs(E.values - R.values)) < 1e-15
    for lam in (0.0, 0.1, 0.2):
        cs = PowerLawSolution(lam)
        spec = ProfileSpec(gaussian(Grid.box((256,), 10.0), 0.05), 0.01, lam)
        ts = np.array([10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0])
        _, b, _ = fit_decay_rate(ts, [remainder_E(spec, cs, t, st).field.norm() for t in ts])
        assert b >= (1 - 2 * lam) * default_alpha(1, lam)


def test_remainder_E_grid_refinement(inv_sq_solution):
    st = SolverSettings()
    norms = []
    for pts in (256, 512):
        spec = ProfileSpec(gaussian(Grid.box((pts,), 10.0), 0.05), 0.01, 0.1, 1.07)
        norms.append(remainder_E(spec, inv_sq_solution, 20.0, st).field.norm())
    assert abs(norms[1] / norms[0] - 1) < 0.01


def test_picard_rate_and_self_consistency(inv_sq_solution):
    ad = extract_asymptotics(inv_sq_solution, (1e2, 1e4))
    kg = Grid.box((256,), 12.0)
    spec = ProfileSpec(gaussian(kg, 0.05), 0.01, ad.lam, ad.c2_plus)
    tr, res = picard_solve(spec, inv_sq_solution, 10.0, SolverSettings(), 5)
    assert all(b / a < 0.5 for a, b in zip(res, res[1:]))
    # the fixed point solves the equation: march it forward from T and compare at later nodes
    a, xg = tr.meta["interaction"], tr.meta["x_grid"]
    idx = [12, 24, 48]
    later = [tr.times[i] for i in idx]
    g0 = interaction_to_moving(inv_sq_solution, 10.0, a[0], xg, kg)
    ev = evolve(g0, 10.0, later[-1], SolverSettings(dt_initial=1e-3, dt_control="proportional", frame="moving"),
                spec=spec, cs=inv_sq_solution, save_times=later)
    for i, t in zip(idx, later):
        k = int(np.argmin(np.abs(ev.times - t)))
        ref = interaction_to_moving(inv_sq_solution, t, a[i], xg, kg)
        assert (ev.fields[k] - ref).norm() < 1e-8 * ref.norm()


# ---------------------------------------------------------- parameter windows


def test_parameter_window_examples():
    assert alpha_max(1, 0.0) == 1.0 and alpha_max(2, 0.1) == 1.0
    assert alpha_max(3, 0.0) == pytest.approx(5 / 6)
    w = b_window(2, 0.0, 1.0)
    assert w.eq16 == pytest.approx((0.5, 1.0)) and w.strict == pytest.approx((0.5, 1.0)) and not w.discrepancy
    w = b_window(1, 0.0, 1.0)
    assert w.eq16[0] == pytest.approx(0.25) and w.strict[0] == pytest.approx(0.5) and w.discrepancy
    w = b_window(1, 0.1, 0.95)
    assert w.eq16[0] == pytest.approx(0.47) and w.strict == pytest.approx((0.6, 0.86))
    beta, k1, _ = admissible_pair(1, 0.0, 4.0)
    assert beta == pytest.approx(8.0) and k1 == pytest.approx(0.25)
    _, _, v = admissible_pair(2, 0.0, math.inf)
    assert not v["sobolev_2k1_lt_n"]
    _, k1, v = admissible_pair(1, 0.1, 4.0)
    assert v["alpha_n_gt_n_rho"] and v["k1_gt_n_lambda_half"] and k1 == pytest.approx(0.25)


def test_cubic_ledger_examples_and_root_certification():
    assert cubic_ledger(3, 0.0)["p_18_51_47_10"]["value"] == -10.0
    assert abs(cubic_ledger(1, lambda_threshold(1))["p_2_13_3"]["value"]) < 1e-7
    e = cubic_ledger(1, 0.3)["p_2_13_3"]
    assert e["value"] == pytest.approx(-0.72) and not e["satisfied"]
    coeffs = {p[0]: p[1] for p in POLYNOMIALS}
    for n, name in ((1, "p_2_13_3"), (2, "p_2_7_1"), (3, "p_36_78_47_1")):
        assert abs(np.polyval(coeffs[name], lambda_threshold(n))) <= 1e-7


def test_ledger_monotone_consistency():
    for n in (1, 2, 3):
        thr = lambda_threshold(n)
        for lam in np.linspace(0, thr, 8, endpoint=False):
            assert all(e["satisfied"] for e in cubic_ledger(n, lam).values() if e["relevant"])
        for lam in np.linspace(thr + 1e-6, 0.49, 8):
            assert not all(e["satisfied"] for e in cubic_ledger(n, lam).values() if e["relevant"])


# -------------------------------------------------------------- diagnostics


def test_sobolev_norm_examples():
    g = Grid.box((512,), 20.0)
    f = _gauss(g)
    assert sobolev_norm(f, 0.0) == pytest.approx(math.pi**0.25, rel=1e-12)
    assert sobolev_norm(f.scale(2.0), 0.0) == pytest.approx(2 * math.pi**0.25, rel=1e-12)
    # (1 - d^2/dx^2) e^{-x^2/2} = (2 - x^2) e^{-x^2/2}
    assert sobolev_norm(f, 2.0) == pytest.approx(math.sqrt(2.75 * math.sqrt(math.pi)), rel=1e-10)
    assert sobolev_norm(f, 0.0) == pytest.approx(f.norm(), rel=1e-14)


def _traj(times, norms):
    g = Grid.box((8,), 4.0)  # unit cells
    return Trajectory(times, [Field(g, np.full(8, v / math.sqrt(8))) for v in norms])


def test_bochner_examples():
    t = np.linspace(0.0, 1.0, 11)
    assert weighted_bochner_norm(_traj(t, np.ones_like(t)), 1.0, 2.0, 0.0, 0.0) == pytest.approx(1.0)
    t = np.linspace(1.0, 3.0, 5)
    vals = np.array([1.0, 3.0, 2.0, 0.5, 0.1])
    assert weighted_bochner_norm(_traj(t, vals), math.inf, 2.0, 0.0, 1.0) == pytest.approx(3.0)
    t = np.geomspace(1.0, 50.0, 801)
    got = weighted_bochner_norm(_traj(t, 1 / t), 2.0, 2.0, 0.0, 1.0)
    assert got == pytest.approx(math.sqrt(1 - 1 / 50), rel=1e-6)


def test_x_T_norm_examples():
    t = np.geomspace(10.0, 100.0, 25)
    assert x_T_norm(_traj(t, np.zeros_like(t)), 0.6, 0.0, 8.0, 4.0, 10.0) == 0.0
    b = 0.7
    tr = _traj(t, t**-b)
    first = max(tau**b * max(f.norm() for s, f in zip(t, tr.fields) if s >= tau) for tau in t[:-1])
    assert first == pytest.approx(1.0)
    assert x_T_norm(tr, 2 * b, 0.0, 8.0, 4.0, 10.0) >= x_T_norm(tr, b, 0.0, 8.0, 4.0, 10.0)


def test_fit_examples():
    t = np.geomspace(10, 100, 30)
    noise = 1 + 1e-3 * np.random.default_rng(5).uniform(-1, 1, t.size)
    _, b, _ = fit_decay_rate(t, 3 * t**-0.7 * noise)
    assert abs(b - 0.7) < 1e-2
    _, b, _ = fit_decay_rate(t, np.full(t.size, 2.0))
    assert b == pytest.approx(0.0, abs=1e-14)


def test_strichartz_examples():
    g = Grid.box((256,), 16.0)
    phi = _gauss(g)
    cs = PowerLawSolution(0.0)
    r = strichartz_ratio(cs, phi, math.inf, 2.0, 0.3, (2.0, 10.0))
    assert r == pytest.approx((1 + 4.0) ** -0.15, rel=1e-10)
    g2 = Grid.box((4096,), 200.0)
    phi2 = _gauss(g2)
    short = strichartz_ratio(cs, phi2, 8.0, 4.0, 0.0, (1.0, 10.0))
    long = strichartz_ratio(cs, phi2, 8.0, 4.0, 0.0, (1.0, 100.0))
    assert abs(long / short - 1) < 0.05
    assert strichartz_ratio(cs, phi, 8.0, 4.0, 0.2, (1.0, 10.0)) <= strichartz_ratio(cs, phi, 8.0, 4.0, 0.0, (1.0, 10.0))
