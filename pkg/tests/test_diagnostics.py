import math

import numpy as np
import pytest

from tdho import (Field, Grid, PowerLawSolution, Trajectory, fit_decay_rate, norm_report, sobolev_norm,
                  strichartz_ratio, weighted_bochner_norm, x_T_norm)
from tdho.errors import InadmissiblePair, InsufficientSamples, InsufficientSpan, NonPositiveError


def test_fit_decay_rate_exact_power_law():
    t = np.geomspace(10, 1000, 30)
    C, b, r2 = fit_decay_rate(t, 3.0 * t**-0.7)
    assert C == pytest.approx(3.0) and b == pytest.approx(0.7) and r2 == pytest.approx(1.0)


def test_fit_decay_rate_errors():
    t = np.geomspace(10, 1000, 30)
    with pytest.raises(NonPositiveError):
        fit_decay_rate(t, np.zeros(30))
    with pytest.raises(InsufficientSamples):
        fit_decay_rate(t[:4], t[:4])
    with pytest.raises(InsufficientSpan):
        fit_decay_rate(np.linspace(10, 20, 10), np.ones(10))


def test_sobolev_norm_of_gaussian():
    g = Grid.box((512,), 30.0)
    x = g.axes()[0]
    f = Field(g, np.exp(-x**2 / 2))
    assert sobolev_norm(f, 0) == pytest.approx(f.norm())
    # <D>^1: ||f||^2 + ||f'||^2 = sqrt(pi) (1 + 1/2)
    assert sobolev_norm(f, 1.0) == pytest.approx(math.sqrt(1.5 * math.sqrt(math.pi)), rel=1e-10)
    # <x>^1 weight: sqrt(pi) (1 + 1/2) as well
    assert sobolev_norm(f, 0, 1.0) == pytest.approx(math.sqrt(1.5 * math.sqrt(math.pi)), rel=1e-10)


def _const_traj(values, times):
    g = Grid.box((8,), 4.0)  # cell volume 1
    return Trajectory(times, [Field(g, np.full(8, v / math.sqrt(8))) for v in values])


def test_weighted_bochner_norm_constant_integrand():
    times = np.linspace(0.0, 2.0, 41)
    tr = _const_traj(np.ones_like(times), times)
    # lam = 0: (int_0^2 1 dt)^(1/q)
    assert weighted_bochner_norm(tr, 2.0, 2.0, 0.0, 0.0) == pytest.approx(math.sqrt(2.0))
    assert weighted_bochner_norm(tr, math.inf, 2.0, 0.0, 0.5) == pytest.approx(1.0)
    # lam = 1 weight 1/sqrt(1+t^2) integrates to asinh(2)
    assert weighted_bochner_norm(tr, 1.0, 2.0, 1.0, 0.0) == pytest.approx(math.asinh(2.0), rel=1e-5)


def test_x_T_norm_requires_coverage():
    times = np.geomspace(10, 100, 9)
    tr = _const_traj(times**-1.0, times)
    val = x_T_norm(tr, 0.6, 0.1, 8.0, 4.0, 10.0)
    assert val > 0 and math.isfinite(val)
    with pytest.raises(InsufficientSamples):
        x_T_norm(tr, 0.6, 0.1, 8.0, 4.0, 5.0)


def test_strichartz_ratio_bounded_and_checks_pair():
    g = Grid.box((256,), 16.0)
    x = g.axes()[0]
    phi = Field(g, np.exp(-x**2 / 2))
    cs = PowerLawSolution(0.0)
    r = strichartz_ratio(cs, phi, 8.0, 4.0, 0.0, (1.0, 10.0))
    assert 0 < r < 10
    with pytest.raises(InadmissiblePair):
        strichartz_ratio(cs, phi, 3.0, 4.0, 0.0, (1.0, 10.0))


def test_norm_report_outputs():
    t = np.geomspace(10, 100, 21)
    nr = norm_report(t, 2 * t**-1.0)
    assert nr.b_est == pytest.approx(1.0)
    lines = nr.to_csv().splitlines()
    assert lines[0] == "t,l2_error,weighted_sup_part,weighted_int_part,fit_line" and len(lines) == 22
    svg = nr.to_svg()
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    assert "</svg>" in svg
