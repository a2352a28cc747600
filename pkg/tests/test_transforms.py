import math

import numpy as np
import pytest

from oracles import free_gaussian
from tdho import (Field, Grid, PowerLawSolution, SigmaModel, dilate, fourier, inverse_fourier, mdfm_between,
                  mdfm_inverse, mdfm_propagator, modulate, resample, solve_zeta, undilate)
from tdho.errors import SingularFactor
from tdho.transforms import free_multiplier


def _gauss(grid, w=1.0, shift=0.0):
    x = grid.axes()[0]
    return Field(grid, np.exp(-((x - shift) ** 2) / (2 * w * w)))


def test_gaussian_is_self_dual():
    g = Grid.box((256,), 16.0)
    f = _gauss(g)
    h = fourier(f)
    xi = h.grid.axes()[0]
    assert np.max(np.abs(h.values - np.exp(-xi**2 / 2))) < 1e-12


def test_fourier_of_shifted_gaussian_has_phase():
    g = Grid.box((256,), 16.0)
    h = fourier(_gauss(g, shift=1.5))
    xi = h.grid.axes()[0]
    assert np.max(np.abs(h.values - np.exp(-xi**2 / 2 - 1.5j * xi))) < 1e-12


def test_fourier_roundtrip_on_offset_grid():
    g = Grid((64,), (-7.3,), (0.25,))
    rng = np.random.default_rng(0)
    f = Field(g, rng.standard_normal(64) + 1j * rng.standard_normal(64))
    back = inverse_fourier(fourier(f), g)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_dilate_preserves_norm_and_inverts():
    g = Grid.box((64,), 8.0)
    f = _gauss(g)
    for tau in (2.5, -0.7):
        d = dilate(f, tau)
        assert d.norm() == pytest.approx(f.norm(), rel=1e-13)
        u = undilate(d, tau)
        assert np.allclose(u.values, f.values) and np.allclose(u.grid.x_min, g.x_min)


def test_free_mdfm_matches_exact_gaussian():
    # dx = sqrt(2 pi t / N) makes the output grid equal to the input grid
    n, t = 1024, 4.0
    g = Grid.centered((n,), math.sqrt(2 * math.pi * t / n))
    cs = solve_zeta(SigmaModel.zero(), 10.0)
    u = mdfm_propagator(cs, t, _gauss(g))
    x = u.grid.axes()[0]
    assert np.max(np.abs(u.values - free_gaussian(x, t))) < 1e-12


def test_free_mdfm_matches_spectral_multiplier():
    g = Grid.box((1024,), 40.0)
    cs = solve_zeta(SigmaModel.zero(), 10.0)
    f = _gauss(g)
    ref = free_multiplier(f, 3.0)
    u = resample(mdfm_propagator(cs, 3.0, f), g)
    assert (u - ref).norm() / f.norm() < 1e-10


def test_mdfm_group_property():
    cs = PowerLawSolution(0.1, 1.0)
    g = Grid.box((128,), 10.0)
    f = _gauss(g)
    u2 = mdfm_propagator(cs, 2.0, f)
    u3_direct = mdfm_propagator(cs, 3.0, f)
    u3_step = mdfm_between(cs, 3.0, 2.0, u2)
    assert np.allclose(u3_step.grid.dx, u3_direct.grid.dx)
    assert np.max(np.abs(u3_step.values - u3_direct.values)) < 1e-12
    back = mdfm_inverse(cs, 2.0, u2, g)
    assert np.max(np.abs(back.values - f.values)) < 1e-12


def test_singular_factor_detected():
    cs = solve_zeta(SigmaModel.constant(1.0), 10.0)
    g = Grid.box((16,), 2.0)
    with pytest.raises(SingularFactor):
        mdfm_propagator(cs, math.pi, _gauss(g))


def test_modulate_is_unitary_phase():
    g = Grid.box((32,), 4.0)
    f = _gauss(g)
    m = modulate(f, 0.3)
    assert np.allclose(np.abs(m.values), np.abs(f.values))


def test_resample_is_exact_for_bandlimited_data():
    g = Grid.box((128,), 20.0)
    h = Grid.box((64,), 10.0)
    out = resample(_gauss(g), h)
    assert np.max(np.abs(out.values - _gauss(h).values)) < 1e-12
