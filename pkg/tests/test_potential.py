import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matherkit import model
from matherkit.critical import alpha_lax_oleinik
from matherkit.grids import PhaseGrid, build_kernel
from matherkit.potential import (EPS_POT, NegativeCycleError, d_c, d_c_matrix,
                                 default_barrier_window, default_phi_steps, h_c_table,
                                 mane_potential, peierls_barrier, triangle_slack)

EDGE = 4 / math.pi
SMALL = PhaseGrid(nx=64, nv=65, tau=1.0)


def _setup(spec, grid, c):
    k = build_kernel(spec, grid, c)
    return k, alpha_lax_oleinik(k, grid).alpha


def test_one_step_table_is_the_kernel():
    grid = PhaseGrid(nx=32, nv=33)
    k, a = _setup(model.pendulum(), grid, 0.3)
    h1 = h_c_table(k, grid, a, 1)
    np.testing.assert_allclose(h1.values, k.dense() + a * grid.tau)
    with pytest.raises(ValueError):
        h_c_table(k, grid, a, 0)


def test_h_c_semigroup():
    grid = PhaseGrid(nx=32, nv=33)
    k, a = _setup(model.pendulum(), grid, 0.0)
    h2 = h_c_table(k, grid, a, 2).values
    h3 = h_c_table(k, grid, a, 3).values
    h5 = h_c_table(k, grid, a, 5).values
    np.testing.assert_allclose(h5, np.min(h2[:, :, None] + h3[None, :, :], axis=1))


def test_free_potential_is_minimum_step_cost():
    # continuum value is 0; the grid charges hx^2 / (2 tau) per one-cell step
    k, a = _setup(model.free(), SMALL, 0.0)
    assert a == 0.0
    phi = mane_potential(k, SMALL, a)
    i = np.arange(SMALL.nx)
    cells = np.abs(i[:, None] - i[None, :])
    cells = np.minimum(cells, SMALL.nx - cells)
    np.testing.assert_allclose(phi.values, cells * SMALL.hx ** 2 / (2 * SMALL.tau), atol=1e-12)


def test_default_windows():
    g = PhaseGrid()
    assert default_barrier_window(g) == (50, 200)
    assert default_phi_steps(g) == 512


def test_pendulum_barrier_at_zero(run):
    res = run("pendulum", 0.0, compute_mane=False)
    i_pi = res.barrier.nx // 2
    assert res.barrier.values[i_pi, i_pi] == pytest.approx(8.0, abs=0.3)
    assert res.barrier.values[0, 0] == pytest.approx(0.0, abs=1e-9)
    assert res.phi.values[0, i_pi] == pytest.approx(4.0, abs=0.3)
    assert res.barrier.window == (50, 200)


def test_barrier_vanishes_on_separatrix(run):
    res = run("pendulum", EDGE, compute_mane=False)
    assert res.barrier.diagonal().max() <= 0.3


def test_phi_properties(run, rng):
    res = run("pendulum", 1.0, compute_mane=False)
    phi = res.phi
    assert phi.kind == "mane_potential"
    assert np.all(np.diag(phi.values) <= 0)
    assert d_c_matrix(phi).min() >= -2 * EPS_POT
    i, j = rng.integers(0, phi.nx, size=2)
    assert d_c(phi, i, j) == pytest.approx(d_c(phi, j, i))
    triples = rng.integers(0, phi.nx, size=(500, 3))
    assert triangle_slack(phi, triples) <= 1e-6


def test_d_c_rejects_other_tables(run):
    res = run("pendulum", 1.0, compute_mane=False)
    with pytest.raises(ValueError):
        d_c(res.barrier, 0, 1)
    with pytest.raises(ValueError):
        d_c_matrix(res.barrier)


def test_negative_cycle_detected():
    grid = PhaseGrid(nx=32, nv=33)
    k, a = _setup(model.pendulum(), grid, 2.0)
    with pytest.raises(NegativeCycleError) as err:
        mane_potential(k, grid, a - 1.0)
    assert err.value.cycle_value < -EPS_POT
    with pytest.raises(NegativeCycleError):
        peierls_barrier(k, grid, a - 1.0)


def test_barrier_window_validation():
    grid = PhaseGrid(nx=32, nv=33)
    k, a = _setup(model.free(), grid, 0.0)
    with pytest.raises(ValueError):
        peierls_barrier(k, grid, a, T_min_steps=5, T_max_steps=4)


@given(st.integers(0, 63), st.floats(0, 2 * math.pi))
def test_interp_hits_grid_values(i, y):
    k, a = _setup(model.free(), SMALL, 0.0)
    phi = mane_potential(k, SMALL, a)
    j = int(round(y / SMALL.hx)) % SMALL.nx
    assert float(phi.interp(i, SMALL.positions[j])) == pytest.approx(phi.values[i, j])
    assert float(phi.interp_from(SMALL.positions[j], i)) == pytest.approx(phi.values[j, i])
    lo, hi = sorted((phi.values[i, int(y / SMALL.hx) % 64], phi.values[i, (int(y / SMALL.hx) + 1) % 64]))
    assert lo - 1e-12 <= float(phi.interp(i, y)) <= hi + 1e-12


def test_free_potential_vanishes_with_long_steps():
    # the minimum-step bias scales like 1 / tau
    grid = PhaseGrid(nx=64, nv=65, tau=4.0)
    k, a = _setup(model.free(), grid, 0.0)
    assert np.abs(mane_potential(k, grid, a).values).max() <= EPS_POT
