import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matherkit import model
from matherkit.grids import PhaseGrid, admissible_edges, build_kernel, check_connected

TWO_PI = 2 * math.pi


def test_default_grid():
    g = PhaseGrid()
    assert (g.nx, g.nv, g.v_max, g.tau, g.lift_window) == (256, 129, 4.0, 0.2, 1)
    assert g.hx == pytest.approx(TWO_PI / 256)
    assert g.hv == pytest.approx(0.0625)
    assert 0.0 in g.velocities
    # |k| hx <= v_max tau = 0.8
    assert g.max_offset == 32


@pytest.mark.parametrize("kw", [dict(nx=1), dict(nv=1), dict(v_max=0.0), dict(tau=-1.0),
                                dict(lift_window=-1), dict(tau=math.inf)])
def test_grid_validation(kw):
    with pytest.raises(ValueError):
        PhaseGrid(**kw)


def test_grid_json_roundtrip():
    g = PhaseGrid(nx=64, nv=33, v_max=3.0, tau=0.5, lift_window=0)
    assert PhaseGrid.from_json(g.to_json()) == g
    assert PhaseGrid.from_json({"v_max": 2.0}).v_max == 2.0


def _tau_one():
    return PhaseGrid(nx=8, nv=21, v_max=10.0, tau=1.0, lift_window=1)


def test_kernel_free_examples():
    g = _tau_one()
    free = model.free()
    k0 = build_kernel(free, g, 0.0)
    assert k0.entry(3, 3, 0) == 0.0
    # one full turn in unit time: tau (2 pi / tau)^2 / 2
    assert k0.entry(0, 0, 1) == pytest.approx(2 * math.pi ** 2)
    k1 = build_kernel(free, g, 1.0)
    assert k1.entry(0, 0, 1) == pytest.approx(2 * math.pi ** 2 - 2 * math.pi)
    assert k1.entry(0, 0, 1) == pytest.approx(13.4560, abs=1e-4)


def test_inadmissible_edges_are_infinite():
    g = PhaseGrid(nx=16, nv=9, v_max=1.0, tau=0.5)
    k = build_kernel(model.free(), g, 0.0)
    assert math.isinf(k.entry(0, 8, 0))
    assert np.isfinite(k.band).all()


@given(st.integers(0, 255), st.integers(-32, 32), st.floats(-3, 3), st.floats(-3, 3))
def test_kernel_affine_in_c(j, k, c1, c2):
    g = PhaseGrid()
    spec = model.pendulum()
    a1 = build_kernel(spec, g, c1)
    a2 = build_kernel(spec, g, c2)
    m = k + g.max_offset
    disp = k * g.hx
    assert a1.band[j, m] - a2.band[j, m] == pytest.approx(-(c1 - c2) * disp, abs=1e-12)


def test_kernel_symmetry_even_potential():
    g = PhaseGrid()
    band = build_kernel(model.pendulum(), g, 0.0).band
    j = np.arange(g.nx)
    # reflecting x -> -x maps (target j, offset k) to (target -j, offset -k)
    np.testing.assert_allclose(band[(-j) % g.nx][:, ::-1], band, atol=1e-12)


def test_admissible_edges_tiny_step():
    g = PhaseGrid(nx=8, nv=5, v_max=0.1, tau=1.0, lift_window=0)
    assert admissible_edges(g) == [(i, i, 0) for i in range(8)]


def test_admissible_edges_all_windings():
    # 2 pi <= v_max tau: every pair is joined with windings -1, 0 and 1
    g = PhaseGrid(nx=2, nv=5, v_max=10.0, tau=1.0, lift_window=1)
    edges = admissible_edges(g)
    for i in range(2):
        for j in range(2):
            assert {w for (a, b, w) in edges if (a, b) == (i, j)} == {-1, 0, 1}


def test_admissible_edges_half_turn():
    # four positions, no winding, |displacement| <= pi
    g = PhaseGrid(nx=4, nv=5, v_max=math.pi, tau=1.0, lift_window=0)
    edges = admissible_edges(g)
    for i, j, w in edges:
        assert w == 0
        assert abs(j - i) * g.hx <= math.pi + 1e-12
    assert len(edges) == 4 + 6 + 4  # |j - i| = 0, 1, 2


def test_disconnected_graph_rejected():
    g = PhaseGrid(nx=8, nv=5, v_max=0.1, tau=1.0)
    with pytest.raises(ValueError):
        check_connected(build_kernel(model.free(), g, 0.0))


def test_refinement_consistency_free():
    g = PhaseGrid(nx=64, nv=33, v_max=4.0, tau=0.2)
    fine = g.with_(tau=0.1)
    coarse_k = build_kernel(model.free(), g, 0.0).dense()
    fine_k = build_kernel(model.free(), fine, 0.0).dense()
    two = np.min(fine_k[:, :, None] + fine_k[None, :, :], axis=1)
    ok = np.isfinite(coarse_k)
    # splitting an odd displacement costs at most hx^2 / (2 tau) extra
    assert np.all(two[ok] <= coarse_k[ok] + g.hx ** 2 / (2 * g.tau) + 1e-12)
