import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from matherkit import model
from matherkit import sets as S
from matherkit.critical import OccupationMeasure
from matherkit.grids import PhaseGrid
from matherkit.sets import PointCloud

EDGE = 4 / math.pi
GRID = PhaseGrid()

pts = st.lists(st.tuples(st.floats(0, 2 * math.pi, exclude_max=True), st.floats(-4, 4)),
               min_size=1, max_size=20)


def cloud(points, label="reference"):
    return PointCloud.on_grid(GRID, points, label)


def test_cloud_dedupes_and_wraps():
    c = cloud([(0.0, 0.0), (0.001, 0.001), (2 * math.pi, 0.0), (1.0, 1.0)])
    assert len(c) == 2
    assert c.to_rows()[0] == (0.0, 0.0)
    assert np.all((c.x >= 0) & (c.x < 2 * math.pi))


def test_cloud_label_validation():
    with pytest.raises(ValueError):
        PointCloud(np.zeros((1, 2)), label="bogus")


def test_hausdorff_examples():
    a, b = cloud([(0.0, 0.0)]), cloud([(math.pi, 2.0)])
    assert S.hausdorff(a, b) == pytest.approx(math.hypot(math.pi, 2.0))
    assert S.hausdorff(a, b) == pytest.approx(3.7242, abs=1e-4)
    # torus metric: 0.1 and 2 pi - 0.1 are 0.2 apart
    assert S.hausdorff(cloud([(0.1, 0.0)]), cloud([(2 * math.pi - 0.1, 0.0)])) == pytest.approx(0.2)


def test_one_sided_is_directional():
    a = cloud([(0.0, 0.0)])
    b = cloud([(0.0, 0.0), (math.pi, 0.0)])
    assert S.one_sided(a, b) == 0.0
    assert S.one_sided(b, a) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        S.hausdorff(a, cloud(np.zeros((0, 2))))


@given(pts, pts, pts)
def test_hausdorff_metric_axioms(p, q, r):
    a, b, c = cloud(p), cloud(q), cloud(r)
    assert S.hausdorff(a, a) == 0.0
    assert S.hausdorff(a, b) == pytest.approx(S.hausdorff(b, a))
    assert S.hausdorff(a, c) <= S.hausdorff(a, b) + S.hausdorff(b, c) + 1e-9


def test_within_cells_box():
    h, v = GRID.hx, GRID.hv
    a = cloud([(2 * h, 2 * v), (3 * h, 0.0), (0.0, 2.5 * v)])
    mask = S.within_cells(a, cloud([(0.0, 0.0)]))
    assert mask.tolist() == [True, False, False]
    assert S.cell_distance(a, cloud([(0.0, 0.0)])) == pytest.approx(3.0)
    assert not S.included(a, cloud([(0.0, 0.0)]))


def test_mather_support_point_mass():
    x = GRID.positions
    v = GRID.velocities
    w = np.zeros((x.size, v.size))
    w[0, 64] = 0.995
    w[10, 70] = 0.005
    m = S.mather_support(OccupationMeasure(w, x, v))
    assert m.to_rows() == [(0.0, 0.0)]
    assert len(S.mather_support(OccupationMeasure(w, x, v), 0.999)) == 2
    with pytest.raises(ValueError):
        S.mather_support(OccupationMeasure(w, x, v), 1.0)


def test_graph_check_single_and_double_branch():
    x = GRID.positions
    one = cloud(np.column_stack([x, 1.5 + 0.2 * np.sin(x)]))
    assert S.graph_check(one).passed
    two = cloud(np.vstack([np.column_stack([x, np.full_like(x, 1.0)]),
                           np.column_stack([x, np.full_like(x, -1.0)])]))
    rep = S.graph_check(two)
    assert not rep.passed
    assert rep.max_spread == pytest.approx(2.0)


def test_graph_check_excludes_rest_corner():
    rep = S.graph_check(S.analytic_separatrix(GRID))
    assert rep.passed
    assert 0 in rep.excluded_cells and 2 in rep.excluded_cells


def test_analytic_separatrix():
    ref = S.analytic_separatrix(GRID, sign=-1)
    assert len(ref) == GRID.nx
    i = GRID.nx // 2
    assert ref.points[i] == pytest.approx((math.pi, -2.0))


def test_projected_aubry_validation(run):
    res = run("pendulum", 0.0, compute_mane=False)
    with pytest.raises(ValueError):
        S.projected_aubry(res.phi)
    with pytest.raises(ValueError):
        S.projected_aubry(res.barrier, -1.0)


def test_aubry_at_zero_is_fixed_point(run):
    res = run("pendulum", 0.0)
    assert res.aubry.cloud.to_rows() == [(0.0, 0.0)]
    assert res.mather.to_rows() == [(0.0, 0.0)]
    assert res.mane.cloud.to_rows() == [(0.0, 0.0)]
    # spurious barrier minima near the fixed point fail the velocity check
    assert res.aubry.rejected.size > 0


def test_aubry_lift_on_separatrix(run):
    res = run("pendulum", EDGE)
    aub = res.aubry
    assert len(aub.cloud) > 200
    assert S.hausdorff(aub.cloud, S.analytic_separatrix(GRID)) <= 0.15
    kept = np.isin(np.flatnonzero(res.barrier.diagonal() <= 0.05), aub.indices)
    assert np.all(aub.residual[kept] <= GRID.hv)
    assert np.all(aub.residual[~kept] > GRID.hv)
    assert np.all(aub.cloud.v >= -GRID.hv)
    assert S.graph_check(aub.cloud).passed


def test_mane_contains_aubry_at_edge(run):
    res = run("pendulum", EDGE)
    assert res.mane.two_sided
    assert res.mane.sampled == GRID.nx * GRID.nv
    assert S.included(res.mather, res.aubry.cloud)
    assert S.included(res.aubry.cloud, res.mane.cloud)
    d = res.mane.diagnostics()
    assert d["accepted"] == len(res.mane.cloud)


def test_free_sets_are_the_invariant_circle(run):
    res = run("free", 1.0)
    for c in (res.mather, res.aubry.cloud, res.mane.cloud):
        assert np.all(np.abs(c.v - 1.0) <= 2 * GRID.hv)
    assert S.included(res.mather, res.aubry.cloud)
    assert S.included(res.aubry.cloud, res.mane.cloud)


def test_stable_manifold_needs_both_time_directions(run):
    # (pi, 2) lies on the orbit falling into the fixed point: calibrated forward only.
    # Short horizon, since integration error eventually pushes it around again.
    res = run("pendulum", 0.0, compute_mane=False)
    args = (model.pendulum(), GRID, res.phi, 0.0, res.alpha, math.pi, 2.0)
    assert abs(S.orbit_defect(*args, T=5.0, two_sided=False)) <= 0.15
    assert S.orbit_defect(*args, T=5.0, two_sided=True) > 0.15


def test_escaping_orbit_has_infinite_defect(run):
    res = run("pendulum", 0.0, compute_mane=False)
    assert S.orbit_defect(model.pendulum(), GRID, res.phi, 0.0, res.alpha, 0.0, 3.99) == math.inf


def test_mane_set_validation(run):
    res = run("pendulum", 0.0, compute_mane=False)
    with pytest.raises(ValueError):
        S.mane_set(model.pendulum(), GRID, res.barrier, 0.0, 0.0)
    with pytest.raises(ValueError):
        S.mane_set(model.pendulum(), GRID, res.phi, 0.0, 0.0, T=0.0)
    with pytest.raises(ValueError):
        S.mane_set(model.pendulum(), GRID, res.phi, 0.0, 0.0, v_refine=0)
