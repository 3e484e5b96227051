import numpy as np
import pytest
from scipy.optimize import brentq

from contopt import grid as gr


def unit_grid(n=65, lo=(-0.5, -0.5), hi=(0.5, 0.5)):
    return gr.CartesianGrid.covering(lo, hi, n, n)


def measured_radius(phi, center=(0.0, 0.0), rmin=0.05, rmax=0.45, n_dirs=64):
    radii = []
    for ang in np.linspace(0, 2 * np.pi, n_dirs, endpoint=False):
        d = np.array([np.cos(ang), np.sin(ang)])

        def f(r):
            return gr.sample(phi, np.asarray(center) + r * d)

        radii.append(brentq(f, rmin, rmax, xtol=1e-12))
    return np.array(radii)


# ---------------------------------------------------------------------------
# signed distance initialization
# ---------------------------------------------------------------------------

def test_unit_circle_center_value():
    g = gr.CartesianGrid.covering((-2, -2), (2, 2), 41, 41)
    phi = gr.init_signed_distance(gr.Circle((0, 0), 1.0), g)
    assert gr.sample(phi, np.zeros(2)) == pytest.approx(-1.0)


def test_half_plane_distance():
    g = unit_grid()
    phi = gr.init_signed_distance(gr.HalfPlane((0, 0), (0, 1)), g)
    assert gr.sample(phi, np.array([0.3, 0.2])) == pytest.approx(0.2)


def test_union_is_pointwise_min():
    g = unit_grid()
    c1 = gr.Circle((-0.2, 0.0), 0.1)
    c2 = gr.Circle((0.25, 0.1), 0.15)
    both = gr.init_signed_distance(gr.Union((c1, c2)), g)
    x, y = g.nodes()
    p = np.array([x[20, 30], y[20, 30]])  # query at a node: pointwise oracle
    expect = min(c1.sd(*p), c2.sd(*p))
    assert gr.sample(both, p) == pytest.approx(expect)


def test_degenerate_primitive_rejected():
    with pytest.raises(ValueError):
        gr.Circle((0, 0), 0.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_sample_at_node_is_nodal_value():
    g = unit_grid(17)
    x, y = g.nodes()
    phi = gr.LevelSetField(g, np.sin(3 * x) + y)
    assert gr.sample(phi, np.array([x[3, 5], y[3, 5]])) == phi.values[3, 5]


def test_sample_cell_center_average():
    g = gr.CartesianGrid((0.0, 0.0), (1.0, 1.0), (2, 2))
    vals = np.array([[0.0, 0.0], [0.0, 4.0]])
    phi = gr.LevelSetField(g, vals)
    assert gr.sample(phi, np.array([0.5, 0.5])) == pytest.approx(1.0)


def test_sample_reproduces_affine():
    g = unit_grid(23)
    x, y = g.nodes()
    phi = gr.LevelSetField(g, 1.7 * x - 0.3 * y + 0.25)
    pts = np.random.default_rng(0).uniform(-0.5, 0.5, (50, 2))
    vals = gr.sample_many(phi, pts)
    np.testing.assert_allclose(vals, 1.7 * pts[:, 0] - 0.3 * pts[:, 1] + 0.25,
                               atol=1e-14)


def test_sample_outside_rejected():
    g = unit_grid(9)
    phi = gr.LevelSetField(g, np.zeros((9, 9)))
    with pytest.raises(ValueError):
        gr.sample(phi, np.array([0.7, 0.0]))


# ---------------------------------------------------------------------------
# advection
# ---------------------------------------------------------------------------

def test_advect_zero_speed_identity():
    g = unit_grid(33)
    x, y = g.nodes()
    phi = gr.LevelSetField(g, x ** 2 + np.cos(y))
    theta = gr.NormalSpeedField(g, np.zeros_like(x))
    out = gr.advect(phi, theta, T=0.37)
    assert np.array_equal(out.values, phi.values)


def test_advect_circle_erosion_radius():
    # positive speed erodes the shape: r(T) = r0 - T
    g = unit_grid(256)
    phi = gr.init_signed_distance(gr.Circle((0, 0), 0.3), g)
    theta = gr.NormalSpeedField(g, np.ones(g.dims))
    out = gr.advect(phi, theta, T=0.1)
    radii = measured_radius(out)
    assert np.all(np.abs(radii - 0.2) < 0.002)


def test_advect_planar_front_translation():
    g = unit_grid(65)
    x, y = g.nodes()
    phi = gr.LevelSetField(g, y - 0.1)
    theta = gr.NormalSpeedField(g, np.full(g.dims, 0.5))
    out = gr.advect(phi, theta, T=0.2)
    # phi grows by speed * T * |grad phi| exactly for an affine front, away
    # from the inflow boundary band contaminated by the Neumann ghost cells
    clean = y < 0.5 - (0.5 * 0.2 + 4 * g.h)
    np.testing.assert_allclose(out.values[clean], (y + 0.0)[clean],
                               atol=1e-12)


def test_advect_rejects_nonfinite_speed():
    g = unit_grid(9)
    v = np.zeros((9, 9))
    v[0, 0] = np.nan
    with pytest.raises(ValueError):
        gr.NormalSpeedField(g, v)


def test_advect_time_composition():
    g = unit_grid(65)
    phi = gr.init_signed_distance(gr.Circle((0.05, 0.0), 0.25), g)
    theta = gr.NormalSpeedField(g, np.full(g.dims, 0.8))
    one = gr.advect(phi, theta, T=0.08)
    two = gr.advect(gr.advect(phi, theta, T=0.04), theta, T=0.04)
    dt = 0.5 * g.h / 0.8
    # first-order composition error, a few dt^2 per step in the band
    assert np.abs(one.values - two.values).max() < 20 * dt


def test_frozen_nodes_are_zeroed():
    g = unit_grid(9)
    mask = np.zeros((9, 9), bool)
    mask[:, 0] = True
    th = gr.NormalSpeedField(g, np.ones((9, 9)), frozen=mask)
    assert np.all(th.values[:, 0] == 0.0)
    assert np.all(th.values[:, 1:] == 1.0)


# ---------------------------------------------------------------------------
# reinitialization
# ---------------------------------------------------------------------------

def band_mask(phi, width_cells=5):
    return np.abs(phi.values) < width_cells * phi.grid.h


def grad_norm(values, g):
    gx, gy = np.gradient(values, g.spacing[0], g.spacing[1])
    return np.sqrt(gx ** 2 + gy ** 2)


def test_reinitialize_fixed_point_on_signed_distance():
    # a distance function with no ridge inside the domain is a discrete
    # fixed point everywhere
    g = unit_grid(129)
    phi = gr.init_signed_distance(gr.HalfPlane((0, 0.05), (0, 1)), g)
    out = gr.reinitialize(phi, 10)
    assert np.abs(out.values - phi.values).max() <= 1e-3 * g.h


def test_reinitialize_near_fixed_point_off_skeleton():
    # the disk distance has a cone tip at the center; away from it the drift
    # is the O((h/r)^2) truncation of the one-sided differences, and at the
    # tip itself it stays below a fraction of one cell
    g = unit_grid(129)
    phi = gr.init_signed_distance(gr.Circle((0, 0), 0.3), g)
    out = gr.reinitialize(phi, 10)
    x, y = g.nodes()
    d = np.abs(out.values - phi.values)
    clean = (np.hypot(x, y) > 0.15) & (np.maximum(np.abs(x), np.abs(y))
                                       < 0.5 - 3 * g.h)
    assert d[clean].max() <= 1e-2 * g.h
    assert d.max() <= 0.5 * g.h


def test_reinitialize_restores_gradient_norm():
    g = unit_grid(129)
    phi0 = gr.init_signed_distance(gr.Circle((0, 0), 0.3), g)
    phi = gr.LevelSetField(g, 2.0 * phi0.values)
    out = gr.reinitialize(phi, 120)
    gn = grad_norm(out.values, g)
    band = band_mask(out) & band_mask(phi0)
    assert np.abs(gn[band] - 1.0).max() <= 0.05


def test_reinitialize_preserves_signs():
    g = unit_grid(97)
    phi0 = gr.init_signed_distance(gr.Circle((0.1, -0.05), 0.22), g)
    phi = gr.LevelSetField(g, 3.0 * phi0.values + 0.2 * g.h)
    out = gr.reinitialize(phi, 60)
    far = np.abs(phi.values) > g.h
    assert np.all(np.sign(out.values[far]) == np.sign(phi.values[far]))


def test_reinitialize_zero_crossings_stay_within_one_cell():
    g = unit_grid(97)
    phi0 = gr.init_signed_distance(gr.Circle((0, 0), 0.27), g)
    phi = gr.LevelSetField(g, np.tanh(4.0 * phi0.values) * 0.3)
    out = gr.reinitialize(phi, 80)
    r_before = measured_radius(phi)
    r_after = measured_radius(out)
    assert np.abs(r_before - r_after).max() <= g.h


# ---------------------------------------------------------------------------
# normal and curvature
# ---------------------------------------------------------------------------

def test_curvature_of_circle():
    g = unit_grid(256)
    R = 0.3
    phi = gr.init_signed_distance(gr.Circle((0, 0), R), g)
    pts = np.array([[R * np.cos(a), R * np.sin(a)]
                    for a in np.linspace(0, 2 * np.pi, 17)])
    n, k = gr.normal_curvature(phi, pts)
    np.testing.assert_allclose(k, 1.0 / R, rtol=0.05)
    # normals point radially outward
    np.testing.assert_allclose(n, pts / R, atol=5e-3)
    np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-12)


def test_curvature_of_affine_front():
    g = unit_grid(65)
    x, y = g.nodes()
    phi = gr.LevelSetField(g, 0.6 * x + 0.8 * y - 0.02)
    n, k = gr.normal_curvature(phi, np.array([0.1, -0.05]))
    assert abs(k) < 1e-8
    np.testing.assert_allclose(n, [0.6, 0.8], atol=1e-12)


def test_normal_of_half_plane():
    g = unit_grid(33)
    phi = gr.init_signed_distance(gr.HalfPlane((0, 0), (0, 1)), g)
    n, _ = gr.normal_curvature(phi, np.array([0.1, 0.0]))
    np.testing.assert_allclose(n, [0.0, 1.0], atol=1e-12)


def test_vanishing_gradient_signal():
    g = unit_grid(33)
    phi = gr.LevelSetField(g, np.ones(g.dims))
    with pytest.raises(ValueError):
        gr.normal_curvature(phi, np.array([0.0, 0.0]))
