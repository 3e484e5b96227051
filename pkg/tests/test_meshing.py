import numpy as np
import pytest

from contopt import meshing as msh


def unit_square_mesh(n=8, zones=None):
    return msh.structured_rect_mesh([((0, 0), (1, 1))], 1.0 / n, zones)


def affine_field(mesh, a, b, c, degree=2):
    def f(p):
        return a * p[:, 0] + b * p[:, 1] + c

    vv = f(mesh.vertices)
    if degree == 1:
        return msh.FEScalarField(mesh, 1, vv)
    ev = f(mesh.vertices[mesh.edges].mean(axis=1))
    return msh.FEScalarField(mesh, 2, vv, ev)


def circle_field(mesh, center, R, degree=2):
    def f(p):
        return np.hypot(p[:, 0] - center[0], p[:, 1] - center[1]) - R

    vv = f(mesh.vertices)
    if degree == 1:
        return msh.FEScalarField(mesh, 1, vv)
    ev = f(mesh.vertices[mesh.edges].mean(axis=1))
    return msh.FEScalarField(mesh, 2, vv, ev)


# ---------------------------------------------------------------------------
# edge roots
# ---------------------------------------------------------------------------

def test_edge_roots_p1_simple():
    assert msh.edge_roots((-1.0, 1.0), 1) == [0.5]
    assert msh.edge_roots((-1.0, -2.0), 1) == []


def test_edge_roots_p2_double_dip():
    roots = msh.edge_roots((1.0, 1.0, -0.5), 2)
    assert len(roots) == 2
    assert roots[0] == pytest.approx(1.0 - roots[1], abs=1e-14)
    # cross-check against the quadratic restriction itself
    f = msh.FEScalarField(unit_square_mesh(1), 2,
                          np.zeros(4), np.zeros(5))
    a, b, c = 2 * 1 + 2 * 1 - 4 * (-0.5), -3 * 1 - 1 + 4 * (-0.5), 1.0
    for t in roots:
        assert abs(a * t * t + b * t + c) < 1e-12


def test_edge_roots_snap_near_vertex():
    assert msh.edge_roots((1e-12, 1.0), 1) == []


# ---------------------------------------------------------------------------
# cutting
# ---------------------------------------------------------------------------

def test_cut_halfplane_area_exact():
    mesh = unit_square_mesh(8)
    for degree in (1, 2):
        phi = affine_field(mesh, 1.0, 0.0, -0.5, degree)
        cm = msh.cut(mesh, phi, degree)
        area = cm.sub_areas()[cm.inside].sum()
        assert area == pytest.approx(0.5, abs=1e-13)


def test_cut_keeps_interior_triangles_whole():
    mesh = unit_square_mesh(4)
    phi = affine_field(mesh, 0.0, 0.0, -1.0, 1)  # everything inside
    cm = msh.cut(mesh, phi, 1)
    assert len(cm.vertices) == len(mesh.vertices)
    assert np.all(cm.inside)
    assert len(cm.sub_triangles) == len(mesh.triangles)


def test_cut_area_partition():
    mesh = unit_square_mesh(9)
    phi = circle_field(mesh, (0.45, 0.55), 0.31, 2)
    cm = msh.cut(mesh, phi, 2)
    total = cm.sub_areas().sum()
    assert total == pytest.approx(1.0, rel=1e-12)
    assert np.all(cm.sub_areas() > 0)


def test_cut_sign_consistency():
    mesh = unit_square_mesh(9)
    phi = circle_field(mesh, (0.45, 0.55), 0.31, 2)
    cm = msh.cut(mesh, phi, 2)
    for k, tri in enumerate(cm.sub_triangles):
        cen = cm.vertices[tri].mean(axis=0)
        lam = msh._barycentric(mesh, cm.parent_tri[k], cen)
        val = phi.eval_tri(cm.parent_tri[k], lam)
        if cm.inside[k]:
            assert val < 1e-12
        else:
            assert val > -1e-12


def test_cut_conformity_no_hanging_nodes():
    mesh = unit_square_mesh(7)
    phi = circle_field(mesh, (0.5, 0.5), 0.27, 2)
    cm = msh.cut(mesh, phi, 2)
    # every sub-edge is used by at most two sub-triangles, and an edge used
    # once is on the boundary of the cut triangulation of D
    t = cm.sub_triangles
    raw = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]),
                  axis=1)
    uniq, counts = np.unique(raw, axis=0, return_counts=True)
    assert counts.max() <= 2
    once = uniq[counts == 1]
    lo, hi = mesh.bbox
    for a, b in once:
        mid = 0.5 * (cm.vertices[a] + cm.vertices[b])
        on_bbox = (np.isclose(mid[0], lo[0]) or np.isclose(mid[0], hi[0])
                   or np.isclose(mid[1], lo[1]) or np.isclose(mid[1], hi[1]))
        assert on_bbox


def test_cut_interface_vertices_on_zero_set():
    mesh = unit_square_mesh(7)
    phi = circle_field(mesh, (0.5, 0.5), 0.27, 2)
    cm = msh.cut(mesh, phi, 2)
    for a, b in cm.interface_edges():
        for v in (a, b):
            if v >= len(mesh.vertices):
                # added vertices are exact roots of the edge restriction
                p = cm.vertices[v]
                assert abs(np.hypot(p[0] - 0.5, p[1] - 0.5) - 0.27) < 5e-3


def test_cut_idempotent_on_affine_field():
    mesh = unit_square_mesh(6)
    phi = affine_field(mesh, 1.0, 0.3, -0.52, 1)
    cm = msh.cut(mesh, phi, 1)
    full = cm.as_full_mesh()
    phi2 = affine_field(full, 1.0, 0.3, -0.52, 1)
    cm2 = msh.cut(full, phi2, 1)
    assert len(cm2.vertices) == len(full.vertices)


def test_cut_through_vertex_no_slivers():
    # the zero line passes exactly through lattice vertices
    mesh = unit_square_mesh(4)
    phi = affine_field(mesh, 1.0, 0.0, -0.5, 1)
    cm = msh.cut(mesh, phi, 1)
    areas = cm.sub_areas()
    assert areas.min() > 1e-6
    area = areas[cm.inside].sum()
    assert area == pytest.approx(0.5, abs=1e-13)


def test_cut_p2_circle_area_convergence():
    errs = []
    R = 0.31
    ns = (8, 16, 32, 64, 128)  # four refinements
    for n in ns:
        mesh = unit_square_mesh(n)
        phi = circle_field(mesh, (0.47, 0.53), R, 2)
        cm = msh.cut(mesh, phi, 2)
        area = cm.sub_areas()[cm.inside].sum()
        errs.append(abs(area - np.pi * R * R))
    # observed order: least-squares slope of log(err) against log(h)
    A = np.vstack([np.log(1.0 / np.asarray(ns)), np.ones(len(ns))]).T
    slope = np.linalg.lstsq(A, np.log(errs), rcond=None)[0][0]
    assert slope >= 1.9


# ---------------------------------------------------------------------------
# boundary classification
# ---------------------------------------------------------------------------

def cantilever_zones():
    return {
        "dirichlet": lambda m: m[0] < 1e-12,
        "neumann": lambda m: m[0] > 2 - 1e-12 and 0.4 <= m[1] <= 0.6,
    }


def cantilever_mesh(n=10):
    return msh.structured_rect_mesh([((0, 0), (2, 1))], 1.0 / n,
                                    cantilever_zones())


class HalfPlaneGap:
    """Rigid half plane below y = 0 for classification tests."""

    def gap(self, x):
        return np.asarray(x)[:, 1]


def test_classify_full_domain_dirichlet_side():
    mesh = cantilever_mesh()
    phi = affine_field(mesh, 0.0, 0.0, -1.0, 1)
    cm = msh.cut(mesh, phi, 1)
    edges = msh.classify_boundary(cm)
    left = [e for e in edges if e.tag == msh.DIRICHLET]
    assert len(left) > 0
    for e in left:
        assert cm.vertices[e.v0][0] == pytest.approx(0.0)
        assert cm.vertices[e.v1][0] == pytest.approx(0.0)
    total = sum(np.linalg.norm(cm.vertices[e.v0] - cm.vertices[e.v1])
                for e in left)
    assert total == pytest.approx(1.0)


def test_classify_detached_shape_raises():
    mesh = cantilever_mesh()
    phi = circle_field(mesh, (1.2, 0.5), 0.3, 1)  # away from the left side
    cm = msh.cut(mesh, phi, 1)
    with pytest.raises(msh.AdmissibilityError):
        msh.classify_boundary(cm)


def test_classify_anchorage_neumann_bottom_center():
    zones = {
        "neumann": lambda m: abs(m[1]) < 1e-12 and 0.4375 <= m[0] <= 0.5625,
        "contact": lambda m: abs(m[1]) < 1e-12
        and (0.0625 <= m[0] <= 0.1875 or 0.8125 <= m[0] <= 0.9375),
    }
    mesh = msh.structured_rect_mesh([((0, 0), (1, 1))], 1 / 16, zones)
    phi = affine_field(mesh, 0.0, 0.0, -1.0, 1)
    cm = msh.cut(mesh, phi, 1)
    edges = msh.classify_boundary(cm)
    mids = {e.tag: [] for e in edges}
    for e in edges:
        mids[e.tag].append(0.5 * (cm.vertices[e.v0] + cm.vertices[e.v1]))
    assert any(abs(m[0] - 0.5) < 0.07 and m[1] == 0 for m in mids["neumann"])
    assert len(mids["contact"]) > 0


def test_classify_gap_band_candidates():
    mesh = cantilever_mesh()
    phi = affine_field(mesh, 0.0, 0.0, -1.0, 1)
    cm = msh.cut(mesh, phi, 1)
    edges = msh.classify_boundary(cm, rigid=HalfPlaneGap())
    bottom = [e for e in edges
              if cm.vertices[e.v0][1] == 0 and cm.vertices[e.v1][1] == 0]
    assert all(e.tag == msh.CONTACT for e in bottom)
    top = [e for e in edges
           if cm.vertices[e.v0][1] == 1 and cm.vertices[e.v1][1] == 1]
    assert all(e.tag == msh.FREE for e in top)


# ---------------------------------------------------------------------------
# quality
# ---------------------------------------------------------------------------

def test_quality_structured_uncut():
    mesh = unit_square_mesh(5)
    phi = affine_field(mesh, 0.0, 0.0, -1.0, 1)
    cm = msh.cut(mesh, phi, 1)
    angle, edge, area = msh.mesh_quality(cm)
    assert angle == pytest.approx(45.0)
    assert area == pytest.approx(1.0)


def test_quality_equilateral():
    verts = [(0, 0), (1, 0), (0.5, np.sqrt(3) / 2)]
    mesh = msh.SimplicialMesh(verts, [(0, 1, 2)])
    phi = msh.FEScalarField(mesh, 1, -np.ones(3))
    cm = msh.cut(mesh, phi, 1)
    angle, _, _ = msh.mesh_quality(cm)
    assert angle == pytest.approx(60.0)
