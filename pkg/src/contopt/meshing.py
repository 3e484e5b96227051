"""Background triangulations and conforming cut meshes.

The hold-all domain is triangulated once (structured right-triangle meshes
over unions of axis-aligned boxes).  Given a P1 or P2 level-set field on
that mesh, ``cut`` inserts the zero-set intersections on every edge (up to
two per edge for P2), subdivides the crossed triangles into sign-pure convex
fans, and classifies each sub-triangle by the field sign at its centroid.
The result carries an explicit submesh of the negative region together with
its tagged boundary.

Sub-cell geometry stays straight-sided: the added vertices are exact roots
of the polynomial restriction to each edge, but the interface is the chord
polyline between them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SimplicialMesh",
    "FEScalarField",
    "CutMesh",
    "BoundaryEdge",
    "AdmissibilityError",
    "structured_rect_mesh",
    "edge_roots",
    "cut",
    "classify_boundary",
    "mesh_quality",
    "to_fe_field",
]

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
CONTACT = "contact"
FREE = "free"


class AdmissibilityError(RuntimeError):
    """Raised when a shape violates the admissibility constraints."""


# ---------------------------------------------------------------------------
# background mesh
# ---------------------------------------------------------------------------

class SimplicialMesh:
    """Triangle mesh of the hold-all domain with zone predicates on its boundary.

    ``zone_spec`` maps tag names ('dirichlet', 'neumann', 'contact') to
    predicates evaluated at boundary-edge midpoints; untagged boundary edges
    are free.  Neumann zones are geometric and fixed for a whole run.
    """

    def __init__(self, vertices, triangles, zone_spec=None):
        self.vertices = np.asarray(vertices, dtype=float)
        self.triangles = np.asarray(triangles, dtype=int)
        self.zone_spec = dict(zone_spec or {})
        self._check_orientation()
        self._build_edges()

    def _check_orientation(self):
        v = self.vertices
        t = self.triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        areas = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        if np.any(areas <= 0):
            raise ValueError("triangles must be positively oriented")
        self.areas = areas

    def _build_edges(self):
        t = self.triangles
        raw = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        raw.sort(axis=1)
        self.edges, inv, counts = np.unique(
            raw, axis=0, return_inverse=True, return_counts=True)
        self.tri_edges = inv.reshape(3, -1).T  # local edges (01, 12, 20)
        self.edge_map = {tuple(e): i for i, e in enumerate(self.edges)}
        self.boundary_edge_ids = np.nonzero(counts == 1)[0]
        self._tag_boundary()

    def _tag_boundary(self):
        mids = self.vertices[self.edges[self.boundary_edge_ids]].mean(axis=1)
        tags = np.array([FREE] * len(self.boundary_edge_ids), dtype=object)
        for tag in (CONTACT, NEUMANN, DIRICHLET):  # later wins
            pred = self.zone_spec.get(tag)
            if pred is None:
                continue
            hit = np.array([bool(pred(m)) for m in mids])
            tags[hit] = tag
        self.boundary_tags = {int(e): t for e, t in
                              zip(self.boundary_edge_ids, tags)}

    @property
    def diameter(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


def _axis_coords(breaks, h):
    coords = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(round((b - a) / h)))
        coords.append(np.linspace(a, b, n + 1)[:-1])
    coords.append([breaks[-1]])
    return np.concatenate(coords)


def structured_rect_mesh(boxes, h, zone_spec=None):
    """Right-triangle mesh over a union of axis-aligned boxes.

    The lattice lines include every box edge, so the region boundary is
    meshed exactly; each kept cell is split along the same diagonal.
    """
    boxes = [(np.asarray(lo, float), np.asarray(hi, float))
             for lo, hi in boxes]
    xb = sorted({float(c) for lo, hi in boxes for c in (lo[0], hi[0])})
    yb = sorted({float(c) for lo, hi in boxes for c in (lo[1], hi[1])})
    xs = _axis_coords(xb, h)
    ys = _axis_coords(yb, h)
    nx, ny = len(xs), len(ys)
    vid = -np.ones((nx, ny), dtype=int)

    def inside(px, py):
        return any(lo[0] - 1e-12 <= px <= hi[0] + 1e-12
                   and lo[1] - 1e-12 <= py <= hi[1] + 1e-12
                   for lo, hi in boxes)

    tris = []
    for i in range(nx - 1):
        for j in range(ny - 1):
            cx = 0.5 * (xs[i] + xs[i + 1])
            cy = 0.5 * (ys[j] + ys[j + 1])
            if not inside(cx, cy):
                continue
            for ii, jj in ((i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)):
                if vid[ii, jj] < 0:
                    vid[ii, jj] = 0
            tris.append(((i, j), (i + 1, j), (i + 1, j + 1)))
            tris.append(((i, j), (i + 1, j + 1), (i, j + 1)))

    used = np.argwhere(vid == 0)
    for k, (i, j) in enumerate(used):
        vid[i, j] = k
    verts = np.column_stack([xs[used[:, 0]], ys[used[:, 1]]])
    tri_idx = np.array([[vid[a], vid[b], vid[c]] for a, b, c in tris])
    return SimplicialMesh(verts, tri_idx, zone_spec)


# ---------------------------------------------------------------------------
# scalar FE fields on the background mesh
# ---------------------------------------------------------------------------

@dataclass
class FEScalarField:
    """P1 or P2 Lagrange scalar field on a SimplicialMesh.

    P2 stores one extra value per unique edge (the midpoint node).
    """

    mesh: SimplicialMesh
    degree: int
    vertex_values: np.ndarray
    edge_values: np.ndarray | None = None

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        if self.degree == 2 and self.edge_values is None:
            raise ValueError("P2 field needs edge midpoint values")

    def edge_restriction(self, edge_id):
        a, b = self.mesh.edges[edge_id]
        va, vb = self.vertex_values[a], self.vertex_values[b]
        if self.degree == 1:
            return (va, vb, 0.5 * (va + vb))
        return (va, vb, self.edge_values[edge_id])

    def eval_edge(self, edge_id, t):
        va, vb, vm = self.edge_restriction(edge_id)
        if self.degree == 1:
            return va + (vb - va) * np.asarray(t)
        t = np.asarray(t)
        return (va * (1 - t) * (1 - 2 * t) + vb * t * (2 * t - 1)
                + vm * 4 * t * (1 - t))

    def eval_tri(self, tri_id, lam):
        """Evaluate at barycentric coordinates inside a parent triangle."""
        tri = self.mesh.triangles[tri_id]
        l0, l1, l2 = lam
        v = self.vertex_values[tri]
        if self.degree == 1:
            return v[0] * l0 + v[1] * l1 + v[2] * l2
        e = self.mesh.tri_edges[tri_id]
        m = self.edge_values[e]  # edges (01, 12, 20)
        return (v[0] * l0 * (2 * l0 - 1) + v[1] * l1 * (2 * l1 - 1)
                + v[2] * l2 * (2 * l2 - 1)
                + 4 * (m[0] * l0 * l1 + m[1] * l1 * l2 + m[2] * l2 * l0))


def to_fe_field(phi, mesh: SimplicialMesh, degree: int) -> FEScalarField:
    """Nodal interpolation of a grid level-set onto the background mesh."""
    from . import grid as _grid

    vv = _grid.sample_many(phi, mesh.vertices)
    if degree == 1:
        return FEScalarField(mesh, 1, vv)
    mids = mesh.vertices[mesh.edges].mean(axis=1)
    ev = _grid.sample_many(phi, mids)
    return FEScalarField(mesh, 2, vv, ev)


# ---------------------------------------------------------------------------
# edge roots
# ---------------------------------------------------------------------------

def edge_roots(values, degree, tol_merge=1e-8):
    """Parametric roots of the edge restriction, strictly inside (0, 1).

    Degree 1: at most one root where the endpoint values change sign.
    Degree 2: the real roots of the quadratic restriction, up to two.
    Roots closer than ``tol_merge`` to an endpoint are snapped away (the
    vertex itself represents the intersection there).
    """
    if degree == 1:
        va, vb = values[0], values[1]
        if va * vb >= 0:
            return []
        roots = [va / (va - vb)]
    else:
        va, vb, vm = values
        a = 2 * va + 2 * vb - 4 * vm
        b = -3 * va - vb + 4 * vm
        c = va
        if abs(a) < 1e-14 * max(abs(b), abs(c), 1e-300):
            roots = [] if b == 0 else [-c / b]
        else:
            disc = b * b - 4 * a * c
            if disc < 0:
                roots = []
            else:
                s = np.sqrt(disc)
                # numerically stable quadratic roots
                q = -0.5 * (b + np.copysign(s, b)) if b != 0 else 0.5 * s
                if q == 0:
                    roots = [0.0]
                else:
                    roots = sorted({q / a, c / q})
    return [t for t in roots if tol_merge < t < 1.0 - tol_merge]


# ---------------------------------------------------------------------------
# cut meshes
# ---------------------------------------------------------------------------

@dataclass
class BoundaryEdge:
    v0: int
    v1: int
    tag: str
    sub_tri: int  # adjacent inside sub-triangle
    parent_edge: int | None  # parent boundary edge id, None for interface


@dataclass
class CutMesh:
    parent: SimplicialMesh
    vertices: np.ndarray           # parent vertices then added ones
    sub_triangles: np.ndarray      # (ns, 3)
    inside: np.ndarray             # (ns,) bool
    parent_tri: np.ndarray         # (ns,)
    added_on_edge: dict            # parent edge id -> [(t, vertex id)]
    vertex_zero: np.ndarray        # zero flags for parent vertices
    phi: FEScalarField

    @property
    def omega(self):
        return np.nonzero(self.inside)[0]

    def sub_areas(self):
        v = self.vertices
        t = self.sub_triangles
        e1 = v[t[:, 1]] - v[t[:, 0]]
        e2 = v[t[:, 2]] - v[t[:, 0]]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def _vertex_boundary_edges(self):
        """For each vertex, the parent *boundary* edges it lies on."""
        memb = {}
        bset = set(int(e) for e in self.parent.boundary_edge_ids)
        for eid in self.parent.boundary_edge_ids:
            a, b = self.parent.edges[eid]
            memb.setdefault(int(a), set()).add(int(eid))
            memb.setdefault(int(b), set()).add(int(eid))
        for eid, pts in self.added_on_edge.items():
            if int(eid) in bset:
                for _, vid in pts:
                    memb.setdefault(int(vid), set()).add(int(eid))
        return memb

    def omega_boundary(self):
        """Edges of the inside submesh boundary with adjacency information.

        Returns a list of (v0, v1, sub_tri, parent_edge_or_None).
        """
        tris = self.sub_triangles[self.inside]
        ids = np.nonzero(self.inside)[0]
        raw = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]],
                              tris[:, [2, 0]]])
        owner = np.concatenate([ids, ids, ids])
        key = np.sort(raw, axis=1)
        uniq, inv, counts = np.unique(key, axis=0, return_inverse=True,
                                      return_counts=True)
        memb = self._vertex_boundary_edges()
        out = []
        once = counts == 1
        for k in np.nonzero(once[inv])[0]:
            v0, v1 = raw[k]
            common = memb.get(int(v0), set()) & memb.get(int(v1), set())
            pe = min(common) if common else None
            out.append((int(v0), int(v1), int(owner[k]), pe))
        return out

    def interface_edges(self):
        return [(a, b) for a, b, _, pe in self.omega_boundary() if pe is None]

    def as_full_mesh(self):
        """The whole cut triangulation of D as a plain SimplicialMesh."""
        return SimplicialMesh(self.vertices, self.sub_triangles,
                              self.parent.zone_spec)


def _split_positions(chords, n):
    """Split the cyclic polygon [0..n) along non-crossing chords.

    ``chords`` pairs positions consecutive in cyclic order, so in the frame
    rotated to the first chord start the chord intervals are disjoint and
    forward-oriented.  Chord endpoints belong to both adjacent regions;
    zero-width regions (adjacent endpoints) are dropped.
    """
    if not chords:
        return [list(range(n))]
    start = chords[0][0]
    rot_to_orig = [(start + k) % n for k in range(n)]
    ch = sorted(((i - start) % n, (j - start) % n) for i, j in chords)
    regions = []
    rest = []
    cursor = 0
    for i, j in ch:
        if not (cursor <= i < j):
            raise ValueError("chords are not cyclically consecutive")
        rest.extend(rot_to_orig[cursor:i + 1])
        if j > i + 1:
            regions.append(rot_to_orig[i:j + 1])
        cursor = j
    rest.extend(rot_to_orig[cursor:])
    if len(rest) > 2:
        regions.append(rest)
    return regions


def _region_signs(region, seg_sign, n):
    """Signs of the boundary segments of a region of the original polygon."""
    out = set()
    for a, b in zip(region[:-1], region[1:]):
        if (a + 1) % n == b:
            s = seg_sign[a]
            if s != 0:
                out.add(s)
    return out


def cut(mesh: SimplicialMesh, phi: FEScalarField, degree: int,
        tol_merge: float = 1e-8) -> CutMesh:
    """Subdivide the background mesh along the zero set of phi.

    Conformity is automatic: intersection points are computed once per
    global edge.  Crossed triangles become convex fans separated along the
    chords joining consecutive sign changes; each sub-triangle is classified
    by the sign of phi at its centroid.
    """
    if phi.mesh is not mesh:
        raise ValueError("field lives on a different mesh")
    if degree != phi.degree:
        raise ValueError("cut degree must match the field degree")

    ztol = 1e-12 * mesh.diameter
    vvals = phi.vertex_values
    vzero = np.abs(vvals) <= ztol

    pts = [tuple(p) for p in mesh.vertices]
    added_on_edge = {}
    for eid in range(len(mesh.edges)):
        vals = phi.edge_restriction(eid)
        a, b = mesh.edges[eid]
        if vzero[a] and vzero[b] and abs(vals[2]) <= ztol:
            continue  # edge lies on the zero set
        roots = edge_roots(vals, degree, tol_merge)
        if vzero[a]:
            roots = [t for t in roots if t > 0.05]
        if vzero[b]:
            roots = [t for t in roots if t < 0.95]
        if roots:
            pa, pb = mesh.vertices[a], mesh.vertices[b]
            entries = []
            for t in roots:
                pts.append(tuple(pa + t * (pb - pa)))
                entries.append((t, len(pts) - 1))
            added_on_edge[eid] = entries

    def sgn(x):
        return 0 if abs(x) <= ztol else (1 if x > 0 else -1)

    sub_tris, inside, parent_of = [], [], []

    def emit(tri_pts, tri_id, centroid_lam=None):
        p = np.asarray([pts[i] for i in tri_pts])
        area = 0.5 * ((p[1, 0] - p[0, 0]) * (p[2, 1] - p[0, 1])
                      - (p[1, 1] - p[0, 1]) * (p[2, 0] - p[0, 0]))
        if area <= 1e-13 * mesh.areas[tri_id]:
            return
        if centroid_lam is None:
            centroid_lam = _barycentric(mesh, tri_id, p.mean(axis=0))
        val = phi.eval_tri(tri_id, centroid_lam)
        sub_tris.append(tuple(tri_pts))
        inside.append(val < 0)
        parent_of.append(tri_id)

    for tri_id in range(len(mesh.triangles)):
        tri = mesh.triangles[tri_id]
        eids = mesh.tri_edges[tri_id]
        has_pts = any(int(e) in added_on_edge for e in eids)
        if not has_pts and not np.any(vzero[tri]):
            emit(tri, tri_id, (1 / 3, 1 / 3, 1 / 3))
            continue

        # polygon around the triangle with every edge point inserted
        poly = []          # vertex ids
        zero_flag = []     # is the polygon vertex on the zero set
        seg = []           # (edge id, t0, t1) of the segment leaving vertex k
        for loc in range(3):
            a, b = tri[loc], tri[(loc + 1) % 3]
            eid = int(eids[loc])
            forward = mesh.edges[eid][0] == a
            entries = added_on_edge.get(eid, [])
            if not forward:
                entries = [(1.0 - t, vid) for t, vid in entries][::-1]
            poly.append(int(a))
            zero_flag.append(bool(vzero[a]))
            params = [0.0] + [t for t, _ in entries] + [1.0]
            for k, (t, vid) in enumerate(entries):
                seg.append((eid, params[k], params[k + 1], forward))
                poly.append(int(vid))
                zero_flag.append(True)
            seg.append((eid, params[len(entries)], 1.0, forward))
        n = len(poly)

        # sign of phi on each boundary segment (midpoint of the restriction)
        seg_sign = []
        for eid, t0, t1, forward in seg:
            tm = 0.5 * (t0 + t1)
            if not forward:
                tm = 1.0 - tm
            seg_sign.append(sgn(float(phi.eval_edge(eid, tm))))

        if not has_pts and n == 3:
            emit(tri, tri_id, (1 / 3, 1 / 3, 1 / 3))
            continue

        # crossing zeros: zero vertices separating segments of opposite sign
        def arc_sign_before(k):
            for step in range(1, n + 1):
                s = seg_sign[(k - step) % n]
                if s != 0:
                    return s
            return 0

        def arc_sign_after(k):
            for step in range(n):
                s = seg_sign[(k + step) % n]
                if s != 0:
                    return s
            return 0

        crossings = [k for k in range(n)
                     if zero_flag[k]
                     and arc_sign_before(k) * arc_sign_after(k) < 0]

        chords = []
        if len(crossings) >= 2:
            m = len(crossings)
            best = None
            for offset in (0, 1):
                cand = [(crossings[(2 * i + offset) % m],
                         crossings[(2 * i + 1 + offset) % m])
                        for i in range(m // 2)]
                regions = _split_positions(cand, n)
                ok = all(len(_region_signs(r, seg_sign, n)) <= 1
                         for r in regions)
                if ok:
                    best = cand
                    break
                if best is None:
                    best = cand
            chords = best

        for region in _split_positions(chords, n):
            ids = [poly[k] for k in region]
            for k in range(1, len(ids) - 1):
                emit((ids[0], ids[k], ids[k + 1]), tri_id)

    cm = CutMesh(mesh, np.asarray(pts), np.asarray(sub_tris, dtype=int),
                 np.asarray(inside, dtype=bool),
                 np.asarray(parent_of, dtype=int), added_on_edge, vzero, phi)
    return cm


def _barycentric(mesh, tri_id, p):
    tri = mesh.triangles[tri_id]
    a, b, c = mesh.vertices[tri]
    m = np.array([[b[0] - a[0], c[0] - a[0]],
                  [b[1] - a[1], c[1] - a[1]]])
    l1, l2 = np.linalg.solve(m, np.asarray(p) - a)
    return (1.0 - l1 - l2, l1, l2)


# ---------------------------------------------------------------------------
# boundary classification and quality
# ---------------------------------------------------------------------------

def classify_boundary(cm: CutMesh, rigid=None, band_fraction: float = 0.2):
    """Tag the boundary edges of the inside submesh.

    Edges on the hold-all boundary inherit their zone tags; remaining edges
    (the cut interface and untagged parts of the hold-all boundary) become
    contact candidates when a rigid body is present and the gap at the edge
    midpoint is below ``band_fraction`` times the domain diameter, free
    otherwise.  A declared Dirichlet zone must be populated; without one
    (fixed-contact-zone mode) the contact zone plays the anchoring role.
    """
    diam = cm.parent.diameter
    out = []
    for v0, v1, sub, pe in cm.omega_boundary():
        tag = cm.parent.boundary_tags.get(pe, None) if pe is not None else None
        if tag in (DIRICHLET, NEUMANN, CONTACT):
            out.append(BoundaryEdge(v0, v1, tag, sub, pe))
            continue
        mid = 0.5 * (cm.vertices[v0] + cm.vertices[v1])
        if rigid is not None and rigid.gap(mid[None, :])[0] < band_fraction * diam:
            out.append(BoundaryEdge(v0, v1, CONTACT, sub, pe))
        else:
            out.append(BoundaryEdge(v0, v1, FREE, sub, pe))

    has_dirichlet_zone = DIRICHLET in cm.parent.zone_spec
    n_dir = sum(1 for e in out if e.tag == DIRICHLET)
    n_con = sum(1 for e in out if e.tag == CONTACT)
    if has_dirichlet_zone and n_dir == 0:
        raise AdmissibilityError("shape detached from the Dirichlet zone")
    if not has_dirichlet_zone and n_con == 0:
        raise AdmissibilityError(
            "no Dirichlet zone declared and no contact anchoring present")
    return out


def mesh_quality(cm: CutMesh):
    """(min angle in degrees, min edge length, inside area)."""
    t = cm.sub_triangles[cm.inside]
    v = cm.vertices
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    min_angle = np.inf
    min_edge = np.inf
    for a, b, c in ((p0, p1, p2), (p1, p2, p0), (p2, p0, p1)):
        u = b - a
        w = c - a
        lu = np.linalg.norm(u, axis=1)
        lw = np.linalg.norm(w, axis=1)
        cosang = np.clip(np.sum(u * w, axis=1) / (lu * lw), -1.0, 1.0)
        min_angle = min(min_angle, np.degrees(np.arccos(cosang)).min())
        min_edge = min(min_edge, lu.min())
    area = float(cm.sub_areas()[cm.inside].sum())
    return float(min_angle), float(min_edge), area
