"""Cavity geometry, initial triangulation and conforming refinement.

The computational domain is the upper half disc of radius ``R`` joined
with the cavity below the ground line, minus any PEC humps.  Edges carry
a tag:

``WALL``       cavity wall and hump boundaries (S)
``GROUND``     ground line outside the aperture
``ARC``        the artificial semicircle |x| = R
``APERTURE``   interior edges on the opening of the cavity
``INTERFACE``  interior edges separating material regions

Refinement is newest-vertex bisection with closure; midpoints of arc
edges are pushed back onto the circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
import shapely
import triangle
from shapely.geometry import LineString, MultiLineString, Point, Polygon, box
from shapely.ops import unary_union

INTERIOR, WALL, GROUND, ARC, APERTURE, INTERFACE = 0, 1, 2, 3, 4, 5
TAG_NAMES = {WALL: "S", GROUND: "ground", ARC: "arc", APERTURE: "aperture", INTERFACE: "interface"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}

UPPER_REGION = 0
CAVITY_REGION = 1


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Hump:
    """Axis-aligned PEC rectangle [x0, x1] x [y0, y1] removed from the domain."""

    x0: float
    x1: float
    y0: float
    y1: float

    def polygon(self) -> Polygon:
        return box(self.x0, self.y0, self.x1, self.y1)


@dataclass(frozen=True)
class Coating:
    """Material sub-region given by a polygon; ``region`` keys into the MaterialMap."""

    vertices: tuple[tuple[float, float], ...]
    region: int

    def polygon(self) -> Polygon:
        return Polygon(self.vertices)


@dataclass(frozen=True)
class CavityGeometry:
    R: float
    R_hat: float
    cavity_polygon: tuple[tuple[float, float], ...]
    humps: tuple[Hump, ...] = ()
    coatings: tuple[Coating, ...] = ()

    def __post_init__(self) -> None:
        self.validate()

    @property
    def aperture_extent(self) -> tuple[float, float]:
        xs = [x for x, y in self.cavity_polygon if y == 0.0]
        return min(xs), max(xs)

    def validate(self) -> None:
        if not (self.R > 0 and 0 < self.R_hat < self.R):
            raise GeometryError(f"need 0 < R_hat < R, got R={self.R}, R_hat={self.R_hat}")
        pts = self.cavity_polygon
        if len(pts) < 3:
            raise GeometryError("cavity polygon needs at least 3 vertices")
        on_ground = [p for p in pts if p[1] == 0.0]
        if len(on_ground) != 2 or any(p[1] > 0 for p in pts):
            raise GeometryError("cavity polygon must have exactly two vertices on x2 = 0, the rest below")
        poly = Polygon(pts)
        if not poly.is_valid or not poly.exterior.is_simple:
            raise GeometryError("cavity polygon self-intersects")
        xl, xr = self.aperture_extent
        if xl < -self.R or xr > self.R:
            raise GeometryError("aperture must lie inside [-R, R]")
        hp = [h.polygon() for h in self.humps]
        for i in range(len(hp)):
            for k in range(i + 1, len(hp)):
                if hp[i].intersection(hp[k]).area > 0:
                    raise GeometryError(f"humps {i} and {k} overlap")
        # inhomogeneities must stay inside B_Rhat^+ joined with the cavity
        inner = unary_union(
            [Point(0.0, 0.0).buffer(self.R_hat, 256).intersection(box(-self.R, 0.0, self.R, self.R)), poly]
        )
        tiny = 1e-12 * inner.area
        for h in hp:
            if h.difference(inner).area > tiny:
                raise GeometryError("hump leaves the region enclosed by R_hat and the cavity")
        for c in self.coatings:
            cp = c.polygon()
            if not cp.is_valid:
                raise GeometryError(f"coating region {c.region} is not a valid polygon")
            if cp.difference(inner).area > tiny:
                raise GeometryError(f"coating region {c.region} leaves the region enclosed by R_hat and the cavity")
            if c.region in (UPPER_REGION, CAVITY_REGION):
                raise GeometryError(f"coating region id {c.region} is reserved")

    def area(self) -> float:
        """Exact area of the domain (true semicircle, humps removed)."""
        half = 0.5 * math.pi * self.R**2
        cav = Polygon(self.cavity_polygon).area
        humps = unary_union([h.polygon() for h in self.humps]) if self.humps else None
        hole = 0.0
        if humps is not None:
            # humps stay inside the domain, so the removed area is the hump area
            hole = humps.area
        return half + cav - hole


def rectangular_cavity(
    width: float,
    depth: float,
    R: float,
    R_hat: float,
    coating_thickness: float | None = None,
    coating_region: int = 2,
    humps: Sequence[Hump] = (),
) -> CavityGeometry:
    """Centred rectangular cavity, optionally with coated vertical walls."""
    a = 0.5 * width
    poly = ((-a, 0.0), (-a, -depth), (a, -depth), (a, 0.0))
    coatings: list[Coating] = []
    if coating_thickness:
        t = coating_thickness
        coatings.append(Coating(((-a, 0.0), (-a, -depth), (-a + t, -depth), (-a + t, 0.0)), coating_region))
        coatings.append(Coating(((a - t, 0.0), (a - t, -depth), (a, -depth), (a, 0.0)), coating_region))
    return CavityGeometry(R=R, R_hat=R_hat, cavity_polygon=poly, humps=tuple(humps), coatings=tuple(coatings))


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation.

    ``triangles[t] = (v0, v1, v2)`` counter-clockwise; the edge (v1, v2)
    opposite ``v0`` is the refinement edge.  ``tagged_edges``/``tags``
    list every non-interior edge plus interior constraint edges.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    region: np.ndarray
    tagged_edges: np.ndarray
    tags: np.ndarray
    R: float
    generation: int = 0
    parent: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @cached_property
    def _edge_data(self) -> tuple[np.ndarray, np.ndarray]:
        t = self.triangles
        # local edge k is opposite vertex k
        loc = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        loc = np.sort(loc, axis=1)
        edges, inv = np.unique(loc, axis=0, return_inverse=True)
        return edges, inv.reshape(-1, 3)

    @property
    def edges(self) -> np.ndarray:
        return self._edge_data[0]

    @property
    def elem2edge(self) -> np.ndarray:
        return self._edge_data[1]

    @cached_property
    def edge2elem(self) -> np.ndarray:
        """(n_edges, 2) adjacent triangles; -1 where there is none."""
        e2t = np.full((len(self.edges), 2), -1, dtype=np.int64)
        flat = self.elem2edge.ravel()
        owner = np.repeat(np.arange(self.n_triangles), 3)
        order = np.argsort(flat, kind="stable")
        fs, os_ = flat[order], owner[order]
        first = np.ones(len(fs), dtype=bool)
        first[1:] = fs[1:] != fs[:-1]
        e2t[fs[first], 0] = os_[first]
        e2t[fs[~first], 1] = os_[~first]
        return e2t

    def edge_index(self, pairs: np.ndarray) -> np.ndarray:
        """Indices into :attr:`edges` of node pairs (any order)."""
        pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
        n = self.n_nodes
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        q = pairs[:, 0] * n + pairs[:, 1]
        idx = np.searchsorted(keys, q)
        if np.any(idx >= len(keys)) or np.any(keys[np.minimum(idx, len(keys) - 1)] != q):
            raise KeyError("node pair is not a mesh edge")
        return idx

    @cached_property
    def edge_tags(self) -> np.ndarray:
        tags = np.zeros(len(self.edges), dtype=np.int64)
        if len(self.tagged_edges):
            tags[self.edge_index(self.tagged_edges)] = self.tags
        return tags

    def nodes_with_tag(self, *tags: int) -> np.ndarray:
        sel = np.isin(self.edge_tags, tags)
        return np.unique(self.edges[sel])

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        l = np.stack(
            [np.linalg.norm(p[:, 1] - p[:, 2], axis=1), np.linalg.norm(p[:, 2] - p[:, 0], axis=1),
             np.linalg.norm(p[:, 0] - p[:, 1], axis=1)],
            axis=1,
        )
        return l.max(axis=1)

    def min_angle(self) -> float:
        p = self.nodes[self.triangles]
        out = np.inf
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            c = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            out = min(out, float(np.min(np.arccos(np.clip(c, -1, 1)))))
        return out

    def check(self) -> None:
        """Raise AssertionError unless the mesh is conforming and positively oriented."""
        assert np.all(self.areas > 0), "non-positive triangle area"
        e2t = self.edge2elem
        counts = (e2t >= 0).sum(axis=1)
        assert np.all(counts >= 1)
        boundary = counts == 1
        tagged_bnd = np.isin(self.edge_tags, (WALL, GROUND, ARC))
        assert np.array_equal(boundary, tagged_bnd), "boundary edges and boundary tags disagree"
        # a hanging node would show up as a boundary edge in the interior,
        # which the tag comparison above already rules out
        arc = self.nodes_with_tag(ARC)
        r = np.hypot(self.nodes[arc, 0], self.nodes[arc, 1])
        assert np.all(np.abs(r - self.R) <= 1e-12 * self.R), "arc node off the circle"


# ---------------------------------------------------------------------------
# initial mesh
# ---------------------------------------------------------------------------

def _segments(geom: CavityGeometry, h0: float) -> tuple[Polygon, list, list]:
    R = geom.R
    n_arc = max(8, math.ceil(math.pi * R / h0)) if math.isfinite(h0) else 8
    ang = np.linspace(0.0, math.pi, n_arc + 1)
    arc = [(R * math.cos(a), R * math.sin(a)) for a in ang]
    arc[0] = (R, 0.0)
    arc[-1] = (-R, 0.0)
    xl, xr = geom.aperture_extent

    # boundary loop: arc (counter-clockwise), ground left, cavity, ground right
    cav = list(geom.cavity_polygon)
    i_left = cav.index((xl, 0.0))
    i_right = cav.index((xr, 0.0))
    n = len(cav)
    step = 1 if (i_left + 1) % n != i_right else -1
    path = []
    i = i_left
    while True:
        path.append(cav[i])
        if i == i_right:
            break
        i = (i + step) % n
    loop = arc + path
    domain = Polygon(loop)
    if not domain.is_valid:
        domain = shapely.make_valid(domain)
    if geom.humps:
        domain = domain.difference(unary_union([h.polygon() for h in geom.humps]))
    if domain.geom_type != "Polygon":
        raise GeometryError("computational domain is not connected")

    lines = [LineString(domain.exterior.coords)] + [LineString(r.coords) for r in domain.interiors]
    aperture = LineString([(xl, 0.0), (xr, 0.0)]).intersection(domain)
    if not aperture.is_empty:
        lines.append(aperture)
    for c in geom.coatings:
        lines.append(LineString(c.polygon().exterior.coords).intersection(domain))
    return domain, lines, arc


def _classify(p: np.ndarray, q: np.ndarray, geom: CavityGeometry, domain: Polygon) -> int:
    R = geom.R
    mid = Point(0.5 * (p + q))
    on_boundary = domain.boundary.distance(mid) <= 1e-12 * R
    xl, xr = geom.aperture_extent
    if on_boundary:
        rp, rq = math.hypot(*p), math.hypot(*q)
        if abs(rp - R) <= 1e-12 * R and abs(rq - R) <= 1e-12 * R and mid.y > 0:
            return ARC
        if p[1] == 0.0 and q[1] == 0.0 and (mid.x <= xl or mid.x >= xr):
            return GROUND
        return WALL
    if p[1] == 0.0 and q[1] == 0.0 and xl <= mid.x <= xr:
        return APERTURE
    return INTERFACE


def _seeds(geom: CavityGeometry, domain: Polygon) -> list[list[float]]:
    R = geom.R
    half = Point(0, 0).buffer(R, 256).intersection(box(-R, 0, R, R))
    coat = unary_union([c.polygon() for c in geom.coatings]) if geom.coatings else Polygon()
    seeds = []

    def add(region_geom, rid: int) -> None:
        g = region_geom.intersection(domain)
        parts = getattr(g, "geoms", [g])
        for part in parts:
            if part.geom_type == "Polygon" and part.area > 0:
                pt = part.representative_point()
                seeds.append([pt.x, pt.y, float(rid), 0.0])

    add(half.difference(coat), UPPER_REGION)
    add(Polygon(geom.cavity_polygon).difference(coat), CAVITY_REGION)
    for c in geom.coatings:
        add(c.polygon(), c.region)
    return seeds


def _orient_longest(nodes: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Rotate each triangle so vertex 0 is opposite its longest edge."""
    p = nodes[tri]
    l = np.stack(
        [np.sum((p[:, 1] - p[:, 2]) ** 2, axis=1), np.sum((p[:, 2] - p[:, 0]) ** 2, axis=1),
         np.sum((p[:, 0] - p[:, 1]) ** 2, axis=1)],
        axis=1,
    )
    k = np.argmax(l, axis=1)
    idx = (k[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(tri, idx, axis=1)


def max_area_for(h0: float) -> float:
    # area of an equilateral triangle with side h0/2; with the 30 degree
    # angle bound this keeps every element diameter well below h0
    return math.sqrt(3.0) / 16.0 * h0 * h0


def initial_mesh(geom: CavityGeometry, h0: float) -> Mesh:
    """Constrained quality Delaunay mesh of the domain with element diameter <= h0.

    ``h0 = inf`` gives the coarsest triangulation honouring the constraints.
    """
    if not h0 > 0:
        raise GeometryError("h0 must be positive")
    domain, lines, _ = _segments(geom, h0)
    noded = unary_union(lines)
    pieces = noded.geoms if isinstance(noded, MultiLineString) else [noded]

    scale = geom.R
    index: dict[tuple[float, float], int] = {}
    verts: list[tuple[float, float]] = []

    def vid(x: float, y: float) -> int:
        key = (round(x / scale, 12), round(y / scale, 12))
        if key not in index:
            index[key] = len(verts)
            verts.append((x, y))
        return index[key]

    segs: list[tuple[int, int]] = []
    marks: list[int] = []
    seen = set()
    for piece in pieces:
        if piece.geom_type != "LineString":
            continue
        c = list(piece.coords)
        for a, b in zip(c[:-1], c[1:]):
            i, k = vid(*a), vid(*b)
            if i == k or (min(i, k), max(i, k)) in seen:
                continue
            seen.add((min(i, k), max(i, k)))
            segs.append((i, k))
            marks.append(_classify(np.array(verts[i]), np.array(verts[k]), geom, domain))

    data = {
        "vertices": np.array(verts, dtype=float),
        "segments": np.array(segs, dtype=np.int32),
        "segment_markers": np.array(marks, dtype=np.int32)[:, None] + 1,
        "regions": np.array(_seeds(geom, domain), dtype=float),
    }
    holes = [h.polygon().representative_point() for h in geom.humps]
    holes = [p for p in holes if domain.exterior.distance(p) > 0 and not domain.contains(p)]
    if holes:
        data["holes"] = np.array([[p.x, p.y] for p in holes])
    opts = "pzAQ"
    if math.isfinite(h0):
        opts += "q30a%.24f" % max_area_for(h0)
    out = triangle.triangulate(data, opts)

    nodes = np.asarray(out["vertices"], dtype=float)
    tri = np.asarray(out["triangles"], dtype=np.int64)
    region = np.rint(np.asarray(out["triangle_attributes"]).ravel()).astype(np.int64)
    seg = np.asarray(out["segments"], dtype=np.int64)
    sm = np.asarray(out["segment_markers"]).ravel().astype(np.int64) - 1

    # Steiner points placed on arc chords go back onto the circle
    arc_nodes = np.unique(seg[sm == ARC])
    r = np.hypot(nodes[arc_nodes, 0], nodes[arc_nodes, 1])
    nodes[arc_nodes] *= (geom.R / r)[:, None]
    ground = np.unique(seg[np.isin(sm, (GROUND, APERTURE))])
    nodes[ground, 1] = 0.0

    keep = sm != INTERIOR
    mesh = Mesh(
        nodes=nodes,
        triangles=_orient_longest(nodes, tri),
        region=region,
        tagged_edges=seg[keep],
        tags=sm[keep],
        R=geom.R,
        generation=0,
        parent=np.full(len(tri), -1, dtype=np.int64),
    )
    if np.any(mesh.areas <= 0):
        raise GeometryError("initial mesh has inverted triangles after arc projection")
    return mesh


# ---------------------------------------------------------------------------
# newest-vertex bisection
# ---------------------------------------------------------------------------

def refine(mesh: Mesh, marked) -> Mesh:
    """Bisect every marked triangle (at least once) and close the mesh."""
    marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked, dtype=np.int64))
    if marked.size == 0:
        raise ValueError("refine needs at least one marked triangle")
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise IndexError("marked triangle id out of range")

    e2e = mesh.elem2edge
    cut = np.zeros(len(mesh.edges), dtype=bool)
    cut[e2e[marked, 0]] = True
    while True:
        need = (cut[e2e[:, 1]] | cut[e2e[:, 2]]) & ~cut[e2e[:, 0]]
        if not need.any():
            break
        cut[e2e[need, 0]] = True
    return _bisect(mesh, cut)


def refine_arc(mesh: Mesh, max_chord: float) -> Mesh:
    """Bisect next to the semicircle until no arc chord is longer than ``max_chord``."""
    if not max_chord > 0:
        raise ValueError("max_chord must be positive")
    while True:
        arc_edges = np.flatnonzero(mesh.edge_tags == ARC)
        e = mesh.edges[arc_edges]
        long = arc_edges[np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1) > max_chord]
        if long.size == 0:
            return mesh
        mesh = refine(mesh, np.unique(mesh.edge2elem[long, 0]))


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every edge once: each triangle becomes four, element size halves."""
    return _bisect(mesh, np.ones(len(mesh.edges), dtype=bool))


def _bisect(mesh: Mesh, cut: np.ndarray) -> Mesh:
    """Bisect along a closed set of cut edges (refinement edge cut wherever any edge is)."""
    t = mesh.triangles
    e2e = mesh.elem2edge
    edges = mesh.edges

    # new nodes at midpoints of cut edges
    n0 = mesh.n_nodes
    cut_ids = np.flatnonzero(cut)
    new_of_edge = np.full(len(edges), -1, dtype=np.int64)
    new_of_edge[cut_ids] = n0 + np.arange(len(cut_ids))
    mid = 0.5 * (mesh.nodes[edges[cut_ids, 0]] + mesh.nodes[edges[cut_ids, 1]])
    etag = mesh.edge_tags[cut_ids]
    on_arc = etag == ARC
    if on_arc.any():
        r = np.hypot(mid[on_arc, 0], mid[on_arc, 1])
        mid[on_arc] *= (mesh.R / r)[:, None]
    flat = np.isin(etag, (GROUND, APERTURE))
    mid[flat, 1] = 0.0
    nodes = np.vstack([mesh.nodes, mid])

    c0 = cut[e2e[:, 0]]
    c1 = cut[e2e[:, 1]]
    c2 = cut[e2e[:, 2]]
    new_t: list[np.ndarray] = []
    new_p: list[np.ndarray] = []
    new_r: list[np.ndarray] = []
    ids = np.arange(mesh.n_triangles)

    keep = ~c0
    new_t.append(t[keep])
    new_p.append(ids[keep])

    # bisect: (p1,p2,p3) -> (p4,p1,p2), (p4,p3,p1) with p4 = mid(p2,p3)
    b = c0
    p1, p2, p3 = t[b, 0], t[b, 1], t[b, 2]
    p4 = new_of_edge[e2e[b, 0]]
    left = np.stack([p4, p1, p2], axis=1)   # refinement edge (p1,p2) = old edge 2
    right = np.stack([p4, p3, p1], axis=1)  # refinement edge (p3,p1) = old edge 1
    bl, br = c2[b], c1[b]
    pid = ids[b]

    # second-level bisection of the children whose refinement edge is cut
    new_t.append(left[~bl])
    new_p.append(pid[~bl])
    p5 = new_of_edge[e2e[b, 2]][bl]
    L = left[bl]
    new_t.append(np.stack([p5, L[:, 0], L[:, 1]], axis=1))
    new_t.append(np.stack([p5, L[:, 2], L[:, 0]], axis=1))
    new_p.extend([pid[bl], pid[bl]])

    new_t.append(right[~br])
    new_p.append(pid[~br])
    p6 = new_of_edge[e2e[b, 1]][br]
    Rr = right[br]
    new_t.append(np.stack([p6, Rr[:, 0], Rr[:, 1]], axis=1))
    new_t.append(np.stack([p6, Rr[:, 2], Rr[:, 0]], axis=1))
    new_p.extend([pid[br], pid[br]])

    tri = np.vstack(new_t)
    parent = np.concatenate(new_p)
    region = mesh.region[parent]

    # tagged edges: split the cut ones, keeping the tag
    te = mesh.tagged_edges
    te_ids = mesh.edge_index(te) if len(te) else np.zeros(0, dtype=np.int64)
    split = cut[te_ids]
    m = new_of_edge[te_ids[split]]
    tagged = np.vstack([te[~split], np.stack([te[split, 0], m], axis=1), np.stack([m, te[split, 1]], axis=1)])
    tags = np.concatenate([mesh.tags[~split], mesh.tags[split], mesh.tags[split]])

    return Mesh(
        nodes=nodes,
        triangles=tri,
        region=region,
        tagged_edges=tagged,
        tags=tags,
        R=mesh.R,
        generation=mesh.generation + 1,
        parent=parent,
    )


# ---------------------------------------------------------------------------
# boundary arc
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryArc:
    """Nodes on the semicircle ordered by angle.

    ``lengths`` has M + 1 entries: ``lengths[i]`` is the chord between
    nodes i-1 and i, with zero-length virtual chords at both ends.
    """

    node_ids: np.ndarray
    phi: np.ndarray
    lengths: np.ndarray
    R: float

    @property
    def M(self) -> int:
        return len(self.node_ids)

    @property
    def points(self) -> np.ndarray:
        return self.R * np.stack([np.cos(self.phi), np.sin(self.phi)], axis=1)


def arc_from_angles(phi: np.ndarray, R: float, node_ids: np.ndarray | None = None) -> BoundaryArc:
    phi = np.asarray(phi, dtype=float)
    pts = R * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    lengths = np.zeros(len(phi) + 1)
    lengths[1:-1] = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if node_ids is None:
        node_ids = np.arange(len(phi))
    return BoundaryArc(node_ids=np.asarray(node_ids), phi=phi, lengths=lengths, R=float(R))


def boundary_arc(mesh: Mesh) -> BoundaryArc:
    ids = mesh.nodes_with_tag(ARC)
    if len(ids) < 2:
        raise GeometryError("mesh has fewer than two nodes on the arc")
    x, y = mesh.nodes[ids, 0], mesh.nodes[ids, 1]
    phi = np.arctan2(np.abs(y), x)
    order = np.argsort(phi, kind="stable")
    ids, phi = ids[order], phi[order]
    pts = mesh.nodes[ids]
    lengths = np.zeros(len(ids) + 1)
    lengths[1:-1] = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return BoundaryArc(node_ids=ids, phi=phi, lengths=lengths, R=mesh.R)


# ---------------------------------------------------------------------------
# plain-text export
# ---------------------------------------------------------------------------

def write_mesh(mesh: Mesh, path) -> None:
    lines = [f"nodes {mesh.n_nodes} triangles {mesh.n_triangles}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.nodes]
    lines += [f"{i} {j} {k} {r}" for (i, j, k), r in zip(mesh.triangles.tolist(), mesh.region.tolist())]
    lines += [f"{i} {j} {TAG_NAMES[int(g)]}" for (i, j), g in zip(mesh.tagged_edges.tolist(), mesh.tags.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    rows = Path(path).read_text().splitlines()
    head = rows[0].split()
    if head[0] != "nodes" or head[2] != "triangles":
        raise ValueError(f"bad mesh header: {rows[0]!r}")
    n, t = int(head[1]), int(head[3])
    nodes = np.array([[float(v) for v in r.split()] for r in rows[1 : 1 + n]]).reshape(n, 2)
    tri_rows = [[int(v) for v in r.split()] for r in rows[1 + n : 1 + n + t]]
    tri = np.array(tri_rows, dtype=np.int64).reshape(t, 4)
    edge_rows = [r.split() for r in rows[1 + n + t :] if r.strip()]
    tagged = np.array([[int(a), int(b)] for a, b, _ in edge_rows], dtype=np.int64).reshape(-1, 2)
    tags = np.array([TAG_CODES[g] for _, _, g in edge_rows], dtype=np.int64)
    arc = np.unique(tagged[tags == ARC]) if len(tags) else np.zeros(0, dtype=np.int64)
    R = float(np.max(np.hypot(nodes[arc, 0], nodes[arc, 1]))) if len(arc) else float("nan")
    return Mesh(nodes=nodes, triangles=tri[:, :3], region=tri[:, 3], tagged_edges=tagged, tags=tags, R=R)
