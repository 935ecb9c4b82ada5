"""Planar geometry for spatial blocks.

Polygon areas, point-in-polygon tests, uniform within-polygon sampling and
Voronoi tessellations clipped to a bounding box. Coordinates are treated as
planar throughout; geographic data must be projected before it reaches this
module. All functions are pure and safe for concurrent read access.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidGeometryError

# Tolerance (domain units) for on-edge point containment and clipping.
EDGE_TOL = 1e-12


def _as_vertex_array(vertices) -> np.ndarray:
    v = np.asarray(vertices, dtype=float)
    if v.ndim != 2 or v.shape[1] != 2:
        raise InvalidGeometryError(f"vertices must be an (m, 2) array, got shape {v.shape}")
    # drop an explicitly repeated closing vertex
    if len(v) > 1 and np.allclose(v[0], v[-1]):
        v = v[:-1]
    return v


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    """Strict crossing test for two segments with no shared endpoints."""

    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 \
        and d3 != 0 and d4 != 0


def _ring_is_simple(v: np.ndarray) -> bool:
    m = len(v)
    for i in range(m):
        a1, a2 = v[i], v[(i + 1) % m]
        for j in range(i + 1, m):
            # skip adjacent edges (they share an endpoint by construction)
            if j == i or (j + 1) % m == i or (i + 1) % m == j:
                continue
            if _segments_properly_intersect(a1, a2, v[j], v[(j + 1) % m]):
                return False
    return True


@dataclass(frozen=True)
class Polygon:
    """Simple planar polygon stored as an open CCW ring.

    The constructor normalizes orientation to counter-clockwise and rejects
    rings with fewer than 3 vertices, zero area, or self-intersections.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = _as_vertex_array(self.vertices)
        if len(v) < 3:
            raise InvalidGeometryError(f"polygon needs at least 3 vertices, got {len(v)}")
        area2 = _signed_area(v)
        scale = max(1.0, float(np.abs(v).max()))
        if abs(area2) <= EDGE_TOL * scale * scale:
            raise InvalidGeometryError("degenerate polygon: signed area is zero")
        if area2 < 0:
            v = v[::-1].copy()
        if not _ring_is_simple(v):
            raise InvalidGeometryError("polygon ring is self-intersecting")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def bounding_box(self) -> "BoundingBox":
        return BoundingBox(self.vertices.min(axis=0), self.vertices.max(axis=0))

    def centroid(self) -> np.ndarray:
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a = cross.sum() / 2.0
        cx = np.sum((x + xn) * cross) / (6.0 * a)
        cy = np.sum((y + yn) * cross) / (6.0 * a)
        return np.array([cx, cy])


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by min and max corners (componentwise min < max)."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(2)
        hi = np.asarray(self.hi, dtype=float).reshape(2)
        if not np.all(lo < hi):
            raise InvalidGeometryError(f"box min corner must be < max corner, got {lo}, {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def as_polygon(self) -> Polygon:
        (x0, y0), (x1, y1) = self.lo, self.hi
        return Polygon(np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]]))

    @property
    def area(self) -> float:
        return float(np.prod(self.hi - self.lo))


def polygon_area(poly: Polygon) -> float:
    """Shoelace area of the polygon (positive; the ring is CCW)."""
    return _signed_area(poly.vertices)


def points_in_polygon(poly: Polygon, points: np.ndarray) -> np.ndarray:
    """Vectorized ray-casting containment test; on-edge points count as inside.

    Parameters
    ----------
    points : (n, 2) array

    Returns
    -------
    (n,) boolean array
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    x1, y1 = v[:, 0][None, :], v[:, 1][None, :]
    x2, y2 = w[:, 0][None, :], w[:, 1][None, :]

    straddles = (y1 > py) != (y2 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = (x2 - x1) * (py - y1) / (y2 - y1) + x1
    crossings = straddles & (px < x_cross)
    inside = np.sum(crossings, axis=1) % 2 == 1

    # on-edge check: squared distance from point to each segment
    ex, ey = x2 - x1, y2 - y1
    seg_len2 = ex * ex + ey * ey
    t = ((px - x1) * ex + (py - y1) * ey) / np.where(seg_len2 > 0, seg_len2, 1.0)
    t = np.clip(t, 0.0, 1.0)
    dx = px - (x1 + t * ex)
    dy = py - (y1 + t * ey)
    on_edge = np.any(dx * dx + dy * dy <= EDGE_TOL * EDGE_TOL, axis=1)
    return inside | on_edge


def point_in_polygon(poly: Polygon, point) -> bool:
    """Scalar convenience wrapper around :func:`points_in_polygon`."""
    return bool(points_in_polygon(poly, np.asarray(point, dtype=float)[None, :])[0])


def sample_in_polygon(poly: Polygon, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `n` uniform points inside the polygon by rejection from its bounding box.

    Returns an (n, 2) array. Deterministic given the generator state.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    box = poly.bounding_box
    span = box.hi - box.lo
    accept_rate = polygon_area(poly) / box.area
    out = np.empty((n, 2))
    filled = 0
    # batch size sized to land close to n accepted points per round
    batch = max(32, int(1.5 * n / max(accept_rate, 1e-12)))
    batch = min(batch, 4_000_000)
    while filled < n:
        cand = box.lo + rng.random((batch, 2)) * span
        keep = cand[points_in_polygon(poly, cand)]
        take = min(len(keep), n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def _clip_halfplane(vertices: np.ndarray, anchor: np.ndarray, normal: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex ring to {x : (x - anchor) . normal <= 0}."""
    m = len(vertices)
    if m == 0:
        return vertices
    d = (vertices - anchor) @ normal
    out = []
    for i in range(m):
        j = (i + 1) % m
        di, dj = d[i], d[j]
        if di <= 0:
            out.append(vertices[i])
            if dj > 0:
                t = di / (di - dj)
                out.append(vertices[i] + t * (vertices[j] - vertices[i]))
        elif dj <= 0:
            t = di / (di - dj)
            out.append(vertices[i] + t * (vertices[j] - vertices[i]))
    return np.asarray(out).reshape(-1, 2)


def _dedupe_ring(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if len(v) == 0:
        return v
    keep = [0]
    for i in range(1, len(v)):
        if np.max(np.abs(v[i] - v[keep[-1]])) > tol:
            keep.append(i)
    if len(keep) > 1 and np.max(np.abs(v[keep[-1]] - v[keep[0]])) <= tol:
        keep.pop()
    return v[keep]


def voronoi_blocks(seeds, box: BoundingBox) -> list:
    """Voronoi tessellation of the box: one convex cell polygon per seed.

    Each cell is obtained by clipping the box with the perpendicular-bisector
    half-plane against every other seed (O(m^2) in the number of seeds, which
    is fine at the <= 100-seed scale this library targets). The cells
    partition the box exactly.
    """
    pts = np.atleast_2d(np.asarray(seeds, dtype=float))
    m = len(pts)
    if m < 1:
        raise ValueError("need at least one seed")
    for s in pts:
        if not (np.all(s >= box.lo) and np.all(s <= box.hi)):
            raise ValueError(f"seed {s} lies outside the bounding box")
    diffs = pts[:, None, :] - pts[None, :, :]
    dist2 = np.sum(diffs * diffs, axis=-1)
    np.fill_diagonal(dist2, np.inf)
    if np.min(dist2) == 0.0:
        i, j = np.unravel_index(np.argmin(dist2), dist2.shape)
        raise ValueError(f"duplicate seeds at indices {i} and {j}")

    box_ring = box.as_polygon().vertices
    cells = []
    for i in range(m):
        ring = box_ring
        for j in range(m):
            if j == i:
                continue
            normal = pts[j] - pts[i]
            anchor = 0.5 * (pts[i] + pts[j])
            ring = _clip_halfplane(ring, anchor, normal)
            if len(ring) == 0:
                break
        ring = _dedupe_ring(ring)
        if len(ring) < 3:
            raise InvalidGeometryError(f"empty Voronoi cell for seed {i}; seeds too close?")
        cells.append(Polygon(ring))
    return cells


def pairwise_distances(a: np.ndarray, b: np.ndarray = None) -> np.ndarray:
    """Euclidean distance matrix between rows of `a` and rows of `b` (or `a`).

    Uses coordinate differences (no dot-product shortcut), so coincident
    points yield exactly zero.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = a if b is None else np.atleast_2d(np.asarray(b, dtype=float))
    return cdist(a, b)


def read_geojson_polygons(path):
    """Read Polygon features from a GeoJSON FeatureCollection.

    Only the first (outer) ring of each Polygon feature is used. Returns a
    list of (Polygon, properties) pairs in file order.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("type") != "FeatureCollection":
        raise InvalidGeometryError(f"expected a FeatureCollection, got {doc.get('type')!r}")
    out = []
    for idx, feature in enumerate(doc.get("features", [])):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise InvalidGeometryError(f"feature {idx}: only Polygon geometries are supported")
        rings = geom.get("coordinates") or []
        if not rings:
            raise InvalidGeometryError(f"feature {idx}: empty Polygon coordinates")
        out.append((Polygon(np.asarray(rings[0], dtype=float)), feature.get("properties") or {}))
    return out
