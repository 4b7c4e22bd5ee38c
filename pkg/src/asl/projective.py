"""Projective plane geometry: points, maps, convex polygons, normalization.

Conventions
-----------
* A point of RP^2 is a ray class in R^3; representatives are stored
  normalized to unit Euclidean norm with the first nonzero coordinate
  positive, and equality means the angular distance between the
  normalized representatives is below ``POINT_TOL``.
* Projective transformations are 3x3 real matrices with determinant
  rescaled to exactly +1 (real cube root, so sign-carrying inputs stay in
  the same projective class).
* A convex polygon is a cyclically ordered vertex list, bounded and
  strictly convex in some affine chart; the list order realizes the
  orientation flag.
* The reference quadrilateral ``Q0`` has chart vertices
  (0,1), (0,0), (1,0), (1,1) in the chart z -> [x : y : 1], listed
  counterclockwise.  A polygon is *normalized* when its first four
  vertices are exactly Q0; the free vertices then sit in the half-strip
  {0 < x < 1, y > 1} with x decreasing and edge slopes increasing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConvexityViolation, DegenerateTuple, InvalidInput, TooFewVertices

POINT_TOL = 1e-9
DET_TOL = 1e-12


def _canonical(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise InvalidInput(f"homogeneous coordinates must be a 3-vector, got {v.shape}")
    n = np.linalg.norm(v)
    if n == 0.0 or not np.isfinite(n):
        raise InvalidInput("homogeneous coordinates must be finite and not all zero")
    v = v / n
    for c in v:
        if c != 0.0:
            if c < 0.0:
                v = -v
            break
    return v


class ProjPoint:
    """Point of RP^2, stored as a canonical unit representative."""

    __slots__ = ("v",)

    def __init__(self, coords):
        self.v = _canonical(np.asarray(coords, dtype=float))

    @staticmethod
    def from_chart(x: float, y: float) -> "ProjPoint":
        return ProjPoint((x, y, 1.0))

    def chart(self, chart: "Chart | None" = None) -> np.ndarray:
        """Affine coordinates in ``chart`` (default: z -> [x:y:1])."""
        chart = chart or STANDARD_CHART
        return chart.to_chart(self.v)

    def angular_distance(self, other: "ProjPoint") -> float:
        c = abs(float(np.dot(self.v, other.v)))
        s = float(np.linalg.norm(np.cross(self.v, other.v)))
        return float(np.arctan2(s, c))

    def isclose(self, other: "ProjPoint", tol: float = POINT_TOL) -> bool:
        return self.angular_distance(other) < tol

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return self.isclose(other)

    def __hash__(self):  # equality is tolerance-based; hashing is not meaningful
        raise TypeError("ProjPoint is not hashable")

    def __repr__(self):
        return f"ProjPoint([{self.v[0]:.12g}, {self.v[1]:.12g}, {self.v[2]:.12g}])"


def line_through(p: ProjPoint, q: ProjPoint) -> np.ndarray:
    """Homogeneous coordinates of the line through two points."""
    ell = np.cross(p.v, q.v)
    if np.linalg.norm(ell) < 1e-14:
        raise DegenerateTuple("points coincide; no unique line")
    return ell


def meet(l1: np.ndarray, l2: np.ndarray) -> ProjPoint:
    """Intersection point of two lines."""
    return ProjPoint(np.cross(l1, l2))


class ProjMap:
    """Projective transformation, determinant-normalized to +1."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (3, 3):
            raise InvalidInput("ProjMap needs a 3x3 matrix")
        det = np.linalg.det(m)
        if abs(det) < 1e-300 or not np.isfinite(det):
            raise InvalidInput("ProjMap matrix is singular")
        # real cube root keeps sign-reversing representatives in class
        m = m / np.copysign(abs(det) ** (1.0 / 3.0), det)
        self.matrix = m

    @staticmethod
    def identity() -> "ProjMap":
        return ProjMap(np.eye(3))

    @property
    def det_error(self) -> float:
        return abs(np.linalg.det(self.matrix) - 1.0)

    def __call__(self, p: ProjPoint) -> ProjPoint:
        return ProjPoint(self.matrix @ p.v)

    def compose(self, other: "ProjMap") -> "ProjMap":
        """self after other."""
        return ProjMap(self.matrix @ other.matrix)

    def inverse(self) -> "ProjMap":
        return ProjMap(np.linalg.inv(self.matrix))

    def cond(self) -> float:
        return float(np.linalg.cond(self.matrix))

    def __repr__(self):
        return f"ProjMap({self.matrix!r})"


class Chart:
    """Affine chart of RP^2: rows (e1, e2, a), coordinates (e1.v/a.v, e2.v/a.v)."""

    __slots__ = ("frame",)

    def __init__(self, frame):
        f = np.asarray(frame, dtype=float)
        if f.shape != (3, 3) or abs(np.linalg.det(f)) < 1e-12:
            raise InvalidInput("chart frame must be an invertible 3x3 matrix")
        self.frame = f

    def to_chart(self, v: np.ndarray) -> np.ndarray:
        w = self.frame @ np.asarray(v, dtype=float)
        if abs(w[2]) < 1e-14 * np.linalg.norm(w):
            raise InvalidInput("point lies on the chart's line at infinity")
        return w[:2] / w[2]

    def from_chart(self, xy) -> ProjPoint:
        x, y = xy
        return ProjPoint(np.linalg.solve(self.frame, np.array([x, y, 1.0])))


STANDARD_CHART = Chart(np.eye(3))


def _cross2(u, v) -> float:
    return float(u[0] * v[1] - u[1] * v[0])

Q0 = (
    ProjPoint.from_chart(0.0, 1.0),
    ProjPoint.from_chart(0.0, 0.0),
    ProjPoint.from_chart(1.0, 0.0),
    ProjPoint.from_chart(1.0, 1.0),
)


def _coherent_representatives(points) -> np.ndarray:
    """Pick signs so consecutive-triple determinants keep a constant sign.

    For a properly convex cyclic vertex list such representatives exist and
    all lie in one open half-space (the cone over the polygon).
    """
    reps = np.array([p.v for p in points])
    k = len(reps)
    for second_sign in (1.0, -1.0):
        for ref in (1.0, -1.0):
            signs = np.ones(k)
            signs[1] = second_sign
            ok = True
            for i in range(2, k):
                d = np.linalg.det(
                    np.column_stack(
                        [signs[i - 2] * reps[i - 2], signs[i - 1] * reps[i - 1], reps[i]]
                    )
                )
                if abs(d) < 1e-13:
                    ok = False
                    break
                if np.sign(d) != ref:
                    signs[i] = -1.0
            if not ok:
                continue
            out = reps * signs[:, None]
            wraps = [
                np.linalg.det(np.column_stack([out[k - 2], out[k - 1], out[0]])),
                np.linalg.det(np.column_stack([out[k - 1], out[0], out[1]])),
            ]
            if all(np.sign(w) == ref and abs(w) > 1e-13 for w in wraps):
                return out
    raise ConvexityViolation("vertex list admits no coherent cone representatives")


def find_common_chart(points) -> Chart:
    """A chart in which all the points are finite and on one side.

    The chart direction is the Chebyshev center of the dual cone of the
    coherent representatives, found by a small linear program.
    """
    from scipy.optimize import linprog

    reps = _coherent_representatives(points)
    # max t  s.t.  reps @ a >= t,  -1 <= a <= 1
    res = linprog(
        c=np.array([0.0, 0.0, 0.0, -1.0]),
        A_ub=np.hstack([-reps, np.ones((len(reps), 1))]),
        b_ub=np.zeros(len(reps)),
        bounds=[(-1, 1), (-1, 1), (-1, 1), (None, None)],
        method="highs",
    )
    if not res.success or res.x[3] < 1e-9:
        raise ConvexityViolation("no common affine chart found for the vertex set")
    a = res.x[:3] / np.linalg.norm(res.x[:3])
    # complete a to a right-handed orthonormal frame
    e1 = np.eye(3)[int(np.argmin(np.abs(a)))]
    e1 = e1 - (e1 @ a) * a
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    return Chart(np.vstack([e1, e2, a]))


class ConvexPolygon:
    """Oriented, strictly convex polygon in RP^2.

    The vertex list is ordered consistently with ``orientation`` (+1 means
    the list runs counterclockwise in the validation chart).
    """

    __slots__ = ("vertices", "orientation", "_chart")

    def __init__(self, vertices, orientation: int | None = None, chart: Chart | None = None):
        verts = tuple(v if isinstance(v, ProjPoint) else ProjPoint(v) for v in vertices)
        if len(verts) < 3:
            raise TooFewVertices("a polygon needs at least 3 vertices")
        self.vertices = verts
        self._chart = chart or find_common_chart(verts)
        signs = self._turn_signs(self._chart)
        if orientation is None:
            orientation = 1 if signs[0] > 0 else -1
        if any(np.sign(s) != orientation for s in signs):
            raise ConvexityViolation(
                "vertex list is not strictly convex in the declared orientation"
            )
        self._check_simple(self._chart, orientation)
        self.orientation = int(orientation)

    def _turn_signs(self, chart: Chart):
        xy = np.array([v.chart(chart) for v in self.vertices])
        k = len(xy)
        scale = np.ptp(xy, axis=0).max()
        signs = []
        for i in range(k):
            a, b, c = xy[i], xy[(i + 1) % k], xy[(i + 2) % k]
            cr = _cross2(b - a, c - b)
            if abs(cr) < 1e-12 * scale * scale:
                raise ConvexityViolation("three consecutive vertices are collinear")
            signs.append(cr)
        return signs

    def _check_simple(self, chart: Chart, orientation: int):
        # total turning must be one full revolution, not several
        xy = np.array([v.chart(chart) for v in self.vertices])
        k = len(xy)
        total = 0.0
        for i in range(k):
            u = xy[(i + 1) % k] - xy[i]
            w = xy[(i + 2) % k] - xy[(i + 1) % k]
            total += np.arctan2(_cross2(u, w), np.dot(u, w))
        if abs(abs(total) - 2 * np.pi) > 1e-6:
            raise ConvexityViolation("vertex cycle winds more than once (star polygon)")

    def __len__(self):
        return len(self.vertices)

    @property
    def chart(self) -> Chart:
        return self._chart

    def chart_coords(self, chart: Chart | None = None) -> np.ndarray:
        chart = chart or self._chart
        return np.array([v.chart(chart) for v in self.vertices])

    def apply(self, A: ProjMap) -> "ConvexPolygon":
        return ConvexPolygon([A(v) for v in self.vertices], orientation=None)

    def reversed(self) -> "ConvexPolygon":
        return ConvexPolygon(tuple(reversed(self.vertices)), orientation=-self.orientation)

    def rotated(self, start: int) -> "ConvexPolygon":
        k = len(self.vertices)
        verts = tuple(self.vertices[(start + i) % k] for i in range(k))
        return ConvexPolygon(verts, orientation=self.orientation, chart=self._chart)

    def isclose(self, other: "ConvexPolygon", tol: float = POINT_TOL) -> bool:
        if len(self) != len(other):
            return False
        return all(a.isclose(b, tol) for a, b in zip(self.vertices, other.vertices))

    def __repr__(self):
        return f"ConvexPolygon(k={len(self.vertices)}, orientation={self.orientation})"


class NormalizedPolygon:
    """Convex polygon whose first four vertices are exactly Q0."""

    __slots__ = ("base",)

    def __init__(self, base: ConvexPolygon, check: bool = True):
        if len(base) < 4:
            raise TooFewVertices("normalized polygons have at least 4 vertices")
        for v, q in zip(base.vertices[:4], Q0):
            if not v.isclose(q, 1e-12):
                raise InvalidInput("first four vertices must equal Q0 exactly")
        self.base = base
        if check:
            self._check_half_strip()

    def _check_half_strip(self):
        xy = self.free_chart_coords()
        if len(xy) == 0:
            return
        tol = 1e-9
        if np.any(xy[:, 0] <= -tol) or np.any(xy[:, 0] >= 1 + tol) or np.any(xy[:, 1] <= 1 - tol):
            raise ConvexityViolation("free vertices leave the half-strip {0<x<1, y>1}")
        xs = np.concatenate([[1.0], xy[:, 0], [0.0]])  # q4 has x=1, q1 has x=0
        if np.any(np.diff(xs) >= tol):
            raise ConvexityViolation("free-vertex x coordinates must decrease")
        pts = np.vstack([[1.0, 1.0], xy, [0.0, 1.0]])  # q4, p5..pk, q1
        seg = np.diff(pts, axis=0)
        slopes = seg[:, 1] / seg[:, 0]  # dx < 0 throughout, checked above
        if np.any(np.diff(slopes) <= -tol):
            raise ConvexityViolation("edge slopes must increase along the free chain")

    @property
    def vertices(self):
        return self.base.vertices

    def __len__(self):
        return len(self.base)

    def free_chart_coords(self) -> np.ndarray:
        """Chart coordinates of p5..pk in the standard chart, shape (k-4, 2)."""
        return np.array([v.chart(STANDARD_CHART) for v in self.base.vertices[4:]]).reshape(-1, 2)

    def isclose(self, other: "NormalizedPolygon", tol: float = POINT_TOL) -> bool:
        return self.base.isclose(other.base, tol)

    def __repr__(self):
        return f"NormalizedPolygon(k={len(self.base)})"


def four_point_map(src, dst) -> ProjMap:
    """The unique projective map sending one 4-tuple in general position to another."""
    src = [p if isinstance(p, ProjPoint) else ProjPoint(p) for p in src]
    dst = [p if isinstance(p, ProjPoint) else ProjPoint(p) for p in dst]
    if len(src) != 4 or len(dst) != 4:
        raise InvalidInput("four_point_map needs two 4-tuples")

    def basis(points, label):
        m = np.column_stack([p.v for p in points[:3]])
        if abs(np.linalg.det(m)) < 1e-10:
            raise DegenerateTuple(f"{label} tuple has three collinear points")
        lam = np.linalg.solve(m, points[3].v)
        if np.min(np.abs(lam)) < 1e-10:
            raise DegenerateTuple(f"{label} tuple has three collinear points")
        return m * lam  # scale columns so their sum is the 4th point

    ms = basis(src, "source")
    md = basis(dst, "destination")
    return ProjMap(md @ np.linalg.inv(ms))


def normalize_polygon(P: ConvexPolygon, start: int = 0) -> tuple[NormalizedPolygon, ProjMap]:
    """Map the four consecutive vertices from ``start`` onto Q0.

    Returns the normalized polygon and the normalizing map.  The output
    vertex list begins with the exact Q0 points (the map's images agree to
    rounding and are snapped).
    """
    k = len(P)
    if k < 4:
        raise TooFewVertices("normalization needs at least 4 vertices")
    start %= k
    quad = [P.vertices[(start + i) % k] for i in range(4)]
    A = four_point_map(quad, Q0)
    images = [A(P.vertices[(start + i) % k]) for i in range(k)]
    for i in range(4):
        if not images[i].isclose(Q0[i], 1e-7):
            raise DegenerateTuple("normalizing map failed to reproduce Q0")
        images[i] = Q0[i]
    poly = ConvexPolygon(images, orientation=1, chart=STANDARD_CHART)
    return NormalizedPolygon(poly), A


def cycle_rho(P: NormalizedPolygon) -> NormalizedPolygon:
    """Generator of the Z/k relabeling action on normalized polygons."""
    verts = P.base.vertices
    A = four_point_map(verts[1:5], Q0)
    images = [A(v) for v in verts[1:]] + [A(verts[0])]
    for i in range(4):
        images[i] = Q0[i]
    return NormalizedPolygon(ConvexPolygon(images, orientation=1, chart=STANDARD_CHART))


def _pencil_cross_ratio(vertex: ProjPoint, targets) -> float:
    """Cross ratio x = ((a-c)(b-d))/((a-b)(c-d)) of four concurrent lines.

    The lines join ``vertex`` to the four target points; they are read in
    the pencil through the vertex, which avoids choosing a transversal.
    """
    lines = [line_through(vertex, t) for t in targets]
    basis = np.column_stack([lines[0], lines[3]])
    coords = []
    for ell in lines:
        ab, _, _, _ = np.linalg.lstsq(basis, ell, rcond=None)
        if np.linalg.norm(ell - basis @ ab) > 1e-8 * np.linalg.norm(ell):
            raise DegenerateTuple("lines are not concurrent to working precision")
        coords.append(ab)

    def det2(i, j):
        return coords[i][0] * coords[j][1] - coords[j][0] * coords[i][1]

    num = det2(0, 2) * det2(1, 3)
    den = det2(0, 1) * det2(2, 3)
    if abs(den) < 1e-300:
        raise DegenerateTuple("cross ratio is degenerate")
    return float(num / den)


def corner_invariants(P: ConvexPolygon) -> list[float]:
    """Cross ratio at each vertex of the lines to its four nearest vertices.

    Convention: at vertex v the lines run to (v-2, v-1, v+1, v+2) in cyclic
    order and the cross ratio is ((a-c)(b-d))/((a-b)(c-d)) in that order.
    The value depends on this choice; the product over all vertices is what
    the fence map preserves.
    """
    k = len(P)
    if k < 5:
        raise TooFewVertices("corner invariants need at least 5 vertices")
    out = []
    for i in range(k):
        v = P.vertices[i]
        targets = [P.vertices[(i + j) % k] for j in (-2, -1, 1, 2)]
        out.append(_pencil_cross_ratio(v, targets))
    return out


def fence(P: ConvexPolygon):
    """Polygon of short-diagonal intersections; a single point for k = 4."""
    k = len(P)
    if k < 4:
        raise TooFewVertices("fence needs at least 4 vertices")
    verts = P.vertices
    if k == 4:
        return meet(line_through(verts[0], verts[2]), line_through(verts[1], verts[3]))
    pts = []
    for i in range(k):
        l1 = line_through(verts[(i - 1) % k], verts[(i + 1) % k])
        l2 = line_through(verts[i], verts[(i + 2) % k])
        pts.append(meet(l1, l2))
    return ConvexPolygon(pts, orientation=P.orientation, chart=P.chart)


def hausdorff_distance(P: ConvexPolygon, Q: ConvexPolygon, chart: Chart, samples: int = 64) -> float:
    """Hausdorff distance between polygon closures inside a declared chart."""

    def boundary(poly):
        xy = poly.chart_coords(chart)
        t = np.linspace(0.0, 1.0, samples, endpoint=False)
        segs = [xy[i] + np.outer(t, xy[(i + 1) % len(xy)] - xy[i]) for i in range(len(xy))]
        return np.vstack(segs)

    a, b = boundary(P), boundary(Q)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def polygon_to_json(P: ConvexPolygon) -> dict:
    return {
        "vertices": [[float(c) for c in v.v] for v in P.vertices],
        "orientation": P.orientation,
    }


def polygon_from_json(obj) -> ConvexPolygon:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        verts = [ProjPoint(v) for v in obj["vertices"]]
        orientation = int(obj.get("orientation", 1))
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed polygon JSON: {exc}") from exc
    return ConvexPolygon(verts, orientation=orientation)
