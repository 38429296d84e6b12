"""Rotated-box representations, convention conversions, polygon kernels, and rotated IoU.

Coordinate frame is mathematical (y-up) throughout; positive angles rotate
counterclockwise and are expressed in degrees. Image-space (y-down) data is
flipped once, at the I/O boundary in :mod:`rotbox.dota_io`.

Two box conventions are supported:

* ``OC``: theta in [-90, 0), no ordering between ``w`` and ``h`` (the
  pre-4.5 minimum-area-rectangle convention). Axis-aligned boxes
  canonicalize to theta = -90.
* ``LE``: theta in [-90, 90) measured to the long edge, ``w >= h``.
  Squares tie-break into theta in [-90, 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence, Union

import numpy as np

from .errors import DegenerateInputError, InvalidBoxError, InvalidPolygonError

__all__ = [
    "Convention",
    "RBox",
    "Quad",
    "canonicalize",
    "convert_convention",
    "rbox_to_quad",
    "quad_to_rbox",
    "convex_hull",
    "polygon_area",
    "convex_intersection_area",
    "rotated_iou",
    "iou_matrix",
]

MIN_SIDE = 1e-7        # sides below this are rejected as degenerate
SQUARE_TIE_EPS = 1e-9  # |w - h| at or below this treats an LE box as square
CLIP_EPS = 1e-9        # vertex dedup / convexity tolerance in polygon kernels
_AREA_TIE_REL = 1e-9   # relative tolerance for min-area-rectangle ties
_PAIR_BLOCK = 1 << 16  # pairs per block in the batched intersection kernel


class Convention(str, Enum):
    """Angle convention tag for rotated boxes."""

    OC = "oc"
    LE = "le"


@dataclass(frozen=True)
class RBox:
    """Rotated rectangle: center, sides, angle (degrees), and convention tag.

    The box denotes the corner set obtained by rotating the axis-aligned
    rectangle [-w/2, w/2] x [-h/2, h/2] by ``theta`` counterclockwise and
    translating by ``(cx, cy)``.

    Construction validates only finiteness and positive sides; the
    convention's angle-range invariant is established by
    :func:`canonicalize` (loss code deliberately consumes non-canonical
    parameterizations of the same geometry).
    """

    cx: float
    cy: float
    w: float
    h: float
    theta: float
    convention: Convention

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h, self.theta)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box parameters: {vals}")
        if self.w <= MIN_SIDE or self.h <= MIN_SIDE:
            raise InvalidBoxError(f"box sides must exceed {MIN_SIDE}, got w={self.w}, h={self.h}")
        if not isinstance(self.convention, Convention):
            object.__setattr__(self, "convention", Convention(self.convention))

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> np.ndarray:
        """Corner coordinates, shape (4, 2), in counterclockwise order."""
        return _corners(self.cx, self.cy, self.w, self.h, self.theta)


@dataclass(frozen=True)
class Quad:
    """Four-vertex polygon in canonical form.

    Canonical form: counterclockwise winding (y-up) with the
    lexicographically smallest vertex (by x, then y) first. The constructor
    canonicalizes automatically; duplicate or collinear vertices are allowed
    (operations that need positive area reject them at call time).
    """

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        if len(verts) != 4:
            raise InvalidPolygonError(f"quad needs exactly 4 vertices, got {len(verts)}")
        if not all(math.isfinite(x) and math.isfinite(y) for x, y in verts):
            raise InvalidPolygonError(f"non-finite quad vertices: {verts}")
        object.__setattr__(self, "vertices", _canonical_cycle(verts))

    def array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=np.float64)

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)


Geometry = Union[RBox, Quad]


def _canonical_cycle(verts: tuple[tuple[float, float], ...]) -> tuple[tuple[float, float], ...]:
    """Reorder a vertex cycle to CCW winding with the lex-smallest vertex first."""
    if _signed_area(verts) < 0.0:
        verts = verts[::-1]
    start = min(range(len(verts)), key=lambda i: verts[i])
    return verts[start:] + verts[:start]


def _signed_area(verts: Sequence[tuple[float, float]]) -> float:
    s = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def polygon_area(verts: Sequence[tuple[float, float]]) -> float:
    """Unsigned polygon area via the shoelace formula."""
    return abs(_signed_area(verts))


def _corners(cx: float, cy: float, w: float, h: float, theta_deg: float) -> np.ndarray:
    t = math.radians(theta_deg)
    c, s = math.cos(t), math.sin(t)
    hw, hh = 0.5 * w, 0.5 * h
    local = ((-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh))
    return np.array(
        [(cx + x * c - y * s, cy + x * s + y * c) for x, y in local], dtype=np.float64
    )


def _wrap_angle(t: float, lo: float, width: float) -> float:
    """Wrap ``t`` into [lo, lo + width); exact no-op for values already inside."""
    hi = lo + width
    if lo <= t < hi:
        return t
    t = (t - lo) % width + lo
    if t >= hi:  # float-mod edge: (x % m) can round up to m
        t = lo
    return t


def canonicalize(box: RBox) -> RBox:
    """Return the geometrically equal box satisfying its convention's invariants.

    Accepts any finite ``theta``. OC boxes land in theta in [-90, 0)
    (axis-aligned input becomes theta = -90); LE boxes land in
    theta in [-90, 90) with ``w >= h``, squares tie-breaking into [-90, 0).
    """
    w, h, t = box.w, box.h, box.theta
    if box.convention is Convention.OC:
        t = _wrap_angle(t, -90.0, 180.0)
        if t >= 0.0:
            w, h, t = h, w, t - 90.0
    else:
        if h > w:
            w, h, t = h, w, t + 90.0
        if abs(w - h) <= SQUARE_TIE_EPS:
            t = _wrap_angle(t, -90.0, 90.0)
        else:
            t = _wrap_angle(t, -90.0, 180.0)
    return replace(box, w=w, h=h, theta=t)


def is_canonical(box: RBox) -> bool:
    """Whether the box already satisfies its convention's invariants."""
    if box.convention is Convention.OC:
        return -90.0 <= box.theta < 0.0
    if box.w < box.h:
        return False
    if abs(box.w - box.h) <= SQUARE_TIE_EPS and box.theta >= 0.0:
        return False
    return -90.0 <= box.theta < 90.0


def convert_convention(box: RBox, target: Convention) -> RBox:
    """Re-express a canonical box in ``target`` convention, geometry unchanged."""
    target = Convention(target)
    b = canonicalize(box)
    if b.convention is target:
        return b
    if target is Convention.LE:
        if b.w >= b.h:
            return replace(b, convention=Convention.LE)
        return RBox(b.cx, b.cy, b.h, b.w, b.theta + 90.0, Convention.LE)
    if -90.0 <= b.theta < 0.0:
        return replace(b, convention=Convention.OC)
    return RBox(b.cx, b.cy, b.h, b.w, b.theta - 90.0, Convention.OC)


def rbox_to_quad(box: RBox) -> Quad:
    """Corner set of the box as a canonical quad."""
    return Quad(tuple(map(tuple, box.corners())))


def convex_hull(points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Convex hull (monotone chain), CCW, collinear points dropped."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts

    def build(seq):
        out: list[tuple[float, float]] = []
        for p in seq:
            while len(out) >= 2:
                ox, oy = out[-2]
                ax, ay = out[-1]
                if (ax - ox) * (p[1] - oy) - (ay - oy) * (p[0] - ox) <= 0.0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = build(pts)
    upper = build(reversed(pts))
    return lower[:-1] + upper[:-1]


def quad_to_rbox(q: Quad, target: Convention = Convention.LE) -> RBox:
    """Minimum-area enclosing rectangle of the quad's convex hull.

    One side of the result is collinear with a hull edge (rotating-calipers
    property). Ties in area (within relative 1e-9) break toward the smaller
    canonical theta in the target convention.

    Raises:
        DegenerateInputError: if the hull has (near-)zero area.
    """
    target = Convention(target)
    hull = convex_hull(q.vertices)
    if len(hull) < 3 or polygon_area(hull) <= MIN_SIDE * MIN_SIDE:
        raise DegenerateInputError(f"quad hull has no area: {q.vertices}")
    pts = np.asarray(hull, dtype=np.float64)
    best: RBox | None = None
    best_area = math.inf
    n = len(hull)
    for i in range(n):
        ex = pts[(i + 1) % n] - pts[i]
        norm = math.hypot(ex[0], ex[1])
        if norm <= CLIP_EPS:
            continue
        u = ex / norm
        nvec = np.array([-u[1], u[0]])
        xs = pts @ u
        ys = pts @ nvec
        w = float(xs.max() - xs.min())
        h = float(ys.max() - ys.min())
        area = w * h
        center = 0.5 * (xs.max() + xs.min()) * u + 0.5 * (ys.max() + ys.min()) * nvec
        theta = math.degrees(math.atan2(u[1], u[0]))
        cand = canonicalize(
            RBox(float(center[0]), float(center[1]), max(w, 2 * MIN_SIDE), max(h, 2 * MIN_SIDE), theta, target)
        )
        if best is None or area < best_area * (1.0 - _AREA_TIE_REL):
            best, best_area = cand, area
        elif area <= best_area * (1.0 + _AREA_TIE_REL) and cand.theta < best.theta:
            best, best_area = cand, min(area, best_area)
    assert best is not None
    return best


def _require_convex(verts: Sequence[tuple[float, float]]) -> None:
    """Reject non-convex or zero-area vertex cycles (CCW canonical order assumed)."""
    n = len(verts)
    scale = max(abs(v) for xy in verts for v in xy) + 1.0
    tol = CLIP_EPS * scale * scale
    if polygon_area(verts) <= tol:
        raise InvalidPolygonError(f"degenerate polygon: {verts}")
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        cx, cy = verts[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross < -tol:
            raise InvalidPolygonError(f"non-convex polygon: {verts}")


def _clip_convex(subject: list[tuple[float, float]], clip: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sutherland-Hodgman clip of a convex subject by a CCW convex polygon."""
    out = list(subject)
    n = len(clip)
    for i in range(n):
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        inp = out
        out = []
        if not inp:
            break
        m = len(inp)
        for j in range(m):
            px, py = inp[j]
            qx, qy = inp[(j + 1) % m]
            dp = ex * (py - ay) - ey * (px - ax)
            dq = ex * (qy - ay) - ey * (qx - ax)
            if (dq >= 0.0) != (dp >= 0.0):
                t = dp / (dp - dq)
                out.append((px + t * (qx - px), py + t * (qy - py)))
            if dq >= 0.0:
                out.append((qx, qy))
    return out


def convex_intersection_area(a: Quad, b: Quad) -> float:
    """Area of the intersection of two convex quads.

    Computed by convex polygon clipping followed by the shoelace formula.

    Raises:
        InvalidPolygonError: if either quad is non-convex or degenerate.
    """
    _require_convex(a.vertices)
    _require_convex(b.vertices)
    clipped = _clip_convex(list(b.vertices), a.vertices)
    if len(clipped) < 3:
        return 0.0
    return polygon_area(clipped)


def _corners_and_area(geom: Geometry) -> tuple[np.ndarray, float]:
    if isinstance(geom, RBox):
        return geom.corners(), geom.area
    if isinstance(geom, Quad):
        return geom.array(), geom.area
    raise TypeError(f"expected RBox or Quad, got {type(geom).__name__}")


def rotated_iou(a: Geometry, b: Geometry) -> float:
    """Intersection-over-union of two boxes/quads; 0 for disjoint pairs."""
    ca, area_a = _corners_and_area(a)
    cb, area_b = _corners_and_area(b)
    if isinstance(a, Quad):
        _require_convex(a.vertices)
    if isinstance(b, Quad):
        _require_convex(b.vertices)
    inter = _clip_convex([tuple(p) for p in cb], [tuple(p) for p in ca])
    inter_area = polygon_area(inter) if len(inter) >= 3 else 0.0
    union = area_a + area_b - inter_area
    if union <= 0.0:
        return 0.0
    return min(max(inter_area / union, 0.0), 1.0)


def _pairs_intersection_area(pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Intersection areas for aligned pairs of CCW convex quads.

    Vectorized Sutherland-Hodgman over ``(K, 4, 2)`` corner arrays; the
    polygon buffer grows by two slots per clip round, which bounds the
    true convex maximum (one new vertex per half-plane) with slack for
    numerically degenerate inputs.
    """
    k = pa.shape[0]
    if k == 0:
        return np.zeros(0, dtype=np.float64)
    px = np.ascontiguousarray(pb[:, :, 0], dtype=np.float64)
    py = np.ascontiguousarray(pb[:, :, 1], dtype=np.float64)
    cnt = np.full(k, 4, dtype=np.int64)
    for e in range(4):
        a = pa[:, e, :]
        b = pa[:, (e + 1) % 4, :]
        ex = (b[:, 0] - a[:, 0])[:, None]
        ey = (b[:, 1] - a[:, 1])[:, None]
        v = px.shape[1]
        idx = np.broadcast_to(np.arange(v), (k, v))
        valid = idx < cnt[:, None]
        nxt = idx + 1
        np.putmask(nxt, nxt >= cnt[:, None], 0)
        qx = np.take_along_axis(px, nxt, axis=1)
        qy = np.take_along_axis(py, nxt, axis=1)
        dp = ex * (py - a[:, 1][:, None]) - ey * (px - a[:, 0][:, None])
        dq = ex * (qy - a[:, 1][:, None]) - ey * (qx - a[:, 0][:, None])
        q_in = dq >= 0.0
        crossing = ((dp >= 0.0) != q_in) & valid
        emit_q = q_in & valid
        denom = dp - dq
        t = np.where(crossing, dp / np.where(denom == 0.0, 1.0, denom), 0.0)

        flags = np.empty((k, 2 * v), dtype=bool)
        flags[:, 0::2] = crossing
        flags[:, 1::2] = emit_q
        outx = np.empty((k, 2 * v), dtype=np.float64)
        outy = np.empty((k, 2 * v), dtype=np.float64)
        outx[:, 0::2] = px + t * (qx - px)
        outx[:, 1::2] = qx
        outy[:, 0::2] = py + t * (qy - py)
        outy[:, 1::2] = qy

        pos = np.cumsum(flags, axis=1) - 1
        cnt = flags.sum(axis=1)
        v_out = v + 2
        rows, cols = np.nonzero(flags)
        px = np.zeros((k, v_out), dtype=np.float64)
        py = np.zeros((k, v_out), dtype=np.float64)
        px[rows, pos[rows, cols]] = outx[rows, cols]
        py[rows, pos[rows, cols]] = outy[rows, cols]

    v = px.shape[1]
    idx = np.broadcast_to(np.arange(v), (k, v))
    valid = idx < cnt[:, None]
    nxt = idx + 1
    np.putmask(nxt, nxt >= cnt[:, None], 0)
    xn = np.take_along_axis(px, nxt, axis=1)
    yn = np.take_along_axis(py, nxt, axis=1)
    area = 0.5 * np.abs(np.where(valid, px * yn - xn * py, 0.0).sum(axis=1))
    area[cnt < 3] = 0.0
    return area


def corners_array(geoms: Sequence[Geometry]) -> tuple[np.ndarray, np.ndarray]:
    """Stack corner arrays and areas for a list of geometries: ((N, 4, 2), (N,))."""
    n = len(geoms)
    corners = np.empty((n, 4, 2), dtype=np.float64)
    areas = np.empty(n, dtype=np.float64)
    for i, g in enumerate(geoms):
        corners[i], areas[i] = _corners_and_area(g)
    return corners, areas


def corners_from_params(params: np.ndarray) -> np.ndarray:
    """Vectorized corners for (N, 5) arrays of (cx, cy, w, h, theta_deg)."""
    params = np.asarray(params, dtype=np.float64)
    t = np.radians(params[:, 4])
    c, s = np.cos(t), np.sin(t)
    hw, hh = 0.5 * params[:, 2], 0.5 * params[:, 3]
    sx = np.array([-1.0, 1.0, 1.0, -1.0])
    sy = np.array([-1.0, -1.0, 1.0, 1.0])
    lx = hw[:, None] * sx[None, :]
    ly = hh[:, None] * sy[None, :]
    out = np.empty((params.shape[0], 4, 2), dtype=np.float64)
    out[..., 0] = params[:, 0][:, None] + lx * c[:, None] - ly * s[:, None]
    out[..., 1] = params[:, 1][:, None] + lx * s[:, None] + ly * c[:, None]
    return out


def iou_matrix_from_corners(
    ca: np.ndarray, areas_a: np.ndarray, cb: np.ndarray, areas_b: np.ndarray
) -> np.ndarray:
    """Pairwise IoU matrix from precomputed corner arrays.

    Pairs whose axis-aligned bounding boxes are disjoint are zero without
    running the exact kernel; the remainder is clipped in memory-bounded
    blocks.
    """
    n, m = ca.shape[0], cb.shape[0]
    out = np.zeros((n, m), dtype=np.float64)
    if n == 0 or m == 0:
        return out
    lo_a, hi_a = ca.min(axis=1), ca.max(axis=1)
    lo_b, hi_b = cb.min(axis=1), cb.max(axis=1)
    cand = (
        (lo_a[:, None, 0] <= hi_b[None, :, 0]) & (hi_a[:, None, 0] >= lo_b[None, :, 0])
        & (lo_a[:, None, 1] <= hi_b[None, :, 1]) & (hi_a[:, None, 1] >= lo_b[None, :, 1])
    )
    rows, cols = np.nonzero(cand)
    if rows.size == 0:
        return out
    flat = np.empty(rows.size, dtype=np.float64)
    for i0 in range(0, rows.size, _PAIR_BLOCK):
        i1 = min(rows.size, i0 + _PAIR_BLOCK)
        inter = _pairs_intersection_area(ca[rows[i0:i1]], cb[cols[i0:i1]])
        union = areas_a[rows[i0:i1]] + areas_b[cols[i0:i1]] - inter
        flat[i0:i1] = np.where(union > 0.0, inter / np.where(union <= 0.0, 1.0, union), 0.0)
    out[rows, cols] = np.clip(flat, 0.0, 1.0)
    return out


def iou_matrix(boxes_a: Sequence[Geometry], boxes_b: Sequence[Geometry]) -> np.ndarray:
    """Matrix M with M[i, j] = rotated_iou(boxes_a[i], boxes_b[j])."""
    ca, aa = corners_array(list(boxes_a))
    cb, ab = corners_array(list(boxes_b))
    return iou_matrix_from_corners(ca, aa, cb, ab)
