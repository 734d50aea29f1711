"""Linear regions of a piecewise-linear network restricted to a segment or a plane polygon.

Both routines work layer by layer. Before layer ``i`` is processed, every
current piece has a fixed sign pattern for all earlier layers, so layer ``i``'s
pre-activations are affine on the piece and their zero sets can be located by
linear interpolation between vertex values. Vertex values come from the true
network prefix; ReLU networks are continuous, so both sides of a boundary agree.

Decoupled networks are partitioned by their activation channel.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import InputError
from .network import ActivationKind, ActivationPattern, Dnn, activation_pattern, require_pwl

CROSSING_MARGIN = 1e-12
MIN_PIECE_LENGTH = 1e-12
MIN_POLYGON_AREA = 1e-18
SIGN_EPS = 1e-10
COPLANAR_TOL = 1e-9


def _activation_dnn(net) -> Dnn:
    act = getattr(net, "act_layers", None)
    return Dnn(act) if act is not None else net


@dataclass(frozen=True, eq=False)
class Segment:
    start: np.ndarray
    end: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.start, dtype=np.float64))
        e = np.atleast_1d(np.asarray(self.end, dtype=np.float64))
        if s.ndim != 1 or s.shape != e.shape:
            raise InputError(f"segment endpoints must be vectors of equal length: {s.shape} vs {e.shape}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(e))):
            raise InputError("segment endpoints must be finite")
        if np.array_equal(s, e):
            raise InputError("zero-length segment")
        s.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def dim(self) -> int:
        return self.start.shape[0]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.end - self.start))

    def point(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.start + np.multiply.outer(t, self.end - self.start)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.point(rng.uniform(0.0, 1.0, size=n))


@dataclass(frozen=True, eq=False)
class Polygon2D:
    """Convex polygon lying in a 2-D affine slice of input space.

    Internally the polygon is parameterized with origin at the first vertex and
    an orthonormal basis from Gram-Schmidt on the vertex offsets.
    """

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] < 2:
            raise InputError(f"polygon needs >= 3 vertices of dimension >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("polygon vertices must be finite")
        origin = v[0]
        offsets = v - origin
        scale = max(1.0, float(np.max(np.abs(offsets))))
        e1 = offsets[1] / np.linalg.norm(offsets[1]) if np.linalg.norm(offsets[1]) > 0 else None
        if e1 is None:
            raise InputError("degenerate polygon: repeated first edge")
        e2 = None
        for off in offsets[2:]:
            r = off - (off @ e1) * e1
            if np.linalg.norm(r) > 1e-9 * scale:
                e2 = r / np.linalg.norm(r)
                break
        if e2 is None:
            raise InputError("degenerate polygon: all vertices collinear")
        basis = np.vstack([e1, e2])
        coords = offsets @ basis.T
        residual = float(np.max(np.abs(offsets - coords @ basis)))
        if residual > COPLANAR_TOL * scale:
            raise InputError(f"polygon vertices are not coplanar (residual {residual:.3g})")
        if _signed_area(coords) <= MIN_POLYGON_AREA:
            raise InputError("degenerate polygon: zero area or clockwise order")
        if not _is_convex(coords):
            raise InputError("polygon is not convex")
        for name, arr in (("vertices", v), ("origin", origin), ("basis", basis), ("coords", coords)):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def area(self) -> float:
        return _signed_area(self.coords)

    def to_input(self, coords) -> np.ndarray:
        return self.origin + np.asarray(coords) @ self.basis

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples via fan triangulation weighted by triangle area."""
        c = self.coords
        tris = [(c[0], c[i], c[i + 1]) for i in range(1, len(c) - 1)]
        areas = np.array([abs(_signed_area(np.array(t))) for t in tris])
        which = rng.choice(len(tris), size=n, p=areas / areas.sum())
        r1 = np.sqrt(rng.uniform(size=n))
        r2 = rng.uniform(size=n)
        a = np.array([tris[k][0] for k in which])
        b = np.array([tris[k][1] for k in which])
        d = np.array([tris[k][2] for k in which])
        pts = (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * d
        return self.to_input(pts)


Polytope = Union[Segment, Polygon2D]


def _signed_area(c: np.ndarray) -> float:
    x, y = c[:, 0], c[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _centroid(c: np.ndarray) -> np.ndarray:
    x, y = c[:, 0], c[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) <= MIN_POLYGON_AREA:
        return c.mean(axis=0)
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def _is_convex(c: np.ndarray) -> bool:
    d = np.roll(c, -1, axis=0) - c
    cross = d[:, 0] * np.roll(d[:, 1], -1) - d[:, 1] * np.roll(d[:, 0], -1)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(c)))) ** 2
    return bool(np.all(cross >= -tol))


@dataclass(frozen=True, eq=False)
class Region:
    """One linear piece.

    ``coords`` holds parameter coordinates of the vertices: the ``t`` values of
    the two endpoints for a segment, the 2-D slice coordinates for a polygon.
    ``vertices`` are the same points in input space.
    """

    vertices: np.ndarray
    coords: np.ndarray
    pattern: ActivationPattern

    @property
    def measure(self) -> float:
        if self.coords.ndim == 1:
            return float(self.coords[1] - self.coords[0])
        return _signed_area(self.coords)


@dataclass(frozen=True, eq=False)
class RegionPartition:
    polytope: Polytope
    regions: tuple

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    @property
    def breakpoints(self) -> np.ndarray:
        """Segment partitions only: sorted ``t`` values, endpoints included."""
        if not isinstance(self.polytope, Segment):
            raise TypeError("breakpoints are defined for segment partitions only")
        return np.array([r.coords[0] for r in self.regions] + [self.regions[-1].coords[1]])


def _prefix_preactivations(layers, points: np.ndarray, upto: int) -> np.ndarray:
    """Pre-activations of layer ``upto`` (0-based) for a batch of input rows."""
    v = points
    for layer in layers[:upto]:
        v = layer.activation.apply(v @ layer.weights.T + layer.bias)
    layer = layers[upto]
    return v @ layer.weights.T + layer.bias


def exactline(net, seg: Segment) -> RegionPartition:
    """Partition a segment into maximal pieces with a constant activation pattern."""
    dnn = _activation_dnn(net)
    require_pwl(dnn)
    if seg.dim != dnn.in_dim:
        raise InputError(f"segment has dimension {seg.dim}, network expects {dnn.in_dim}")
    layers = dnn.layers
    ts = np.array([0.0, 1.0])
    for i, layer in enumerate(layers):
        if layer.activation is not ActivationKind.RELU:
            continue
        z = _prefix_preactivations(layers, seg.point(ts), i)
        za, zb = z[:-1], z[1:]
        ta, tb = ts[:-1, None], ts[1:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = ta + (tb - ta) * za / (za - zb)
        hit = (np.sign(za) * np.sign(zb) < 0) & (tc > ta + CROSSING_MARGIN) & (tc < tb - CROSSING_MARGIN)
        if hit.any():
            ts = np.unique(np.concatenate([ts, tc[hit]]))
    ts = _drop_short_pieces(ts)

    regions = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        pat = activation_pattern(dnn, seg.point(0.5 * (t0 + t1)))
        if regions and regions[-1][2] == pat:
            regions[-1][1] = t1
        else:
            regions.append([t0, t1, pat])
    out = []
    for t0, t1, pat in regions:
        coords = np.array([t0, t1])
        out.append(Region(seg.point(coords), coords, pat))
    return RegionPartition(seg, tuple(out))


def _drop_short_pieces(ts: np.ndarray) -> np.ndarray:
    keep = [ts[0]]
    for t in ts[1:-1]:
        if t - keep[-1] >= MIN_PIECE_LENGTH:
            keep.append(t)
    if ts[-1] - keep[-1] < MIN_PIECE_LENGTH and len(keep) > 1:
        keep.pop()
    keep.append(ts[-1])
    return np.array(keep)


def _split(coords: np.ndarray, z: np.ndarray):
    """Split a convex polygon by the zero line of an affine function with vertex values ``z``."""
    sign = np.where(z > SIGN_EPS, 1, np.where(z < -SIGN_EPS, -1, 0))
    pos, neg = [], []
    k = len(coords)
    for a in range(k):
        b = (a + 1) % k
        if sign[a] >= 0:
            pos.append(coords[a])
        if sign[a] <= 0:
            neg.append(coords[a])
        if sign[a] * sign[b] < 0:
            t = z[a] / (z[a] - z[b])
            p = coords[a] + t * (coords[b] - coords[a])
            pos.append(p)
            neg.append(p)
    return _clean(pos), _clean(neg)


def _clean(pts):
    if len(pts) < 3:
        return None
    out = [pts[0]]
    for p in pts[1:]:
        if np.max(np.abs(p - out[-1])) > 1e-15:
            out.append(p)
    if len(out) > 1 and np.max(np.abs(out[0] - out[-1])) <= 1e-15:
        out.pop()
    if len(out) < 3:
        return None
    c = np.array(out)
    if _signed_area(c) < MIN_POLYGON_AREA:
        return None
    return c


def plane_transfer(net, poly: Polygon2D) -> RegionPartition:
    """Partition a convex plane polygon into convex linear regions."""
    dnn = _activation_dnn(net)
    require_pwl(dnn)
    if poly.dim != dnn.in_dim:
        raise InputError(f"polygon has dimension {poly.dim}, network expects {dnn.in_dim}")
    layers = dnn.layers
    pieces = [np.array(poly.coords)]
    for i, layer in enumerate(layers):
        if layer.activation is not ActivationKind.RELU:
            continue
        for neuron in range(layer.out_dim):
            nxt = []
            for c in pieces:
                z = _prefix_preactivations(layers, poly.to_input(c), i)[:, neuron]
                for part in _split(c, z):
                    if part is not None:
                        nxt.append(part)
            pieces = nxt
    regions = []
    for c in pieces:
        pat = activation_pattern(dnn, poly.to_input(_centroid(c)))
        regions.append(Region(poly.to_input(c), c, pat))
    return RegionPartition(poly, tuple(regions))


def partition(net, polytope: Polytope) -> RegionPartition:
    if isinstance(polytope, Segment):
        return exactline(net, polytope)
    if isinstance(polytope, Polygon2D):
        return plane_transfer(net, polytope)
    raise InputError(f"unsupported polytope type {type(polytope).__name__}")


@dataclass(frozen=True, eq=False)
class KeyPoint:
    point: np.ndarray
    pattern: ActivationPattern
    source: int


def key_points(net, polytopes: Sequence[Polytope]) -> list:
    """Vertices of every linear region of every polytope, tagged with the owning region's pattern.

    A point shared by several regions is emitted once per region.
    """
    out = []
    for idx, poly in enumerate(polytopes):
        for region in partition(net, poly):
            for v in region.vertices:
                out.append(KeyPoint(np.array(v), region.pattern, idx))
    return out
