"""Map projections of spherical layouts and SVG rendering.

Sphere projections: orthographic and stereographic about a center point,
Mercator (latitude clipped to +-85 degrees) and Equal Earth. Longitudes are
taken relative to the center longitude and wrapped to [-pi, pi), so the
antimeridian of the center is the seam of the two world maps. Euclidean
layouts draw as they are; hyperbolic ones in the Poincare disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .embedder import Embedding
from .geometry import EUCLIDEAN, HYPERBOLIC, SPHERICAL, SphericalPoint, normalize_spherical
from .graph_io import Graph

ORTHOGRAPHIC = "orthographic"
STEREOGRAPHIC = "stereographic"
MERCATOR = "mercator"
EQUAL_EARTH = "equal_earth"
PROJECTIONS = (ORTHOGRAPHIC, STEREOGRAPHIC, MERCATOR, EQUAL_EARTH)

# CLI spellings
ALIASES = {"ortho": ORTHOGRAPHIC, "stereo": STEREOGRAPHIC, "equal-earth": EQUAL_EARTH,
           "mercator": MERCATOR, ORTHOGRAPHIC: ORTHOGRAPHIC, STEREOGRAPHIC: STEREOGRAPHIC,
           EQUAL_EARTH: EQUAL_EARTH}

MERCATOR_MAX_LAT = math.radians(85.0)

# Equal Earth polynomial coefficients
A1, A2, A3, A4 = 1.340264, -0.081106, 0.000893, 0.003796
_EE_M = math.sqrt(3.0) / 2.0

ANTIPODE_TOL = 1e-12


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class ProjectionKind:
    kind: str = ORTHOGRAPHIC
    center: SphericalPoint = SphericalPoint(0.0, 0.0)

    def __post_init__(self) -> None:
        if self.kind not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.kind!r}; expected one of {PROJECTIONS}")
        object.__setattr__(self, "center", normalize_spherical(SphericalPoint(*self.center)))

    @classmethod
    def parse(cls, name: str, center: Optional[Sequence[float]] = None) -> "ProjectionKind":
        try:
            kind = ALIASES[name]
        except KeyError:
            raise ValueError(f"unknown projection {name!r}") from None
        return cls(kind, SphericalPoint(*center) if center is not None else SphericalPoint(0.0, 0.0))


def _rel_lon(lam, lam0):
    """Longitude relative to lam0, wrapped to [-pi, pi)."""
    return np.remainder(np.asarray(lam) - lam0 + math.pi, 2.0 * math.pi) - math.pi


def equal_earth_xy(phi, lam):
    """Equal Earth coordinates for latitude ``phi`` and (relative) longitude ``lam``."""
    phi = np.asarray(phi, dtype=float)
    lam = np.asarray(lam, dtype=float)
    th = np.arcsin(_EE_M * np.sin(phi))
    t2 = th * th
    t6 = t2 * t2 * t2
    y = th * (A1 + A2 * t2 + t6 * (A3 + A4 * t2))
    x = 2.0 * math.sqrt(3.0) * lam * np.cos(th) / (3.0 * (A1 + 3.0 * A2 * t2 + t6 * (7.0 * A3 + 9.0 * A4 * t2)))
    return x, y


def project_many(coords: np.ndarray, kind: ProjectionKind) -> tuple[np.ndarray, np.ndarray]:
    """Project an ``(n, 2)`` array of (lat, lon); returns (xy, visible)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    phi, lam = coords[:, 0], coords[:, 1]
    phi0, lam0 = kind.center
    dl = _rel_lon(lam, lam0)
    visible = np.ones(len(coords), dtype=bool)
    if kind.kind in (ORTHOGRAPHIC, STEREOGRAPHIC):
        cphi = np.cos(phi)
        cos_c = math.sin(phi0) * np.sin(phi) + math.cos(phi0) * cphi * np.cos(dl)
        x = cphi * np.sin(dl)
        y = math.cos(phi0) * np.sin(phi) - math.sin(phi0) * cphi * np.cos(dl)
        if kind.kind == ORTHOGRAPHIC:
            visible = cos_c >= 0.0
        else:
            if np.any(1.0 + cos_c < ANTIPODE_TOL):
                raise ProjectionError("stereographic projection undefined at the antipode of the center")
            k = 2.0 / (1.0 + cos_c)
            x, y = k * x, k * y
    elif kind.kind == MERCATOR:
        x = dl
        # atanh(sin phi) == ln tan(pi/4 + phi/2), exact at the equator
        y = np.arctanh(np.sin(np.clip(phi, -MERCATOR_MAX_LAT, MERCATOR_MAX_LAT)))
    else:
        x, y = equal_earth_xy(phi, dl)
    return np.column_stack([x, y]), visible


def project(p: SphericalPoint, kind: ProjectionKind) -> tuple[tuple[float, float], bool]:
    xy, vis = project_many(np.array([[p[0], p[1]]]), kind)
    return (float(xy[0, 0]), float(xy[0, 1])), bool(vis[0])


def _unit(p) -> np.ndarray:
    phi, lam = p
    return np.array([math.cos(phi) * math.cos(lam), math.cos(phi) * math.sin(lam), math.sin(phi)])


def _slerp(a: np.ndarray, b: np.ndarray, segments: int, mid: Optional[np.ndarray] = None) -> np.ndarray:
    """Unit vectors along the minor arc a -> b (through ``mid`` if given, for antipodes)."""
    t = np.linspace(0.0, 1.0, segments + 1)
    if mid is not None:
        # half turn through mid: a, mid, b are pairwise orthogonal/opposite
        ang = t * math.pi
        pts = np.cos(ang)[:, None] * a + np.sin(ang)[:, None] * mid
    else:
        omega = math.acos(float(np.clip(a @ b, -1.0, 1.0)))
        if omega < 1e-15:
            pts = np.repeat(a[None, :], segments + 1, axis=0)
        else:
            s = math.sin(omega)
            pts = (np.sin((1.0 - t) * omega)[:, None] * a + np.sin(t * omega)[:, None] * b) / s
    pts[0], pts[-1] = a, b
    return pts


def _to_latlon(pts: np.ndarray) -> np.ndarray:
    phi = np.arcsin(np.clip(pts[:, 2], -1.0, 1.0))
    lam = np.remainder(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * math.pi)
    lam[lam >= 2.0 * math.pi] = 0.0
    return np.column_stack([phi, lam])


def sample_geodesic(p: SphericalPoint, q: SphericalPoint, segments: int = 16) -> list[SphericalPoint]:
    """``segments + 1`` points along the shortest great-circle arc from p to q."""
    if segments < 1:
        raise ValueError("segments must be at least 1")
    a, b = _unit(p), _unit(q)
    if 1.0 + float(a @ b) < ANTIPODE_TOL:
        raise ProjectionError("geodesic between antipodal points is not unique")
    out = [SphericalPoint(float(f), float(l)) for f, l in _to_latlon(_slerp(a, b, segments))]
    out[0], out[-1] = SphericalPoint(*normalize_spherical(SphericalPoint(*p))), SphericalPoint(*normalize_spherical(SphericalPoint(*q)))
    return out


def _geodesic_any(p, q, segments: int) -> np.ndarray:
    """Like sample_geodesic, but picks a fixed great circle for antipodal ends."""
    a, b = _unit(p), _unit(q)
    if 1.0 + float(a @ b) < ANTIPODE_TOL:
        helper = np.array([0.0, 0.0, 1.0]) if abs(a[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
        mid = np.cross(a, helper)
        mid /= np.linalg.norm(mid)
        return _to_latlon(_slerp(a, -a, segments, mid))
    return _to_latlon(_slerp(a, b, segments))


@dataclass
class ProjectionScene:
    vertices: np.ndarray
    vertex_visible: np.ndarray
    # each polyline is an (k, 2) array with k >= 2; flags are per segment
    polylines: list[np.ndarray] = field(default_factory=list)
    segment_visible: list[np.ndarray] = field(default_factory=list)
    bbox: tuple[float, float, float, float] = (-1.0, -1.0, 1.0, 1.0)
    # outline of the map domain (globe or disk edge), if any
    frame: Optional[np.ndarray] = None


def _split_at_seam(rel: np.ndarray, phi: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Cut a sampled path where relative longitude wraps, adding the seam crossings."""
    pieces = []
    cur_l, cur_p = [rel[0]], [phi[0]]
    for k in range(1, len(rel)):
        jump = rel[k] - rel[k - 1]
        if abs(jump) > math.pi:
            # unwrap to find where the path meets the seam at +-pi
            nxt = rel[k] - math.copysign(2.0 * math.pi, jump)
            edge = math.copysign(math.pi, nxt)
            t = (edge - rel[k - 1]) / (nxt - rel[k - 1]) if nxt != rel[k - 1] else 0.0
            cphi = phi[k - 1] + t * (phi[k] - phi[k - 1])
            cur_l.append(edge)
            cur_p.append(cphi)
            pieces.append((np.array(cur_l), np.array(cur_p)))
            cur_l, cur_p = [-edge], [cphi]
        cur_l.append(rel[k])
        cur_p.append(phi[k])
    pieces.append((np.array(cur_l), np.array(cur_p)))
    return [pc for pc in pieces if len(pc[0]) >= 2]


def _world_bbox(kind: ProjectionKind) -> tuple[float, float, float, float]:
    if kind.kind == ORTHOGRAPHIC:
        return (-1.0, -1.0, 1.0, 1.0)
    if kind.kind == MERCATOR:
        ymax = math.log(math.tan(math.pi / 4.0 + MERCATOR_MAX_LAT / 2.0))
        return (-math.pi, -ymax, math.pi, ymax)
    xmax = float(equal_earth_xy(0.0, math.pi)[0])
    ymax = float(equal_earth_xy(math.pi / 2.0, 0.0)[1])
    return (-xmax, -ymax, xmax, ymax)


def _bbox_of(points: np.ndarray) -> tuple[float, float, float, float]:
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))


def _frame(kind: ProjectionKind, k: int = 180) -> Optional[np.ndarray]:
    t = np.linspace(0.0, 2.0 * math.pi, k + 1)
    if kind.kind == ORTHOGRAPHIC:
        return np.column_stack([np.cos(t), np.sin(t)])
    if kind.kind == EQUAL_EARTH:
        lat = np.linspace(-math.pi / 2, math.pi / 2, k // 2 + 1)
        east = np.column_stack(equal_earth_xy(lat, np.full_like(lat, math.pi)))
        west = np.column_stack(equal_earth_xy(lat[::-1], np.full_like(lat, -math.pi)))
        return np.vstack([east, west, east[:1]])
    return None


def _sphere_scene(emb: Embedding, g: Optional[Graph], kind: ProjectionKind, segments: int) -> ProjectionScene:
    xy, vis = project_many(emb.coords, kind)
    scene = ProjectionScene(xy, vis, frame=_frame(kind))
    lam0 = kind.center[1]
    for u, v in (g.edges if g is not None else []):
        ll = _geodesic_any(emb.coords[u], emb.coords[v], segments)
        if kind.kind in (MERCATOR, EQUAL_EARTH):
            for rel, phi in _split_at_seam(_rel_lon(ll[:, 1], lam0), ll[:, 0]):
                pts, _ = project_many(np.column_stack([phi, rel + lam0]), kind)
                # keep seam points on the side they were cut for
                if kind.kind == MERCATOR:
                    pts[:, 0] = rel
                else:
                    pts[:, 0] = equal_earth_xy(phi, rel)[0]
                scene.polylines.append(pts)
                scene.segment_visible.append(np.ones(len(pts) - 1, dtype=bool))
        else:
            pts, pv = project_many(ll, kind)
            scene.polylines.append(pts)
            scene.segment_visible.append(pv[:-1] & pv[1:])
    if kind.kind == STEREOGRAPHIC:
        allpts = np.vstack([xy] + scene.polylines) if scene.polylines else xy
        scene.bbox = _bbox_of(allpts)
    else:
        scene.bbox = _world_bbox(kind)
    return scene


def poincare_xy(coords: np.ndarray) -> np.ndarray:
    """Polar hyperbolic coordinates to the Poincare disk: radius tanh(r / 2)."""
    coords = np.atleast_2d(coords)
    rho = np.tanh(coords[:, 0] / 2.0)
    return np.column_stack([rho * np.cos(coords[:, 1]), rho * np.sin(coords[:, 1])])


def _hyperbolic_geodesic(p, q, segments: int) -> np.ndarray:
    """Disk points along the hyperbolic geodesic, interpolated on the hyperboloid."""
    def lift(pt):
        r, th = pt
        return np.array([math.cosh(r), math.sinh(r) * math.cos(th), math.sinh(r) * math.sin(th)])

    a, b = lift(p), lift(q)
    inner = a[0] * b[0] - a[1] * b[1] - a[2] * b[2]
    d = math.acosh(max(inner, 1.0))
    t = np.linspace(0.0, 1.0, segments + 1)
    if d < 1e-12:
        pts = np.repeat(a[None, :], segments + 1, axis=0)
    else:
        pts = (np.sinh((1.0 - t) * d)[:, None] * a + np.sinh(t * d)[:, None] * b) / math.sinh(d)
    return pts[:, 1:] / (1.0 + pts[:, :1])


def build_scene(emb: Embedding, g: Optional[Graph] = None,
                kind: Optional[ProjectionKind] = None, segments: int = 16) -> ProjectionScene:
    """Planar scene for any layout; ``kind`` applies to spherical ones."""
    if segments < 1:
        raise ValueError("segments must be at least 1")
    if g is not None and g.n != emb.n:
        raise ValueError(f"graph has {g.n} vertices but the layout has {emb.n}")
    geo = emb.geometry.kind
    if geo == SPHERICAL:
        return _sphere_scene(emb, g, kind or ProjectionKind(), segments)
    edges = g.edges if g is not None else []
    if geo == HYPERBOLIC:
        xy = poincare_xy(emb.coords)
        lines = [_hyperbolic_geodesic(emb.coords[u], emb.coords[v], segments) for u, v in edges]
        t = np.linspace(0.0, 2.0 * math.pi, 181)
        return ProjectionScene(xy, np.ones(emb.n, dtype=bool), lines,
                               [np.ones(len(pl) - 1, dtype=bool) for pl in lines],
                               (-1.0, -1.0, 1.0, 1.0), np.column_stack([np.cos(t), np.sin(t)]))
    assert geo == EUCLIDEAN
    xy = emb.coords.copy()
    lines = [np.vstack([xy[u], xy[v]]) for u, v in edges]
    return ProjectionScene(xy, np.ones(emb.n, dtype=bool), lines,
                           [np.ones(1, dtype=bool) for _ in lines], _bbox_of(xy))


@dataclass(frozen=True)
class RenderOptions:
    width: int = 600
    vertex_radius: float = 4.0
    segments: int = 16
    # opacity for hidden-hemisphere parts; None leaves them out
    hidden_opacity: Optional[float] = 0.15
    margin: float = 10.0
    edge_color: str = "#555555"
    vertex_color: str = "#1f77b4"
    stroke_width: float = 1.0


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _path_d(points: np.ndarray) -> str:
    return "M" + " L".join(f"{_fmt(x)} {_fmt(y)}" for x, y in points)


def render_scene(scene: ProjectionScene, opts: RenderOptions = RenderOptions()) -> str:
    x0, y0, x1, y1 = scene.bbox
    span_x, span_y = max(x1 - x0, 1e-12), max(y1 - y0, 1e-12)
    inner_w = opts.width - 2 * opts.margin
    scale = inner_w / span_x
    height = int(math.ceil(span_y * scale + 2 * opts.margin))

    def to_view(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.column_stack([opts.margin + (pts[:, 0] - x0) * scale,
                                opts.margin + (y1 - pts[:, 1]) * scale])

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{opts.width}" '
        f'height="{height}" viewBox="0 0 {opts.width} {height}">',
        f'<rect x="0" y="0" width="{opts.width}" height="{height}" fill="white"/>',
    ]
    if scene.frame is not None:
        out.append(f'<path d="{_path_d(to_view(scene.frame))} Z" fill="#f4f6fb" stroke="#999999" '
                   f'stroke-width="1"/>')
    out.append(f'<g fill="none" stroke="{opts.edge_color}" stroke-width="{_fmt(opts.stroke_width)}">')
    for pts, flags in zip(scene.polylines, scene.segment_visible):
        view = to_view(pts)
        # runs of segments sharing a visibility flag become one path each
        start = 0
        for k in range(1, len(flags) + 1):
            if k == len(flags) or flags[k] != flags[start]:
                run = view[start:k + 1]
                if flags[start]:
                    out.append(f'<path d="{_path_d(run)}"/>')
                elif opts.hidden_opacity is not None:
                    out.append(f'<path d="{_path_d(run)}" stroke-opacity="{_fmt(opts.hidden_opacity)}"/>')
                start = k
    out.append("</g>")
    out.append(f'<g fill="{opts.vertex_color}">')
    for (cx, cy), vis in zip(to_view(scene.vertices), scene.vertex_visible):
        if vis:
            out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(opts.vertex_radius)}"/>')
        elif opts.hidden_opacity is not None:
            out.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(opts.vertex_radius)}" '
                       f'fill-opacity="{_fmt(opts.hidden_opacity)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_svg(emb: Embedding, g: Optional[Graph] = None, kind: Optional[ProjectionKind] = None,
               opts: RenderOptions = RenderOptions()) -> str:
    """Standalone SVG 1.1 document of the layout."""
    return render_scene(build_scene(emb, g, kind, opts.segments), opts)
