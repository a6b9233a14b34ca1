"""Parametrized Jordan curves: 1-periodic loops with analytic velocities.

Every loop maps t to the plane with gamma(t+1) = gamma(t) exactly (the
parameter is reduced mod 1 before any trigonometry), is injective on [0, 1),
and is C^1: circles and ellipses analytically, polygons through corner
smoothing by circular fillets under arc-length parametrization. Orientation
is fixed counterclockwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantLoopError


def _frac(ts: np.ndarray) -> np.ndarray:
    return ts - np.floor(ts)


class LoopSpec:
    """Base interface: vectorized points/velocities plus scalar conveniences."""

    def points(self, ts) -> np.ndarray:  # (m, 2)
        raise NotImplementedError

    def velocities(self, ts) -> np.ndarray:  # (m, 2)
        raise NotImplementedError

    def point(self, t: float) -> np.ndarray:
        return self.points(np.array([float(t)]))[0]

    def velocity(self, t: float) -> np.ndarray:
        return self.velocities(np.array([float(t)]))[0]


@dataclass(frozen=True)
class Circle(LoopSpec):
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("circle radius must be positive")

    def points(self, ts):
        a = 2.0 * np.pi * _frac(np.asarray(ts, dtype=np.float64))
        cx, cy = self.center
        return np.stack([cx + self.radius * np.cos(a), cy + self.radius * np.sin(a)], axis=-1)

    def velocities(self, ts):
        a = 2.0 * np.pi * _frac(np.asarray(ts, dtype=np.float64))
        w = 2.0 * np.pi * self.radius
        return np.stack([-w * np.sin(a), w * np.cos(a)], axis=-1)


@dataclass(frozen=True)
class Ellipse(LoopSpec):
    center: tuple[float, float]
    semi_axes: tuple[float, float]

    def __post_init__(self):
        if min(self.semi_axes) <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def points(self, ts):
        a = 2.0 * np.pi * _frac(np.asarray(ts, dtype=np.float64))
        cx, cy = self.center
        ax, ay = self.semi_axes
        return np.stack([cx + ax * np.cos(a), cy + ay * np.sin(a)], axis=-1)

    def velocities(self, ts):
        a = 2.0 * np.pi * _frac(np.asarray(ts, dtype=np.float64))
        ax, ay = self.semi_axes
        return np.stack([-2.0 * np.pi * ax * np.sin(a), 2.0 * np.pi * ay * np.cos(a)], axis=-1)


def _signed_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class SmoothedPolygon(LoopSpec):
    """Convex polygon with corners replaced by tangent circular arcs.

    Arc-length parametrization makes the speed constant, so continuity of the
    tangent direction at the segment/arc joints gives a C^1 curve.
    """

    def __init__(self, vertices, corner_radius: float):
        verts = np.asarray(vertices, dtype=np.float64)
        if verts.ndim != 2 or verts.shape[0] < 3 or verts.shape[1] != 2:
            raise ValueError("polygon needs at least 3 plane vertices")
        if corner_radius <= 0:
            raise ValueError("corner radius must be positive")
        if _signed_area(verts) < 0:
            verts = verts[::-1].copy()  # normalize to counterclockwise
        self.vertices = verts
        self.corner_radius = float(corner_radius)
        self._build()

    def _build(self):
        v = self.vertices
        m = len(v)
        r = self.corner_radius
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.linalg.norm(edges, axis=1)
        if np.any(lengths == 0):
            raise ValueError("degenerate polygon edge")
        dirs = edges / lengths[:, None]

        tan_off = np.empty(m)
        deflect = np.empty(m)
        centers = np.empty((m, 2))
        t_in = np.empty((m, 2))
        t_out = np.empty((m, 2))
        for i in range(m):
            u = dirs[i - 1]  # incoming direction at vertex i
            w = dirs[i]  # outgoing
            cross = u[0] * w[1] - u[1] * w[0]
            dot = float(np.dot(u, w))
            delta = float(np.arctan2(cross, dot))
            if delta <= 1e-12:
                raise ValueError("polygon corners must turn strictly counterclockwise")
            deflect[i] = delta
            tan_off[i] = r * np.tan(0.5 * delta)
            t_in[i] = v[i] - tan_off[i] * u
            t_out[i] = v[i] + tan_off[i] * w
            centers[i] = t_in[i] + r * np.array([-u[1], u[0]])
        for i in range(m):
            if tan_off[i] + tan_off[(i + 1) % m] >= lengths[i]:
                raise ValueError("corner radius too large for polygon edge")

        # pieces: segment from t_out[i] to t_in[i+1], then the arc at i+1
        seg_start, seg_dir, seg_len = [], [], []
        arc_center, arc_theta0, arc_sweep = [], [], []
        piece_len, piece_is_arc = [], []
        for i in range(m):
            j = (i + 1) % m
            a, b = t_out[i], t_in[j]
            L = float(np.linalg.norm(b - a))
            seg_start.append(a)
            seg_dir.append((b - a) / L)
            seg_len.append(L)
            piece_len.append(L)
            piece_is_arc.append(False)
            th0 = float(np.arctan2(*(t_in[j] - centers[j])[::-1]))
            arc_center.append(centers[j])
            arc_theta0.append(th0)
            arc_sweep.append(deflect[j])
            piece_len.append(r * deflect[j])
            piece_is_arc.append(True)

        self._piece_is_arc = np.asarray(piece_is_arc)
        self._cum = np.concatenate([[0.0], np.cumsum(piece_len)])
        self.length = float(self._cum[-1])
        self._seg_start = np.asarray(seg_start)
        self._seg_dir = np.asarray(seg_dir)
        self._arc_center = np.asarray(arc_center)
        self._arc_theta0 = np.asarray(arc_theta0)

    def _locate(self, ts):
        s = _frac(np.asarray(ts, dtype=np.float64)) * self.length
        idx = np.clip(np.searchsorted(self._cum, s, side="right") - 1, 0, len(self._piece_is_arc) - 1)
        local = s - self._cum[idx]
        return idx, local

    def points(self, ts):
        idx, local = self._locate(ts)
        out = np.empty((len(idx), 2))
        is_arc = self._piece_is_arc[idx]
        seg = ~is_arc
        si = idx[seg] // 2
        out[seg] = self._seg_start[si] + local[seg, None] * self._seg_dir[si]
        ai = idx[is_arc] // 2
        theta = self._arc_theta0[ai] + local[is_arc] / self.corner_radius
        out[is_arc] = self._arc_center[ai] + self.corner_radius * np.stack(
            [np.cos(theta), np.sin(theta)], axis=-1
        )
        return out

    def velocities(self, ts):
        idx, local = self._locate(ts)
        out = np.empty((len(idx), 2))
        is_arc = self._piece_is_arc[idx]
        seg = ~is_arc
        out[seg] = self._seg_dir[idx[seg] // 2]
        ai = idx[is_arc] // 2
        theta = self._arc_theta0[ai] + local[is_arc] / self.corner_radius
        out[is_arc] = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        return out * self.length


def rounded_rectangle(xlo: float, xhi: float, ylo: float, yhi: float, corner_frac: float = 0.05) -> SmoothedPolygon:
    if not (xhi > xlo and yhi > ylo):
        raise ValueError("empty rectangle")
    r = corner_frac * min(xhi - xlo, yhi - ylo)
    verts = [(xlo, ylo), (xhi, ylo), (xhi, yhi), (xlo, yhi)]
    return SmoothedPolygon(verts, corner_radius=r)


@dataclass(frozen=True)
class ShrunkLoop(LoopSpec):
    """Affine contraction gamma_s(t) = anchor + s * (gamma(t) - anchor)."""

    base: LoopSpec
    anchor: tuple[float, float]
    scale: float

    def points(self, ts):
        a = np.asarray(self.anchor, dtype=np.float64)
        return a + self.scale * (self.base.points(ts) - a)

    def velocities(self, ts):
        return self.scale * self.base.velocities(ts)


def shrink(loop: LoopSpec, anchor, s: float) -> ShrunkLoop:
    if not 0.0 < s <= 1.0:
        raise ValueError(f"shrink scale must be in (0, 1], got {s}")
    ax, ay = np.asarray(anchor, dtype=np.float64).reshape(2)
    return ShrunkLoop(base=loop, anchor=(float(ax), float(ay)), scale=float(s))


# ---------------------------------------------------------------------------
# Minimal-period reparametrization


def _bump_sigma(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    pos = u > 0
    with np.errstate(over="ignore", under="ignore"):
        out[pos] = np.exp(-1.0 / u[pos])
    return out


def _smoothstep(u) -> np.ndarray:
    """C-infinity step: 0 for u<=0, 1 for u>=1, strictly increasing between."""
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    su = _bump_sigma(u)
    s1u = _bump_sigma(1.0 - u)
    out = np.where(u >= 1.0, 1.0, 0.0)
    mid = (u > 0.0) & (u < 1.0)
    out[mid] = su[mid] / (su[mid] + s1u[mid])
    return out.reshape(shape)


def _smoothstep_deriv(u) -> np.ndarray:
    shape = np.shape(u)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    out = np.zeros_like(u)
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    su = np.exp(-1.0 / um)
    s1u = np.exp(-1.0 / (1.0 - um))
    dsu = su / um**2
    ds1u = s1u / (1.0 - um) ** 2
    out[mid] = (dsu * s1u + su * ds1u) / (su + s1u) ** 2
    return out.reshape(shape)


@dataclass(frozen=True)
class PhiWarp:
    """Smooth parameter warp with phi(t+1) = phi(t) + 1 and phi(0) = 0.

    The unit cell rises to t_star - half_width on [0, 1/3], crosses the
    plateau interval [t_star - half_width, t_star + half_width] on [1/3, 2/3],
    and finishes at 1 on [2/3, 1]; each stage is a scaled smoothstep, so the
    warp is C-infinity and strictly increasing.
    """

    t_star: float
    half_width: float

    def __post_init__(self):
        if not 0.0 < self.t_star < 1.0:
            raise ValueError("t_star must lie in (0, 1)")
        if not 0.0 < self.half_width < min(self.t_star, 1.0 - self.t_star):
            raise ValueError("plateau must stay inside (0, 1)")

    def _increments(self):
        d1 = self.t_star - self.half_width
        d2 = 2.0 * self.half_width
        d3 = 1.0 - (d1 + d2)
        return d1, d2, d3

    def __call__(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        k = np.floor(ts)
        tau = ts - k
        d1, d2, d3 = self._increments()
        val = d1 * _smoothstep(3.0 * tau) + d2 * _smoothstep(3.0 * tau - 1.0) + d3 * _smoothstep(3.0 * tau - 2.0)
        return k + val

    def deriv(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        tau = ts - np.floor(ts)
        d1, d2, d3 = self._increments()
        return 3.0 * (
            d1 * _smoothstep_deriv(3.0 * tau)
            + d2 * _smoothstep_deriv(3.0 * tau - 1.0)
            + d3 * _smoothstep_deriv(3.0 * tau - 2.0)
        )


@dataclass(frozen=True)
class ReparametrizedLoop(LoopSpec):
    base: LoopSpec
    warp: PhiWarp

    def points(self, ts):
        return self.base.points(self.warp(np.asarray(ts, dtype=np.float64)))

    def velocities(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        return self.base.velocities(self.warp(ts)) * self.warp.deriv(ts)[:, None]


def reparametrize_min_period(loop: LoopSpec, f, samples: int = 1024, var_tol: float = 1e-9) -> ReparametrizedLoop:
    """Warp the loop parameter so A(gamma(phi(t))) has minimal period 1.

    The plateau interval is centered on the sample where A(gamma(t)) is
    farthest from its value at t = 0, which guarantees g(phi(k/q)) != g(0)
    for every candidate sub-period 1/q.
    """
    from .model import evaluate_grid  # local import keeps module layering acyclic

    ts = np.arange(samples) / samples
    pts = loop.points(ts)
    grid = evaluate_grid(f, pts[:, 0], pts[:, 1])
    dev = np.linalg.norm((grid - grid[0]).reshape(samples, -1), axis=1)
    peak = float(dev.max())
    scale = max(1.0, float(np.linalg.norm(grid[0])))
    if peak < var_tol * scale:
        raise ConstantLoopError("constant along loop: matrix varies below tolerance")

    i_star = int(np.argmax(dev))
    threshold = 0.5 * peak
    lo = i_star
    while lo > 1 and dev[lo - 1] > threshold:
        lo -= 1
    hi = i_star
    while hi < samples - 1 and dev[hi + 1] > threshold:
        hi += 1
    t_star = ts[i_star]
    window = min(t_star - ts[lo], ts[hi] - t_star)
    half_width = max(1.0 / samples, 0.9 * min(window, 0.9 * t_star, 0.9 * (1.0 - t_star), 1.0 / 6.0))
    return ReparametrizedLoop(base=loop, warp=PhiWarp(t_star=float(t_star), half_width=float(half_width)))


# ---------------------------------------------------------------------------
# Open segments and their time-symmetric (out-and-back) traversal


@dataclass(frozen=True)
class Segment:
    start: tuple[float, float]
    end: tuple[float, float]

    def point(self, u: float) -> np.ndarray:
        p = np.asarray(self.start, dtype=np.float64)
        q = np.asarray(self.end, dtype=np.float64)
        return p + u * (q - p)


@dataclass(frozen=True)
class FoldedSegment(LoopSpec):
    """Out-and-back traversal of a segment via eta(s) = sin^2(pi s).

    eta(1-s) = eta(s), eta(0) = 0, eta(1/2) = 1: a closed (non-injective)
    C-infinity path that retraces itself, used by the reversibility check.
    """

    segment: Segment

    def points(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        eta = np.sin(np.pi * _frac(ts)) ** 2
        p = np.asarray(self.segment.start, dtype=np.float64)
        q = np.asarray(self.segment.end, dtype=np.float64)
        return p + eta[:, None] * (q - p)

    def velocities(self, ts):
        ts = np.asarray(ts, dtype=np.float64)
        deta = np.pi * np.sin(2.0 * np.pi * _frac(ts))
        p = np.asarray(self.segment.start, dtype=np.float64)
        q = np.asarray(self.segment.end, dtype=np.float64)
        return deta[:, None] * (q - p)


def check_injective(loop: LoopSpec, samples: int = 1024, spatial_tol: float | None = None, param_gap: float = 0.01):
    """Sampling check that the loop does not self-intersect on [0, 1)."""
    ts = np.arange(samples) / samples
    pts = loop.points(ts)
    diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    if spatial_tol is None:
        spatial_tol = 1e-6 * max(diam, 1e-12)
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
    dt = np.abs(ts[:, None] - ts[None, :])
    dt = np.minimum(dt, 1.0 - dt)
    mask = dt > param_gap
    if np.any(d2[mask] < spatial_tol**2):
        raise ValueError("loop parametrization is not injective on [0, 1)")
