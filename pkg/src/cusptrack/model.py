"""Parametric matrix functions A(x, y) and their numerical derivatives.

Entries are callables mapping (x, y) -> complex; both scalars and equal-shape
numpy arrays must be supported so whole sample grids evaluate in one pass.
Derivatives are always finite differences on the entry evaluations (one
derivative policy for expressions and builtins alike); the directional
derivative along a curve contracts the FD partials with the curve velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr as expr_mod
from .linalg import as_matrix

_CBRT_EPS = float(np.finfo(np.float64).eps) ** (1.0 / 3.0)

EntryFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ParamMatrixFn:
    n: int
    entries: tuple  # n x n grid of EntryFn
    fd_step: float | None = None  # None: cbrt(eps) * max(1, |xi|) per point
    name: str = "custom"
    sources: tuple | None = field(default=None, compare=False)  # entry strings, if any


def _as_point(xi) -> np.ndarray:
    p = np.asarray(xi, dtype=np.float64).reshape(2)
    if not np.all(np.isfinite(p)):
        raise ValueError("evaluation point must be finite")
    return p


def fd_step_at(f: ParamMatrixFn, xi) -> float:
    if f.fd_step is not None:
        return f.fd_step
    x, y = _as_point(xi)
    return _CBRT_EPS * max(1.0, float(np.hypot(x, y)))


def evaluate(f: ParamMatrixFn, xi) -> np.ndarray:
    x, y = _as_point(xi)
    xc, yc = np.complex128(x), np.complex128(y)
    out = np.empty((f.n, f.n), dtype=np.complex128)
    for i in range(f.n):
        for j in range(f.n):
            out[i, j] = f.entries[i][j](xc, yc)
    return as_matrix(out)


def evaluate_grid(f: ParamMatrixFn, xs, ys) -> np.ndarray:
    """Evaluate on m sample points; returns (m, n, n) complex."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    xc = xs.astype(np.complex128)
    yc = ys.astype(np.complex128)
    out = np.empty((len(xs), f.n, f.n), dtype=np.complex128)
    for i in range(f.n):
        for j in range(f.n):
            out[:, i, j] = f.entries[i][j](xc, yc)
    if not np.all(np.isfinite(out.view(np.float64))):
        raise ValueError(f"matrix function {f.name!r} produced non-finite entries")
    return out


def partials_grid(f: ParamMatrixFn, xs, ys):
    """Central-difference partials (dA/dx, dA/dy) on a grid of points."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if f.fd_step is not None:
        h = np.full(len(xs), f.fd_step)
    else:
        h = _CBRT_EPS * np.maximum(1.0, np.hypot(xs, ys))
    hb = h[:, None, None]
    ax = (evaluate_grid(f, xs + h, ys) - evaluate_grid(f, xs - h, ys)) / (2.0 * hb)
    ay = (evaluate_grid(f, xs, ys + h) - evaluate_grid(f, xs, ys - h)) / (2.0 * hb)
    return ax, ay


def partials(f: ParamMatrixFn, xi):
    x, y = _as_point(xi)
    ax, ay = partials_grid(f, np.array([x]), np.array([y]))
    return ax[0], ay[0]


def derivative_along(f: ParamMatrixFn, loop, t: float, method: str = "chain") -> np.ndarray:
    """d/dt A(gamma(t)) along a parametrized curve.

    "chain" (default) contracts FD partials with the analytic velocity;
    "curve_fd" differences A(gamma(t +/- h)) directly. The two agree to
    O(h^2) and the cross-check is part of the test suite.
    """
    t = float(t)
    if method == "chain":
        return adot_grid(f, loop, np.array([t]))[0]
    if method == "curve_fd":
        p = loop.point(t)
        h = fd_step_at(f, p)
        ap = evaluate(f, loop.point(t + h))
        am = evaluate(f, loop.point(t - h))
        return (ap - am) / (2.0 * h)
    raise ValueError(f"unknown derivative method {method!r}")


def adot_grid(f: ParamMatrixFn, loop, ts) -> np.ndarray:
    """Vectorized d/dt A(gamma(t)) over a sample grid (chain rule)."""
    ts = np.asarray(ts, dtype=np.float64)
    pts = loop.points(ts)
    vel = loop.velocities(ts)
    ax, ay = partials_grid(f, pts[:, 0], pts[:, 1])
    return ax * vel[:, 0, None, None] + ay * vel[:, 1, None, None]


# ---------------------------------------------------------------------------
# Construction helpers


def from_expressions(rows, fd_step: float | None = None, name: str = "expr") -> ParamMatrixFn:
    """Build a matrix function from a square grid of expression strings."""
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise ValueError("entry grid must be square")
    entries = tuple(
        tuple(expr_mod.as_callable(expr_mod.parse(src)) for src in row) for row in rows
    )
    sources = tuple(tuple(str(src) for src in row) for row in rows)
    return ParamMatrixFn(n=n, entries=entries, fd_step=fd_step, name=name, sources=sources)


def _const_entry(value: complex) -> EntryFn:
    c = np.complex128(value)

    def fn(x, y):
        if isinstance(x, np.ndarray):
            return np.full(x.shape, c)
        return c

    return fn


def constant_model(matrix, name: str = "constant") -> ParamMatrixFn:
    a = as_matrix(matrix)
    entries = tuple(tuple(_const_entry(a[i, j]) for j in range(a.shape[1])) for i in range(a.shape[0]))
    return ParamMatrixFn(n=a.shape[0], entries=entries, name=name)


def block_diag(parts, name: str = "block") -> ParamMatrixFn:
    """Direct sum of matrix functions: entries outside the blocks are zero."""
    sizes = [p.n for p in parts]
    n = sum(sizes)
    zero = _const_entry(0.0)
    grid = [[zero] * n for _ in range(n)]
    offset = 0
    for p in parts:
        for i in range(p.n):
            for j in range(p.n):
                grid[offset + i][offset + j] = p.entries[i][j]
        offset += p.n
    return ParamMatrixFn(n=n, entries=tuple(tuple(row) for row in grid), name=name)


# ---------------------------------------------------------------------------
# Builtin families.  These are the canonical degeneracy fixtures; they are
# registered by name so problem files can use them without the parser.


def sqrt_model() -> ParamMatrixFn:
    """[[0, 1], [x+iy, 0]]: one coalescence point at the origin."""
    entries = (
        (_const_entry(0.0), _const_entry(1.0)),
        (lambda x, y: x + 1j * y, _const_entry(0.0)),
    )
    return ParamMatrixFn(n=2, entries=entries, name="sqrt")


def phase_zero_model(epsilon: float = 0.25) -> ParamMatrixFn:
    """[[0, 1], [x^2+y^2-eps+iy, 0]]: two coalescence points at (+/-sqrt(eps), 0)."""
    eps = float(epsilon)
    entries = (
        (_const_entry(0.0), _const_entry(1.0)),
        (lambda x, y: x * x + y * y - eps + 1j * y, _const_entry(0.0)),
    )
    return ParamMatrixFn(n=2, entries=entries, name="phase_zero")


def phase_pi_model(epsilon: float = 0.1) -> ParamMatrixFn:
    """[[0, 1], [xy-eps+i(x^2-y^2-eps), 0]]: two coalescence points, pi phases."""
    eps = float(epsilon)
    entries = (
        (_const_entry(0.0), _const_entry(1.0)),
        (lambda x, y: x * y - eps + 1j * (x * x - y * y - eps), _const_entry(0.0)),
    )
    return ParamMatrixFn(n=2, entries=entries, name="phase_pi")


def phase_pi_gcp_locations(epsilon: float = 0.1):
    """Closed-form coalescence points of phase_pi_model."""
    eps = float(epsilon)
    golden = 0.5 * (1.0 + np.sqrt(5.0))
    x = np.sqrt(eps * golden)
    y = np.sqrt(eps * 2.0 / (1.0 + np.sqrt(5.0)))
    return [np.array([x, y]), np.array([-x, -y])]


def tilted_model() -> ParamMatrixFn:
    """[[z, 1], [1, -z]] with z = x+iy: coalescence points at (0, +/-1).

    Unlike the antidiagonal families its diagonal is nonzero, so phases around
    shrinking loops show a genuine sqrt(s) approach to +/-pi/2.
    """
    entries = (
        (lambda x, y: x + 1j * y, _const_entry(1.0)),
        (_const_entry(1.0), lambda x, y: -(x + 1j * y)),
    )
    return ParamMatrixFn(n=2, entries=entries, name="tilted")


def _cubic_braid_model() -> ParamMatrixFn:
    """Companion matrix of u^3 - 3u - (x+iy): double roots at x+iy = +/-2."""
    entries = (
        (_const_entry(0.0), _const_entry(0.0), lambda x, y: x + 1j * y),
        (_const_entry(1.0), _const_entry(0.0), _const_entry(3.0)),
        (_const_entry(0.0), _const_entry(1.0), _const_entry(0.0)),
    )
    return ParamMatrixFn(n=3, entries=entries, name="cubic_braid")


def block_n4_model(epsilon: float | None = None) -> ParamMatrixFn:
    """3x3 consecutive-pair degeneracy block plus one constant spectator.

    A loop enclosing both coalescence points (x+iy = +/-2, e.g. a circle of
    radius 3) cycles the three block eigenvalues.
    """
    m = block_diag([_cubic_braid_model(), constant_model([[4.0]])], name="block_n4")
    return m


def block_n5_model(epsilon: float | None = None) -> ParamMatrixFn:
    """Two disjoint 2x2 degeneracy blocks plus one constant spectator.

    Coalescence points at x+iy = -1 (first block) and x+iy = +1 (second,
    shifted by 5 so the two pairs never mix); a circle of radius 2 encloses
    both.
    """
    b1 = ParamMatrixFn(
        n=2,
        entries=(
            (_const_entry(0.0), _const_entry(1.0)),
            (lambda x, y: x + 1.0 + 1j * y, _const_entry(0.0)),
        ),
        name="b1",
    )
    b2 = ParamMatrixFn(
        n=2,
        entries=(
            (_const_entry(5.0), _const_entry(1.0)),
            (lambda x, y: x - 1.0 + 1j * y, _const_entry(5.0)),
        ),
        name="b2",
    )
    return block_diag([b1, b2, constant_model([[-4.0]])], name="block_n5")


BUILTIN_MODELS = {
    "sqrt": lambda epsilon=None: sqrt_model(),
    "phase_zero": lambda epsilon=0.25: phase_zero_model(0.25 if epsilon is None else epsilon),
    "phase_pi": lambda epsilon=0.1: phase_pi_model(0.1 if epsilon is None else epsilon),
    "block_n4": block_n4_model,
    "block_n5": block_n5_model,
}
