"""Cuspidal-point machinery: discriminant, Newton refinement, localization
by quadtree subdivision with monodromy indicators, and shrink-asymptotics
classification.

A generic cuspidal point of a 2x2 function is a regular zero of
F = (Re Delta, Im Delta) with Delta = (a-d)^2 + 4bc: eigenvalues coalesce
exactly where Delta vanishes, and invertibility of DF makes the coalescence
a simple square-root branch point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import model as model_mod
from .errors import (
    AmbiguousPatternError,
    CollisionError,
    CuspTrackError,
    DegenerateSpectrumError,
    GaugeDriftError,
)
from .flow import FlowOptions, MonodromyOptions, circ_dist, integrate_loop, monodromy
from .loops import LoopSpec, rounded_rectangle, shrink


def discriminant(f, xi) -> complex:
    """(a-d)^2 + 4bc at the given parameter point (2x2 only)."""
    if f.n != 2:
        raise ValueError("discriminant is defined for 2x2 matrix functions")
    a = model_mod.evaluate(f, xi)
    return complex((a[0, 0] - a[1, 1]) ** 2 + 4.0 * a[0, 1] * a[1, 0])


def _discriminant_grid(f, xs, ys) -> np.ndarray:
    grid = model_mod.evaluate_grid(f, xs, ys)
    return (grid[:, 0, 0] - grid[:, 1, 1]) ** 2 + 4.0 * grid[:, 0, 1] * grid[:, 1, 0]


def F_at(f, xi) -> np.ndarray:
    d = discriminant(f, xi)
    return np.array([d.real, d.imag])


def F_and_DF(f, xi):
    """F = (Re Delta, Im Delta) and its Jacobian by central differences."""
    xi = np.asarray(xi, dtype=np.float64).reshape(2)
    h = model_mod.fd_step_at(f, xi)
    F = F_at(f, xi)
    DF = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        DF[:, k] = (F_at(f, xi + e) - F_at(f, xi - e)) / (2.0 * h)
    return F, DF


@dataclass(frozen=True)
class GcpCandidate:
    location: tuple[float, float]
    F_residual: float
    DF: np.ndarray
    DF_condition: float
    status: str  # "verified" | "rejected" | "ambiguous"
    certification: str | None = None  # "monodromy" | "discriminant" (set by localize)

    def __post_init__(self):
        if self.status not in ("verified", "rejected", "ambiguous"):
            raise ValueError(f"invalid status {self.status!r}")


def newton_refine(f, seed, max_iter: int = 60, root_tol: float = 1e-10, cond_max: float = 1e8) -> GcpCandidate:
    """Damped Newton iteration on F from the given seed.

    Iterates past the acceptance threshold down to stagnation so that
    distinct seeds converging to the same root agree to near machine
    precision (which makes radius-based deduplication reliable).
    """
    if f.n != 2:
        raise ValueError("Newton refinement is defined for 2x2 matrix functions")
    xi = np.asarray(seed, dtype=np.float64).reshape(2).copy()
    singular = False
    F, DF = F_and_DF(f, xi)
    norm_f = float(np.linalg.norm(F))
    for _ in range(max_iter):
        if norm_f <= 1e-14:
            break
        try:
            step = np.linalg.solve(DF, -F)
        except np.linalg.LinAlgError:
            singular = True
            break
        damp = 1.0
        accepted = False
        while damp >= 2.0**-20:
            trial = xi + damp * step
            trial_norm = float(np.linalg.norm(F_at(f, trial)))
            if trial_norm < norm_f:
                xi = trial
                accepted = True
                break
            damp *= 0.5
        if not accepted:
            break
        F, DF = F_and_DF(f, xi)
        norm_f = float(np.linalg.norm(F))

    sv = np.linalg.svd(DF, compute_uv=False)
    cond = float(np.inf) if sv[-1] == 0.0 else float(sv[0] / sv[-1])
    if norm_f <= root_tol:
        status = "ambiguous" if (singular or cond > cond_max) else "verified"
    else:
        status = "ambiguous" if singular else "rejected"
    return GcpCandidate(
        location=(float(xi[0]), float(xi[1])),
        F_residual=norm_f,
        DF=DF,
        DF_condition=cond,
        status=status,
    )


# ---------------------------------------------------------------------------
# Localization


@dataclass(frozen=True)
class Rect:
    xlo: float
    xhi: float
    ylo: float
    yhi: float

    def __post_init__(self):
        if not (self.xhi > self.xlo and self.yhi > self.ylo):
            raise ValueError("empty rectangle")

    @property
    def center(self):
        return np.array([0.5 * (self.xlo + self.xhi), 0.5 * (self.ylo + self.yhi)])

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.xhi - self.xlo, self.yhi - self.ylo))

    def contains(self, p, margin: float = 0.0) -> bool:
        return (
            self.xlo - margin <= p[0] <= self.xhi + margin
            and self.ylo - margin <= p[1] <= self.yhi + margin
        )

    def quarter(self):
        cx, cy = self.center
        return [
            Rect(self.xlo, cx, self.ylo, cy),
            Rect(cx, self.xhi, self.ylo, cy),
            Rect(self.xlo, cx, cy, self.yhi),
            Rect(cx, self.xhi, cy, self.yhi),
        ]

    def scaled(self, factor: float) -> "Rect":
        cx, cy = self.center
        hw = 0.5 * (self.xhi - self.xlo) * factor
        hh = 0.5 * (self.yhi - self.ylo) * factor
        return Rect(cx - hw, cx + hw, cy - hh, cy + hh)


@dataclass(frozen=True)
class LocalizeOptions:
    max_depth: int = 8
    steps_per_period: int = 1024
    root_tol: float = 1e-10
    cond_max: float = 1e8
    dedup_radius: float | None = None  # default 10 * root_tol
    seed_rel_threshold: float = 1e-2  # of the global |Delta| median
    grid_points: int = 9
    phase_flag: float = 0.5  # rad; identity-permutation cells with larger phases subdivide
    corner_frac: float = 0.05
    jitter_factors: tuple = (1.0, 1.031, 0.9615, 1.0585)
    newton_max_iter: int = 60
    # detection-grade tolerances: corner-smoothed cell boundaries are only C1
    # at the arc joints, which caps RK4 transport accuracy around 1e-5; the
    # permutation and phase-flag signals are far coarser than that, and the
    # aggressive gap floor makes through-degeneracy passes fail fast so the
    # jitter retry can kick in
    flow: FlowOptions = field(
        default_factory=lambda: FlowOptions(
            path_tol=1e-3, norm_tol=1e-7, gap_floor_rel=1e-5, max_step_halvings=1
        )
    )
    mono: MonodromyOptions = field(
        default_factory=lambda: MonodromyOptions(
            pattern_tol=1e-3, sum_tol=1e-3, det_tol=1e-3, phase_tol=1e-3
        )
    )


@dataclass(frozen=True)
class IndicatedCell:
    rect: Rect
    permutation: tuple
    coalescing_indices: tuple


@dataclass
class LocalizeResult:
    candidates: list  # verified GcpCandidates, lexicographically sorted
    rejected: list  # non-verified Newton outcomes (diagnostics)
    indicated_cells: list  # n > 2: monodromy-indicated cells with pair indices
    unresolved_cells: list  # cells whose boundary kept colliding
    cells_processed: int
    seeds_tried: int


def _grid_delta_minima(f, rect: Rect, m: int, threshold: float):
    """Local minima of |Delta| on an m x m cell grid, below the threshold."""
    xs = np.linspace(rect.xlo, rect.xhi, m)
    ys = np.linspace(rect.ylo, rect.yhi, m)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    vals = np.abs(_discriminant_grid(f, X.ravel(), Y.ravel())).reshape(m, m)
    minima = []
    for i in range(m):
        for j in range(m):
            v = vals[i, j]
            if v >= threshold:
                continue
            neigh = vals[max(0, i - 1) : i + 2, max(0, j - 1) : j + 2]
            if v <= neigh.min():
                minima.append((np.array([X[i, j], Y[i, j]]), v))
    return minima, vals


def _cell_monodromy(f, rect: Rect, opts: LocalizeOptions):
    """Boundary-loop monodromy with jittered retries near degeneracies."""
    last_error = None
    for factor in opts.jitter_factors:
        jrect = rect.scaled(factor)
        loop = rounded_rectangle(jrect.xlo, jrect.xhi, jrect.ylo, jrect.yhi, opts.corner_frac)
        try:
            path = integrate_loop(
                f, loop, periods=1, steps_per_period=opts.steps_per_period, options=opts.flow
            )
            return monodromy(path, opts.mono), jrect
        except (CollisionError, GaugeDriftError, AmbiguousPatternError, DegenerateSpectrumError) as err:
            last_error = err
    raise CuspTrackError(f"collision on cell boundary (after jitters): {last_error}")


def localize(f, rect: Rect, options: LocalizeOptions | None = None) -> LocalizeResult:
    """Locate cuspidal points in a rectangle.

    Quadtree subdivision driven by the boundary monodromy: a non-identity
    permutation (odd enclosed count) or a clearly nonzero phase signature
    forces subdivision down to the depth limit. Pairs with cancelling
    monodromy cannot be seen from the boundary at all, so local minima of
    |Delta| below a scale-aware threshold always seed Newton as well; every
    candidate is then verified against the defining conditions.
    """
    opts = options or LocalizeOptions()
    dedup_radius = opts.dedup_radius if opts.dedup_radius is not None else 10.0 * opts.root_tol

    seeds: list[np.ndarray] = []
    indicated: list[IndicatedCell] = []
    unresolved: list[Rect] = []
    mono_cells: list[Rect] = []
    cells_processed = 0

    if f.n == 2:
        gx = np.linspace(rect.xlo, rect.xhi, 65)
        gy = np.linspace(rect.ylo, rect.yhi, 65)
        GX, GY = np.meshgrid(gx, gy, indexing="ij")
        global_median = float(np.median(np.abs(_discriminant_grid(f, GX.ravel(), GY.ravel()))))
        seed_threshold = opts.seed_rel_threshold * global_median
    else:
        seed_threshold = 0.0

    queue = [(rect, 0)]
    while queue:
        cell, depth = queue.pop()
        cells_processed += 1

        if f.n == 2 and seed_threshold > 0.0:
            minima, grid_vals = _grid_delta_minima(f, cell, opts.grid_points, seed_threshold)
            seeds.extend(p for p, _v in minima)
        else:
            grid_vals = None

        try:
            mono, jrect = _cell_monodromy(f, cell, opts)
        except CuspTrackError:
            unresolved.append(cell)
            if depth < opts.max_depth:
                queue.extend((child, depth + 1) for child in cell.quarter())
            continue

        phase_mag = float(circ_dist(mono.phases, 0.0).max())
        suspicious = (not mono.is_identity) or phase_mag > opts.phase_flag
        if not mono.is_identity:
            mono_cells.append(jrect)
        if not suspicious:
            continue
        if depth < opts.max_depth:
            queue.extend((child, depth + 1) for child in cell.quarter())
        elif f.n == 2:
            if grid_vals is None:
                minima, grid_vals = _grid_delta_minima(f, cell, opts.grid_points, np.inf)
            k = int(np.argmin(grid_vals))
            xs = np.linspace(cell.xlo, cell.xhi, opts.grid_points)
            ys = np.linspace(cell.ylo, cell.yhi, opts.grid_points)
            seeds.append(np.array([xs[k // opts.grid_points], ys[k % opts.grid_points]]))
        else:
            pair = tuple(j for j, p in enumerate(mono.permutation) if p != j)
            indicated.append(IndicatedCell(rect=cell, permutation=mono.permutation, coalescing_indices=pair))

    verified: list[GcpCandidate] = []
    rejected: list[GcpCandidate] = []
    for seed in seeds:
        cand = newton_refine(
            f, seed, max_iter=opts.newton_max_iter, root_tol=opts.root_tol, cond_max=opts.cond_max
        )
        if cand.status == "verified" and rect.contains(cand.location, margin=1e-9):
            verified.append(cand)
        else:
            rejected.append(cand)

    verified.sort(key=lambda c: c.location)
    deduped: list[GcpCandidate] = []
    for cand in verified:
        merged = False
        for i, kept in enumerate(deduped):
            if np.hypot(
                cand.location[0] - kept.location[0], cand.location[1] - kept.location[1]
            ) <= dedup_radius:
                if cand.F_residual < kept.F_residual:
                    deduped[i] = cand
                merged = True
                break
        if not merged:
            deduped.append(cand)

    final = []
    for cand in deduped:
        by_mono = any(r.contains(cand.location) for r in mono_cells)
        final.append(replace(cand, certification="monodromy" if by_mono else "discriminant"))
    final.sort(key=lambda c: c.location)

    return LocalizeResult(
        candidates=final,
        rejected=rejected,
        indicated_cells=indicated,
        unresolved_cells=unresolved,
        cells_processed=cells_processed,
        seeds_tried=len(seeds),
    )


# ---------------------------------------------------------------------------
# Shrink-scan classification


@dataclass(frozen=True)
class ShrinkScanOptions:
    steps_per_period: int = 2048
    fit_points: int = 4  # smallest scales used for the exponent fit
    exact_tol: float = 1e-8  # deviations below this skip the fit entirely
    gcp_band: tuple = (0.35, 0.65)
    regular_band: tuple = (0.85, 1.15)
    min_scale: float = 2.0**-10
    flow: FlowOptions = field(default_factory=FlowOptions)
    mono: MonodromyOptions = field(default_factory=MonodromyOptions)


DEFAULT_SCALES = tuple(2.0**-k for k in range(1, 8))


@dataclass
class ShrinkScan:
    anchor: tuple[float, float]
    scales: np.ndarray
    phases: np.ndarray  # (num_scales, n)
    permutations: list
    deviations_gcp: np.ndarray  # circular distance of each phase from pi/2 mod pi
    deviations_regular: np.ndarray  # circular distance from 0 mod 2pi
    exponent_gcp: np.ndarray | None  # per-phase fitted exponents (None on exact path)
    exponent_regular: np.ndarray | None
    summary_exponent_gcp: float | None
    summary_exponent_regular: float | None
    classification: str  # "gcp-like" | "regular" | "inconclusive"
    fit_mode: str  # "fit" | "exact-gcp" | "exact-regular"


def _fit_exponent(scales: np.ndarray, deviations: np.ndarray) -> float:
    dev = np.maximum(deviations, 1e-16)
    slope, _ = np.polyfit(np.log(scales), np.log(dev), 1)
    return float(slope)


def shrink_scan(f, anchor, base_loop: LoopSpec, scales=None, options: ShrinkScanOptions | None = None) -> ShrinkScan:
    """Phase asymptotics along loops contracting toward an anchor point.

    Around a cuspidal point the phases approach +/-pi/2 like sqrt(s); around
    a regular point they vanish with the loop. Deviations already at the
    noise floor (the rigid antidiagonal families) classify through the exact
    fast path instead of a meaningless fit.
    """
    opts = options or ShrinkScanOptions()
    anchor = np.asarray(anchor, dtype=np.float64).reshape(2)
    scales = np.asarray(DEFAULT_SCALES if scales is None else scales, dtype=np.float64)
    if np.any(np.diff(scales) >= 0) or np.any(scales < opts.min_scale) or np.any(scales > 1.0):
        raise ValueError("scales must be strictly decreasing within [min_scale, 1]")

    phases = np.empty((len(scales), f.n))
    perms = []
    prev_start = None
    for k, s in enumerate(scales):
        loop_s = shrink(base_loop, anchor, float(s))
        path = integrate_loop(
            f, loop_s, periods=1, steps_per_period=opts.steps_per_period, options=opts.flow
        )
        mono = monodromy(path, opts.mono)
        ph = mono.phases.copy()
        start = path.lambdas[0]
        if prev_start is not None:
            # transport labels across scales by nearest start eigenvalue
            order = _match_labels(prev_start, start)
            ph = ph[order]
            start = start[order]
        prev_start = start
        phases[k] = ph
        perms.append(mono.permutation)

    dev_gcp = circ_dist(phases, np.pi / 2.0, period=np.pi)
    dev_reg = circ_dist(phases, 0.0, period=2.0 * np.pi)

    m = min(opts.fit_points, len(scales))
    fit_scales = scales[-m:]
    fit_gcp = dev_gcp[-m:]
    fit_reg = dev_reg[-m:]

    if fit_gcp.max() < opts.exact_tol:
        return ShrinkScan(
            anchor=(float(anchor[0]), float(anchor[1])),
            scales=scales, phases=phases, permutations=perms,
            deviations_gcp=dev_gcp, deviations_regular=dev_reg,
            exponent_gcp=None, exponent_regular=None,
            summary_exponent_gcp=None, summary_exponent_regular=None,
            classification="gcp-like", fit_mode="exact-gcp",
        )
    if fit_reg.max() < opts.exact_tol:
        return ShrinkScan(
            anchor=(float(anchor[0]), float(anchor[1])),
            scales=scales, phases=phases, permutations=perms,
            deviations_gcp=dev_gcp, deviations_regular=dev_reg,
            exponent_gcp=None, exponent_regular=None,
            summary_exponent_gcp=None, summary_exponent_regular=None,
            classification="regular", fit_mode="exact-regular",
        )

    exp_gcp = np.array([_fit_exponent(fit_scales, fit_gcp[:, j]) for j in range(f.n)])
    exp_reg = np.array([_fit_exponent(fit_scales, fit_reg[:, j]) for j in range(f.n)])
    mean_gcp = float(exp_gcp.mean())
    mean_reg = float(exp_reg.mean())
    if opts.gcp_band[0] <= mean_gcp <= opts.gcp_band[1]:
        classification = "gcp-like"
    elif opts.regular_band[0] <= mean_reg <= opts.regular_band[1]:
        classification = "regular"
    else:
        classification = "inconclusive"
    return ShrinkScan(
        anchor=(float(anchor[0]), float(anchor[1])),
        scales=scales, phases=phases, permutations=perms,
        deviations_gcp=dev_gcp, deviations_regular=dev_reg,
        exponent_gcp=exp_gcp, exponent_regular=exp_reg,
        summary_exponent_gcp=mean_gcp, summary_exponent_regular=mean_reg,
        classification=classification, fit_mode="fit",
    )


def _match_labels(prev: np.ndarray, cur: np.ndarray) -> np.ndarray:
    """Greedy nearest matching of eigenvalue labels between scan scales."""
    n = len(prev)
    order = np.full(n, -1, dtype=int)
    used = set()
    pairs = sorted(
        ((abs(prev[i] - cur[j]), i, j) for i in range(n) for j in range(n)),
        key=lambda t: t[0],
    )
    for _, i, j in pairs:
        if order[i] == -1 and j not in used:
            order[i] = j
            used.add(j)
    return order
