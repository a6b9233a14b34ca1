"""Gauge-fixed eigendecomposition flow along loops and its monodromy.

The coupled system

    dlam_j/dt = (V^-1 Adot V)_jj
    dV/dt     = V P,   P_jk = (V^-1 Adot V)_jk / (lam_k - lam_j)  (j != k)

with the diagonal of P fixed by the constant-norm condition (real part) and
parallel transport (imaginary part zero) is integrated with classical RK4.
After one period the frame satisfies V(1) = V(0) Pi Phi: Pi permutes the
eigenvalue labels and Phi = diag(e^{i alpha_j}) carries the accrued phases.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import model as model_mod
from ._kernels import COLLISION, OK, get_kernels
from .errors import AmbiguousPatternError, CollisionError, GaugeDriftError
from .linalg import EigenDecomposition, eig_small, first_significant_index, frobenius, min_gap
from .loops import FoldedSegment, Segment


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(x, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w) if np.ndim(w) else (np.pi if w == -np.pi else float(w))


def circ_dist(a, b=0.0, period=2.0 * np.pi):
    """Distance on the circle of the given period."""
    d = np.asarray(a, dtype=np.float64) - b
    r = d - period * np.round(d / period)
    return np.abs(r) if np.ndim(r) else float(abs(r))


@dataclass(frozen=True)
class FlowOptions:
    gap_floor_rel: float = 1e-8  # times ||A||_F along the path
    norm_tol: float = 1e-8  # column-norm drift allowance per period
    path_tol: float = 1e-6  # ceiling for ||A V - V Lambda||_F per sample
    correction_interval: int = 32  # steps between eigenpair corrections; 0 disables
    max_step_halvings: int = 4
    init_tol: float = 1e-9  # eig_small residual tolerance at the start point
    backend: str | None = None


@dataclass(frozen=True)
class MonodromyOptions:
    ambiguity_ratio: float = 0.2
    pattern_tol: float = 1e-6
    sum_tol: float = 1e-6
    det_tol: float = 1e-6
    phase_tol: float = 1e-6


@dataclass
class EigenPath:
    """Sampled trajectory of the flow with gauge diagnostics.

    im_diag_p is identically zero: the parallel-transport gauge is imposed by
    construction. It is recorded so the contract is visible in exports.
    """

    t: np.ndarray  # (S+1,)
    lambdas: np.ndarray  # (S+1, n)
    vectors: np.ndarray  # (S+1, n, n)
    residual: np.ndarray  # (S+1,)
    norm_drift: np.ndarray  # (S+1,)
    gauge_identity: np.ndarray  # (S+1,)
    im_diag_p: np.ndarray  # (S+1,)
    steps_per_period: int
    periods: int
    refinements: int = 0
    backend: str = "numpy"

    @property
    def n(self) -> int:
        return self.lambdas.shape[1]

    def index_of(self, t: float) -> int:
        i = int(round((t - self.t[0]) * self.steps_per_period))
        if not 0 <= i < len(self.t) or abs(self.t[i] - t) > 1e-9:
            raise ValueError(f"t={t} is not on the sample grid")
        return i

    def frame_at(self, t: float):
        i = self.index_of(t)
        return self.lambdas[i], self.vectors[i]


@dataclass(frozen=True)
class Monodromy:
    """Permutation and phases in V(0)^-1 V(1) = Pi Phi."""

    permutation: tuple  # start index -> end index
    phases: np.ndarray  # (n,), in (-pi, pi], indexed by end column
    pattern_residual: float
    det_drift: float

    @property
    def n(self) -> int:
        return len(self.permutation)

    @property
    def is_identity(self) -> bool:
        return all(p == i for i, p in enumerate(self.permutation))

    @property
    def phase_sum(self) -> float:
        return float(np.sum(self.phases))

    @property
    def phase_sum_mod_pi(self) -> float:
        """Signed remainder of the phase sum mod pi, in (-pi/2, pi/2]."""
        s = self.phase_sum
        r = s - np.pi * round(s / np.pi)
        return float(r)


def _column_norms(V: np.ndarray) -> np.ndarray:
    return np.linalg.norm(V, axis=0)


def _eigenpair_correction(lam: np.ndarray, V: np.ndarray, a: np.ndarray) -> bool:
    """Snap (lam, V) to the exact eigenpairs of a, keeping the gauge.

    Each corrected column matches the pre-correction column in norm and in
    the phase of its largest-modulus component, so neither gauge condition is
    disturbed. Skipped (returns False) when the matching looks ambiguous.
    """
    n = len(lam)
    w, U = np.linalg.eig(a)
    cost = np.abs(lam[:, None] - w[None, :])
    rows, cols = linear_sum_assignment(cost)
    matched = w[cols]
    exact_gap = min_gap(matched)
    if not np.isfinite(exact_gap) and n > 1:
        return False
    if n > 1 and cost[rows, cols].max() > 0.25 * exact_gap:
        return False
    for j in range(n):
        u = U[:, cols[j]]
        k = int(np.argmax(np.abs(V[:, j])))
        if abs(u[k]) < 1e-14 * np.abs(u).max():
            return False
        scale = (np.linalg.norm(V[:, j]) / np.linalg.norm(u)) * np.exp(
            1j * (np.angle(V[k, j]) - np.angle(u[k]))
        )
        V[:, j] = scale * u
        lam[j] = matched[j]
    return True


def _adot_half_grid(f, loop, t0: float, i0: int, i1: int, steps_per_period: int, refine: int = 1):
    """Adot on the half-step grid covering steps [i0, i1) at a refinement level."""
    denom = 2 * steps_per_period * refine
    ts = t0 + np.arange(2 * (i1 - i0) * refine + 1) / denom + i0 / steps_per_period
    return model_mod.adot_grid(f, loop, ts)


def integrate_loop(
    f,
    loop,
    periods: int = 1,
    steps_per_period: int = 2048,
    t0: float = 0.0,
    options: FlowOptions | None = None,
    initial: EigenDecomposition | None = None,
) -> EigenPath:
    """Integrate the flow over [t0, t0 + periods] and record the trajectory.

    The start frame comes from the deterministic small-matrix eigensolver
    unless an explicit decomposition is supplied. Every correction_interval
    steps the state is snapped to the exact eigenpairs of A(gamma(t)) to
    cancel secular drift; a chunk whose column norms drift beyond budget is
    re-integrated at doubled resolution.
    """
    opts = options or FlowOptions()
    if steps_per_period < 64:
        raise ValueError("steps_per_period must be at least 64")
    if periods < 1:
        raise ValueError("periods must be a positive integer")
    S = periods * steps_per_period
    h = 1.0 / steps_per_period
    kernels = get_kernels(opts.backend)

    ts_full = t0 + np.arange(S + 1) / steps_per_period
    pts_full = loop.points(ts_full)
    A_full = model_mod.evaluate_grid(f, pts_full[:, 0], pts_full[:, 1])
    scales = np.linalg.norm(A_full.reshape(S + 1, -1), axis=1)
    gap_floors_all = opts.gap_floor_rel * np.maximum(scales, 1e-300)

    start = initial if initial is not None else eig_small(A_full[0], tol=opts.init_tol)
    n = start.n
    lam = start.values.astype(np.complex128).copy()
    V = start.vectors.astype(np.complex128).copy()
    norms0 = _column_norms(V)

    lambdas = np.empty((S + 1, n), dtype=np.complex128)
    vectors = np.empty((S + 1, n, n), dtype=np.complex128)
    gauge = np.zeros(S + 1)
    lambdas[0] = lam
    vectors[0] = V

    K = opts.correction_interval if opts.correction_interval > 0 else S
    chunk_tol = opts.norm_tol * max(K, 1) / steps_per_period
    refinements = 0

    i = 0
    while i < S:
        j = min(i + K, S)
        lam_save, V_save = lam.copy(), V.copy()
        level = 0
        while True:
            refine = 2**level
            adot = _adot_half_grid(f, loop, t0, i, j, steps_per_period, refine)
            nsteps = (j - i) * refine
            lam_traj = np.empty((nsteps, n), dtype=np.complex128)
            V_traj = np.empty((nsteps, n, n), dtype=np.complex128)
            g_traj = np.empty(nsteps)
            floors = np.repeat(gap_floors_all[i:j], refine)
            status, fail = kernels.rk4_chunk(
                lam, V, adot, h / refine, floors, lam_traj, V_traj, g_traj
            )
            if status == COLLISION:
                t_fail = ts_full[i] + fail * (h / refine)
                raise CollisionError(
                    f"eigenvalue collision on path near t={t_fail:.6f}", t=t_fail
                )
            drift = np.abs(np.linalg.norm(V_traj, axis=1) - norms0[None, :]).max()
            if drift <= chunk_tol or level >= opts.max_step_halvings:
                break
            level += 1
            refinements += 1
            lam[:] = lam_save
            V[:] = V_save
        lambdas[i + 1 : j + 1] = lam_traj[refine - 1 :: refine]
        vectors[i + 1 : j + 1] = V_traj[refine - 1 :: refine]
        gauge[i + 1 : j + 1] = g_traj[refine - 1 :: refine]
        if opts.correction_interval > 0 and j < S and np.any(adot != 0):
            if _eigenpair_correction(lam, V, A_full[j]):
                lambdas[j] = lam
                vectors[j] = V
        i = j

    residual = np.linalg.norm(
        (np.einsum("sij,sjk->sik", A_full, vectors) - vectors * lambdas[:, None, :]).reshape(S + 1, -1),
        axis=1,
    )
    norm_drift = np.abs(np.linalg.norm(vectors, axis=1) - norms0[None, :]).max(axis=1)

    if norm_drift.max() > opts.norm_tol * periods:
        raise GaugeDriftError(
            f"gauge drift exceeded: column-norm drift {norm_drift.max():.3e} "
            f"> {opts.norm_tol * periods:.1e} (suggests a smaller step)"
        )
    if residual.max() > opts.path_tol:
        raise GaugeDriftError(
            f"gauge drift exceeded: eigen residual {residual.max():.3e} > {opts.path_tol:.1e}"
        )

    return EigenPath(
        t=ts_full,
        lambdas=lambdas,
        vectors=vectors,
        residual=residual,
        norm_drift=norm_drift,
        gauge_identity=gauge,
        im_diag_p=np.zeros(S + 1),
        steps_per_period=steps_per_period,
        periods=periods,
        refinements=refinements,
        backend=kernels.name,
    )


def coupling_matrix(V: np.ndarray, lam, adot: np.ndarray, gap_floor: float | None = None) -> np.ndarray:
    """The gauge-fixed coupling matrix P with dV/dt = V P.

    Off-diagonal entries follow the eigenflow quotient; the diagonal solves
    the constant-norm condition with zero imaginary part.
    """
    lam = np.asarray(lam, dtype=np.complex128).reshape(-1)
    if gap_floor is None:
        gap_floor = 1e-8 * max(1.0, float(np.abs(lam).max(initial=0.0)))
    kernels = get_kernels()
    status, _dl, _dv, P, _g = kernels.rhs(
        lam, np.ascontiguousarray(V, dtype=np.complex128), np.ascontiguousarray(adot, dtype=np.complex128), gap_floor
    )
    if status == COLLISION:
        raise CollisionError(
            f"eigenvalue collision on path: min gap {min_gap(lam):.3e} < {gap_floor:.3e}"
        )
    return P


def _extract_monodromy(V0: np.ndarray, V1: np.ndarray, opts: MonodromyOptions) -> Monodromy:
    n = V0.shape[0]
    M = np.linalg.solve(V0, V1)
    absM = np.abs(M)
    end_of_start = np.empty(n, dtype=int)
    for r in range(n):
        order = np.argsort(absM[r])[::-1]
        c = order[0]
        if n > 1 and absM[r, order[1]] > opts.ambiguity_ratio * absM[r, c]:
            raise AmbiguousPatternError(
                f"ambiguous pattern in row {r}: competing entries "
                f"{absM[r, c]:.3e} and {absM[r, order[1]]:.3e}"
            )
        end_of_start[r] = c
    if len(set(end_of_start.tolist())) != n:
        raise AmbiguousPatternError("retained entries do not form a permutation")

    phases = np.empty(n)
    pattern = np.zeros((n, n), dtype=np.complex128)
    norms0 = _column_norms(V0)
    norms1 = _column_norms(V1)
    for r in range(n):
        c = end_of_start[r]
        phases[c] = np.angle(M[r, c])
        pattern[r, c] = np.exp(1j * phases[c])
        ratio = norms1[c] / norms0[r]
        if abs(absM[r, c] - ratio) > opts.phase_tol * max(1.0, ratio):
            raise AmbiguousPatternError(
                f"retained entry modulus {absM[r, c]:.8f} deviates from column-norm "
                f"ratio {ratio:.8f} beyond tolerance"
            )
    pattern_residual = frobenius(M - pattern)
    if pattern_residual > opts.pattern_tol:
        raise AmbiguousPatternError(
            f"pattern residual {pattern_residual:.3e} exceeds {opts.pattern_tol:.1e}"
        )
    det_drift = abs(np.linalg.det(V1) - np.linalg.det(V0))
    if det_drift > opts.det_tol:
        raise GaugeDriftError(f"determinant drift {det_drift:.3e} exceeds {opts.det_tol:.1e}")
    sum_err = circ_dist(float(np.sum(phases)), 0.0, period=np.pi)
    if sum_err > opts.sum_tol:
        raise GaugeDriftError(
            f"phase sum violates the mod-pi law by {sum_err:.3e} (> {opts.sum_tol:.1e})"
        )
    return Monodromy(
        permutation=tuple(int(c) for c in end_of_start),
        phases=phases,
        pattern_residual=float(pattern_residual),
        det_drift=float(det_drift),
    )


def monodromy(path: EigenPath, options: MonodromyOptions | None = None) -> Monodromy:
    """Monodromy of a path covering exactly one period."""
    if abs((path.t[-1] - path.t[0]) - 1.0) > 1e-9:
        raise ValueError("path must cover exactly one period; use monodromy_at otherwise")
    return _extract_monodromy(path.vectors[0], path.vectors[-1], options or MonodromyOptions())


def monodromy_at(path: EigenPath, t_start: float, options: MonodromyOptions | None = None) -> Monodromy:
    """Monodromy over [t_start, t_start + 1] inside a longer path."""
    i0 = path.index_of(t_start)
    i1 = i0 + path.steps_per_period
    if i1 >= len(path.t):
        raise ValueError("path does not cover a full period from t_start")
    return _extract_monodromy(path.vectors[i0], path.vectors[i1], options or MonodromyOptions())


def _simpson(values: np.ndarray, dx: float) -> float:
    m = len(values) - 1
    if m % 2 != 0:
        raise ValueError("composite Simpson needs an even number of intervals")
    return float(dx / 3.0 * (values[0] + values[-1] + 4.0 * values[1:-1:2].sum() + 2.0 * values[2:-2:2].sum()))


def phase_by_quadrature(f, loop, steps: int = 4096) -> np.ndarray:
    """Accrued phases of a 2x2 loop by direct quadrature (independent oracle).

    Builds the explicit eigenvector field [a_til +/- sqrt(D), c] on a
    continuous branch of sqrt(D) (cumulative unwrapping of arg D along the
    loop), integrates -Im(w_j dv_j/dt) with composite Simpson, and refers the
    result to the deterministic start gauge used by the flow so the phases
    are directly comparable with the ODE monodromy, including across the
    branch swap of 2-cycle loops.
    """
    if f.n != 2:
        raise ValueError("phase quadrature is defined for 2x2 matrix functions")
    if steps % 2 != 0:
        raise ValueError("steps must be even for Simpson quadrature")
    ts = np.arange(steps + 1) / steps
    pts = loop.points(ts)
    A = model_mod.evaluate_grid(f, pts[:, 0], pts[:, 1])
    Adot = model_mod.adot_grid(f, loop, ts)

    a_til = 0.5 * (A[:, 0, 0] - A[:, 1, 1])
    b = A[:, 0, 1]
    c = A[:, 1, 0]
    da = 0.5 * (Adot[:, 0, 0] - Adot[:, 1, 1])
    db = Adot[:, 0, 1]
    dc = Adot[:, 1, 0]

    scale = np.abs(A.reshape(len(ts), -1)).max()
    if np.abs(c).min() < 1e-12 * max(scale, 1.0):
        raise ValueError("c vanishes on loop")
    disc = a_til * a_til + b * c  # Delta/4
    if np.abs(disc).min() < (1e-12 * max(scale, 1.0)) ** 2:
        raise ValueError("Delta vanishes on loop")

    theta = np.unwrap(np.angle(disc))
    sq = np.sqrt(np.abs(disc)) * np.exp(0.5j * theta)
    dsq = (2.0 * a_til * da + db * c + b * dc) / (2.0 * sq)

    denom = 2.0 * c * sq
    i1 = np.imag((c * (da + dsq) - (a_til - sq) * dc) / denom)
    i2 = np.imag((-c * (da - dsq) + (a_til + sq) * dc) / denom)
    dx = 1.0 / steps
    beta = np.array([-_simpson(i1, dx), -_simpson(i2, dx)])

    winding = int(round((theta[-1] - theta[0]) / (2.0 * np.pi)))
    v1_0 = np.array([a_til[0] + sq[0], c[0]])
    v2_0 = np.array([a_til[0] - sq[0], c[0]])
    phi1 = -np.angle(v1_0[first_significant_index(v1_0)])
    phi2 = -np.angle(v2_0[first_significant_index(v2_0)])
    if winding % 2 != 0:
        alpha = np.array([beta[0] + phi1 - phi2, beta[1] + phi2 - phi1])
    else:
        alpha = beta
    return np.array([wrap_angle(alpha[0]), wrap_angle(alpha[1])])


def reversibility_check(f, segment: Segment, steps: int = 2048, options: FlowOptions | None = None) -> float:
    """Integrate out along a segment and back; returns ||V_end - V_start||_F.

    The out-and-back traversal uses a time-symmetric schedule, so the flow
    accrues no phase and the frame must return exactly.
    """
    folded = FoldedSegment(segment)
    path = integrate_loop(f, folded, periods=1, steps_per_period=steps, options=options)
    return frobenius(path.vectors[-1] - path.vectors[0])
