"""Hot inner kernels: the gauge-fixed eigenflow derivative and RK4 stepping.

The same source builds two backends: a numba nopython compilation and a plain
numpy fallback. Selection happens through the CUSPTRACK_BACKEND environment
variable ("numba", "numpy", or "auto"; default auto prefers numba when it
imports). `benchmarks/bench_backends.py` compares the two.

Kernels signal failure through status codes instead of exceptions so the
compiled and interpreted paths stay byte-for-byte identical.
"""

from __future__ import annotations

import os

import numpy as np

OK = 0
COLLISION = 1


def _identity(fn):
    return fn


def _build(decorate):
    @decorate
    def rhs(lam, V, adot, gap_floor):
        """Derivative of (Lambda, V) at one point of the path.

        Off-diagonal coupling B_jk / (lam_k - lam_j) with B = V^-1 Adot V;
        the diagonal is fixed by the constant-norm condition for the real
        part and parallel transport (zero) for the imaginary part. Returns
        (status, dlam, dV, P, gauge_err) where gauge_err is the residual of
        d/dt ||v_j||^2 computed from P (identically zero in exact arithmetic).
        """
        n = lam.shape[0]
        dlam = np.zeros(n, dtype=np.complex128)
        dV = np.zeros((n, n), dtype=np.complex128)
        P = np.zeros((n, n), dtype=np.complex128)
        for j in range(n):
            for k in range(j + 1, n):
                if abs(lam[k] - lam[j]) < gap_floor:
                    return COLLISION, dlam, dV, P, 0.0
        B = np.linalg.solve(V, adot @ V)
        H = np.empty((n, n), dtype=np.complex128)
        for j in range(n):
            for k in range(n):
                acc = 0.0 + 0.0j
                for r in range(n):
                    acc += np.conj(V[r, j]) * V[r, k]
                H[j, k] = acc
        for j in range(n):
            dlam[j] = B[j, j]
            for k in range(n):
                if k != j:
                    P[j, k] = B[j, k] / (lam[k] - lam[j])
        gauge_err = 0.0
        for j in range(n):
            sre = 0.0
            for k in range(n):
                if k != j:
                    sre += (H[j, k] * P[k, j]).real
            pjj = -sre / H[j, j].real
            P[j, j] = pjj
            g = abs(2.0 * H[j, j].real * pjj + 2.0 * sre)
            if g > gauge_err:
                gauge_err = g
        dV[:, :] = V @ P
        return OK, dlam, dV, P, gauge_err

    @decorate
    def rk4_chunk(lam, V, adot_half, h, gap_floors, lam_traj, V_traj, gauge_traj):
        """Advance (lam, V) in place over K classical RK4 steps.

        adot_half holds Adot on the half-step grid (2K+1 samples); step i
        uses samples 2i, 2i+1, 2i+2. Post-step states land in the trajectory
        arrays. Returns (status, failed_step_index).
        """
        K = gap_floors.shape[0]
        for i in range(K):
            a0 = adot_half[2 * i]
            a1 = adot_half[2 * i + 1]
            a2 = adot_half[2 * i + 2]
            gf = gap_floors[i]
            s1, dl1, dV1, P1, g1 = rhs(lam, V, a0, gf)
            if s1 != OK:
                return s1, i
            s2, dl2, dV2, P2, g2 = rhs(lam + 0.5 * h * dl1, V + 0.5 * h * dV1, a1, gf)
            if s2 != OK:
                return s2, i
            s3, dl3, dV3, P3, g3 = rhs(lam + 0.5 * h * dl2, V + 0.5 * h * dV2, a1, gf)
            if s3 != OK:
                return s3, i
            s4, dl4, dV4, P4, g4 = rhs(lam + h * dl3, V + h * dV3, a2, gf)
            if s4 != OK:
                return s4, i
            lam += (h / 6.0) * (dl1 + 2.0 * dl2 + 2.0 * dl3 + dl4)
            V += (h / 6.0) * (dV1 + 2.0 * dV2 + 2.0 * dV3 + dV4)
            lam_traj[i] = lam
            V_traj[i] = V
            gauge_traj[i] = g1
        return OK, -1

    return rhs, rk4_chunk


class Kernels:
    def __init__(self, name, rhs, rk4_chunk):
        self.name = name
        self.rhs = rhs
        self.rk4_chunk = rk4_chunk


_CACHE: dict[str, Kernels] = {}


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _resolve(backend: str | None) -> str:
    choice = backend or os.environ.get("CUSPTRACK_BACKEND", "auto").lower()
    if choice == "auto":
        return "numba" if numba_available() else "numpy"
    if choice not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r} (use 'numba', 'numpy' or 'auto')")
    if choice == "numba" and not numba_available():
        raise RuntimeError("backend 'numba' requested but numba is not importable")
    return choice


def get_kernels(backend: str | None = None) -> Kernels:
    name = _resolve(backend)
    if name not in _CACHE:
        if name == "numba":
            from numba import njit

            rhs, rk4 = _build(njit)
        else:
            rhs, rk4 = _build(_identity)
        _CACHE[name] = Kernels(name, rhs, rk4)
    return _CACHE[name]


def active_backend() -> str:
    return _resolve(None)
