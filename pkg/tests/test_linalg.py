import cmath

import numpy as np
import pytest

from cusptrack import eig_small, invert, multiply
from cusptrack.errors import DegenerateSpectrumError, SingularMatrixError
from cusptrack.linalg import as_matrix, frobenius, min_gap, normalize_eigenvector

from conftest import match_distance


def naive_multiply(a, b):
    """Independent O(n^3) triple-loop oracle."""
    n, m = a.shape[0], b.shape[1]
    out = np.zeros((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            for k in range(a.shape[1]):
                out[i, j] += a[i, k] * b[k, j]
    return out


def charpoly_roots(a):
    """Eigenvalues via characteristic polynomial, independent of eig_small.

    2x2 by the quadratic formula in cmath; 3x3 through explicit coefficients
    and the companion-matrix root finder.
    """
    n = a.shape[0]
    if n == 2:
        tr = complex(a[0, 0] + a[1, 1])
        det = complex(a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0])
        s = cmath.sqrt(tr * tr - 4.0 * det)
        return np.array([(tr + s) / 2.0, (tr - s) / 2.0])
    if n == 3:
        tr = np.trace(a)
        minors = (
            a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
            + a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]
            + a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
        )
        det = np.linalg.det(a)
        return np.roots([1.0, -tr, minors, -det])
    raise ValueError("oracle supports n <= 3")


class TestMultiply:
    def test_identity(self):
        m = as_matrix([[1 + 2j, 3], [4, 5 - 1j]])
        assert np.array_equal(multiply(np.eye(2, dtype=complex), m), m)

    def test_row_swap(self):
        swap = as_matrix([[0, 1], [1, 0]])
        m = as_matrix([[1 + 1j, 2], [3, 4 - 2j]])
        expected = as_matrix([[3, 4 - 2j], [1 + 1j, 2]])
        assert np.array_equal(multiply(swap, m), expected)

    def test_against_naive_oracle(self, rng):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert np.abs(multiply(a, b) - naive_multiply(a, b)).max() < 1e-13

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            multiply(np.eye(2, dtype=complex), np.ones((3, 3), dtype=complex))


class TestInvert:
    def test_diagonal(self):
        inv = invert(as_matrix([[2.0, 0.0], [0.0, 1j]]))
        assert np.abs(inv - np.diag([0.5, -1j])).max() < 1e-15

    def test_identity(self):
        assert np.abs(invert(np.eye(3, dtype=complex)) - np.eye(3)).max() < 1e-15

    def test_residual_on_random(self, rng):
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)) + 3 * np.eye(4)
        assert frobenius(a @ invert(a) - np.eye(4)) < 1e-12

    def test_double_inverse_is_identity(self, rng):
        for _ in range(10):
            a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) + 2 * np.eye(3)
            assert frobenius(invert(invert(a)) - a) < 1e-10 * frobenius(a)

    def test_singular_raises_with_condition(self):
        with pytest.raises(SingularMatrixError) as err:
            invert(as_matrix([[1.0, 2.0], [2.0, 4.0]]))
        assert err.value.cond_estimate is None or err.value.cond_estimate > 1e14

    def test_non_square(self):
        with pytest.raises(ValueError):
            invert(np.ones((2, 3), dtype=complex))


class TestEigSmall:
    def test_sqrt_matrix_at_one(self):
        # characteristic polynomial lambda^2 = z at z = 1
        dec = eig_small(as_matrix([[0.0, 1.0], [1.0, 0.0]]))
        assert match_distance(dec.values, [1.0, -1.0]) < 1e-14

    def test_quarter(self):
        dec = eig_small(as_matrix([[0.0, 1.0], [0.25, 0.0]]))
        assert match_distance(dec.values, [0.5, -0.5]) < 1e-14

    def test_diagonal_three(self):
        diag = [1.0, 2.0, 3.0j]
        dec = eig_small(as_matrix(np.diag(diag)))
        assert match_distance(dec.values, diag) < 1e-12
        # each eigenvector is a standard basis vector up to scaling; the
        # deterministic gauge makes it exactly e_k for the matching entry
        for j, lam in enumerate(dec.values):
            k = int(np.argmin(np.abs(np.asarray(diag) - lam)))
            e_k = np.zeros(3)
            e_k[k] = 1.0
            assert np.abs(dec.vectors[:, j] - e_k).max() < 1e-10

    def test_residual_invariant(self, rng):
        for _ in range(20):
            a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
            try:
                dec = eig_small(a, tol=1e-9)
            except DegenerateSpectrumError:
                continue
            assert frobenius(a @ dec.vectors - dec.vectors * dec.values[None, :]) <= 1e-9 * max(
                1.0, frobenius(a)
            )

    @pytest.mark.parametrize("n", [2, 3])
    def test_against_charpoly_oracle(self, rng, n):
        found = 0
        while found < 20:
            a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            roots = charpoly_roots(a)
            if min_gap(roots) < 0.1:
                continue
            found += 1
            dec = eig_small(a)
            assert match_distance(dec.values, roots) < 1e-8

    def test_degenerate_rejected(self):
        with pytest.raises(DegenerateSpectrumError):
            eig_small(as_matrix([[1.0, 1.0], [0.0, 1.0]]))

    def test_size_limit(self):
        with pytest.raises(ValueError, match="exceeds"):
            eig_small(np.diag(np.arange(1.0, 10.0)).astype(complex))

    def test_gauge_is_deterministic(self):
        dec = eig_small(as_matrix([[0.0, 1.0], [2.0 + 1.0j, 0.0]]))
        for j in range(2):
            v = dec.vectors[:, j]
            assert abs(np.linalg.norm(v) - 1.0) < 1e-14
            k = np.argmax(np.abs(v) > 1e-12)
            assert abs(v[k].imag) < 1e-14 and v[k].real > 0

    def test_normalize_eigenvector_scale_invariant(self):
        v = np.array([0.0, 2.0j, 1.0])
        w = normalize_eigenvector(v)
        w2 = normalize_eigenvector((0.3 - 0.7j) * v)
        assert np.abs(w - w2).max() < 1e-14
