import numpy as np
import pytest

from cusptrack import (
    Circle,
    block_n4_model,
    block_n5_model,
    constant_model,
    derivative_along,
    evaluate,
    evaluate_grid,
    from_expressions,
    phase_pi_gcp_locations,
    phase_pi_model,
    phase_zero_model,
    sqrt_model,
)
from cusptrack.model import BUILTIN_MODELS, partials


class TestEvaluate:
    def test_sqrt_model_origin(self):
        a = evaluate(sqrt_model(), (0.0, 0.0))
        assert np.array_equal(a, np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))

    def test_phase_zero_at_gcp(self):
        a = evaluate(phase_zero_model(0.25), (0.5, 0.0))
        assert np.array_equal(a, np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex))

    def test_deterministic(self):
        f = phase_pi_model(0.1)
        assert np.array_equal(evaluate(f, (0.3, -0.7)), evaluate(f, (0.3, -0.7)))

    def test_expression_model_matches_builtin(self):
        fe = from_expressions([["0", "1"], ["x^2+y^2-0.25+i*y", "0"]])
        fb = phase_zero_model(0.25)
        for p in [(0.1, 0.2), (-1.3, 0.7), (2.0, -2.0)]:
            assert np.abs(evaluate(fe, p) - evaluate(fb, p)).max() < 1e-14

    def test_grid_matches_pointwise(self):
        f = phase_pi_model(0.1)
        xs = np.linspace(-1, 1, 9)
        ys = np.linspace(-1, 1, 9)
        grid = evaluate_grid(f, xs, ys)
        for k in range(9):
            assert np.abs(grid[k] - evaluate(f, (xs[k], ys[k]))).max() < 1e-15

    def test_phase_pi_roots_are_coalescences(self):
        f = phase_pi_model(0.1)
        for p in phase_pi_gcp_locations(0.1):
            a = evaluate(f, p)
            assert abs(a[1, 0]) < 1e-15  # c vanishes exactly at the closed-form roots


class TestDerivativeAlong:
    def test_constant_model_zero(self):
        f = constant_model(np.diag([1.0, 2.0 + 1j]))
        d = derivative_along(f, Circle((0.0, 0.0), 1.0), 0.37)
        assert np.abs(d).max() < 1e-9

    def test_sqrt_model_unit_circle_entry(self):
        # d/dt (cos 2pi t + i sin 2pi t) at t=0 is 2pi i; entries are linear in
        # (x, y) so the central differences are exact to roundoff
        d = derivative_along(sqrt_model(), Circle((0.0, 0.0), 1.0), 0.0)
        assert abs(d[1, 0] - 2j * np.pi) < 1e-9
        assert abs(d[0, 0]) + abs(d[0, 1]) + abs(d[1, 1]) < 1e-12

    def test_fd_vs_chain_rule(self, rng):
        f = from_expressions([["sin(x)*y", "exp(i*x)"], ["x^3-y^2", "cos(x*y)"]])
        loop = Circle((0.3, -0.2), 0.8)
        for t in rng.uniform(0, 1, 5):
            chain = derivative_along(f, loop, t, method="chain")
            fd = derivative_along(f, loop, t, method="curve_fd")
            assert np.abs(chain - fd).max() < 1e-7

    def test_second_order_convergence(self):
        # halving the step divides the central-difference error by about 4
        f = from_expressions([["exp(x)*cos(y)"]], fd_step=1e-3)
        f2 = from_expressions([["exp(x)*cos(y)"]], fd_step=5e-4)
        loop = Circle((0.0, 0.0), 1.0)
        exact_fn = from_expressions([["exp(x)*cos(y)"]], fd_step=1e-7)
        t = 0.21
        exact = derivative_along(exact_fn, loop, t)[0, 0]
        e1 = abs(derivative_along(f, loop, t)[0, 0] - exact)
        e2 = abs(derivative_along(f2, loop, t)[0, 0] - exact)
        assert 3.0 < e1 / e2 < 5.0

    def test_directional_linearity(self):
        # directional derivative is linear in the direction to first order
        f = phase_zero_model(0.25)
        ax, ay = partials(f, (0.4, -0.3))
        c1 = Circle((0.4, -0.3), 1e-6)
        d = derivative_along(f, c1, 0.125)  # velocity ~ (-w, w)/sqrt(2) direction
        v = c1.velocity(0.125)
        assert np.abs(d - (ax * v[0] + ay * v[1])).max() < 1e-9


class TestBuiltinRegistry:
    def test_names(self):
        assert set(BUILTIN_MODELS) == {"sqrt", "phase_zero", "phase_pi", "block_n4", "block_n5"}

    def test_epsilon_passthrough(self):
        f = BUILTIN_MODELS["phase_zero"](epsilon=0.09)
        assert abs(evaluate(f, (0.3, 0.0))[1, 0]) < 1e-15

    def test_block_sizes(self):
        assert block_n4_model().n == 4
        assert block_n5_model().n == 5

    def test_block_n4_double_roots(self):
        # u^3 - 3u - w has double roots exactly at w = +/-2
        a = evaluate(block_n4_model(), (2.0, 0.0))[:3, :3]
        vals = np.linalg.eigvals(a)
        vals.sort()
        assert min(abs(vals[0] - vals[1]), abs(vals[1] - vals[2])) < 1e-7

    def test_block_n5_structure(self):
        a = evaluate(block_n5_model(), (0.3, 0.4))
        assert np.abs(a[:2, 2:]).max() == 0.0
        assert np.abs(a[2:4, :2]).max() == 0.0
        assert a[4, 4] == -4.0
