import cmath
import math

import numpy as np
import pytest

from cusptrack import eval_expr, parse_expr, to_source
from cusptrack.errors import EvalError, ParseError
from cusptrack.expr import BinOp, Call, Const, ImagUnit, Neg, Num, Var, evaluate_many


def reference_eval(e, x, y):
    """Independent tree walker on cmath scalars (no numpy)."""
    if isinstance(e, Num):
        return complex(e.value)
    if isinstance(e, ImagUnit):
        return 1j
    if isinstance(e, Const):
        return complex(math.pi if e.name == "pi" else math.e)
    if isinstance(e, Var):
        return complex(x) if e.name == "x" else complex(y)
    if isinstance(e, Neg):
        return -reference_eval(e.operand, x, y)
    if isinstance(e, Call):
        v = reference_eval(e.arg, x, y)
        return {
            "sin": cmath.sin, "cos": cmath.cos, "exp": cmath.exp, "sqrt": cmath.sqrt,
            "abs": lambda z: complex(abs(z)), "re": lambda z: complex(z.real),
            "im": lambda z: complex(z.imag), "conj": lambda z: z.conjugate(),
        }[e.func](v)
    left = reference_eval(e.left, x, y)
    right = reference_eval(e.right, x, y)
    if e.op == "^":
        return left ** int(right.real)
    return {"+": left + right, "-": left - right, "*": left * right,
            "/": left / right if right != 0 else None}[e.op]


class TestParse:
    def test_paper_entry_phase_zero(self):
        e = parse_expr("x^2+y^2-0.25+i*y")
        # top level is a sum/difference chain of four terms
        assert isinstance(e, BinOp) and e.op == "+"
        assert isinstance(e.left, BinOp) and e.left.op == "-"

    def test_zero_literal(self):
        assert parse_expr("0") == Num(0.0)

    def test_paper_entry_phase_pi(self):
        e = parse_expr("x*y-0.1+i*(x^2-y^2-0.1)")
        assert isinstance(e, BinOp) and e.op == "+"

    def test_precedence_values(self):
        assert eval_expr(parse_expr("2+3*4"), 0, 0) == 14
        assert eval_expr(parse_expr("2^3^2"), 0, 0) == 512

    def test_unary_minus_binds_below_power(self):
        assert eval_expr(parse_expr("-2^2"), 0, 0) == -4
        assert eval_expr(parse_expr("(-2)^2"), 0, 0) == 4
        assert eval_expr(parse_expr("2^-2"), 0, 0) == 0.25

    def test_implicit_multiplication_rejected(self):
        with pytest.raises(ParseError):
            parse_expr("2x")
        with pytest.raises(ParseError):
            parse_expr("3i")

    @pytest.mark.parametrize(
        "src,offset",
        [
            ("2x", 1),
            ("1+", 2),
            ("(1", 2),
            ("sin(", 4),
            ("sin 2", 4),
            ("1e", 1),
            ("x @ y", 2),
            ("x^", 2),
            ("conj(x,y)", 6),
            ("2..5", 2),
        ],
    )
    def test_malformed_inputs_report_byte_offsets(self, src, offset):
        with pytest.raises(ParseError) as err:
            parse_expr(src)
        assert err.value.offset == offset

    def test_scientific_literals(self):
        assert eval_expr(parse_expr("1.5e-3"), 0, 0) == 1.5e-3
        assert eval_expr(parse_expr("2E+3"), 0, 0) == 2000.0
        assert eval_expr(parse_expr(".5"), 0, 0) == 0.5

    def test_constants(self):
        assert eval_expr(parse_expr("pi"), 0, 0) == pytest.approx(math.pi)
        assert eval_expr(parse_expr("2*e"), 0, 0) == pytest.approx(2 * math.e)


class TestEval:
    def test_identity_embedding(self):
        assert eval_expr(parse_expr("x+i*y"), 3, 4) == 3 + 4j

    def test_gcp_location_phase_zero(self):
        assert eval_expr(parse_expr("x^2+y^2-0.25+i*y"), 0.5, 0) == 0

    def test_division_by_zero(self):
        with pytest.raises(EvalError, match="division by zero"):
            eval_expr(parse_expr("1/(x-1)"), 1.0, 0.0)

    def test_non_integer_exponent(self):
        with pytest.raises(EvalError, match="non-integer"):
            eval_expr(parse_expr("x^0.5"), 2.0, 0.0)

    def test_principal_sqrt(self):
        assert eval_expr(parse_expr("sqrt(-1+0*x)"), 0, 0) == 1j

    def test_vectorized_matches_scalar(self):
        e = parse_expr("sin(x)*conj(x+i*y)+re(y)^2")
        xs = np.linspace(-2, 2, 7)
        ys = np.linspace(-1, 1, 7)
        grid = evaluate_many(e, xs, ys)
        for k in range(7):
            assert abs(grid[k] - eval_expr(e, xs[k], ys[k])) < 1e-14


def random_ast(rng, depth=0):
    choices = ["num", "var", "i", "const", "neg", "bin", "call"]
    if depth > 4:
        choices = ["num", "var", "i", "const"]
    kind = rng.choice(choices)
    if kind == "num":
        return Num(float(np.round(rng.uniform(0, 10), 4)))
    if kind == "var":
        return Var(str(rng.choice(["x", "y"])))
    if kind == "i":
        return ImagUnit()
    if kind == "const":
        return Const(str(rng.choice(["pi", "e"])))
    if kind == "neg":
        return Neg(random_ast(rng, depth + 1))
    if kind == "call":
        fn = str(rng.choice(["sin", "cos", "exp", "sqrt", "abs", "re", "im", "conj"]))
        return Call(fn, random_ast(rng, depth + 1))
    op = str(rng.choice(["+", "-", "*", "/", "^"]))
    left = random_ast(rng, depth + 1)
    if op == "^":
        right = Num(float(rng.integers(0, 4)))
    else:
        right = random_ast(rng, depth + 1)
    return BinOp(op, left, right)


class TestRoundTrip:
    def test_structural_round_trip_200_random_asts(self, rng):
        for _ in range(200):
            tree = random_ast(rng)
            printed = to_source(tree)
            reparsed = parse_expr(printed)
            assert reparsed == tree, printed
            assert parse_expr(to_source(reparsed)) == reparsed

    def test_eval_stable_under_print_parse(self, rng):
        e = parse_expr("x^2+y^2-0.25+i*y")
        e2 = parse_expr(to_source(e))
        for _ in range(100):
            x, y = rng.uniform(-3, 3, 2)
            assert eval_expr(e2, x, y) == eval_expr(e, x, y)

    def test_against_reference_evaluator(self, rng):
        for _ in range(50):
            tree = random_ast(rng)
            x, y = rng.uniform(-2, 2, 2)
            try:
                ref = reference_eval(tree, x, y)
            except (ZeroDivisionError, OverflowError, ValueError, TypeError):
                continue
            if ref is None or not (abs(ref) < 1e12):
                continue
            got = eval_expr(tree, x, y)
            assert abs(got - ref) <= 1e-14 * max(1.0, abs(ref))
