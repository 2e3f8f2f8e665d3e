import numpy as np
import pytest
from numpy.testing import assert_allclose

from uccert.errors import ContractViolation
from uccert.expressions import expression_field, parse_expression
from uccert.fields import ScalarField


def fd_check(field, x, rtol=1e-5, atol=1e-7):
    bare = ScalarField(field._eval)
    assert_allclose(field.grad(x), bare.grad(x), rtol=rtol, atol=atol)
    assert_allclose(field.hess(x), bare.hess(x), rtol=1e-3, atol=1e-4)


class TestParsing:
    def test_cone_surface_expression(self):
        f = expression_field("norm(x2, x3) - 1 - x1", 3)
        x = np.array([0.2, 0.8, 0.6])
        assert f(x) == pytest.approx(1.0 - 1.0 - 0.2)
        assert_allclose(f.grad(x), [-1.0, 0.8, 0.6], atol=1e-12)

    def test_precedence_and_power(self):
        f = expression_field("2*x1^2 + x2/4 - 3", 2)
        assert f([2.0, 8.0]) == pytest.approx(2 * 4 + 2 - 3)
        f2 = expression_field("x1**3", 1)
        assert f2([2.0]) == pytest.approx(8.0)
        assert f2.grad([2.0])[0] == pytest.approx(12.0)

    def test_unary_minus(self):
        f = expression_field("-x1 + +x2", 2)
        assert f([3.0, 5.0]) == pytest.approx(2.0)

    def test_sqrt(self):
        f = expression_field("sqrt(x1*x1 + x2*x2)", 2)
        assert f([3.0, 4.0]) == pytest.approx(5.0)
        assert_allclose(f.grad([3.0, 4.0]), [0.6, 0.8], atol=1e-12)

    def test_division_rules(self, rng):
        f = expression_field("(x1 + 2*x2) / (1 + x2^2)", 2)
        for _ in range(5):
            fd_check(f, rng.normal(size=2))

    def test_nested_norm_hessian(self, rng):
        f = expression_field("norm(x2, x3) - 1 - x1", 3)
        for _ in range(5):
            x = np.array([rng.normal(), 1.0 + 0.3 * rng.normal(), 0.3 * rng.normal()])
            fd_check(f, x)

    def test_errors(self):
        with pytest.raises(ContractViolation):
            parse_expression("x1 +", 2)
        with pytest.raises(ContractViolation):
            parse_expression("x5", 2)
        with pytest.raises(ContractViolation):
            parse_expression("foo(x1)", 2)
        with pytest.raises(ContractViolation):
            parse_expression("x1 ^ x2", 2)   # exponent must be numeric
        with pytest.raises(ContractViolation):
            parse_expression("x1 $ 2", 2)

    def test_scientific_notation(self):
        f = expression_field("1e-2 * x1 + 2.5E+1", 1)
        assert f([4.0]) == pytest.approx(0.04 + 25.0)
