import numpy as np
import pytest

from clifford_miura.algebra import algebra
from clifford_miura.grid import GridSpec
from clifford_miura.samples import manufactured_phi, random_polynomial_field


def test_manufactured_phi_fields():
    g = GridSpec.unit(2, 9)
    phi, v, a = manufactured_phi("exp(0.1*x1*x2)", 2).fields(g, algebra(2))
    x, y = g.mesh()
    np.testing.assert_allclose(phi.scalar_part.real, np.exp(0.1 * x * y))
    np.testing.assert_allclose(v.scalar_part.real, -0.01 * (x * x + y * y), atol=1e-15)
    np.testing.assert_allclose(a.component("e1").real, 0.1 * y)


def test_constant_phi_broadcasts():
    g = GridSpec.unit(2, 9)
    _, v, a = manufactured_phi("3", 2).fields(g, algebra(2))
    assert not np.any(v.data) and not np.any(a.data)


@pytest.mark.parametrize("bad", ["exp(", "x3 + 1", "import os"])
def test_bad_expressions(bad):
    with pytest.raises(ValueError):
        manufactured_phi(bad, 2)


def test_random_polynomial_is_seeded():
    g = GridSpec.unit(2, 9)
    a = random_polynomial_field(g, algebra(2), np.random.default_rng(5))
    b = random_polynomial_field(g, algebra(2), np.random.default_rng(5))
    assert np.array_equal(a.data, b.data)
