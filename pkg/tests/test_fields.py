import numpy as np
import pytest

from singflow.fields import FieldSpec


def test_linear_saddle_eval():
    sp = FieldSpec.linear_saddle(1.0, 1.0)
    assert np.allclose(sp.eval([1.0, 0.0]), [1.0, 0.0])
    assert np.allclose(sp.eval([0.0, 0.0]), [0.0, 0.0])
    assert np.allclose(sp.eval([0.3, 0.4]), [0.3, -0.4])


def test_lorenz_eval_closed_form():
    sp = FieldSpec.lorenz(10.0, 28.0, 8.0 / 3.0)
    assert np.allclose(sp.eval([0.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    x = np.array([1.0, 2.0, 3.0])
    expected = [10.0 * (2 - 1), 1 * (28 - 3) - 2, 1 * 2 - (8 / 3) * 3]
    assert np.allclose(sp.eval(x), expected)


def test_lorenz_jacobian_matches_fd():
    sp = FieldSpec.lorenz()
    x = np.array([1.3, -0.7, 11.0])
    j = sp.jacobian(x)
    h = 1e-6
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        col = (sp.eval(x + e) - sp.eval(x - e)) / (2 * h)
        assert np.allclose(j[:, k], col, atol=1e-6)


def test_perturbed_linear_origin_fixed():
    a = np.diag([2.0, -3.0])
    sp = FieldSpec.perturbed_linear(a, amp=0.05)
    assert np.allclose(sp.eval([0.0, 0.0]), 0.0)
    # perturbation vanishes to first order: Jacobian at 0 is A exactly
    assert np.allclose(sp.jacobian([0.0, 0.0]), a)
    x = np.array([0.1, 0.2])
    assert np.allclose(sp.eval(x), a @ x + 0.05 * np.array([0.2, 0.1]) ** 2)


def test_reversed_field():
    sp = FieldSpec.lorenz()
    rv = sp.reversed()
    x = np.array([1.0, 2.0, 3.0])
    assert np.allclose(rv.eval(x), -sp.eval(x))
    assert np.allclose(rv.jacobian(x), -sp.jacobian(x))


def test_invariants_rejected():
    with pytest.raises(ValueError):
        FieldSpec.linear_saddle(1.0, 1.0, integ_tol=0.0)
    with pytest.raises(ValueError):
        FieldSpec.linear_saddle(1.0, 1.0, max_step=-1.0)
    with pytest.raises(ValueError):
        FieldSpec.linear_saddle(-1.0, 1.0)


def test_multi_axis_saddle():
    sp = FieldSpec.linear_saddle([1.0, 2.0], [3.0])
    assert sp.dim == 3
    assert np.allclose(sp.eval([1.0, 1.0, 1.0]), [1.0, 2.0, -3.0])
