import numpy as np
import pytest

from singflow.errors import AtSingularity
from singflow.fields import FieldSpec
from singflow.poincare import (linear_poincare, normal_basis,
                               scaled_linear_poincare, scaled_poincare_norm,
                               sup_scaled_norm)


@pytest.fixture(scope="module")
def saddle():
    return FieldSpec.linear_saddle(1.0, 1.0)


def test_linear_poincare_examples(saddle):
    v = linear_poincare(saddle, [1.0, 0.0], [0.0, 1.0], 1.0)
    assert np.allclose(v, [0.0, np.exp(-1)], atol=1e-9)
    # flow-parallel input dies under the initial projection
    v2 = linear_poincare(saddle, [1.0, 0.0], [1.0, 0.0], 1.0)
    assert np.linalg.norm(v2) < 1e-9
    # identity at t = 0 on a normal vector (X(x) = (0.5, -0.5) there)
    v3 = linear_poincare(saddle, [0.5, 0.5], [1.0, 1.0], 0.0)
    assert np.allclose(v3, [1.0, 1.0], atol=1e-12)


def test_poincare_output_orthogonal(saddle):
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.uniform(0.2, 1.0, 2)
        v = rng.standard_normal(2)
        t = rng.uniform(-1.5, 1.5)
        out = linear_poincare(saddle, x, v, t)
        from singflow.integrate import integrate_flow
        xv = saddle.eval(integrate_flow(saddle, x, t))
        assert abs(np.dot(out, xv)) <= 1e-9 * max(1.0, np.linalg.norm(out)
                                                  * np.linalg.norm(xv))


def test_scaled_poincare_examples(saddle):
    v = scaled_linear_poincare(saddle, [1.0, 0.0], [0.0, 1.0], 1.0)
    assert abs(np.linalg.norm(v) - np.exp(-2)) < 1e-8
    v2 = scaled_linear_poincare(saddle, [0.0, 1.0], [1.0, 0.0], 1.0)
    assert abs(np.linalg.norm(v2) - np.exp(2)) < 1e-6
    # identity at t = 0 on a normal vector (X = (0.3, -0.8) there)
    v3 = scaled_linear_poincare(saddle, [0.3, 0.8], [0.8, 0.3], 0.0)
    assert np.allclose(v3, [0.8, 0.3], atol=1e-12)


def test_scaled_cocycle(saddle):
    rng = np.random.default_rng(11)
    for _ in range(8):
        x = rng.uniform(0.2, 0.9, 2)
        v = rng.standard_normal(2)
        s, t = rng.uniform(0.1, 1.0, 2)
        lhs = scaled_linear_poincare(saddle, x, v, s + t)
        mid = scaled_linear_poincare(saddle, x, v, s)
        from singflow.integrate import integrate_flow
        xs = integrate_flow(saddle, x, s)
        rhs = scaled_linear_poincare(saddle, xs, mid, t)
        assert np.allclose(lhs, rhs, rtol=1e-7, atol=1e-12)


def test_at_singularity(saddle):
    with pytest.raises(AtSingularity):
        linear_poincare(saddle, [0.0, 0.0], [1.0, 0.0], 1.0)


def test_normal_basis_props():
    rng = np.random.default_rng(5)
    for d in (2, 3, 5):
        u = rng.standard_normal(d)
        b = normal_basis(u)
        assert b.shape == (d, d - 1)
        assert np.allclose(b.T @ b, np.eye(d - 1), atol=1e-12)
        assert np.allclose(b.T @ u, 0.0, atol=1e-12 * np.linalg.norm(u))


def test_operator_norm_matches_vector_probe(saddle):
    x = np.array([0.1, 0.8])
    t = 0.7
    op = scaled_poincare_norm(saddle, x, t)
    best = 0.0
    for th in np.linspace(0, np.pi, 61):
        v = np.array([np.cos(th), np.sin(th)])
        out = scaled_linear_poincare(saddle, x, v, t)
        from singflow.poincare import normal_component
        vn = normal_component(v, saddle.eval(x))
        nv = np.linalg.norm(vn)
        if nv > 1e-8:
            best = max(best, np.linalg.norm(out) / nv)
    assert best <= op * (1 + 1e-6)
    assert best >= op * 0.995


def test_sup_scaled_norm_saddle(saddle):
    val = sup_scaled_norm(saddle, 1.0, sample_count=60, rng_seed=0)
    # closed-form worst case e^2, attained on the stable axis
    assert np.exp(2) * (1 - 1e-6) <= val <= np.exp(2) * 1.01


def test_sup_scaled_norm_tau_zero(saddle):
    assert sup_scaled_norm(saddle, 0.0) == 1.0


def test_sup_scaled_norm_lorenz_seed_stable():
    spec = FieldSpec.lorenz(integ_tol=1e-8)
    vals = [sup_scaled_norm(spec, 1.0, sample_count=50, rng_seed=s)
            for s in (0, 1)]
    assert all(np.isfinite(v) and v > 1 for v in vals)
    assert abs(vals[0] - vals[1]) <= 0.05 * max(vals)
