import numpy as np
import pytest

from singflow.fields import FieldSpec
from singflow.tube import (compute_N0, empirical_tube_constant,
                           hit_map_derivative_bound, normal_disk_project,
                           partition_tube_test, poincare_hit,
                           tube_contains_orbit)


@pytest.fixture(scope="module")
def saddle():
    return FieldSpec.linear_saddle(1.0, 1.0)


def test_normal_disk_project(saddle):
    # y on the normal plane inside the scaled radius
    c = normal_disk_project(saddle, [1.0, 0.0], [1.0, 0.001], 0.01)
    assert c is not None and np.isclose(abs(c[0]), 0.001)
    # y = x: zero vector
    c0 = normal_disk_project(saddle, [1.0, 0.0], [1.0, 0.0], 0.01)
    assert np.allclose(c0, 0.0)
    # outside the scaled radius
    assert normal_disk_project(saddle, [1.0, 0.0], [1.0, 0.02], 0.01) is None
    # off the plane entirely
    assert normal_disk_project(saddle, [1.0, 0.0], [1.5, 0.001], 0.01) is None


def test_poincare_hit_examples(saddle):
    # the orbit of x hits its own target plane at time t
    hit = poincare_hit(saddle, [0.7, 0.2], 1.3, [0.7, 0.2])
    assert hit is not None
    z, tau = hit
    assert abs(tau - 1.3) < 1e-9
    # closed-form example: normal plane at (e, 0) is {x = e}
    hit2 = poincare_hit(saddle, [1.0, 0.0], 1.0, [1.0, 0.01])
    assert hit2 is not None
    z2, tau2 = hit2
    assert abs(tau2 - 1.0) < 1e-9
    assert np.allclose(z2, [np.e, 0.01 / np.e], rtol=1e-8)
    # displaced beyond the scaled disk (0.1/e > 0.01 e): rejected
    hit3 = poincare_hit(saddle, [1.0, 0.0], 1.0, [1.0, 0.1], beta=0.01)
    assert hit3 is None


def test_tube_contains_closed_form(saddle):
    x = np.array([1.0, 0.0])
    # normal distance at matched time decays e^{-t}, bound grows e^{t}
    ok, ratio = tube_contains_orbit(saddle, x, x + [0.0, 0.001], 3.0, 0.01)
    assert ok and np.isclose(ratio, 0.1, rtol=1e-6)
    ok2, ratio2 = tube_contains_orbit(saddle, x, x + [0.0, 0.02], 3.0, 0.01)
    assert not ok2 and ratio2 >= 1.0
    ok3, ratio3 = tube_contains_orbit(saddle, x, x, 5.0, 0.01)
    assert ok3 and ratio3 <= 1e-12


def test_hit_chain_consistency(saddle):
    # hitting at s then t-s equals hitting at t within tolerance
    x = np.array([0.8, 0.1])
    y = x + 0.002 * np.array([0.1, 1.0]) / np.linalg.norm([0.1, 1.0])
    direct = poincare_hit(saddle, x, 2.0, y, budget=3.0)
    step1 = poincare_hit(saddle, x, 1.0, y, budget=2.0)
    assert direct is not None and step1 is not None
    x1 = np.asarray([0.8 * np.e, 0.1 / np.e])
    step2 = poincare_hit(saddle, x1, 1.0, step1[0], budget=2.0)
    assert step2 is not None
    assert np.allclose(direct[0], step2[0], atol=1e-8)
    assert abs(direct[1] - (step1[1] + step2[1])) < 1e-8


def test_empirical_tube_constant_saddle(saddle):
    L = empirical_tube_constant(saddle, "forward", beta=0.02, samples=25,
                                rng_seed=3)
    assert L <= np.exp(2) * 1.25 + 1e-9
    # scale invariance of the linear field: beta does not move L
    L2 = empirical_tube_constant(saddle, "forward", beta=0.04, samples=25,
                                 rng_seed=3)
    assert abs(np.log(L2) - np.log(L)) <= np.log(1.25) + 1e-9
    Lb = empirical_tube_constant(saddle, "backward", beta=0.02, samples=25,
                                 rng_seed=4)
    assert Lb <= np.exp(2) * 1.25 + 1e-9


def test_hit_time_bound(saddle):
    # starts in N_x((beta/L)|X|) arrive within 1 + eps
    L = 8.0
    beta = 0.02
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.uniform(0.3, 1.0, 2)
        speed = np.linalg.norm(saddle.eval(x))
        from singflow.poincare import normal_basis
        u = normal_basis(saddle.eval(x))[:, 0]
        y = x + 0.9 * (beta / L) * speed * u
        hit = poincare_hit(saddle, x, 1.0, y, budget=2.0)
        assert hit is not None
        assert hit[1] <= 1.2


def test_compute_N0_saddle(saddle):
    parts = compute_N0(saddle, beta=0.02, samples=20, rng_seed=0,
                       sup_samples=40)
    assert parts["N0"] >= np.exp(2) * (1 - 1e-6)
    assert parts["N0"] == max(parts["L_forward"], parts["L_backward"],
                              parts["psi_star_sup"])


def test_derivative_bound_stability(saddle):
    k1 = hit_map_derivative_bound(saddle, samples=20, rng_seed=0)
    k2 = hit_map_derivative_bound(saddle, samples=20, rng_seed=1)
    assert k1 > 0 and k2 > 0
    assert abs(k1 - k2) <= 0.2 * max(k1, k2)


def test_partition_tube_pairs(saddle_exp):
    exp = saddle_exp
    prof, rp = exp.profiles[0], exp.refined[0]
    n = prof.n0 + 1
    frac = partition_tube_test(exp.spec, rp, prof, n, 40, 0.02, rng_seed=11,
                               controls="same")
    assert frac >= 0.99
    frac_cross = partition_tube_test(exp.spec, rp, prof, n, 30, 0.02,
                                     rng_seed=12, controls="cross")
    assert (1 - frac_cross) > (1 - frac)
