import math

import numpy as np
import pytest

from singflow.errors import NotHyperbolic
from singflow.fields import FieldSpec
from singflow.singularity import (build_profile, derive_time_constants,
                                  estimate_speed_lipschitz,
                                  hyperbolic_splitting, locate_singularity,
                                  profile_from_json, profile_to_json)


def test_locate_saddle():
    sp = FieldSpec.linear_saddle(1.0, 1.0)
    s = locate_singularity(sp, (0.1, -0.1))
    assert np.allclose(s, 0.0, atol=1e-12)


def test_locate_lorenz_origin():
    sp = FieldSpec.lorenz()
    s = locate_singularity(sp, (0.5, 0.5, 0.5))
    assert np.linalg.norm(s) < 1e-12


def test_locate_lorenz_cplus():
    sp = FieldSpec.lorenz()
    s = locate_singularity(sp, (8.0, 8.0, 27.0))
    c = math.sqrt(72.0)
    assert np.allclose(s, [c, c, 27.0], atol=1e-10)


def test_not_hyperbolic():
    # pure rotation: eigenvalues +-i
    sp = FieldSpec.perturbed_linear([[0.0, -1.0], [1.0, 0.0]])
    with pytest.raises(NotHyperbolic):
        locate_singularity(sp, (0.01, 0.0))


def test_splitting_saddle():
    sp = FieldSpec.linear_saddle(1.0, 1.0)
    prof = hyperbolic_splitting(sp, np.zeros(2))
    assert prof.dim_u == 1 and prof.dim_s == 1
    assert np.allclose(np.abs(prof.Eu_basis[:, 0]), [1.0, 0.0])
    assert np.allclose(np.abs(prof.Es_basis[:, 0]), [0.0, 1.0])
    assert np.isclose(prof.lam, np.e) and np.isclose(prof.lam_prime, np.e)


def test_splitting_lorenz_origin():
    sp = FieldSpec.lorenz()
    prof = hyperbolic_splitting(sp, np.zeros(3))
    re = sorted(prof.eigvals.real, reverse=True)
    assert np.allclose(re, [11.8277, -2.6667, -22.8277], atol=1e-3)
    assert prof.dim_u == 1 and prof.dim_s == 2


def test_splitting_perturbed_diag():
    sp = FieldSpec.perturbed_linear(np.diag([2.0, -3.0]))
    prof = hyperbolic_splitting(sp, np.zeros(2))
    assert np.isclose(prof.lam, np.exp(2.0))
    assert np.isclose(prof.lam_prime, np.exp(3.0))


def test_splitting_complex_pair():
    sp = FieldSpec.lorenz()
    cp = locate_singularity(sp, (8.0, 8.0, 27.0))
    prof = hyperbolic_splitting(sp, cp)
    assert prof.dim_u == 2 and prof.dim_s == 1


def test_subspace_invariance():
    for spec, seed in ((FieldSpec.lorenz(), (0.5, 0.5, 0.5)),
                       (FieldSpec.lorenz(), (8.0, 8.0, 27.0)),
                       (FieldSpec.linear_saddle(1.0, 2.0), (0.1, 0.1))):
        sig = locate_singularity(spec, seed)
        prof = hyperbolic_splitting(spec, sig)
        j = spec.jacobian(sig)
        for basis in (prof.Eu_basis, prof.Es_basis):
            img = j @ basis
            resid = img - basis @ (basis.T @ img)
            assert np.linalg.norm(resid) <= 1e-8 * max(1.0, np.linalg.norm(j))


def test_speed_lipschitz_saddle(saddle_profile, saddle_spec):
    l0, l1 = saddle_profile.L0, saddle_profile.L1
    # ratio |X| / boxnorm ranges over [1, sqrt(2)], widened 1% outward
    assert 0.97 <= l0 <= 1.0
    assert math.sqrt(2) <= l1 <= math.sqrt(2) * 1.02


def test_speed_lipschitz_euclid_exact():
    sp = FieldSpec.perturbed_linear(np.diag([1.0, -1.0]))
    prof = build_profile(sp, (0.1, -0.1))
    # with Euclidean distance |X| = d exactly; only the margins remain
    l0, l1 = estimate_speed_lipschitz(sp, prof, sample_count=2000,
                                      rng_seed=1, distance="euclidean")
    assert 0.98 <= l0 <= 1.0 <= l1 <= 1.02


def test_speed_lipschitz_per_sample(saddle_profile, saddle_spec):
    rng = np.random.default_rng(23)
    from singflow.singularity import _sample_box_ball
    xs = _sample_box_ball(saddle_profile, saddle_profile.beta1, 500, rng)
    for x in xs:
        d = saddle_profile.box_norm(x)
        if d < 1e-12:
            continue
        ratio = np.linalg.norm(saddle_spec.eval(x)) / d
        assert saddle_profile.L0 <= ratio <= saddle_profile.L1


def test_time_constants_saddle(saddle_profile):
    assert np.isclose(saddle_profile.K0, 0.5)
    assert np.isclose(saddle_profile.K1, 2.0)
    assert saddle_profile.n0 >= 4
    assert math.exp(-saddle_profile.n0) < saddle_profile.r


def test_time_constants_lorenz(lorenz_profile):
    assert np.isclose(lorenz_profile.K0, 1.0 / (2 * 22.8277), atol=1e-4)
    assert np.isclose(lorenz_profile.K1, 2.0 / 11.8277, atol=1e-4)
    assert math.exp(-lorenz_profile.n0) < lorenz_profile.r


def test_time_constants_perturbed_diag():
    sp = FieldSpec.perturbed_linear(np.diag([2.0, -3.0]))
    prof = build_profile(sp, (0.1, -0.1))
    assert np.isclose(prof.K0, 1.0 / 6.0)
    assert np.isclose(prof.K1, 1.0)


def test_exit_slope_window(saddle_profile, saddle_spec):
    # measured t+/n lands in [K0, K1] on layers just above n0
    from singflow.section import exit_times, sample_layer
    prof = saddle_profile
    for n in (prof.n0 + 1, prof.n0 + 5, prof.n0 + 10):
        s = sample_layer(prof, n, 20, rng_seed=n)
        for x in s.points:
            tm, tp = exit_times(saddle_spec, prof, x)
            assert prof.K0 <= tp / n <= prof.K1
            assert prof.K0 <= tm / n <= prof.K1


def test_profile_json_roundtrip(saddle_profile):
    text = profile_to_json(saddle_profile)
    prof = profile_from_json(text)
    assert np.allclose(prof.sigma, saddle_profile.sigma)
    assert np.allclose(prof.Eu_basis, saddle_profile.Eu_basis)
    assert prof.n0 == saddle_profile.n0
    assert np.isclose(prof.K1, saddle_profile.K1)
    assert np.allclose(prof.eigvals, saddle_profile.eigvals)
