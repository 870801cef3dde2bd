"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with -s to stream them).  The
Lorenz empirical measure (64 orbits x 1e5 time units) is built once and
shared by the tower-sum, entropy-bound and truncation-gap criteria.
"""
import math
import time

import numpy as np
import pytest

from singflow import suites
from singflow.config import Experiment, build_experiment
from singflow.fields import FieldSpec
from singflow.measures import synthetic_tower_measure
from singflow.partition import assemble_global, build_refined
from singflow.singularity import build_profile
from singflow.tube import compute_N0, partition_tube_test


def _line(num, name, ok, detail=""):
    print(f"criterion {num:>2} ({name}): {'PASS' if ok else 'FAIL'} {detail}")


@pytest.fixture(scope="module")
def acc_saddle():
    spec = FieldSpec.linear_saddle(1.0, 1.0)
    n0_parts = compute_N0(spec, beta=0.02, samples=25, rng_seed=0,
                          sup_samples=60)
    cfg = {
        "version": 1,
        "field": {"kind": "linear_saddle", "integ_tol": 1e-10},
        "box": {"lo": [-0.25, -0.25], "hi": [0.25, 0.25]},
        "singularities": [{"seed": [0.05, -0.05], "r": math.exp(-2),
                           "beta1": 0.2, "n_max": 16}],
        "partition": {"L": n0_parts["N0"], "beta": 0.02,
                      "samples_per_layer": 256, "regular_cover": "flowbox",
                      "cover_samples": 3000, "cover_cell_cap": 6000},
        "measure": {"orbit_count": 8, "horizon": 60, "burn_in": 6},
        "rng_seed": 42,
    }
    exp = build_experiment(cfg)
    exp.n0_parts = n0_parts
    return exp


@pytest.fixture(scope="module")
def acc_lorenz():
    spec = FieldSpec.lorenz(integ_tol=1e-10)
    n0_parts = compute_N0(spec, beta=0.02, samples=12, rng_seed=1,
                          sup_samples=40)
    cfg = {
        "version": 1,
        "field": {"kind": "lorenz", "integ_tol": 1e-10},
        "box": {"lo": [-22.0, -28.0, -5.0], "hi": [22.0, 28.0, 52.0]},
        "singularities": [{"seed": [0.1, 0.1, 0.1]}],
        "partition": {"L": n0_parts["N0"], "beta": 0.02,
                      "samples_per_layer": 128, "regular_cover": "none"},
        "measure": {"orbit_count": 64, "horizon": 100000.0,
                    "burn_in": 10000.0, "rtol": 1e-6, "k_max": 4},
        "rng_seed": 2718,
    }
    exp = build_experiment(cfg)
    exp.n0_parts = n0_parts
    return exp


@pytest.fixture(scope="module")
def lorenz_measure(acc_lorenz):
    t0 = time.time()
    m = suites.default_measure(acc_lorenz, threads=4, k_max=4)
    print(f"[lorenz measure: {m.source['orbits']} orbits x "
          f"{m.source['horizon']:.0f} units in {time.time() - t0:.0f}s, "
          f"dropped={m.source['dropped']}]")
    return m


@pytest.fixture(scope="module")
def acc_perturbed():
    """Perturbed saddle checked against the unperturbed constants."""
    base = FieldSpec.perturbed_linear(np.diag([1.0, -1.0]), amp=0.0)
    prof = build_profile(base, (0.1, -0.1), r=math.exp(-2), beta1=0.2)
    pert = FieldSpec.perturbed_linear(np.diag([1.0, -1.0]), amp=0.05)
    n0_parts = compute_N0(base, beta=0.02, samples=20, rng_seed=2,
                          sup_samples=40)
    rp = build_refined(pert, prof, L=n0_parts["N0"], beta=0.02,
                       samples_per_layer=256, n_max=prof.n0 + 9,
                       rng_seed=5, N0=n0_parts["N0"])
    gp = assemble_global(pert, [prof], [rp], None,
                         [-0.25, -0.25], [0.25, 0.25])
    cfg = {"version": 1,
           "field": {"kind": "perturbed_linear",
                     "matrix": [[1.0, 0.0], [0.0, -1.0]], "amp": 0.05},
           "box": {"lo": [-0.25, -0.25], "hi": [0.25, 0.25]},
           "singularities": [{"seed": [0.0, 0.0]}],
           "partition": {"L": n0_parts["N0"], "beta": 0.02},
           "rng_seed": 13}
    return Experiment(config=cfg, spec=pert, profiles=[prof], refined=[rp],
                      cover=None, gp=gp, n0_parts=n0_parts)


# ----------------------------------------------------------------------

def test_criterion_1_exit_time_slope(acc_saddle):
    t0 = time.time()
    rep = suites.suite_exit_times(acc_saddle, points_per_layer=200,
                                  n_layers=10, closed_form_tol=1e-6)
    elapsed = time.time() - t0
    ok = rep["pass"] and elapsed < 30.0 and rep["budget_failures"] == 0
    _line(1, "exit-time slope", ok,
          f"max closed-form err {rep['closed_form_max_err']:.2e}, "
          f"ratio violations {rep['ratio_violations']}, {elapsed:.1f}s")
    assert rep["closed_form_checked"]
    assert rep["closed_form_max_err"] <= 1e-6
    assert rep["ratio_violations"] == 0
    assert elapsed < 30.0


def test_criterion_2_flow_speed_bound(acc_saddle, acc_lorenz):
    total = viol = 0
    for exp in (acc_saddle, acc_lorenz):
        rep = suites.suite_speeds(exp, samples_per_layer=500, n_layers=10)
        total += rep["samples"]
        viol += rep["violations"]
    ok = viol == 0 and total >= 10000
    _line(2, "flow-speed layer bound", ok, f"{total} samples, {viol} violations")
    assert total >= 10000
    assert viol == 0


def test_criterion_3_unique_crossing(acc_lorenz):
    rep = suites.suite_crossings(acc_lorenz, n_orbits=1000, rng_seed=10)
    ok = rep["pass"]
    _line(3, "unique crossing", ok,
          f"{rep['orbits']} passages, multi={rep['multi']}, "
          f"zero={rep['zero']}")
    assert rep["multi"] == 0
    assert rep["zero"] == 0


def test_criterion_4_tower_sums(acc_lorenz, lorenz_measure):
    assert lorenz_measure.source["orbits"] >= 64
    assert lorenz_measure.source["horizon"] >= 1e5
    rep = suites.suite_tower_sums(acc_lorenz, measure=lorenz_measure,
                                  N_list=(10, 20, 40), allowance=0.10)
    sub = rep["singularities"][0]
    _line(4, "tower sums", rep["pass"],
          f"sum n mu(C_n) = {sub['sum_n_mu']:.3e} <= {sub['sum_bound']:.2f}")
    assert rep["pass"]


def test_criterion_5_partition_bounds(acc_saddle):
    rep = suites.suite_partition_bounds(acc_saddle)
    sub = rep["singularities"][0]
    _line(5, "partition bounds", rep["pass"],
          f"diam violations {sub['diam_violations']}, "
          f"count violations {sub['count_violations']}, "
          f"fit spread {sub['fit_log_spread']:.3f}")
    assert sub["diam_violations"] == 0
    assert sub["count_violations"] == 0
    assert sub["separation_violations"] == 0
    assert sub["fit_stable"]


def test_criterion_6_entropy_finiteness(acc_saddle, acc_lorenz,
                                        lorenz_measure):
    rep_s = suites.suite_entropy_bounds(acc_saddle, measure=None, threads=2)
    rep_l = suites.suite_entropy_bounds(acc_lorenz, measure=lorenz_measure,
                                        allowance=0.10)
    ok = rep_s["pass"] and rep_l["pass"]
    emp = rep_l["empirical"][0]
    _line(6, "entropy finiteness", ok,
          f"synthetic exact ok; lorenz H_C={emp['H_C']:.4f}<=H1="
          f"{emp['H1']:.3f}, H_A={emp['H_A']:.4f}<=H2={emp['H2']:.2f}")
    assert rep_s["pass"]
    assert rep_l["pass"]


def test_criterion_7_mane(acc_saddle):
    rep = suites.suite_mane(trials=10000, N_list=(0.5, 1.0, 2.0, 5.0))
    _line(7, "Mane bound", rep["pass"],
          f"violations {rep['violations']}, monotone {rep['monotone']}")
    assert rep["violations"] == 0
    assert rep["monotone"]
    assert rep["limit_zero"]


def test_criterion_8_tube_containment(acc_saddle):
    prof = acc_saddle.profiles[0]
    rep = suites.suite_tubes(acc_saddle, layers=[prof.n0 + 1, prof.n0 + 3],
                             pair_count=1000, control_count=300,
                             threshold=0.99)
    rows = rep["layers"]
    _line(8, "tube containment", rep["pass"],
          "; ".join(f"n={r['n']}: same {r['same_pass']:.3f} "
                    f"cross {r['cross_pass']:.3f}" for r in rows))
    for r in rows:
        assert r["same_pass"] >= 0.99
        assert (1 - r["cross_pass"]) > (1 - r["same_pass"])


def test_criterion_9_truncation_gap(acc_lorenz, lorenz_measure):
    rep = suites.suite_truncation_gap(acc_lorenz, measure=lorenz_measure,
                                      allowance=0.10)
    margins = [s["margin"] for s in rep["synthetic"]]
    _line(9, "truncation gap", rep["pass"],
          f"synthetic margins {', '.join(f'{m:.3f}' for m in margins)}; "
          f"empirical monotone {rep.get('empirical_monotone')}")
    assert all(s["pass"] for s in rep["synthetic"])
    assert rep["synthetic_monotone"]
    assert all(s["pass"] for s in rep["empirical"])
    assert rep["empirical_monotone"]


def test_criterion_10_shadowed_rates():
    rep = suites.suite_shadowed()
    _line(10, "shadowed-set rate", rep["pass"],
          f"const {rep['constant']['rate']:.4f}, "
          f"geom {rep['geometric']['rate']:.4f} (log2={math.log(2):.4f}), "
          f"decay {rep['decay']['rate']:.4f}")
    assert abs(rep["constant"]["rate"]) <= 0.01
    assert abs(rep["geometric"]["rate"] - math.log(2)) <= 0.01
    assert abs(rep["decay"]["rate"]) <= 0.01


def test_criterion_11_block_entropy(acc_saddle):
    rep = suites.suite_blocks()
    _line(11, "block-entropy sanity", rep["pass"],
          f"bernoulli h={rep['bernoulli_h']:.4f} "
          f"(log2={math.log(2):.4f}), period2 h={rep['period2_h']:.2e}")
    assert abs(rep["bernoulli_h"] - math.log(2)) <= 0.05
    assert rep["period2_h"] <= 0.01


def test_criterion_12_robustness(acc_perturbed):
    exp = acc_perturbed
    prof = exp.profiles[0]
    # criterion 1, ratio part, under the perturbed flow
    rep1 = suites.suite_exit_times(exp, points_per_layer=100, n_layers=8)
    # criterion 2 with the unperturbed L0, L1
    rep2 = suites.suite_speeds(exp, samples_per_layer=400, n_layers=8)
    # criterion 5 on the cells built over the unperturbed chart
    rep5 = suites.suite_partition_bounds(exp,
                                         window=(prof.n0 + 2, prof.n0 + 8))
    # criterion 8 tubes under the perturbed flow
    rep8 = suites.suite_tubes(exp, layers=[prof.n0 + 1], pair_count=300,
                              control_count=100, threshold=0.99)
    ok = (rep1["ratio_violations"] == 0 and rep2["violations"] == 0
          and rep5["pass"] and rep8["pass"])
    _line(12, "robustness smoke test", ok,
          f"ratios {rep1['ratio_violations']}, speeds {rep2['violations']}, "
          f"tubes {rep8['layers'][0]['same_pass']:.3f}")
    assert rep1["ratio_violations"] == 0
    assert rep2["violations"] == 0
    assert rep5["pass"]
    assert rep8["pass"]
