"""The cross section through a singularity and its layer decomposition.

The section is the set {|v_s| = |v_u|} in the eigenbasis chart; layer n
is its part with box norm in [e^{-(n+1)}, e^{-n}) (lower-closed shells,
fixed for determinism).  Exit times, cone membership and crossing
detection all live here.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NotOnSection, OutOfChart, TimeBudgetExceeded
from .fields import FieldSpec
from .integrate import orbit_segment
from .singularity import SingularityProfile, section_points

DEFECT_TOL = 1e-9
STABLE_CONE = "stable"
UNSTABLE_CONE = "unstable"
NEITHER_CONE = "neither"


@dataclass
class CrossingEvent:
    time: float
    point: np.ndarray
    layer: int                  # raw shell index, independent of n0
    defect_residual: float
    box_norm: float


@dataclass
class LayerSample:
    layer: int
    points: np.ndarray          # (count, d)
    exit_plus: np.ndarray | None = None
    exit_minus: np.ndarray | None = None


def chart_coords(profile: SingularityProfile, x):
    """(v_s, v_u) coordinate blocks of x in the eigenbasis chart."""
    if profile.box_norm(x) > profile.beta1 * (1 + 1e-9):
        raise OutOfChart(f"box norm {profile.box_norm(x):.3g} > beta1")
    return profile.split(x)


def section_defect(profile: SingularityProfile, x) -> float:
    """|v_s| - |v_u|; zero exactly on the cross section."""
    if profile.box_norm(x) > profile.beta1 * (1 + 1e-9):
        raise OutOfChart(f"box norm {profile.box_norm(x):.3g} > beta1")
    vs, vu = profile.split(x)
    return float(np.linalg.norm(vs) - np.linalg.norm(vu))


def _defect_unchecked(profile, x) -> float:
    vs, vu = profile.split(x)
    return float(np.linalg.norm(vs) - np.linalg.norm(vu))


def shell_index(box_norm: float) -> int:
    """The n with box_norm in [e^{-(n+1)}, e^{-n}); lower-closed convention."""
    v = -math.log(box_norm)
    return int(math.ceil(v - 1e-12)) - 1


def layer_index(profile: SingularityProfile, x, defect_tol: float = DEFECT_TOL):
    """Layer of an on-section point; None when n <= n0 or outside B_r."""
    bn = profile.box_norm(x)
    d = _defect_unchecked(profile, x)
    if abs(d) > max(defect_tol, defect_tol * bn):
        raise NotOnSection(f"defect {d:.3e} at box norm {bn:.3e}")
    if bn >= profile.r or bn == 0.0:
        return None
    n = shell_index(bn)
    return n if n > profile.n0 else None


def cone_classify(profile: SingularityProfile, x, alpha: float) -> str:
    """Stable/unstable alpha-cone membership in eigen coordinates."""
    if profile.box_norm(x) > profile.beta1 * (1 + 1e-9):
        raise OutOfChart("outside the chart ball")
    vs, vu = profile.split(x)
    xs, xu = float(np.linalg.norm(vs)), float(np.linalg.norm(vu))
    if xu < alpha * xs:
        return STABLE_CONE
    if xs < alpha * xu:
        return UNSTABLE_CONE
    return NEITHER_CONE


def _exit_budget(profile: SingularityProfile, x) -> float:
    bn = max(profile.box_norm(x), 1e-280)
    n_est = max(1.0, -math.log(bn))
    return 10.0 * profile.K1 * (n_est + 5.0)


def exit_time_one_side(spec: FieldSpec, profile: SingularityProfile, x,
                       forward: bool, time_tol: float = 1e-9,
                       budget: float | None = None) -> float:
    """First time the (forward or backward) orbit leaves B_r(sigma)."""
    r = profile.r
    if profile.box_norm(x) >= r:
        return 0.0
    budget = _exit_budget(profile, x) if budget is None else budget
    t_end = budget if forward else -budget
    seg = orbit_segment(spec, x, t_end)
    norms = profile.box_norms(seg.ys)
    hit = np.flatnonzero(norms >= r)
    if hit.size == 0:
        raise TimeBudgetExceeded(
            f"no exit within {budget:.3g} time units (near W^s/W^u?)")
    k = int(hit[0])
    if k == 0:
        return 0.0
    g = lambda y: profile.box_norm(y) - r
    t_star, _ = seg.refine_root(g, (float(seg.ts[k - 1]), float(seg.ts[k])),
                                xtol=time_tol)
    return abs(t_star)


def exit_times(spec: FieldSpec, profile: SingularityProfile, x,
               time_tol: float = 1e-9, budget: float | None = None):
    """(t_minus, t_plus): first exit times of B_r under phi_{-t} and phi_t."""
    t_plus = exit_time_one_side(spec, profile, x, True, time_tol, budget)
    t_minus = exit_time_one_side(spec, profile, x, False, time_tol, budget)
    return t_minus, t_plus


def detect_section_crossings(spec: FieldSpec, profile: SingularityProfile,
                             x0, t_span: float,
                             defect_tol: float = 1e-12) -> list[CrossingEvent]:
    """All sign changes of the section defect inside B_r along [0, t_span]."""
    seg = orbit_segment(spec, x0, t_span)
    norms = profile.box_norms(seg.ys)
    defects = np.array([_defect_unchecked(profile, y) for y in seg.ys])
    events = []
    g = lambda y: _defect_unchecked(profile, y)
    for i in range(len(defects) - 1):
        a, b = defects[i], defects[i + 1]
        if a == 0.0 and norms[i] < profile.r:
            events.append(_event(profile, float(seg.ts[i]), seg.ys[i]))
        elif a * b < 0.0:
            t_star, y_star = seg.refine_root(
                g, (float(seg.ts[i]), float(seg.ts[i + 1])), xtol=1e-13)
            if profile.box_norm(y_star) < profile.r:
                events.append(_event(profile, t_star, y_star))
    if len(defects) and defects[-1] == 0.0 and norms[-1] < profile.r:
        events.append(_event(profile, float(seg.ts[-1]), seg.ys[-1]))
    return events


def _event(profile, t, y) -> CrossingEvent:
    bn = profile.box_norm(y)
    return CrossingEvent(time=float(t), point=np.asarray(y, dtype=float),
                         layer=shell_index(bn),
                         defect_residual=_defect_unchecked(profile, y),
                         box_norm=bn)


def passage_crossing(spec: FieldSpec, profile: SingularityProfile, x,
                     budget: float | None = None):
    """The unique section crossing of the in-ball passage through x.

    Returns a (t_c, CrossingEvent) pair with phi_{t_c}(x) on the section,
    or raises TimeBudgetExceeded for points numerically on W^s/W^u whose
    crossing cannot be reached.
    """
    d0 = _defect_unchecked(profile, x)
    bn0 = profile.box_norm(x)
    if abs(d0) <= DEFECT_TOL * max(1.0, bn0):
        return 0.0, _event(profile, 0.0, np.asarray(x, dtype=float))
    budget = _exit_budget(profile, x) if budget is None else budget
    # defect strictly decreases along the flow inside the ball:
    # positive defect -> crossing ahead, negative -> crossing behind.
    t_end = budget if d0 > 0 else -budget
    seg = orbit_segment(spec, x, t_end)
    defects = np.array([_defect_unchecked(profile, y) for y in seg.ys])
    norms = profile.box_norms(seg.ys)
    sign = 1.0 if d0 > 0 else -1.0
    for i in range(len(defects) - 1):
        if norms[i] >= profile.r and norms[i + 1] >= profile.r and i > 0:
            break                          # left the ball without crossing
        if defects[i + 1] * sign <= 0.0:
            g = lambda y: _defect_unchecked(profile, y)
            t_star, y_star = seg.refine_root(
                g, (float(seg.ts[i]), float(seg.ts[i + 1])), xtol=1e-13)
            return t_star, _event(profile, t_star, y_star)
    raise TimeBudgetExceeded(
        f"no crossing within {budget:.3g} time units from defect {d0:.3e}")


def sample_layer(profile: SingularityProfile, n: int, count: int,
                 rng_seed: int) -> LayerSample:
    """Uniform sample of layer n of the cross section; deterministic per seed."""
    if n <= profile.n0:
        raise ValueError(f"layer {n} <= n0 = {profile.n0}")
    rng = np.random.default_rng(rng_seed)
    lo, hi = math.exp(-(n + 1)), math.exp(-n)
    rho = lo + (hi - lo) * rng.random(count)
    pts = section_points(profile, rho, count, rng)
    return LayerSample(layer=n, points=pts)


def fill_exit_times(spec: FieldSpec, profile: SingularityProfile,
                    sample: LayerSample, time_tol: float = 1e-9) -> LayerSample:
    tp = np.empty(len(sample.points))
    tm = np.empty(len(sample.points))
    for i, x in enumerate(sample.points):
        tm[i], tp[i] = exit_times(spec, profile, x, time_tol)
    sample.exit_plus = tp
    sample.exit_minus = tm
    return sample
