"""Scaled tubular neighborhoods and Poincare hit maps.

The beta-scaled tube along an orbit is the union of normal disks of radius
beta * |X| (ambient Euclidean norm).  Containment is checked at integer
grid times via iterated hit maps, i.e. the tube is parametrized by hits on
normal disks rather than by equal raw times.
"""
from __future__ import annotations

import numpy as np

from .errors import AtSingularity, LeftChart, StepLimitExceeded, TimeBudgetExceeded
from .fields import FieldSpec
from .integrate import integrate_flow, orbit_segment, states_at_integer_times
from .poincare import (HARD_SPEED_FLOOR, SOFT_SPEED_FLOOR, flow_speed,
                       normal_basis, sup_scaled_norm)

BETA0 = 0.05                 # global cap on the tube scale for built-ins
HIT_EPS = 0.2                # default slack on unit hit times


def normal_disk_project(spec: FieldSpec, x, y, beta: float,
                        plane_tol: float = 1e-7):
    """Coordinates of y in the normal disk N_x(beta |X(x)|), or None.

    None when y misses the plane through x (relative tolerance
    ``plane_tol``) or sits outside the scaled radius.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xv = spec.eval(x)
    speed = float(np.linalg.norm(xv))
    if speed < max(SOFT_SPEED_FLOOR, HARD_SPEED_FLOOR):
        raise AtSingularity(f"|X| = {speed:.3e} at the disk center")
    rad = beta * speed
    dv = y - x
    tangential = float(np.dot(dv, xv) / speed)
    if abs(tangential) > plane_tol * max(rad, np.linalg.norm(dv), 1e-300):
        return None
    b = normal_basis(xv)
    coords = b.T @ dv
    if np.linalg.norm(coords) >= rad:
        return None
    return coords


def poincare_hit(spec: FieldSpec, x, t: float, y, budget: float | None = None,
                 beta: float | None = None):
    """First intersection of orbit(y) with the normal disk at phi_t(x).

    With beta given the target is the scaled disk: plane crossings outside
    radius beta |X(phi_t(x))| do not count (orbits of a recurrent flow may
    cross the infinite hyperplane far from the disk long before the
    matched hit).  Returns (hit_point, tau) or None within the budget.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = integrate_flow(spec, x, t) if t != 0.0 else x.copy()
    xz = spec.eval(z)
    speed_z = float(np.linalg.norm(xz))
    if speed_z < SOFT_SPEED_FLOOR:
        raise AtSingularity("target plane at a singular point")
    u = xz / speed_z
    if budget is None:
        budget = (1.0 + HIT_EPS) * abs(t) + 0.5
    g = lambda p: float(np.dot(p - z, u))
    try:
        seg = orbit_segment(spec, y, budget if t >= 0 else -budget,
                            rec_cap=16384, rec_cap_max=262144)
    except (LeftChart, StepLimitExceeded):
        return None
    vals = np.array([g(p) for p in seg.ys])
    dists = np.linalg.norm(seg.ys - z, axis=1)
    rad = beta * speed_z if beta is not None else np.inf
    for i in range(len(vals) - 1):
        if vals[i] == 0.0 and i == 0 and abs(t) > 1e-12:
            continue                      # departing exactly on the plane
        if beta is not None:
            # coarse reject: the whole step stays far from the disk
            hop = float(np.linalg.norm(seg.ys[i + 1] - seg.ys[i]))
            if min(dists[i], dists[i + 1]) > rad + hop:
                continue
        if vals[i] == 0.0:
            tau, hit = float(seg.ts[i]), seg.ys[i]
        elif vals[i] * vals[i + 1] < 0.0:
            tau, hit = seg.refine_root(
                g, (float(seg.ts[i]), float(seg.ts[i + 1])), xtol=1e-12)
        else:
            continue
        if beta is not None and np.linalg.norm(hit - z) >= rad:
            continue                      # plane crossing away from the disk
        return np.asarray(hit, dtype=float), abs(tau)
    return None


def tube_contains_orbit(spec: FieldSpec, x, y, T: float, beta: float,
                        hit_budget: float = 2.0):
    """Matched-hit beta-tube containment of orbit(y) along phi_[0,T](x).

    Hits are chained over integer grid times (plus one fractional tail
    step); returns (contained, max_ratio) where the ratio is
    (normal distance) / (beta * local speed).
    """
    x_cur = np.asarray(x, dtype=float).copy()
    y_cur = np.asarray(y, dtype=float).copy()

    speed0 = flow_speed(spec, x_cur)
    if speed0 < SOFT_SPEED_FLOOR:
        raise AtSingularity("tube center starts at a singular point")
    xv = spec.eval(x_cur)
    dv = y_cur - x_cur
    normal0 = dv - (np.dot(dv, xv) / np.dot(xv, xv)) * xv
    max_ratio = float(np.linalg.norm(normal0)) / (beta * speed0)
    if max_ratio >= 1.0:
        return False, max_ratio

    steps = [1.0] * int(np.floor(T))
    tail = T - np.floor(T)
    if tail > 1e-12:
        steps.append(float(tail))
    for dt in steps:
        # disk-limited hits: escape from the scaled disk means escape
        # from the tube, and far plane crossings never count
        hit = poincare_hit(spec, x_cur, dt, y_cur,
                           budget=dt + hit_budget - 1.0 if dt >= 1.0
                           else dt + 0.5, beta=beta)
        x_cur = integrate_flow(spec, x_cur, dt)
        if hit is None:
            return False, np.inf
        y_cur, tau = hit
        ratio = float(np.linalg.norm(y_cur - x_cur)) / \
            (beta * flow_speed(spec, x_cur))
        if ratio > max_ratio:
            max_ratio = ratio
        if ratio >= 1.0:
            return False, max_ratio
    return True, max_ratio


def _probe_points(spec: FieldSpec, count: int, rng, exclusion: float = 0.1):
    from .poincare import _default_sample_box
    lo, hi = _default_sample_box(spec)
    seeds = np.asarray(spec.seeds, dtype=float).reshape(-1, spec.dim)
    pts = []
    while len(pts) < count:
        cand = lo + (hi - lo) * rng.random(spec.dim)
        if np.min(np.linalg.norm(seeds - cand, axis=1)) > exclusion:
            pts.append(cand)
    return pts


def empirical_tube_constant(spec: FieldSpec, direction: str = "forward",
                            beta: float = 0.02, samples: int = 40,
                            rng_seed: int = 0, probes_per_point: int = 3,
                            grid_base: float = 1.25, k_max: int = 120) -> float:
    """Smallest grid L = 1.25^k with all (beta/L)-starts beta-tube-contained.

    Containment is tested for time one, forward or backward per
    ``direction``; the grid is coarse by design (any finite L works, and
    the construction is robust under enlargement).
    """
    from dataclasses import replace
    from .poincare import _default_sample_box, _structured_points
    field = spec if direction == "forward" else spec.reversed()
    # reversed time may expand hard; keep partner integrations alive a bit
    # beyond the box before treating them as escapes
    field = replace(field, chart_bound=max(field.chart_bound, 1e6))
    rng = np.random.default_rng(rng_seed)
    lo, hi = _default_sample_box(field)
    pts = _probe_points(field, samples, rng) + \
        _structured_points(field, 0.1)

    def survives(p):
        # uniform constants are restated over the compact sampling box:
        # probes whose own unit orbit leaves it cannot constrain L
        try:
            states, done, _ = states_at_integer_times(field, p, 10, dt=0.1)
        except (LeftChart, StepLimitExceeded):
            return False
        return done == 10 and bool(
            np.all(states >= lo - 1e-9) and np.all(states <= hi + 1e-9))

    cases = []
    dropped = 0
    for p in pts:
        p = np.asarray(p, dtype=float)
        speed = flow_speed(field, p)
        if speed < 1e-8:
            continue
        if not survives(p):
            dropped += 1
            continue
        b = normal_basis(field.eval(p))
        dirs = [b[:, j] for j in range(b.shape[1])]
        for _ in range(max(0, probes_per_point - len(dirs))):
            g = rng.standard_normal(field.dim)
            v = b @ (b.T @ g)
            nv = np.linalg.norm(v)
            if nv > 1e-12:
                dirs.append(v / nv)
        cases.append((p, speed, dirs[:probes_per_point]))
    if not cases:
        raise TimeBudgetExceeded(
            f"no probe survives a unit of {direction} time in the box")

    for k in range(k_max):
        L = grid_base ** k
        ok = True
        for p, speed, dirs in cases:
            rad = (beta / L) * speed * 0.999
            for u in dirs:
                try:
                    good, _ = tube_contains_orbit(field, p, p + rad * u, 1.0, beta)
                except (AtSingularity, LeftChart, StepLimitExceeded):
                    good = False
                if not good:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return float(L)
    raise TimeBudgetExceeded(f"no tube constant found up to {grid_base}^{k_max}")


def compute_N0(spec: FieldSpec, beta: float = 0.02, samples: int = 40,
               rng_seed: int = 0, sup_samples: int = 120) -> dict:
    """N0 = max(L(X), L(-X), sup ||psi*_t|| for |t| <= 1), with parts."""
    lf = empirical_tube_constant(spec, "forward", beta, samples, rng_seed)
    lb = empirical_tube_constant(spec, "backward", beta, samples, rng_seed + 1)
    ln = sup_scaled_norm(spec, 1.0, sample_count=sup_samples, rng_seed=rng_seed + 2)
    return {"L_forward": lf, "L_backward": lb, "psi_star_sup": ln,
            "N0": max(lf, lb, ln)}


def hit_map_derivative_bound(spec: FieldSpec, beta: float = 0.02,
                             samples: int = 25, rng_seed: int = 0,
                             L: float = 8.0) -> float:
    """Finite-difference bound on |DP_{x,1}| over in-tube starts.

    Surrogate for the uniform-continuity statement about the lifted unit
    hit map; returns the max operator norm over sampled base points.
    """
    rng = np.random.default_rng(rng_seed)
    pts = _probe_points(spec, samples, rng)
    worst = 0.0
    for p in pts:
        p = np.asarray(p, dtype=float)
        speed = flow_speed(spec, p)
        if speed < 1e-8:
            continue
        bx = normal_basis(spec.eval(p))
        z = integrate_flow(spec, p, 1.0)
        bz = normal_basis(spec.eval(z))
        h = 1e-4 * (beta / L) * speed
        cols = []
        okay = True
        for j in range(bx.shape[1]):
            hp = poincare_hit(spec, p, 1.0, p + h * bx[:, j])
            hm = poincare_hit(spec, p, 1.0, p - h * bx[:, j])
            if hp is None or hm is None:
                okay = False
                break
            cols.append(bz.T @ (hp[0] - hm[0]) / (2.0 * h))
        if not okay:
            continue
        mat = np.column_stack(cols)
        worst = max(worst, float(np.linalg.svd(mat, compute_uv=False)[0]))
    return worst


def partition_tube_test(spec: FieldSpec, rp, profile, n: int,
                        pair_count: int, beta: float, rng_seed: int,
                        controls: str = "same") -> float:
    """Fraction of cell pairs that stay beta-tube-contained until exit.

    ``controls='same'`` draws both points from one refined-partition cell
    (the positive test); ``'cross'`` pairs each point with its reflection
    through the stable block plus a deeper-layer partner, which land in
    distinct cells and serve as the negative control.
    """
    from .partition import sample_cell_pairs
    from .section import exit_times

    pairs = sample_cell_pairs(rp, profile, n, pair_count, rng_seed,
                              mode=controls)
    if not pairs:
        return float("nan")
    passed = 0
    for x, y in pairs:
        try:
            tm, tp = exit_times(spec, profile, x)
        except TimeBudgetExceeded:
            continue
        try:
            ok_f, _ = tube_contains_orbit(spec, x, y, tp, beta)
            ok_b = True
            if ok_f:
                ok_b, _ = tube_contains_orbit(spec.reversed(), x, y, tm, beta)
        except (AtSingularity, LeftChart, StepLimitExceeded):
            ok_f = ok_b = False
        if ok_f and ok_b:
            passed += 1
    return passed / len(pairs)
