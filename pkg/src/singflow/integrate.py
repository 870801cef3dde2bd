"""Flow integration API: phi_t, the tangent flow Phi_t, dense orbit segments.

All integration funnels through the compiled Dormand-Prince core in
``_dp45``.  Tangent vectors are integrated jointly with the base point as
an augmented system (finite differences degrade exponentially near a
singularity, so they are never used).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _dp45
from .errors import LeftChart, StepLimitExceeded
from .fields import FieldSpec

DEFAULT_STEP_BUDGET = 2_000_000
SLOW_KAPPA = 0.25          # spatial step <= kappa * distance near a singularity
SLOW_RADIUS = 0.2          # euclidean radius of the slow-step region per seed


def _core_args(spec: FieldSpec):
    sing = np.asarray(spec.seeds, dtype=float).reshape(-1, spec.dim)
    beta1 = np.full(sing.shape[0], SLOW_RADIUS)
    return spec.kind_id, spec.par_array(), sing, beta1


def _raise_for(status, t, context=""):
    if status == _dp45.LEFT_CHART:
        raise LeftChart(f"orbit left the chart domain at t={t:.6g} {context}")
    if status == _dp45.STEP_LIMIT:
        raise StepLimitExceeded(f"step budget exhausted at t={t:.6g} {context}")
    if status == _dp45.STALLED:
        raise StepLimitExceeded(f"integrator stalled at t={t:.6g} {context}")
    if status == _dp45.RECORD_FULL:
        raise StepLimitExceeded(f"recording buffer full at t={t:.6g} {context}")


_EMPTY_T = np.empty(0)


def integrate_flow(spec: FieldSpec, x, t: float, rtol=None,
                   budget=DEFAULT_STEP_BUDGET) -> np.ndarray:
    """phi_t(x)."""
    kind, par, sing, b1 = _core_args(spec)
    y = np.array(x, dtype=float).copy()
    rtol = spec.integ_tol if rtol is None else rtol
    status, tr, ns, nr = _dp45.advance(
        kind, par, spec.dim, 0, y, 0.0, float(t), rtol, spec.atol,
        spec.max_step, spec.chart_bound, sing, b1, SLOW_KAPPA, budget,
        0, _EMPTY_T, np.empty((0, spec.dim)))
    _raise_for(status, tr)
    return y


def integrate_frame(spec: FieldSpec, x, v_columns, t: float, rtol=None,
                    budget=DEFAULT_STEP_BUDGET):
    """Jointly integrate phi_t(x) and Phi_t on the given frame columns.

    Returns (phi_t(x), frame') where frame' has the same shape as the
    (d, m) input frame.
    """
    d = spec.dim
    v = np.asarray(v_columns, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    m = v.shape[1]
    y = np.empty(d + d * m)
    y[:d] = np.asarray(x, dtype=float)
    for c in range(m):
        y[d + c * d: d + (c + 1) * d] = v[:, c]
    kind, par, sing, b1 = _core_args(spec)
    rtol = spec.integ_tol if rtol is None else rtol
    status, tr, ns, nr = _dp45.advance(
        kind, par, d, m, y, 0.0, float(t), rtol, spec.atol,
        spec.max_step, spec.chart_bound, sing, b1, SLOW_KAPPA, budget,
        0, _EMPTY_T, np.empty((0, d + d * m)))
    _raise_for(status, tr)
    out = np.empty((d, m))
    for c in range(m):
        out[:, c] = y[d + c * d: d + (c + 1) * d]
    return y[:d].copy(), out


def integrate_tangent(spec: FieldSpec, x, v, t: float, **kw) -> np.ndarray:
    """Phi_t(v) along the orbit of x."""
    _, frame = integrate_frame(spec, x, np.asarray(v, dtype=float), t, **kw)
    return frame[:, 0]


@dataclass
class OrbitSegment:
    """Dense record of accepted integrator steps along one orbit.

    `ts` runs from 0 to the reached end time (monotone, possibly
    decreasing for backward segments).  Intermediate states are produced
    by re-integrating from the nearest recorded step start, which keeps
    event refinement at full integrator accuracy.
    """

    spec: FieldSpec
    ts: np.ndarray
    ys: np.ndarray
    status: int
    rtol: float

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def complete(self) -> bool:
        return self.status == _dp45.OK

    def state_at(self, t: float) -> np.ndarray:
        ts = self.ts
        forward = ts[-1] >= ts[0]
        if forward:
            i = int(np.searchsorted(ts, t, side="right") - 1)
        else:
            i = int(np.searchsorted(-ts, -t, side="right") - 1)
        i = max(0, min(i, len(ts) - 1))
        if ts[i] == t:
            return self.ys[i].copy()
        kind, par, sing, b1 = _core_args(self.spec)
        y = self.ys[i].copy()
        status, tr, ns, nr = _dp45.advance(
            kind, par, self.spec.dim, 0, y, float(ts[i]), float(t),
            self.rtol, self.spec.atol, self.spec.max_step,
            self.spec.chart_bound, sing, b1, SLOW_KAPPA,
            DEFAULT_STEP_BUDGET, 0, _EMPTY_T, np.empty((0, self.spec.dim)))
        _raise_for(status, tr, "(state_at)")
        return y

    def sign_change_brackets(self, g) -> list[tuple[float, float]]:
        """Brackets [t_i, t_{i+1}] over which g(state) changes sign."""
        vals = np.array([g(y) for y in self.ys])
        out = []
        for i in range(len(vals) - 1):
            a, b = vals[i], vals[i + 1]
            if a == 0.0:
                # exact zero at a grid point: report a degenerate bracket
                out.append((float(self.ts[i]), float(self.ts[i])))
            elif a * b < 0.0:
                out.append((float(self.ts[i]), float(self.ts[i + 1])))
        if len(vals) and vals[-1] == 0.0:
            out.append((float(self.ts[-1]), float(self.ts[-1])))
        return out

    def refine_root(self, g, bracket, xtol=1e-13) -> tuple[float, np.ndarray]:
        """Root of t -> g(state_at(t)) inside a sign-change bracket."""
        ta, tb = bracket
        if ta == tb:
            return ta, self.state_at(ta)
        lo, hi = (ta, tb) if ta < tb else (tb, ta)
        f = lambda t: float(g(self.state_at(t)))
        t_star = brentq(f, lo, hi, xtol=xtol, rtol=8 * np.finfo(float).eps)
        return float(t_star), self.state_at(t_star)


def orbit_segment(spec: FieldSpec, x, t_end: float, rtol=None,
                  budget=DEFAULT_STEP_BUDGET, rec_cap=65536,
                  rec_cap_max=2 ** 22, allow_exit=True) -> OrbitSegment:
    """Integrate from 0 to t_end recording every accepted step.

    With allow_exit the segment may legitimately stop early when the
    orbit leaves the chart; callers inspect `.complete`.
    """
    kind, par, sing, b1 = _core_args(spec)
    rtol = spec.integ_tol if rtol is None else rtol
    cap = rec_cap
    while True:
        y = np.array(x, dtype=float).copy()
        rec_t = np.empty(cap)
        rec_y = np.empty((cap, spec.dim))
        status, tr, ns, nr = _dp45.advance(
            kind, par, spec.dim, 0, y, 0.0, float(t_end), rtol, spec.atol,
            spec.max_step, spec.chart_bound, sing, b1, SLOW_KAPPA, budget,
            1, rec_t, rec_y)
        if status == _dp45.RECORD_FULL and cap < rec_cap_max:
            cap *= 4
            continue
        break
    if status == _dp45.LEFT_CHART and not allow_exit:
        _raise_for(status, tr)
    if status in (_dp45.STEP_LIMIT, _dp45.STALLED, _dp45.RECORD_FULL):
        _raise_for(status, tr)
    return OrbitSegment(spec=spec, ts=rec_t[:nr].copy(), ys=rec_y[:nr].copy(),
                        status=status, rtol=rtol)


def states_at_integer_times(spec: FieldSpec, x, count: int, dt: float = 1.0,
                            rtol=None, budget_per_cell=200_000):
    """States at dt, 2*dt, ..., count*dt from x.

    Returns (states, completed, status); non-OK statuses are reported, not
    raised, so measure accumulation can drop a bad orbit and move on.
    """
    kind, par, sing, b1 = _core_args(spec)
    rtol = spec.integ_tol if rtol is None else rtol
    y = np.array(x, dtype=float).copy()
    out = np.empty((count, spec.dim))
    status, completed = _dp45.advance_integer_grid(
        kind, par, spec.dim, y, 0.0, count, float(dt), rtol, spec.atol,
        spec.max_step, spec.chart_bound, sing, b1, SLOW_KAPPA,
        budget_per_cell, out)
    return out[:completed], completed, status
