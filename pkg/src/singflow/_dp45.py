"""Compiled Dormand-Prince 5(4) core.

One adaptive stepper drives everything in the package: plain orbits,
orbits with tangent frames (the variational equation is integrated jointly,
never finite-differenced), dense step recording for event location, and an
integer-time grid sampler for itineraries and empirical measures.

Near a registered singularity the spatial step is capped at a fraction of
the current distance to it (h * |X| <= kappa * dist), so the exponentially
slow passage is resolved with O(n) steps instead of being skipped.
"""
import numpy as np
from numba import njit

OK = 0
STEP_LIMIT = 1
LEFT_CHART = 2
RECORD_FULL = 3
STALLED = 4

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = (3 / 40, 9 / 40)
_A[3, :3] = (44 / 45, -56 / 15, 32 / 9)
_A[4, :4] = (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729)
_A[5, :5] = (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656)
_A[6, :6] = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
_B = _A[6].copy()                      # 5th-order weights (FSAL)
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
               -17253 / 339200, 22 / 525, -1 / 40])


@njit(cache=True, nogil=True, inline="always")
def _field_core(kind, par, x, out):
    ts = par[0]
    d = x.shape[0]
    if kind == 0:
        amp = par[1]
        for i in range(d):
            s = 0.0
            base = 2 + i * d
            for j in range(d):
                s += par[base + j] * x[j]
            out[i] = s
        if amp != 0.0:
            for i in range(d):
                xn = x[i + 1] if i + 1 < d else x[0]
                out[i] += amp * xn * xn
    else:
        sg = par[1]
        rh = par[2]
        bb = par[3]
        out[0] = sg * (x[1] - x[0])
        out[1] = x[0] * (rh - x[2]) - x[1]
        out[2] = x[0] * x[1] - bb * x[2]
    if ts != 1.0:
        for i in range(d):
            out[i] *= ts


@njit(cache=True, nogil=True, inline="always")
def _jac_core(kind, par, x, jout):
    ts = par[0]
    d = x.shape[0]
    if kind == 0:
        amp = par[1]
        for i in range(d):
            for j in range(d):
                jout[i, j] = par[2 + i * d + j]
        if amp != 0.0:
            for i in range(d):
                jn = (i + 1) % d
                jout[i, jn] += 2.0 * amp * x[jn]
    else:
        sg = par[1]
        rh = par[2]
        bb = par[3]
        jout[0, 0] = -sg
        jout[0, 1] = sg
        jout[0, 2] = 0.0
        jout[1, 0] = rh - x[2]
        jout[1, 1] = -1.0
        jout[1, 2] = -x[0]
        jout[2, 0] = x[1]
        jout[2, 1] = x[0]
        jout[2, 2] = -bb
    if ts != 1.0:
        for i in range(d):
            for j in range(d):
                jout[i, j] *= ts


@njit(cache=True, nogil=True, inline="always")
def _rhs(kind, par, d, m, y, out, jbuf):
    _field_core(kind, par, y[:d], out[:d])
    if m > 0:
        _jac_core(kind, par, y[:d], jbuf)
        for c in range(m):
            b = d + c * d
            for i in range(d):
                s = 0.0
                for j in range(d):
                    s += jbuf[i, j] * y[b + j]
                out[b + i] = s


@njit(cache=True, nogil=True, inline="always")
def _step_cap(d, x, speed, max_step, sing, sing_beta1, kappa):
    """Largest allowed |h| at state x (time units)."""
    cap = max_step
    ns = sing.shape[0]
    for s in range(ns):
        dist = 0.0
        for j in range(d):
            dv = x[j] - sing[s, j]
            dist += dv * dv
        dist = np.sqrt(dist)
        if dist < sing_beta1[s] and speed > 0.0:
            c = kappa * dist / speed
            if c < cap:
                cap = c
    return cap


@njit(cache=True, nogil=True)
def advance(kind, par, d, m, y, t0, t1, rtol, atol, max_step,
            chart_bound, sing, sing_beta1, kappa, max_steps,
            record, rec_t, rec_y):
    """Advance y in place from t0 to t1 (either direction).

    Returns (status, t_reached, n_steps, n_rec).  With record != 0 every
    accepted step endpoint (including the initial state) is appended to
    rec_t / rec_y; RECORD_FULL is returned when they run out.
    """
    n = d + d * m
    if t1 == t0:
        if record != 0:
            if rec_t.shape[0] < 1:
                return RECORD_FULL, t0, 0, 0
            rec_t[0] = t0
            for i in range(n):
                rec_y[0, i] = y[i]
            return OK, t0, 0, 1
        return OK, t0, 0, 0

    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)

    k = np.empty((7, n))
    ynew = np.empty(n)
    jbuf = np.empty((d, d))

    _rhs(kind, par, d, m, y, k[0], jbuf)

    nrec = 0
    if record != 0:
        if rec_t.shape[0] < 1:
            return RECORD_FULL, t0, 0, 0
        rec_t[0] = t0
        for i in range(n):
            rec_y[0, i] = y[i]
        nrec = 1

    # initial step heuristic; the scale floor guards components sitting
    # exactly at zero with nonzero derivative (pure-relative atol)
    ymax = 0.0
    for i in range(n):
        if abs(y[i]) > ymax:
            ymax = abs(y[i])
    d0 = 0.0
    d1 = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), 1e-6 * ymax)
        d0 += (y[i] / sc) ** 2
        d1 += (k[0, i] / sc) ** 2
    d0 = np.sqrt(d0 / n)
    d1 = np.sqrt(d1 / n)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    speed0 = 0.0
    for i in range(d):
        speed0 += k[0, i] ** 2
    speed0 = np.sqrt(speed0)
    cap = _step_cap(d, y[:d], speed0, max_step, sing, sing_beta1, kappa)
    if h > cap:
        h = cap
    if h > span:
        h = span

    t = t0
    nsteps = 0
    rejected = False
    while direction * (t1 - t) > 0.0:
        if nsteps >= max_steps:
            return STEP_LIMIT, t, nsteps, nrec
        # refresh the cap at the current state
        speed = 0.0
        for i in range(d):
            speed += k[0, i] ** 2
        speed = np.sqrt(speed)
        cap = _step_cap(d, y[:d], speed, max_step, sing, sing_beta1, kappa)
        if h > cap:
            h = cap
        if h > abs(t1 - t):
            h = abs(t1 - t)
        if rejected and h < 1e-14 * max(1.0, abs(t)):
            return STALLED, t, nsteps, nrec
        hs = direction * h

        # stages (k[0] is fresh by FSAL)
        for s in range(1, 7):
            for i in range(n):
                acc = 0.0
                for q in range(s):
                    aq = _A[s, q]
                    if aq != 0.0:
                        acc += aq * k[q, i]
                ynew[i] = y[i] + hs * acc
            _rhs(kind, par, d, m, ynew, k[s], jbuf)
        # ynew currently holds the 5th-order solution (stage 7 used _A[6] = b)

        errnorm = 0.0
        for i in range(n):
            e = 0.0
            for q in range(7):
                eq = _E[q]
                if eq != 0.0:
                    e += eq * k[q, i]
            e *= hs
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            r = e / sc
            errnorm += r * r
        errnorm = np.sqrt(errnorm / n)

        if errnorm <= 1.0:
            rejected = False
            nsteps += 1
            t = t + hs
            for i in range(n):
                y[i] = ynew[i]
            for i in range(n):
                k[0, i] = k[6, i]          # FSAL
            if record != 0:
                if nrec >= rec_t.shape[0]:
                    return RECORD_FULL, t, nsteps, nrec
                rec_t[nrec] = t
                for i in range(n):
                    rec_y[nrec, i] = y[i]
                nrec += 1
            bad = False
            for i in range(d):
                if not np.isfinite(y[i]) or abs(y[i]) > chart_bound:
                    bad = True
            if bad:
                return LEFT_CHART, t, nsteps, nrec
            if errnorm == 0.0:
                fac = 5.0
            else:
                fac = 0.9 * errnorm ** -0.2
                if fac > 5.0:
                    fac = 5.0
                if fac < 0.2:
                    fac = 0.2
            h = h * fac
        else:
            # rejected: k[0] still holds f(y)
            rejected = True
            fac = 0.9 * errnorm ** -0.2
            if fac < 0.1:
                fac = 0.1
            h = h * fac

    return OK, t, nsteps, nrec


@njit(cache=True, nogil=True)
def advance_integer_grid(kind, par, d, y, t0, ngrid, dt, rtol, atol, max_step,
                         chart_bound, sing, sing_beta1, kappa,
                         max_steps_per_cell, out):
    """States at t0 + dt, ..., t0 + ngrid*dt written into out (ngrid, d).

    Returns (status, completed): on a non-OK status, `completed` grid points
    were filled before the failure.
    """
    rec_t = np.empty(0)
    rec_y = np.empty((0, d))
    for i in range(ngrid):
        ta = t0 + i * dt
        tb = t0 + (i + 1) * dt
        status, tr, ns, nr = advance(kind, par, d, 0, y, ta, tb, rtol, atol,
                                     max_step, chart_bound, sing, sing_beta1,
                                     kappa, max_steps_per_cell, 0, rec_t, rec_y)
        if status != OK:
            return status, i
        for j in range(d):
            out[i, j] = y[j]
    return OK, ngrid
