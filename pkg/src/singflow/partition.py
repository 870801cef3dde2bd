"""Countable partitions: coarse layers, refined cells, the global join.

Element identifiers are plain tagged tuples (hashable, JSON-friendly):

    ("outside",)                whole-space complement of the box
    ("reg", k)                  regular flow-box cell k
    ("layer", sid, n, j)        refined cell j of layer n at singularity sid
    ("bminus", sid)             past-the-section part of the passage region
    ("bplus", sid)              pre-section part (contains sigma itself)
    ("tail", sid)               glued deep layers of a truncated partition

Materialization is partial in two directions, both recorded in the layer
records: layers beyond ``n_max`` are built lazily on first classification,
and within a layer the refined cells are the ball-clipped Voronoi cells of
a finite separated center set; section points farther than the separation
radius from every center fall into one explicit per-layer bulk cell
(index = center count).  Cell radii at the theorem's constants sit far
below any affordable sample density, so the bulk cell is what makes the
partition exact while keeping the materialized cells certified-small.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (BudgetExceeded, CoverFailure, OverlapDetected,
                     TimeBudgetExceeded)
from .fields import FieldSpec
from .integrate import states_at_integer_times
from .section import passage_crossing, sample_layer, shell_index
from .singularity import SingularityProfile

OUTSIDE = ("outside",)


def regular_cell(k: int):
    return ("reg", int(k))


def layer_cell(sid: int, n: int, j: int):
    return ("layer", int(sid), int(n), int(j))


def b_minus(sid: int):
    return ("bminus", int(sid))


def b_plus(sid: int):
    return ("bplus", int(sid))


def tail_cell(sid: int):
    return ("tail", int(sid))


def id_to_str(eid) -> str:
    return ":".join(str(p) for p in eid)


def id_from_str(text: str):
    parts = text.split(":")
    return (parts[0],) + tuple(int(p) for p in parts[1:])


# ----------------------------------------------------------------------
# separated sets

def max_separated_set(points, radius: float, metric=None) -> list[int]:
    """Greedy maximal radius-separated subset, in input order.

    Chosen points are pairwise farther than ``radius`` apart and every
    input point lies within ``radius`` of a chosen one.
    """
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    if metric is None:
        metric = lambda a, b: float(np.linalg.norm(a - b))
    chosen: list[int] = []
    for i, p in enumerate(pts):
        if all(metric(p, pts[j]) > radius for j in chosen):
            chosen.append(i)
    return chosen


def _box_dist_matrix(a, b, du):
    """Pairwise box-metric distances between chart-coordinate arrays."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dun = np.linalg.norm(a[:, None, :du] - b[None, :, :du], axis=2)
    dsn = np.linalg.norm(a[:, None, du:] - b[None, :, du:], axis=2)
    return np.maximum(dun, dsn)


# ----------------------------------------------------------------------
# the coarse partition

@dataclass
class CoarsePartition:
    """C_n = phi_[0,1)(D_n) for n > n0, plus the complement element."""

    profile: SingularityProfile
    sigma_id: int = 0

    def descriptors(self, n_hi: int):
        out = []
        for n in range(self.profile.n0 + 1, n_hi + 1):
            out.append({"n": n, "shell_lo": math.exp(-(n + 1)),
                        "shell_hi": math.exp(-n)})
        return out

    def member(self, spec: FieldSpec, x):
        """Layer n with x in C_n, or None (complement)."""
        prof = self.profile
        if prof.box_norm(x) >= prof.r:
            return None
        try:
            t_c, ev = passage_crossing(spec, prof, x)
        except TimeBudgetExceeded:
            return None
        a = -t_c
        if 0.0 <= a < 1.0 and ev.layer > prof.n0:
            return ev.layer
        return None


def build_coarse(profile: SingularityProfile, sigma_id: int = 0
                 ) -> CoarsePartition:
    return CoarsePartition(profile=profile, sigma_id=sigma_id)


# ----------------------------------------------------------------------
# the refined partition near one singularity

@dataclass
class LayerCells:
    n: int
    r_n: float
    sep: float                   # separation radius r_n / 2
    centers: np.ndarray          # (k, dim) chart coordinates of E_n
    count: int                   # materialized proper-cell count
    max_diam: float              # certified: 2 * max assignment distance
    sample_bulk_fraction: float  # fraction of the build sample in the bulk cell


@dataclass
class RefinedPartition:
    """Voronoi-refined layers plus B^{+/-} bookkeeping for one singularity.

    ``r_n = beta * L^(-K1 n) * L0 * e^(-(n+1))`` exactly; proper cells are
    clipped at distance ``r_n/2`` from their centers so their diameters
    satisfy the layer diameter bound by construction.
    """

    profile: SingularityProfile
    sigma_id: int
    L: float
    beta: float
    N0: float
    n_max: int
    samples_per_layer: int
    rng_seed: int
    c0: float = 0.0
    Lp: float = 0.0              # L' = L^{K1} e
    Lpp: float = 0.0             # L'' = (L^{K1} e)^dim
    layers: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        k1 = self.profile.K1
        self.c0 = self.profile.L0 / math.e
        self.Lp = self.L ** k1 * math.e
        self.Lpp = self.Lp ** self.profile.dim

    def log_r_n(self, n: int) -> float:
        return (math.log(self.beta) + math.log(self.profile.L0)
                - (n + 1) - self.profile.K1 * n * math.log(self.L))

    def r_n(self, n: int) -> float:
        return math.exp(self.log_r_n(n))

    def diam_bound(self, n: int) -> float:
        """c0 * beta * (L')^-n, equal to r_n by construction."""
        return self.c0 * self.beta * self.Lp ** (-float(n))

    def log_count_bound(self, n: int, c1: float = 1.0) -> float:
        """log of c1 * (L'')^n."""
        return math.log(c1) + n * math.log(self.Lpp)

    def cert_c1(self) -> float:
        """Layer-independent certified cardinality constant.

        Disjoint box-metric balls of radius r_n/4 around the separated
        centers fit inside the chart cube of half-width 2*beta1, giving
        #E_n <= vol(cube)/vol(ball) = cert_c1 * (L'')^n.
        """
        prof = self.profile
        du, ds = prof.dim_u, prof.dim_s
        log_cube = prof.dim * math.log(4.0 * prof.beta1)

        def log_unit_ball(k):
            return 0.5 * k * math.log(math.pi) - math.lgamma(0.5 * k + 1.0)

        # product ball {max(|vu|,|vs|) < rho}: V_du(rho) * V_ds(rho)
        log_ball_unit = log_unit_ball(du) + log_unit_ball(ds)
        log_quarter_rn_const = math.log(0.25 * self.c0 * self.beta)
        # vol ball(r_n/4) = exp(log_ball_unit + dim*(log_quarter_rn_const - n log L'))
        return math.exp(log_cube - log_ball_unit
                        - prof.dim * log_quarter_rn_const)

    def ensure_layer(self, n: int) -> LayerCells:
        if n in self.layers:
            return self.layers[n]
        with self._lock:
            if n in self.layers:
                return self.layers[n]
            lc = self._build_layer(n)
            self.layers[n] = lc
            return lc

    def _build_layer(self, n: int) -> LayerCells:
        prof = self.profile
        du = prof.dim_u
        sample = sample_layer(prof, n, self.samples_per_layer,
                              rng_seed=self.rng_seed + 7919 * n)
        coords = np.stack([prof.coords(p) for p in sample.points])
        r_n = self.r_n(n)
        sep = 0.5 * r_n
        dmat = _box_dist_matrix(coords, coords, du)
        chosen: list[int] = []
        for i in range(len(coords)):
            if all(dmat[i, j] > sep for j in chosen):
                chosen.append(i)
        centers = coords[chosen]
        # assignment census over the build sample
        dists = _box_dist_matrix(coords, centers, du)
        nearest = np.argmin(dists, axis=1)
        ndist = dists[np.arange(len(coords)), nearest]
        proper = ndist <= sep
        bulk_fraction = 1.0 - float(np.mean(proper))
        max_diam = 2.0 * float(np.max(ndist[proper])) if np.any(proper) else 0.0
        return LayerCells(n=n, r_n=r_n, sep=sep, centers=centers,
                          count=len(chosen), max_diam=max_diam,
                          sample_bulk_fraction=bulk_fraction)

    def assign(self, n: int, point_ambient) -> int:
        """Cell index of an on-section point: nearest proper cell or bulk."""
        lc = self.ensure_layer(n)
        c = self.profile.coords(point_ambient)[None, :]
        d = _box_dist_matrix(c, lc.centers, self.profile.dim_u)[0]
        j = int(np.argmin(d))
        return j if d[j] <= lc.sep else lc.count

    def cell_count(self, n: int) -> int:
        return self.ensure_layer(n).count


def build_refined(spec: FieldSpec, profile: SingularityProfile, L: float,
                  beta: float, samples_per_layer: int = 400,
                  n_max: int | None = None, rng_seed: int = 0,
                  N0: float | None = None, sigma_id: int = 0,
                  cell_cap: int = 500_000) -> RefinedPartition:
    """Materialize the refined partition layers for one singularity."""
    if N0 is not None and L < N0:
        raise ValueError(f"L = {L} < N0 = {N0}")
    n_max = profile.n0 + 12 if n_max is None else n_max
    predicted = (n_max - profile.n0) * (samples_per_layer + 1)
    if predicted > cell_cap:
        raise BudgetExceeded(f"predicted {predicted} cells > cap {cell_cap}")
    rp = RefinedPartition(profile=profile, sigma_id=sigma_id, L=float(L),
                          beta=float(beta), N0=float(N0 or 0.0),
                          n_max=int(n_max),
                          samples_per_layer=int(samples_per_layer),
                          rng_seed=int(rng_seed))
    for n in range(profile.n0 + 1, n_max + 1):
        rp.ensure_layer(n)
    return rp


# ----------------------------------------------------------------------
# the regular flow-box cover

@dataclass
class RegularCover:
    """Finite partition of the regular region by scaled flow boxes.

    Box i is the beta/2-scaled tube of length 1/2 around its center's
    orbit; membership is the matched-node scaled normal-distance test
    against the stored center polylines.  Overlaps refine set-theoretically
    into intersection-signature cells.
    """

    centers: np.ndarray
    nodes: list                 # per box: (m, d) orbit polyline
    node_ts: list
    node_tangents: list         # unit tangents at nodes
    node_radii: list            # (beta/2L)*|X| at nodes
    signatures: list            # list of frozensets, index = cell id
    sig_index: dict
    reach: np.ndarray
    tree: cKDTree | None = None
    coverage: float = 1.0

    def __post_init__(self):
        if self.tree is None and len(self.centers):
            self.tree = cKDTree(self.centers)

    @property
    def cell_count(self) -> int:
        return len(self.signatures)

    def _member(self, i: int, y) -> bool:
        p = self.nodes[i]
        dv = y[None, :] - p
        d2 = np.einsum("ij,ij->i", dv, dv)
        k = int(np.argmin(d2))
        u = self.node_tangents[i][k]
        tang = float(np.dot(dv[k], u))
        s = self.node_ts[i][k]
        n2 = d2[k] - tang * tang
        return abs(s) < 0.25 + 1e-12 and n2 < self.node_radii[i][k] ** 2

    def signature_of(self, y) -> frozenset:
        y = np.asarray(y, dtype=float)
        if not len(self.centers):
            return frozenset()
        cand = self.tree.query_ball_point(y, float(np.max(self.reach)))
        hits = [i for i in cand if self._member(i, y)]
        if not hits:
            _, nearest = self.tree.query(y)
            return frozenset([int(nearest)])
        return frozenset(hits)

    def classify(self, y) -> int:
        sig = self.signature_of(y)
        k = self.sig_index.get(sig)
        if k is not None:
            return k
        # unseen boundary sliver: merge into the known signature with the
        # smallest symmetric difference (ties -> lowest id)
        best, best_score = 0, None
        for idx, known in enumerate(self.signatures):
            score = (len(known ^ sig), idx)
            if best_score is None or score < best_score:
                best, best_score = idx, score
        return best


def build_regular(spec: FieldSpec, profiles, beta: float, L: float,
                  box_lo, box_hi, sample_count: int = 12000,
                  cell_cap: int = 6000, rng_seed: int = 0,
                  node_dt: float = 0.02) -> RegularCover:
    """Greedy flow-box cover of the box minus the singular balls."""
    box_lo = np.asarray(box_lo, dtype=float)
    box_hi = np.asarray(box_hi, dtype=float)
    rng = np.random.default_rng(rng_seed)
    d = spec.dim

    chunks = []
    total = 0
    while total < sample_count:
        cand = box_lo + (box_hi - box_lo) * rng.random((2 * sample_count, d))
        keep = np.ones(len(cand), dtype=bool)
        for p in profiles:
            keep &= p.box_norms(cand) >= p.r * 1.001
        chunk = cand[keep]
        chunks.append(chunk)
        total += len(chunk)
    samples = np.vstack(chunks)[:sample_count]
    order = rng.permutation(len(samples))

    m_side = max(2, int(round(0.26 / node_dt)))
    centers, nodes, node_ts, node_tans, node_radii = [], [], [], [], []
    covered = np.zeros(len(samples), dtype=bool)
    rad_scale = beta / (2.0 * L)

    def polyline(x0):
        fwd, nf, _ = states_at_integer_times(spec, x0, m_side, dt=node_dt,
                                             rtol=1e-8)
        bwd, nb, _ = states_at_integer_times(spec, x0, m_side, dt=-node_dt,
                                             rtol=1e-8)
        pts = np.vstack([bwd[:nb][::-1], x0[None, :], fwd[:nf]])
        ts = np.concatenate([-node_dt * np.arange(nb, 0, -1), [0.0],
                             node_dt * np.arange(1, nf + 1)])
        return pts, ts

    for idx in order:
        if covered[idx]:
            continue
        if len(centers) >= cell_cap:
            raise CoverFailure(f"cover exceeded {cell_cap} boxes")
        x0 = samples[idx]
        pts, ts = polyline(x0)
        field_vals = np.stack([spec.eval(p) for p in pts])
        speeds = np.linalg.norm(field_vals, axis=1)
        tans = field_vals / speeds[:, None]
        radii = rad_scale * speeds
        centers.append(x0)
        nodes.append(pts)
        node_ts.append(ts)
        node_tans.append(tans)
        node_radii.append(radii)
        # mark newly covered samples (vectorized matched-node test)
        rem = np.flatnonzero(~covered)
        dv = samples[rem][:, None, :] - pts[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", dv, dv)
        kmin = np.argmin(d2, axis=1)
        rows = np.arange(len(rem))
        tang = np.einsum("ij,ij->i", dv[rows, kmin], tans[kmin])
        s_est = ts[kmin] + tang / speeds[kmin]
        n2 = d2[rows, kmin] - tang ** 2
        member = (np.abs(s_est) < 0.25) & (n2 < radii[kmin] ** 2)
        covered[rem[member]] = True

    centers = np.stack(centers) if centers else np.empty((0, d))
    reach = np.array([np.max(np.linalg.norm(p - c, axis=1)) + np.max(r)
                      for p, c, r in zip(nodes, centers, node_radii)]) \
        if len(centers) else np.empty(0)

    cover = RegularCover(centers=centers, nodes=nodes, node_ts=node_ts,
                         node_tangents=node_tans, node_radii=node_radii,
                         signatures=[], sig_index={}, reach=reach)
    # enumerate signature cells: every singleton, then sampled overlaps
    sigs = {frozenset([i]) for i in range(len(centers))}
    for y in samples:
        sigs.add(cover.signature_of(y))
    cover.signatures = sorted(sigs, key=lambda s: (len(s), sorted(s)))
    cover.sig_index = {s: k for k, s in enumerate(cover.signatures)}
    cover.coverage = float(np.mean(covered))
    return cover


# ----------------------------------------------------------------------
# the global partition

@dataclass
class ClassifyInfo:
    sigma_id: int | None = None
    passage_layer: int | None = None
    crossing_time: float | None = None
    in_O: bool = False
    budget_fallback: bool = False


@dataclass
class Itinerary:
    start: np.ndarray
    j_min: int
    j_max: int
    ids: list
    dropped: int = 0

    def __len__(self):
        return len(self.ids)


@dataclass
class GlobalPartition:
    """The join of the regular cover with every refined singular partition."""

    spec: FieldSpec
    profiles: list
    refined: list
    cover: RegularCover | None
    box_lo: np.ndarray
    box_hi: np.ndarray

    def in_box(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.box_lo) and np.all(x <= self.box_hi))

    def classify(self, x):
        return self.classify_detail(x)[0]

    def classify_detail(self, x):
        x = np.asarray(x, dtype=float)
        if not self.in_box(x):
            return OUTSIDE, ClassifyInfo()
        for sid, prof in enumerate(self.profiles):
            if prof.box_norm(x) < prof.r:
                return self._classify_in_ball(sid, x)
        if self.cover is not None and len(self.cover.centers):
            return regular_cell(self.cover.classify(x)), ClassifyInfo()
        return regular_cell(0), ClassifyInfo()

    def _classify_in_ball(self, sid: int, x):
        prof = self.profiles[sid]
        rp = self.refined[sid]
        bn = prof.box_norm(x)
        if bn < 1e-280:
            return b_plus(sid), ClassifyInfo(sigma_id=sid, in_O=True)
        vs, vu = prof.split(x)
        defect = float(np.linalg.norm(vs) - np.linalg.norm(vu))
        try:
            t_c, ev = passage_crossing(self.spec, prof, x)
        except TimeBudgetExceeded:
            side = b_minus(sid) if defect < 0 else b_plus(sid)
            return side, ClassifyInfo(sigma_id=sid, passage_layer=None,
                                      in_O=True, budget_fallback=True)
        n = ev.layer
        info = ClassifyInfo(sigma_id=sid, passage_layer=n,
                            crossing_time=t_c, in_O=n > prof.n0)
        if n <= prof.n0:
            # shallow passage: outside O(sigma); the B+- halves absorb it
            side = b_minus(sid) if defect < 0 else b_plus(sid)
            return side, info
        a = -t_c
        if 0.0 <= a < 1.0:
            j = rp.assign(n, ev.point)
            return layer_cell(sid, n, j), info
        if a >= 1.0:
            return b_minus(sid), info
        return b_plus(sid), info

    def classify_batch(self, states):
        """Vectorised classification of an (m, d) state array.

        Out-of-box and far-from-sigma states are resolved with array ops;
        only in-ball states take the per-point passage analysis.  Returns
        (ids, infos) with infos None away from the singular balls.
        """
        states = np.asarray(states, dtype=float)
        m = len(states)
        ids: list = [None] * m
        infos: list = [None] * m
        in_box = np.all((states >= self.box_lo) & (states <= self.box_hi),
                        axis=1)
        in_ball = np.zeros(m, dtype=bool)
        ball_sid = np.full(m, -1)
        for sid, prof in enumerate(self.profiles):
            mask = in_box & ~in_ball & (prof.box_norms(states) < prof.r)
            in_ball |= mask
            ball_sid[mask] = sid
        for i in range(m):
            if not in_box[i]:
                ids[i] = OUTSIDE
            elif in_ball[i]:
                ids[i], infos[i] = self._classify_in_ball(int(ball_sid[i]),
                                                          states[i])
            elif self.cover is not None and len(self.cover.centers):
                ids[i] = regular_cell(self.cover.classify(states[i]))
            else:
                ids[i] = regular_cell(0)
        return ids, infos

    # -- orbits ---------------------------------------------------------

    def itinerary(self, x, j_min: int, j_max: int, rtol=None) -> Itinerary:
        """Element ids at integer times j_min..j_max along the orbit of x."""
        x = np.asarray(x, dtype=float)
        n_fwd = max(0, j_max)
        n_bwd = max(0, -j_min)
        fwd, nf, _ = states_at_integer_times(self.spec, x, n_fwd, rtol=rtol) \
            if n_fwd else (np.empty((0, self.spec.dim)), 0, 0)
        bwd, nb, _ = states_at_integer_times(self.spec, x, n_bwd, dt=-1.0,
                                             rtol=rtol) \
            if n_bwd else (np.empty((0, self.spec.dim)), 0, 0)
        ids = []
        dropped = 0
        for j in range(j_min, j_max + 1):
            if j == 0:
                ids.append(self.classify(x))
            elif j > 0:
                ids.append(self.classify(fwd[j - 1]) if j - 1 < nf else OUTSIDE)
                dropped += 0 if j - 1 < nf else 1
            else:
                ids.append(self.classify(bwd[-j - 1]) if -j - 1 < nb else OUTSIDE)
                dropped += 0 if -j - 1 < nb else 1
        return Itinerary(start=x, j_min=j_min, j_max=j_max, ids=ids,
                         dropped=dropped)

    # -- truncations ------------------------------------------------------

    def truncation_map(self, N: int):
        def merge(eid):
            if eid[0] == "layer" and eid[2] > N:
                return tail_cell(eid[1])
            return eid
        return merge

    def truncate(self, N: int) -> "TruncatedPartition":
        for prof in self.profiles:
            if N <= prof.n0:
                raise ValueError(f"N = {N} <= n0 = {prof.n0}")
        return TruncatedPartition(base=self, N=int(N))

    def metadata(self) -> dict:
        doc = {"box_lo": self.box_lo.tolist(), "box_hi": self.box_hi.tolist(),
               "singularities": []}
        for prof, rp in zip(self.profiles, self.refined):
            layers = {}
            for n in sorted(rp.layers):
                lc = rp.layers[n]
                layers[str(n)] = {"count": lc.count, "r_n": lc.r_n,
                                  "max_diam": lc.max_diam,
                                  "diam_bound": rp.diam_bound(n),
                                  "bulk_fraction": lc.sample_bulk_fraction}
            doc["singularities"].append({
                "sigma": prof.sigma.tolist(), "n0": prof.n0,
                "K0": prof.K0, "K1": prof.K1,
                "L": rp.L, "beta": rp.beta, "N0": rp.N0,
                "c0": rp.c0, "Lp": rp.Lp, "Lpp": rp.Lpp,
                "cert_c1": rp.cert_c1(), "layers": layers})
        if self.cover is not None:
            doc["regular_cover"] = {"boxes": len(self.cover.centers),
                                    "cells": self.cover.cell_count,
                                    "coverage": self.cover.coverage}
        return doc


@dataclass
class TruncatedPartition:
    """View of a GlobalPartition with layers above N glued into tail cells."""

    base: GlobalPartition
    N: int

    def classify(self, x):
        return self.base.truncation_map(self.N)(self.base.classify(x))

    def classify_detail(self, x):
        eid, info = self.base.classify_detail(x)
        return self.base.truncation_map(self.N)(eid), info

    def itinerary(self, x, j_min, j_max, rtol=None) -> Itinerary:
        it = self.base.itinerary(x, j_min, j_max, rtol=rtol)
        merge = self.base.truncation_map(self.N)
        return Itinerary(start=it.start, j_min=it.j_min, j_max=it.j_max,
                         ids=[merge(e) for e in it.ids], dropped=it.dropped)

    def truncate(self, N: int) -> "TruncatedPartition":
        return TruncatedPartition(base=self.base, N=min(self.N, int(N)))


def truncate(gp, N: int):
    """Glue every layer cell deeper than N into one tail element per sigma."""
    return gp.truncate(N)


def assemble_global(spec: FieldSpec, profiles, refined, cover,
                    box_lo, box_hi, validate: bool = True) -> GlobalPartition:
    gp = GlobalPartition(spec=spec, profiles=list(profiles),
                         refined=list(refined), cover=cover,
                         box_lo=np.asarray(box_lo, dtype=float),
                         box_hi=np.asarray(box_hi, dtype=float))
    if validate and cover is not None and len(cover.centers):
        for prof in profiles:
            norms = prof.box_norms(cover.centers)
            if np.any(norms < prof.r):
                raise OverlapDetected(
                    "regular flow-box center inside a singular ball")
    return gp


def in_O_region(spec: FieldSpec, profile: SingularityProfile, x,
                N: int | None = None) -> bool:
    """Membership in O(sigma) (N None) or O^N(sigma) via the passage layer.

    Budget failures near the invariant manifolds count as members
    (conservative).
    """
    cutoff = profile.n0 if N is None else int(N)
    if profile.box_norm(x) >= profile.r:
        return False
    if profile.box_norm(x) < 1e-280:
        return True
    try:
        _, ev = passage_crossing(spec, profile, x)
    except TimeBudgetExceeded:
        return True
    return ev.layer > cutoff


def sample_cell_pairs(rp: RefinedPartition, profile: SingularityProfile,
                      n: int, count: int, rng_seed: int,
                      mode: str = "same", rel_floor: float = 1e-8):
    """Point pairs for tube tests, anchored at materialized cell centers.

    'same' pairs a center with a same-shell on-section partner at box
    distance min(0.4 * sep, rel_floor * shell scale): the theorem's cell
    radius sits below float resolution at honest constants, so the clip
    keeps the separation representable and the test conservative (the
    tested pairs are farther apart than true same-cell pairs).  'cross'
    reflects the partner through the stable block (opposite section
    branch) or drops it two shells deeper: guaranteed distinct cells.
    """
    lc = rp.ensure_layer(n)
    rng = np.random.default_rng(rng_seed)
    du = profile.dim_u
    shell_scale = math.exp(-n)
    sep_target = min(max(0.4 * lc.sep, rel_floor * shell_scale),
                     0.1 * shell_scale)
    pairs = []
    for i in range(count):
        j = int(rng.integers(lc.count))
        c = lc.centers[j].copy()
        x = profile.from_coords(c[:du], c[du:])
        if mode == "same":
            delta = sep_target * (0.3 + 0.7 * rng.random())
            y = _perturb_on_section(profile, c, delta, rng)
        else:
            if i % 3 == 2:
                y = profile.from_coords(c[:du] * math.exp(-2.0),
                                        c[du:] * math.exp(-2.0))
            else:
                y = profile.from_coords(-c[:du], c[du:])
        pairs.append((x, y))
    return pairs


def _perturb_on_section(profile, c, delta, rng):
    """A same-shell section point at box distance ~ delta from chart point c."""
    du = profile.dim_u
    vu, vs = c[:du], c[du:]
    rho = float(np.linalg.norm(vu))
    uu = vu / rho
    us = vs / np.linalg.norm(vs)
    drho_dir = 2.0 * rng.random() - 1.0
    wu = rng.standard_normal(du)
    ws = rng.standard_normal(len(vs))
    eps = delta / rho
    c2 = c
    for _ in range(4):
        rho2 = rho * (1.0 + eps * drho_dir)
        uu2 = uu + eps * wu
        uu2 /= np.linalg.norm(uu2)
        us2 = us + eps * ws
        us2 /= np.linalg.norm(us2)
        c2 = np.concatenate([rho2 * uu2, rho2 * us2])
        dist = max(np.linalg.norm(c2[:du] - vu), np.linalg.norm(c2[du:] - vs))
        if dist == 0.0:
            eps *= 4.0
            continue
        if abs(dist - delta) <= 0.5 * delta:
            break
        eps *= delta / dist
    return profile.from_coords(c2[:du], c2[du:])
