"""Empirical invariant measures from orbit itineraries, plus synthetic ones.

Weights live on partition element ids.  Besides element weights a measure
may carry k-block weights (for block entropies) and per-singularity tube
weights: the occupation mass of each flow-saturated layer tube, which is
what the tower-sum and truncation-gap inequalities integrate against.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import math
import numpy as np

from . import _dp45
from .fields import FieldSpec
from .integrate import states_at_integer_times
from .partition import OUTSIDE, layer_cell

SIGMA_FLOOR = 1e-12    # below this box norm a point is treated as sigma


@dataclass
class EmpiricalMeasure:
    weights: dict = field(default_factory=dict)
    block_weights: dict = field(default_factory=dict)   # k -> {tuple: w}
    tube_weights: dict = field(default_factory=dict)    # sid -> {n|'fallback': w}
    source: dict = field(default_factory=dict)

    def total(self) -> float:
        return float(sum(self.weights.values()))

    def layer_masses(self, sigma_id: int) -> dict:
        """n -> total weight of layer-n cells of the given singularity."""
        out: dict[int, float] = {}
        for eid, w in self.weights.items():
            if eid[0] == "layer" and eid[1] == sigma_id:
                out[eid[2]] = out.get(eid[2], 0.0) + w
        return out

    def mu_O_N(self, sigma_id: int, N: int | None) -> float:
        """Measured mass of O^N(sigma); budget-fallback mass counts always."""
        tw = self.tube_weights.get(sigma_id, {})
        total = tw.get("fallback", 0.0)
        for key, w in tw.items():
            if key == "fallback":
                continue
            if N is None or key > N:
                total += w
        return total


def dirac_measure(gp, x) -> EmpiricalMeasure:
    """Exact point mass at the element containing x."""
    eid, info = gp.classify_detail(x)
    tube = {}
    if info.sigma_id is not None and info.in_O:
        key = info.passage_layer if info.passage_layer is not None else "fallback"
        tube = {info.sigma_id: {key: 1.0}}
    return EmpiricalMeasure(weights={eid: 1.0}, tube_weights=tube,
                            source={"kind": "dirac"})


def _accumulate_orbit(spec, gp, x0, horizon, burn_in, k_max, rtol):
    n_steps = int(horizon)
    states, completed, status = states_at_integer_times(spec, x0, n_steps,
                                                        rtol=rtol)
    if status not in (_dp45.OK, _dp45.LEFT_CHART):
        return None
    counts: dict = {}
    tube: dict = {}
    seq = []
    j_lo = int(math.floor(burn_in))
    kept = states[j_lo:completed] if completed > j_lo else states[:0]
    kept_ids, kept_infos = gp.classify_batch(kept)
    for j in range(j_lo + 1, n_steps + 1):
        if j - 1 < completed:
            eid = kept_ids[j - 1 - j_lo]
            info = kept_infos[j - 1 - j_lo]
            if info is not None and info.sigma_id is not None and info.in_O:
                key = info.passage_layer if info.passage_layer is not None \
                    else "fallback"
                sd = tube.setdefault(info.sigma_id, {})
                sd[key] = sd.get(key, 0.0) + 1.0
        else:
            eid = OUTSIDE          # left the chart: outside the box for good
        counts[eid] = counts.get(eid, 0.0) + 1.0
        seq.append(eid)
    blocks: dict = {}
    for k in range(1, k_max + 1):
        bk: dict = {}
        for i in range(len(seq) - k + 1):
            key = tuple(seq[i:i + k])
            bk[key] = bk.get(key, 0.0) + 1.0
        blocks[k] = bk
    return counts, tube, blocks, len(seq)


def birkhoff_measure(spec: FieldSpec, gp, initial_points, horizon: float,
                     burn_in: float = 0.0, rng_seed: int = 0,
                     k_max: int = 0, rtol: float = 1e-6,
                     threads: int = 1) -> EmpiricalMeasure:
    """Time-average of classify over integer times in (burn_in, horizon].

    ``initial_points`` is either an array of start points or an integer
    count, in which case starts are drawn seeded-uniform from the box.
    Orbits whose integration fails (other than by leaving the chart, which
    simply means Outside from then on) are dropped with a warning count.
    The reduction order is fixed, so results are deterministic per seed.
    """
    if isinstance(initial_points, int):
        rng = np.random.default_rng(rng_seed)
        initial_points = gp.box_lo + (gp.box_hi - gp.box_lo) * \
            rng.random((initial_points, spec.dim))
    initial_points = [np.asarray(p, dtype=float) for p in initial_points]

    def work(p):
        return _accumulate_orbit(spec, gp, p, horizon, burn_in, k_max, rtol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, initial_points))
    else:
        results = [work(p) for p in initial_points]

    weights: dict = {}
    tube: dict = {}
    blocks: dict = {}
    dropped = 0
    total = 0.0
    for res in results:
        if res is None:
            dropped += 1
            continue
        counts, tb, bl, n_samples = res
        total += n_samples
        for eid, c in counts.items():
            weights[eid] = weights.get(eid, 0.0) + c
        for sid, sub in tb.items():
            dst = tube.setdefault(sid, {})
            for key, c in sub.items():
                dst[key] = dst.get(key, 0.0) + c
        for k, bk in bl.items():
            dst = blocks.setdefault(k, {})
            for key, c in bk.items():
                dst[key] = dst.get(key, 0.0) + c
    if total == 0:
        raise ValueError("every orbit was dropped")
    weights = {eid: c / total for eid, c in weights.items()}
    tube = {sid: {key: c / total for key, c in sub.items()}
            for sid, sub in tube.items()}
    block_weights = {}
    for k, bk in blocks.items():
        norm = sum(bk.values())
        block_weights[k] = {key: c / norm for key, c in bk.items()}
    return EmpiricalMeasure(
        weights=weights, block_weights=block_weights, tube_weights=tube,
        source={"kind": "birkhoff", "orbits": len(initial_points),
                "horizon": horizon, "burn_in": burn_in, "dropped": dropped,
                "rng_seed": rng_seed})


def synthetic_tower_measure(gp, sigma_id: int = 0, base: float = 0.5,
                            mass: float = 0.1, exit_rule: str = "K0",
                            n_hi: int | None = None) -> EmpiricalMeasure:
    """Exact tower-consistent measure: layer masses a_n ~ base^n.

    Mass ``mass`` is spread over the materialized layers with geometric
    weights and uniform conditionals over the proper cells; the remainder
    sits Outside.  Tube weights follow the Kac relation
    mu(tilde_D_n) = a_n (t- + t+) with t+- = max(1, K0 n) and are rescaled
    together with the layer masses if they would exceed 0.9.
    """
    prof = gp.profiles[sigma_id]
    rp = gp.refined[sigma_id]
    n_lo = prof.n0 + 1
    n_hi = rp.n_max if n_hi is None else n_hi
    ns = list(range(n_lo, n_hi + 1))
    raw = np.array([base ** n for n in ns])
    a = mass * raw / raw.sum()
    t_side = np.array([max(1.0, prof.K0 * n) for n in ns])
    tube_mass = float(np.sum(a * 2.0 * t_side))
    if tube_mass > 0.9:
        scale = 0.9 / tube_mass
        a = a * scale
    weights: dict = {}
    tube: dict = {}
    for n, an, ts in zip(ns, a, t_side):
        count = rp.cell_count(n)
        for j in range(count):
            weights[layer_cell(sigma_id, n, j)] = an / count
        tube.setdefault(sigma_id, {})[n] = an * 2.0 * ts
    weights[OUTSIDE] = 1.0 - float(np.sum(a))
    return EmpiricalMeasure(weights=weights, tube_weights=tube,
                            source={"kind": "synthetic", "base": base,
                                    "mass": float(np.sum(a)),
                                    "exit_rule": exit_rule})


def synthetic_itineraries(kind: str, count: int, length: int,
                          rng_seed: int = 0) -> list:
    """Symbolic toy itineraries: 'bernoulli' (fair coin) or 'period2'."""
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(count):
        if kind == "bernoulli":
            seq = [("sym", int(b)) for b in rng.integers(0, 2, size=length)]
        elif kind == "period2":
            start = int(rng.integers(0, 2))
            seq = [("sym", (start + i) % 2) for i in range(length)]
        else:
            raise ValueError(f"unknown synthetic itinerary kind {kind!r}")
        out.append(seq)
    return out
