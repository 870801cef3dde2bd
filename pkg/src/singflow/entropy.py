"""Entropy machinery: Shannon/conditional/block entropies and every bound.

The finite-entropy criterion for countable partitions is realized as a
numerical oracle over the two-parameter exponential family x_n = e^{-a-bn}
(the Lagrange form); partition entropies are then compared against it and
against the refinement-chain bounds built from the partition constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import InsufficientData
from .measures import EmpiricalMeasure


# ----------------------------------------------------------------------
# elementary entropies

def _weights_of(m) -> dict:
    return m.weights if isinstance(m, EmpiricalMeasure) else dict(m)


def shannon_entropy(m) -> float:
    """-sum w log w (natural log, 0 log 0 = 0)."""
    total = 0.0
    for w in _weights_of(m).values():
        if w > 0.0:
            total -= w * math.log(w)
    return total


def pushforward(m, coarse_map) -> dict:
    out: dict = {}
    for eid, w in _weights_of(m).items():
        key = coarse_map(eid)
        out[key] = out.get(key, 0.0) + w
    return out


def conditional_entropy(fine, coarse_map) -> float:
    """H(fine | coarse) = H(fine) - H(coarse map pushforward).

    Equals the weighted entropy of the conditional distributions whenever
    the map is constant on fine elements, which it is by construction.
    """
    return shannon_entropy(fine) - shannon_entropy(pushforward(fine, coarse_map))


# ----------------------------------------------------------------------
# block entropies

def _sequences(itineraries):
    seqs = []
    for it in itineraries:
        seqs.append(it.ids if hasattr(it, "ids") else list(it))
    return seqs


def block_entropy_rate(itineraries, k_max: int, min_occupancy: float = 50.0
                       ) -> dict:
    """Plug-in block entropies with Miller-Madow correction.

    Returns per-k entropies H_k, the H_k/k sequence and the difference
    sequence H_{k+1} - H_k; the extrapolated rate is the last difference
    (the preferred estimator on heavy-tailed alphabets).
    """
    seqs = _sequences(itineraries)
    hs, h_over_k, occ = [], [], []
    for k in range(1, k_max + 1):
        counts: dict = {}
        n_windows = 0
        for seq in seqs:
            for i in range(len(seq) - k + 1):
                key = tuple(seq[i:i + k])
                counts[key] = counts.get(key, 0.0) + 1.0
                n_windows += 1
        if n_windows == 0:
            raise InsufficientData(f"no windows of length {k}")
        probs = np.array(list(counts.values())) / n_windows
        h_plug = float(-np.sum(probs * np.log(probs)))
        h_mm = h_plug + (len(counts) - 1) / (2.0 * n_windows)
        hs.append(h_mm)
        h_over_k.append(h_mm / k)
        occ.append(n_windows / len(counts))
    if occ[-1] < min_occupancy:
        raise InsufficientData(
            f"average occupancy {occ[-1]:.1f} < {min_occupancy} at k={k_max}")
    diffs = [hs[i + 1] - hs[i] for i in range(len(hs) - 1)]
    h_rate = diffs[-1] if diffs else hs[0]
    return {"H": hs, "H_over_k": h_over_k, "diffs": diffs,
            "h": float(max(0.0, h_rate)), "occupancy": occ}


def block_entropy_rate_mapped(block_weights: dict, coarse_map=None) -> dict:
    """Block-entropy difference estimator from stored k-block weights.

    ``coarse_map`` (optional) is applied elementwise to the block symbols,
    which is how truncated-partition rates are produced from the fine data.
    """
    if not block_weights:
        raise InsufficientData("measure carries no block weights")
    hs = {}
    for k, table in block_weights.items():
        if coarse_map is not None:
            merged: dict = {}
            for key, w in table.items():
                mk = tuple(coarse_map(e) for e in key)
                merged[mk] = merged.get(mk, 0.0) + w
            table = merged
        hs[k] = shannon_entropy(table)
    ks = sorted(hs)
    if len(ks) < 2:
        raise InsufficientData("need k-blocks for at least two k")
    k1, k0 = ks[-1], ks[-2]
    return {"H": [hs[k] for k in ks],
            "h": float(max(0.0, (hs[k1] - hs[k0]) / (k1 - k0)))}


# ----------------------------------------------------------------------
# the finite-entropy oracle

def mane_bound(N: float, n_grid: int = 4000) -> float:
    """Sup of -sum x_n log x_n over sub-probability sequences, sum n x_n <= N.

    The optimizer has the exponential form x_n = e^{-a-bn}; the two dual
    parameters are solved numerically on the n_grid truncation.  When the
    moment constraint alone is binding a = 1; otherwise the mass constraint
    binds too and the family is the geometric distribution of mean N.
    """
    if N <= 0:
        return 0.0
    n = np.arange(1, n_grid + 1, dtype=float)

    def moment_only(beta):
        x = np.exp(-1.0 - beta * n)
        return float(np.sum(n * x)) - N

    lo, hi = 1e-12, 800.0
    if moment_only(lo) < 0:
        # even beta ~ 0 cannot reach the budget on this grid: enlarge grid
        return mane_bound(N, n_grid * 4)
    beta = brentq(moment_only, lo, hi, xtol=1e-14)
    x = np.exp(-1.0 - beta * n)
    if float(np.sum(x)) <= 1.0:
        return float(np.sum(x) + beta * N)
    # mass constraint active: geometric with mean N (requires N > 1 here)
    q = 1.0 - 1.0 / N
    xg = (1.0 - q) * q ** (n - 1.0)
    xg = xg[xg > 0]
    return float(-np.sum(xg * np.log(xg)))


# ----------------------------------------------------------------------
# sigma-local coarse/refined entropies

def coarse_map_for(sigma_id: int):
    """Global ids -> the coarse partition algebra of one singularity."""
    def f(eid):
        if eid[0] == "layer" and eid[1] == sigma_id:
            return ("C", eid[2])
        if eid[0] == "tail" and eid[1] == sigma_id:
            return ("Ctail",)
        return ("comp",)
    return f


def refined_map_for(sigma_id: int):
    """Global ids -> the refined partition algebra of one singularity."""
    def f(eid):
        if eid[0] in ("layer", "tail", "bminus", "bplus") and eid[1] == sigma_id:
            return eid
        return ("comp",)
    return f


def coarse_entropy(m, sigma_id: int) -> float:
    return shannon_entropy(pushforward(m, coarse_map_for(sigma_id)))


def refined_entropy(m, sigma_id: int) -> float:
    return shannon_entropy(pushforward(m, refined_map_for(sigma_id)))


# ----------------------------------------------------------------------
# inequality reports

def verify_tower_sums(m: EmpiricalMeasure, profile, sigma_id: int,
                      N_list, allowance: float = 0.10) -> dict:
    """Sum n mu(C_n) vs 1/K0 and tail masses vs 1/(K0 N)."""
    a = m.layer_masses(sigma_id)
    s = sum(n * w for n, w in a.items())
    bound = 1.0 / profile.K0
    report = {"sum_n_mu": s, "sum_bound": bound,
              "sum_pass": bool(s <= bound * (1 + allowance)),
              "tails": []}
    for N in N_list:
        tail = sum(w for n, w in a.items() if n > N)
        tb = 1.0 / (profile.K0 * N)
        report["tails"].append({"N": int(N), "tail": tail, "bound": tb,
                                "pass": bool(tail <= tb * (1 + allowance))})
    report["pass"] = report["sum_pass"] and \
        all(t["pass"] for t in report["tails"])
    return report


def entropy_bound_check(m: EmpiricalMeasure, rp, sigma_id: int,
                        allowance: float = 0.10, tol: float = 1e-9) -> dict:
    """H(C_sigma) vs the oracle H1 and H(A_sigma) vs H2.

    H1 is the finite-entropy oracle at moment budget 1/K0; H2 adds the
    conditional refinement cost log c1 + (log L'')/K0 with the certified
    cardinality constant c1.
    """
    prof = rp.profile
    h1 = mane_bound(1.0 / prof.K0)
    c1 = rp.cert_c1()
    log_lpp = math.log(rp.Lpp)
    h2 = math.log(c1) + log_lpp / prof.K0 + h1

    h_c = coarse_entropy(m, sigma_id)
    h_a = refined_entropy(m, sigma_id)
    h_cond = h_a - h_c
    a = m.layer_masses(sigma_id)
    sum_n_mu = sum(n * w for n, w in a.items())
    cond_bound_direct = sum(
        w * math.log(max(1, rp.cell_count(n))) for n, w in a.items()
        if n <= rp.n_max)
    cond_bound_chain = math.log(c1) * sum(a.values()) + log_lpp * sum_n_mu \
        if a else 0.0
    cond_bound_k0 = math.log(c1) + log_lpp / prof.K0

    slack = 1.0 + allowance
    return {"H1": h1, "H_C": h_c, "pass_C": bool(h_c <= h1 * slack + tol),
            "H2": h2, "H_A": h_a, "pass_A": bool(h_a <= h2 * slack + tol),
            "H_A_given_C": h_cond,
            "cond_bound_direct": cond_bound_direct,
            "cond_bound_chain": cond_bound_chain,
            "cond_bound_K0": cond_bound_k0,
            "pass_cond": bool(h_cond <= cond_bound_k0 * slack + tol),
            "c1": c1, "log_Lpp": log_lpp,
            "pass": bool(h_c <= h1 * slack + tol
                         and h_a <= h2 * slack + tol
                         and h_cond <= cond_bound_k0 * slack + tol)}


def truncation_gap(m: EmpiricalMeasure, gp, N: int, tol: float = 1e-9,
                   allowance: float = 0.0) -> dict:
    """Measured H(A | A_N) against L2 sum mu(O^N) + u(N), component-wise.

    u(N) = log(c1)/(K0 N) + mu(C^N)|log mu(C^N)| + the exact small-mass
    tail sum (the e^{-N/2}-order term), all computed from the measured
    layer masses rather than worst-cased.
    """
    merge = gp.truncation_map(N)
    h_cond = conditional_entropy(m, merge)

    bound = 0.0
    parts = []
    for sid, (prof, rp) in enumerate(zip(gp.profiles, gp.refined)):
        c1 = rp.cert_c1()
        l2 = (math.log(rp.Lpp) + 1.0) / prof.K0
        mu_on = m.mu_O_N(sid, N)
        a = m.layer_masses(sid)
        tail_masses = {n: w for n, w in a.items() if n > N}
        mu_cn = sum(tail_masses.values())
        u1 = math.log(c1) / (prof.K0 * N)
        u2 = mu_cn * abs(math.log(mu_cn)) if mu_cn > 0 else 0.0
        u3 = sum(math.exp(-0.5 * n) * math.sqrt(w) * abs(math.log(w))
                 for n, w in tail_masses.items()
                 if 0 < w <= math.exp(-n))
        parts.append({"sigma_id": sid, "L2": l2, "mu_O_N": mu_on,
                      "u1_logc1": u1, "u2_mass": u2, "u3_tail": u3})
        bound += l2 * mu_on + u1 + u2 + u3

    report = {"N": int(N), "H_cond": h_cond, "bound": bound,
              "margin": bound - h_cond, "parts": parts,
              "pass": bool(h_cond <= bound * (1 + allowance) + tol)}

    if m.block_weights:
        try:
            h_fine = block_entropy_rate_mapped(m.block_weights)["h"]
            h_trunc = block_entropy_rate_mapped(m.block_weights, merge)["h"]
            gap = max(0.0, h_fine - h_trunc)
            report["h_rate_fine"] = h_fine
            report["h_rate_truncated"] = h_trunc
            report["h_rate_gap"] = gap
            report["pass_rate"] = bool(gap <= bound * (1 + allowance) + tol)
            report["pass"] = report["pass"] and report["pass_rate"]
        except InsufficientData:
            pass
    return report


# ----------------------------------------------------------------------
# shadowed-set spanning bound

def shadowed_entropy_bound(lengths, epsilon: float, C_geom: float,
                           n_list, zero_threshold: float = 0.01) -> dict:
    """Spanning-count rate for a set shadowed by one-dimensional curves.

    count(n) = (C_geom / eps^2) * sum_{|j| <= n} lengths(j); the rate is
    the tail slope of log count over the n grid.  Rate ~ 0 iff the total
    length grows sub-exponentially.
    """
    if callable(lengths):
        ell = lengths
    else:
        table = dict(lengths)
        ell = lambda j: table.get(j, 0.0)
    n_list = sorted(int(n) for n in n_list)
    counts, series = [], []
    for n in n_list:
        total = sum(ell(j) for j in range(-n, n + 1))
        c = (C_geom / epsilon ** 2) * total
        counts.append(c)
        series.append(math.log(c) / n if c > 0 else float("-inf"))
    if len(n_list) >= 2 and counts[-1] > 0 and counts[-2] > 0:
        rate = (math.log(counts[-1]) - math.log(counts[-2])) / \
            (n_list[-1] - n_list[-2])
    else:
        rate = series[-1]
    return {"n_list": n_list, "counts": counts, "rate_series": series,
            "rate": rate, "flag_zero": bool(abs(rate) <= zero_threshold)}


def lemma_decay_lengths(passages, C: float, lam_tilde: float,
                        baseline: float = 0.0) -> dict:
    """Curve lengths decaying like C * lam^-(t_exit - j) around each passage.

    ``passages`` is a list of (center_j, t_minus, t_plus) integer triples;
    between passages the length is the constant ``baseline``.
    """
    table: dict[int, float] = {}
    for center, tm, tp in passages:
        for j in range(center - int(tm), center + int(tp) + 1):
            off = j - center
            decay = lam_tilde ** -(tp - off) if off >= 0 else \
                lam_tilde ** -(tm + off)
            table[j] = table.get(j, 0.0) + C * decay
    if baseline > 0.0:
        lo = min(table) if table else 0
        hi = max(table) if table else 0
        for j in range(lo, hi + 1):
            table.setdefault(j, baseline)
    return table


@dataclass
class EntropyReport:
    """Aggregated bound ledger for one experiment."""

    H_C: float = 0.0
    H_A: float = 0.0
    h_rate: float | None = None
    bounds: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)

    def passed(self) -> bool:
        return all(v.get("pass", True) for v in self.bounds.values()
                   if isinstance(v, dict))
