"""Experiment configuration: versioned JSON schema and the build pipeline.

Unknown keys are errors (no silent misconfiguration) and the rng seed is
mandatory: runs must be reproducible from the config alone.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .fields import FieldSpec
from .partition import assemble_global, build_refined, build_regular
from .singularity import build_profile
from .tube import compute_N0

SCHEMA_VERSION = 1

_FIELD_KEYS = {
    "linear_saddle": {"kind", "lambda_u", "lambda_s", "integ_tol", "max_step"},
    "lorenz": {"kind", "sigma", "rho", "b", "integ_tol", "max_step"},
    "perturbed_linear": {"kind", "matrix", "amp", "integ_tol", "max_step"},
}
_SING_KEYS = {"seed", "r", "beta1", "n_max"}
_PART_KEYS = {"L", "beta", "samples_per_layer", "n_max", "regular_cover",
              "cover_samples", "cover_cell_cap", "truncation_N"}
_MEAS_KEYS = {"orbit_count", "horizon", "burn_in", "k_max", "rtol",
              "initial_points"}
_TOP_KEYS = {"version", "field", "box", "singularities", "partition",
             "measure", "rng_seed", "out_dir"}


def _check_keys(doc: dict, allowed: set, where: str):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")


def load_config(path_or_dict) -> dict:
    if isinstance(path_or_dict, dict):
        doc = path_or_dict
    else:
        with open(path_or_dict) as fh:
            doc = json.load(fh)
    _check_keys(doc, _TOP_KEYS, "top level")
    if doc.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"version: expected {SCHEMA_VERSION}, "
                          f"got {doc.get('version')!r}")
    if "rng_seed" not in doc:
        raise ConfigError("rng_seed: mandatory (no entropy from the environment)")
    if "field" not in doc:
        raise ConfigError("field: missing")
    fdoc = doc["field"]
    kind = fdoc.get("kind")
    if kind not in _FIELD_KEYS:
        raise ConfigError(f"field.kind: unknown kind {kind!r}")
    _check_keys(fdoc, _FIELD_KEYS[kind], "field")
    if "box" not in doc:
        raise ConfigError("box: missing")
    _check_keys(doc["box"], {"lo", "hi"}, "box")
    lo, hi = doc["box"].get("lo"), doc["box"].get("hi")
    if lo is None or hi is None or len(lo) != len(hi):
        raise ConfigError("box: lo and hi must be same-length vectors")
    for i, sdoc in enumerate(doc.get("singularities", [])):
        _check_keys(sdoc, _SING_KEYS, f"singularities[{i}]")
        if "seed" not in sdoc:
            raise ConfigError(f"singularities[{i}].seed: missing")
    _check_keys(doc.get("partition", {}), _PART_KEYS, "partition")
    _check_keys(doc.get("measure", {}), _MEAS_KEYS, "measure")
    return doc


def field_from_config(doc: dict) -> FieldSpec:
    fdoc = doc["field"]
    kw = {}
    if "integ_tol" in fdoc:
        kw["integ_tol"] = float(fdoc["integ_tol"])
    if "max_step" in fdoc:
        kw["max_step"] = float(fdoc["max_step"])
    kind = fdoc["kind"]
    if kind == "linear_saddle":
        return FieldSpec.linear_saddle(fdoc.get("lambda_u", 1.0),
                                       fdoc.get("lambda_s", 1.0), **kw)
    if kind == "lorenz":
        return FieldSpec.lorenz(fdoc.get("sigma", 10.0), fdoc.get("rho", 28.0),
                                fdoc.get("b", 8.0 / 3.0), **kw)
    return FieldSpec.perturbed_linear(np.asarray(fdoc["matrix"], dtype=float),
                                      fdoc.get("amp", 0.0), **kw)


@dataclass
class Experiment:
    config: dict
    spec: FieldSpec
    profiles: list
    refined: list
    cover: object
    gp: object
    n0_parts: dict = field(default_factory=dict)


def build_experiment(doc: dict, skip_cover: bool = False) -> Experiment:
    """Run the full build pipeline described by a validated config."""
    doc = load_config(doc)
    spec = field_from_config(doc)
    seed = int(doc["rng_seed"])
    part = doc.get("partition", {})
    beta = float(part.get("beta", 0.02))

    profiles = []
    for i, sdoc in enumerate(doc.get("singularities", [])):
        profiles.append(build_profile(
            spec, sdoc["seed"], r=sdoc.get("r"), beta1=sdoc.get("beta1"),
            rng_seed=seed + 100 * i))

    n0_parts = {}
    L = part.get("L")
    if L is None:
        n0_parts = compute_N0(spec, beta=beta, rng_seed=seed)
        L = n0_parts["N0"]
    L = float(L)

    refined = []
    for i, (prof, sdoc) in enumerate(zip(profiles,
                                         doc.get("singularities", []))):
        refined.append(build_refined(
            spec, prof, L=L, beta=beta,
            samples_per_layer=int(part.get("samples_per_layer", 256)),
            n_max=sdoc.get("n_max"), rng_seed=seed + 17 * i, sigma_id=i,
            N0=n0_parts.get("N0")))

    box_lo = np.asarray(doc["box"]["lo"], dtype=float)
    box_hi = np.asarray(doc["box"]["hi"], dtype=float)
    cover = None
    if part.get("regular_cover", "flowbox") == "flowbox" and not skip_cover:
        cover = build_regular(
            spec, profiles, beta=beta, L=L, box_lo=box_lo, box_hi=box_hi,
            sample_count=int(part.get("cover_samples", 8000)),
            cell_cap=int(part.get("cover_cell_cap", 6000)), rng_seed=seed)
    gp = assemble_global(spec, profiles, refined, cover, box_lo, box_hi)
    return Experiment(config=doc, spec=spec, profiles=profiles,
                      refined=refined, cover=cover, gp=gp,
                      n0_parts=n0_parts)


def fmt(x) -> str:
    """Floats with 17 significant digits for bit-exact round trips."""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def dump_json(doc, path):
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer, np.bool_)):
            return o.item()
        raise TypeError(f"not serializable: {type(o)}")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")
