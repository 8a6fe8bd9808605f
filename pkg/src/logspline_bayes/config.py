"""Experiment configuration: one JSON document, schema-checked.

Unknown keys are rejected and numeric ranges are validated at parse time;
a parsed config serializes back to an equivalent document (round-trip
stable). Seeds enter only through the config or the --seed flag.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace

import jsonschema
import numpy as np

from .density import PiecewiseConstantDensity, Theta
from .entropy import DiscreteFamily
from .harness import RateBoundConstants, TruthSpec
from .splines import build_basis

SUBCOMMANDS = ("fit", "rate", "select", "bf", "entropy", "verify")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


@dataclass(frozen=True)
class Thresholds:
    band_H: float = 1.0
    band_mass: float = 0.9
    band_fraction: float = 0.8
    direction_fraction: float = 0.9
    slope_tol: float = 0.1


@dataclass(frozen=True)
class MemberConfig:
    kind: str
    probs: tuple[float, ...] | None = None
    edges: tuple[float, ...] | None = None
    q: int | None = None
    K: int | None = None
    theta: tuple[float, ...] | None = None


@dataclass(frozen=True)
class FamilyConfig:
    members: tuple[MemberConfig, ...]
    masses: tuple[float, ...]
    truth_member: int | None = None
    truth: MemberConfig | None = None


@dataclass(frozen=True)
class TailBoundConfig:
    r: float
    eps: float
    alpha: float
    n: int
    replications: int


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    master_seed: int = 0
    out_dir: str = "results"
    threads: int = 1
    plots: bool = True
    truth: TruthSpec | None = None
    indices: tuple[float, ...] = ()
    weights: tuple[float, ...] | None = None
    q: int = 4
    box_bound: float = 2.0
    knot_scale: float = 1.0
    log_factor: bool = False
    n_grid: tuple[int, ...] = ()
    replications: int = 20
    mcmc_draws: int = 1500
    is_samples: int = 1500
    thresholds: Thresholds = Thresholds()
    expected_direction: str | None = None
    gamma: float | None = None
    data_path: str | None = None
    family: FamilyConfig | None = None
    deltas: tuple[float, ...] = ()
    alphas: tuple[float, ...] = ()
    tail_bound: TailBoundConfig | None = None
    constants: RateBoundConstants | None = None


_NUMBER = {"type": "number"}
_POS_NUMBER = {"type": "number", "exclusiveMinimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}

_TRUTH_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["in_model", "smooth_analytic", "holder"]},
        "beta": _POS_NUMBER,
        "amplitude": _NUMBER,
        "hold_scale": _NUMBER,
        "theta": {"type": "array", "items": _NUMBER, "minItems": 2},
        "q": _POS_INT,
        "K": _POS_INT,
        "max_log_ratio": _POS_NUMBER,
    },
}

_THRESHOLDS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "band_H": {"type": "number", "minimum": 1},
        "band_mass": {"type": "number", "minimum": 0, "maximum": 1},
        "band_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "direction_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "slope_tol": _POS_NUMBER,
    },
}

_MEMBER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["step", "logspline"]},
        "probs": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
        "edges": {"type": "array", "items": _NUMBER, "minItems": 2},
        "q": _POS_INT,
        "K": _POS_INT,
        "theta": {"type": "array", "items": _NUMBER, "minItems": 2},
    },
}

_FAMILY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["members", "masses"],
    "properties": {
        "members": {"type": "array", "items": _MEMBER_SCHEMA, "minItems": 1},
        "masses": {"type": "array", "items": _POS_NUMBER, "minItems": 1},
        "truth_member": {"type": "integer", "minimum": 0},
        "truth": _MEMBER_SCHEMA,
    },
}

_TAIL_BOUND_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["r", "eps", "alpha", "n", "replications"],
    "properties": {
        "r": {"type": "number", "exclusiveMinimum": 2},
        "eps": _POS_NUMBER,
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "n": _POS_INT,
        "replications": {"type": "integer", "minimum": 100},
    },
}

_INDEX_TABLE = {"type": "array",
                "items": {"type": "array", "items": _NUMBER,
                          "minItems": 2, "maxItems": 2}}

_CONSTANTS_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["c", "j", "g", "l", "alpha", "h"],
    "properties": {
        "c": _POS_NUMBER,
        "j": {"type": "number", "minimum": 0},
        "g": {"type": "number", "minimum": 0},
        "l": _POS_NUMBER,
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "h": {"type": "number", "minimum": 1},
        "k": {"type": "number", "minimum": 1},
        "f": _POS_NUMBER,
        "E_by_index": _INDEX_TABLE,
        "mu_by_index": _INDEX_TABLE,
    },
}

_COMMON = {
    "experiment": {"enum": list(SUBCOMMANDS)},
    "master_seed": {"type": "integer", "minimum": 0},
    "out_dir": {"type": "string"},
    "threads": _POS_INT,
    "plots": {"type": "boolean"},
}

_MODEL_BLOCK = {
    "q": _POS_INT,
    "box_bound": {"type": "number", "minimum": 1},
    "knot_scale": _POS_NUMBER,
    "log_factor": {"type": "boolean"},
    "mcmc_draws": _POS_INT,
    "is_samples": {"type": "integer", "minimum": 100},
}

_GRID_BLOCK = {
    "truth": _TRUTH_SCHEMA,
    "indices": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0.5},
                "minItems": 1},
    "weights": {"type": "array", "items": _POS_NUMBER, "minItems": 1},
    "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
    "replications": _POS_INT,
    "thresholds": _THRESHOLDS_SCHEMA,
    "constants": _CONSTANTS_SCHEMA,
}


def _schema(extra: dict, required: list[str]) -> dict:
    return {
        "type": "object",
        "additionalProperties": False,
        "required": required,
        "properties": {**_COMMON, **extra},
    }


SCHEMAS = {
    "rate": _schema({**_MODEL_BLOCK, **_GRID_BLOCK},
                    ["experiment", "truth", "indices", "n_grid"]),
    "select": _schema({**_MODEL_BLOCK, **_GRID_BLOCK},
                      ["experiment", "truth", "indices", "n_grid"]),
    "bf": _schema({**_MODEL_BLOCK, **_GRID_BLOCK,
                   "expected_direction": {"enum": ["up", "down"]}},
                  ["experiment", "truth", "indices", "n_grid", "expected_direction"]),
    "fit": _schema({**_MODEL_BLOCK,
                    "gamma": {"type": "number", "exclusiveMinimum": 0.5},
                    "data_path": {"type": "string"}},
                   ["experiment", "gamma", "data_path"]),
    "entropy": _schema({"family": _FAMILY_SCHEMA,
                        "deltas": {"type": "array", "items": _POS_NUMBER, "minItems": 1},
                        "alphas": {"type": "array",
                                   "items": {"type": "number", "minimum": 0, "maximum": 1},
                                   "minItems": 1},
                        "tail_bound": _TAIL_BOUND_SCHEMA},
                       ["experiment", "family", "deltas", "alphas"]),
    "verify": _schema({}, ["experiment"]),
}


def _to_tuple(value):
    return None if value is None else tuple(value)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a JSON document and build the typed configuration."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    experiment = doc.get("experiment")
    if experiment not in SUBCOMMANDS:
        raise ConfigError(f"key 'experiment' must be one of {SUBCOMMANDS}, "
                          f"got {experiment!r}")
    try:
        jsonschema.validate(doc, SCHEMAS[experiment])
    except jsonschema.ValidationError as e:
        path = ".".join(str(p) for p in e.absolute_path) or "(top level)"
        raise ConfigError(f"config key {path}: {e.message}") from None

    kwargs: dict = {"experiment": experiment}
    for key in ("master_seed", "out_dir", "threads", "plots", "q", "box_bound",
                "knot_scale", "log_factor", "replications", "mcmc_draws",
                "is_samples", "expected_direction", "gamma", "data_path"):
        if key in doc:
            kwargs[key] = doc[key]
    for key in ("indices", "weights", "n_grid", "deltas", "alphas"):
        if key in doc:
            kwargs[key] = _to_tuple(doc[key])
    if "truth" in doc:
        t = dict(doc["truth"])
        kwargs["truth"] = TruthSpec(
            kind=t["kind"],
            beta_nominal=float(t.get("beta", 1.0)),
            amplitude=float(t.get("amplitude", 1.0)),
            hold_scale=float(t.get("hold_scale", 1.0)),
            theta=_to_tuple(t.get("theta")),
            q=int(t.get("q", 4)),
            K=int(t.get("K", 10)),
            max_log_ratio=float(t.get("max_log_ratio", 8.0)),
        )
    if "thresholds" in doc:
        kwargs["thresholds"] = Thresholds(**doc["thresholds"])
    if "family" in doc:
        f = doc["family"]
        members = tuple(
            MemberConfig(kind=m["kind"], probs=_to_tuple(m.get("probs")),
                         edges=_to_tuple(m.get("edges")), q=m.get("q"),
                         K=m.get("K"), theta=_to_tuple(m.get("theta")))
            for m in f["members"])
        truth_cfg = f.get("truth")
        kwargs["family"] = FamilyConfig(
            members=members, masses=_to_tuple(f["masses"]),
            truth_member=f.get("truth_member"),
            truth=None if truth_cfg is None else MemberConfig(
                kind=truth_cfg["kind"], probs=_to_tuple(truth_cfg.get("probs")),
                edges=_to_tuple(truth_cfg.get("edges")), q=truth_cfg.get("q"),
                K=truth_cfg.get("K"), theta=_to_tuple(truth_cfg.get("theta"))))
    if "tail_bound" in doc:
        kwargs["tail_bound"] = TailBoundConfig(**doc["tail_bound"])
    if "constants" in doc:
        block = dict(doc["constants"])
        for key in ("E_by_index", "mu_by_index"):
            if key in block:
                block[key] = tuple((float(g), float(v)) for g, v in block[key])
        kwargs["constants"] = RateBoundConstants(**block)

    cfg = ExperimentConfig(**kwargs)
    _semantic_checks(cfg)
    return cfg


def _semantic_checks(cfg: ExperimentConfig) -> None:
    if cfg.experiment in ("rate", "select", "bf"):
        if cfg.weights is not None and len(cfg.weights) != len(cfg.indices):
            raise ConfigError("key 'weights' must match 'indices' in length")
        if any(b <= a for a, b in zip(cfg.indices, cfg.indices[1:])):
            raise ConfigError("key 'indices' must be strictly increasing")
        if any(b <= a for a, b in zip(cfg.n_grid, cfg.n_grid[1:])):
            raise ConfigError("key 'n_grid' must be strictly increasing")
        if cfg.q < max(cfg.indices):
            raise ConfigError("key 'q' must be at least the largest index")
        if len(cfg.n_grid) < 3:
            raise ConfigError("key 'n_grid' needs at least 3 points "
                              "(slope fits are meaningless below that)")
        if cfg.truth.beta_nominal not in cfg.indices:
            raise ConfigError("key 'truth.beta' must appear among 'indices'")
    if cfg.experiment == "bf" and len(cfg.indices) != 2:
        raise ConfigError("key 'indices' must list exactly two models for 'bf'")
    if cfg.experiment == "entropy":
        fam = cfg.family
        if len(fam.masses) != len(fam.members):
            raise ConfigError("key 'family.masses' must match members in length")
        if sum(fam.masses) > 1.0 + 1e-9:
            raise ConfigError("key 'family.masses' must sum to at most 1")
        if (fam.truth_member is None) == (fam.truth is None):
            raise ConfigError("exactly one of 'family.truth_member' and "
                              "'family.truth' must be given")
        if fam.truth_member is not None and fam.truth_member >= len(fam.members):
            raise ConfigError("key 'family.truth_member' out of range")


def load_config(path: str, seed: int | None = None, out_dir: str | None = None,
                threads: int | None = None) -> ExperimentConfig:
    """Read, validate and apply command-line overrides."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    cfg = parse_config(doc)
    if seed is not None:
        cfg = replace(cfg, master_seed=seed)
    if out_dir is not None:
        cfg = replace(cfg, out_dir=out_dir)
    if threads is not None:
        cfg = replace(cfg, threads=threads)
    return cfg


def _prune(value):
    if isinstance(value, dict):
        return {k: _prune(v) for k, v in value.items() if v is not None}
    if isinstance(value, (tuple, list)):
        return [_prune(v) for v in value]
    return value


def serialize_config(cfg: ExperimentConfig) -> dict:
    """Emit the subcommand's keys as a plain JSON-compatible document."""
    allowed = set(SCHEMAS[cfg.experiment]["properties"])
    doc = {}
    for f in fields(cfg):
        if f.name not in allowed:
            continue
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "truth":
            value = {"kind": value.kind, "beta": value.beta_nominal,
                     "amplitude": value.amplitude, "hold_scale": value.hold_scale,
                     "theta": value.theta, "q": value.q, "K": value.K,
                     "max_log_ratio": value.max_log_ratio}
        elif f.name in ("thresholds", "tail_bound", "constants"):
            value = asdict(value)
        elif f.name == "family":
            value = {"members": [asdict(m) for m in value.members],
                     "masses": value.masses, "truth_member": value.truth_member,
                     "truth": None if value.truth is None else asdict(value.truth)}
        doc[f.name] = _prune(value)
    return doc


def _build_member(m: MemberConfig):
    if m.kind == "step":
        if m.probs is None:
            raise ConfigError("step member needs 'probs'")
        edges = m.edges if m.edges is not None \
            else tuple(np.linspace(0.0, 1.0, len(m.probs) + 1))
        return PiecewiseConstantDensity(np.asarray(edges), np.asarray(m.probs))
    if m.kind == "logspline":
        if m.q is None or m.K is None or m.theta is None:
            raise ConfigError("logspline member needs 'q', 'K' and 'theta'")
        basis = build_basis(m.q, m.K)
        theta = np.asarray(m.theta, dtype=float)
        if theta.size != basis.dimension:
            raise ConfigError(f"logspline member theta needs length {basis.dimension}")
        from .density import LogSplineDensity
        return LogSplineDensity(basis, Theta(theta - theta.mean()))
    raise ConfigError(f"unknown member kind {m.kind!r}")


def build_family(cfg: FamilyConfig) -> DiscreteFamily:
    members = [_build_member(m) for m in cfg.members]
    truth = members[cfg.truth_member] if cfg.truth_member is not None \
        else _build_member(cfg.truth)
    return DiscreteFamily(members, np.asarray(cfg.masses, dtype=float), truth)
