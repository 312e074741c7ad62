"""Run-config parsing, normalization, and hashing.

A run config is one JSON document::

    {
      "problem": "p1" | {"operators": [...] | "countable": {...},
                          "anchor": [...], "x0": [...], "witness": [...]},
      "variant": {"algorithm": "static", "family": [{"indices": [1], "weight": 0.5}, ...]},
      "steering": {"family": "power-law", "c": 1.0, "p": 1.0},
      "max_iter": 100000,
      "record_every": 100,
      "seed": 0,
      "output": "out/run-a"
    }

``parse_config`` turns the document into live objects, raising
:class:`ConfigError` whose message names the offending field.
``normalized_config`` renders the parsed objects back into a canonical
document (shipped problems expanded, defaults filled); re-parsing it yields
an equivalent config, and its SHA-256 prefix is the run's config hash.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .operators import (
    AffineSubspace,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Identity,
    Operator,
    RelaxedProjection,
)
from .problems import get_problem, make_shrinking_halfspaces
from .solvers import (
    AlgorithmVariant,
    CombettesSimultaneous,
    FullySimultaneous,
    HalpernWittman,
    InfiniteStaticSA,
    ProblemSpec,
    QuasiDynamicSA,
    SimultaneousSA,
    StaticProjectionSA,
    StaticSA,
)
from .steering import HarmonicShifted, PowerLaw, SteeringSequence, UserTable
from .strings import CountableFamily, StringFamily

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "parse_config",
    "normalized_config",
    "config_hash",
    "build_operator",
    "build_family",
    "build_steering",
    "build_variant",
]


class ConfigError(ValueError):
    """A config document failed validation; the message names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}.{key}", "required field is missing")
    return doc[key]


def _as_dict(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {type(value).__name__}")
    return value


def _as_list(value, path: str) -> list:
    if not isinstance(value, list):
        raise ConfigError(path, f"expected a list, got {type(value).__name__}")
    return value


def _wrap(path: str, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def build_operator(doc, path: str) -> Operator:
    doc = _as_dict(doc, path)
    kind = _need(doc, "kind", path)
    if kind == "halfspace":
        return _wrap(path, Halfspace, _need(doc, "a", path), _need(doc, "b", path))
    if kind == "hyperplane":
        return _wrap(path, Hyperplane, _need(doc, "a", path), _need(doc, "b", path))
    if kind == "box":
        return _wrap(path, Box, _need(doc, "lo", path), _need(doc, "hi", path))
    if kind == "ball":
        return _wrap(path, Ball, _need(doc, "center", path),
                     _need(doc, "radius", path))
    if kind == "affine":
        rows = _as_list(_need(doc, "rows", path), f"{path}.rows")
        pairs = []
        for j, row in enumerate(rows):
            row = _as_dict(row, f"{path}.rows[{j}]")
            pairs.append((
                _need(row, "a", f"{path}.rows[{j}]"),
                _need(row, "b", f"{path}.rows[{j}]"),
            ))
        return _wrap(path, AffineSubspace, pairs)
    if kind == "relaxed":
        inner = build_operator(_need(doc, "inner", path), f"{path}.inner")
        return _wrap(path, RelaxedProjection, inner, _need(doc, "alpha", path))
    if kind == "identity":
        return _wrap(path, Identity, _need(doc, "dim", path))
    raise ConfigError(f"{path}.kind", f"unknown operator kind {kind!r}")


def build_family(doc, path: str) -> StringFamily:
    entries = _as_list(doc, path)
    strings = []
    weights = []
    for j, entry in enumerate(entries):
        entry = _as_dict(entry, f"{path}[{j}]")
        strings.append(tuple(_as_list(_need(entry, "indices", f"{path}[{j}]"),
                                      f"{path}[{j}].indices")))
        weights.append(_need(entry, "weight", f"{path}[{j}]"))
    return _wrap(path, StringFamily, tuple(strings), tuple(weights))


def build_countable(doc, path: str) -> CountableFamily:
    doc = _as_dict(doc, path)
    kind = _need(doc, "kind", path)
    if kind != "geometric-singletons":
        raise ConfigError(f"{path}.kind", f"unknown countable family kind {kind!r}")
    ops = _as_dict(_need(doc, "operators", path), f"{path}.operators")
    gen = _need(ops, "generator", f"{path}.operators")
    if gen != "shrinking-halfspace":
        raise ConfigError(
            f"{path}.operators.generator", f"unknown generator {gen!r}"
        )
    return _wrap(
        path,
        make_shrinking_halfspaces,
        _need(ops, "a", f"{path}.operators"),
        _need(ops, "b", f"{path}.operators"),
        _need(doc, "ratio", path),
        _need(doc, "epsilon", path),
        ops.get("coefficient", 1.0),
    )


def build_steering(doc, path: str) -> SteeringSequence:
    if doc is None:
        return PowerLaw()
    doc = _as_dict(doc, path)
    family = _need(doc, "family", path)
    if family == "power-law":
        return _wrap(path, PowerLaw, doc.get("c", 1.0), doc.get("p", 1.0))
    if family == "harmonic-shifted":
        return _wrap(path, HarmonicShifted, doc.get("offset", 0))
    if family == "user-table":
        then = doc.get("then")
        tail = build_steering(then, f"{path}.then") if then is not None else PowerLaw()
        return _wrap(path, UserTable, _need(doc, "values", path), tail)
    raise ConfigError(
        f"{path}.family",
        f"{family!r} is not a steering sequence family "
        "(choose power-law, harmonic-shifted, or user-table)",
    )


def build_variant(doc, path: str) -> AlgorithmVariant:
    doc = _as_dict(doc, path)
    algorithm = _need(doc, "algorithm", path)
    if algorithm in ("static", "static-projection"):
        family = build_family(_need(doc, "family", path), f"{path}.family")
        cls = StaticProjectionSA if algorithm == "static-projection" else StaticSA
        return _wrap(path, cls, family)
    if algorithm == "quasi-dynamic":
        schedule = [
            build_family(f, f"{path}.schedule[{i}]")
            for i, f in enumerate(_as_list(_need(doc, "schedule", path),
                                           f"{path}.schedule"))
        ]
        return _wrap(path, QuasiDynamicSA, schedule)
    if algorithm == "simultaneous":
        schedule = [
            build_family(f, f"{path}.schedule[{i}]")
            for i, f in enumerate(_as_list(_need(doc, "schedule", path),
                                           f"{path}.schedule"))
        ]
        return _wrap(path, SimultaneousSA, schedule,
                     _need(doc, "outer_weights", path))
    if algorithm == "fully-simultaneous":
        return _wrap(path, FullySimultaneous, _need(doc, "weights", path))
    if algorithm == "halpern-wittman":
        return HalpernWittman()
    if algorithm == "infinite-static":
        return InfiniteStaticSA()
    if algorithm == "combettes":
        return CombettesSimultaneous()
    raise ConfigError(f"{path}.algorithm", f"unknown algorithm {algorithm!r}")


def build_problem(doc, path: str) -> ProblemSpec:
    if isinstance(doc, str):
        try:
            return get_problem(doc).spec
        except KeyError as exc:
            raise ConfigError(path, str(exc)) from exc
    doc = _as_dict(doc, path)
    has_ops = "operators" in doc
    has_countable = "countable" in doc
    if has_ops == has_countable:
        raise ConfigError(
            path, "provide exactly one of 'operators' / 'countable'"
        )
    kwargs = dict(
        anchor=_need(doc, "anchor", path),
        x0=doc.get("x0"),
        witness=doc.get("witness"),
        name=doc.get("name"),
    )
    if has_ops:
        ops = [
            build_operator(o, f"{path}.operators[{i}]")
            for i, o in enumerate(_as_list(doc["operators"], f"{path}.operators"))
        ]
        return _wrap(path, lambda: ProblemSpec(operators=ops, **kwargs))
    fam = build_countable(doc["countable"], f"{path}.countable")
    return _wrap(path, lambda: ProblemSpec(countable=fam, **kwargs))


@dataclass
class RunConfig:
    problem: ProblemSpec
    variant: AlgorithmVariant
    steering: SteeringSequence
    max_iter: int
    record_every: int
    seed: int
    output: str | None
    shipped_key: str | None

    def normalized(self) -> dict:
        return normalized_config(self)

    def hash(self) -> str:
        return config_hash(self.normalized())


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(str(path), "config file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    doc = _as_dict(doc, "config")
    known = {"problem", "variant", "steering", "max_iter", "record_every",
             "seed", "output"}
    for key in doc:
        if key not in known:
            raise ConfigError(f"config.{key}", "unknown field")
    shipped_key = doc["problem"] if isinstance(doc.get("problem"), str) else None
    problem = build_problem(_need(doc, "problem", "config"), "config.problem")
    variant = build_variant(_need(doc, "variant", "config"), "config.variant")
    steering = build_steering(doc.get("steering"), "config.steering")
    max_iter = doc.get("max_iter", 1000)
    record_every = doc.get("record_every", 100)
    seed = doc.get("seed", 0)
    for name, val in (("max_iter", max_iter), ("record_every", record_every),
                      ("seed", seed)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise ConfigError(f"config.{name}", f"expected an integer, got {val!r}")
    if max_iter < 1:
        raise ConfigError("config.max_iter", f"must be >= 1, got {max_iter}")
    if record_every < 1:
        raise ConfigError("config.record_every", f"must be >= 1, got {record_every}")
    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("config.output", f"expected a string, got {output!r}")
    return RunConfig(
        problem=problem,
        variant=variant,
        steering=steering,
        max_iter=max_iter,
        record_every=record_every,
        seed=seed,
        output=output,
        shipped_key=shipped_key,
    )


def normalized_config(cfg: RunConfig) -> dict:
    prob: dict = {}
    if cfg.problem.is_countable:
        prob["countable"] = cfg.problem.countable.describe()
    else:
        prob["operators"] = [op.describe() for op in cfg.problem.operators]
    prob["anchor"] = cfg.problem.anchor.tolist()
    if cfg.problem.x0 is not None:
        prob["x0"] = cfg.problem.x0.tolist()
    if cfg.problem.witness is not None:
        prob["witness"] = cfg.problem.witness.tolist()
    if cfg.problem.name is not None:
        prob["name"] = cfg.problem.name
    doc = {
        "problem": prob,
        "variant": cfg.variant.describe(),
        "steering": cfg.steering.describe(),
        "max_iter": cfg.max_iter,
        "record_every": cfg.record_every,
        "seed": cfg.seed,
    }
    if cfg.output is not None:
        doc["output"] = cfg.output
    return doc


def config_hash(normalized: dict) -> str:
    blob = json.dumps(normalized, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
