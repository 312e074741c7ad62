"""Config schema: building, validation errors, normalization, hashing."""

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from strav.config import (
    ConfigError,
    build_operator,
    build_steering,
    build_variant,
    config_hash,
    load_config,
    normalized_config,
    parse_config,
)
from strav.operators import (
    AffineSubspace,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Identity,
    RelaxedProjection,
)
from strav.solvers import HalpernWittman, QuasiDynamicSA, StaticSA
from strav.steering import HarmonicShifted, PowerLaw, UserTable


def minimal_doc(**extra):
    doc = {
        "problem": "p1",
        "variant": {
            "algorithm": "static",
            "family": [{"indices": [1, 2], "weight": 1.0}],
        },
    }
    doc.update(extra)
    return doc


def test_shipped_problem_shorthand():
    cfg = parse_config(minimal_doc())
    assert cfg.problem.name == "p1"
    assert cfg.problem.operator_count == 2
    assert cfg.shipped_key == "p1"
    assert_array_equal(cfg.problem.anchor, [2.0, 2.0])


def test_defaults_applied():
    cfg = parse_config(minimal_doc())
    assert cfg.max_iter == 1000
    assert cfg.record_every == 100
    assert cfg.seed == 0
    assert isinstance(cfg.steering, PowerLaw)
    assert cfg.output is None


def test_every_operator_kind_builds():
    docs = [
        ({"kind": "halfspace", "a": [1.0, 0.0], "b": 0.0}, Halfspace),
        ({"kind": "hyperplane", "a": [1.0, 1.0], "b": 2.0}, Hyperplane),
        ({"kind": "box", "lo": [0.0, 0.0], "hi": [1.0, 1.0]}, Box),
        ({"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}, Ball),
        ({"kind": "affine", "rows": [{"a": [1.0, -1.0], "b": 0.0}]},
         AffineSubspace),
        ({"kind": "relaxed", "alpha": 0.5,
          "inner": {"kind": "halfspace", "a": [1.0, 0.0], "b": 0.0}},
         RelaxedProjection),
        ({"kind": "identity", "dim": 2}, Identity),
    ]
    for doc, cls in docs:
        assert isinstance(build_operator(doc, "op"), cls)


def test_unknown_operator_kind_names_the_path():
    with pytest.raises(ConfigError) as err:
        build_operator({"kind": "simplex"}, "config.problem.operators[0]")
    assert "config.problem.operators[0]" in str(err.value)
    assert "simplex" in str(err.value)


def test_operator_value_errors_carry_the_path():
    with pytest.raises(ConfigError) as err:
        build_operator({"kind": "halfspace", "a": [0.0, 0.0], "b": 0.0}, "op")
    assert str(err.value).startswith("op:")


def test_explicit_problem_document():
    doc = minimal_doc()
    doc["problem"] = {
        "operators": [
            {"kind": "halfspace", "a": [1.0, 0.0], "b": 0.0},
            {"kind": "halfspace", "a": [0.0, 1.0], "b": 0.0},
        ],
        "anchor": [2.0, 2.0],
        "x0": [1.0, -1.0],
        "witness": [-1.0, -1.0],
        "name": "corner",
    }
    cfg = parse_config(doc)
    assert cfg.problem.name == "corner"
    assert cfg.shipped_key is None
    assert_array_equal(cfg.problem.x0, [1.0, -1.0])


def test_problem_requires_exactly_one_family_source():
    doc = minimal_doc()
    doc["problem"] = {"anchor": [0.0, 0.0]}
    with pytest.raises(ConfigError) as err:
        parse_config(doc)
    assert "operators" in str(err.value) and "countable" in str(err.value)


def test_countable_problem_document():
    doc = {
        "problem": {
            "countable": {
                "kind": "geometric-singletons",
                "ratio": 0.5,
                "epsilon": 0.001953125,
                "operators": {
                    "generator": "shrinking-halfspace",
                    "a": [1.0, 0.0],
                    "b": 1.0,
                },
            },
            "anchor": [3.0, 0.0],
            "name": "custom-countable",
        },
        "variant": {"algorithm": "infinite-static"},
    }
    cfg = parse_config(doc)
    assert cfg.problem.is_countable
    assert cfg.problem.countable.truncate().n_strings == 9


def test_unknown_countable_kind_rejected():
    doc = {"kind": "zeta-singletons", "ratio": 0.5, "epsilon": 0.5,
           "operators": {"generator": "shrinking-halfspace", "a": [1.0], "b": 1.0}}
    from strav.config import build_countable

    with pytest.raises(ConfigError):
        build_countable(doc, "c")
    doc["kind"] = "geometric-singletons"
    doc["operators"]["generator"] = "growing-ball"
    with pytest.raises(ConfigError):
        build_countable(doc, "c")


def test_steering_families_build():
    assert isinstance(build_steering({"family": "power-law", "c": 0.5}, "s"),
                      PowerLaw)
    assert isinstance(build_steering({"family": "harmonic-shifted",
                                      "offset": 2}, "s"), HarmonicShifted)
    table = build_steering(
        {"family": "user-table", "values": [0.5, 0.25],
         "then": {"family": "power-law"}}, "s")
    assert isinstance(table, UserTable)
    assert build_steering(None, "s").describe() == PowerLaw().describe()


def test_constant_steering_is_not_a_family():
    with pytest.raises(ConfigError) as err:
        build_steering({"family": "constant", "value": 0.5}, "config.steering")
    assert "not a steering sequence" in str(err.value)


def test_every_algorithm_name_builds():
    fam = [{"indices": [1], "weight": 1.0}]
    docs = [
        {"algorithm": "static", "family": fam},
        {"algorithm": "static-projection", "family": fam},
        {"algorithm": "quasi-dynamic", "schedule": [fam]},
        {"algorithm": "simultaneous", "schedule": [fam], "outer_weights": [1.0]},
        {"algorithm": "fully-simultaneous", "weights": [1.0]},
        {"algorithm": "halpern-wittman"},
        {"algorithm": "infinite-static"},
        {"algorithm": "combettes"},
    ]
    names = [build_variant(d, "v").algorithm for d in docs]
    assert names == ["static", "static-projection", "quasi-dynamic",
                     "simultaneous", "fully-simultaneous", "halpern-wittman",
                     "infinite-static", "combettes"]
    with pytest.raises(ConfigError):
        build_variant({"algorithm": "gradient-descent"}, "v")


def test_unknown_top_level_field_rejected():
    with pytest.raises(ConfigError) as err:
        parse_config(minimal_doc(verbose=True))
    assert "config.verbose" in str(err.value)


def test_integer_fields_validated():
    with pytest.raises(ConfigError):
        parse_config(minimal_doc(max_iter=0))
    with pytest.raises(ConfigError):
        parse_config(minimal_doc(record_every=0))
    with pytest.raises(ConfigError):
        parse_config(minimal_doc(max_iter=True))
    with pytest.raises(ConfigError):
        parse_config(minimal_doc(max_iter=10.5))
    with pytest.raises(ConfigError):
        parse_config(minimal_doc(output=7))


def test_missing_sections_rejected():
    with pytest.raises(ConfigError):
        parse_config({"variant": {"algorithm": "halpern-wittman"}})
    with pytest.raises(ConfigError):
        parse_config({"problem": "p1"})


def test_config_error_message_carries_the_path():
    err = ConfigError("config.problem.anchor", "missing required field")
    assert str(err) == "config.problem.anchor: missing required field"


def test_normalization_round_trip_is_stable():
    doc = minimal_doc(max_iter=250, seed=3,
                      steering={"family": "harmonic-shifted", "offset": 1})
    cfg = parse_config(doc)
    normal = normalized_config(cfg)
    again = normalized_config(parse_config(normal))
    assert again == normal


def test_round_trip_preserves_variant_structure():
    doc = {
        "problem": "p2",
        "variant": {
            "algorithm": "quasi-dynamic",
            "schedule": [
                [{"indices": [1, 2, 3], "weight": 1.0}],
                [{"indices": [3], "weight": 0.5},
                 {"indices": [2, 1], "weight": 0.5}],
            ],
        },
    }
    cfg = parse_config(doc)
    back = parse_config(normalized_config(cfg))
    assert isinstance(back.variant, QuasiDynamicSA)
    assert back.variant.describe() == cfg.variant.describe()


def test_hash_is_stable_and_key_order_independent():
    a = config_hash({"b": 1, "a": [1, 2]})
    b = config_hash({"a": [1, 2], "b": 1})
    assert a == b
    assert len(a) == 16 and all(c in "0123456789abcdef" for c in a)
    assert config_hash({"a": [1, 2], "b": 2}) != a


def test_config_hash_tracks_the_parse(tmp_path):
    cfg = parse_config(minimal_doc())
    assert cfg.hash() == config_hash(normalized_config(cfg))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError) as err:
        load_config(bad)
    assert "invalid JSON" in str(err.value)


def test_halpern_wittman_document_round_trip():
    doc = {"problem": "p3", "variant": {"algorithm": "halpern-wittman"}}
    cfg = parse_config(doc)
    assert isinstance(cfg.variant, HalpernWittman)
    assert isinstance(parse_config(normalized_config(cfg)).variant, HalpernWittman)
