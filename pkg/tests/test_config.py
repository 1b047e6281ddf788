from dataclasses import dataclass

import pytest

from surfseg.config import (ConfigError, apply_overrides, parse_value,
                            read_config)


def test_parse_value_types():
    assert parse_value("3") == 3
    assert parse_value("3.5") == 3.5
    assert parse_value("true") is True
    assert parse_value("False") is False
    assert parse_value("64, 64, 32") == (64, 64, 32)
    assert parse_value("0.5,0.5,1.0") == (0.5, 0.5, 1.0)
    assert parse_value("hello") == "hello"


def test_read_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text(
        "# a comment\n"
        "graph.column_size = 61\n"
        "graph.node_spacing = 0.2   # trailing comment\n"
        "\n"
        "experiment.dims = 64, 64, 64\n"
        "experiment.name = trial\n")
    cfg = read_config(str(p))
    assert cfg == {"graph.column_size": 61, "graph.node_spacing": 0.2,
                   "experiment.dims": (64, 64, 64),
                   "experiment.name": "trial"}


def test_read_config_rejects_bad_lines(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("just some words\n")
    with pytest.raises(ConfigError):
        read_config(str(p))
    p.write_text("= 3\n")
    with pytest.raises(ConfigError):
        read_config(str(p))


@dataclass
class _Opts:
    size: int = 10
    rate: float = 0.5


def test_apply_overrides_namespaced():
    o = _Opts()
    apply_overrides(o, {"opts.size": 20, "other.rate": 9.0}, "opts")
    assert o.size == 20 and o.rate == 0.5     # other namespace ignored
    with pytest.raises(ConfigError):
        apply_overrides(o, {"opts.bogus": 1}, "opts")
