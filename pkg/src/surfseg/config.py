"""Flat key-value configuration files.

Format: one ``key = value`` per line; ``#`` starts a comment; blank lines
ignored. Values parse as int, then float, then bool (true/false), then
comma-separated tuple of the above, falling back to string. Keys use dotted
namespaces (e.g. ``graph.column_size``) matching dataclass field names.
"""
from __future__ import annotations

from dataclasses import fields


class ConfigError(Exception):
    pass


def _parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(t)
        except ValueError:
            pass
    return t


def parse_value(text: str):
    t = text.strip()
    if "," in t:
        return tuple(_parse_scalar(p) for p in t.split(",") if p.strip())
    return _parse_scalar(t)


def read_config(path: str) -> dict:
    out: dict = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            out[key] = parse_value(value)
    return out


def apply_overrides(obj, overrides: dict, namespace: str):
    """Set ``namespace.field`` entries of ``overrides`` onto dataclass ``obj``.

    Unknown fields in the namespace are an error; other namespaces are
    ignored (they belong to other modules).
    """
    valid = {f.name for f in fields(obj)}
    prefix = namespace + "."
    for key, value in overrides.items():
        if not key.startswith(prefix):
            continue
        name = key[len(prefix):]
        if name not in valid:
            raise ConfigError(
                f"unknown {namespace} option {name!r} (valid: "
                f"{', '.join(sorted(valid))})")
        setattr(obj, name, value)
    return obj
