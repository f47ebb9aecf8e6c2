"""Flat ``key = value`` experiment configs.

One assignment per line; ``#`` starts a comment; keys are dotted lowercase
paths.  Values stay strings at parse time and are coerced by the accessors,
so unknown keys are visible early and error messages can name the key.
"""

from __future__ import annotations

import hashlib

__all__ = ["ConfigError", "parse_flat_config", "read_config_file", "config_hash", "content_version"]


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


def parse_flat_config(text):
    """Parse flat config text into an ordered {key: raw string value} dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config_file(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_flat_config(fh.read())


def config_hash(cfg):
    """Stable hash of the parsed key/value pairs (order-insensitive)."""
    canon = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def content_version(raw_bytes):
    """Git-style blob id of the raw config file contents."""
    if isinstance(raw_bytes, str):
        raw_bytes = raw_bytes.encode("utf-8")
    header = f"blob {len(raw_bytes)}\0".encode("ascii")
    return hashlib.sha1(header + raw_bytes).hexdigest()


def get_typed(cfg, key, kind, default=None, required=False):
    """Fetch ``cfg[key]`` coerced to ``kind`` ('int', 'float', 'str', 'int_list')."""
    if key not in cfg:
        if required:
            raise ConfigError(f"missing required config key {key!r}")
        return default
    raw = cfg[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "str":
            return raw
        if kind == "int_list":
            return [int(tok) for tok in raw.split(",") if tok.strip()]
        if kind == "float_list":
            return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r} as {kind}") from exc
    raise ConfigError(f"unknown coercion kind {kind!r}")
