"""Plain-text key = value configuration files.

One `key = value` pair per line; `#` starts a comment.  Keys are the
PipelineConfig field names; list-valued fields (seeds, widths, p_grid,
methods, handcrafted_pes) take comma-separated values.
"""

from dataclasses import fields

from .errors import ConfigError
from .pipeline import PipelineConfig

_LIST_FIELDS = {"seeds", "widths", "p_grid", "handcrafted_pes", "methods"}
_BOOL_FIELDS = {"plot", "force"}


def _convert(name: str, value: str, target_type):
    value = value.strip()
    if name in _LIST_FIELDS:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if name == "methods":
            return tuple(items)
        if name in ("seeds", "widths"):
            return tuple(int(v) for v in items)
        return tuple(float(v) for v in items)
    if name in _BOOL_FIELDS:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"bad boolean for {name}: {value!r}")
    return target_type(value)


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    known = {f.name: f.type for f in fields(PipelineConfig)}
    types = {f.name: type(getattr(PipelineConfig(), f.name)) for f in fields(PipelineConfig)}
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            overrides[key] = _convert(key, value, types[key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    if base is not None:
        merged = {f.name: getattr(base, f.name) for f in fields(PipelineConfig)}
        merged.update(overrides)
        return PipelineConfig(**merged)
    return PipelineConfig(**overrides)


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
