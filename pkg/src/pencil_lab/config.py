"""Flat ``key = value`` experiment configuration files and shipped presets.

Grammar: one assignment per line, ``#`` starts a comment, blank lines are
ignored. Keys are the `ExperimentConfig` field names plus two shorthands:

``lr = 0.03``
    sets both ``lr_phase1`` and ``lr_phase2``;
``lambda = 300`` or ``lambda = 3000 -> 0``
    sets ``lambda_start``/``lambda_end`` (constant or linearly decaying).

Tuple values are comma separated (``epochs = 20, 40, 40``); ``noise_pairs``
is a comma separated list of ``src:dst`` pairs; ``none`` clears it.
"""

from __future__ import annotations

import dataclasses
from importlib import resources
from pathlib import Path

from .trainer import ExperimentConfig

ALIASES = ("lr", "lambda")


class ConfigError(ValueError):
    def __init__(self, msg: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {msg}" if where else msg)
        self.key = key
        self.line = line


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def config_keys():
    return tuple(_FIELD_TYPES) + ALIASES


def _to_float(text):
    return float(text)


def _to_int(text):
    return int(text)


def _to_int_tuple(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _to_pairs(text):
    if text.strip().lower() in ("", "none"):
        return None
    out = {}
    for item in text.split(","):
        src, dst = item.split(":")
        out[int(src)] = int(dst)
    return out


_PARSERS = {
    "float": _to_float,
    "int": _to_int,
    "str": str.strip,
    "tuple": _to_int_tuple,
    "Optional[dict]": _to_pairs,
}


def parse_value(key: str, text: str) -> dict:
    """Convert one ``key = text`` assignment into ExperimentConfig field updates."""
    text = text.strip()
    try:
        if key == "lr":
            v = float(text)
            return {"lr_phase1": v, "lr_phase2": v}
        if key == "lambda":
            parts = [p.strip() for p in text.replace("→", "->").split("->")]
            if len(parts) == 1:
                v = float(parts[0])
                return {"lambda_start": v, "lambda_end": v}
            if len(parts) == 2:
                return {"lambda_start": float(parts[0]), "lambda_end": float(parts[1])}
            raise ValueError("expected 'value' or 'start -> end'")
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown key", key)
        return {key: _PARSERS[_FIELD_TYPES[key]](text)}
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse {text!r} ({exc})", key) from None


def _build(updates_by_key, base=None) -> ExperimentConfig:
    """`updates_by_key` maps key -> (line, field updates); line may be None."""
    values = dataclasses.asdict(base or ExperimentConfig())
    origin = {}
    for key, (line, updates) in updates_by_key.items():
        for name, v in updates.items():
            values[name] = v
            origin[name] = (key, line)
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        name = str(exc).split(":", 1)[0]
        key, line = origin.get(name, (name, None))
        raise ConfigError(str(exc).split(":", 1)[-1].strip(), key, line) from None


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            updates[key] = (lineno, parse_value(key, value))
        except ConfigError as exc:
            raise ConfigError(str(exc).split(": ", 1)[-1], key, lineno) from None
    return _build(updates, base)


def parse_config(path) -> ExperimentConfig:
    """Read a config file; unspecified keys keep their defaults."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def apply_overrides(config: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    """Apply ``{key: text}`` overrides (e.g. from command-line flags)."""
    return _build({k: (None, parse_value(k, v)) for k, v in overrides.items()}, config)


def preset_names():
    files = resources.files("pencil_lab").joinpath("presets")
    return sorted(p.name[:-4] for p in files.iterdir() if p.name.endswith(".cfg"))


def load_preset(name: str) -> ExperimentConfig:
    ref = resources.files("pencil_lab").joinpath("presets", f"{name}.cfg")
    if not ref.is_file():
        raise ConfigError(f"no preset named {name!r}; available: {', '.join(preset_names())}")
    return parse_config_text(ref.read_text(encoding="utf-8"))


def resolve_config(spec: str) -> ExperimentConfig:
    """A config file path, or the name of a shipped preset."""
    path = Path(spec)
    if path.is_file():
        return parse_config(path)
    name = path.name[:-4] if path.name.endswith(".cfg") else path.name
    if name in preset_names():
        return load_preset(name)
    raise FileNotFoundError(f"config {spec!r} is neither a file nor a preset")

