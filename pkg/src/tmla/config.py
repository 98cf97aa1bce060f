"""Flat ``section.key = value`` config files with command-line overrides.

Example::

    # reference operating point
    attack.q_in = 55
    attack.q_out = 25
    codec.tau = 0.018

Sections map onto ``AttackConfig`` (attack), ``DefenseConfig`` (defense) and
``SurrogateCodecParams`` (codec). All problems are collected and raised
together as one ``ConfigError``.
"""

import dataclasses
import types
import typing
from pathlib import Path

from .attack import AttackConfig
from .codec import SurrogateCodecParams
from .defense import DefenseConfig

SECTIONS = {"attack": AttackConfig, "defense": DefenseConfig, "codec": SurrogateCodecParams}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


def _field_types(cls):
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def _coerce(text, typ):
    optional = False
    if isinstance(typ, types.UnionType) or typing.get_origin(typ) is typing.Union:
        args = [a for a in typing.get_args(typ) if a is not type(None)]
        optional = len(args) < len(typing.get_args(typ))
        typ = args[0]
    if optional and text.lower() in ("none", ""):
        return None
    if typ is bool:
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ is int:
        return int(text)
    if typ is float:
        return float(text)
    return text


def parse_lines(lines, source="<config>"):
    """``section.key = value`` lines into {(section, key): raw string}; errors collected."""
    entries, errors = {}, []
    for no, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{no}: expected 'section.key = value'")
            continue
        name, value = (s.strip() for s in line.split("=", 1))
        if "." not in name:
            errors.append(f"{source}:{no}: key {name!r} lacks a section prefix")
            continue
        section, key = name.split(".", 1)
        entries[(section, key)] = value
    return entries, errors


def load_config(path=None, overrides=(), validate=True):
    """Resolve {section: dataclass instance} from an optional file plus ``key=value`` overrides."""
    entries, errors = {}, []
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError([f"config file not found: {path}"])
        e, errs = parse_lines(path.read_text(encoding="utf-8").splitlines(), str(path))
        entries.update(e)
        errors += errs
    e, errs = parse_lines(overrides, "<override>")
    entries.update(e)
    errors += errs

    values = {s: {} for s in SECTIONS}
    for (section, key), raw in entries.items():
        if section not in SECTIONS:
            errors.append(f"unknown section {section!r} (known: {', '.join(SECTIONS)})")
            continue
        types_ = _field_types(SECTIONS[section])
        if key not in types_:
            errors.append(f"unknown key {section}.{key}")
            continue
        try:
            values[section][key] = _coerce(raw, types_[key])
        except ValueError as exc:
            errors.append(f"{section}.{key}: {exc}")
    resolved = {}
    for section, cls in SECTIONS.items():
        obj = cls(**values[section])
        if validate:
            try:
                obj.validate()
            except ValueError as exc:
                errors += [f"{section}: {m}" for m in str(exc).split("; ")]
        resolved[section] = obj
    if errors:
        raise ConfigError(errors)
    return resolved


def dump_config(resolved):
    """Inverse of ``load_config``: the full resolved config as file text."""
    lines = []
    for section, obj in resolved.items():
        for f in dataclasses.fields(obj):
            lines.append(f"{section}.{f.name} = {getattr(obj, f.name)}")
    return "\n".join(lines) + "\n"
