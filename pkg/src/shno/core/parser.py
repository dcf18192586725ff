"""Plain-text run configuration: ``[section]`` headers and ``key = value`` lines.

Grammar::

    # full-line comment (also ``;``)
    [section]
    key = value
    other =

An empty value means unset (None). Comments take a whole line.

Values are kept as strings and converted by the pydantic section models.
Lists are comma separated (``ffn_scales = 1, 3, 5``). A config is resolved by
layering, later layers winning: built-in preset, built-in size profile, the
file, then ``--set section.key=value`` overrides.
"""

from __future__ import annotations

import logging
import re
from collections.abc import Iterable
from importlib.resources import files
from pathlib import Path

from pydantic import ValidationError

from shno.errors import ConfigError
from shno.models.run import SECTIONS, ExperimentPreset, RunConfig, SizeProfile

logger = logging.getLogger(__name__)

RawConfig = dict[str, dict[str, str | None]]

_SECTION = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][\w]*)\s*=\s*(.*)$")
_COMMENT_PREFIXES = ("#", ";")


class ConfigFileParser:
    def parse(self, content: str, source: str = "<string>") -> RawConfig:
        """Parse config text into ``{section: {key: value}}``.

        Raises:
            ConfigError: on a malformed line, a key outside any section, or a
                key given twice in one section.
        """
        sections: RawConfig = {}
        current: str | None = None

        for lineno, raw in enumerate(content.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith(_COMMENT_PREFIXES):
                continue

            header = _SECTION.match(line)
            if header:
                current = header.group(1).lower()
                sections.setdefault(current, {})
                continue

            entry = _ENTRY.match(line)
            if entry is None:
                raise ConfigError(f"{source}:{lineno}: expected '[section]' or 'key = value', got {raw!r}")
            if current is None:
                raise ConfigError(f"{source}:{lineno}: key {entry.group(1)!r} appears before any [section]")

            key, value = entry.group(1).lower(), entry.group(2).strip()
            if key in sections[current]:
                raise ConfigError(f"{source}:{lineno}: duplicate key {current}.{key}")
            sections[current][key] = value or None

        return sections

    def parse_overrides(self, overrides: Iterable[str]) -> RawConfig:
        """``["train.epochs=3", "run.seed = 7"]`` -> ``{"train": {"epochs": "3"}, "run": {"seed": "7"}}``."""
        sections: RawConfig = {}
        for item in overrides:
            dotted, sep, value = item.partition("=")
            section, dot, key = dotted.strip().partition(".")
            if not sep or not dot or not section or not key:
                raise ConfigError(f"override {item!r} is not of the form section.key=value")
            sections.setdefault(section.lower(), {})[key.lower()] = value.strip() or None
        return sections

    def parse_file(self, file_path: Path) -> RawConfig:
        if not file_path.is_file():
            raise FileNotFoundError(f"config file not found: {file_path}")
        content = file_path.read_text(encoding="utf-8")
        return self.parse(content, source=str(file_path))


def builtin_layer(name: str) -> RawConfig:
    """A packaged preset or size profile, e.g. ``swe`` or ``desk``."""
    resource = files("shno").joinpath("presets", f"{name}.cfg")
    if not resource.is_file():
        raise ConfigError(f"no built-in preset or profile named {name!r}")
    return ConfigFileParser().parse(resource.read_text(encoding="utf-8"), source=f"preset:{name}")


def merge_layers(*layers: RawConfig) -> RawConfig:
    merged: RawConfig = {}
    for layer in layers:
        for section, values in layer.items():
            merged.setdefault(section, {}).update(values)
    return merged


def _choice(layers: Iterable[RawConfig], key: str, default: str) -> str:
    chosen = default
    for layer in layers:
        value = layer.get("run", {}).get(key)
        if value:
            chosen = value
    return chosen


def _enum_value(enum: type[ExperimentPreset] | type[SizeProfile], value: str, key: str) -> str:
    try:
        return enum(value).value
    except ValueError:
        allowed = ", ".join(e.value for e in enum)
        raise ConfigError(f"run.{key} must be one of: {allowed} (got {value!r})") from None


def validate_raw(raw: RawConfig) -> RunConfig:
    unknown = sorted(set(raw) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(unknown)}; expected {', '.join(SECTIONS)}")
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"invalid run config: {problems}") from None


def load_run_config(path: Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Resolve preset, profile, file and overrides into a validated :class:`RunConfig`.

    Raises:
        FileNotFoundError: if ``path`` does not exist.
        ConfigError: on a grammar error or a value that fails validation.
    """
    parser = ConfigFileParser()
    file_layer = parser.parse_file(path) if path is not None else {}
    override_layer = parser.parse_overrides(overrides)

    user_layers = (file_layer, override_layer)
    preset = _enum_value(ExperimentPreset, _choice(user_layers, "preset", ExperimentPreset.SWE.value), "preset")
    profile = _enum_value(SizeProfile, _choice(user_layers, "profile", SizeProfile.DESK.value), "profile")

    merged = merge_layers(builtin_layer(preset), builtin_layer(profile), file_layer, override_layer)
    config = validate_raw(merged)
    logger.debug(f"Resolved run config {config.run.name!r} (preset {preset}, profile {profile})")
    return config


def parse_run_config(content: str) -> RunConfig:
    """Validate config text on its own, without preset layering (e.g. an embedded config echo)."""
    return validate_raw(ConfigFileParser().parse(content, source="<echo>"))
