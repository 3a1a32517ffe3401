"""Flat key=value run configuration.

Config files hold one `section.key = value` pair per line; `#` starts a
comment. CLI flags override file values, which override built-in defaults.
The effective values are echoed into every run manifest, so manifests
double as replayable configs.
"""

from __future__ import annotations

from pathlib import Path


class ConfigError(ValueError):
    pass


def load_config(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise ConfigError(f"{path}:{lineno}: empty key")
            values[key] = value.strip()
    return values


class Settings:
    """Layered lookup: CLI override -> config file -> default."""

    def __init__(self, file_values: dict[str, str] | None = None,
                 overrides: dict[str, object] | None = None):
        self.file_values = file_values or {}
        self.overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        self.effective: dict[str, object] = {}

    def _raw(self, key: str):
        if key in self.overrides:
            return self.overrides[key]
        if key in self.file_values:
            return self.file_values[key]
        return None

    def get(self, key: str, default=None, cast=str):
        raw = self._raw(key)
        if raw is None:
            value = default
        else:
            try:
                value = _cast(raw, cast)
            except (TypeError, ValueError) as err:
                raise ConfigError(f"config key {key}: {err}") from err
        self.effective[key] = value
        return value

    def get_path(self, key: str, default=None, required: bool = False) -> Path | None:
        value = self.get(key, default)
        if value is None:
            if required:
                raise ConfigError(f"missing required setting: {key}")
            return None
        path = Path(value)
        self.effective[key] = str(path)
        return path


def _cast(raw, cast):
    if cast is bool:
        if isinstance(raw, bool):
            return raw
        if str(raw).lower() in ("1", "true", "yes", "on"):
            return True
        if str(raw).lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if cast is list:
        if isinstance(raw, (list, tuple)):
            return list(raw)
        return [part.strip() for part in str(raw).split(",") if part.strip()]
    return cast(raw)


def parse_seed_list(raw: str | list, count_default: int = 10) -> list[int]:
    """Either an explicit comma list ('3,5,8') or a count ('10' -> 0..9)."""
    if isinstance(raw, (list, tuple)):
        return [int(x) for x in raw]
    text = str(raw).strip()
    if "," in text:
        return [int(x) for x in text.split(",") if x.strip()]
    n = int(text)
    if n <= 0:
        raise ConfigError("seed count must be positive")
    return list(range(n))
