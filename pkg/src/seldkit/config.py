"""Flat key=value configuration files with an include directive.

Lines are ``key = value`` (whitespace optional), ``#`` starts a comment,
and ``include <path>`` splices another file relative to the current one.
Later assignments (and included files) override earlier ones.
"""

from __future__ import annotations

from pathlib import Path

from .core import ConfigurationError


def load_config(path, _seen: frozenset = frozenset()) -> dict[str, str]:
    path = Path(path).resolve()
    if path in _seen:
        raise ConfigurationError(f"include cycle at {path}")
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("include "):
            target = (path.parent / line[len("include "):].strip()).resolve()
            out.update(load_config(target, _seen | {path}))
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def get_float(cfg: dict, key: str, default: float) -> float:
    try:
        return float(cfg.get(key, default))
    except ValueError as exc:
        raise ConfigurationError(f"{key}: expected a number, got {cfg[key]!r}") from exc


def get_int(cfg: dict, key: str, default: int) -> int:
    try:
        return int(cfg.get(key, default))
    except ValueError as exc:
        raise ConfigurationError(f"{key}: expected an integer, got {cfg[key]!r}") from exc


def get_pair(cfg: dict, key: str, default: tuple[float, float]) -> tuple[float, float]:
    raw = cfg.get(key)
    if raw is None:
        return default
    parts = [tok for tok in raw.split(",") if tok.strip()]
    if len(parts) != 2:
        raise ConfigurationError(f"{key}: expected two comma-separated numbers")
    return float(parts[0]), float(parts[1])
