"""Run specifications: TOML files merged with command-line flags (flags win)."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import tomli
import tomli_w

log = logging.getLogger("walktail")


class ConfigError(ValueError):
    pass


@dataclass
class RunSpec:
    step: str | None = None
    claims: str | None = None
    interarrival: str | None = None
    premium: float | None = None
    order: int = 2
    xgrid: str | None = None
    seed: int | None = None
    reps: int = 100_000
    moment_reps: int | None = None
    barrier: float | None = None
    cap: int = 100_000
    h: float = 0.5
    eps: float = 1e-12
    kmax: int | None = None
    moments: str | None = None
    symbolic: bool = False
    all_terms: bool = False
    substitute: bool = True
    case: str | None = None
    beta: float = 2.0
    y: str = "deterministic"
    y_mean: float = 1.0
    out: str | None = None


_TYPES = {f.name: f.type for f in fields(RunSpec)}


def _coerce(key: str, value):
    kind = _TYPES[key].replace(" | None", "")
    try:
        if kind == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise TypeError
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise TypeError
            return float(value)
        if not isinstance(value, str):
            raise TypeError
        return value
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r}: expected {kind}, got {value!r}") from None


def load_config(path) -> dict:
    """Read a TOML run file; returns only the keys it sets."""
    text = Path(path).read_text()
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    unknown = sorted(set(raw) - set(_TYPES))
    if unknown:
        line = _line_of(text, unknown[0])
        raise ConfigError(f"{path}:{line}: unknown key {unknown[0]!r}")
    return {k: _coerce(k, v) for k, v in raw.items()}


def _line_of(text: str, key: str) -> int:
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(key):
            return i
    return 0


def resolve(file_values: dict | None, flag_values: dict | None) -> RunSpec:
    """Defaults, then the file, then flags; flag/file disagreements are logged."""
    file_values = file_values or {}
    flag_values = {k: v for k, v in (flag_values or {}).items() if v is not None and k in _TYPES}
    merged = dict(file_values)
    for k, v in flag_values.items():
        if k in file_values and file_values[k] != v:
            log.warning("flag --%s=%r overrides config value %r", k.replace("_", "-"), v, file_values[k])
        merged[k] = _coerce(k, v)
    return RunSpec(**merged)


def to_toml(spec: RunSpec) -> str:
    return tomli_w.dumps({k: v for k, v in asdict(spec).items() if v is not None})


def save_config(spec: RunSpec, path) -> None:
    Path(path).write_text(to_toml(spec))
