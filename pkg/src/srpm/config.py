"""Scenario configuration and the flat ``key = value`` config-file format."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

CONSTELLATION_KINDS = ("psk", "qam")
BIT_MODES = ("full", "mapped")


class ConfigError(ValueError):
    """Raised for an invalid scenario configuration."""


@dataclass(frozen=True)
class SystemConfig:
    """All parameters of one RIS-assisted MISO downlink scenario.

    Powers are linear, angles are radians.  ``offset_indices`` overrides the
    default symmetric offset index set ``{-K, ..., K}`` (e.g. ``(0, 1)`` for
    the quadrature reflection special case).
    """

    N: int = 128
    Nt: int = 8
    L: int = 2
    M: int = 4
    constellation_kind: str = "psk"
    K: int = 1
    delta_theta: float = 3 * math.pi / 16
    P: float = 1.0
    sigma2: float = 1.0
    beta: float = 1.0
    phi_r: float = 0.0
    phi_t: float = 0.0
    antenna_spacing_ratio: float = 0.5
    quantization_bits: int | None = None
    phase_noise_kappa: float | None = None
    seed: int = 0
    bit_mode: str = "full"
    offset_indices: tuple[int, ...] | None = field(default=None)

    def __post_init__(self) -> None:
        if self.offset_indices is not None:
            object.__setattr__(self, "offset_indices", tuple(int(k) for k in self.offset_indices))
        self.validate()

    def validate(self) -> None:
        if self.N < 1 or self.Nt < 1 or self.L < 1:
            raise ConfigError("N, Nt and L must be positive")
        if self.N % self.L:
            raise ConfigError(f"N={self.N} is not a multiple of L={self.L}")
        if self.M < 1 or self.M & (self.M - 1):
            raise ConfigError(f"M={self.M} is not a power of two")
        if self.constellation_kind not in CONSTELLATION_KINDS:
            raise ConfigError(f"unknown constellation kind {self.constellation_kind!r}")
        if self.K < 1:
            raise ConfigError("K must be >= 1")
        if not self.delta_theta > 0:
            raise ConfigError("delta_theta must be positive")
        for name in ("P", "sigma2", "beta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.quantization_bits is not None and self.quantization_bits < 1:
            raise ConfigError("quantization_bits must be >= 1")
        if self.phase_noise_kappa is not None and self.phase_noise_kappa < 0:
            raise ConfigError("phase_noise_kappa must be >= 0")
        if self.bit_mode not in BIT_MODES:
            raise ConfigError(f"bit_mode must be one of {BIT_MODES}")
        if self.offset_indices is not None:
            if len(set(self.offset_indices)) != len(self.offset_indices) or not self.offset_indices:
                raise ConfigError("offset_indices must be a nonempty set of distinct integers")

    @property
    def elements_per_subsurface(self) -> int:
        return self.N // self.L

    @property
    def indices(self) -> tuple[int, ...]:
        if self.offset_indices is not None:
            return self.offset_indices
        return tuple(range(-self.K, self.K + 1))

    @property
    def bits_per_offset(self) -> int:
        return int(math.floor(math.log2(len(self.indices))))

    @property
    def bits_per_use(self) -> int:
        return int(round(math.log2(self.M))) + self.L * self.bits_per_offset

    @property
    def snr(self) -> float:
        return self.P / self.sigma2

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def with_snr(self, snr: float) -> "SystemConfig":
        """Copy with ``P`` set so that ``P / sigma2 == snr``."""
        return self.replace(P=snr * self.sigma2)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        if d["offset_indices"] is not None:
            d["offset_indices"] = list(d["offset_indices"])
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    import numpy as np

    return 10.0 * np.log10(x)


_PI_EXPR = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_angle(text: str) -> float:
    """Parse a float or a ``a*pi/b`` style expression (``3pi/16``, ``pi/4``)."""
    text = text.strip()
    m = _PI_EXPR.match(text)
    if m:
        coef = m.group(1)
        coef = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        den = float(m.group(2)) if m.group(2) else 1.0
        return coef * math.pi / den
    return float(text)


def _field_types() -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(SystemConfig)}


def _parse_value(name: str, raw: str) -> Any:
    raw = raw.strip()
    kind = _field_types()[name]
    if raw.lower() in ("none", ""):
        if "None" not in kind:
            raise ConfigError(f"{name} may not be empty")
        return None
    if name == "offset_indices":
        return tuple(int(v) for v in raw.replace(",", " ").split())
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("str"):
        return raw
    if name in ("delta_theta", "phi_r", "phi_t"):
        return parse_angle(raw)
    return float(raw)


def config_from_mapping(values: dict[str, str], base: SystemConfig | None = None) -> SystemConfig:
    known = _field_types()
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    parsed = {k: _parse_value(k, v) if isinstance(v, str) else v for k, v in values.items()}
    return dataclasses.replace(base or SystemConfig(), **parsed)


def loads_config(text: str) -> SystemConfig:
    """Parse the flat config format: one ``key = value`` per line, ``#`` comments."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        values[key.strip()] = value
    return config_from_mapping(values)


def dumps_config(cfg: SystemConfig) -> str:
    lines = ["# SRPM scenario (linear powers, angles in radians)"]
    for key, value in cfg.to_dict().items():
        if isinstance(value, list):
            value = " ".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def load_config(path: str | Path) -> SystemConfig:
    return loads_config(Path(path).read_text())


def save_config(cfg: SystemConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(cfg))
