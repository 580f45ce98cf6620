"""Service configuration: one JSON file plus FIELDSPACE_* env overrides.

The file carries the listen address, the snapshot path, the API key table
(three clearance tiers), the address table for the address-based endpoints,
and numeric defaults. Everything has a sane built-in default so tests and
offline CLI use can run with no file at all.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

from .store import (
    DEFAULT_MAX_TTL_S,
    DEFAULT_REACH_K,
    DEFAULT_SEPARATION_M,
    SpatialIndex,
)

__all__ = [
    "ConfigError",
    "TIER_OBSERVER",
    "TIER_OPERATOR",
    "TIER_ADMINISTRATOR",
    "TIER_ORDER",
    "ApiKey",
    "AddressTable",
    "ServiceConfig",
    "load_config",
]

TIER_OBSERVER = "Observer"
TIER_OPERATOR = "Operator"
TIER_ADMINISTRATOR = "Administrator"

# Clearances are strictly ordered; each tier may do everything lower tiers can.
TIER_ORDER = {TIER_OBSERVER: 0, TIER_OPERATOR: 1, TIER_ADMINISTRATOR: 2}

_ENV_PREFIX = "FIELDSPACE_"

_TRUTHY = {"1", "true", "yes", "on"}
_FALSY = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Unusable configuration; the message names the offending key or path."""


@dataclass(frozen=True)
class ApiKey:
    client: str
    tier: str

    def __post_init__(self) -> None:
        if not self.client:
            raise ConfigError("api key entry needs a non-empty client id")
        if self.tier not in TIER_ORDER:
            raise ConfigError(
                f"unknown tier {self.tier!r}; expected one of {sorted(TIER_ORDER)}"
            )

    def allows(self, tier: str) -> bool:
        return TIER_ORDER[self.tier] >= TIER_ORDER[tier]


def _normalize_address(text: str) -> str:
    return re.sub(r"\s+", " ", text.strip()).casefold()


@dataclass(frozen=True)
class AddressTable:
    """Case- and whitespace-insensitive address lookup.

    Each entry maps an address string to (lat, lon, default query radius in
    meters). A local table stands in for a geocoding service.
    """

    entries: dict = dc_field(default_factory=dict)

    @classmethod
    def from_obj(cls, obj) -> "AddressTable":
        if not isinstance(obj, dict):
            raise ConfigError("address table must be an object of address -> entry")
        entries = {}
        for name, value in obj.items():
            if isinstance(value, dict):
                try:
                    lat, lon = float(value["lat"]), float(value["lon"])
                except (KeyError, TypeError, ValueError):
                    raise ConfigError(f"address {name!r}: need numeric lat and lon") from None
                radius = float(value.get("radius_m", 5000.0))
            elif isinstance(value, (list, tuple)) and len(value) in (2, 3):
                lat, lon = float(value[0]), float(value[1])
                radius = float(value[2]) if len(value) == 3 else 5000.0
            else:
                raise ConfigError(
                    f"address {name!r}: entry must be [lat, lon, radius?] or an object"
                )
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ConfigError(f"address {name!r}: ({lat}, {lon}) out of range")
            if not radius > 0:
                raise ConfigError(f"address {name!r}: radius must be positive")
            entries[_normalize_address(name)] = (lat, lon, radius)
        return cls(entries=entries)

    def lookup(self, address: str) -> Optional[tuple[float, float, float]]:
        return self.entries.get(_normalize_address(address))

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8008
    store_path: Optional[str] = None
    api_keys: dict = dc_field(default_factory=dict)  # key -> ApiKey
    addresses: AddressTable = dc_field(default_factory=AddressTable)
    strict_addresses: bool = False
    default_radius_m: float = 5000.0
    default_ttl_s: float = 30.0
    max_ttl_s: float = DEFAULT_MAX_TTL_S
    separation_m: float = DEFAULT_SEPARATION_M
    reach_k: float = DEFAULT_REACH_K
    utc_offset_s: float = 0.0

    def __post_init__(self) -> None:
        if not (0 < self.port < 65536):
            raise ConfigError(f"port out of range: {self.port}")
        if not self.default_radius_m > 0:
            raise ConfigError("default_radius_m must be positive")
        if not (0 < self.default_ttl_s <= self.max_ttl_s):
            raise ConfigError("default_ttl_s must lie in (0, max_ttl_s]")

    def key_entry(self, key: Optional[str]) -> Optional[ApiKey]:
        if not key:
            return None
        return self.api_keys.get(key)

    def make_store(self, clock=None) -> SpatialIndex:
        """A store with this config's knobs, loaded from the snapshot path
        when one exists there."""
        kwargs = dict(
            reach_k=self.reach_k,
            r_sep=self.separation_m,
            max_ttl=self.max_ttl_s,
            utc_offset=self.utc_offset_s,
            clock=clock,
        )
        if self.store_path and (Path(self.store_path) / "manifest.json").exists():
            return SpatialIndex.load_snapshot(self.store_path, **kwargs)
        return SpatialIndex(**kwargs)


def _parse_api_keys(obj) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError("api_keys must be an object of key -> {client, tier}")
    out = {}
    for key, value in obj.items():
        if not isinstance(value, dict) or "client" not in value or "tier" not in value:
            raise ConfigError(f"api key {key!r}: entry needs client and tier")
        out[key] = ApiKey(client=str(value["client"]), tier=str(value["tier"]))
    return out


def _env_bool(raw: str, name: str) -> bool:
    low = raw.strip().casefold()
    if low in _TRUTHY:
        return True
    if low in _FALSY:
        return False
    raise ConfigError(f"{name}: expected a boolean, got {raw!r}")


def _env_float(raw: str, name: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected a number, got {raw!r}") from None


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> ServiceConfig:
    """Build a ServiceConfig from an optional JSON file and the environment.

    Environment overrides (prefix FIELDSPACE_) win over file values: HOST,
    PORT, STORE_PATH, ADDRESS_PATH, API_KEYS (JSON), STRICT_ADDRESSES,
    DEFAULT_RADIUS_M, DEFAULT_TTL_S, MAX_TTL_S, SEPARATION_M, REACH_K,
    UTC_OFFSET_S, BACKEND (consumed by the kernel dispatch at import).
    """
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        p = Path(path)
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"config {p} must hold a JSON object")

    listen = raw.get("listen", {})
    if not isinstance(listen, dict):
        raise ConfigError("listen must be an object with host/port")

    values = dict(
        host=str(listen.get("host", "127.0.0.1")),
        port=int(listen.get("port", 8008)),
        store_path=raw.get("store_path"),
        strict_addresses=bool(raw.get("strict_addresses", False)),
        default_radius_m=float(raw.get("default_radius_m", 5000.0)),
        default_ttl_s=float(raw.get("default_ttl_s", 30.0)),
        max_ttl_s=float(raw.get("max_ttl_s", DEFAULT_MAX_TTL_S)),
        separation_m=float(raw.get("separation_m", DEFAULT_SEPARATION_M)),
        reach_k=float(raw.get("reach_k", DEFAULT_REACH_K)),
        utc_offset_s=float(raw.get("utc_offset_s", 0.0)),
    )
    values["api_keys"] = _parse_api_keys(raw.get("api_keys", {}))

    addresses_obj = raw.get("addresses", {})
    address_path = raw.get("address_path")

    if env.get(_ENV_PREFIX + "HOST"):
        values["host"] = env[_ENV_PREFIX + "HOST"]
    if env.get(_ENV_PREFIX + "PORT"):
        values["port"] = int(_env_float(env[_ENV_PREFIX + "PORT"], "FIELDSPACE_PORT"))
    if env.get(_ENV_PREFIX + "STORE_PATH"):
        values["store_path"] = env[_ENV_PREFIX + "STORE_PATH"]
    if env.get(_ENV_PREFIX + "ADDRESS_PATH"):
        address_path = env[_ENV_PREFIX + "ADDRESS_PATH"]
    if env.get(_ENV_PREFIX + "API_KEYS"):
        try:
            values["api_keys"] = _parse_api_keys(json.loads(env[_ENV_PREFIX + "API_KEYS"]))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"FIELDSPACE_API_KEYS is not valid JSON: {exc}") from None
    if env.get(_ENV_PREFIX + "STRICT_ADDRESSES"):
        values["strict_addresses"] = _env_bool(
            env[_ENV_PREFIX + "STRICT_ADDRESSES"], "FIELDSPACE_STRICT_ADDRESSES"
        )
    for env_name, key in (
        ("DEFAULT_RADIUS_M", "default_radius_m"),
        ("DEFAULT_TTL_S", "default_ttl_s"),
        ("MAX_TTL_S", "max_ttl_s"),
        ("SEPARATION_M", "separation_m"),
        ("REACH_K", "reach_k"),
        ("UTC_OFFSET_S", "utc_offset_s"),
    ):
        raw_v = env.get(_ENV_PREFIX + env_name)
        if raw_v:
            values[key] = _env_float(raw_v, _ENV_PREFIX + env_name)

    if address_path:
        ap = Path(address_path)
        try:
            addresses_obj = json.loads(ap.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read address table {ap}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"address table {ap} is not valid JSON: {exc}") from None
    values["addresses"] = AddressTable.from_obj(addresses_obj)

    return ServiceConfig(**values)
