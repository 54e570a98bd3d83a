"""Run-configuration files: plain ``key = value`` entries under section
headers (INI syntax).  Unknown keys are rejected by name so typos fail fast.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

__all__ = ["ConfigError", "RunConfig", "load_config", "KINDS"]

KINDS = (
    "evolve-expectation", "mc-sample", "renyi2", "entropy-scan",
    "dqpt-scan", "circuit-ensemble", "benchmark-truncation",
)

# section -> key -> (type, default); None default means required
_COMMON = {
    "run": {
        "kind": (str, None),
        "output": (str, None),
        "seed": (int, 0),
        "workers": (int, 1),
    },
    "contraction": {
        "chi": (int, 64),
        "tol": (float, 1e-8),
        "max_sweeps": (int, 8),
        "trunc_mode": (str, "rtm"),
    },
}

_MODEL = {
    "model": {
        "hz": (float, None),
        "hx": (float, None),
        "n": (str, None),            # integer or "infinite"
        "dt": (float, 0.05),
        "trotter_order": (int, 2),
    },
    "boundaries": {
        "initial": (str, "0"),
        "final": (str, "0"),
    },
}

_SCHEMAS: Dict[str, Dict[str, Dict[str, tuple]]] = {
    "evolve-expectation": {
        **_COMMON, **_MODEL,
        "evolution": {"t_grid": (str, None)},
        "sampling": {"observable": (str, "Z:auto")},
    },
    "mc-sample": {
        **_COMMON, **_MODEL,
        "evolution": {"t": (float, None)},
        "sampling": {"m": (int, None), "observable": (str, "Z:auto")},
    },
    "renyi2": {
        **_COMMON, **_MODEL,
        "evolution": {"t": (float, None)},
        "sampling": {"m": (int, None), "cut": (str, "auto")},
    },
    "entropy-scan": {
        **_COMMON, **_MODEL,
        "evolution": {"t_grid": (str, None)},
    },
    "dqpt-scan": {
        **_COMMON, **_MODEL,
        "evolution": {"t_grid": (str, None)},
        "detector": {"threshold": (float, 10.0)},
    },
    "circuit-ensemble": {
        **_COMMON,
        "circuit": {
            "half_n": (int, None),
            "dt": (float, None),
            "realizations": (int, None),
            "boundaries": (str, "0|0"),
        },
        "evolution": {"t_grid": (str, None)},
    },
    "benchmark-truncation": {
        **_COMMON, **_MODEL,
        "evolution": {"t": (float, None)},
        "benchmark": {
            "chis": (str, "8,16,32"),
            "n_strings": (int, 50),
            "chi_ref": (int, 128),
        },
    },
}


class ConfigError(ValueError):
    """Malformed run configuration; the message names the offending key."""


@dataclass
class RunConfig:
    kind: str
    values: Dict[str, Dict[str, object]]

    def __getitem__(self, section: str) -> Dict[str, object]:
        return self.values[section]

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def t_grid(self) -> List[float]:
        spec = str(self.get("evolution", "t_grid"))
        return parse_grid(spec)

    def n_sites(self) -> Union[int, str]:
        raw = str(self.get("model", "n"))
        return raw if raw == "infinite" else int(raw)


def parse_grid(spec: str) -> List[float]:
    """"start:stop:step" or a comma-separated list of times."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid must be start:stop:step, got {spec!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ConfigError(f"invalid grid bounds {spec!r}")
        out = []
        t = start
        while t <= stop + 1e-9:
            out.append(round(t, 12))
            t += step
        return out
    return [float(p) for p in spec.split(",") if p.strip()]


def load_config(path: str) -> RunConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    if not parser.has_section("run") or not parser.has_option("run", "kind"):
        raise ConfigError("missing required key 'kind' in section [run]")
    kind = parser.get("run", "kind").strip()
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
    schema = _SCHEMAS[kind]
    values: Dict[str, Dict[str, object]] = {}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for kind {kind!r}")
        for key in parser.options(section):
            if key not in schema[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")
    for section, keys in schema.items():
        values[section] = {}
        for key, (typ, default) in keys.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key).strip()
                try:
                    values[section][key] = typ(raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value for '{key}' in [{section}]: {raw!r}") from exc
            elif default is None:
                raise ConfigError(f"missing required key '{key}' in section [{section}]")
            else:
                values[section][key] = default
    mode = values["contraction"]["trunc_mode"]
    if mode not in ("rtm", "rdm"):
        raise ConfigError(f"bad value for 'trunc_mode': {mode!r}")
    return RunConfig(kind, values)
