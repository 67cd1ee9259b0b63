"""INI run configuration.

Sections ``[units] [grid] [packet] [trap] [numerics] [run]``. Every key has a
default; unknown sections or keys are rejected so a typo never silently falls
back to a default. Keys that do not apply to the selected mode are accepted
and ignored.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable

from .core import Grid2D, UnitSystem
from .dynamics import Absorber, ScatteringConfig, ho_eigenstate
from .spin import SpinConfig

__all__ = ["ConfigError", "RunSettings", "load_config", "parse_config", "MODES", "DEFAULTS"]

MODES = ("toy-sweep", "scatter", "compare")


class ConfigError(ValueError):
    pass


def _floats(n: int | None = None) -> Callable[[str], tuple[float, ...]]:
    def parse(text: str) -> tuple[float, ...]:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
        if not vals or (n is not None and len(vals) != n):
            raise ValueError(f"expected {n or 'one or more'} numbers")
        return vals
    return parse


def _optional_float(text: str) -> float | None:
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


def _spins(text: str) -> tuple[str, ...]:
    names = tuple(v.strip() for v in text.replace(",", " ").split())
    for name in names:
        SpinConfig(name)
    if not names or len(set(names)) != len(names):
        raise ValueError("spins must be a non-empty list without repeats")
    return names


def _levels(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for item in text.split(","):
        parts = item.split()
        if len(parts) != 2:
            raise ValueError("levels are 'nx ny' pairs separated by commas")
        nx, ny = int(parts[0]), int(parts[1])
        if nx < 0 or ny < 0:
            raise ValueError("level indices must be non-negative")
        out.append((nx, ny))
    return tuple(out)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


# section -> key -> (parser, default text). Mode-dependent defaults are None
# here and filled in by _mode_default.
DEFAULTS: dict[str, dict[str, tuple[Callable[[str], Any], str | None]]] = {
    "units": {
        "effective_mass": (float, "0.067"),
        "dielectric_const": (float, "12.9"),
    },
    "grid": {
        "n": (int, "48"),
        "spacing": (float, "5.0"),
        "center": (_floats(2), "95, 95"),
    },
    "packet": {
        "sigma": (float, "10.0"),
        "kinetic_energies": (_floats(), None),
        "launch_distance": (float, "136.0"),
        "direction": (_floats(2), "1, 1"),
    },
    "trap": {
        "energy": (float, "2.0"),
        "center": (_floats(2), "95, 95"),
        "projection_levels": (_levels, "0 0, 1 0, 0 1"),
    },
    "numerics": {
        "dt": (float, "0.5"),
        "n_steps": (int, "960"),
        "snapshot_stride": (int, "20"),
        "coulomb_softening": (_optional_float, "auto"),
        "absorber_margin": (_optional_float, "none"),
        "checkpoint_every": (int, "0"),
    },
    "run": {
        "spins": (_spins, None),
        "n_pairs": (int, "2601"),
        "n_points": (int, "101"),
        "formation_delta": (float, "0.01"),
        "tail_fraction": (float, "0.2"),
        "vne": (_bool, None),
    },
}

_MODE_DEFAULTS = {
    "scatter": {"kinetic_energies": "10, 20", "spins": "same_spin, opposite, singlet, triplet",
                "vne": "false"},
    "compare": {"kinetic_energies": "30", "spins": "same_spin, opposite", "vne": "true"},
    "toy-sweep": {"kinetic_energies": "10", "spins": "same_spin", "vne": "false"},
}


@dataclass(frozen=True)
class RunSettings:
    """Validated configuration of one run, resolved against the defaults."""

    mode: str
    values: dict

    def get(self, section: str, key: str):
        return self.values[section][key]

    def canonical(self) -> str:
        return json.dumps({"mode": self.mode, **self.values}, sort_keys=True, default=list)

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    @property
    def kinetic_energies(self) -> tuple[float, ...]:
        return self.get("packet", "kinetic_energies")

    @property
    def spins(self) -> tuple[SpinConfig, ...]:
        return tuple(SpinConfig(s) for s in self.get("run", "spins"))

    def scattering(self, kinetic_energy: float) -> ScatteringConfig:
        u, g, p, t, n = (self.values[s] for s in ("units", "grid", "packet", "trap", "numerics"))
        margin = n["absorber_margin"]
        cfg = ScatteringConfig(
            units=UnitSystem.from_material(u["effective_mass"], u["dielectric_const"]),
            grid=Grid2D.centered(g["n"], g["spacing"], g["center"]),
            trap_center=t["center"],
            trap_energy=t["energy"],
            packet_sigma=p["sigma"],
            kinetic_energy=kinetic_energy,
            direction=p["direction"],
            coulomb_softening=n["coulomb_softening"],
            dt=n["dt"],
            n_steps=n["n_steps"],
            snapshot_stride=n["snapshot_stride"],
            absorber=None if margin is None else Absorber(margin),
        )
        return cfg.with_launch(p["launch_distance"])


def _validate(mode: str, v: dict) -> None:
    run = v["run"]
    if mode == "toy-sweep":
        if run["n_pairs"] < 2:
            raise ConfigError("[run] n_pairs must be >= 2 (normalized vNE needs ln N > 0)")
        if run["n_points"] < 2:
            raise ConfigError("[run] n_points must be >= 2")
        return
    if not 0 < run["formation_delta"] <= 0.1:
        raise ConfigError("[run] formation_delta must be in (0, 0.1]")
    if not 0 < run["tail_fraction"] <= 0.5:
        raise ConfigError("[run] tail_fraction must be in (0, 0.5]")
    if v["numerics"]["checkpoint_every"] < 0:
        raise ConfigError("[numerics] checkpoint_every must be >= 0")
    if any(not math.isfinite(e) or e < 0 for e in v["packet"]["kinetic_energies"]):
        raise ConfigError("[packet] kinetic_energies must be finite and non-negative")


def parse_config(text: str, mode: str) -> RunSettings:
    """Parse INI ``text`` for ``mode``; raises :class:`ConfigError` on any problem."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = set(cp.sections()) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    values: dict[str, dict] = {}
    for section, schema in DEFAULTS.items():
        given = dict(cp[section]) if cp.has_section(section) else {}
        extra = set(given) - set(schema)
        if extra:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(extra))}")
        values[section] = {}
        for key, (parse, default) in schema.items():
            raw = given.get(key, default if default is not None else _MODE_DEFAULTS[mode][key])
            try:
                values[section][key] = parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
    _validate(mode, values)
    settings = RunSettings(mode, values)
    if mode != "toy-sweep":
        for ek in settings.kinetic_energies:
            try:
                cfg = settings.scattering(ek)
                cfg.check_launch()
                if mode == "scatter":
                    for nx, ny in settings.get("trap", "projection_levels"):
                        ho_eigenstate(cfg, nx, ny)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    return settings


def load_config(path: str | Path | None, mode: str) -> RunSettings:
    """Read ``path`` (or use all defaults when ``None``)."""
    if path is None:
        return parse_config("", mode)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, mode)
