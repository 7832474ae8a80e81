"""Run configuration: defaults, strict validation, canonical hashing.

Configs are flat JSON objects per command.  Physical quantities carry unit
suffixes in their key names (``_m``, ``_s``, ``_Hz``, ``_K``, ``_rad``,
``_ly``); unsuffixed dynamics quantities are in natural units (hbar = 1).
Validation runs before any computation; unknown keys are rejected so typos
cannot silently fall back to defaults.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path

from .errors import ConfigError

STARLIGHT_DEFAULTS = {
    "seed": 0,
    "distance_ly": 530.0,
    "resolution_rad": 9.7e-9,
    "wavelength_m": 6e-7,
    "thickness_per_wavelength": 3e7,
}

CMB_DEFAULTS = {
    "seed": 0,
    "temperature_K": 2.725,
    "delta_limit": 1e-5,
    "reference_u": 0.282,
    "reference_wavelength_m": 0.019,
    "thickness_per_wavelength": 3e7,
    "redshifts": [0],
    "grid_u_min": 0.05,
    "grid_u_max": 15.0,
    "grid_points": 1000,
    "magnification": 5000.0,
}

SIMULATE_DEFAULTS = {
    "seed": 0,
    "mode": "sawtooth",  # or "two_packet"
    "grid_cells": 512,
    "cell_length": 0.5,
    "particle_mass": 1.0,
    "initial_sigma": 4.0,
    "f0": 2e-4,
    "phase_steps": 256,
    "dt": 0.01,
    "scheme": "split_step",
    "steps_per_report": 20,
    "boundary_guard_cells": 3,
    "critical_volume": 120,
    "collapse_fraction": 0.5,
    "epsilon_bracket": [1e-12, 1e12],
    "cycles": 4,
    "trajectories": 100,
    "packet_weight_left": 0.7,
    "packet_offset": 60.0,
    "packet_sigma": 6.0,
}

COLLAPSE_STATS_DEFAULTS = {
    "seed": 0,
    "draws": 10_000,
    "state_cells": 256,
    "profile": "random_steps",  # or "uniform", "gaussian"
    "cell_length": 1.0,
    "f0": 1e-4,
    "phase_steps": 256,
    "schedule_particles": 50,
    "hit_rate_per_s": 0.2,
    "horizon_s": 10.0,
    "schedule_runs": 100,
    "analytic_modes": [[1.0, 1e-16], [1e23, 1e-16]],
}

WORLD_DEFAULTS = {
    "seed": 0,
    "steps": 8,
    "dt": 0.5,
    "grid_cells": 128,
    "cell_length": 1.0,
    "particle_mass": 1.0,
    "f0": 2e-4,
    "phase_steps": 256,
    "packets": [
        {"center": -8.0, "sigma": 5.0, "species": "a"},
        {"center": 8.0, "sigma": 5.0, "species": "b"},
    ],
    "evolution_dt": 0.05,
    "steps_per_report": 10,
    "scheme": "split_step",
    "boundary_guard_cells": 3,
    "coupling_scale": 5.0,
    "interaction_model": "density_overlap",
    "factorizability_threshold": 0.05,
    "max_partitions_examined": 4,
    "critical_volume": 400,
    "collapse_fraction": 0.5,
    "split_attempt_probability": 0.5,
    "epsilon_bracket": [1e-12, 1e12],
    "max_merge_cells": 1 << 22,
}

DEFAULTS = {
    "starlight": STARLIGHT_DEFAULTS,
    "cmb": CMB_DEFAULTS,
    "simulate": SIMULATE_DEFAULTS,
    "collapse-stats": COLLAPSE_STATS_DEFAULTS,
    "world": WORLD_DEFAULTS,
}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _positive(cfg, key):
    _require(
        isinstance(cfg[key], (int, float)) and cfg[key] > 0, f"{key} must be a positive number"
    )


def _nonneg(cfg, key):
    _require(
        isinstance(cfg[key], (int, float)) and cfg[key] >= 0, f"{key} must be >= 0"
    )


def _fraction(cfg, key):
    _require(
        isinstance(cfg[key], (int, float)) and 0 < cfg[key] < 1, f"{key} must lie in (0, 1)"
    )


def _int_at_least(cfg, key, floor):
    _require(
        isinstance(cfg[key], int) and not isinstance(cfg[key], bool) and cfg[key] >= floor,
        f"{key} must be an integer >= {floor}",
    )


def _choice(cfg, key, options):
    _require(cfg[key] in options, f"{key} must be one of {sorted(options)}")


def _bracket(cfg, key):
    value = cfg[key]
    _require(
        isinstance(value, (list, tuple))
        and len(value) == 2
        and 0 < value[0] < value[1],
        f"{key} must be [lo, hi] with 0 < lo < hi",
    )


def _validate_starlight(cfg):
    for key in ("distance_ly", "resolution_rad", "wavelength_m", "thickness_per_wavelength"):
        _positive(cfg, key)


def _validate_cmb(cfg):
    for key in (
        "temperature_K",
        "reference_u",
        "reference_wavelength_m",
        "thickness_per_wavelength",
        "grid_u_min",
        "grid_u_max",
        "magnification",
    ):
        _positive(cfg, key)
    _fraction(cfg, "delta_limit")
    _int_at_least(cfg, "grid_points", 2)
    _require(cfg["grid_u_min"] < cfg["grid_u_max"], "grid_u_min must be below grid_u_max")
    _require(
        isinstance(cfg["redshifts"], list)
        and cfg["redshifts"]
        and all(isinstance(z, int) and z >= 0 for z in cfg["redshifts"]),
        "redshifts must be a non-empty list of integers >= 0",
    )


def _validate_simulate(cfg):
    _choice(cfg, "mode", {"sawtooth", "two_packet"})
    for key in ("cell_length", "particle_mass", "initial_sigma", "f0", "dt",
                "packet_offset", "packet_sigma"):
        _positive(cfg, key)
    _int_at_least(cfg, "grid_cells", 16)
    _int_at_least(cfg, "phase_steps", 4)
    _int_at_least(cfg, "steps_per_report", 1)
    _int_at_least(cfg, "boundary_guard_cells", 2)
    _int_at_least(cfg, "critical_volume", 2)
    _int_at_least(cfg, "cycles", 1)
    _int_at_least(cfg, "trajectories", 1)
    _fraction(cfg, "collapse_fraction")
    _fraction(cfg, "packet_weight_left")
    _bracket(cfg, "epsilon_bracket")
    _choice(cfg, "scheme", {"split_step", "crank_nicolson"})


def _validate_collapse_stats(cfg):
    _int_at_least(cfg, "draws", 1)
    _int_at_least(cfg, "state_cells", 2)
    _int_at_least(cfg, "schedule_particles", 1)
    _int_at_least(cfg, "schedule_runs", 1)
    _int_at_least(cfg, "phase_steps", 4)
    _choice(cfg, "profile", {"random_steps", "uniform", "gaussian"})
    for key in ("cell_length", "f0", "hit_rate_per_s"):
        _positive(cfg, key)
    _nonneg(cfg, "horizon_s")
    _require(
        isinstance(cfg["analytic_modes"], list)
        and all(
            isinstance(m, list) and len(m) == 2 and m[0] > 0 and m[1] > 0
            for m in cfg["analytic_modes"]
        ),
        "analytic_modes must be a list of [n_particles, hit_rate_per_s] pairs",
    )


def _validate_world(cfg):
    for key in ("dt", "cell_length", "particle_mass", "f0", "evolution_dt", "coupling_scale"):
        _positive(cfg, key)
    _int_at_least(cfg, "steps", 1)
    _int_at_least(cfg, "grid_cells", 16)
    _int_at_least(cfg, "phase_steps", 4)
    _int_at_least(cfg, "steps_per_report", 1)
    _int_at_least(cfg, "boundary_guard_cells", 2)
    _int_at_least(cfg, "critical_volume", 2)
    _int_at_least(cfg, "max_partitions_examined", 1)
    _int_at_least(cfg, "max_merge_cells", 1)
    _fraction(cfg, "collapse_fraction")
    _fraction(cfg, "factorizability_threshold")
    _require(
        0 <= cfg["split_attempt_probability"] <= 1,
        "split_attempt_probability must lie in [0, 1]",
    )
    _bracket(cfg, "epsilon_bracket")
    _choice(cfg, "scheme", {"split_step", "crank_nicolson"})
    _choice(cfg, "interaction_model", {"density_overlap", "potential_weighted_overlap"})
    _require(
        isinstance(cfg["packets"], list) and len(cfg["packets"]) >= 1,
        "packets must be a non-empty list",
    )
    for packet in cfg["packets"]:
        _require(
            isinstance(packet, dict)
            and set(packet) <= {"center", "sigma", "species"}
            and "sigma" in packet
            and packet["sigma"] > 0,
            "each packet needs a positive sigma and optional center/species",
        )


_VALIDATORS = {
    "starlight": _validate_starlight,
    "cmb": _validate_cmb,
    "simulate": _validate_simulate,
    "collapse-stats": _validate_collapse_stats,
    "world": _validate_world,
}


def load_config(command: str, path=None, seed_override: int | None = None) -> dict:
    """Merge a user config file over the command defaults, then validate."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    cfg = copy.deepcopy(DEFAULTS[command])
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
        cfg.update(user)
    if seed_override is not None:
        cfg["seed"] = seed_override
    _require(isinstance(cfg["seed"], int), "seed must be an integer")
    _VALIDATORS[command](cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical JSON encoding."""
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
