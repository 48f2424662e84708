"""
Named arena presets.

The numbers are simulator defaults, not measurements: eviction runs at half
the host-to-device bandwidth and the host computes fifty times slower than
the device.
"""

from __future__ import annotations

from src.device_arena.arena import ArenaConfig

ARENA_PROFILES: dict[str, ArenaConfig] = {
    "desk-default": ArenaConfig(),
    "fast-link": ArenaConfig(h2d_bandwidth=5440.0, d2h_bandwidth=2720.0),
    "slow-eviction": ArenaConfig(d2h_bandwidth=170.0),
    "tight-memory": ArenaConfig(capacity_bytes=8_000),
}


def get_profile(name: str) -> ArenaConfig:
    try:
        return ARENA_PROFILES[name]
    except KeyError:
        known = ", ".join(sorted(ARENA_PROFILES))
        raise ValueError(f"unknown arena profile '{name}' (known: {known})") from None
