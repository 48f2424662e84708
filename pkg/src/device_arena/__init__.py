from src.device_arena.arena import (
    ArenaConfig,
    ArenaUsageError,
    DeviceArena,
    InsufficientCapacity,
    MemoryFootprint,
    MemoryKind,
)
from src.device_arena.clock import Event, EventKind, OOMDeadlockError, VirtualClock, run_to_quiescence
from src.device_arena.profiles import ARENA_PROFILES, get_profile
from src.device_arena.transfer import (
    Direction,
    TransferChannel,
    TransferMode,
    TransferRequest,
    transfer_duration,
)

__all__ = [
    "ARENA_PROFILES",
    "ArenaConfig",
    "ArenaUsageError",
    "DeviceArena",
    "Direction",
    "Event",
    "EventKind",
    "InsufficientCapacity",
    "MemoryFootprint",
    "MemoryKind",
    "OOMDeadlockError",
    "TransferChannel",
    "TransferMode",
    "TransferRequest",
    "VirtualClock",
    "get_profile",
    "run_to_quiescence",
    "transfer_duration",
]
