from .world import Task, World, read_world, world_from_dict
from .model_variables import AuctionConfig, SimConfig, DEFAULT_CONFIG, resolve_config

__all__ = [
    "Task",
    "World",
    "read_world",
    "world_from_dict",
    "AuctionConfig",
    "SimConfig",
    "DEFAULT_CONFIG",
    "resolve_config",
]
