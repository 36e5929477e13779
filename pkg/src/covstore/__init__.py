"""Coverable, reconfigurable, erasure-coded storage with a deterministic simulator and checkers."""

from .coverable import CoverableClient
from .faults import NO_FAULTS, Faults
from .types import (
    T0, Block, BlockId, ConfigEntry, Configuration, DapKind, Flag, Status, Tag, TaggedValue,
    WriteOutcome, compare_tags, fault_bound, quorum_size,
)

__version__ = "0.1.0"

__all__ = [
    "CoverableClient", "Faults", "NO_FAULTS", "T0", "Block", "BlockId", "ConfigEntry",
    "Configuration", "DapKind", "Flag", "Status", "Tag", "TaggedValue", "WriteOutcome",
    "compare_tags", "fault_bound", "quorum_size",
]
