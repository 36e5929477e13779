from .history import HistoryLog, LogFormatError, digest
from .sim import (
    MS, SECOND, Call, ClientProcess, DelayModel, Halt, SimConfig, SimResult, Simulator, Sleep, run,
)

__all__ = [
    "MS", "SECOND", "Call", "ClientProcess", "DelayModel", "Halt", "HistoryLog", "LogFormatError",
    "SimConfig", "SimResult", "Simulator", "Sleep", "digest", "run",
]
