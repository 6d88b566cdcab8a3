from .commands import CurveTable, cmd_compare, cmd_squeeze, cmd_store, cmd_sweep, failing_rows
from .spec import (
    PRESETS,
    ConfigError,
    Cycles,
    ExperimentSpec,
    InputState,
    MonteCarlo,
    Sweep,
    Target,
    dump_spec,
    load_spec,
    preset,
    read_spec,
)

__all__ = [
    "PRESETS",
    "ConfigError",
    "CurveTable",
    "Cycles",
    "ExperimentSpec",
    "InputState",
    "MonteCarlo",
    "Sweep",
    "Target",
    "cmd_compare",
    "cmd_squeeze",
    "cmd_store",
    "cmd_sweep",
    "dump_spec",
    "failing_rows",
    "load_spec",
    "preset",
    "read_spec",
]
