"""Experiment descriptions, built-in presets and their YAML form."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from ..analytic import (
    DEFAULT_G,
    DEFAULT_METER_VAR,
    DEFAULT_R,
    DEFAULT_TARGET_VAR_P,
    Scenario,
    Strategy,
)
from ..trajectory import DEFAULT_TRAJECTORIES


class ConfigError(ValueError):
    """Invalid experiment description; ``field`` names the offending key."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class Cycles:
    start: int = 1
    stop: int = 500
    step: int = 1

    def values(self) -> list[int]:
        return list(range(self.start, self.stop + 1, self.step))


@dataclass(frozen=True)
class InputState:
    var_x: float = 0.5
    var_p: float = 0.5
    mean_x: float = 0.0
    mean_p: float = 0.0


@dataclass(frozen=True)
class Target:
    var_x: float = 0.5 * math.exp(5)
    var_p: float = DEFAULT_TARGET_VAR_P


@dataclass(frozen=True)
class Sweep:
    target_var_p: float | None = DEFAULT_TARGET_VAR_P
    target_fidelity: float | None = None
    max_cycles: int = 5000


@dataclass(frozen=True)
class MonteCarlo:
    trajectories: int = DEFAULT_TRAJECTORIES
    seed: int = 0


@dataclass(frozen=True)
class ExperimentSpec:
    # None ("auto" on disk): storage where G = 1, generation elsewhere
    scenario: Scenario | None = Scenario.STORAGE
    strategies: tuple[Strategy, ...] = tuple(Strategy)
    universal_correction: bool = True
    R: tuple[float, ...] = (DEFAULT_R,)
    G: tuple[float, ...] = (1.0,)
    meter_var: tuple[float, ...] = (DEFAULT_METER_VAR,)
    cycles: Cycles = field(default_factory=Cycles)
    input: InputState = field(default_factory=InputState)
    target: Target = field(default_factory=Target)
    sweep: Sweep = field(default_factory=Sweep)
    monte_carlo: MonteCarlo = field(default_factory=MonteCarlo)
    output: str | None = None

    def validate(self) -> ExperimentSpec:
        if not self.strategies:
            raise ConfigError("strategies", "at least one strategy is required")
        for name in ("R", "G", "meter_var"):
            if not getattr(self, name):
                raise ConfigError(name, "grid must not be empty")
        for r in self.R:
            if not 0 < r <= 1:
                raise ConfigError("R", f"reflectivity {r} outside (0, 1]")
        for g in self.G:
            if not g >= 1:
                raise ConfigError("G", f"gain {g} below 1")
        if self.scenario is Scenario.STORAGE and any(g != 1 for g in self.G):
            raise ConfigError("G", "storage scenario needs G = 1")
        for v in self.meter_var:
            if not v > 0:
                raise ConfigError("meter_var", f"variance {v} must be positive")
        c = self.cycles
        if c.start < 0 or c.step < 1 or c.stop < c.start:
            raise ConfigError("cycles", f"need 0 <= start <= stop and step >= 1, got {c}")
        inp = self.input
        if not (inp.var_x > 0 and inp.var_p > 0) or inp.var_x * inp.var_p < 0.25 - 1e-9:
            raise ConfigError("input", "variances must be positive with var_x*var_p >= 1/4")
        if not (self.target.var_x > 0 and self.target.var_p > 0):
            raise ConfigError("target", "variances must be positive")
        sw = self.sweep
        if sw.target_var_p is not None and not sw.target_var_p > 0:
            raise ConfigError("sweep.target_var_p", "must be positive")
        if sw.target_fidelity is not None and not 0 < sw.target_fidelity <= 1:
            raise ConfigError("sweep.target_fidelity", "must lie in (0, 1]")
        if sw.max_cycles < 0:
            raise ConfigError("sweep.max_cycles", "must be non-negative")
        if self.monte_carlo.trajectories < 0:
            raise ConfigError("monte_carlo.trajectories", "must be non-negative")
        if not 0 <= self.monte_carlo.seed < 2**64:
            raise ConfigError("monte_carlo.seed", "must fit in an unsigned 64-bit integer")
        return self

    def with_mc(self, trajectories: int | None = None, seed: int | None = None) -> ExperimentSpec:
        mc = self.monte_carlo
        return replace(
            self,
            monte_carlo=MonteCarlo(
                mc.trajectories if trajectories is None else trajectories,
                mc.seed if seed is None else seed,
            ),
        )


_SECTIONS = {"cycles": Cycles, "input": InputState, "target": Target, "sweep": Sweep, "monte_carlo": MonteCarlo}
_GRIDS = ("R", "G", "meter_var")


def spec_to_dict(spec: ExperimentSpec) -> dict:
    d = asdict(spec)
    d["scenario"] = spec.scenario.value if spec.scenario else "auto"
    d["strategies"] = [s.value for s in spec.strategies]
    for name in _GRIDS:
        d[name] = list(d[name])
    return d


def _section(name: str, cls, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigError(name, "expected a mapping")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}", "unknown key")
    out = {}
    for f in fields(cls):
        if f.name not in raw:
            continue
        value, default = raw[f.name], f.default
        try:
            if isinstance(default, int) and not isinstance(default, bool):
                if isinstance(value, bool) or int(value) != value:
                    raise ValueError
                out[f.name] = int(value)
            elif value is None and "None" in str(f.type):
                out[f.name] = None
            else:
                if isinstance(value, bool):
                    raise ValueError
                out[f.name] = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}.{f.name}", f"bad value {value!r}") from None
    return cls(**out)


def spec_from_dict(raw: dict) -> ExperimentSpec:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "expected a mapping")
    known = {f.name for f in fields(ExperimentSpec)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(key, "unknown key")
        if key in _SECTIONS:
            kwargs[key] = _section(key, _SECTIONS[key], value)
        elif key in _GRIDS:
            values = value if isinstance(value, list) else [value]
            try:
                kwargs[key] = tuple(float(v) for v in values)
            except (TypeError, ValueError):
                raise ConfigError(key, f"expected numbers, got {value!r}") from None
        elif key == "scenario":
            try:
                kwargs[key] = None if value == "auto" else Scenario(value)
            except ValueError:
                raise ConfigError(key, f"expected storage, generation or auto, got {value!r}") from None
        elif key == "strategies":
            try:
                kwargs[key] = tuple(Strategy(s) for s in value)
            except (TypeError, ValueError):
                raise ConfigError(key, f"expected a list drawn from A, B, C, D, got {value!r}") from None
        elif key == "universal_correction":
            if not isinstance(value, bool):
                raise ConfigError(key, "expected true or false")
            kwargs[key] = value
        elif key == "output":
            if value is not None and not isinstance(value, str):
                raise ConfigError(key, "expected a path")
            kwargs[key] = value
    return ExperimentSpec(**kwargs).validate()


def dump_spec(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False)


def load_spec(text: str) -> ExperimentSpec:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    return spec_from_dict(raw or {})


def read_spec(path: str) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            return load_spec(fh.read())
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None


_STORAGE = dict(scenario=Scenario.STORAGE, R=(DEFAULT_R,), G=(1.0,), meter_var=(DEFAULT_METER_VAR,),
                cycles=Cycles(1, 500, 1))
_GENERATION = dict(scenario=Scenario.GENERATION, R=(DEFAULT_R,), G=(DEFAULT_G,), meter_var=(DEFAULT_METER_VAR,),
                   cycles=Cycles(1, 2000, 1), input=InputState(), target=Target())

PRESETS = {
    # coherent state of unknown amplitude, universal correction for every strategy
    "store-coherent": ExperimentSpec(**_STORAGE, input=InputState(0.5, 0.5, 3.0, 1.0)),
    # known squeezed vacuum: no amplifier needed for C/D
    "store-squeezed": ExperimentSpec(
        **_STORAGE,
        input=InputState(0.5 * math.exp(5), 0.5 * math.exp(-5)),
        universal_correction=False,
    ),
    # vacuum input amplified and squeezed, scored against the target state
    "generate": ExperimentSpec(**_GENERATION),
    # analytic-vs-Monte Carlo grid: both scenarios at N = 100, coherent input
    "crosscheck": ExperimentSpec(
        scenario=None,
        R=(DEFAULT_R,),
        G=(1.0, DEFAULT_G),
        meter_var=(DEFAULT_METER_VAR,),
        cycles=Cycles(100, 100, 1),
        input=InputState(0.5, 0.5, 3.0, 1.0),
    ),
}


def preset(name: str) -> ExperimentSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError("--preset", f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
