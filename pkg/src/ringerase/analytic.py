"""Closed-form output moments of the ring-cavity protocol.

Two scenarios share one cycle map (crystal gain ``G`` then mirror with
amplitude reflectivity ``R``):

* storage (empty cavity, ``G = 1``): after ``N`` cycles the homodyne record is
  erased by a single P displacement followed by the squeezer ``X -> X/R^N``;
* generation (``G > 1``): the same displacement, no final squeezer.

Four strategies are compared:

A  meter squeezed in X, homodyne on the outgoing P, feed-forward
B  vacuum meter, homodyne, feed-forward
C  vacuum meter, nothing measured
D  meter squeezed in P, nothing measured

Inputs and outputs are zero-correlation (var_x, var_p) pairs; the protocol
never creates X-P correlations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

from .gaussian import VACUUM_VAR, Axis, MeterSpec

DEFAULT_R = 0.99
DEFAULT_G = math.exp(0.02)
DEFAULT_METER_VAR = 0.5 * math.exp(-2)
DEFAULT_TARGET_VAR_P = 0.5 * math.exp(-5)

_RATIO_TOL = 1e-9


class Strategy(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"

    @property
    def measured(self) -> bool:
        return self in (Strategy.A, Strategy.B)


class Scenario(str, enum.Enum):
    STORAGE = "storage"
    GENERATION = "generation"


class DivergentLimitError(ValueError):
    """Raised when an N -> infinity limit does not exist."""


class UnreachableTargetError(ValueError):
    """Raised when no finite cycle count reaches a requested variance."""


@dataclass(frozen=True)
class VariancePair:
    var_x: float
    var_p: float

    def __post_init__(self):
        if not (self.var_x > 0 and self.var_p > 0):
            raise ValueError(f"variances must be positive, got ({self.var_x}, {self.var_p})")

    @classmethod
    def vacuum(cls) -> VariancePair:
        return cls(VACUUM_VAR, VACUUM_VAR)


@dataclass(frozen=True)
class ProtocolConfig:
    """Cavity, meter and strategy for one protocol run.

    ``meter`` names the available squeezing resource; its orientation is set
    by the strategy (A squeezes X, D squeezes P, B and C inject vacuum).
    ``universal_correction`` only matters for C/D storage: when set, the
    released state passes a phase-insensitive amplifier of gain ``R^-N``.
    """

    R: float = DEFAULT_R
    G: float = 1.0
    N: int = 0
    meter: MeterSpec = field(default_factory=lambda: MeterSpec(Axis.X, DEFAULT_METER_VAR))
    strategy: Strategy = Strategy.A
    universal_correction: bool = True
    scenario: Scenario | None = None

    def __post_init__(self):
        if not 0 < self.R <= 1:
            raise ValueError(f"R must lie in (0, 1], got {self.R}")
        if not self.G >= 1:
            raise ValueError(f"G must be >= 1, got {self.G}")
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a non-negative integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        scenario = self.scenario
        if scenario is None:
            scenario = Scenario.STORAGE if self.G == 1 else Scenario.GENERATION
        scenario = Scenario(scenario)
        if scenario is Scenario.STORAGE and self.G != 1:
            raise ValueError("storage scenario requires G = 1")
        object.__setattr__(self, "scenario", scenario)

    @property
    def T(self) -> float:
        return math.sqrt(1.0 - self.R * self.R)

    def with_(self, **changes) -> ProtocolConfig:
        if "G" in changes and "scenario" not in changes:
            changes["scenario"] = None
        return replace(self, **changes)

    def effective_meter(self) -> MeterSpec:
        """Meter state actually injected under this strategy."""
        if self.strategy is Strategy.A:
            return MeterSpec(Axis.X, self.meter.squeezed_var, self.meter.anti_var)
        if self.strategy is Strategy.D:
            return MeterSpec(Axis.P, self.meter.squeezed_var, self.meter.anti_var)
        return MeterSpec(Axis.X, VACUUM_VAR)

    def meter_variances(self) -> tuple[float, float]:
        m = self.effective_meter()
        if m.squeezed_axis is Axis.X:
            return m.squeezed_var, m.anti_squeezed_var
        return m.anti_squeezed_var, m.squeezed_var


def geometric_sum(q: float, N: int) -> float:
    """sum_{j=0}^{N-1} q^(2j), with the direct sum near the q = 1 pole."""
    if abs(q - 1.0) < _RATIO_TOL:
        return math.fsum(q ** (2 * j) for j in range(N))
    return (1.0 - q ** (2 * N)) / (1.0 - q * q)


def _amp_excess(R: float, N: int) -> float:
    # R^(-2N) - 1 without cancellation for R close to 1
    try:
        return math.expm1(-2 * N * math.log(R))
    except OverflowError:
        return math.inf


def storage_variances(cfg: ProtocolConfig, input: VariancePair) -> VariancePair:
    if cfg.G != 1:
        raise ValueError("storage_variances needs G = 1")
    if cfg.N == 0:
        return input
    vxm, vpm = cfg.meter_variances()
    excess = _amp_excess(cfg.R, cfg.N)
    if cfg.strategy.measured:
        return VariancePair(input.var_x + excess * vxm, input.var_p)
    if cfg.universal_correction:
        return VariancePair(
            input.var_x + excess * (vxm + VACUUM_VAR),
            input.var_p + excess * (vpm + VACUUM_VAR),
        )
    keep = cfg.R ** (2 * cfg.N)
    lost = -math.expm1(2 * cfg.N * math.log(cfg.R))
    return VariancePair(keep * input.var_x + lost * vxm, keep * input.var_p + lost * vpm)


def fidelity_from_variances(a: VariancePair, b: VariancePair) -> float:
    """Overlap of two equal-mean, uncorrelated Gaussian states."""
    return 1.0 / math.sqrt((a.var_x + b.var_x) * (a.var_p + b.var_p))


def storage_fidelity(cfg: ProtocolConfig, input: VariancePair) -> float:
    return fidelity_from_variances(input, storage_variances(cfg, input))


def target_fidelity(produced: VariancePair, target: VariancePair) -> float:
    return fidelity_from_variances(produced, target)


def generation_variances(cfg: ProtocolConfig, input: VariancePair | None = None) -> VariancePair:
    """Output variances after ``N`` gain+mirror cycles, no final squeezer.

    ``input`` defaults to vacuum; any other uncorrelated input propagates
    linearly through the same map.
    """
    if input is None:
        input = VariancePair.vacuum()
    R, G, N, T2 = cfg.R, cfg.G, cfg.N, 1.0 - cfg.R * cfg.R
    vxm, vpm = cfg.meter_variances()
    up = R * G
    var_x = input.var_x * up ** (2 * N) + T2 * geometric_sum(up, N) * vxm
    if cfg.strategy.measured:
        var_p = input.var_p * up ** (-2 * N)
    else:
        down = R / G
        var_p = input.var_p * down ** (2 * N) + T2 * geometric_sum(down, N) * vpm
    return VariancePair(var_x, var_p)


def output_variances(cfg: ProtocolConfig, input: VariancePair) -> VariancePair:
    if cfg.scenario is Scenario.STORAGE:
        return storage_variances(cfg, input)
    return generation_variances(cfg, input)


def mean_transfer(cfg: ProtocolConfig) -> tuple[float, float]:
    """Multipliers taking the input means to the ensemble output means."""
    R, G, N = cfg.R, cfg.G, cfg.N
    if cfg.scenario is Scenario.STORAGE:
        if cfg.strategy.measured or cfg.universal_correction:
            return 1.0, 1.0
        return R**N, R**N
    if cfg.strategy.measured:
        return (R * G) ** N, (R * G) ** (-N)
    return (R * G) ** N, (R / G) ** N


def saturation_limit(R: float, G: float, meter_p_var: float) -> float:
    """Large-N floor of the unprotected P variance."""
    if not G > R:
        raise DivergentLimitError(f"no finite limit for G={G} <= R={R}")
    return G * G * (1.0 - R * R) / (G * G - R * R) * meter_p_var


def min_cycles_to_var_p(R: float, G: float, target_var_p: float) -> int:
    """Smallest N with protected var_p = 0.5 (RG)^(-2N) <= target."""
    if not target_var_p > 0:
        raise ValueError(f"target variance must be positive, got {target_var_p}")
    if target_var_p >= VACUUM_VAR:
        return 0
    log_rg = math.log(R * G)
    if log_rg <= 0:
        raise UnreachableTargetError(f"RG = {R * G} <= 1 never squeezes below vacuum")

    def var_p(n):
        return VACUUM_VAR * math.exp(-2 * n * log_rg)

    n = math.ceil(math.log(VACUUM_VAR / target_var_p) / (2 * log_rg))
    while n > 0 and var_p(n - 1) <= target_var_p:
        n -= 1
    while var_p(n) > target_var_p:
        n += 1
    return n
