"""Conditional-Gaussian Monte Carlo of the protocol, cycle by cycle.

Each trajectory carries a Gaussian conditional state.  Its covariance does
not depend on the homodyne outcomes, so it is propagated once per
configuration; only the conditional means are sampled.  Ensemble moments
follow from the law of total variance:

    ens_cov = conditional covariance + sample covariance of conditional means

Trajectories are split into (at most) 100 contiguous groups.  Each group owns
a random stream derived from ``(seed, group index)`` and doubles as a
jackknife block, so the result for fixed ``(seed, n_traj, cfg)`` does not
depend on how many workers run the groups or in which order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .analytic import ProtocolConfig, Scenario, VariancePair, mean_transfer, output_variances
from .gaussian import (
    QuadratureState,
    amplify,
    make_squeezed,
    mirror_homodyne,
    mirror_homodyne_gain,
    mirror_matrix,
    mirror_mix,
    squeeze_gain,
)

DEFAULT_TRAJECTORIES = 100_000
JACKKNIFE_BLOCKS = 100
Z_GATE = 3.0
MOMENTS = ("mean_x", "mean_p", "var_x", "var_p")


@dataclass(frozen=True)
class MeasurementRecord:
    """Homodyne outcomes i_P1 ... i_PN in emission order."""

    outcomes: tuple[float, ...] = ()

    def __len__(self):
        return len(self.outcomes)


@dataclass(frozen=True)
class TrajectoryResult:
    final_state: QuadratureState
    record: MeasurementRecord


# -- single trajectory --------------------------------------------------------

def run_cycle(
    signal: QuadratureState,
    cfg: ProtocolConfig,
    rng: np.random.Generator | None = None,
    outcome: float | None = None,
) -> tuple[QuadratureState, float | None]:
    """One round trip: crystal gain, mirror with a fresh meter, optional homodyne."""
    state = squeeze_gain(signal, cfg.G)
    meter = make_squeezed(cfg.effective_meter())
    if not cfg.strategy.measured:
        return mirror_mix(state, meter, cfg.R).signal(), None
    return mirror_homodyne(state, meter, cfg.R, rng=rng, outcome=outcome)[::-1]


def feedforward_weights(cfg: ProtocolConfig) -> np.ndarray:
    """Weights of the final P displacement, one per outcome in emission order."""
    R, N = cfg.R, cfg.N
    k = np.arange(1, N + 1)
    return (cfg.T / R) * (R * cfg.G) ** (k - N)


def _finalize(state: QuadratureState, cfg: ProtocolConfig) -> QuadratureState:
    if cfg.scenario is not Scenario.STORAGE or cfg.N == 0:
        return state
    if cfg.strategy.measured:
        return squeeze_gain(state, cfg.R ** (-cfg.N))
    if cfg.universal_correction:
        return amplify(state, cfg.R ** (-cfg.N))
    return state


def apply_feedforward(
    state: QuadratureState,
    record: MeasurementRecord,
    cfg: ProtocolConfig,
    weight_scale: float = 1.0,
) -> QuadratureState:
    """Erase the homodyne record with one P displacement, then apply the final correction.

    ``weight_scale`` deliberately miscalibrates the displacement; it exists
    to probe the sensitivity of the cross-validation.
    """
    expected = cfg.N if cfg.strategy.measured else 0
    if len(record) != expected:
        raise ValueError(
            f"strategy {cfg.strategy.value} with N={cfg.N} needs {expected} outcomes, "
            f"got {len(record)}"
        )
    if expected:
        dp = weight_scale * float(feedforward_weights(cfg) @ np.asarray(record.outcomes))
        state = QuadratureState(state.mean_x, state.mean_p + dp, state.cov)
    return _finalize(state, cfg)


def run_trajectory(
    cfg: ProtocolConfig,
    input: QuadratureState,
    rng: np.random.Generator,
    weight_scale: float = 1.0,
) -> TrajectoryResult:
    state, outcomes = input, []
    for _ in range(cfg.N):
        state, i = run_cycle(state, cfg, rng=rng)
        if i is not None:
            outcomes.append(i)
    record = MeasurementRecord(tuple(outcomes))
    return TrajectoryResult(apply_feedforward(state, record, cfg, weight_scale), record)


# -- vectorised ensemble ------------------------------------------------------

@dataclass(frozen=True)
class _CycleTrack:
    """Outcome-independent part of the dynamics, shared by all trajectories."""

    mean_map: np.ndarray  # (2, 2) signal-mean map before conditioning
    meter_p_row: np.ndarray  # (2,) meter-P mean as a function of the signal mean
    cond_shift: np.ndarray  # (n_max, 2) conditional-mean shift per unit normal draw
    outcome_std: np.ndarray  # (n_max,)
    cond_cov: list  # conditional covariance after cycle n, n = 0..n_max


def _track(cfg: ProtocolConfig, input: QuadratureState, n_max: int) -> _CycleTrack:
    S = mirror_matrix(cfg.R)
    g = np.diag([cfg.G, 1.0 / cfg.G])
    meter = make_squeezed(cfg.effective_meter())
    state = QuadratureState(0.0, 0.0, input.cov)
    covs = [state.cov]
    shifts = np.zeros((n_max, 2))
    stds = np.zeros(n_max)
    for n in range(n_max):
        gained = squeeze_gain(state, cfg.G)
        if cfg.strategy.measured:
            k, var_m, cov = mirror_homodyne_gain(gained, meter, cfg.R)
            stds[n] = math.sqrt(var_m)
            shifts[n] = k * stds[n]
            state = QuadratureState(0.0, 0.0, cov)
        else:
            state = mirror_mix(gained, meter, cfg.R).signal()
        covs.append(state.cov)
    return _CycleTrack(S[:2, :2] @ g, S[3, :2] @ g, shifts, stds, covs)


def _final_cov(cov: np.ndarray, cfg: ProtocolConfig, n: int) -> np.ndarray:
    return _finalize(QuadratureState(0.0, 0.0, cov), cfg.with_(N=n)).cov


def _final_scale(cfg: ProtocolConfig, n: int) -> np.ndarray:
    """Per-quadrature factor applied to the means by the final correction."""
    probe = _finalize(QuadratureState(1.0, 1.0, 0.5 * np.eye(2)), cfg.with_(N=n))
    return probe.mean


def _group_stream(seed: int, group: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(group,))))


def _simulate_group(cfg, input, track, scales, size, rng, weight_scale, keep_outcomes=False):
    """Run ``size`` trajectories; return per-checkpoint (mean, M2) of corrected means.

    ``scales`` maps each checkpoint to its final-correction mean factors.
    """
    R, G, T = cfg.R, cfg.G, cfg.T
    measured = cfg.strategy.measured
    m = np.tile(input.mean, (size, 1))
    acc = np.zeros(size)
    out = {}
    outcomes = [] if keep_outcomes else None

    def snapshot(n):
        corrected = m.copy()
        if measured:
            corrected[:, 1] += weight_scale * acc
        corrected *= scales[n]
        dev = corrected - corrected[0]
        mu = dev.mean(axis=0)
        c = dev - mu
        out[n] = (corrected[0] + mu, c.T @ c, corrected if keep_outcomes else None)

    if 0 in scales:
        snapshot(0)
    for n in range(1, max(scales) + 1):
        mu_pm = m @ track.meter_p_row
        m = m @ track.mean_map.T
        if measured:
            z = rng.standard_normal(size)
            m += np.outer(z, track.cond_shift[n - 1])
            i = mu_pm + track.outcome_std[n - 1] * z
            acc = acc / (R * G) + (T / R) * i
            if keep_outcomes:
                outcomes.append(i)
        if n in scales:
            snapshot(n)
    if keep_outcomes:
        return out, np.array(outcomes).T.reshape(size, -1)
    return out


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    """Monte Carlo estimate of the ensemble output moments.

    ``replicates`` holds leave-one-block-out estimates of
    (mean_x, mean_p, var_x, var_p), one row per jackknife block.
    """

    n_traj: int
    mean_x: float
    mean_p: float
    ens_cov: np.ndarray = field(repr=False)
    cond_cov: np.ndarray = field(repr=False)
    se_mean: np.ndarray = field(repr=False)
    se_var: np.ndarray = field(repr=False)
    replicates: np.ndarray = field(repr=False)

    @property
    def var_x(self) -> float:
        return float(self.ens_cov[0, 0])

    @property
    def var_p(self) -> float:
        return float(self.ens_cov[1, 1])

    def se_of(self, fn: Callable[[float, float, float, float], float]) -> float:
        """Jackknife standard error of any smooth function of the four moments."""
        vals = np.array([fn(*row) for row in self.replicates])
        vals = vals - vals[0]
        h = len(vals)
        return float(math.sqrt((h - 1) / h * np.sum((vals - vals.mean()) ** 2)))

    def __eq__(self, other):
        if not isinstance(other, EnsembleStats):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("n_traj", "mean_x", "mean_p", "ens_cov", "cond_cov", "se_mean", "se_var", "replicates")
        )


def _reduce(n_g: np.ndarray, means: np.ndarray, m2: np.ndarray, cond_cov: np.ndarray) -> EnsembleStats:
    n = int(n_g.sum())
    ref = means[0]
    d = means - ref
    dbar = (n_g[:, None] * d).sum(axis=0) / n
    e = d - dbar
    m2_tot = m2.sum(axis=0) + np.einsum("g,gi,gj->ij", n_g, e, e)
    ens_cov = cond_cov + m2_tot / (n - 1)

    h = len(n_g)
    n_loo = n - n_g
    dbar_loo = (n * dbar - n_g[:, None] * d) / n_loo[:, None]
    diff = d[None, :, :] - dbar_loo[:, None, :]
    w = np.tile(n_g.astype(float), (h, 1))
    np.fill_diagonal(w, 0.0)
    m2_loo = (m2.sum(axis=0) - m2) + np.einsum("hg,hgi,hgj->hij", w, diff, diff)
    var_loo = cond_cov[None] + m2_loo / (n_loo - 1)[:, None, None]
    mean_loo = ref + dbar_loo
    reps = np.column_stack([mean_loo[:, 0], mean_loo[:, 1], var_loo[:, 0, 0], var_loo[:, 1, 1]])
    dev = reps - reps[0]
    spread = np.sqrt((h - 1) / h * np.sum((dev - dev.mean(axis=0)) ** 2, axis=0))
    mean = ref + dbar
    return EnsembleStats(
        n_traj=n,
        mean_x=float(mean[0]),
        mean_p=float(mean[1]),
        ens_cov=0.5 * (ens_cov + ens_cov.T),
        cond_cov=cond_cov,
        se_mean=spread[:2],
        se_var=spread[2:],
        replicates=reps,
    )


def run_ensemble_curve(
    cfg: ProtocolConfig,
    input: QuadratureState,
    checkpoints: Sequence[int],
    n_traj: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    weight_scale: float = 1.0,
    workers: int | None = None,
) -> dict[int, EnsembleStats]:
    """Ensemble statistics at several cycle counts from one set of trajectories.

    The trajectory to ``N`` cycles is a prefix of the one to ``N' > N``; only
    the final correction differs, so each checkpoint reuses the same draws.
    """
    if n_traj < 2:
        raise ValueError(f"n_traj must be >= 2, got {n_traj}")
    checkpoints = sorted({int(n) for n in checkpoints})
    if not checkpoints or checkpoints[0] < 0:
        raise ValueError("checkpoints must be non-empty and non-negative")
    track = _track(cfg, input, checkpoints[-1])
    scales = {n: _final_scale(cfg, n) for n in checkpoints}
    sizes = [len(a) for a in np.array_split(np.arange(n_traj), min(JACKKNIFE_BLOCKS, n_traj))]

    def work(group):
        return _simulate_group(cfg, input, track, scales, sizes[group], _group_stream(seed, group), weight_scale)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            groups = list(pool.map(work, range(len(sizes))))
    else:
        groups = [work(g) for g in range(len(sizes))]

    n_g = np.array(sizes)
    result = {}
    for n in checkpoints:
        means = np.array([g[n][0] for g in groups])
        m2 = np.array([g[n][1] for g in groups])
        result[n] = _reduce(n_g, means, m2, _final_cov(track.cond_cov[n], cfg, n))
    return result


def run_ensemble(
    cfg: ProtocolConfig,
    input: QuadratureState,
    n_traj: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    weight_scale: float = 1.0,
    workers: int | None = None,
) -> EnsembleStats:
    return run_ensemble_curve(cfg, input, [cfg.N], n_traj, seed, weight_scale, workers)[cfg.N]


def sample_block(
    cfg: ProtocolConfig, input: QuadratureState, size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Corrected conditional means, outcome records and conditional covariance
    for ``size`` trajectories of the vectorised engine."""
    track = _track(cfg, input, cfg.N)
    scales = {cfg.N: _final_scale(cfg, cfg.N)}
    out, outcomes = _simulate_group(cfg, input, track, scales, size, rng, 1.0, keep_outcomes=True)
    return out[cfg.N][2], outcomes, _final_cov(track.cond_cov[cfg.N], cfg, cfg.N)


# -- analytic comparison ------------------------------------------------------

@dataclass(frozen=True)
class MomentCheck:
    name: str
    analytic: float
    mc: float
    se: float
    z: float


@dataclass(frozen=True)
class CrossValidation:
    cfg: ProtocolConfig
    n_traj: int
    seed: int
    checks: tuple[MomentCheck, ...]

    @property
    def max_abs_z(self) -> float:
        return max(abs(c.z) for c in self.checks)

    def failing(self, gate: float = Z_GATE) -> list[MomentCheck]:
        return [c for c in self.checks if not abs(c.z) < gate]

    def passed(self, gate: float = Z_GATE) -> bool:
        return not self.failing(gate)


def z_score(mc: float, analytic: float, se: float) -> float:
    diff = mc - analytic
    if se > 0:
        return diff / se
    # a zero standard error means the moment is deterministic; allow rounding only
    if abs(diff) <= 1e-9 * max(1.0, abs(analytic)):
        return 0.0
    return math.copysign(math.inf, diff)


def analytic_moments(cfg: ProtocolConfig, input: QuadratureState) -> tuple[float, float, float, float]:
    if input.cov_xp != 0:
        raise ValueError("analytic model needs an uncorrelated input state")
    fx, fp = mean_transfer(cfg)
    v = output_variances(cfg, VariancePair(input.var_x, input.var_p))
    return input.mean_x * fx, input.mean_p * fp, v.var_x, v.var_p


def cross_validate(
    cfg: ProtocolConfig,
    input: QuadratureState,
    n_traj: int = DEFAULT_TRAJECTORIES,
    seed: int = 0,
    weight_scale: float = 1.0,
    workers: int | None = None,
) -> CrossValidation:
    stats = run_ensemble(cfg, input, n_traj, seed, weight_scale, workers)
    return CrossValidation(cfg, stats.n_traj, seed, check_moments(cfg, input, stats))


def check_moments(cfg: ProtocolConfig, input: QuadratureState, stats: EnsembleStats) -> tuple[MomentCheck, ...]:
    predicted = analytic_moments(cfg, input)
    measured = (stats.mean_x, stats.mean_p, stats.var_x, stats.var_p)
    errors = (*stats.se_mean, *stats.se_var)
    return tuple(
        MomentCheck(name, a, float(m), float(se), z_score(float(m), a, float(se)))
        for name, a, m, se in zip(MOMENTS, predicted, measured, errors)
    )
