"""Table-producing commands behind the CLI.

Every command takes a validated :class:`ExperimentSpec` and returns a
:class:`CurveTable`; rows come out in grid order so output is deterministic.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

from .. import __version__
from ..analytic import (
    DivergentLimitError,
    ProtocolConfig,
    Scenario,
    Strategy,
    UnreachableTargetError,
    VariancePair,
    fidelity_from_variances,
    generation_variances,
    min_cycles_to_var_p,
    saturation_limit,
    storage_fidelity,
    target_fidelity,
)
from ..gaussian import Axis, MeterSpec, QuadratureState
from ..trajectory import Z_GATE, check_moments, run_ensemble_curve
from .spec import ConfigError, ExperimentSpec, dump_spec

UNREACHABLE = "unreachable"
MIN_COMPARE_TRAJECTORIES = 1000


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


@dataclass
class CurveTable:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self, header: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n" if line else "#\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([format_value(v) for v in row])
        return buf.getvalue()


def provenance(command: str, spec: ExperimentSpec) -> list[str]:
    mc = spec.monte_carlo
    lines = [
        f"ringerase {__version__} {command}",
        f"seed: {mc.seed}",
        f"trajectories: {mc.trajectories}",
        "config:",
    ]
    # the output path is left out so identical runs give identical files anywhere
    text = dump_spec(replace(spec, output=None))
    return lines + ["  " + line for line in text.splitlines()]


def _input_state(spec: ExperimentSpec) -> QuadratureState:
    i = spec.input
    return QuadratureState.from_variances(i.var_x, i.var_p, i.mean_x, i.mean_p)


def _input_pair(spec: ExperimentSpec) -> VariancePair:
    return VariancePair(spec.input.var_x, spec.input.var_p)


def _grid(spec: ExperimentSpec, names=("R", "G", "meter_var")):
    """Grid points as dicts, plus the names of the swept axes (more than one value)."""
    swept = [n for n in names if len(getattr(spec, n)) > 1]
    points = [dict(zip(names, combo)) for combo in itertools.product(*(getattr(spec, n) for n in names))]
    return points, swept


_GRID_COLUMN = {"R": "R", "G": "G", "meter_var": "sigma_M2"}


def _config(spec: ExperimentSpec, point: dict, strategy: Strategy, N: int, scenario=None) -> ProtocolConfig:
    return ProtocolConfig(
        R=point["R"],
        G=point.get("G", 1.0),
        N=N,
        meter=MeterSpec(Axis.X, point["meter_var"]),
        strategy=strategy,
        universal_correction=spec.universal_correction,
        scenario=scenario,
    )


def _mc_enabled(spec: ExperimentSpec) -> bool:
    return spec.monte_carlo.trajectories > 0


def _curve(spec, cfg, Ns, workers):
    mc = spec.monte_carlo
    if mc.trajectories < 2:
        raise ConfigError("monte_carlo.trajectories", "need at least 2 trajectories for Monte Carlo")
    return run_ensemble_curve(cfg, _input_state(spec), Ns, mc.trajectories, mc.seed, workers=workers)


def cmd_store(spec: ExperimentSpec, workers: int | None = None) -> CurveTable:
    """Storage fidelity against N for each strategy."""
    if spec.scenario is Scenario.GENERATION or any(g != 1 for g in spec.G):
        raise ConfigError("scenario", "store needs the storage scenario (G = 1)")
    points, swept = _grid(spec, ("R", "meter_var"))
    Ns = spec.cycles.values()
    inp = _input_pair(spec)
    columns = [_GRID_COLUMN[n] for n in swept] + ["N"] + [f"F_{s.value}" for s in spec.strategies]
    if _mc_enabled(spec):
        for s in spec.strategies:
            columns += [f"F_{s.value}_mc", f"F_{s.value}_se"]
    table = CurveTable(columns)

    def fid(mx, mp, vx, vp):
        return fidelity_from_variances(inp, VariancePair(vx, vp))

    for point in points:
        mc_cols = {}
        if _mc_enabled(spec):
            for s in spec.strategies:
                curve = _curve(spec, _config(spec, point, s, Ns[-1], Scenario.STORAGE), Ns, workers)
                mc_cols[s] = {n: (fid(*_moments(st)), st.se_of(fid)) for n, st in curve.items()}
        for N in Ns:
            row = [point[n] for n in swept] + [N]
            row += [storage_fidelity(_config(spec, point, s, N, Scenario.STORAGE), inp) for s in spec.strategies]
            for s in spec.strategies:
                if s in mc_cols:
                    row += list(mc_cols[s][N])
            table.rows.append(row)
    return table


def _moments(stats):
    return stats.mean_x, stats.mean_p, stats.var_x, stats.var_p


def _saturation(point: dict) -> float:
    try:
        return saturation_limit(point["R"], point["G"], point["meter_var"])
    except DivergentLimitError:
        return math.inf


def cmd_squeeze(spec: ExperimentSpec, workers: int | None = None) -> CurveTable:
    """Generated P variance and target fidelity against N for each strategy.

    ``saturation_ref`` is the large-N floor of strategy D (meter squeezed in P).
    """
    if spec.scenario is Scenario.STORAGE:
        raise ConfigError("scenario", "squeeze needs the generation scenario")
    points, swept = _grid(spec)
    Ns = spec.cycles.values()
    names = [s.value for s in spec.strategies]
    target = VariancePair(spec.target.var_x, spec.target.var_p)
    inp = _input_pair(spec)
    columns = [_GRID_COLUMN[n] for n in swept] + ["N"]
    columns += [f"varP_{s}" for s in names] + [f"log10_varP_{s}" for s in names]
    columns += [f"F_target_{s}" for s in names] + ["saturation_ref"]
    if _mc_enabled(spec):
        for s in names:
            columns += [f"varP_{s}_mc", f"varP_{s}_se"]
    table = CurveTable(columns)
    for point in points:
        mc_cols = {}
        if _mc_enabled(spec):
            for s in spec.strategies:
                cfg = _config(spec, point, s, Ns[-1], Scenario.GENERATION)
                curve = _curve(spec, cfg, Ns, workers)
                mc_cols[s] = {n: (st.var_p, float(st.se_var[1])) for n, st in curve.items()}
        sat = _saturation(point)
        for N in Ns:
            pairs = [
                generation_variances(_config(spec, point, s, N, Scenario.GENERATION), inp)
                for s in spec.strategies
            ]
            row = [point[n] for n in swept] + [N]
            row += [v.var_p for v in pairs]
            row += [math.log10(v.var_p) for v in pairs]
            row += [target_fidelity(v, target) for v in pairs]
            row.append(sat)
            for s in spec.strategies:
                if s in mc_cols:
                    row += list(mc_cols[s][N])
            table.rows.append(row)
    return table


def _first_generation_hit(spec, point, strategy, target, threshold):
    for N in range(spec.sweep.max_cycles + 1):
        v = generation_variances(_config(spec, point, strategy, N, Scenario.GENERATION), _input_pair(spec))
        if target_fidelity(v, target) >= threshold:
            return N
    return UNREACHABLE


def _last_storage_hold(spec, point, strategy, threshold):
    inp = _input_pair(spec)
    last = UNREACHABLE
    for N in range(spec.sweep.max_cycles + 1):
        if storage_fidelity(_config(spec, point, strategy, N, Scenario.STORAGE), inp) < threshold:
            break
        last = N
    return last


def cmd_sweep(spec: ExperimentSpec) -> CurveTable:
    """Cycle-count thresholds over a grid of at most two swept parameters.

    Generation: ``N_min_varP`` is the first N where the protected P variance
    reaches ``sweep.target_var_p``; ``N_min_F_<s>`` the first N where the
    target fidelity reaches ``sweep.target_fidelity``.  Storage:
    ``N_max_F_<s>`` is the last N at which the storage fidelity still meets
    the threshold.
    """
    points, swept = _grid(spec)
    if len(swept) > 2:
        raise ConfigError("grid", f"sweep varies at most two parameters, got {swept}")
    storage = spec.scenario is Scenario.STORAGE
    sw = spec.sweep
    columns = ["R", "G", "sigma_M2"]
    if not storage and sw.target_var_p is not None:
        columns.append("N_min_varP")
    if sw.target_fidelity is not None:
        prefix = "N_max_F_" if storage else "N_min_F_"
        columns += [prefix + s.value for s in spec.strategies]
    table = CurveTable(columns)
    target = VariancePair(spec.target.var_x, spec.target.var_p)
    for point in points:
        row = [point["R"], point["G"], point["meter_var"]]
        if not storage and sw.target_var_p is not None:
            try:
                row.append(min_cycles_to_var_p(point["R"], point["G"], sw.target_var_p))
            except UnreachableTargetError:
                row.append(UNREACHABLE)
        if sw.target_fidelity is not None:
            for s in spec.strategies:
                if storage:
                    row.append(_last_storage_hold(spec, point, s, sw.target_fidelity))
                else:
                    row.append(_first_generation_hit(spec, point, s, target, sw.target_fidelity))
        table.rows.append(row)
    return table


COMPARE_COLUMNS = [
    "scenario", "strategy", "R", "G", "sigma_M2", "N", "moment", "analytic", "mc", "se", "z", "pass",
]


def cmd_compare(
    spec: ExperimentSpec,
    weight_scale: float = 1.0,
    workers: int | None = None,
    gate: float = Z_GATE,
) -> CurveTable:
    """Monte Carlo versus analytic moments on every grid point, one row per moment."""
    mc = spec.monte_carlo
    if mc.trajectories < MIN_COMPARE_TRAJECTORIES:
        raise ConfigError(
            "monte_carlo.trajectories", f"compare needs at least {MIN_COMPARE_TRAJECTORIES} trajectories"
        )
    points, _ = _grid(spec)
    Ns = spec.cycles.values()
    inp = _input_state(spec)
    table = CurveTable(list(COMPARE_COLUMNS))
    for point in points:
        for s in spec.strategies:
            cfg = _config(spec, point, s, Ns[-1], spec.scenario)
            curve = run_ensemble_curve(cfg, inp, Ns, mc.trajectories, mc.seed, weight_scale, workers)
            for N in Ns:
                cfg_n = cfg.with_(N=N)
                for c in check_moments(cfg_n, inp, curve[N]):
                    table.rows.append([
                        cfg.scenario.value, s.value, point["R"], point["G"], point["meter_var"], N,
                        c.name, c.analytic, c.mc, c.se, c.z, abs(c.z) < gate,
                    ])
    return table


def failing_rows(table: CurveTable) -> list[list]:
    i = table.columns.index("pass")
    return [row for row in table.rows if not row[i]]


__all__ = [
    "CurveTable",
    "cmd_compare",
    "cmd_squeeze",
    "cmd_store",
    "cmd_sweep",
    "failing_rows",
    "provenance",
]
