"""Experiment harness: config parsing, replication ensembles, CSV outputs.

An experiment config is a cross product of distribution pairs, arrival
frequencies, targets and controls.  Each resulting cell runs an ensemble
of independent replications (seeded from the master seed and the
replication index, so results do not depend on execution order or worker
count), averages the queue-length and virtual-response series, and
evaluates the stabilization report over the last full period.
"""

from __future__ import annotations

import json
import math
import multiprocessing
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from ._version import VERSION
from .arrivals import FIRST_ARRIVAL_MODES, attach_sizes, generate
from .controls import ControlKind, ControlSpec, control_rate
from .distributions import DistributionSpec, Family, sample
from .engine import run
from .metrics import (
    EnsembleSeries,
    StabilizationReport,
    ensemble_mean,
    is_good,
    stabilization_report,
)
from .rates import ConstantRate, RateFunction, SinusoidalRate, cumulative
from .virtual_response import SizePolicy, probe

_FAMILY_CODE = {Family.EXPONENTIAL: "exp", Family.ERLANG: "er", Family.LOGNORMAL: "ln"}
_FAMILY_ALIASES = {
    "exponential": Family.EXPONENTIAL,
    "exp": Family.EXPONENTIAL,
    "erlang": Family.ERLANG,
    "er": Family.ERLANG,
    "lognormal": Family.LOGNORMAL,
    "ln": Family.LOGNORMAL,
}


@dataclass(frozen=True)
class PairSpec:
    arrival: DistributionSpec
    jobsize: DistributionSpec

    @property
    def label(self) -> str:
        return f"{_FAMILY_CODE[self.arrival.family]}-{_FAMILY_CODE[self.jobsize.family]}"


@dataclass(frozen=True)
class ControlChoice:
    kind: ControlKind
    constant_mu: float | None = None


@dataclass(frozen=True)
class ArrivalRateShape:
    kind: str  # "sinusoidal" | "constant"
    base: float = 1.0
    amplitude: float = 0.2
    value: float = 1.0  # constant kind only

    def build(self, gamma: float | None) -> RateFunction:
        if self.kind == "constant":
            return ConstantRate(self.value)
        if gamma is None:
            raise ValueError("sinusoidal arrival rate needs a frequency")
        return SinusoidalRate(self.base, self.amplitude, gamma)


@dataclass(frozen=True)
class CellConfig:
    pair: PairSpec
    control: ControlChoice
    gamma: float | None
    target: float | None
    horizon: float
    n_reps: int
    master_seed: int
    arrival_rate: ArrivalRateShape
    epoch_density: int = 100
    probes_per_epoch: int = 1
    size_policy: SizePolicy = SizePolicy.RANDOM_SIZE
    first_arrival: str = "inverted"
    replay_cap_factor: float = 50.0

    @property
    def cell_id(self) -> str:
        parts = [self.pair.label, self.control.kind.value]
        if self.control.constant_mu is not None:
            parts.append(f"mu{self.control.constant_mu:g}")
        if self.gamma is not None:
            parts.append(f"g{self.gamma:g}")
        if self.target is not None:
            parts.append(f"s{self.target:g}")
        return "_".join(parts)

    def control_spec(self) -> ControlSpec:
        return ControlSpec(
            kind=self.control.kind,
            beta=self.pair.jobsize.mean,
            arrival_scv=self.pair.arrival.scv,
            service_scv=self.pair.jobsize.scv,
            target=self.target,
            constant_mu=self.control.constant_mu,
        )


@dataclass
class ExperimentConfig:
    pairs: list[PairSpec]
    controls: list[ControlChoice]
    arrival_rate: ArrivalRateShape
    gammas: list[float]
    targets: list[float]
    horizons: dict[float, float]  # per gamma; sinusoidal arrivals
    horizon: float | None  # constant arrivals
    n_reps: int
    master_seed: int
    epoch_density: int
    probes_per_epoch: int
    size_policy: SizePolicy
    first_arrival: str
    replay_cap_factor: float
    out: str


@dataclass
class CellResult:
    cell: CellConfig
    q_series: EnsembleSeries
    r_series: EnsembleSeries
    report: StabilizationReport
    arrival_rates: np.ndarray
    period: float


def _parse_distribution(data: dict) -> DistributionSpec:
    family = _FAMILY_ALIASES.get(str(data["family"]).lower())
    if family is None:
        raise ValueError(f"unknown distribution family {data['family']!r}")
    return DistributionSpec(family, float(data["mean"]), float(data["scv"]))


def _parse_control(entry) -> ControlChoice:
    if isinstance(entry, str):
        kind = ControlKind(entry)
        if kind is ControlKind.CONSTANT:
            raise ValueError("constant control needs dict form {kind: const, mu: <rate>}")
        return ControlChoice(kind)
    kind = ControlKind(entry["kind"])
    mu = entry.get("mu")
    return ControlChoice(kind, float(mu) if mu is not None else None)


def parse_config(data: dict) -> ExperimentConfig:
    pairs = [
        PairSpec(_parse_distribution(p["arrival"]), _parse_distribution(p["jobsize"]))
        for p in data["pairs"]
    ]
    controls = [_parse_control(c) for c in data["controls"]]
    rate_raw = data.get("arrival_rate", {"kind": "sinusoidal", "base": 1.0, "amplitude": 0.2})
    kind = rate_raw.get("kind", "sinusoidal")
    if kind not in ("sinusoidal", "constant"):
        raise ValueError(f"unknown arrival_rate kind {kind!r}")
    shape = ArrivalRateShape(
        kind=kind,
        base=float(rate_raw.get("base", 1.0)),
        amplitude=float(rate_raw.get("amplitude", 0.2)),
        value=float(rate_raw.get("value", 1.0)),
    )
    gammas = [float(g) for g in data.get("gammas", [])]
    horizons_raw = data.get("horizons", {})
    horizons = {float(k): float(v) for k, v in horizons_raw.items()}
    horizon = data.get("horizon")
    horizon = float(horizon) if horizon is not None else None
    if kind == "sinusoidal":
        if not gammas:
            raise ValueError("sinusoidal arrival rate needs a nonempty gammas list")
        for g in gammas:
            if g not in horizons:
                raise ValueError(f"no horizon configured for gamma={g}")
            # At least three full cycles must fit so the last-period
            # measurement window sits after a real warm-up.
            if horizons[g] < 3.0 * 2.0 * math.pi / g:
                raise ValueError(f"horizon {horizons[g]} covers < 3 periods at gamma={g}")
    else:
        if horizon is None:
            raise ValueError("constant arrival rate needs a horizon")
    n_reps = int(data.get("n_reps", 500))
    if n_reps < 2:
        raise ValueError("n_reps must be at least 2")
    targets = [float(s) for s in data.get("targets", [])]
    needs_target = any(c.kind is not ControlKind.CONSTANT for c in controls)
    if needs_target and not targets:
        raise ValueError("sr/dm controls need a nonempty targets list")
    first_arrival = data.get("first_arrival", "inverted")
    if first_arrival not in FIRST_ARRIVAL_MODES:
        raise ValueError(f"first_arrival must be one of {FIRST_ARRIVAL_MODES}")
    return ExperimentConfig(
        pairs=pairs,
        controls=controls,
        arrival_rate=shape,
        gammas=gammas,
        targets=targets,
        horizons=horizons,
        horizon=horizon,
        n_reps=n_reps,
        master_seed=int(data.get("master_seed", 12345)),
        epoch_density=int(data.get("epoch_density", 100)),
        probes_per_epoch=int(data.get("probes_per_epoch", 1)),
        size_policy=SizePolicy(data.get("size_policy", "random_size")),
        first_arrival=first_arrival,
        replay_cap_factor=float(data.get("replay_cap_factor", 50.0)),
        out=str(data.get("out", "results")),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(yaml.safe_load(fh))


def expand_cells(config: ExperimentConfig) -> list[CellConfig]:
    """Cross product pairs x gammas x targets x controls, in config order."""
    gammas: list[float | None]
    if config.arrival_rate.kind == "constant":
        gammas = [None]
    else:
        gammas = list(config.gammas)
    cells = []
    for pair in config.pairs:
        for gamma in gammas:
            horizon = config.horizon if gamma is None else config.horizons[gamma]
            for control in config.controls:
                # A constant control has no target; collapse the target axis.
                targets = [None] if control.kind is ControlKind.CONSTANT else config.targets
                for target in targets:
                    cells.append(
                        CellConfig(
                            pair=pair,
                            control=control,
                            gamma=gamma,
                            target=target,
                            horizon=horizon,
                            n_reps=config.n_reps,
                            master_seed=config.master_seed,
                            arrival_rate=config.arrival_rate,
                            epoch_density=config.epoch_density,
                            probes_per_epoch=config.probes_per_epoch,
                            size_policy=config.size_policy,
                            first_arrival=config.first_arrival,
                            replay_cap_factor=config.replay_cap_factor,
                        )
                    )
    return cells


def _cell_context(cell: CellConfig) -> dict:
    lam = cell.arrival_rate.build(cell.gamma)
    mu = control_rate(cell.control_spec(), lam)
    period = lam.period if lam.period is not None else cell.horizon / 3.0
    spacing = period / cell.epoch_density
    n = int(cell.horizon / spacing + 1e-9)
    epochs = spacing * np.arange(n + 1)
    while len(epochs) and epochs[-1] > cell.horizon:
        epochs = epochs[:-1]
    if cell.target is not None:
        response_scale = cell.target
    else:
        beta = cell.pair.jobsize.mean
        slack = mu.bounds()[0] - lam.bounds()[1] * beta
        response_scale = beta / slack if slack > 0.0 else cell.horizon / 10.0
    replay_cap = cell.replay_cap_factor * response_scale
    return {
        "lam": lam,
        "lam_cum": cumulative(lam),
        "mu_cum": cumulative(mu),
        "epochs": epochs,
        "period": period,
        "replay_cap": replay_cap,
        "stream_horizon": cell.horizon + replay_cap,
    }


def _run_replication(cell: CellConfig, ctx: dict, rep: int):
    seq = np.random.SeedSequence(cell.master_seed, spawn_key=(rep,))
    gap_rng, size_rng, probe_rng = (
        np.random.Generator(np.random.PCG64(child)) for child in seq.spawn(3)
    )
    stream = generate(
        cell.pair.arrival, ctx["lam_cum"], ctx["stream_horizon"], gap_rng, cell.first_arrival
    )
    stream = attach_sizes(stream, cell.pair.jobsize, size_rng)
    path = run(stream, ctx["mu_cum"], cell.horizon, ctx["epochs"])
    epochs = ctx["epochs"]
    q_row = np.array([len(path.snapshots[e]) for e in epochs], dtype=float)
    k = cell.probes_per_epoch
    if cell.size_policy is SizePolicy.FIXED_MEAN_SIZE:
        sizes = np.full((len(epochs), k), cell.pair.jobsize.mean)
    else:
        sizes = sample(cell.pair.jobsize, probe_rng, (len(epochs), k))
    mu_cum = ctx["mu_cum"]
    cap = ctx["replay_cap"]
    r_row = np.empty(len(epochs))
    for idx, e in enumerate(epochs):
        acc = 0.0
        for j in range(k):
            acc += probe(path, mu_cum, e, float(sizes[idx, j]), replay_cap=cap)
        r_row[idx] = acc / k
    return q_row, r_row


_POOL_STATE: tuple[CellConfig, dict] | None = None


def _pool_init(cell: CellConfig) -> None:
    global _POOL_STATE
    _POOL_STATE = (cell, _cell_context(cell))


def _pool_rep(rep: int):
    cell, ctx = _POOL_STATE
    return _run_replication(cell, ctx, rep)


def run_cell(cell: CellConfig, jobs: int = 1) -> CellResult:
    """Run one experiment cell's replication ensemble and evaluate it."""
    ctx = _cell_context(cell)
    if jobs <= 1:
        rows = [_run_replication(cell, ctx, rep) for rep in range(cell.n_reps)]
    else:
        chunk = max(1, cell.n_reps // (4 * jobs))
        with multiprocessing.Pool(jobs, initializer=_pool_init, initargs=(cell,)) as pool:
            rows = pool.map(_pool_rep, range(cell.n_reps), chunksize=chunk)
    epochs = ctx["epochs"]
    q_series = ensemble_mean([(epochs, q) for q, _ in rows])
    r_series = ensemble_mean([(epochs, r) for _, r in rows])
    report = stabilization_report(r_series, ctx["period"], target_s=cell.target)
    return CellResult(
        cell=cell,
        q_series=q_series,
        r_series=r_series,
        report=report,
        arrival_rates=ctx["lam"].rate_array(epochs),
        period=ctx["period"],
    )


def _write_series_csv(file: Path, result: CellResult) -> None:
    q = result.q_series
    r = result.r_series
    with open(file, "w") as fh:
        fh.write("t,q_mean,q_lo95,q_hi95,r_mean,r_lo95,r_hi95,arrival_rate\n")
        for i, t in enumerate(q.epochs):
            cols = (
                float(t),
                float(q.mean[i]),
                float(q.mean[i] - q.ci_half[i]),
                float(q.mean[i] + q.ci_half[i]),
                float(r.mean[i]),
                float(r.mean[i] - r.ci_half[i]),
                float(r.mean[i] + r.ci_half[i]),
                float(result.arrival_rates[i]),
            )
            fh.write(",".join(repr(c) for c in cols) + "\n")


def _report_row(result: CellResult) -> str:
    cell = result.cell
    rep = result.report
    gamma = "" if cell.gamma is None else repr(float(cell.gamma))
    target = "" if cell.target is None else repr(float(cell.target))
    if cell.target is None:
        rg = ""
        good = ""
    else:
        rg = repr(float(rep.rg_percent))
        good = "yes" if is_good(rep) else "no"
    return ",".join(
        [
            cell.pair.label,
            cell.control.kind.value,
            gamma,
            target,
            repr(float(rep.amplitude)),
            repr(float(rep.spatial_average)),
            repr(float(rep.ra_percent)),
            rg,
            good,
        ]
    )


def _config_echo(config: ExperimentConfig) -> dict:
    return {
        "pairs": [
            {
                "arrival": {
                    "family": p.arrival.family.value,
                    "mean": p.arrival.mean,
                    "scv": p.arrival.scv,
                },
                "jobsize": {
                    "family": p.jobsize.family.value,
                    "mean": p.jobsize.mean,
                    "scv": p.jobsize.scv,
                },
            }
            for p in config.pairs
        ],
        "controls": [
            {"kind": c.kind.value, "mu": c.constant_mu} for c in config.controls
        ],
        "arrival_rate": {
            "kind": config.arrival_rate.kind,
            "base": config.arrival_rate.base,
            "amplitude": config.arrival_rate.amplitude,
            "value": config.arrival_rate.value,
        },
        "gammas": config.gammas,
        "targets": config.targets,
        "horizons": {repr(k): v for k, v in config.horizons.items()},
        "horizon": config.horizon,
        "n_reps": config.n_reps,
        "master_seed": config.master_seed,
        "epoch_density": config.epoch_density,
        "probes_per_epoch": config.probes_per_epoch,
        "size_policy": config.size_policy.value,
        "first_arrival": config.first_arrival,
        "replay_cap_factor": config.replay_cap_factor,
        "out": config.out,
    }


def run_all(config: ExperimentConfig, jobs: int = 1, echo=None) -> Path:
    """Run every cell, write series CSVs, report.csv and manifest.json.

    Returns the output directory.  Output bytes are a pure function of the
    config (including the master seed).
    """
    outdir = Path(config.out)
    outdir.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(config)
    header = "pair,control,gamma,s,amplitude,spatial_avg,ra_percent,rg_percent,good\n"
    rows = []
    manifest_cells = []
    for cell in cells:
        if echo:
            echo(f"running cell {cell.cell_id} ({cell.n_reps} replications)")
        result = run_cell(cell, jobs=jobs)
        series_name = f"{cell.cell_id}_series.csv"
        _write_series_csv(outdir / series_name, result)
        rows.append(_report_row(result))
        manifest_cells.append(
            {
                "id": cell.cell_id,
                "pair": cell.pair.label,
                "control": cell.control.kind.value,
                "constant_mu": cell.control.constant_mu,
                "gamma": cell.gamma,
                "target": cell.target,
                "horizon": cell.horizon,
                "period": result.period,
                "series_csv": series_name,
            }
        )
    with open(outdir / "report.csv", "w") as fh:
        fh.write(header)
        for row in rows:
            fh.write(row + "\n")
    manifest = {
        "version": VERSION,
        "master_seed": config.master_seed,
        "config": _config_echo(config),
        "report_csv": "report.csv",
        "cells": manifest_cells,
    }
    with open(outdir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return outdir
