"""End-to-end acceptance suite.

Each test checks one headline behaviour of the library at desk scale and
prints a single PASS line with the measured numbers.  The heavy cells
(light-traffic stabilization, the light-traffic miss of the
difference-matching control, and the heavy-traffic accuracy ordering)
run 500 replications each, so the full module takes on the order of
twenty minutes on one core.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from tvps_sim.arrivals import generate
from tvps_sim.controls import (
    ControlKind,
    ControlSpec,
    difference_matching_rate,
    light_traffic_constants,
    square_root_rate,
    variability_factors,
)
from tvps_sim.distributions import erlang, exponential, lognormal
from tvps_sim.engine import run
from tvps_sim.harness import (
    ArrivalRateShape,
    CellConfig,
    ControlChoice,
    PairSpec,
    parse_config,
    run_all,
)
from tvps_sim.harness import run_cell
from tvps_sim.rates import SinusoidalRate, cumulative
from tvps_sim.arrivals import ArrivalStream

from ps_oracle import brute_force_departures

EXP = exponential(1.0)
ER = erlang(1.0, 0.5)
LN = lognormal(1.0, 2.0)

# (pair label, arrival, jobsize, printed V_FCFS, printed V_PS,
#  printed light-traffic service rate, printed response)
REFERENCE_ROWS = [
    ("exp-exp", EXP, EXP, 1.0, 1.0, 10.0, 0.1),
    ("er-er", ER, ER, 0.5, 0.6667, 6.667, 0.15),
    ("ln-ln", LN, LN, 2.0, 1.3333, 13.333, 0.07),
    ("er-ln", ER, LN, 1.25, 0.8333, 8.333, 0.12),
    ("ln-er", LN, ER, 1.25, 1.6666, 16.666, 0.06),
]


def _pass(name, detail):
    print(f"PASS {name}: {detail}")


def _sr_spec(ca2, cs2, s):
    return ControlSpec(ControlKind.SQUARE_ROOT, beta=1.0, arrival_scv=ca2,
                       service_scv=cs2, target=s)


def _dm_spec(ca2, cs2, s):
    return ControlSpec(ControlKind.DIFFERENCE_MATCHING, beta=1.0, arrival_scv=ca2,
                       service_scv=cs2, target=s)


def test_01_stationary_constant_rate_oracle():
    """Constant rates, exponential everything, utilization one-half: the
    closed-form mean response and mean queue length are both exactly 1."""
    t0 = time.perf_counter()
    cell = CellConfig(
        pair=PairSpec(EXP, EXP),
        control=ControlChoice(ControlKind.CONSTANT, constant_mu=2.0),
        gamma=None,
        target=None,
        horizon=5000.0,
        n_reps=200,
        master_seed=12345,
        arrival_rate=ArrivalRateShape(kind="constant", value=1.0),
    )
    result = run_cell(cell)
    epochs = result.r_series.epochs
    keep = epochs >= 0.1 * cell.horizon  # discard the empty-start transient
    mean_r = float(np.mean(result.r_series.mean[keep]))
    mean_q = float(np.mean(result.q_series.mean[keep]))
    elapsed = time.perf_counter() - t0
    assert abs(mean_r - 1.0) <= 0.03, f"mean response {mean_r} not within 1.0 +/- 0.03"
    assert abs(mean_q - 1.0) <= 0.03, f"mean queue {mean_q} not within 1.0 +/- 0.03"
    assert elapsed <= 120.0
    _pass("stationary-oracle",
          f"mean response {mean_r:.4f}, mean queue {mean_q:.4f} "
          f"(both within 1.0 +/- 0.03; {elapsed:.0f}s)")


def test_02_controls_coincide_at_unit_scvs():
    """With both SCVs equal to 1 the two controls are the same function."""
    lam = SinusoidalRate(1.0, 0.2, 0.01)
    t = np.linspace(0.0, 2000.0, 10_000)
    lam_t = lam.rate_array(t)
    worst = 0.0
    for s in (0.1, 10.0):
        diff = np.abs(square_root_rate(lam_t, _sr_spec(1.0, 1.0, s))
                      - difference_matching_rate(lam_t, _dm_spec(1.0, 1.0, s)))
        worst = max(worst, float(diff.max()))
    assert worst <= 1e-12, f"controls differ by {worst} at unit SCVs"
    _pass("controls-coincide", f"max |difference| {worst:.2e} <= 1e-12 on 10^4-point grid")


def test_03_controls_converge_as_target_grows():
    """The two controls agree in the large-target limit, monotonically."""
    lam = SinusoidalRate(1.0, 0.2, 0.01)
    lam_t = lam.rate_array(np.linspace(0.0, 2000.0, 2001))
    final_ratios = []
    for label, arrival, jobsize, *_ in REFERENCE_ROWS:
        last = math.inf
        for s in (1e2, 1e3, 1e4):
            mu_sr = square_root_rate(lam_t, _sr_spec(arrival.scv, jobsize.scv, s))
            mu_dm = difference_matching_rate(lam_t, _dm_spec(arrival.scv, jobsize.scv, s))
            ratio = float(np.max(np.abs(mu_sr - mu_dm) / mu_dm))
            # The exp-exp pair's controls are identical, leaving ratios at
            # machine epsilon where ordering is rounding noise.
            assert ratio < last or ratio <= 1e-12, (
                f"{label}: ratio did not decrease at s={s}")
            last = ratio
        assert last <= 1e-3, f"{label}: ratio {last} above 1e-3 at s=1e4"
        final_ratios.append(last)
    _pass("controls-converge",
          f"max relative gap at s=1e4 is {max(final_ratios):.2e} <= 1e-3, "
          "decreasing in s for all five pairs")


def test_04_variability_factor_reference_values():
    worst = 0.0
    for label, arrival, jobsize, vf, vp, *_ in REFERENCE_ROWS:
        got_f, got_p = variability_factors(arrival.scv, jobsize.scv)
        worst = max(worst, abs(got_f - vf), abs(got_p - vp))
        assert got_f == pytest.approx(vf, abs=1e-4), label
        assert got_p == pytest.approx(vp, abs=1e-4), label
    _pass("variability-factors", f"all five rows within 1e-4 (worst {worst:.1e})")


def test_05_light_traffic_reference_values():
    details = []
    for label, arrival, jobsize, _vf, _vp, mu_ref, r_ref in REFERENCE_ROWS:
        spec = _dm_spec(arrival.scv, jobsize.scv, 0.1)
        sr_limit, dm_limit = light_traffic_constants(spec)
        assert sr_limit == pytest.approx(10.0, abs=1e-9), label
        # Tolerance: one unit in the last printed decimal.
        mu_tol = 10.0 ** -(len(str(mu_ref).split(".")[1]) if "." in str(mu_ref) else 0)
        r_tol = 10.0 ** -len(str(r_ref).split(".")[1])
        assert dm_limit == pytest.approx(mu_ref, abs=mu_tol), label
        assert 1.0 / dm_limit == pytest.approx(r_ref, abs=r_tol), label
        details.append(f"{label} {dm_limit:.4f}/{1.0 / dm_limit:.4f}")
    _pass("light-traffic-table", "; ".join(details))


def test_06_mean_arrival_count_matches_cumulative_rate():
    t0 = time.perf_counter()
    lam = cumulative(SinusoidalRate(1.0, 0.2, 0.01))
    horizon = 2000.0
    checkpoints = np.array([500.0, 1000.0, 2000.0])
    n_streams = 2000
    counts = np.empty((n_streams, checkpoints.size))
    for i in range(n_streams):
        rng = np.random.Generator(np.random.PCG64(910_000 + i))
        stream = generate(ER, lam, horizon, rng)
        counts[i] = np.searchsorted(stream.times, checkpoints, side="left")
    details = []
    for j, t in enumerate(checkpoints):
        target = lam.value(float(t))
        se = counts[:, j].std(ddof=1) / math.sqrt(n_streams)
        err = abs(float(counts[:, j].mean()) - target)
        assert err <= 3.0 * se, f"count mean off by {err} (> 3 SE = {3 * se:.2f}) at t={t}"
        details.append(f"t={t:.0f}: |err| {err:.2f} <= {3 * se:.2f}")
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0
    _pass("mean-count", "; ".join(details) + f" ({elapsed:.0f}s)")


def test_07_light_traffic_stabilization_square_root():
    """Square-root control holds the response flat at a light-traffic
    target across the arrival-rate cycle."""
    t0 = time.perf_counter()
    cell = CellConfig(
        pair=PairSpec(ER, ER),
        control=ControlChoice(ControlKind.SQUARE_ROOT),
        gamma=0.01,
        target=0.1,
        horizon=2000.0,
        n_reps=500,
        master_seed=12345,
        arrival_rate=ArrivalRateShape("sinusoidal", 1.0, 0.2),
        probes_per_epoch=4,
    )
    report = run_cell(cell).report
    elapsed = time.perf_counter() - t0
    assert report.ra_percent <= 10.0, f"RA {report.ra_percent}% above 10%"
    assert abs(report.rg_percent) <= 5.0, f"|RG| {abs(report.rg_percent)}% above 5%"
    assert elapsed <= 900.0
    _pass("light-traffic-sr",
          f"RA {report.ra_percent:.2f}% <= 10%, RG {report.rg_percent:.2f}% "
          f"within +/-5% ({elapsed:.0f}s)")


def test_08_light_traffic_miss_difference_matching():
    """Difference matching settles near its light-traffic limit 0.15
    rather than the requested 0.1."""
    t0 = time.perf_counter()
    cell = CellConfig(
        pair=PairSpec(ER, ER),
        control=ControlChoice(ControlKind.DIFFERENCE_MATCHING),
        gamma=0.001,
        target=0.1,
        horizon=20000.0,
        n_reps=500,
        master_seed=12345,
        arrival_rate=ArrivalRateShape("sinusoidal", 1.0, 0.2),
        probes_per_epoch=2,
        replay_cap_factor=500.0,
    )
    report = run_cell(cell).report
    elapsed = time.perf_counter() - t0
    assert 0.13 <= report.spatial_average <= 0.17, (
        f"spatial average {report.spatial_average} outside [0.13, 0.17]")
    assert elapsed <= 900.0
    _pass("light-traffic-dm-miss",
          f"spatial average {report.spatial_average:.4f} in [0.13, 0.17] "
          f"(target was 0.1; {elapsed:.0f}s)")


def test_09_heavy_traffic_accuracy_ordering():
    """At a heavy-traffic target the difference-matching control tracks
    the target markedly better than the square-root control."""
    details = []
    for label, arrival, jobsize in [("er-er", ER, ER), ("ln-ln", LN, LN)]:
        gaps = {}
        for kind in (ControlKind.SQUARE_ROOT, ControlKind.DIFFERENCE_MATCHING):
            cell = CellConfig(
                pair=PairSpec(arrival, jobsize),
                control=ControlChoice(kind),
                gamma=0.001,
                target=10.0,
                horizon=20000.0,
                n_reps=500,
                master_seed=12345,
                arrival_rate=ArrivalRateShape("sinusoidal", 1.0, 0.2),
                replay_cap_factor=500.0,
            )
            gaps[kind] = run_cell(cell).report.rg_percent
        rg_sr = gaps[ControlKind.SQUARE_ROOT]
        rg_dm = gaps[ControlKind.DIFFERENCE_MATCHING]
        assert abs(rg_dm) < abs(rg_sr), (
            f"{label}: |RG_DM| {abs(rg_dm):.2f}% not below |RG_SR| {abs(rg_sr):.2f}%")
        details.append(f"{label}: |RG_DM| {abs(rg_dm):.1f}% < |RG_SR| {abs(rg_sr):.1f}%")
    _pass("heavy-traffic-ordering", "; ".join(details))


def test_10_engine_matches_brute_force_oracle():
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(20260816))
    worst = 0.0
    for _ in range(20):
        k = int(rng.integers(1, 11))
        times = np.sort(rng.uniform(0.0, 5.0, size=k)) + 1e-6 * np.arange(k)
        sizes = rng.uniform(0.2, 1.2, size=k)
        base = float(rng.uniform(1.0, 2.0))
        mu_rate = SinusoidalRate(base, float(rng.uniform(0.2, 0.6)) * base,
                                 float(rng.uniform(0.3, 2.0)))
        horizon = 40.0
        stream = ArrivalStream(times=times, sizes=sizes, horizon=horizon)
        path = run(stream, cumulative(mu_rate), horizon)
        oracle = brute_force_departures(times, sizes, mu_rate.rate, horizon)
        assert len(oracle) == k, "oracle left jobs unfinished; enlarge the horizon"
        for j, dep in oracle.items():
            err = abs(float(path.departure_times[j]) - dep)
            worst = max(worst, err)
            assert err <= 1e-3, f"departure {j} off by {err}"
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0
    _pass("engine-vs-oracle",
          f"20 instances, worst departure-time gap {worst:.2e} <= 1e-3 ({elapsed:.0f}s)")


def test_11_run_cell_determinism(tmp_path):
    config_data = {
        "pairs": [
            {"arrival": {"family": "erlang", "mean": 1.0, "scv": 0.5},
             "jobsize": {"family": "erlang", "mean": 1.0, "scv": 0.5}},
        ],
        "arrival_rate": {"kind": "sinusoidal", "base": 1.0, "amplitude": 0.2},
        "gammas": [0.1],
        "horizons": {0.1: 200.0},
        "targets": [0.1],
        "controls": ["sr"],
        "n_reps": 3,
        "master_seed": 20240229,
    }
    outputs = []
    manifests = []
    for name in ("first", "second"):
        data = dict(config_data)
        data["out"] = str(tmp_path / name)
        outdir = run_all(parse_config(data))
        outputs.append({p.name: p.read_bytes()
                        for p in sorted(Path(outdir).glob("*.csv"))})
        manifest = json.loads((Path(outdir) / "manifest.json").read_text())
        manifest["config"].pop("out")  # the only field allowed to differ
        manifests.append(manifest)
    assert outputs[0].keys() == outputs[1].keys()
    assert len(outputs[0]) == 2  # report.csv plus one series file
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], f"{name} differs between runs"
    assert manifests[0] == manifests[1]
    _pass("determinism",
          f"two runs produced byte-identical {', '.join(sorted(outputs[0]))}")
