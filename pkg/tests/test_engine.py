import math

import numpy as np
import pytest

from tvps_sim.arrivals import ArrivalStream, attach_sizes, generate
from tvps_sim.distributions import exponential
from tvps_sim.engine import run
from tvps_sim.rates import ConstantRate, SinusoidalRate, cumulative

from conftest import integrate_share
from ps_oracle import brute_force_departures


def _stream(times, sizes, horizon):
    return ArrivalStream(times=np.asarray(times, dtype=float),
                         sizes=np.asarray(sizes, dtype=float),
                         horizon=float(horizon))


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def test_single_job_departs_after_its_size():
    path = run(_stream([1.0], [2.0], 10.0), cumulative(ConstantRate(1.0)), 10.0)
    assert path.departure_times[0] == pytest.approx(3.0, abs=1e-12)
    assert path.sojourn_times()[0] == pytest.approx(2.0, abs=1e-12)


def test_two_jobs_share_the_server():
    # Sizes 1 and 2 starting (essentially) together at rate 1: the small
    # job takes its whole size at half speed and leaves at 2, after which
    # the big one runs alone and leaves at 3.
    path = run(_stream([0.0, 1e-9], [1.0, 2.0], 10.0), cumulative(ConstantRate(1.0)), 10.0)
    assert path.departure_times[0] == pytest.approx(2.0, abs=1e-6)
    assert path.departure_times[1] == pytest.approx(3.0, abs=1e-6)
    assert path.queue_length_at(1.5) == 2
    assert path.queue_length_at(2.5) == 1
    assert path.queue_length_at(3.5) == 0


def test_snapshot_remaining_work():
    path = run(_stream([0.0, 1e-9], [1.0, 2.0], 10.0), cumulative(ConstantRate(1.0)),
               10.0, record_epochs=[0.5, 2.5])
    snap = path.snapshots[0.5]
    # Each job received 0.25 units of service by t = 0.5.
    assert snap.remaining == pytest.approx((0.75, 1.75), abs=1e-9)
    assert path.snapshots[2.5].remaining == pytest.approx((0.5,), abs=1e-6)


def test_departures_match_brute_force_on_varying_rate(rng):
    mu_rate = SinusoidalRate(1.5, 0.9, 1.3)
    mu = cumulative(mu_rate)
    for trial in range(3):
        k = int(rng.integers(2, 9))
        times = np.sort(rng.uniform(0.0, 4.0, size=k))
        times += 1e-6 * np.arange(k)  # enforce strict increase
        sizes = rng.uniform(0.2, 2.0, size=k)
        horizon = 40.0
        path = run(_stream(times, sizes, horizon), mu, horizon)
        oracle = brute_force_departures(times, sizes, mu_rate.rate, horizon)
        assert set(oracle) == set(range(k))
        for j, dep in oracle.items():
            assert path.departure_times[j] == pytest.approx(dep, abs=1e-3)


def test_attained_service_reintegrates_to_job_size(rng):
    """mu(t)/Q(t) integrated over each job's stay returns its size."""
    mu = cumulative(SinusoidalRate(2.0, 0.8, 0.7))
    times = np.sort(rng.uniform(0.0, 10.0, size=12))
    times += 1e-6 * np.arange(12)
    sizes = rng.uniform(0.1, 1.5, size=12)
    path = run(_stream(times, sizes, 60.0), mu, 60.0)
    for j in range(12):
        dep = path.departure_times[j]
        assert math.isfinite(dep)
        got = integrate_share(path, mu, float(times[j]), float(dep))
        assert got == pytest.approx(float(sizes[j]), abs=1e-6)


def test_work_conservation_over_busy_windows():
    """During any window with the queue never empty, the served work is
    exactly the integral of the service rate."""
    rng = _rng(99)
    mu_rate = SinusoidalRate(1.0, 0.3, 0.05)
    mu = cumulative(mu_rate)
    lam = cumulative(ConstantRate(0.9))
    stream = attach_sizes(generate(exponential(1.0), lam, 400.0, _rng(1)),
                          exponential(1.0), _rng(2))
    epochs = np.arange(1.0, 400.0, 1.0)
    path = run(stream, mu, 400.0, record_epochs=epochs)
    tested = 0
    for _ in range(2000):
        if tested >= 100:
            break
        i, j = sorted(rng.integers(0, epochs.size, size=2))
        if i == j:
            continue
        e1, e2 = float(epochs[i]), float(epochs[j])
        qs = [path.queue_length_at(t) for t in path.event_times if e1 <= t <= e2]
        qs += [path.queue_length_at(e1)]
        if min(qs) == 0:
            continue
        snap1, snap2 = path.snapshots[e1], path.snapshots[e2]
        arrived = stream.sizes[(stream.times > e1) & (stream.times <= e2)].sum()
        served = sum(snap1.remaining) + arrived - sum(snap2.remaining)
        assert served == pytest.approx(mu.integrate(e1, e2), abs=1e-9 * max(1.0, served))
        tested += 1
    assert tested >= 100


def test_queue_length_is_right_continuous():
    path = run(_stream([1.0, 2.0], [3.0, 0.5], 20.0), cumulative(ConstantRate(1.0)), 20.0)
    assert path.queue_length_at(1.0) == 1  # arrival included at its instant
    assert path.queue_length_at(0.999999) == 0
    dep_small = path.departure_times[1]
    assert path.queue_length_at(float(dep_small)) == 1  # departure excluded
    with pytest.raises(ValueError):
        path.queue_length_at(-0.1)
    with pytest.raises(ValueError):
        path.queue_length_at(20.1)


def test_jobs_open_at_horizon_have_nan_departures():
    path = run(_stream([1.0], [100.0], 10.0), cumulative(ConstantRate(1.0)), 10.0)
    assert np.isnan(path.departure_times[0])
    assert path.queue_length_at(10.0) == 1
    assert path.sojourn_times().size == 0  # only completed jobs are reported


def test_arrivals_beyond_horizon_are_kept_but_not_admitted():
    stream = _stream([1.0, 12.0], [1.0, 1.0], 20.0)
    path = run(stream, cumulative(ConstantRate(1.0)), 10.0)
    assert path.arrival_times.size == 1
    assert path.stream.times.size == 2  # retained for replays


def test_event_log_is_consistent():
    stream = attach_sizes(generate(exponential(1.0), cumulative(ConstantRate(0.8)),
                                   500.0, _rng(4)), exponential(1.0), _rng(5))
    path = run(stream, cumulative(ConstantRate(1.0)), 500.0)
    assert np.all(np.diff(path.event_times) >= 0)
    q = np.cumsum(path.event_kinds)
    assert np.all(q >= 0)
    n_arr = int(np.sum(path.event_kinds == 1))
    n_dep = int(np.sum(path.event_kinds == -1))
    assert n_arr == path.arrival_times.size
    assert n_dep == np.sum(np.isfinite(path.departure_times))


def test_run_is_deterministic():
    stream = attach_sizes(generate(exponential(1.0), cumulative(ConstantRate(0.9)),
                                   300.0, _rng(6)), exponential(1.0), _rng(7))
    mu = cumulative(SinusoidalRate(1.5, 0.3, 0.1))
    a = run(stream, mu, 300.0, record_epochs=[10.0, 200.0])
    b = run(stream, mu, 300.0, record_epochs=[10.0, 200.0])
    assert np.array_equal(a.event_times, b.event_times)
    assert np.array_equal(a.departure_times, b.departure_times, equal_nan=True)
    assert a.snapshots[200.0].remaining == b.snapshots[200.0].remaining


def test_stationary_sojourn_and_queue_means():
    """Constant-rate exponential case against the closed-form answers:
    with utilization 0.5 the mean sojourn is 1 and mean queue is 1."""
    horizon = 2000.0
    soj_means = []
    q_means = []
    for rep in range(100):
        stream = attach_sizes(
            generate(exponential(1.0), cumulative(ConstantRate(1.0)), horizon,
                     _rng(500_000 + rep)),
            exponential(1.0), _rng(600_000 + rep))
        path = run(stream, cumulative(ConstantRate(2.0)), horizon)
        soj = path.sojourn_times()
        soj_means.append(np.nanmean(soj))
        q_means.append(path.time_average_queue())
    assert np.mean(soj_means) == pytest.approx(1.0, abs=0.05)
    assert np.mean(q_means) == pytest.approx(1.0, abs=0.05)


def test_time_average_queue_hand_case():
    path = run(_stream([1.0, 2.0], [2.0, 2.0], 10.0), cumulative(ConstantRate(1.0)), 10.0)
    # Q is 0 on [0,1), 1 on [1,2), 2 on [2, d1), 1 on [d1, d2), 0 after.
    d1, d2 = path.departure_times
    expect = (1.0 + 2.0 * (d1 - 2.0) + (d2 - d1)) / 10.0
    assert path.time_average_queue() == pytest.approx(expect, abs=1e-9)
    assert path.time_average_queue(2.0, 4.0) > path.time_average_queue(8.0, 10.0)


def test_snapshots_agree_with_reintegrated_service(rng):
    mu = cumulative(SinusoidalRate(1.2, 0.5, 0.3))
    times = np.sort(rng.uniform(0.0, 8.0, size=10))
    times += 1e-6 * np.arange(10)
    sizes = rng.uniform(0.3, 2.0, size=10)
    epoch = 6.0
    path = run(_stream(times, sizes, 50.0), mu, 50.0, record_epochs=[epoch])
    snap = path.snapshots[epoch]
    for jid, rem in zip(snap.ids, snap.remaining):
        attained = integrate_share(path, mu, float(times[jid]), epoch)
        assert rem == pytest.approx(float(sizes[jid]) - attained, abs=1e-8)
    in_system = {j for j in range(10)
                 if times[j] <= epoch and not path.departure_times[j] <= epoch}
    assert set(snap.ids) == in_system
