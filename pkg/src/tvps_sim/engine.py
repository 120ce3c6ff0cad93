"""Event-driven simulation of a single-server processor-sharing queue.

With Q jobs in system, each receives service at rate mu(t)/Q, so between
events every in-system job's attained service grows by the same amount
(M(t2) - M(t1))/Q, where M is the cumulative service rate.  The loop
keeps one shared ledger phi of attained-per-job service: a job arriving
when the ledger reads phi departs when the ledger reaches phi + size.
The next departure is found by inverting M at the heap-minimum
threshold, so per-event cost does not grow with the queue length.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .arrivals import ArrivalStream
from .rates import CumulativeRate

# Remaining work below this counts as departed (float hygiene).
DRAIN_TOL = 1e-12


@dataclass(frozen=True)
class Snapshot:
    """System contents at one recording epoch: job ids and remaining work."""

    ids: tuple[int, ...]
    remaining: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.ids)


@dataclass
class SimulationPath:
    """One replication's full trajectory: events, snapshots, departure times."""

    horizon: float
    stream: ArrivalStream
    event_times: np.ndarray
    event_kinds: np.ndarray  # +1 arrival, -1 departure
    event_jobs: np.ndarray
    arrival_times: np.ndarray  # admitted jobs, indexed by job id
    departure_times: np.ndarray  # NaN while still in system at the horizon
    snapshots: dict[float, Snapshot]

    def __post_init__(self) -> None:
        self._queue_after = np.cumsum(self.event_kinds) if len(self.event_kinds) else np.empty(0)

    def queue_length_at(self, t: float) -> int:
        """Right-continuous queue length Q(t)."""
        if not 0.0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        idx = int(np.searchsorted(self.event_times, t, side="right")) - 1
        return int(self._queue_after[idx]) if idx >= 0 else 0

    def sojourn_times(self) -> np.ndarray:
        """Departure minus arrival for jobs that completed within the horizon."""
        done = ~np.isnan(self.departure_times)
        return self.departure_times[done] - self.arrival_times[done]

    def time_average_queue(self, t0: float = 0.0, t1: float | None = None) -> float:
        """Exact time average of Q over [t0, t1] from the event sequence."""
        if t1 is None:
            t1 = self.horizon
        if not 0.0 <= t0 < t1 <= self.horizon:
            raise ValueError("need 0 <= t0 < t1 <= horizon")
        if len(self.event_times) == 0:
            return 0.0
        cuts = np.concatenate([[t0], self.event_times, [t1]])
        levels = np.concatenate([[0], self._queue_after])
        widths = np.clip(cuts[1:], t0, t1) - np.clip(cuts[:-1], t0, t1)
        return float(np.sum(widths * levels)) / (t1 - t0)


def queue_length_at(path: SimulationPath, t: float) -> int:
    return path.queue_length_at(t)


def run(
    stream: ArrivalStream,
    mu: CumulativeRate,
    horizon: float,
    record_epochs=(),
) -> SimulationPath:
    """Simulate the processor-sharing queue driven by stream and rate mu.

    Jobs arriving at or beyond the horizon are excluded; jobs in system at
    the horizon keep a NaN departure time.  Snapshots of (job id,
    remaining work) are recorded at each requested epoch, right-continuous
    in the same sense as the queue length.  The stream may extend beyond
    the horizon; the extra arrivals are kept in the path for replays.
    """
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    if stream.sizes is None:
        raise ValueError("stream has no job sizes attached")
    epochs = np.asarray(record_epochs, dtype=float)
    if len(epochs) and (
        np.any(np.diff(epochs) < 0.0) or epochs[0] < 0.0 or epochs[-1] > horizon
    ):
        raise ValueError("record_epochs must be sorted within [0, horizon]")

    times_list = stream.times.tolist()
    sizes_list = stream.sizes.tolist()
    n_admit = int(np.searchsorted(stream.times, horizon, side="left"))
    departures = np.full(n_admit, np.nan)
    log = ([], [], [])
    snapshots: dict[float, Snapshot] = {}
    _event_loop(
        mu,
        times_list,
        sizes_list,
        0,
        n_admit,
        0.0,
        0.0,
        0.0,
        [],
        0,
        horizon,
        epochs.tolist(),
        snapshots,
        log,
        departures,
        None,
        math.inf,
    )
    path = SimulationPath(
        horizon=horizon,
        stream=stream,
        event_times=np.asarray(log[0]),
        event_kinds=np.asarray(log[1], dtype=np.int8),
        event_jobs=np.asarray(log[2], dtype=np.int64),
        arrival_times=stream.times[:n_admit].copy(),
        departure_times=departures,
        snapshots=snapshots,
    )
    path._times_list = times_list
    path._sizes_list = sizes_list
    return path


def _event_loop(
    mu: CumulativeRate,
    arr_t: list,
    arr_s: list,
    i: int,
    n: int,
    t: float,
    m_now: float,
    phi: float,
    heap: list,
    q: int,
    horizon: float,
    epochs,
    snapshots,
    log,
    departures,
    watch_id,
    cap_t: float,
):
    """Advance the shared-ledger dynamics until no event remains in range.

    heap holds (phi threshold, job id) pairs; ties depart in job-id order.
    At equal timestamps departures are processed before arrivals.  Epochs
    strictly before the next event are flushed with the state interpolated
    to the epoch; epochs equal to an event time therefore see the system
    right after that event.  Returns (t, m_now, phi, q, i, watch_departure)
    where watch_departure is the time the watched job left, if it did.
    """
    value = mu.value
    invert = mu.inverse_value
    push = heapq.heappush
    pop = heapq.heappop
    inf = math.inf
    ep_i = 0
    n_ep = len(epochs) if epochs is not None else 0
    next_arr = arr_t[i] if i < n else inf
    watch_dep = None
    thr = jid = need = None
    while True:
        if q:
            thr, jid = heap[0]
            need = thr - phi
            if need < DRAIN_TOL:
                next_dep = t
            else:
                next_dep = invert(m_now + q * need)
                if next_dep < t:
                    next_dep = t
        else:
            next_dep = inf
        if next_dep <= next_arr:
            t_next = next_dep
            is_arrival = False
        else:
            t_next = next_arr
            is_arrival = True
        if t_next > horizon or t_next > cap_t or t_next == inf:
            break
        while ep_i < n_ep and epochs[ep_i] < t_next:
            e = epochs[ep_i]
            if q:
                phi_e = phi + (value(e) - m_now) / q
                pairs = sorted((j, th - phi_e) for th, j in heap)
                snapshots[e] = Snapshot(
                    tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)
                )
            else:
                snapshots[e] = Snapshot((), ())
            ep_i += 1
        if is_arrival:
            if q:
                phi += (value(t_next) - m_now) / q
            m_now = value(t_next)
            push(heap, (phi + arr_s[i], i))
            q += 1
            if log is not None:
                log[0].append(t_next)
                log[1].append(1)
                log[2].append(i)
            i += 1
            next_arr = arr_t[i] if i < n else inf
        else:
            if need > 0.0:
                m_now += q * need
                phi = thr
            pop(heap)
            q -= 1
            if departures is not None and jid >= 0:
                departures[jid] = t_next
            if log is not None:
                log[0].append(t_next)
                log[1].append(-1)
                log[2].append(jid)
            if jid == watch_id:
                t = t_next
                watch_dep = t_next
                break
        t = t_next
    # Any epochs left see the final state: no event separates them from it.
    while ep_i < n_ep:
        e = epochs[ep_i]
        if q:
            phi_e = phi + (value(e) - m_now) / q
            pairs = sorted((j, th - phi_e) for th, j in heap)
            snapshots[e] = Snapshot(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))
        else:
            snapshots[e] = Snapshot((), ())
        ep_i += 1
    return t, m_now, phi, q, i, watch_dep


def events_to_csv(path: SimulationPath, file) -> None:
    """Dump the event sequence as CSV (time, kind, job id) for debugging."""
    with open(file, "w") as fh:
        fh.write("time,kind,job\n")
        for t, k, j in zip(path.event_times, path.event_kinds, path.event_jobs):
            kind = "arrival" if k > 0 else "departure"
            fh.write(f"{float(t)!r},{kind},{int(j)}\n")


def snapshots_to_csv(path: SimulationPath, file) -> None:
    """Dump snapshots as CSV rows (epoch, job id, remaining work)."""
    with open(file, "w") as fh:
        fh.write("epoch,job,remaining\n")
        for e in sorted(path.snapshots):
            snap = path.snapshots[e]
            for j, r in zip(snap.ids, snap.remaining):
                fh.write(f"{float(e)!r},{int(j)},{float(r)!r}\n")
