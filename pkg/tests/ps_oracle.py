"""Brute-force fixed-step processor-sharing integrator used as a test oracle.

Marches time in fixed increments, admits arrivals at step boundaries, and
splits each step's service budget equally among jobs in system (handing a
finishing job's leftover share back to the others within the step).  It
shares no code or event logic with the engine under test.
"""

from __future__ import annotations


def brute_force_departures(arrival_times, sizes, rate_fn, horizon, dt=1e-4):
    """Departure time per job id, for jobs finishing within the horizon.

    Arrival times are quantized up to the next step boundary and
    departures are reported at the end of the step that finishes the job,
    so results carry O(dt) time error.
    """
    n = len(arrival_times)
    remaining = {}
    departures = {}
    alive: list[int] = []
    i = 0
    steps = int(round(horizon / dt))
    for k in range(steps):
        t0 = k * dt
        t1 = t0 + dt
        while i < n and arrival_times[i] <= t0 + 1e-15:
            remaining[i] = float(sizes[i])
            alive.append(i)
            i += 1
        if not alive:
            continue
        budget = rate_fn(t0 + 0.5 * dt) * dt
        while budget > 1e-18 and alive:
            q = len(alive)
            share = budget / q
            smallest = min(remaining[j] for j in alive)
            if smallest >= share:
                for j in alive:
                    remaining[j] -= share
                budget = 0.0
            else:
                for j in alive:
                    remaining[j] -= smallest
                budget -= smallest * q
                still = []
                for j in alive:
                    if remaining[j] <= 1e-15:
                        departures[j] = t1
                    else:
                        still.append(j)
                alive = still
    return departures
