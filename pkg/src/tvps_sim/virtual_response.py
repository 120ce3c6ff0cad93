"""Virtual response time estimation by snapshot-and-replay.

The virtual response time at an epoch is the sojourn a hypothetical job
inserted at that instant would experience.  It is estimated by restoring
the system state stored in the path's snapshot, adding a virtual job,
and replaying the processor-sharing dynamics forward using the same
stored future arrivals and sizes, until the virtual job departs.
"""

from __future__ import annotations

import enum
import heapq
import math

import numpy as np

from .distributions import DistributionSpec, sample
from .engine import SimulationPath, _event_loop
from .metrics import EnsembleSeries, ensemble_mean
from .rates import CumulativeRate

VIRTUAL_JOB_ID = -1


class SizePolicy(str, enum.Enum):
    RANDOM_SIZE = "random_size"  # fresh draw from the job-size distribution per probe
    FIXED_MEAN_SIZE = "fixed_mean_size"  # always the mean job size


class ReplayCapExceeded(RuntimeError):
    """The virtual job did not depart within the replay horizon cap."""


def probe(
    path: SimulationPath,
    mu: CumulativeRate,
    epoch: float,
    virtual_size: float | None = None,
    jobsize: DistributionSpec | None = None,
    rng: np.random.Generator | None = None,
    replay_cap: float | None = None,
) -> float:
    """Response time of a virtual job inserted at one snapshot epoch.

    Pass either an explicit virtual_size or a job-size distribution plus
    rng for a fresh draw.  replay_cap bounds how far past the epoch the
    replay may run before giving up (a guard against runaway replays on
    misconfigured inputs, never hit under stable controls).
    """
    epoch = float(epoch)
    snap = path.snapshots.get(epoch)
    if snap is None:
        raise KeyError(f"no snapshot recorded at epoch {epoch}")
    if virtual_size is None:
        if jobsize is None or rng is None:
            raise ValueError("need virtual_size, or jobsize and rng to draw one")
        virtual_size = float(sample(jobsize, rng))
    if not virtual_size > 0.0:
        raise ValueError("virtual_size must be positive")

    # Rebuild the shared-ledger state at the epoch: the ledger restarts at
    # zero, so each job's threshold is simply its remaining work.
    heap = [(rem, jid) for jid, rem in zip(snap.ids, snap.remaining)]
    heap.append((virtual_size, VIRTUAL_JOB_ID))
    heapq.heapify(heap)
    times_list = getattr(path, "_times_list", None)
    sizes_list = getattr(path, "_sizes_list", None)
    if times_list is None:
        times_list = path.stream.times.tolist()
        sizes_list = path.stream.sizes.tolist()
    start = int(np.searchsorted(path.stream.times, epoch, side="right"))
    cap_t = math.inf if replay_cap is None else epoch + replay_cap
    *_, watch_dep = _event_loop(
        mu,
        times_list,
        sizes_list,
        start,
        len(times_list),
        epoch,
        mu.value(epoch),
        0.0,
        heap,
        len(heap),
        math.inf,
        None,
        None,
        None,
        None,
        VIRTUAL_JOB_ID,
        cap_t,
    )
    if watch_dep is None:
        raise ReplayCapExceeded(
            f"virtual job inserted at {epoch} still in system {replay_cap} time units later"
        )
    return watch_dep - epoch


def mean_response_series(
    paths,
    mu: CumulativeRate,
    epochs,
    jobsize: DistributionSpec,
    rng: np.random.Generator,
    policy: SizePolicy = SizePolicy.RANDOM_SIZE,
    probes_per_epoch: int = 1,
    replay_cap: float | None = None,
) -> EnsembleSeries:
    """Per-epoch mean virtual response across replications, with 95% CIs.

    Every path must carry snapshots at every requested epoch.  Under the
    random-size policy each probe draws its own virtual size; the
    fixed-mean policy probes with the mean job size, which estimates the
    response of a deterministic mean-sized job rather than of a random
    one.  probes_per_epoch > 1 averages repeated probes per (path, epoch)
    to cut estimator variance.
    """
    policy = SizePolicy(policy)
    epochs = np.asarray(epochs, dtype=float)
    rows = []
    for path in paths:
        row = np.empty(len(epochs))
        for k, e in enumerate(epochs):
            acc = 0.0
            for _ in range(probes_per_epoch):
                size = jobsize.mean if policy is SizePolicy.FIXED_MEAN_SIZE else None
                acc += probe(path, mu, e, size, jobsize, rng, replay_cap)
            row[k] = acc / probes_per_epoch
        rows.append((epochs, row))
    return ensemble_mean(rows)
