import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20240517))


def integrate_share(path, mu, start, end):
    """Integrate mu(t)/Q(t) over [start, end] from a recorded path.

    Independent re-integration of the equal-share service allocation,
    used to cross-check attained service against job sizes.
    """
    cuts = [start]
    for t in path.event_times:
        if start < t < end:
            cuts.append(float(t))
    cuts.append(end)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        q = path.queue_length_at(0.5 * (a + b))
        if q > 0:
            total += mu.integrate(a, b) / q
    return total
