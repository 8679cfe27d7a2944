"""Counter-based uniform substreams.

Every stream is a pure function of a 128-bit Philox key assembled from
(seed, domain, index).  Replication r of an experiment always reads the
stream keyed (seed, domain, r), so results never depend on how
replications are chunked across workers.  Domains keep auxiliary
estimation passes off the streams consumed by the main experiment.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox

_MASK64 = (1 << 64) - 1
_MASK56 = (1 << 56) - 1

# Stream domains.  Each independent consumer of randomness gets its own
# domain so budgets can be changed without perturbing other results.
DOMAIN_EXPERIMENT = 0
DOMAIN_CENTERS = 1
DOMAIN_BOUND = 2
DOMAIN_CI = 3

# Smallest uniform value emitted; keeps inverse-transform sampling away
# from quantile(0), which is -inf for unbounded-below families.
_U_FLOOR = 2.0 ** -53


def stream_key(seed: int, domain: int = 0, index: int = 0) -> int:
    """128-bit Philox key: seed in the high word, (domain, index) in the low."""
    if index < 0 or index > _MASK56:
        raise ValueError("stream index out of range")
    if domain < 0 or domain > 0xFF:
        raise ValueError("stream domain out of range")
    return ((seed & _MASK64) << 64) | ((domain & 0xFF) << 56) | (index & _MASK56)


def uniform_stream(seed: int, domain: int = 0, index: int = 0) -> Generator:
    """Generator over the counter-based stream keyed by (seed, domain, index)."""
    return Generator(Philox(key=stream_key(seed, domain, index)))


def uniforms(seed: int, n: int, domain: int = 0, index: int = 0) -> np.ndarray:
    """n uniforms in the open interval (0, 1), bit-reproducible in (seed, domain, index)."""
    u = uniform_stream(seed, domain, index).random(n)
    # Generator.random yields [0, 1); clamp the single excluded point.
    return np.maximum(u, _U_FLOOR, out=u)
