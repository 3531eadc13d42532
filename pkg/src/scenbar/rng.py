"""Counter-based pseudo-random streams.

Every random quantity in this package is a pure function of a 64-bit seed, so
datasets are replayable sample-by-sample regardless of chunking, worker count
or scheduling order. The construction, fixed for the lifetime of the on-disk
dataset format:

* ``mix64`` is the splitmix64 finalizer (Steele, Lea, Flood 2014).
* Per-purpose streams are separated by xoring a domain constant into the run
  seed before mixing.
* The k-th raw word of a stream with base seed ``s`` is
  ``mix64(s + (k+1) * GOLDEN)`` with GOLDEN = 0x9E3779B97F4A7C15.
* A unit-interval double takes the top 53 bits: ``(word >> 11) * 2**-53``,
  giving values in [0, 1).
* A standard normal uses two words and the Box-Muller map
  ``sqrt(-2 ln(1-u1)) * cos(2 pi u2)`` (``1-u1`` keeps the log argument in
  (0, 1]).

Outputs are bit-stable across runs on one platform. Cross-platform bit
identity is not promised (libm cos/log may differ in the last ulp), only
distributional equality.
"""

from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)

# Stream domains. Values are arbitrary but frozen: changing them invalidates
# every previously written dataset.
DOMAIN_STATE = np.uint64(0x5354415445535331)
DOMAIN_NOISE = np.uint64(0x4E4F495345535331)
DOMAIN_AUDIT = np.uint64(0x4155444954535331)
DOMAIN_LPINIT = np.uint64(0x4C50494E49545331)


def mix64(z: np.ndarray | np.uint64 | int) -> np.ndarray | np.uint64:
    """splitmix64 finalizer; accepts scalars or uint64 arrays."""
    with np.errstate(over="ignore"):
        z = np.asarray(z).astype(np.uint64, copy=True)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z if z.ndim else np.uint64(z)


def chain(seed: np.uint64 | int, *indices: int | np.ndarray) -> np.ndarray | np.uint64:
    """Derive a sub-seed by folding indices into ``seed`` one mix at a time.

    ``chain(s, i, j)`` is the seed of realization j of sample i. The fold is
    order-sensitive, so (i, j) and (j, i) give unrelated streams.
    """
    with np.errstate(over="ignore"):
        h = mix64(np.uint64(seed) if np.isscalar(seed) else seed)
        for ix in indices:
            h = mix64(h ^ np.asarray(ix).astype(np.uint64))
    return h


def noise_seed(run_seed: int, sample_index, realization_index):
    return chain(np.uint64(run_seed) ^ DOMAIN_NOISE, sample_index, realization_index)


def state_seed(run_seed: int, sample_index):
    return chain(np.uint64(run_seed) ^ DOMAIN_STATE, sample_index)


def _word(seed, k: int):
    with np.errstate(over="ignore"):
        return mix64(np.asarray(seed, dtype=np.uint64) + np.uint64(k + 1) * GOLDEN)


def uniform01(seed, k: int = 0) -> np.ndarray | float:
    """k-th unit-interval double of the stream at ``seed``, in [0, 1)."""
    w = np.asarray(_word(seed, k))
    u = (w >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    return u if u.ndim else float(u)


def standard_normal(seed) -> np.ndarray | float:
    """One N(0,1) draw per seed via Box-Muller on stream words 0 and 1."""
    u1 = np.asarray(uniform01(seed, 0))
    u2 = np.asarray(uniform01(seed, 1))
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    return z if z.ndim else float(z)
