"""Seeded, portable pseudo-random streams.

Every random quantity in the package comes from this module so that a
``(seed, stream)`` pair fully determines the numbers drawn.

Algorithm
---------
* Bit generator: Philox4x64-10 (counter based) keyed with the two 64-bit words
  ``[seed, stream]``; no seed hashing is applied.  Output blocks are computed
  for the 256-bit counters 1, 2, 3, ... (low word first) and the four 64-bit
  words of each block are consumed in order.
* Uniforms: ``(next_uint64 >> 11) * 2**-53`` in ``[0, 1)``.
* Normals: Box-Muller on consecutive uniform pairs ``(u1, u2)``::

      r = sqrt(-2 log(1 - u1))
      z[2i] = r cos(2 pi u2),  z[2i + 1] = r sin(2 pi u2)

  An odd request discards the final sine value.
"""

from __future__ import annotations

import numpy as np

# Named streams so that e.g. the design matrix and the noise never share draws.
STREAM_DESIGN = 0
STREAM_NOISE = 1
STREAM_SIGNAL = 2
STREAM_POWER = 3
STREAM_IMAGE = 4


def _generator(seed: int, stream: int) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise ValueError(f"seed and stream must be nonnegative, got {seed}, {stream}")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=0))


def uniform(seed: int, size: int, stream: int = 0) -> np.ndarray:
    """Uniform draws in ``[0, 1)``."""
    return _generator(seed, stream).random(size)


def normal(seed: int, size: int, stream: int = 0) -> np.ndarray:
    """Standard normal draws via Box-Muller."""
    m = (size + 1) // 2
    u = _generator(seed, stream).random(2 * m)
    u1, u2 = u[0::2], u[1::2]
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:size]
