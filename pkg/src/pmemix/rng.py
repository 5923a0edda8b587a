"""Seeded random source.

All draws come from numpy's PCG64 bit generator keyed by a
``SeedSequence(seed, spawn_key=...)``.  Uniform doubles from PCG64 are
stable across platforms and numpy releases; Beta variates are built here
from those uniforms and standard normals (Marsaglia-Tsang gamma ratio) so
they do not depend on numpy's distribution code.
"""

import math
import zlib

import numpy as np

from .errors import InputError


def _name_key(name):
    return zlib.crc32(name.encode("utf-8"))


class Rng:
    """A named, splittable random stream."""

    def __init__(self, seed, key=()):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.key = tuple(key)
        seq = np.random.SeedSequence(seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def spawn(self, name):
        """Derive an independent child stream from a name, e.g. ``"init"``."""
        return Rng(self.seed, self.key + (_name_key(name),))

    def random(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def permutation(self, n):
        return self._gen.permutation(n)

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def uniform(self, a, b):
        return sample_uniform(self, a, b)

    def beta(self, alpha):
        return sample_beta(self, alpha)

    def __repr__(self):
        return f"Rng(seed={self.seed}, key={self.key})"


def sample_uniform(rng, a, b):
    """Draw from Uniform[a, b)."""
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise InputError(f"uniform bounds must satisfy a < b, got ({a}, {b})")
    value = a + (b - a) * rng.random()
    # a + (b - a) * u can round up to b when u is within an ulp of 1
    if value >= b:
        value = math.nextafter(b, a)
    return value


def _sample_gamma(rng, shape):
    # Marsaglia & Tsang (2000); shapes below 1 use the u**(1/shape) boost.
    if shape < 1.0:
        g = _sample_gamma(rng, shape + 1.0)
        u = rng.random()
        return g * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        z = rng.normal()
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.random()
        if u < 1.0 - 0.0331 * z**4:
            return d * v
        if u > 0.0 and math.log(u) < 0.5 * z * z + d * (1.0 - v + math.log(v)):
            return d * v


def sample_beta(rng, alpha):
    """Draw from the symmetric Beta(alpha, alpha) distribution, open interval (0, 1)."""
    alpha = float(alpha)
    if not math.isfinite(alpha) or alpha <= 0.0:
        raise InputError(f"Beta parameter must be positive, got {alpha}")
    x = _sample_gamma(rng, alpha)
    y = _sample_gamma(rng, alpha)
    total = x + y
    if total == 0.0:
        return 0.5
    value = x / total
    if value <= 0.0:
        return math.nextafter(0.0, 1.0)
    if value >= 1.0:
        return math.nextafter(1.0, 0.0)
    return value
