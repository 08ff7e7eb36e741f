"""Scalar information functions, Gaussian log-densities and seeded randomness.

All logarithms are natural; rates are in nats per channel use.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels

_U64 = (1 << 64) - 1
_INV_2_53 = 1.0 / 9007199254740992.0


class DomainError(ValueError):
    """An argument lies outside the domain of a mathematical function."""


@dataclass(frozen=True)
class ChannelParams:
    """Gaussian degraded relay channel: powers and noise variances."""

    p1: float
    p2: float
    n2: float
    n3: float

    def __post_init__(self):
        for name in ("p1", "p2", "n2", "n3"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise DomainError(f"{name} must be a finite positive real, got {val!r}")
            object.__setattr__(self, name, float(val))


@dataclass(frozen=True)
class GaussianSpec:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance >= 0:
            raise DomainError(f"variance must be non-negative, got {self.variance!r}")


def cap_fn(x):
    """Gaussian capacity function ``0.5 * log(1 + x)``; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("cap_fn requires x >= 0")
    out = 0.5 * np.log1p(arr)
    return float(out) if out.ndim == 0 else out


def disp_fn(x):
    """Gaussian dispersion ``x / (1 + x)``; accepts scalars or arrays."""
    arr = np.asarray(x, dtype=np.float64)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("disp_fn requires x >= 0")
    out = arr / (1.0 + arr)
    return float(out) if out.ndim == 0 else out


def log_gauss(z, spec: GaussianSpec) -> float:
    """Log-density of i.i.d. ``N(mean, variance)`` evaluated at the vector ``z``."""
    if not spec.variance > 0:
        raise DomainError("log_gauss needs a strictly positive variance")
    z = np.asarray(z, dtype=np.float64).ravel()
    dev = z - spec.mean
    return float(-np.dot(dev, dev) / (2.0 * spec.variance)
                 - 0.5 * z.size * math.log(2.0 * math.pi * spec.variance))


def _label_hash(parent: int, labels) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(parent.to_bytes(8, "little"))
    for lab in labels:
        h.update(b"\x1f")
        h.update(repr(lab).encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream addressed by ``(seed, stream_id)``.

    Backed by Philox4x64 keyed with both integers, so any position in the
    stream can be read directly without generating the prefix. Normals use
    Box-Muller on consecutive raw pairs: normal ``i`` depends only on raw
    draws ``2*(i//2)`` and ``2*(i//2)+1``.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise TypeError(f"{name} must be an integer")
            if not 0 <= int(val) <= _U64:
                raise DomainError(f"{name} must fit in an unsigned 64-bit integer")
            object.__setattr__(self, name, int(val))

    def spawn(self, *labels) -> "RngStream":
        """Derive an independent child stream named by ``labels``."""
        return RngStream(self.seed, _label_hash(self.stream_id, labels))

    def raw(self, count: int, offset: int = 0) -> np.ndarray:
        """Raw uint64 draws ``offset .. offset+count-1`` of this stream."""
        if count < 0 or offset < 0:
            raise ValueError("count and offset must be non-negative")
        block, skip = divmod(offset, 4)
        bitgen = np.random.Philox(
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
            counter=np.array([block & _U64, block >> 64, 0, 0], dtype=np.uint64),
        )
        return bitgen.random_raw(skip + count)[skip:]

    def normals(self, count: int, offset: int = 0) -> np.ndarray:
        """Standard normals at positions ``offset .. offset+count-1``."""
        if count == 0:
            return np.empty(0)
        first = offset - (offset % 2)
        pairs = (offset + count - first + 1) // 2
        z = _kernels.box_muller(self.raw(2 * pairs, first))
        start = offset - first
        return z[start:start + count]

    def uniforms(self, count: int, offset: int = 0) -> np.ndarray:
        """Uniforms on [0, 1) with 53-bit resolution."""
        return (self.raw(count, offset) >> np.uint64(11)).astype(np.float64) * _INV_2_53

    def integers(self, high: int, count: int, offset: int = 0) -> np.ndarray:
        """Uniform integers on ``{1, ..., high}``."""
        if high < 1:
            raise DomainError("high must be at least 1")
        u = self.uniforms(count, offset)
        return np.minimum(np.floor(u * high).astype(np.int64), high - 1) + 1

    def integer(self, high: int) -> int:
        return int(self.integers(high, 1)[0])
