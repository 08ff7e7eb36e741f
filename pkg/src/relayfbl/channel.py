"""Per-symbol simulator of the Gaussian degraded relay channel.

``y2 = x1 + z2`` reaches the relay and ``y3 = x2 + y2 + z3`` reaches the
destination, with independent ``z2 ~ N(0, N2)`` and ``z3 ~ N(0, N3)``. Noise is
read from the session stream in the fixed order ``z2, z3`` per symbol, so
symbol ``k`` always uses standard normals ``2k`` and ``2k+1``.
"""
from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .core import ChannelParams, RngStream

_CHUNK = 8192


class CausalityError(IndexError):
    """A relay policy read a channel output it has not received yet."""


def channel_outputs(x1, x2, z2, z3):
    """Noiseless arithmetic of the channel law with externally supplied noise."""
    y2 = np.asarray(x1, dtype=np.float64) + z2
    return y2, np.asarray(x2, dtype=np.float64) + y2 + z3


class ChannelSession:
    """Single-owner channel state: symbol counter, noise stream and relay history."""

    def __init__(self, ch: ChannelParams, noise_rng: RngStream):
        self.ch = ch
        self.noise_rng = noise_rng
        self.k = 0
        self._y2 = np.empty(_CHUNK)
        self._s2 = math.sqrt(ch.n2)
        self._s3 = math.sqrt(ch.n3)
        self._buf = np.empty(0)
        self._buf_start = 0

    @property
    def history_y2(self) -> np.ndarray:
        """Relay observations delivered so far (read-only view)."""
        view = self._y2[:self.k]
        view.flags.writeable = False
        return view

    def _noise(self, count: int) -> tuple[np.ndarray, np.ndarray]:
        start = 2 * self.k
        end = start + 2 * count
        if not (self._buf_start <= start and end <= self._buf_start + self._buf.size):
            self._buf = self.noise_rng.normals(max(2 * count, 2 * _CHUNK), start)
            self._buf_start = start
        z = self._buf[start - self._buf_start:end - self._buf_start]
        return z[0::2] * self._s2, z[1::2] * self._s3

    def _record(self, y2: np.ndarray) -> None:
        need = self.k + y2.size
        if need > self._y2.size:
            grown = np.empty(max(need, 2 * self._y2.size))
            grown[:self.k] = self._y2[:self.k]
            self._y2 = grown
        self._y2[self.k:need] = y2
        self.k = need

    def step(self, x1: float, x2: float) -> tuple[float, float]:
        """Send one symbol from each transmitter; returns ``(y2, y3)``."""
        z2, z3 = self._noise(1)
        y2, y3 = channel_outputs(x1, x2, z2, z3)
        self._record(y2)
        return float(y2[0]), float(y3[0])

    def step_block(self, x1, x2) -> tuple[np.ndarray, np.ndarray]:
        """Send a block of symbols; identical to calling :meth:`step` on each pair."""
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        if x1.shape != x2.shape or x1.ndim != 1:
            raise ValueError("x1 and x2 must be vectors of equal length")
        z2, z3 = self._noise(x1.size)
        y2, y3 = channel_outputs(x1, x2, z2, z3)
        self._record(y2)
        return y2, y3


class CausalPrefix(Sequence):
    """Read-only view of the relay observations ``y2[0 .. k-1]``.

    Any index at or beyond ``k`` raises :class:`CausalityError` instead of
    returning a value.
    """

    def __init__(self, data: np.ndarray, k: int):
        self._data = data
        self._k = k

    def __len__(self):
        return self._k

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            start, stop, step = idx.start, idx.stop, idx.step
            if (stop is not None and stop > self._k) or (start is not None and start > self._k):
                raise CausalityError(f"slice {idx} reaches past the {self._k} delivered symbols")
            return self._data[:self._k][idx].copy()
        i = int(idx)
        if i < 0:
            i += self._k
        if not 0 <= i < self._k:
            raise CausalityError(f"symbol {idx} is not available; {self._k} delivered so far")
        return float(self._data[i])

    def to_array(self) -> np.ndarray:
        return self._data[:self._k].copy()


RelayPolicy = Callable[[CausalPrefix], float]


def run_session(ch: ChannelParams, source_seq, relay_policy: RelayPolicy, n: int,
                rng: RngStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drive ``n`` channel uses with a causal relay.

    At symbol ``k`` (0-based) the policy receives the prefix ``y2[0 .. k-1]``.
    Returns the ``(y2, y3, x2)`` traces.
    """
    x1 = np.asarray(source_seq, dtype=np.float64)
    if x1.shape != (n,):
        raise ValueError(f"source_seq must have length {n}")
    session = ChannelSession(ch, rng)
    y2 = np.empty(n)
    y3 = np.empty(n)
    x2 = np.empty(n)
    for k in range(n):
        x2[k] = float(relay_policy(CausalPrefix(session._y2, session.k)))
        y2[k], y3[k] = session.step(x1[k], x2[k])
    return y2, y3, x2
