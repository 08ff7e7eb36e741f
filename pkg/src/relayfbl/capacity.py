"""Cut-set rate, the optimal power split and the epsilon-capacity."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .core import ChannelParams, DomainError, cap_fn

BISECT_TOL = 1e-12
BISECT_MAX_ITER = 200
EQUAL_TOL = 1e-9


class SolverError(RuntimeError):
    """The crossing-point solver failed to converge."""


@dataclass(frozen=True)
class PowerSplit:
    """Fraction ``alpha`` of source power spent on the fresh-message layer."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not 0.0 <= a <= 1.0:
            raise DomainError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    def __float__(self):
        return self.alpha


class BindingSide(str, enum.Enum):
    RELAY_LINK = "relay_link"
    MULTIPLE_ACCESS = "multiple_access"
    EQUAL = "equal"


@dataclass(frozen=True)
class CapacityResult:
    rate: float
    alpha_star: PowerSplit
    binding_side: BindingSide


def _as_alpha(split) -> float:
    return split.alpha if isinstance(split, PowerSplit) else PowerSplit(split).alpha


def _branches(alpha: float, p1: float, p2: float, ch: ChannelParams) -> tuple[float, float]:
    relay = cap_fn(alpha * p1 / ch.n2)
    coop = math.sqrt(max(1.0 - alpha, 0.0) * p1 * p2)
    mac = cap_fn((p1 + p2 + 2.0 * coop) / (ch.n2 + ch.n3))
    return relay, mac


def r_cutset(split, p1: float, p2: float, ch: ChannelParams) -> float:
    """Minimum of the broadcast cut and the multiple-access cut at power split ``split``."""
    if not (p1 > 0 and p2 > 0):
        raise DomainError("powers must be positive")
    return min(_branches(_as_alpha(split), p1, p2, ch))


def alpha_tilde(p1: float, p2: float, ch: ChannelParams) -> PowerSplit:
    """Power split maximizing the cut-set rate.

    Returns 1 when the relay link never binds, otherwise the crossing point
    of the two cuts, located by bisection on their difference (which is
    increasing in alpha).
    """
    if not (p1 > 0 and p2 > 0):
        raise DomainError("powers must be positive")
    if p1 / ch.n2 <= (p1 + p2) / (ch.n2 + ch.n3):
        return PowerSplit(1.0)

    def gap(a):
        r, m = _branches(a, p1, p2, ch)
        return r - m

    lo, hi = 0.0, 1.0
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECT_TOL:
            return PowerSplit(0.5 * (lo + hi))
    raise SolverError("bisection did not converge")  # pragma: no cover


def binding_side(alpha: float, p1: float, p2: float, ch: ChannelParams) -> BindingSide:
    relay, mac = _branches(alpha, p1, p2, ch)
    if abs(relay - mac) <= EQUAL_TOL:
        return BindingSide.EQUAL
    return BindingSide.RELAY_LINK if relay < mac else BindingSide.MULTIPLE_ACCESS


def eps_capacity(ch: ChannelParams, eps: float = 0.0) -> CapacityResult:
    """Epsilon-capacity: cut-set rate at the optimal split with powers scaled by ``1/(1-eps)``."""
    if not 0.0 <= eps < 1.0:
        raise DomainError(f"eps must lie in [0, 1), got {eps!r}")
    s1, s2 = ch.p1 / (1.0 - eps), ch.p2 / (1.0 - eps)
    split = alpha_tilde(s1, s2, ch)
    return CapacityResult(
        rate=r_cutset(split, s1, s2, ch),
        alpha_star=split,
        binding_side=binding_side(split.alpha, s1, s2, ch),
    )
