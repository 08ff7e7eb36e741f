"""Non-asymptotic achievability and converse bounds on the optimal code size.

Every quantity is in nats. Message and bin counts grow like ``exp(n)``, so
they are carried as logarithms; the integer fields are filled only when the
value fits in a signed 64-bit integer.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .capacity import PowerSplit, alpha_tilde, eps_capacity
from .core import ChannelParams, DomainError, cap_fn, disp_fn

# Back-off constants of the construction: the boosted power uses 39 n^(-1/4),
# the retained-message set uses 34 n^(-1/4).
POWER_BACKOFF = 39.0
SET_BACKOFF = 34.0
ASYMPTOTIC_MIN_M = 32
_LOG_INT_MAX = math.log(2.0 ** 63)


@dataclass(frozen=True)
class MomentPair:
    """Per-symbol mean and variance of an information density."""

    mean: float
    var: float


@dataclass(frozen=True)
class LinkMoments:
    """Information-density moments of the links the decoders test.

    ``relay``: relay decodes U given V from Y2.
    ``dest``: destination decodes (U, V) jointly against the Y3 marginal.
    ``bin``: destination decodes V against the Y3 marginal.
    ``dest_sub``: destination decodes U given V from Y3.
    The densities add up: ``dest`` is ``bin`` plus ``dest_sub`` symbol by symbol.
    """

    relay: MomentPair
    dest: MomentPair
    bin: MomentPair
    dest_sub: MomentPair

    def as_dict(self) -> dict:
        return {"relay": self.relay, "dest": self.dest, "bin": self.bin, "dest_sub": self.dest_sub}


def fourth_root_ceil(n: int) -> int:
    """Exact ``ceil(n ** 0.25)`` for a positive integer."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    r = math.isqrt(math.isqrt(n))
    return r if r ** 4 == n else r + 1


def default_codeword_variance(n: int) -> float:
    return 1.0 - n ** -0.25


def boosted_powers(n: int, eps: float, ch: ChannelParams) -> tuple[float, float]:
    """Per-block powers ``P_i / (1 - eps + 39 n^(-1/4))``."""
    denom = 1.0 - eps + POWER_BACKOFF * n ** -0.25
    return ch.p1 / denom, ch.p2 / denom


def link_snrs(alpha: float, p1n: float, p2n: float, ch: ChannelParams, cvar: float) -> dict:
    """Effective signal-to-noise ratio seen by each link's information density."""
    nd = ch.n2 + ch.n3
    c = math.sqrt((1.0 - alpha) * p1n) + math.sqrt(p2n)
    return {
        "relay": cvar * alpha * p1n / ch.n2,
        "dest": cvar * (p1n + p2n + 2.0 * math.sqrt((1.0 - alpha) * p1n * p2n)) / nd,
        "bin": cvar * c * c / (nd + cvar * alpha * p1n),
        "dest_sub": cvar * alpha * p1n / nd,
    }


def link_moments(n: int, alpha, sizes_powers, ch: ChannelParams,
                 codeword_variance: float | None = None) -> LinkMoments:
    """Mean and variance of each link's per-symbol information density.

    Each density is of AWGN type, so its mean is ``C(x)`` and its variance is
    ``V(x)`` for the link SNR ``x``. The codewords have variance
    ``1 - n^(-1/4)`` unless ``codeword_variance`` overrides it.
    """
    if n < 1:
        raise DomainError("n must be a positive integer")
    a = alpha.alpha if isinstance(alpha, PowerSplit) else PowerSplit(alpha).alpha
    p1n, p2n = sizes_powers
    cvar = default_codeword_variance(n) if codeword_variance is None else codeword_variance
    snr = link_snrs(a, p1n, p2n, ch, cvar)
    pairs = {k: MomentPair(cap_fn(x), disp_fn(x)) for k, x in snr.items()}
    return LinkMoments(**pairs)


def _int_if_fits(log_val: float) -> int | None:
    if log_val > _LOG_INT_MAX - 1.0:
        return None
    return max(1, math.ceil(math.exp(log_val)))


@dataclass(frozen=True)
class Feasibility:
    """Sufficiency conditions on n under which the achievability bound holds."""

    backoff_below_eps: bool
    backoff_set_valid: bool
    bin_rate_positive: bool
    message_rate_positive: bool

    @property
    def all(self) -> bool:
        return (self.backoff_below_eps and self.backoff_set_valid
                and self.bin_rate_positive and self.message_rate_positive)


@dataclass(frozen=True)
class SchemeSizes:
    n: int
    L: int
    log_M: float
    log_B: float
    M: int | None
    B: int | None
    p1n: float
    p2n: float
    alpha: PowerSplit
    moments: LinkMoments
    feasibility: Feasibility

    @property
    def feasible(self) -> bool:
        return self.feasibility.all


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")


def feasibility(n: int, eps: float, ch: ChannelParams, alpha: float | None = None) -> Feasibility:
    _check_eps(eps)
    a = alpha_tilde(ch.p1, ch.p2, ch).alpha if alpha is None else alpha
    q = n ** -0.25
    denom = 1.0 - eps + POWER_BACKOFF * q
    back = 1.0 - q
    # n > (39/eps)^4 and n >= (1 + 39/(1-eps))^4, decided in exact rational arithmetic.
    fe, fb = Fraction(eps), Fraction(POWER_BACKOFF)
    c1 = n * fe ** 4 > fb ** 4
    c1s = n * (1 - fe) ** 4 >= (1 - fe + fb) ** 4
    c = math.sqrt((1.0 - a) * ch.p1) + math.sqrt(ch.p2)
    bin_snr = back * c * c / (denom * (ch.n2 + ch.n3) + back * a * ch.p1)
    c2 = n * cap_fn(bin_snr) - n ** 0.75 - 2.0 * math.log(n) >= 0.0
    relay_snr = back * a * ch.p1 / (denom * ch.n2)
    c3 = n * cap_fn(relay_snr) - 2.0 * n ** 0.75 - 3.25 * math.log(n) >= 0.0
    return Feasibility(c1, c1s, c2, c3)


def scheme_sizes(n: int, eps: float, ch: ChannelParams) -> SchemeSizes:
    """Block count, message and bin counts, and boosted powers prescribed for blocklength ``n``."""
    _check_eps(eps)
    if n < 2:
        raise DomainError("n must be at least 2")
    split = alpha_tilde(ch.p1, ch.p2, ch)
    p1n, p2n = boosted_powers(n, eps, ch)
    mom = link_moments(n, split, (p1n, p2n), ch)
    dev = n ** 1.5
    logn = math.log(n)
    log_b = n * mom.bin.mean - math.sqrt(dev * mom.bin.var) - logn
    via_relay = n * mom.relay.mean - math.sqrt(dev * mom.relay.var) - logn
    via_dest = (n * mom.dest.mean - math.sqrt(dev * mom.bin.var)
                - math.sqrt(dev * mom.dest_sub.var) - 3.0 * logn)
    # M = min(ceil(e^a), ceil(e^b)) = ceil(e^min(a, b)).
    log_m = min(via_relay, via_dest)
    return SchemeSizes(
        n=n, L=fourth_root_ceil(n), log_M=log_m, log_B=log_b,
        M=_int_if_fits(log_m), B=_int_if_fits(log_b), p1n=p1n, p2n=p2n,
        alpha=split, moments=mom, feasibility=feasibility(n, eps, ch, split.alpha),
    )


@dataclass(frozen=True)
class Kappas:
    kappa1: float
    kappa2: float
    kappa3: float


def kappas(eps: float, ch: ChannelParams) -> Kappas:
    _check_eps(eps)
    a = alpha_tilde(ch.p1, ch.p2, ch).alpha
    snr = a * ch.p1 / ((1.0 - eps) * ch.n2)
    k1 = 0.5 * (1.0 + POWER_BACKOFF / (1.0 - eps)) * snr + 5.0
    k2 = (eps_capacity(ch, 0.0).rate + 1.0) / (1.0 - eps)
    k3 = 3.0 * (k1 + k2) + 4.0 * cap_fn(snr)
    return Kappas(k1, k2, k3)


def achievable_log_m_exact(n: int, eps: float, ch: ChannelParams) -> float | None:
    """Lower bound on the log code size over ``(L+1) n`` channel uses.

    Returns ``None`` when the sufficiency conditions fail at ``n``.
    """
    _check_eps(eps)
    if n < 2 or not feasibility(n, eps, ch).all:
        return None
    m = (fourth_root_ceil(n) + 1) * n
    k = kappas(eps, ch)
    return m * eps_capacity(ch, eps).rate - 3.0 * (k.kappa1 + k.kappa2) * m ** 0.8


def achievable_log_m_asymptotic(m: int, eps: float, ch: ChannelParams) -> float:
    """Lower bound ``m C_eps - kappa3 m^(4/5)`` for total blocklength ``m``.

    The constant is validated against the exact restatement only for
    ``m >= ASYMPTOTIC_MIN_M``; see :func:`asymptotic_validated`.
    """
    if m < 1:
        raise DomainError("m must be a positive integer")
    return m * eps_capacity(ch, eps).rate - kappas(eps, ch).kappa3 * m ** 0.8


def asymptotic_validated(m: int) -> bool:
    return m >= ASYMPTOTIC_MIN_M


def restatement_residual(m: int, eps: float, ch: ChannelParams) -> float:
    """Rate lost when a bound at blocklength ``(L+1) n`` is restated at any ``m``."""
    q = m ** 0.8
    return (1.0 + 2.0 * q + fourth_root_ceil(math.ceil(q + 1.0))) * eps_capacity(ch, eps).rate


def achievable_log_m_restated(m: int, eps: float, ch: ChannelParams) -> float:
    """Exact per-m bound before the residual is absorbed into a single constant."""
    k = kappas(eps, ch)
    return (m * eps_capacity(ch, eps).rate - 3.0 * (k.kappa1 + k.kappa2) * m ** 0.8
            - restatement_residual(m, eps, ch))


def block_length_for(m: int) -> int:
    """Largest ``n`` whose total blocklength ``(ceil(n^(1/4)) + 1) n`` fits in ``m``."""
    if m < 2:
        raise DomainError("m must be at least 2")
    lo, hi = 1, m
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if (fourth_root_ceil(mid) + 1) * mid <= m:
            lo = mid
        else:
            hi = mid - 1
    return lo


def converse_corrections(n: int, eps: float) -> float:
    """Terms added to ``n C_eps`` by the converse."""
    return (math.sqrt(n) * math.log(n) + math.sqrt(n) / (1.0 - eps) ** 2
            + 0.5 * math.log(n) + math.log(2.0))


def converse_log_m(n: int, eps: float, ch: ChannelParams) -> float:
    """Upper bound on the log code size of any code with blocklength ``n`` and error ``eps``."""
    _check_eps(eps)
    if n < 4:
        raise DomainError("n must be at least 4")
    return n * eps_capacity(ch, eps).rate + converse_corrections(n, eps)


@dataclass(frozen=True)
class ConverseValidity:
    """Largeness conditions of the converse argument at ``n``."""

    deviation_small: bool
    tail_small: bool

    @property
    def all(self) -> bool:
        return self.deviation_small and self.tail_small


def converse_validity(n: int, eps: float, ch: ChannelParams) -> ConverseValidity:
    _check_eps(eps)
    c1 = 1.0 / math.sqrt(n) <= (1.0 - eps) / 2.0
    s = (ch.p1 + ch.p2 + math.sqrt(ch.p1 * ch.p2)) / ch.n2
    k = (4.0 / (1.0 - eps)) * s * (2.0 * s / (1.0 - eps) + 1.0)
    # e^k / n < 1 / (2 sqrt(n)), compared in the log domain.
    c2 = k - math.log(n) < -math.log(2.0) - 0.5 * math.log(n)
    return ConverseValidity(c1, c2)


def second_order_window(n: int, eps: float, ch: ChannelParams) -> tuple[float, float]:
    """Bounds on ``log M* - n C_eps`` implied by the two bounds at blocklength ``n``."""
    _check_eps(eps)
    if n < 4:
        raise DomainError("n must be at least 4")
    return -kappas(eps, ch).kappa3 * n ** 0.8, converse_corrections(n, eps)


@dataclass(frozen=True)
class BoundReport:
    """Both bounds evaluated at the total blocklength ``m = (L+1) n``."""

    n_or_m: int
    blocklength: int
    achievable_log_m: float | None
    converse_log_m: float
    kappa1: float
    kappa2: float
    kappa3: float
    feasible: bool
    converse_valid: bool
    theta_lower: float
    theta_upper: float
    sizes: SchemeSizes


def bound_report(n: int, eps: float, ch: ChannelParams) -> BoundReport:
    sizes = scheme_sizes(n, eps, ch)
    m = (sizes.L + 1) * n
    k = kappas(eps, ch)
    lo, hi = second_order_window(m, eps, ch)
    return BoundReport(
        n_or_m=n, blocklength=m,
        achievable_log_m=achievable_log_m_exact(n, eps, ch),
        converse_log_m=converse_log_m(m, eps, ch),
        kappa1=k.kappa1, kappa2=k.kappa2, kappa3=k.kappa3,
        feasible=sizes.feasible, converse_valid=converse_validity(m, eps, ch).all,
        theta_lower=lo, theta_upper=hi, sizes=sizes,
    )
