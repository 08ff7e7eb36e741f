"""Binary hypothesis testing primitives and executable probes of the coding lemmas."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from . import _kernels
from .codec import Codebooks, Mode, SchemeParams
from .core import ChannelParams, DomainError, RngStream, cap_fn, disp_fn

_NORM_TOL = 1e-9


def _as_dist(p, name: str) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64).ravel()
    if arr.size == 0 or np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be a non-empty vector of non-negative reals")
    if abs(arr.sum() - 1.0) > _NORM_TOL:
        raise DomainError(f"{name} must sum to 1, sums to {arr.sum()!r}")
    return arr


def _check_delta(delta: float) -> None:
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta!r}")


def beta_discrete(delta: float, p, q) -> float:
    """Smallest q-probability of acceptance among tests accepting with p-probability ``delta``.

    Randomized Neyman-Pearson test: outcomes are accepted in decreasing
    order of ``p/q`` and the boundary outcome is accepted with the fraction
    needed to reach ``delta`` exactly.
    """
    _check_delta(delta)
    p = _as_dist(p, "p")
    q = _as_dist(q, "q")
    if p.shape != q.shape:
        raise DomainError("p and q must live on the same alphabet")
    if delta == 0.0:
        return 0.0
    if delta == 1.0:
        # every outcome p can produce must be accepted, however small its mass
        return float(q[p > 0].sum())
    support = np.flatnonzero(p > 0)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(q[support] > 0, p[support] / q[support], np.inf)
    order = support[np.argsort(-ratio, kind="stable")]
    acc_p = 0.0
    acc_q = 0.0
    for i in order:
        if acc_p + p[i] >= delta:
            return acc_q + (delta - acc_p) / p[i] * q[i]
        acc_p += p[i]
        acc_q += q[i]
    return acc_q


def _beta_by_rejection(reject_mass: float, p: np.ndarray, q: np.ndarray) -> float:
    """Same optimum as :func:`beta_discrete` at ``delta = 1 - reject_mass``.

    Works from the rejection side (lowest ``p/q`` first), so a tiny rejected
    mass is not lost to rounding in ``1 - reject_mass``.
    """
    support = np.flatnonzero(p > 0)
    with np.errstate(divide="ignore", over="ignore"):
        ratio = np.where(q[support] > 0, p[support] / q[support], np.inf)
    order = support[np.argsort(ratio, kind="stable")]
    total = float(q[support].sum())
    rej_p = 0.0
    rej_q = 0.0
    for i in order:
        if rej_p + p[i] >= reject_mass:
            return total - rej_q - (reject_mass - rej_p) / p[i] * q[i]
        rej_p += p[i]
        rej_q += q[i]
    return 0.0


def beta_gaussian_shift(delta: float, d: float) -> float:
    """Minimum type-II error between ``N(0,1)`` (accept) and ``N(d,1)`` at level ``delta``.

    The optimal test thresholds the observation, giving ``Phi(Phi^-1(delta) - |d|)``.
    """
    _check_delta(delta)
    return float(ndtr(ndtri(delta) - abs(d)))


def beta_lower_bound(delta: float, xi: float, p, q) -> float:
    """``(delta - P_p[p/q >= xi]) / xi``, a lower bound on :func:`beta_discrete`."""
    if not xi > 0:
        raise DomainError("xi must be positive")
    _check_delta(delta)
    p = _as_dist(p, "p")
    q = _as_dist(q, "q")
    if p.shape != q.shape:
        raise DomainError("p and q must live on the same alphabet")
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ratio = np.where(q > 0, p / q, np.inf)
    tail = float(p[(p > 0) & (ratio >= xi)].sum())
    return (delta - tail) / xi


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint distribution of ``(U, V)`` as a ``|U| x |V|`` probability matrix."""

    probabilities: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probabilities, dtype=np.float64)
        if arr.ndim != 2 or np.any(arr < 0):
            raise DomainError("joint must be a non-negative matrix")
        if abs(arr.sum() - 1.0) > 1e-12:
            raise DomainError("joint must sum to 1")
        arr.flags.writeable = False
        object.__setattr__(self, "probabilities", arr)

    @property
    def u_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)


@dataclass(frozen=True)
class MessageBetaResult:
    beta: float
    bound: float
    holds: bool
    error_prob: float


def message_beta_check(joint: DiscreteJoint, s_v) -> MessageBetaResult:
    """Compare ``beta_{1-e}(p_UV || p_U x s_V)`` with ``1/|W|``, where ``e = P[U != V]``.

    ``U`` must be uniform on the message set ``W`` and ``V`` takes values in
    the same set.
    """
    pj = joint.probabilities
    w = pj.shape[0]
    if pj.shape[1] != w:
        raise DomainError("U and V must share the message alphabet")
    pu = joint.u_marginal
    if np.max(np.abs(pu - 1.0 / w)) > 1e-12:
        raise DomainError("U marginal must be uniform")
    s_v = _as_dist(s_v, "s_v")
    if s_v.size != w:
        raise DomainError("s_v must live on the message alphabet")
    err = float(pj[~np.eye(w, dtype=bool)].sum())
    if not err < 1.0:
        raise DomainError("error probability must be below 1")
    beta = _beta_by_rejection(err, pj.ravel(), np.outer(pu, s_v).ravel())
    bound = 1.0 / w
    return MessageBetaResult(float(beta), bound, bool(beta <= bound + 1e-12), err)


class XProcess(str, enum.Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    IID = "iid"
    ECHO = "echo"  # X_k = Z_{k-1}, X_1 = 0


@dataclass(frozen=True)
class MgfSpec:
    n: int
    t: float
    P: float
    x_process: XProcess = XProcess.ZERO
    constant: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "x_process", XProcess(self.x_process))
        if self.n < 1 or not self.t > 0 or not self.P > 0:
            raise DomainError("need n >= 1, t > 0 and P > 0")


@dataclass(frozen=True)
class MgfResult:
    mc_estimate: float
    closed_form: float
    std_err: float
    unstable: bool

    @property
    def z_score(self) -> float:
        return (self.mc_estimate - self.closed_form) / self.std_err


def mgf_closed_form(spec: MgfSpec) -> float:
    n, t, P = spec.n, spec.t, spec.P
    g = 1.0 + 2.0 * t * P
    return math.exp(-0.5 * n * math.log(g) + n * t * P + 2.0 * n * t * t * P / g)


def _x_samples(spec: MgfSpec, z: np.ndarray, rng: RngStream, offset: int) -> np.ndarray:
    if spec.x_process is XProcess.ZERO:
        return np.zeros_like(z)
    if spec.x_process is XProcess.CONSTANT:
        return np.full_like(z, spec.constant)
    if spec.x_process is XProcess.IID:
        return rng.normals(z.size, offset).reshape(z.shape)
    x = np.zeros_like(z)
    x[:, 1:] = z[:, :-1]
    return x


def mgf_identity(spec: MgfSpec, trials: int, rng: RngStream, chunk: int = 1 << 16) -> MgfResult:
    """Monte Carlo check of the adapted-process exponential moment identity.

    ``Z`` is i.i.d. standard normal and ``X`` is generated causally from the
    declared process. The expectation of the exponential does not depend on
    the process; ``unstable`` flags runs whose mean is dominated by a single
    sample, where the standard error is unreliable.
    """
    if trials < 2:
        raise DomainError("need at least two trials")
    z_stream, x_stream = rng.spawn("Z"), rng.spawn("X")
    total = 0.0
    total_sq = 0.0
    biggest = 0.0
    done = 0
    while done < trials:
        rows = min(chunk, trials - done)
        z = z_stream.normals(rows * spec.n, done * spec.n).reshape(rows, spec.n)
        x = _x_samples(spec, z, x_stream, done * spec.n)
        vals = np.exp(_kernels.mgf_exponents(z, x, spec.t, spec.P))
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
        biggest = max(biggest, float(vals.max()))
        done += rows
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0) * trials / (trials - 1)
    return MgfResult(mean, mgf_closed_form(spec), math.sqrt(var / trials), biggest > 0.05 * total)


class Link(str, enum.Enum):
    RELAY = "relay"
    BIN = "bin"
    DEST = "dest"


@dataclass(frozen=True)
class PackingResult:
    p_miss: float
    p_confuse: float
    bound_miss: float
    bound_confuse: float
    trials: int

    @property
    def se_miss(self) -> float:
        return math.sqrt(max(self.p_miss * (1 - self.p_miss), 1e-300) / self.trials)

    @property
    def se_confuse(self) -> float:
        return math.sqrt(max(self.p_confuse * (1 - self.p_confuse), 1e-300) / self.trials)


def packing_probe(n: int, m_codewords: int, link, params: SchemeParams, ch: ChannelParams,
                  trials: int, rng: RngStream) -> PackingResult:
    """Empirical miss and impostor probabilities of one link's threshold test.

    Each trial draws a fresh codebook from the same lazy generator the codec
    uses. Codeword 1 is sent; the miss event is codeword 1 failing the test
    and the confusion event is any of the other ``m_codewords - 1`` passing.
    """
    link = Link(link)
    if params.n != n:
        raise DomainError("params.n must equal n")
    if m_codewords < 1 or trials < 1:
        raise DomainError("m_codewords and trials must be positive")
    probe = replace(params, M=m_codewords, B=m_codewords, a_set_size=m_codewords,
                    mode=Mode.CUSTOM)
    mom = getattr(probe.moments(ch), link.value)
    thresh = n * mom.mean - math.sqrt(n ** 1.5 * mom.var)
    a = probe.alpha.alpha
    fresh = math.sqrt(a * probe.p1n)
    src_bin = math.sqrt((1.0 - a) * probe.p1n)
    bin_gain = src_bin + math.sqrt(probe.p2n)
    cvar = probe.codeword_variance
    nd = ch.n2 + ch.n3
    misses = 0
    confusions = 0
    for i in range(trials):
        trial = rng.spawn("trial", i)
        books = Codebooks(probe, trial.spawn("codebook"))
        z = trial.normals(n)
        u_bank = books.u_bank
        v_bank = books.v_bank
        if link is Link.RELAY:
            v = v_bank[0]
            y = fresh * u_bank[0] + src_bin * v + math.sqrt(ch.n2) * z
            resid, rows, coef = y - src_bin * v, u_bank, fresh
            var_hit, var_miss = ch.n2, ch.n2 + cvar * fresh * fresh
        elif link is Link.BIN:
            y = fresh * u_bank[0] + bin_gain * v_bank[0] + math.sqrt(nd) * z
            resid, rows, coef = y, v_bank, bin_gain
            var_hit = nd + cvar * fresh * fresh
            var_miss = var_hit + cvar * bin_gain * bin_gain
        else:
            combined = fresh * u_bank + bin_gain * v_bank
            y = combined[0] + math.sqrt(nd) * z
            resid, rows, coef = y, combined, 1.0
            var_hit = nd
            var_miss = nd + cvar * (fresh * fresh + bin_gain * bin_gain)
        hit = _kernels.sq_dist_rows(rows, resid, coef)
        scores = (-hit / (2.0 * var_hit) + float(np.dot(resid, resid)) / (2.0 * var_miss)
                  + 0.5 * n * math.log(var_miss / var_hit))
        passed = scores >= thresh
        misses += not passed[0]
        confusions += bool(np.any(passed[1:]))
    bound_conf = (m_codewords - 1) * math.exp(-(n * mom.mean - math.sqrt(n ** 1.5 * mom.var)))
    return PackingResult(misses / trials, confusions / trials, 1.0 / math.sqrt(n),
                         bound_conf, trials)


def snr_for_exponent(n: int, target: float) -> float:
    """Link SNR ``x`` at which ``n C(x) - n^(3/4) sqrt(V(x))`` equals ``target``."""
    f = lambda x: n * cap_fn(x) - n ** 0.75 * math.sqrt(disp_fn(x)) - target
    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return brentq(f, 0.0, hi, xtol=1e-14)


def exp_inequality(a: float, m: float) -> bool:
    """Check ``(1 + a/m)^m <= e^a <= (1 + a/m)^(m + a)`` in the log domain."""
    if not (a > 0 and m > 0):
        raise DomainError("a and m must be positive")
    lg = math.log1p(a / m)
    tol = 1e-12 * a
    return m * lg <= a + tol and a <= (m + a) * lg + tol
