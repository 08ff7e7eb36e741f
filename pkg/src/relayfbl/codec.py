"""Block-Markov decode-forward code with binning, power control and threshold decoding.

A message is ``L`` submessages in ``{1..M}`` sent over ``L+1`` blocks of ``n``
symbols. In block ``l`` the source superposes the fresh submessage codeword
``U(W_l)`` on the bin codeword ``V(g(W_{l-1}))``. The relay decodes ``W_l``
from its block-``l`` observation and forwards ``V(g(W*_l))`` in block ``l+1``.
The destination decodes with a sliding window: the bin of ``W_l`` from block
``l+1``, then ``W_l`` itself from block ``l`` among the messages in that bin.
Submessages outside the retained set ``A = {1..a_set_size}`` silence the
source and relay after block 1, which lets retained codewords use more power.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .capacity import PowerSplit, alpha_tilde
from .channel import ChannelSession
from .core import ChannelParams, DomainError, RngStream
from .fbl_bounds import (MomentPair, SET_BACKOFF, link_moments, boosted_powers,
                         fourth_root_ceil)

# Largest bank (rows x n) materialized in memory at once.
MAX_BANK_ENTRIES = 1 << 24
_SCAN_ROWS = 4096


class ResourceError(MemoryError):
    """A requested materialization exceeds the configured memory budget."""


class Mode(str, enum.Enum):
    PAPER_EXACT = "paper_exact"
    CUSTOM = "custom"


class CodebookPolicy(str, enum.Enum):
    FIXED = "fixed"          # one codebook drawn from SchemeParams.seed
    PER_TRIAL = "per_trial"  # fresh codebook per trial, drawn from the trial stream


@dataclass(frozen=True)
class SchemeParams:
    n: int
    L: int
    M: int
    B: int
    eps: float
    alpha: PowerSplit
    p1n: float
    p2n: float
    codeword_variance: float
    a_set_size: int
    mode: Mode = Mode.CUSTOM
    seed: RngStream = field(default_factory=lambda: RngStream(0))
    codebook: CodebookPolicy = CodebookPolicy.FIXED

    def __post_init__(self):
        if not isinstance(self.alpha, PowerSplit):
            object.__setattr__(self, "alpha", PowerSplit(self.alpha))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "codebook", CodebookPolicy(self.codebook))
        for name in ("n", "L", "M", "B", "a_set_size"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)) or val < 1:
                raise DomainError(f"{name} must be a positive integer, got {val!r}")
            object.__setattr__(self, name, int(val))
        if not 0.0 < self.eps < 1.0:
            raise DomainError("eps must lie in (0, 1)")
        if not (self.p1n > 0 and self.p2n > 0):
            raise DomainError("p1n and p2n must be positive")
        if not 0.0 < self.codeword_variance < 1.0:
            raise DomainError("codeword_variance must lie in (0, 1)")
        if self.a_set_size > self.M:
            raise DomainError("a_set_size cannot exceed M")
        if self.mode is Mode.PAPER_EXACT:
            q = self.n ** -0.25
            if self.L != fourth_root_ceil(self.n):
                raise DomainError("paper_exact mode needs L = ceil(n^(1/4))")
            if not math.isclose(self.codeword_variance, 1.0 - q, rel_tol=1e-12):
                raise DomainError("paper_exact mode needs codeword_variance = 1 - n^(-1/4)")
            if self.a_set_size != paper_a_set_size(self.n, self.eps, self.M):
                raise DomainError("paper_exact mode needs the prescribed retained-set size")

    @classmethod
    def paper_exact(cls, n: int, M: int, B: int, eps: float, ch: ChannelParams,
                    seed: RngStream = RngStream(0), codebook="fixed") -> "SchemeParams":
        """Construction parameters for blocklength ``n`` with chosen message and bin counts."""
        p1n, p2n = boosted_powers(n, eps, ch)
        return cls(n=n, L=fourth_root_ceil(n), M=M, B=B, eps=eps,
                   alpha=alpha_tilde(ch.p1, ch.p2, ch), p1n=p1n, p2n=p2n,
                   codeword_variance=1.0 - n ** -0.25,
                   a_set_size=paper_a_set_size(n, eps, M), mode=Mode.PAPER_EXACT,
                   seed=seed, codebook=codebook)

    @classmethod
    def custom(cls, n: int, L: int, M: int, B: int, ch: ChannelParams, eps: float = 0.5,
               alpha=None, a_set_size: int | None = None, p1n: float | None = None,
               p2n: float | None = None, codeword_variance: float | None = None,
               seed: RngStream = RngStream(0), codebook="fixed") -> "SchemeParams":
        """Desk-scale parameters.

        Missing powers follow :func:`expected_power_rule`; the retained set
        defaults to ``ceil((1-eps) M)`` and the codeword variance to
        ``1 - n^(-1/4)``.
        """
        a = math.ceil((1.0 - eps) * M) if a_set_size is None else a_set_size
        a = max(1, min(a, M))
        auto1, auto2 = expected_power_rule(L, M, a, ch)
        return cls(n=n, L=L, M=M, B=B, eps=eps,
                   alpha=alpha_tilde(ch.p1, ch.p2, ch) if alpha is None else alpha,
                   p1n=auto1 if p1n is None else p1n, p2n=auto2 if p2n is None else p2n,
                   codeword_variance=1.0 - n ** -0.25 if codeword_variance is None
                   else codeword_variance,
                   a_set_size=a, mode=Mode.CUSTOM, seed=seed, codebook=codebook)

    def moments(self, ch: ChannelParams):
        return link_moments(self.n, self.alpha, (self.p1n, self.p2n), ch,
                            codeword_variance=self.codeword_variance)


def paper_a_set_size(n: int, eps: float, M: int) -> int:
    """``ceil((1 - eps + 34 n^(-1/4)) M)`` clamped to ``M``."""
    return min(M, math.ceil((1.0 - eps + SET_BACKOFF * n ** -0.25) * M))


def expected_power_rule(L: int, M: int, a_set_size: int, ch: ChannelParams) -> tuple[float, float]:
    """Per-block powers that meet the expected power budget over ``L+1`` blocks.

    The source always sends block 1 and sends blocks 2..L+1 only for retained
    first submessages (probability ``a/M``), so boosting by
    ``(L+1) / (1 + L a / M)`` keeps its expected power at the budget. The relay
    uses the same factor; it is silent in block 1, so it stays below budget.
    """
    boost = (L + 1) / (1.0 + L * a_set_size / M)
    return ch.p1 * boost, ch.p2 * boost


class Codebooks:
    """Gaussian codeword banks ``U`` (M rows) and ``V`` (B rows) plus the binning map.

    Row ``w`` (1-based) of a bank is read from a fixed position of a
    counter-based stream, so any row can be generated on demand and a full
    bank never has to exist in memory. Small banks are cached after first use.
    """

    def __init__(self, params: SchemeParams, rng: RngStream):
        self.params = params
        self.n = params.n
        self._scale = math.sqrt(params.codeword_variance)
        self._streams = {"U": rng.spawn("U"), "V": rng.spawn("V")}
        self._bin_stream = rng.spawn("g")
        self._rows = {"U": params.M, "V": params.B}
        self._cache: dict[str, np.ndarray] = {}

    def _bank_rows(self, bank: str, start: int, stop: int) -> np.ndarray:
        """Rows ``start .. stop-1`` (1-based, stop exclusive) of a bank."""
        z = self._streams[bank].normals((stop - start) * self.n, (start - 1) * self.n)
        return (self._scale * z).reshape(stop - start, self.n)

    @functools.cached_property
    def _cacheable(self) -> bool:
        return max(self.params.M, self.params.B) * self.n <= MAX_BANK_ENTRIES

    def _cached(self, bank: str) -> np.ndarray:
        arr = self._cache.get(bank)
        if arr is None:
            arr = self._bank_rows(bank, 1, self._rows[bank] + 1)
            arr.flags.writeable = False
            self._cache[bank] = arr
        return arr

    def _full(self, bank: str) -> np.ndarray:
        if self._rows[bank] * self.n > MAX_BANK_ENTRIES:
            raise ResourceError(
                f"bank {bank} has {self._rows[bank]} x {self.n} entries, above the "
                f"{MAX_BANK_ENTRIES} budget; use row access instead")
        return self._cached(bank)

    @property
    def u_bank(self) -> np.ndarray:
        return self._full("U")

    @property
    def v_bank(self) -> np.ndarray:
        return self._full("V")

    def rows(self, bank: str, idx) -> np.ndarray:
        idx = np.atleast_1d(np.asarray(idx, dtype=np.int64))
        if idx.size and (idx.min() < 1 or idx.max() > self._rows[bank]):
            raise IndexError(f"row index out of range for bank {bank}")
        if self._cacheable:
            return self._cached(bank)[idx - 1]
        return np.vstack([self._bank_rows(bank, int(w), int(w) + 1) for w in idx]) \
            if idx.size else np.empty((0, self.n))

    def u(self, w: int) -> np.ndarray:
        return self.rows("U", w)[0]

    def v(self, b: int) -> np.ndarray:
        return self.rows("V", b)[0]

    def scan(self, bank: str):
        """Yield ``(first_index, rows)`` chunks covering a whole bank."""
        total = self._rows[bank]
        if self._cacheable:
            yield 1, self._cached(bank)
            return
        for start in range(1, total + 1, _SCAN_ROWS):
            stop = min(total + 1, start + _SCAN_ROWS)
            yield start, self._bank_rows(bank, start, stop)

    def g(self, w) -> np.ndarray | int:
        """Bin index of message(s) ``w``, uniform on ``{1..B}`` and i.i.d. over messages."""
        if np.ndim(w) == 0:
            return int(self._bin_stream.integers(self.params.B, 1, int(w) - 1)[0])
        return self.binning[np.asarray(w, dtype=np.int64) - 1]

    @functools.cached_property
    def binning(self) -> np.ndarray:
        if self.params.M > MAX_BANK_ENTRIES:
            raise ResourceError("binning map too large to materialize")
        arr = self._bin_stream.integers(self.params.B, self.params.M)
        arr.flags.writeable = False
        return arr

    def preimage(self, b: int) -> np.ndarray:
        """Messages assigned to bin ``b``, in increasing order."""
        return np.flatnonzero(self.binning == b) + 1


@functools.lru_cache(maxsize=8)
def _build_cached(params: SchemeParams, rng: RngStream) -> Codebooks:
    return Codebooks(params, rng)


def build_scheme(params: SchemeParams, rng: RngStream | None = None) -> Codebooks:
    """Codebooks determined by ``rng`` (default ``params.seed``)."""
    return _build_cached(params, params.seed if rng is None else rng)


def superpose(u, v, params: SchemeParams) -> tuple[np.ndarray, np.ndarray]:
    """Source and relay codewords from a fresh-message row ``u`` and bin row ``v``."""
    a = params.alpha.alpha
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x1 = math.sqrt(a * params.p1n) * u + math.sqrt((1.0 - a) * params.p1n) * v
    return x1, math.sqrt(params.p2n) * v


def _submessage(ell: int, msg) -> int:
    """``W_ell`` with the convention ``W_0 = W_{L+1} = 1``."""
    return 1 if ell == 0 or ell == len(msg) + 1 else int(msg[ell - 1])


def source_codeword(ell: int, msg, books: Codebooks, params: SchemeParams):
    """Candidate source block before gating and whether it breaks the peak limit."""
    u = books.u(_submessage(ell, msg))
    v = books.v(books.g(_submessage(ell - 1, msg)))
    x1, _ = superpose(u, v, params)
    return x1, float(np.dot(x1, x1)) > params.n * params.p1n


def source_block(ell: int, msg, books: Codebooks, params: SchemeParams) -> np.ndarray:
    """Source transmission in block ``ell`` (1-based, up to ``L+1``)."""
    if not 1 <= ell <= params.L + 1:
        raise DomainError(f"block index {ell} outside 1..{params.L + 1}")
    x1, violated = source_codeword(ell, msg, books, params)
    if violated or (ell > 1 and int(msg[0]) > params.a_set_size):
        return np.zeros(params.n)
    return x1


def threshold_test(sum_id: float, n: int, mom: MomentPair) -> bool:
    """Accept when the accumulated information density reaches ``n E - sqrt(n^(3/2) Var)``."""
    return sum_id >= n * mom.mean - math.sqrt(n ** 1.5 * mom.var)


def _density_sums(rows: np.ndarray, resid: np.ndarray, coef: float, var_hit: float,
                  var_miss: float) -> np.ndarray:
    """Gaussian log-likelihood ratio summed over a block, for every candidate row.

    Under the hypothesis the block is ``resid = coef * row + N(0, var_hit)``;
    under the alternative it is ``N(0, var_miss)``.
    """
    n = resid.size
    hit = _kernels.sq_dist_rows(rows, resid, coef)
    miss = float(np.dot(resid, resid))
    return -hit / (2.0 * var_hit) + miss / (2.0 * var_miss) + 0.5 * n * math.log(var_miss / var_hit)


def _unique_pass(scores: np.ndarray, labels: np.ndarray, n: int, mom: MomentPair):
    passing = labels[scores >= n * mom.mean - math.sqrt(n ** 1.5 * mom.var)]
    return int(passing[0]) if passing.size == 1 else None


def _gains(params: SchemeParams) -> tuple[float, float, float]:
    a = params.alpha.alpha
    fresh = math.sqrt(a * params.p1n)
    src_bin = math.sqrt((1.0 - a) * params.p1n)
    return fresh, src_bin, src_bin + math.sqrt(params.p2n)


def relay_decode(y2_block, prev_estimate: int, books: Codebooks, params: SchemeParams,
                 tie_rng: RngStream, *, ch: ChannelParams) -> tuple[int, bool]:
    """Threshold-decode the block's submessage at the relay.

    Returns the estimate and whether it was a unique threshold pass (as
    opposed to a uniform fallback draw).
    """
    y2 = np.asarray(y2_block, dtype=np.float64)
    fresh, src_bin, _ = _gains(params)
    resid = y2 - src_bin * books.v(books.g(prev_estimate))
    var_hit = ch.n2
    var_miss = ch.n2 + params.codeword_variance * fresh * fresh
    mom = params.moments(ch).relay
    found, count = None, 0
    for start, rows in books.scan("U"):
        scores = _density_sums(rows, resid, fresh, var_hit, var_miss)
        labels = np.arange(start, start + rows.shape[0])
        hits = labels[scores >= params.n * mom.mean - math.sqrt(params.n ** 1.5 * mom.var)]
        count += hits.size
        if hits.size:
            found = int(hits[0])
        if count > 1:
            break
    if count == 1:
        return found, True
    return tie_rng.integer(params.M), False


def relay_transmit(ell: int, prev_estimate: int, first_estimate: int | None,
                   books: Codebooks, params: SchemeParams) -> tuple[np.ndarray, bool]:
    """Relay block ``ell`` and whether its codeword broke the peak limit.

    Silent in block 1 and whenever the first decoded submessage lies outside
    the retained set.
    """
    if ell == 1:
        return np.zeros(params.n), False
    _, x2 = superpose(np.zeros(params.n), books.v(books.g(prev_estimate)), params)
    violated = float(np.dot(x2, x2)) > params.n * params.p2n
    if violated or first_estimate is None or first_estimate > params.a_set_size:
        return np.zeros(params.n), violated
    return x2, violated


def relay_step(ell: int, y2_block, prev_estimate: int, books: Codebooks, params: SchemeParams,
               tie_rng: RngStream, *, ch: ChannelParams,
               first_estimate: int | None = None) -> tuple[int, np.ndarray]:
    """One relay block: transmit based on past estimates, then decode this block.

    ``prev_estimate`` is ``W*_{ell-1}`` (1 for ``ell = 1``). The returned
    block is what the relay sends during block ``ell``; it depends only on
    earlier blocks, as causality requires. In block ``L+1`` nothing new is
    decoded and the estimate is the known dummy submessage 1.
    """
    if not 1 <= ell <= params.L + 1:
        raise DomainError(f"block index {ell} outside 1..{params.L + 1}")
    if ell == 2 and first_estimate is None:
        first_estimate = prev_estimate
    x2, _ = relay_transmit(ell, prev_estimate, first_estimate, books, params)
    if ell == params.L + 1:
        return 1, x2
    est, _ = relay_decode(y2_block, prev_estimate, books, params, tie_rng, ch=ch)
    return est, x2


@dataclass
class DestDetail:
    estimates: np.ndarray
    bins: np.ndarray
    bin_unique: np.ndarray
    sub_unique: np.ndarray


def _dest_decode(y3_blocks, books: Codebooks, params: SchemeParams, tie_rng: RngStream,
                 ch: ChannelParams) -> DestDetail:
    y3 = np.asarray(y3_blocks, dtype=np.float64)
    if y3.shape != (params.L + 1, params.n):
        raise ValueError(f"y3_blocks must have shape {(params.L + 1, params.n)}")
    fresh, _, bin_gain = _gains(params)
    cvar = params.codeword_variance
    nd = ch.n2 + ch.n3
    mom = params.moments(ch)
    L, n = params.L, params.n
    est = np.empty(L, dtype=np.int64)
    bins = np.empty(L, dtype=np.int64)
    bin_ok = np.zeros(L, dtype=bool)
    sub_ok = np.zeros(L, dtype=bool)
    var_bin_hit = nd + cvar * fresh * fresh
    var_bin_miss = var_bin_hit + cvar * bin_gain * bin_gain
    prev = 1
    for ell in range(1, L + 1):
        # Bin of W_ell from block ell+1.
        found, count = None, 0
        for start, rows in books.scan("V"):
            scores = _density_sums(rows, y3[ell], bin_gain, var_bin_hit, var_bin_miss)
            labels = np.arange(start, start + rows.shape[0])
            hits = labels[scores >= n * mom.bin.mean - math.sqrt(n ** 1.5 * mom.bin.var)]
            count += hits.size
            if hits.size:
                found = int(hits[0])
            if count > 1:
                break
        if count == 1:
            bins[ell - 1], bin_ok[ell - 1] = found, True
        else:
            bins[ell - 1] = tie_rng.spawn("bin", ell).integer(params.B)
        # W_ell from block ell among messages in that bin.
        block = y3[ell - 1]
        v_prev = books.v(books.g(prev))
        if ell == 1:
            # The relay was silent; add its would-be codeword so block 1 looks like the rest.
            block = block + math.sqrt(params.p2n) * v_prev
        resid = block - bin_gain * v_prev
        cands = books.preimage(bins[ell - 1])
        pick = None
        if cands.size:
            scores = _density_sums(books.rows("U", cands), resid, fresh, nd, nd + cvar * fresh * fresh)
            pick = _unique_pass(scores, cands, n, mom.dest_sub)
        if pick is None:
            pick = tie_rng.spawn("sub", ell).integer(params.M)
        else:
            sub_ok[ell - 1] = True
        est[ell - 1] = prev = pick
    return DestDetail(est, bins, bin_ok, sub_ok)


def dest_decode(y3_blocks, books: Codebooks, params: SchemeParams, tie_rng: RngStream, *,
                ch: ChannelParams) -> np.ndarray:
    """Sliding-window estimates of the ``L`` submessages from all ``L+1`` destination blocks."""
    return _dest_decode(y3_blocks, books, params, tie_rng, ch).estimates


@dataclass
class TrialRecord:
    message: np.ndarray
    relay_estimates: np.ndarray
    dest_estimates: np.ndarray
    erased: bool
    error: bool
    power_src: float
    power_relay: float
    stage_flags: dict
    cross: float = 0.0

    def __eq__(self, other):
        if not isinstance(other, TrialRecord):
            return NotImplemented
        return (np.array_equal(self.message, other.message)
                and np.array_equal(self.relay_estimates, other.relay_estimates)
                and np.array_equal(self.dest_estimates, other.dest_estimates)
                and self.erased == other.erased and self.error == other.error
                and self.power_src == other.power_src and self.power_relay == other.power_relay
                and self.cross == other.cross
                and self.stage_flags.keys() == other.stage_flags.keys()
                and all(np.array_equal(self.stage_flags[k], other.stage_flags[k])
                        for k in self.stage_flags))


STAGES = ("relay_error", "bin_error", "sub_error", "peak_src", "peak_relay")


def simulate_trial(params: SchemeParams, ch: ChannelParams, trial_rng: RngStream,
                   keep_traces: bool = False):
    """Send one uniformly drawn message through the channel and decode it.

    Randomness comes from named children of ``trial_rng``: ``msg`` for the
    message, ``noise`` for the channel, ``ties`` for decoder fallbacks and,
    with per-trial codebooks, ``codebook``. With ``keep_traces`` the source
    and relay signals are returned alongside the record.
    """
    books = build_scheme(params, trial_rng.spawn("codebook")
                         if params.codebook is CodebookPolicy.PER_TRIAL else None)
    L, n = params.L, params.n
    msg = trial_rng.spawn("msg").integers(params.M, L)
    session = ChannelSession(ch, trial_rng.spawn("noise"))
    ties = trial_rng.spawn("ties")
    x1 = np.zeros((L + 1, n))
    x2 = np.zeros((L + 1, n))
    y3 = np.empty((L + 1, n))
    relay_est = np.empty(L, dtype=np.int64)
    peak_src = np.zeros(L + 1, dtype=bool)
    peak_relay = np.zeros(L + 1, dtype=bool)
    erased = int(msg[0]) > params.a_set_size
    prev, first = 1, None
    for ell in range(1, L + 2):
        cand, peak_src[ell - 1] = source_codeword(ell, msg, books, params)
        if not peak_src[ell - 1] and (ell == 1 or not erased):
            x1[ell - 1] = cand
        x2[ell - 1], peak_relay[ell - 1] = relay_transmit(ell, prev, first, books, params)
        y2_blk, y3[ell - 1] = session.step_block(x1[ell - 1], x2[ell - 1])
        if ell <= L:
            prev, _ = relay_decode(y2_blk, prev, books, params, ties.spawn("relay", ell), ch=ch)
            relay_est[ell - 1] = prev
            if ell == 1:
                first = prev
    detail = _dest_decode(y3, books, params, ties, ch)
    true_bins = books.g(msg)
    total = (L + 1) * n
    rec = TrialRecord(
        message=msg, relay_estimates=relay_est, dest_estimates=detail.estimates,
        erased=erased, error=bool(np.any(msg != detail.estimates)),
        power_src=float(np.sum(x1 * x1)) / total, power_relay=float(np.sum(x2 * x2)) / total,
        stage_flags={
            "relay_error": relay_est != msg,
            "bin_error": detail.bins != true_bins,
            "sub_error": detail.estimates != msg,
            "peak_src": peak_src,
            "peak_relay": peak_relay,
        },
        cross=float(np.sum(x1 * x2)),
    )
    if keep_traces:
        return rec, x1.ravel(), x2.ravel()
    return rec
