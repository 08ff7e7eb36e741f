"""Experiment orchestration: parallel trials, summaries with confidence intervals, sweeps."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.stats import beta as beta_dist

from . import hypothesis_testing as ht
from .capacity import PowerSplit, eps_capacity, r_cutset
from .codec import STAGES, Mode, SchemeParams, TrialRecord, simulate_trial
from .core import ChannelParams, DomainError, RngStream
from .fbl_bounds import achievable_log_m_exact, bound_report, converse_corrections, converse_log_m

Z95 = 1.959963984540054
TRIALS_CSV = "trials.csv"
SUMMARY_JSON = "summary.json"


class ConfigError(ValueError):
    """The experiment configuration is malformed."""


@dataclass(frozen=True)
class ExperimentConfig:
    scheme: SchemeParams
    ch: ChannelParams
    trials: int = 1000
    master_seed: int = 0
    workers: int = 1
    output_path: Path | None = None

    def __post_init__(self):
        if self.trials < 1 or self.workers < 1:
            raise ConfigError("trials and workers must be at least 1")
        if not 0 <= self.master_seed < 1 << 64:
            raise ConfigError("master_seed must be an unsigned 64-bit integer")
        if self.output_path is not None:
            object.__setattr__(self, "output_path", Path(self.output_path))


@dataclass(frozen=True)
class Estimate:
    value: float
    half_width: float
    lo: float
    hi: float


@dataclass(frozen=True)
class ExperimentSummary:
    trials: int
    error_rate: Estimate
    erased_rate: Estimate
    mean_power_src: Estimate
    mean_power_relay: Estimate
    rho_hat: float
    stage_breakdown: dict
    converse_diagnostic: float
    log_m_used: float
    degenerate_ci: bool

    def to_json(self) -> dict:
        """Plain dict with undefined interval widths (single trial) as ``None``."""
        def clean(v):
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return None if isinstance(v, float) and math.isnan(v) else v
        return clean(dataclasses.asdict(self))


def proportion_ci(successes: int, trials: int, method: str = "normal") -> Estimate:
    """95% interval for a binomial proportion; ``method`` is ``normal`` or ``exact``."""
    p = successes / trials
    if trials < 2:
        nan = float("nan")
        return Estimate(p, nan, nan, nan)
    if method == "normal":
        hw = Z95 * math.sqrt(p * (1.0 - p) / trials)
        return Estimate(p, hw, p - hw, p + hw)
    if method == "exact":
        lo = 0.0 if successes == 0 else float(beta_dist.ppf(0.025, successes, trials - successes + 1))
        hi = 1.0 if successes == trials else float(beta_dist.ppf(0.975, successes + 1, trials - successes))
        return Estimate(p, max(p - lo, hi - p), lo, hi)
    raise ValueError(f"unknown interval method {method!r}")


def mean_ci(values) -> Estimate:
    x = np.asarray(values, dtype=np.float64)
    m = float(x.mean())
    if x.size < 2:
        nan = float("nan")
        return Estimate(m, nan, nan, nan)
    hw = Z95 * float(x.std(ddof=1)) / math.sqrt(x.size)
    return Estimate(m, hw, m - hw, m + hw)


def estimate_rho(trial_traces, p1: float, p2: float) -> float:
    """Empirical source-relay correlation normalized by the power budgets.

    ``trial_traces`` holds ``(x1, x2)`` pairs of equal-length traces.
    """
    sums = []
    length = None
    for x1, x2 in trial_traces:
        x1 = np.asarray(x1, dtype=np.float64)
        x2 = np.asarray(x2, dtype=np.float64)
        if x1.shape != x2.shape or (length is not None and x1.size != length):
            raise ValueError("traces must all have the same length")
        length = x1.size
        sums.append(float(np.dot(x1, x2)))
    if not sums:
        raise ValueError("need at least one trace pair")
    return float(np.mean(sums)) / (length * math.sqrt(p1 * p2))


def _run_chunk(args):
    params, ch, master_seed, indices = args
    return [(i, simulate_trial(params, ch, RngStream(master_seed, i))) for i in indices]


def run_trials(cfg: ExperimentConfig) -> list[TrialRecord]:
    """All trial records in trial-index order; worker count never changes the result."""
    indices = list(range(cfg.trials))
    if cfg.workers == 1:
        pairs = _run_chunk((cfg.scheme, cfg.ch, cfg.master_seed, indices))
    else:
        chunks = [indices[k::cfg.workers] for k in range(cfg.workers)]
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            parts = pool.map(_run_chunk, [(cfg.scheme, cfg.ch, cfg.master_seed, c)
                                          for c in chunks if c])
            pairs = [pr for part in parts for pr in part]
    pairs.sort(key=lambda pr: pr[0])
    return [rec for _, rec in pairs]


def _join(arr) -> str:
    return ";".join(str(int(v)) for v in np.asarray(arr).ravel())


TRIAL_COLUMNS = ["trial", "message", "relay_estimates", "dest_estimates", "erased", "error",
                 "power_src", "power_relay", "cross"] + [f"{s}_blocks" for s in STAGES]


def trials_csv(records: list[TrialRecord]) -> str:
    """Per-trial table; floats are written with ``repr`` so the text is bit-exact."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_COLUMNS)
    for i, r in enumerate(records):
        w.writerow([i, _join(r.message), _join(r.relay_estimates), _join(r.dest_estimates),
                    int(r.erased), int(r.error), repr(r.power_src), repr(r.power_relay),
                    repr(r.cross)] + [_join(r.stage_flags[s]) for s in STAGES])
    return buf.getvalue()


def summarize(records: list[TrialRecord], cfg: ExperimentConfig,
              ci_method: str = "normal") -> ExperimentSummary:
    n_tr = len(records)
    sp, ch = cfg.scheme, cfg.ch
    total_len = (sp.L + 1) * sp.n
    rho = float(np.mean([r.cross for r in records])) / (total_len * math.sqrt(ch.p1 * ch.p2))
    rho_c = min(1.0, max(-1.0, rho))
    diag = (total_len * r_cutset(PowerSplit(1.0 - rho_c ** 2), ch.p1 / (1 - sp.eps),
                                 ch.p2 / (1 - sp.eps), ch)
            + converse_corrections(max(total_len, 4), sp.eps))
    stages = {s: float(np.mean([np.mean(r.stage_flags[s]) for r in records])) for s in STAGES}
    return ExperimentSummary(
        trials=n_tr,
        error_rate=proportion_ci(sum(r.error for r in records), n_tr, ci_method),
        erased_rate=proportion_ci(sum(r.erased for r in records), n_tr, ci_method),
        mean_power_src=mean_ci([r.power_src for r in records]),
        mean_power_relay=mean_ci([r.power_relay for r in records]),
        rho_hat=rho, stage_breakdown=stages, converse_diagnostic=diag,
        log_m_used=sp.L * math.log(sp.M), degenerate_ci=n_tr < 2,
    )


def _prepare_output(path: Path) -> None:
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    for name in (TRIALS_CSV, SUMMARY_JSON):
        target = path / name
        if target.exists() and not os.access(target, os.W_OK):
            raise PermissionError(f"{target} is not writable")


def run_experiment(cfg: ExperimentConfig, ci_method: str = "normal") -> ExperimentSummary:
    """Run all trials and, when ``output_path`` is set, write ``trials.csv`` and ``summary.json`` there."""
    if cfg.output_path is not None:
        _prepare_output(cfg.output_path)
    records = run_trials(cfg)
    summary = summarize(records, cfg, ci_method)
    if cfg.output_path is not None:
        (cfg.output_path / TRIALS_CSV).write_text(trials_csv(records))
        (cfg.output_path / SUMMARY_JSON).write_text(
            json.dumps(summary.to_json(), indent=2, sort_keys=True) + "\n")
    return summary


# ---- configuration files -------------------------------------------------

_SCHEME_KEYS = {f.name for f in dataclasses.fields(SchemeParams)}
_CH_KEYS = {"p1", "p2", "n2", "n3"}
_TOP_KEYS = {"scheme", "ch", "trials", "master_seed", "workers", "output_path"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _parse_seed(val) -> RngStream:
    if isinstance(val, int):
        return RngStream(val)
    if isinstance(val, dict):
        _reject_unknown(val, {"seed", "stream_id"}, "scheme.seed")
        return RngStream(val["seed"], val.get("stream_id", 0))
    raise ConfigError("scheme.seed must be an integer or {seed, stream_id}")


def scheme_from_dict(d: dict, ch: ChannelParams) -> SchemeParams:
    _reject_unknown(d, _SCHEME_KEYS, "scheme")
    d = dict(d)
    if "seed" in d:
        d["seed"] = _parse_seed(d["seed"])
    mode = Mode(d.pop("mode", "custom"))
    try:
        if mode is Mode.PAPER_EXACT:
            base = SchemeParams.paper_exact(d["n"], d["M"], d["B"], d["eps"], ch,
                                            seed=d.get("seed", RngStream(0)),
                                            codebook=d.get("codebook", "fixed"))
            given = {k: v for k, v in d.items() if k not in ("n", "M", "B", "eps")}
            return replace(base, **given) if given else base
        return SchemeParams.custom(
            d["n"], d["L"], d["M"], d["B"], ch, eps=d.get("eps", 0.5), alpha=d.get("alpha"),
            a_set_size=d.get("a_set_size"), p1n=d.get("p1n"), p2n=d.get("p2n"),
            codeword_variance=d.get("codeword_variance"), seed=d.get("seed", RngStream(0)),
            codebook=d.get("codebook", "fixed"))
    except KeyError as exc:
        raise ConfigError(f"scheme is missing required key {exc}") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    _reject_unknown(d, _TOP_KEYS, "config")
    for key in ("scheme", "ch"):
        if key not in d:
            raise ConfigError(f"config is missing {key!r}")
    _reject_unknown(d["ch"], _CH_KEYS, "ch")
    ch = ChannelParams(**d["ch"])
    return ExperimentConfig(
        scheme=scheme_from_dict(d["scheme"], ch), ch=ch, trials=d.get("trials", 1000),
        master_seed=d.get("master_seed", 0), workers=d.get("workers", 1),
        output_path=d.get("output_path"))


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def scheme_to_dict(sp: SchemeParams) -> dict:
    return {
        "n": sp.n, "L": sp.L, "M": sp.M, "B": sp.B, "eps": sp.eps, "alpha": sp.alpha.alpha,
        "p1n": sp.p1n, "p2n": sp.p2n, "codeword_variance": sp.codeword_variance,
        "a_set_size": sp.a_set_size, "mode": sp.mode.value,
        "seed": {"seed": sp.seed.seed, "stream_id": sp.seed.stream_id},
        "codebook": sp.codebook.value,
    }


# ---- sweeps ----------------------------------------------------------------

SWEEP_AXES = ("n", "eps", "p1", "p2")
SWEEP_COLUMNS = ["axis", "value", "trials", "error_rate", "error_ci", "erased_rate", "erased_ci",
                 "mean_power_src", "power_src_ci", "mean_power_relay", "power_relay_ci",
                 "rho_hat", "eps_capacity", "achievable_log_m", "converse_log_m",
                 "converse_diagnostic", "log_m_used"]


def _point_config(axis: str, value, base: ExperimentConfig) -> ExperimentConfig:
    """Configuration of one sweep point.

    paper_exact schemes are rebuilt from their prescriptions. Custom schemes keep
    their fields, except that per-block powers scale with the budget on the
    ``p1``/``p2`` axes.
    """
    sp, ch = base.scheme, base.ch
    if axis == "n":
        if int(value) != value:
            raise DomainError("n grid values must be integers")
        ch_new = ch
        sp_new = (replace(sp, n=int(value)) if sp.mode is Mode.CUSTOM else
                  SchemeParams.paper_exact(int(value), sp.M, sp.B, sp.eps, ch, sp.seed, sp.codebook))
    elif axis == "eps":
        ch_new = ch
        sp_new = (replace(sp, eps=float(value)) if sp.mode is Mode.CUSTOM else
                  SchemeParams.paper_exact(sp.n, sp.M, sp.B, float(value), ch, sp.seed, sp.codebook))
    elif axis in ("p1", "p2"):
        ch_new = replace(ch, **{axis: float(value)})
        if sp.mode is Mode.CUSTOM:
            key = f"{axis}n"
            sp_new = replace(sp, **{key: getattr(sp, key) * float(value) / getattr(ch, axis)})
        else:
            sp_new = SchemeParams.paper_exact(sp.n, sp.M, sp.B, sp.eps, ch_new, sp.seed, sp.codebook)
    else:
        raise DomainError(f"axis must be one of {SWEEP_AXES}")
    return replace(base, scheme=sp_new, ch=ch_new, output_path=None)


def sweep(axis: str, grid, base_cfg: ExperimentConfig) -> str:
    """CSV table with one simulated summary and matching bound columns per grid point.

    Every grid point is validated before any simulation runs.
    """
    grid = list(grid)
    if not grid:
        raise DomainError("grid must be non-empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise DomainError("grid must be sorted")
    configs = [_point_config(axis, v, base_cfg) for v in grid]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for v, cfg in zip(grid, configs):
        s = run_experiment(cfg)
        sp = cfg.scheme
        ach = achievable_log_m_exact(sp.n, sp.eps, cfg.ch) if sp.n >= 2 else None
        conv = converse_log_m(max((sp.L + 1) * sp.n, 4), sp.eps, cfg.ch)
        w.writerow([axis, repr(v), s.trials, repr(s.error_rate.value), repr(s.error_rate.half_width),
                    repr(s.erased_rate.value), repr(s.erased_rate.half_width),
                    repr(s.mean_power_src.value), repr(s.mean_power_src.half_width),
                    repr(s.mean_power_relay.value), repr(s.mean_power_relay.half_width),
                    repr(s.rho_hat), repr(eps_capacity(cfg.ch, sp.eps).rate),
                    "" if ach is None else repr(ach), repr(conv),
                    repr(s.converse_diagnostic), repr(s.log_m_used)])
    return buf.getvalue()


# ---- bounds table ----------------------------------------------------------

BOUNDS_COLUMNS = ["n", "feasible", "log_B", "log_M", "L", "achievable_log_m", "converse_log_m",
                  "theta_lower", "theta_upper"]


def bounds_csv(ch: ChannelParams, eps: float, n_grid) -> str:
    """Bound table; the log-size columns are at ``n``, the bound columns at ``(L+1) n``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BOUNDS_COLUMNS)
    for n in n_grid:
        r = bound_report(int(n), eps, ch)
        w.writerow([r.n_or_m, int(r.feasible), repr(r.sizes.log_B), repr(r.sizes.log_M), r.sizes.L,
                    "" if r.achievable_log_m is None else repr(r.achievable_log_m),
                    repr(r.converse_log_m), repr(r.theta_lower), repr(r.theta_upper)])
    return buf.getvalue()


# ---- verification probes ---------------------------------------------------

VERIFY_SUITES = ("packing", "bht", "mgf", "inequality")


def _verify_packing(rng: RngStream) -> list[dict]:
    out = []
    ch = ChannelParams(1.0, 1.0, 1.0, 1.0)
    for n in (16, 64):
        x = ht.snr_for_exponent(n, math.log(100.0))
        cvar = 1.0 - n ** -0.25
        params = SchemeParams.custom(n, 2, 2, 2, ch, alpha=1.0, p1n=x / cvar, p2n=1.0)
        mom = params.moments(ch).relay
        m = int(round(0.5 * math.exp(n * mom.mean - math.sqrt(n ** 1.5 * mom.var)))) + 1
        r = ht.packing_probe(n, m, "relay", params, ch, 2000, rng.spawn("packing", n))
        ok = (r.p_miss <= r.bound_miss + 4 * r.se_miss
              and r.p_confuse <= r.bound_confuse + 4 * r.se_confuse)
        out.append({"probe": f"packing_relay_n{n}", "pass": bool(ok), "p_miss": r.p_miss,
                    "bound_miss": r.bound_miss, "se_miss": r.se_miss, "p_confuse": r.p_confuse,
                    "bound_confuse": r.bound_confuse, "se_confuse": r.se_confuse,
                    "m_codewords": m, "trials": r.trials})
    return out


def _verify_bht(rng: RngStream) -> list[dict]:
    gen = np.random.Generator(np.random.Philox(key=[rng.seed, rng.spawn("bht").stream_id]))
    lb_ok = msg_ok = True
    for _ in range(100):
        k = int(gen.integers(2, 7))
        p, q = gen.dirichlet(np.ones(k)), gen.dirichlet(np.ones(k))
        delta, xi = float(gen.uniform()), float(gen.uniform(0.1, 5.0))
        lb_ok &= ht.beta_lower_bound(delta, xi, p, q) <= ht.beta_discrete(delta, p, q) + 1e-12
        w = int(gen.integers(2, 6))
        rows = gen.dirichlet(np.ones(w), size=w) / w
        msg_ok &= ht.message_beta_check(ht.DiscreteJoint(rows), gen.dirichlet(np.ones(w))).holds
    eq = ht.message_beta_check(ht.DiscreteJoint(np.eye(2) / 2), [0.5, 0.5])
    g = ht.beta_gaussian_shift(0.5, 1.0)
    return [
        {"probe": "lower_bound_below_beta", "pass": bool(lb_ok), "instances": 100},
        {"probe": "message_beta_random_joints", "pass": bool(msg_ok), "instances": 100},
        {"probe": "message_beta_equality", "pass": eq.beta == 0.5, "beta": eq.beta, "bound": eq.bound},
        {"probe": "gaussian_shift", "pass": abs(g - 0.15865525393145707) < 1e-12, "beta": g},
    ]


def _verify_mgf(rng: RngStream) -> list[dict]:
    out = []
    for n in (1, 4, 8):
        for t in (0.05, 0.1, 0.2):
            for proc in ("iid", "echo", "zero"):
                spec = ht.MgfSpec(n, t, 1.0, proc)
                r = ht.mgf_identity(spec, 100_000, rng.spawn("mgf", n, t, proc))
                out.append({"probe": f"mgf_n{n}_t{t}_{proc}", "pass": bool(abs(r.z_score) <= 3.0),
                            "mc_estimate": r.mc_estimate, "closed_form": r.closed_form,
                            "std_err": r.std_err, "unstable": bool(r.unstable)})
    return out


def _verify_inequality(rng: RngStream) -> list[dict]:
    u = rng.spawn("inequality").uniforms(20_000).reshape(2, -1)
    a = 10.0 ** (6.0 * u[0] - 3.0)
    m = 10.0 ** (6.0 * u[1] - 3.0)
    fails = sum(not ht.exp_inequality(float(x), float(y)) for x, y in zip(a, m))
    return [{"probe": "exp_inequality_grid", "pass": fails == 0, "pairs": int(a.size),
             "failures": fails}]


def verify_suite(suite: str, seed: int = 0) -> dict:
    """Run probe suites and return a JSON-ready report with one entry per probe."""
    names = VERIFY_SUITES if suite == "all" else (suite,)
    runners = {"packing": _verify_packing, "bht": _verify_bht, "mgf": _verify_mgf,
               "inequality": _verify_inequality}
    report = {}
    for name in names:
        if name not in runners:
            raise DomainError(f"unknown suite {name!r}")
        report[name] = runners[name](RngStream(seed).spawn(name))
    report["pass"] = bool(all(p["pass"] for name in names for p in report[name]))
    return report
