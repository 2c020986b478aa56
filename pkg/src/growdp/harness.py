"""Experiment orchestration: stream and workload generation, trial runners, CSV output, DP audits."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .accountant import basic_compose
from .blackbox import ErmProblem, LaplaceRelease, SmallDB
from .core import DatabaseStream, Histogram, LinearQuery, QueryEvent, evaluate
from .noise import NoiseFunction, RandomSource, check_noise_contract
from .pmwg import PMWG, PMWGConfig, theorem_query_budget
from .schedulers import run_ermg, run_fixed, run_improver, schedule_fixed, schedule_improver
from .sparse import NumericSparse, SparseConfig


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def fmt(v) -> str:
    """CSV rendering: 12 significant digits, empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _reject_unknown(section: str, given: dict, allowed: set) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown field(s) in {section}: {', '.join(sorted(unknown))}")


# ---------------------------------------------------------------- streams

STREAM_KEYS = {"kind", "N", "n", "horizon", "probs", "probs_after", "shift_at", "path"}


def _probs(spec: dict, key: str, N: int) -> np.ndarray:
    p = spec.get(key)
    if p is None:
        return np.full(N, 1.0 / N)
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (N,) or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
        raise ConfigError(f"stream.{key} must be a probability vector of length N")
    return p / p.sum()


def generate_stream(spec: dict, rng: RandomSource) -> DatabaseStream:
    """Categorical stream; ``kind="shift"`` switches to ``probs_after`` for arrivals at times >= ``shift_at``."""
    _reject_unknown("stream", spec, STREAM_KEYS)
    kind = spec.get("kind", "iid")
    if kind == "file":
        if "path" not in spec:
            raise ConfigError("stream.path is required for kind=file")
        return DatabaseStream.from_jsonl(spec["path"])
    try:
        N, n, horizon = int(spec["N"]), int(spec["n"]), int(spec.get("horizon", spec["n"]))
    except KeyError as e:
        raise ConfigError(f"stream.{e.args[0]} is required") from None
    if N < 1 or n < 1 or horizon < n:
        raise ConfigError("stream needs N >= 1, n >= 1 and horizon >= n")
    before = _probs(spec, "probs", N)
    gen = rng.generator()
    initial = gen.multinomial(n, before)
    times = np.arange(n + 1, horizon + 1)
    if kind == "iid":
        arrivals = gen.choice(N, size=times.size, p=before)
    elif kind == "shift":
        if "shift_at" not in spec:
            raise ConfigError("stream.shift_at is required for kind=shift")
        after = _probs(spec, "probs_after", N)
        early = gen.choice(N, size=times.size, p=before)
        late = gen.choice(N, size=times.size, p=after)
        arrivals = np.where(times < int(spec["shift_at"]), early, late)
    else:
        raise ConfigError(f"unknown stream kind {kind!r}")
    return DatabaseStream(n, tuple(int(c) for c in initial), tuple(int(a) for a in arrivals))


# ---------------------------------------------------------------- workloads

WORKLOAD_KEYS = {"kind", "per_step", "budget", "kappa", "queries", "class_size", "values"}
WORKLOAD_KINDS = {"random-linear", "counting", "adaptive-distinguisher", "fixed-list", "values"}


def adaptive_distinguisher(x, y) -> LinearQuery:
    """Indicator of the types ``x`` overweights relative to ``y``; maximizes ``f(x) - f(y)``."""
    xw = x.weights if isinstance(x, Histogram) else np.asarray(x, dtype=np.float64)
    yw = y.weights if isinstance(y, Histogram) else np.asarray(y, dtype=np.float64)
    if xw.shape != yw.shape:
        raise ValueError("histograms live on different universes")
    return LinearQuery((xw > yw).astype(np.float64), "distinguisher")


@dataclass
class Workload:
    """Produces the queries asked at each time step."""

    kind: str
    N: int
    rng: RandomSource
    per_step: int = 1
    budget: str | None = None
    kappa: float = 1.0
    queries: list = field(default_factory=list)

    @classmethod
    def from_spec(cls, spec: dict, N: int, rng: RandomSource, class_rng: RandomSource) -> "Workload":
        _reject_unknown("workload", spec, WORKLOAD_KEYS)
        kind = spec.get("kind", "random-linear")
        if kind not in WORKLOAD_KINDS:
            raise ConfigError(f"unknown workload kind {kind!r}")
        per_step = int(spec.get("per_step", 1))
        if per_step < 0:
            raise ConfigError("workload.per_step must be nonnegative")
        budget = spec.get("budget")
        if budget not in (None, "theorem"):
            raise ConfigError("workload.budget must be null or 'theorem'")
        queries = []
        if spec.get("queries") is not None:
            queries = [LinearQuery(np.asarray(q, dtype=np.float64), f"q{k}") for k, q in enumerate(spec["queries"])]
            if any(q.weights.shape != (N,) for q in queries):
                raise ConfigError("workload.queries must have length N")
        elif spec.get("class_size"):
            # a fixed class shared by every trial, for mechanisms built around a query class
            g = class_rng.generator()
            size = int(spec["class_size"])
            if kind == "counting":
                mats = (g.random((size, N)) < 0.5).astype(np.float64)
            else:
                mats = g.random((size, N))
            queries = [LinearQuery(m, f"q{k}") for k, m in enumerate(mats)]
        if kind == "fixed-list" and not queries:
            raise ConfigError("fixed-list workloads need queries or class_size")
        return cls(kind, N, rng, per_step, budget, float(spec.get("kappa", 1.0)), queries)

    def count(self, t: int, asked: int, config: PMWGConfig | None = None) -> int:
        if self.budget == "theorem":
            if config is None:
                raise ConfigError("a theorem budget needs a PMWG configuration")
            return max(0, int(math.floor(theorem_query_budget(config, t, self.kappa) + 1e-9)) - asked)
        return self.per_step

    def query(self, t: int, j: int, x: Histogram, y=None) -> LinearQuery:
        if self.queries:
            if self.kind == "fixed-list":
                return self.queries[(j - 1) % len(self.queries)]
            u = self.rng.derive(t, j, "pick").uniform()
            return self.queries[int(u * len(self.queries))]
        if self.kind == "adaptive-distinguisher":
            if y is None:
                raise ConfigError("the adaptive distinguisher needs a public histogram")
            return adaptive_distinguisher(x, y)
        u = self.rng.derive(t, j, "query").uniforms(self.N)
        if self.kind == "counting":
            return LinearQuery((u < 0.5).astype(np.float64), f"c{t}.{j}")
        return LinearQuery(u, f"r{t}.{j}")

    def events(self, n: int, horizon: int) -> list[QueryEvent]:
        """Static event list for query-class mechanisms (no dependence on answers)."""
        if not self.queries:
            raise ConfigError("scheduler workloads need a fixed query class (queries or class_size)")
        out = []
        for t in range(n, horizon + 1):
            for j in range(1, self.per_step + 1):
                out.append(QueryEvent(t, j, self.queries[((t - n) * self.per_step + j - 1) % len(self.queries)]))
        return out


# ---------------------------------------------------------------- DP audit

@dataclass(frozen=True)
class AuditBin:
    label: str
    count_a: int
    count_b: int
    ratio: float
    sigma: float
    flagged: bool


@dataclass(frozen=True)
class AuditReport:
    eps: float
    samples: int
    max_ratio: float
    limit: float
    flagged: bool
    bins: tuple

    def rows(self):
        return [(b.label, b.count_a, b.count_b, b.ratio, b.sigma, b.flagged) for b in self.bins]


def _ratio_with_sigma(ca: int, cb: int, na: int, nb: int) -> tuple[float, float]:
    p, q = ca / na, cb / nb
    r = p / q
    # delta method on the log ratio of two independent binomial proportions
    return r, r * math.sqrt((1 - p) / ca + (1 - q) / cb)


def dp_audit(sample_a: Callable, sample_b: Callable, eps: float, rng: RandomSource,
             samples: int = 10**6, bins: int = 20, slack: float = 0.05, min_count: int = 30,
             delta: float = 0.0) -> AuditReport:
    """Monte Carlo check of ``Pr[M(x) in S] <= e^eps Pr[M(x') in S]`` over discretized outputs.

    ``sample_a(rng, size)`` and ``sample_b(rng, size)`` return output arrays
    for the two neighboring inputs. Integer outputs are compared category by
    category; real outputs are split into ``bins`` equal-width bins over the
    pooled central range, with tails folded into the end bins. A bin is
    flagged when its ratio (either direction) exceeds
    ``e^eps (1 + slack) + 3 sigma``. Bins with fewer than ``min_count``
    samples on either side are skipped.
    """
    a = np.asarray(sample_a(rng.derive("audit", "a"), samples))
    b = np.asarray(sample_b(rng.derive("audit", "b"), samples))
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError("audited outputs must be scalar per run")
    if np.issubdtype(a.dtype, np.integer) and np.issubdtype(b.dtype, np.integer):
        cats = np.union1d(np.unique(a), np.unique(b))
        ca = np.array([(a == c).sum() for c in cats])
        cb = np.array([(b == c).sum() for c in cats])
        labels = [str(int(c)) for c in cats]
    elif np.issubdtype(a.dtype, np.floating) or np.issubdtype(b.dtype, np.floating):
        pooled = np.concatenate([a, b]).astype(np.float64)
        lo, hi = np.quantile(pooled, [0.001, 0.999])
        if not hi > lo:
            raise ValueError("outputs are degenerate; nothing to bin")
        edges = np.linspace(lo, hi, bins + 1)
        ia = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, bins - 1)
        ib = np.clip(np.searchsorted(edges, b, side="right") - 1, 0, bins - 1)
        ca = np.bincount(ia, minlength=bins)
        cb = np.bincount(ib, minlength=bins)
        labels = [f"[{edges[k]:.6g},{edges[k + 1]:.6g})" for k in range(bins)]
    else:
        raise ValueError("outputs must be integer or real to be discretized")
    limit = math.exp(eps) * (1 + slack)
    out, max_ratio, any_flag = [], 0.0, False
    for lab, x, y in zip(labels, ca, cb):
        if min(x, y) < min_count:
            out.append(AuditBin(lab, int(x), int(y), float("nan"), float("nan"), False))
            continue
        r1, s1 = _ratio_with_sigma(int(x), int(y), a.size, b.size)
        r2, s2 = _ratio_with_sigma(int(y), int(x), b.size, a.size)
        r, s = (r1, s1) if r1 >= r2 else (r2, s2)
        flag = r > limit + 3 * s
        max_ratio = max(max_ratio, r)
        any_flag |= flag
        out.append(AuditBin(lab, int(x), int(y), r, s, bool(flag)))
    return AuditReport(eps, samples, max_ratio, limit, bool(any_flag), tuple(out))


def laplace_audit_pair(eps: float, noise_factor: float = 1.0):
    """Samplers for one counting query on ``{1,1}`` versus ``{1,2}`` (t = 2) under Laplace release.

    ``noise_factor < 1`` shrinks the noise and breaks privacy (negative control).
    """
    t = 2
    f = np.array([1.0, 0.0])
    xa = Histogram.from_counts([2, 0])
    xb = Histogram.from_counts([1, 1])
    scale = noise_factor / (eps * t)

    def sampler(x):
        truth = evaluate(f, x)
        return lambda rng, size: truth + rng.laplace_array(scale, size)

    return sampler(xa), sampler(xb)


ATG_AUDIT_QUERIES = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def atg_audit_pair(threshold: float = 0.5, xi_value: float = 2.0):
    """Samplers for Above Threshold halt positions on ``{1,1}`` versus ``{1,2}`` at t = 2 with constant noise.

    Output ``k`` in ``{0, 1, 2}`` is the halting query, 3 means no halt.
    The pure-DP loss is ``xi / 2``.
    """
    t = 2
    xa = Histogram.from_counts([2, 0])
    xb = Histogram.from_counts([1, 1])
    q = ATG_AUDIT_QUERIES.shape[0]
    times = np.full(q, t, dtype=np.int64)
    xis = np.full(q, xi_value)

    def sampler(x):
        values = ATG_AUDIT_QUERIES @ x.weights

        def draw(rng, size):
            u_thr = rng.derive("threshold").uniforms((size, q))
            u_q = rng.derive("query").uniforms((size, q))
            return _kernels.atg_halt_batch(values, times, threshold, xis, u_thr, u_q)
        return draw

    return sampler(xa), sampler(xb)


def fit_contract_g(errors_by_n: dict, eps: float, beta: float, p: float, p_beta: float | None = None) -> dict:
    """Smallest ``g`` with ``alpha_hat(n) <= g (1/(eps n))^p ln^p_beta(1/beta)`` at every ``n``.

    ``alpha_hat(n)`` is the empirical ``1 - beta`` quantile of the per-trial worst errors.
    """
    p_beta = p if p_beta is None else p_beta
    per_n = {}
    for n, errs in sorted(errors_by_n.items()):
        a_hat = float(np.quantile(np.asarray(errs, dtype=np.float64), 1 - beta))
        per_n[int(n)] = {"alpha_hat": a_hat,
                         "g_hat": a_hat / ((1 / (eps * n)) ** p * math.log(1 / beta) ** p_beta)}
    return {"per_n": per_n, "g_hat": max(v["g_hat"] for v in per_n.values()) if per_n else 0.0}


# ---------------------------------------------------------------- experiments

COMMON_KEYS = {"algorithm", "seed", "trials", "workers", "noiseless", "stream", "workload"}
ALGORITHM_KEYS = {
    "pmwg": {"alpha", "eps", "delta", "p", "n", "N"},
    "scheduler": {"eps", "delta", "beta", "mechanism"},
    "improver": {"eps", "delta", "beta", "c", "mechanism"},
    "sparse": {"threshold", "xi_c", "xi_p"},
    "ermg": {"eps", "delta", "beta", "c", "grid_size"},
}
CSV_COLUMNS = {
    "pmwg": ["trial", "t", "j", "query_id", "true_answer", "released", "abs_error", "hard_flag", "hard_cum",
             "budget_cap", "eps_ledger"],
    "scheduler": ["trial", "t", "j", "query_id", "true", "released", "abs_error", "epoch", "eps_spent_cum",
                  "alpha_promised"],
    "sparse": ["trial", "t", "j", "answer_kind", "answer", "hard_cum", "eps_report"],
    "ermg": ["trial", "t", "theta", "excess_risk", "eps_t"],
}
CSV_COLUMNS["improver"] = CSV_COLUMNS["scheduler"]


def validate_config(config: dict) -> dict:
    """Check an experiment configuration; returns it with defaults filled in."""
    if not isinstance(config, dict):
        raise ConfigError("configuration must be a JSON object")
    algo = config.get("algorithm")
    if algo not in ALGORITHM_KEYS:
        raise ConfigError(f"algorithm must be one of {sorted(ALGORITHM_KEYS)}")
    _reject_unknown("config", config, COMMON_KEYS | ALGORITHM_KEYS[algo])
    cfg = dict(config)
    cfg.setdefault("seed", 0)
    cfg.setdefault("trials", 1)
    cfg.setdefault("workers", 1)
    cfg.setdefault("noiseless", False)
    cfg.setdefault("workload", {})
    if "stream" not in cfg:
        raise ConfigError("config.stream is required")
    stream = dict(cfg["stream"])
    _reject_unknown("stream", stream, STREAM_KEYS)
    for key in ("n", "N"):
        if key in cfg:
            if key in stream and stream[key] != cfg[key]:
                raise ConfigError(f"config.{key} disagrees with stream.{key}")
            stream[key] = cfg[key]
    cfg["stream"] = stream
    _reject_unknown("workload", cfg["workload"], WORKLOAD_KEYS)
    if int(cfg["trials"]) < 0:
        raise ConfigError("trials must be nonnegative")
    try:
        _build(cfg, probe=True)
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as e:
        raise ConfigError(str(e)) from None
    return cfg


def _stream_dims(cfg: dict) -> tuple[int, int]:
    s = cfg["stream"]
    if s.get("kind") == "file":
        st = DatabaseStream.from_jsonl(s["path"])
        return st.n, st.n_types
    return int(s["n"]), int(s["N"])


def _build(cfg: dict, probe: bool = False):
    """Parameter objects shared by all trials; raises on inconsistent parameters."""
    algo = cfg["algorithm"]
    n, N = _stream_dims(cfg)
    if algo == "pmwg":
        return PMWGConfig(float(cfg["alpha"]), float(cfg["eps"]), n, N, float(cfg.get("delta", 0.0)),
                          cfg.get("p"), bool(cfg["noiseless"]))
    if algo == "sparse":
        xi = NoiseFunction(float(cfg.get("xi_c", 1.0)), float(cfg.get("xi_p", 0.5)))
        return SparseConfig(float(cfg["threshold"]), xi, bool(cfg["noiseless"]))
    if algo == "ermg":
        return ErmProblem.squared_loss_1d(int(cfg.get("grid_size", N)))
    mech_name = cfg.get("mechanism", "laplace")
    wl = Workload.from_spec(cfg["workload"], N, RandomSource(0), RandomSource(int(cfg["seed"])).derive("class"))
    if not wl.queries:
        raise ConfigError("scheduler workloads need a fixed query class (queries or class_size)")
    if mech_name == "laplace":
        mech = LaplaceRelease(wl.queries)
    elif mech_name == "smalldb":
        mech = SmallDB(wl.queries, N)
    else:
        raise ConfigError(f"unknown mechanism {mech_name!r}")
    eps, delta, beta = float(cfg["eps"]), float(cfg.get("delta", 0.0)), float(cfg.get("beta", 0.1))
    if algo == "scheduler":
        return mech, schedule_fixed(eps, delta, beta, n, mech.contract)
    return mech, schedule_improver(eps, delta, beta, n, mech.contract, float(cfg.get("c", 0.1)))


@dataclass
class TrialResult:
    rows: list
    max_abs_error: float = 0.0
    failed: bool = False
    hard_total: int = 0
    eps_ledger: float = 0.0
    budget_violation: bool = False
    invariant_violations: list = field(default_factory=list)


def _trial_rng(cfg: dict, trial: int) -> RandomSource:
    return RandomSource(int(cfg["seed"])).derive(trial)


def _trial_stream(cfg: dict, rng: RandomSource) -> DatabaseStream:
    return generate_stream(cfg["stream"], rng.derive("stream"))


def _run_pmwg_trial(cfg: dict, trial: int) -> TrialResult:
    pc = _build(cfg)
    rng = _trial_rng(cfg, trial)
    stream = _trial_stream(cfg, rng)
    wl = Workload.from_spec(cfg["workload"], pc.N, rng.derive("workload"), RandomSource(int(cfg["seed"])).derive("class"))
    alg = PMWG(pc, rng.derive("pmwg"))
    res = TrialResult([])
    asked = 0
    for t, x in stream.histograms():
        for j in range(1, wl.count(t, asked, pc) + 1):
            f = wl.query(t, j, x, alg.y)
            truth = evaluate(f, x)
            a = alg.answer(t, f, x)
            asked += 1
            err = None if a is None else abs(a - truth)
            hard = alg.transcript[-1].hard
            res.rows.append((trial, t, j, f.id, truth, a, err, hard, alg.hard_total, alg.cap, alg.eps_spent()))
            if a is None:
                res.failed = True
                if pc.noiseless:
                    res.invariant_violations.append(f"hard budget exhausted in noiseless mode at t={t}")
                break
            res.max_abs_error = max(res.max_abs_error, err)
            if err > pc.alpha:
                res.failed = True
                if pc.noiseless:
                    res.invariant_violations.append(f"noiseless error {err:.3g} > alpha at t={t}, j={j}")
        if alg.exhausted:
            break
        if asked > theorem_query_budget(pc, t, wl.kappa):
            res.budget_violation = True
    res.hard_total = alg.hard_total
    res.eps_ledger = alg.eps_spent()
    return res


def _run_sparse_trial(cfg: dict, trial: int) -> TrialResult:
    sc = _build(cfg)
    rng = _trial_rng(cfg, trial)
    spec = cfg["workload"]
    nsg = NumericSparse(sc, rng.derive("nsg"))
    res = TrialResult([])
    if spec.get("kind") == "values":
        items = [(int(v["t"]), float(v["value"])) for v in spec.get("values", [])]
    else:
        stream = _trial_stream(cfg, rng)
        check_noise_contract(sc.xi, stream.n, stream.horizon)
        wl = Workload.from_spec(spec, stream.n_types, rng.derive("workload"), RandomSource(int(cfg["seed"])).derive("class"))
        items = [(t, evaluate(wl.query(t, j, x), x)) for t, x in stream.histograms() for j in range(1, wl.per_step + 1)]
    last_t, j = None, 0
    for t, v in items:
        j = j + 1 if t == last_t else 1
        last_t = t
        ans = nsg.step(t, v)
        res.rows.append((trial, t, j, ans.kind.value, ans.value, nsg.hard_total, nsg.privacy_report()))
    res.hard_total = nsg.hard_total
    res.eps_ledger = nsg.privacy_report()
    return res


def _run_scheduler_trial(cfg: dict, trial: int) -> TrialResult:
    mech, schedule = _build(cfg)
    rng = _trial_rng(cfg, trial)
    stream = _trial_stream(cfg, rng)
    wl = Workload.from_spec(cfg["workload"], stream.n_types, rng.derive("workload"),
                            RandomSource(int(cfg["seed"])).derive("class"))
    events = wl.events(stream.n, stream.horizon)
    source = rng.derive("mechanism")
    if cfg["noiseless"]:
        from .noise import NoiselessSource
        source = NoiselessSource()
    runner = run_fixed if cfg["algorithm"] == "scheduler" else run_improver
    out = runner(schedule, mech, stream, events, source)
    res = TrialResult([])
    for r in out.records:
        res.rows.append((trial, r.t, r.j, r.query_id, r.true, r.released, r.abs_error, r.epoch,
                         r.eps_spent_cum, r.alpha_promised))
        res.max_abs_error = max(res.max_abs_error, r.abs_error)
        if r.abs_error > r.alpha_promised:
            res.failed = True
    res.eps_ledger = out.total_eps(schedule.delta)
    if res.eps_ledger > schedule.eps * (1 + 1e-9):
        res.invariant_violations.append(f"privacy ledger {res.eps_ledger:.6g} exceeds eps {schedule.eps}")
    return res


def _run_ermg_trial(cfg: dict, trial: int) -> TrialResult:
    problem = _build(cfg)
    rng = _trial_rng(cfg, trial)
    stream = _trial_stream(cfg, rng)
    if stream.n_types != problem.n_types:
        raise ConfigError("stream.N must equal grid_size for ERM experiments")
    source = rng.derive("ermg")
    if cfg["noiseless"]:
        from .noise import NoiselessSource
        source = NoiselessSource()
    pts = run_ermg(problem, stream, float(cfg["eps"]), float(cfg.get("delta", math.exp(-1))),
                   float(cfg.get("beta", 0.1)), float(cfg.get("c", 0.1)), source)
    res = TrialResult([(trial, p.t, p.theta, p.excess_risk, p.eps_t) for p in pts])
    res.max_abs_error = max((p.excess_risk for p in pts), default=0.0)
    res.eps_ledger = basic_compose([p.eps_t for p in pts]).eps
    return res


TRIAL_RUNNERS = {
    "pmwg": _run_pmwg_trial,
    "sparse": _run_sparse_trial,
    "scheduler": _run_scheduler_trial,
    "improver": _run_scheduler_trial,
    "ermg": _run_ermg_trial,
}


def _run_trial(args) -> TrialResult:
    cfg, trial = args
    return TRIAL_RUNNERS[cfg["algorithm"]](cfg, trial)


@dataclass
class ExperimentResult:
    csv_text: str
    summary: dict
    trials: list


def run_trials(cfg: dict) -> list[TrialResult]:
    jobs = [(cfg, k) for k in range(int(cfg["trials"]))]
    workers = max(1, int(cfg.get("workers", 1)))
    if workers == 1 or len(jobs) <= 1:
        return [_run_trial(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial, jobs))


def render_csv(columns: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def summarize(results: list[TrialResult]) -> dict:
    k = len(results)
    return {
        "trials": k,
        "max_abs_error": max((r.max_abs_error for r in results), default=0.0),
        "failure_fraction_at_alpha": (sum(r.failed for r in results) / k) if k else 0.0,
        "hard_total": sum(r.hard_total for r in results),
        "eps_ledger_total": max((r.eps_ledger for r in results), default=0.0),
        "budget_violations": sum(r.budget_violation for r in results),
        "invariant_violations": sum(len(r.invariant_violations) for r in results),
    }


def run_experiment(config: dict, out: str | Path | None = None) -> ExperimentResult:
    """Run every trial and return (and optionally write) ``results.csv`` and ``summary.json``."""
    cfg = validate_config(config)
    results = run_trials(cfg)
    text = render_csv(CSV_COLUMNS[cfg["algorithm"]], (row for r in results for row in r.rows))
    summary = summarize(results)
    summary["algorithm"] = cfg["algorithm"]
    summary["seed"] = int(cfg["seed"])
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(text)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return ExperimentResult(text, summary, results)
