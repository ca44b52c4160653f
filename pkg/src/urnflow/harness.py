"""Monte Carlo experiments: law of large numbers, CLT and simulator equivalence.

Replicates are processed in fixed-size blocks. Block ``b`` draws from the
stream ``rng(seed, tag, b)`` and results are concatenated in block order, so a
report does not depend on how many worker threads ran the blocks.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import embedding, limits, spectral, streams, urn_sim
from .errors import SampleTooSmall, TooFewSurvivors
from .model import check_assumptions, exact_distribution, load_law, mean_matrix

BLOCK = 500
LLN_TOL_FACTOR = 0.05
LLN_CALIBRATION_N = 10_000
KS_TERMS = 100
MIN_EXPECTED = 5.0

# stream tags for the experiment drivers (distinct from the simulator tags)
LLN_STREAM = 11
CLT_STREAM = 12
EQ_URN_STREAM = 13
EQ_TREE_STREAM = 14


@dataclass
class ExperimentConfig:
    """Inputs of one experiment. ``j0`` and ``j`` are 0-based type indices.

    ``centering`` is ``"full"``, ``"linear"`` or ``None`` (regime default) and
    ``scaling`` may force the log exponent of another regime: ``"below"``
    drops the log factor, ``"boundary"`` uses exponent 1/2.
    """

    law_path: str
    mode: str = "clt"
    j0: int = 0
    j: int = 0
    replicates: int = 200
    n: int = 10_000
    seed: int = 0
    reject_extinct: bool = True
    test: str = "ks"
    alpha: float = 0.01
    centering: str | None = None
    scaling: str | None = None
    lln_tol: float | None = None
    limit_shift: float = 0.0
    equivalence: str = "exact"
    samples_path: str | None = None
    report_path: str | None = None
    record_runtime: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.test not in ("ks", "ad"):
            raise ValueError("test must be 'ks' or 'ad'")
        if self.centering not in (None, "full", "linear"):
            raise ValueError("centering must be 'full' or 'linear'")
        if self.scaling not in (None, "below", "boundary"):
            raise ValueError("scaling must be 'below' or 'boundary'")

    def to_dict(self):
        d = asdict(self)
        # echo types the way the command line takes them
        d["j0"] = self.j0 + 1
        d["j"] = self.j + 1
        return d


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    regime: str
    hypotheses: dict
    survival_fraction: float
    statistic: float
    p_value: float | None
    verdict: str
    samples_path: str | None = None
    runtime_ms: float | None = None
    details: dict = field(default_factory=dict)
    samples: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "regime": self.regime,
            "hypotheses": self.hypotheses,
            "survival_fraction": self.survival_fraction,
            "samples_path": self.samples_path,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "verdict": self.verdict,
            "runtime_ms": self.runtime_ms,
            "details": self.details,
        }

    def to_json(self):
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def write(self, path=None):
        path = path or self.config.report_path
        text = self.to_json()
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


# ------------------------------------------------------------- replicate blocks


def n_threads():
    """Worker count: URNFLOW_THREADS if set, else the CPU count."""
    env = os.environ.get("URNFLOW_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_blocks(fn, R, seed, tag, block=BLOCK, threads=None):
    """Call ``fn(size, rng)`` on consecutive replicate blocks and keep block order."""
    sizes = [min(block, R - s) for s in range(0, R, block)]
    jobs = [(size, streams.rng(seed, tag, b)) for b, size in enumerate(sizes)]
    threads = n_threads() if threads is None else threads
    if threads <= 1 or len(jobs) == 1:
        return [fn(size, g) for size, g in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _load(config):
    law = load_law(config.law_path)
    sd = spectral.decompose(mean_matrix(law))
    if not 0 <= config.j0 < law.J or not 0 <= config.j < law.J:
        raise ValueError(f"type index outside [1, {law.J}]")
    return law, sd


def _finish(report, t0):
    if report.config.record_runtime:
        report.runtime_ms = round((time.perf_counter() - t0) * 1000.0, 3)
    if report.config.report_path:
        report.write()
    return report


# ------------------------------------------------------------------ tests


def ks_pvalue(lam, terms=KS_TERMS):
    """Asymptotic Kolmogorov tail 2 sum_k (-1)^(k-1) exp(-2 k^2 lam^2)."""
    if lam <= 0:
        return 1.0
    k = np.arange(1, terms + 1)
    p = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * lam**2))
    return float(min(1.0, max(0.0, p)))


def ks_test(sample, cdf=stats.norm.cdf):
    """One-sample KS statistic against ``cdf`` (standard normal by default) and its asymptotic p-value."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 20:
        raise SampleTooSmall(f"KS needs at least 20 points, got {n}")
    F = cdf(x)
    i = np.arange(1, n + 1)
    D = float(max((i / n - F).max(), (F - (i - 1) / n).max()))
    return D, ks_pvalue(math.sqrt(n) * D)


def ad_pvalue(z):
    """Asymptotic Anderson-Darling tail P(A^2 > z) (standard polynomial approximation)."""
    if z <= 0:
        return 1.0
    if z < 2:
        cdf = z**-0.5 * math.exp(-1.2337141 / z) * (
            2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z
        )
    else:
        cdf = math.exp(-math.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z))
    return float(min(1.0, max(0.0, 1.0 - cdf)))


def ad_test(sample):
    """Anderson-Darling statistic against the standard normal (fully specified)."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 20:
        raise SampleTooSmall(f"AD needs at least 20 points, got {n}")
    logF = stats.norm.logcdf(x)
    logS = stats.norm.logsf(x[::-1])
    i = np.arange(1, n + 1)
    A2 = float(-n - np.sum((2 * i - 1) * (logF + logS)) / n)
    return A2, ad_pvalue(A2)


def _pool(expected, observed):
    """Merge the two smallest bins until every expected count reaches MIN_EXPECTED."""
    bins = sorted(zip(np.asarray(expected, dtype=float).tolist(), np.asarray(observed, dtype=float).tolist()))
    while len(bins) > 1 and bins[0][0] < MIN_EXPECTED:
        (e1, o1), (e2, o2) = bins[0], bins[1]
        bins = sorted([(e1 + e2, o1 + o2)] + bins[2:])
    e, o = zip(*bins)
    return np.array(e), np.array(o)


def chi_square_gof(samples, dist):
    """Chi-square goodness of fit of sample vectors (R, J) against ``[(B, p), ...]``.

    Returns ``(statistic, p_value, dof)``. A sample outside the support gives p = 0.
    """
    support = {tuple(int(t) for t in B): float(p) for B, p in dist}
    keys, counts = np.unique(np.asarray(samples, dtype=np.int64), axis=0, return_counts=True)
    R = int(counts.sum())
    seen = {tuple(int(t) for t in k): int(c) for k, c in zip(keys, counts)}
    if any(k not in support for k in seen):
        return math.inf, 0.0, len(support) - 1
    if len(support) == 1:
        return 0.0, 1.0, 0
    names = sorted(support)
    exp_ = np.array([support[k] * R for k in names])
    obs = np.array([seen.get(k, 0) for k in names])
    e, o = _pool(exp_, obs)
    if e.size < 2:
        return 0.0, 1.0, 0
    stat = float(np.sum((o - e) ** 2 / e))
    dof = e.size - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


def chi_square_two_sample(a, b):
    """Chi-square homogeneity test between two samples of vectors; rare categories are pooled."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    allv = np.concatenate([a, b])
    keys, inv = np.unique(allv, axis=0, return_inverse=True)
    inv = inv.ravel()
    ca = np.bincount(inv[: len(a)], minlength=len(keys)).astype(float)
    cb = np.bincount(inv[len(a):], minlength=len(keys)).astype(float)
    tot = ca + cb
    frac = len(a) / (len(a) + len(b))
    rare = tot * min(frac, 1 - frac) < MIN_EXPECTED
    if rare.any():
        ca = np.concatenate([ca[~rare], [ca[rare].sum()]])
        cb = np.concatenate([cb[~rare], [cb[rare].sum()]])
        keep = (ca + cb) > 0
        ca, cb = ca[keep], cb[keep]
    if ca.size < 2:
        return 0.0, 1.0, 0
    stat, p, dof, _ = stats.chi2_contingency(np.vstack([ca, cb]), correction=False)
    return float(stat), float(p), int(dof)


# ------------------------------------------------------------------ drivers


def _regime_block(sd, law, j):
    rep = limits.regime(sd, law, j)
    return spectral.REGIME_NAMES.get(rep.case, rep.case), rep.hypotheses


def lln_tolerance(rho, n):
    m = LLN_CALIBRATION_N
    c = LLN_TOL_FACTOR * rho * math.sqrt(m) / (1 + math.log(m))
    return c * (1 + math.log(n)) / math.sqrt(n)


def run_lln(config):
    """Median over surviving replicates of max_j |B_j(n)/n - rho u_j|.

    The verdict compares it with ``config.lln_tol``, by default
    c (1 + log n) / sqrt(n) with c chosen so the threshold is 0.05 rho at
    n = 10^4. ``limit_shift`` moves the candidate limit (a negative control).
    """
    t0 = time.perf_counter()
    law, sd = _load(config)
    rep = check_assumptions(law)
    if not (rep.gw1 and rep.gw2):
        raise ValueError("law must be supercritical and positively regular")
    n = config.n

    def block(size, g):
        ds = embedding.deep_sample(law, config.j0, n, size, g, depth=0)
        # a tree that dies out before n draws never reaches the n-th count
        return ds.B, ds.gen >= 0

    parts = run_blocks(block, config.replicates, config.seed, LLN_STREAM)
    B = np.concatenate([p[0] for p in parts])
    surv = np.concatenate([p[1] for p in parts])
    frac = float(surv.mean())
    if config.reject_extinct and surv.sum() < 0.5 * config.replicates:
        raise TooFewSurvivors(f"only {int(surv.sum())} of {config.replicates} replicates survived")
    lim = limits.lln_limit(sd) + config.limit_shift
    dev = np.abs(B[surv] / n - lim).max(axis=1)
    med = float(np.median(dev))
    tol = config.lln_tol if config.lln_tol is not None else lln_tolerance(sd.rho, n)
    reg, hyp = _regime_block(sd, law, config.j)
    report = ExperimentReport(
        config,
        reg,
        hyp,
        frac,
        med,
        None,
        "pass" if med < tol else "reject",
        details={"tolerance": tol, "limit": list(lim), "n_survivors": int(surv.sum())},
        samples={"deviation": dev, "B": B[surv]},
    )
    return _finish(report, t0)


def default_centering(case):
    return "linear" if case == "case_iii_below" else "full"


def clt_samples(law, sd, j0, j, n, R, seed, centering, log_exponent=None, threads=None):
    """Per-replicate (W_hat, tau_n, B_j(n), standardized value, survived).

    The observed count excludes the initial ball, matching the tree count
    Z^j(tau_n). ``log_exponent`` overrides the exponent of log_rho n in the
    scale (used for cross-scaled controls).
    """
    prof = limits.variance_profile(sd, law, j)
    sf = limits.scaling_functions(sd, prof)
    ex = prof.ell_star.log_exponent if log_exponent is None else log_exponent
    Z0 = np.eye(sd.dim)[j0]
    lin = sd.rho * sd.u[j] * n

    def block(size, g):
        ds = embedding.deep_sample(law, j0, n, size, g)
        W, W1, _ = limits.martingale_estimates(sd, ds.Z_final, ds.depth)
        Bj = ds.B[:, j] - (1 if j == j0 else 0)
        ok = ds.survived & (W > 0)
        Wp = np.where(ok, W, 1.0)
        if centering == "full":
            c = limits.full_centering(sd, j, n, np.where(ok[:, None], W1, 1.0), Z0)
        else:
            c = np.full(size, lin)
        scale = math.sqrt(n) * (math.log(n) / math.log(sd.rho)) ** ex * sf.Uppsi(limits.T_n(sd.rho, n, Wp))
        z = np.where(ok, (Bj - c) / scale, np.nan)
        return W, ds.tau, ds.B[:, j], z, ok

    parts = run_blocks(block, R, seed, CLT_STREAM, threads=threads)
    cols = [np.concatenate([p[k] for p in parts]) for k in range(5)]
    return cols, prof


def write_samples_csv(path, W, tau, Bj, z):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "W_hat", "tau_n", "B_j", "standardized"])
        for r in range(len(W)):
            zz = "" if not np.isfinite(z[r]) else f"{z[r]:.12g}"
            w.writerow([r, f"{W[r]:.12g}", f"{tau[r]:.12g}", int(Bj[r]), zz])


def run_clt(config):
    """Standardize B_j(n) and test the sample against N(0, 1)."""
    t0 = time.perf_counter()
    law, sd = _load(config)
    case = spectral.regime_of(sd)
    centering = config.centering or default_centering(case)
    ex = {None: None, "below": 0.0, "boundary": 0.5}[config.scaling]
    (W, tau, Bj, z, ok), prof = clt_samples(
        law, sd, config.j0, config.j, config.n, config.replicates, config.seed, centering, ex
    )
    frac = float(ok.mean())
    if config.reject_extinct and ok.sum() < 0.5 * config.replicates:
        raise TooFewSurvivors(f"only {int(ok.sum())} of {config.replicates} replicates survived")
    zs = z[ok]
    stat, p = ks_test(zs) if config.test == "ks" else ad_test(zs)
    if config.samples_path:
        write_samples_csv(config.samples_path, W, tau, Bj, z)
    reg, hyp = _regime_block(sd, law, config.j)
    _, diag = limits.sigma_sq(sd, law, limits.centered_spec(sd, config.j), diagnostics=True)
    report = ExperimentReport(
        config,
        reg,
        hyp,
        frac,
        stat,
        p,
        "pass" if p >= config.alpha else "reject",
        samples_path=config.samples_path,
        details={
            "centering": centering,
            "ell_star": float(prof.ell_star),
            "log_exponent": prof.ell_star.log_exponent if ex is None else ex,
            "mean": float(zs.mean()),
            "sd": float(zs.std(ddof=1)),
            "series": diag.to_dict(),
        },
        samples={"standardized": zs},
    )
    return _finish(report, t0)


def equivalence_samples(law, j0, k, R, seed, threads=None):
    """B(k) from the urn simulator and from the marked tree, independent streams."""

    def urn_block(size, g):
        B, _ = urn_sim.simulate_batch(law, j0, [k], size, g)
        return B[0]

    def tree_block(size, g):
        return embedding.embedding_batch(law, j0, k, size, g)[0]

    a = np.concatenate(run_blocks(urn_block, R, seed, EQ_URN_STREAM, threads=threads))
    b = np.concatenate(run_blocks(tree_block, R, seed, EQ_TREE_STREAM, threads=threads))
    return a, b


def run_equivalence(config):
    """Urn simulator and tree embedding against the exact law (or each other).

    Exact mode passes when neither chi-square test rejects; the reported
    p-value is the smaller of the two.
    """
    t0 = time.perf_counter()
    law, sd = _load(config)
    k = config.n
    urn, tree = equivalence_samples(law, config.j0, k, config.replicates, config.seed)
    details = {}
    if config.equivalence == "exact":
        dist = exact_distribution(law, config.j0, k)
        s1, p1, d1 = chi_square_gof(urn, dist)
        s2, p2, d2 = chi_square_gof(tree, dist)
        details = {
            "urn": {"statistic": s1, "p_value": p1, "dof": d1},
            "embedding": {"statistic": s2, "p_value": p2, "dof": d2},
            "support_size": len(dist),
        }
        stat, p = (s1, p1) if p1 <= p2 else (s2, p2)
    else:
        stat, p, dof = chi_square_two_sample(urn, tree)
        details = {"dof": dof}
    reg, hyp = _regime_block(sd, law, config.j)
    report = ExperimentReport(
        config, reg, hyp, 1.0, stat, p, "pass" if p >= config.alpha else "reject", details=details
    )
    return _finish(report, t0)


def golden_table(law=None):
    """Rows (n, B vector, probability) of the exact law of B(n), n = 1..4, for the three-type golden urn."""
    if law is None:
        law = load_law(os.path.join(os.path.dirname(__file__), "laws", "golden.json"))
    rows = []
    for n in range(1, 5):
        for B, p in exact_distribution(law, 0, n):
            rows.append((n, B, p))
    return rows
