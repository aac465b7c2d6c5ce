"""Per-replicate selection metrics and seeded Monte-Carlo experiments.

Replicate streams are pre-split from (scenario seed, replicate index), so
experiments are deterministic regardless of thread count: workers may run
in any order, but aggregation always reduces in replicate order.
"""

from __future__ import annotations

import statistics
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import screeners
from .exceptions import DegeneracyWarning
from .modelselect import FitResult, PipelineSpec, ols_refit, run_pipeline
from .screeners import TopD, rank_select
from .simgen import Family, SimDataset, SimScenario, simulate_dataset

__all__ = [
    "SelectionMetrics",
    "ExperimentReport",
    "CvResult",
    "score_selection",
    "run_experiment",
    "inclusion_probability",
    "separation_probability",
    "timing_run",
    "kfold_cv",
    "dominance_ratio",
]


@dataclass
class SelectionMetrics:
    """Selection quality of one replicate against the known truth."""

    false_negatives: int
    false_positives: int
    covered: bool
    exact: bool
    size: int
    l2_error: float | None
    wall_time_s: float = 0.0


@dataclass
class ExperimentReport:
    """Monte-Carlo aggregate over replicates of one (scenario, method) cell."""

    label: str
    method: str
    scenario: SimScenario
    replicates: int
    inclusion_probability: float
    exact_rate: float
    mean_false_negatives: float
    sd_false_negatives: float
    mean_false_positives: float
    sd_false_positives: float
    mean_size: float
    sd_size: float
    mean_l2_error: float | None
    sd_l2_error: float | None
    separation_probability: float | None = None
    mean_wall_time_s: float = 0.0


@dataclass
class CvResult:
    """K-fold cross-validation summary for one pipeline."""

    mean_mse: float
    sd_mse: float
    median_size: float
    folds_used: int
    fold_mses: list[float]
    fold_sizes: list[int]


def score_selection(selected, fit: FitResult | None, truth: SimDataset) -> SelectionMetrics:
    """False negatives/positives, coverage, exactness, size and l2 error.

    The l2 error compares the fitted coefficients (scattered to length p,
    zero elsewhere) against the true beta; it is omitted when no
    coefficient fit is available (screening-only results).
    """
    p = truth.beta.shape[0]
    sel = np.asarray(selected, dtype=np.intp)
    if sel.size and (sel.min() < 0 or sel.max() >= p):
        raise ValueError("selected indices outside 0..p-1")
    sel_set = set(sel.tolist())
    true_set = set(truth.support.tolist())
    fn = len(true_set - sel_set)
    fp = len(sel_set - true_set)
    covered = fn == 0
    l2 = None
    if fit is not None and fit.coefficients.size == fit.support.size:
        full = np.zeros(p)
        full[fit.support] = fit.coefficients
        l2 = float(np.linalg.norm(full - truth.beta))
    return SelectionMetrics(
        false_negatives=fn,
        false_positives=fp,
        covered=covered,
        exact=covered and fp == 0,
        size=len(sel_set),
        l2_error=l2,
    )


def _sd(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        return 0.0
    return float(np.std(v, ddof=1))


def _map_replicates(fn, replicates: int, threads: int):
    """Run fn(r) for r in range(replicates); failures abort with the index."""
    if threads <= 1:
        out = []
        for r in range(replicates):
            try:
                out.append(fn(r))
            except Exception as exc:
                raise RuntimeError(f"replicate {r} failed: {exc}") from exc
        return out
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, r) for r in range(replicates)]
        out = []
        for r, fut in enumerate(futures):
            try:
                out.append(fut.result())
            except Exception as exc:
                raise RuntimeError(f"replicate {r} failed: {exc}") from exc
        return out


def run_experiment(
    scenario: SimScenario,
    pipeline: PipelineSpec,
    replicates: int,
    *,
    label: str | None = None,
    threads: int = 1,
) -> ExperimentReport:
    """Simulate, run the pipeline and score it, `replicates` times."""
    if replicates < 1:
        raise ValueError("need at least one replicate")

    def one(r: int) -> SelectionMetrics:
        ds = simulate_dataset(scenario, r)
        t0 = time.perf_counter()
        fit = run_pipeline(ds.x, ds.y, pipeline)
        elapsed = time.perf_counter() - t0
        met = score_selection(
            fit.support, fit if pipeline.refiner != "none" else None, ds
        )
        met.wall_time_s = elapsed
        return met

    mets = _map_replicates(one, replicates, threads)
    l2s = [m.l2_error for m in mets if m.l2_error is not None]
    return ExperimentReport(
        label=label or f"{scenario.family.value}-{pipeline.screener}",
        method=pipeline.screener
        + ("" if pipeline.refiner == "none" else f"+{pipeline.refiner}"),
        scenario=scenario,
        replicates=replicates,
        inclusion_probability=float(np.mean([m.covered for m in mets])),
        exact_rate=float(np.mean([m.exact for m in mets])),
        mean_false_negatives=float(np.mean([m.false_negatives for m in mets])),
        sd_false_negatives=_sd([m.false_negatives for m in mets]),
        mean_false_positives=float(np.mean([m.false_positives for m in mets])),
        sd_false_positives=_sd([m.false_positives for m in mets]),
        mean_size=float(np.mean([m.size for m in mets])),
        sd_size=_sd([m.size for m in mets]),
        mean_l2_error=float(np.mean(l2s)) if l2s else None,
        sd_l2_error=_sd(l2s) if l2s else None,
        mean_wall_time_s=float(np.mean([m.wall_time_s for m in mets])),
    )


def inclusion_probability(
    scenario: SimScenario,
    method: str,
    d: int,
    replicates: int,
    *,
    screener_params: dict | None = None,
    threads: int = 1,
    label: str | None = None,
) -> ExperimentReport:
    """Fraction of replicates whose true support survives top-d screening."""
    pipeline = PipelineSpec(
        screener=method,
        rule=TopD(d),
        refiner="none",
        screener_params=screener_params or {},
    )
    return run_experiment(
        scenario, pipeline, replicates, label=label, threads=threads
    )


_SCORE_METHODS = {
    "holp": lambda x, y, p: screeners.holp_scores(x, y, **p),
    "ridge_holp": lambda x, y, p: screeners.ridge_holp_scores(x, y, r=p.get("ridge", 10.0)),
    "sis": lambda x, y, p: screeners.sis_scores(x, y),
    "rrcs": lambda x, y, p: screeners.rrcs_scores(x, y),
}


def separation_probability(
    scenario: SimScenario,
    method: str,
    replicates: int,
    *,
    screener_params: dict | None = None,
    threads: int = 1,
) -> float:
    """Fraction of replicates where every true-support score strictly
    exceeds every off-support score (ties count as failure)."""
    if method not in _SCORE_METHODS:
        raise ValueError(
            f"separation_probability needs a score-based screener, got {method!r}"
        )
    params = screener_params or {}

    def one(r: int) -> bool:
        ds = simulate_dataset(scenario, r)
        if ds.support.size == 0:
            warnings.warn(
                "empty true support; separation defined as 0",
                DegeneracyWarning,
                stacklevel=2,
            )
            return False
        scores = _SCORE_METHODS[method](ds.x, ds.y, params).scores
        mask = np.zeros(scores.shape[0], dtype=bool)
        mask[ds.support] = True
        return bool(scores[mask].min() > scores[~mask].max())

    hits = _map_replicates(one, replicates, threads)
    return float(np.mean(hits))


def _timed_screen(method: str, x, y, d: int, params: dict) -> float:
    t0 = time.perf_counter()
    if method == "divide_holp":
        screeners.divide_holp_scores(
            x, y, m=params.get("partitions", 2), d=d, seed=params.get("seed", 0)
        )
    elif method == "forward_regression":
        scores = screeners.forward_regression_rank(x, y, d)
        rank_select(scores, d)
    else:
        scores = _SCORE_METHODS[method](x, y, params)
        rank_select(scores, d)
    return time.perf_counter() - t0


def timing_run(
    method: str,
    grid,
    *,
    axis: str = "p",
    n: int = 100,
    p: int = 1000,
    d: int = 50,
    rho: float = 0.9,
    r_squared: float = 0.9,
    repeats: int = 5,
    seed: int = 0,
    screener_params: dict | None = None,
) -> list[dict]:
    """Median screening wall-clock over a grid of p (or d) values.

    One warm-up run precedes `repeats` timed runs per grid point; the
    dataset is a compound-symmetry design and data generation is not
    timed.  Returns one {"size", "seconds"} row per grid point.
    """
    if axis not in ("p", "d"):
        raise ValueError("axis must be 'p' or 'd'")
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    params = screener_params or {}
    rows = []
    for g in grid:
        pp = int(g) if axis == "p" else p
        dd = d if axis == "p" else int(g)
        scenario = SimScenario(
            family=Family.COMPOUND_SYMMETRY,
            n=n,
            p=pp,
            r_squared=r_squared,
            rho=rho,
            seed=seed,
        )
        ds = simulate_dataset(scenario, 0)
        _timed_screen(method, ds.x, ds.y, dd, params)  # warm-up
        times = [
            _timed_screen(method, ds.x, ds.y, dd, params) for _ in range(max(repeats, 1))
        ]
        rows.append({"size": int(g), "seconds": float(statistics.median(times))})
    return rows


def kfold_cv(
    x,
    y,
    pipeline: PipelineSpec,
    k: int,
    seed: int = 0,
) -> CvResult:
    """Seeded k-fold cross-validation of a pipeline on a fixed dataset.

    Each fold trains the pipeline on the remaining rows, refits the
    selected support by OLS on the training rows, and scores squared
    prediction error on the held-out rows.  Folds whose fit degenerates
    are skipped with a warning.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.shape[0]
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < 2 * k:
        raise ValueError(f"need n >= 2k rows, got n={n}, k={k}")
    rng = np.random.default_rng(np.random.SeedSequence((int(seed),)))
    folds = np.array_split(rng.permutation(n), k)
    mses, sizes = [], []
    for fi, test_idx in enumerate(folds):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        xtr, ytr = x[train_mask], y[train_mask]
        xte, yte = x[test_idx], y[test_idx]
        try:
            fit = run_pipeline(xtr, ytr, pipeline)
            refit = ols_refit(xtr, ytr, fit.support)
        except Exception as exc:
            warnings.warn(
                f"fold {fi} skipped: {exc}", DegeneracyWarning, stacklevel=2
            )
            continue
        pred = refit.intercept + xte[:, refit.support] @ refit.coefficients
        mses.append(float(np.mean((yte - pred) ** 2)))
        sizes.append(int(fit.support.size))
    if not mses:
        raise RuntimeError("every fold degenerated; no usable folds")
    return CvResult(
        mean_mse=float(np.mean(mses)),
        sd_mse=_sd(mses),
        median_size=float(np.median(sizes)),
        folds_used=len(mses),
        fold_mses=mses,
        fold_sizes=sizes,
    )


def dominance_ratio(m) -> float:
    """mean |diagonal| over mean |off-diagonal| of a square matrix."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValueError(f"need a square matrix of order >= 2, got {m.shape}")
    q = m.shape[0]
    diag_sum = float(np.abs(np.diag(m)).sum())
    off_mean = (float(np.abs(m).sum()) - diag_sum) / (q * (q - 1))
    return (diag_sum / q) / off_mean
