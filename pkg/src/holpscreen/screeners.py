"""Screening estimators and submodel-selection rules.

Every screener maps a design X (n x p) and response y (n,) to a vector of
p non-negative importance scores; selection rules then turn scores into an
ordered submodel.  Screeners operate on the raw inputs unless stated
otherwise, so scores are reproducible functions of (X, y) alone.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateRegimeError,
    DegeneracyWarning,
    NotPositiveDefiniteError,
)
from .numkernel import gram_rows, spd_factor, spd_solve

__all__ = [
    "ScreeningScores",
    "SubmodelSelection",
    "TopD",
    "Threshold",
    "holp_scores",
    "ridge_holp_scores",
    "divide_holp_scores",
    "sis_scores",
    "rrcs_scores",
    "forward_regression_rank",
    "rank_select",
    "threshold_select",
    "projection_submatrix",
]


@dataclass(frozen=True)
class TopD:
    """Keep the d highest-scoring predictors."""

    d: int


@dataclass(frozen=True)
class Threshold:
    """Keep every predictor whose score is at least gamma."""

    gamma: float


@dataclass
class ScreeningScores:
    """Per-predictor absolute importances plus provenance."""

    scores: np.ndarray
    method: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1:
            raise ValueError("scores must be a 1-D vector")
        if not np.all(np.isfinite(self.scores)) or np.any(self.scores < 0):
            raise ValueError("scores must be finite and non-negative")


@dataclass
class SubmodelSelection:
    """Ordered predictor indices (descending score) plus the rule used."""

    indices: np.ndarray
    rule: TopD | Threshold

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.intp)


def _check_xy(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.ndim != 2:
        raise ValueError(f"design must be 2-D, got shape {x.shape}")
    if y.shape[0] != x.shape[0]:
        raise ValueError(
            f"response length {y.shape[0]} does not match {x.shape[0]} rows"
        )
    return x, y


def _projection_coefficients(x, y, ridge=0.0):
    """X.T @ (X X.T + ridge I)^{-1} y via one SPD solve; cost O(n^2 p + n^3)."""
    g = gram_rows(x)
    if ridge:
        g[np.diag_indices_from(g)] += ridge
    w = spd_solve(spd_factor(g), y)
    return x.T @ w


def holp_scores(x, y, *, center: bool = False, ridge_on_center: float = 10.0) -> ScreeningScores:
    """Minimum-norm least-squares projection scores |X.T (X X.T)^{-1} y|.

    Requires p > n so the row Gram matrix is invertible; p <= n raises
    DegenerateRegimeError (use ridge_holp_scores there).  With
    ``center=True`` the columns of X and y are mean-centered first; the
    centered Gram is rank-deficient by construction, so the estimator is
    then the ridge form with parameter ``ridge_on_center``.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    if center:
        xc = x - x.mean(axis=0)
        yc = y - y.mean()
        beta = _projection_coefficients(xc, yc, ridge=ridge_on_center)
        return ScreeningScores(
            np.abs(beta), "holp", {"center": True, "ridge": ridge_on_center}
        )
    if p <= n:
        raise DegenerateRegimeError(
            f"holp_scores requires p > n, got p={p}, n={n}; "
            "use ridge_holp_scores in this regime"
        )
    beta = _projection_coefficients(x, y)
    return ScreeningScores(np.abs(beta), "holp", {"center": False})


def ridge_holp_scores(x, y, r: float = 10.0) -> ScreeningScores:
    """Ridge-regularized projection scores |X.T (X X.T + r I)^{-1} y|.

    Well defined for any aspect ratio, including p <= n.
    """
    if not r > 0:
        raise ValueError(f"ridge parameter must be positive, got {r}")
    x, y = _check_xy(x, y)
    beta = _projection_coefficients(x, y, ridge=float(r))
    return ScreeningScores(np.abs(beta), "ridge_holp", {"ridge": float(r)})


def divide_holp_scores(x, y, m: int, d: int, seed: int = 0) -> SubmodelSelection:
    """Divide-and-combine screening for the p close to n regime.

    Rows are shuffled with a seeded permutation and split into m contiguous
    blocks; the projection screener runs on each block and the top
    ceil(d/m) indices per block are unioned (duplicates collapse, so the
    result may be smaller than d; there is no refill pass).  Returned
    indices are ordered by their best per-block score.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    if m < 1:
        raise ValueError(f"partition count must be >= 1, got {m}")
    if n // m < 10:
        raise ValueError(
            f"blocks of {n}/{m} rows are too small; need at least 10 rows per block"
        )
    if not 1 <= d <= p:
        raise ValueError(f"target size d={d} outside 1..{p}")

    rng = np.random.default_rng(np.random.SeedSequence((int(seed),)))
    perm = rng.permutation(n)
    quota = -(-d // m)  # ceil
    best = {}
    for b, block in enumerate(np.array_split(perm, m)):
        try:
            sc = holp_scores(x[block], y[block])
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(f"block {b}: {exc}", pivot=exc.pivot) from exc
        except DegenerateRegimeError as exc:
            raise DegenerateRegimeError(f"block {b}: {exc}") from exc
        sel = rank_select(sc, min(quota, p))
        for j in sel.indices:
            s = sc.scores[j]
            if s > best.get(j, -1.0):
                best[int(j)] = float(s)
    idx = sorted(best, key=lambda j: (-best[j], j))
    return SubmodelSelection(indices=np.array(idx, dtype=np.intp), rule=TopD(d))


def sis_scores(x, y) -> ScreeningScores:
    """Marginal-correlation scores |X.T y| on standardized columns.

    Columns are centered and scaled to unit sample standard deviation and
    y is centered.  Because the centered response sums to zero, the column
    means drop out of X.T y, so the standardized matrix is never
    materialized and the whole screen is three O(n p) passes.
    Zero-variance columns get a zero score and a DegeneracyWarning.
    """
    x, y = _check_xy(x, y)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least two observations")
    mu = x.mean(axis=0)
    sq = np.einsum("ij,ij->j", x, x)
    var = np.maximum(sq - n * mu * mu, 0.0) / (n - 1)
    dead = (x == x[0]).all(axis=0)
    if np.any(dead):
        warnings.warn(
            f"{int(dead.sum())} zero-variance column(s) scored as 0",
            DegeneracyWarning,
            stacklevel=2,
        )
    sd = np.sqrt(np.where(dead | (var <= 0), 1.0, var))
    scores = np.abs(x.T @ (y - y.mean())) / sd
    scores[dead] = 0.0
    return ScreeningScores(scores, "sis", {})


def _concordant_counts_pairs(x, y):
    """Ordered-pair concordance counts, vectorized over column chunks."""
    n, p = x.shape
    ii, ll = np.nonzero(y[:, None] < y[None, :])
    if ii.size == 0:
        return np.zeros(p, dtype=np.int64)
    counts = np.empty(p, dtype=np.int64)
    chunk = max(1, int(4_000_000 // ii.size))
    for start in range(0, p, chunk):
        cols = slice(start, min(start + chunk, p))
        xc = x[:, cols]
        counts[cols] = np.count_nonzero(xc[ii] < xc[ll], axis=0)
    return counts


def _concordant_count_ordered(xj, y):
    """Exact concordant-pair count for one column in O(n log n)-ish time.

    Scans x-sorted groups and counts, via binary search in the sorted
    prefix of y values, how many earlier observations are strictly below
    each current y.  Ties in x contribute nothing because equal-x groups
    are merged in one batch; ties in y are excluded by the strict search.
    """
    order = np.argsort(xj, kind="stable")
    xs = xj[order]
    ys = y[order]
    n = xs.shape[0]
    total = 0
    prior = np.empty(0)
    i = 0
    while i < n:
        j = i + 1
        while j < n and xs[j] == xs[i]:
            j += 1
        grp = np.sort(ys[i:j])
        if prior.size:
            total += int(np.searchsorted(prior, grp, side="left").sum())
        prior = np.insert(prior, np.searchsorted(prior, grp), grp)
        i = j
    return total


def rrcs_scores(x, y) -> ScreeningScores:
    """Rank-correlation screening scores |omega_j - 1/4|.

    omega_j is the fraction of ordered observation pairs that are strictly
    concordant in (x_j, y); it is 1/2 under perfect concordance and 1/4
    under independence.  Ties count as non-concordant.  Columns are
    processed by a vectorized all-pairs count for n <= 500 and an ordered
    merge count above that.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    if n < 2:
        raise ValueError("need at least two observations")
    if n <= 500:
        counts = _concordant_counts_pairs(x, y)
    else:
        counts = np.array(
            [_concordant_count_ordered(x[:, j], y) for j in range(p)], dtype=np.int64
        )
    omega = counts / (n * (n - 1))
    return ScreeningScores(np.abs(omega - 0.25), "rrcs", {})


def forward_regression_rank(x, y, d: int) -> ScreeningScores:
    """Greedy forward selection scores encoding the pick order.

    At each step the candidate giving the largest residual-sum-of-squares
    reduction joins the model (ties to the lower index); selection is
    maintained through incremental orthogonalization, O(n p) per step.
    The k-th pick scores d - k + 1 and everything unselected scores 0, so
    a top-d rank selection recovers the forward path.  Candidates whose
    RSS reduction falls below 1e-12 (exact collinearity with the current
    set) are skipped; selection stops early when none remain.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    if not 0 <= d <= min(n - 1, p):
        raise ValueError(f"d={d} outside 0..min(n-1, p)={min(n - 1, p)}")
    scores = np.zeros(p)
    if d == 0:
        return ScreeningScores(scores, "forward_regression", {"d": 0})

    work = x.copy()  # columns progressively orthogonalized against picks
    resid = y.copy()
    norms2 = np.einsum("ij,ij->j", work, work)
    available = np.ones(p, dtype=bool)
    for step in range(1, d + 1):
        inner = work.T @ resid
        with np.errstate(divide="ignore", invalid="ignore"):
            reduction = np.where(norms2 > 1e-12, inner**2 / norms2, 0.0)
        reduction[~available] = -1.0
        j = int(np.argmax(reduction))  # argmax takes the first max: low-index ties win
        if reduction[j] < 1e-12:
            break
        q = work[:, j] / np.sqrt(norms2[j])
        coefs = q @ work
        work -= np.outer(q, coefs)
        norms2 = np.maximum(norms2 - coefs**2, 0.0)
        resid = resid - q * (q @ resid)
        available[j] = False
        scores[j] = d - step + 1
    return ScreeningScores(scores, "forward_regression", {"d": d})


def _score_vector(scores) -> np.ndarray:
    if isinstance(scores, ScreeningScores):
        return scores.scores
    return np.asarray(scores, dtype=np.float64)


def rank_select(scores, d: int) -> SubmodelSelection:
    """Indices of the d largest scores, descending, low-index tie-break.

    Zero scores never qualify, so the result has exactly
    min(d, #nonzero scores) entries.
    """
    s = _score_vector(scores)
    p = s.shape[0]
    if not 1 <= d <= p:
        raise ValueError(f"d={d} outside 1..{p}")
    order = np.lexsort((np.arange(p), -s))[:d]
    return SubmodelSelection(indices=order[s[order] > 0], rule=TopD(d))


def threshold_select(scores, gamma: float) -> SubmodelSelection:
    """All indices with score >= gamma, in descending-score order."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    s = _score_vector(scores)
    p = s.shape[0]
    order = np.lexsort((np.arange(p), -s))
    keep = order[s[order] >= gamma]
    return SubmodelSelection(indices=keep, rule=Threshold(gamma))


def projection_submatrix(x, cols) -> np.ndarray:
    """Rows/columns `cols` of the projection X.T (X X.T)^{-1} X.

    Evaluates only the requested submatrix, never the full p x p
    projection; used for diagonal-dominance diagnostics and heatmaps.
    """
    x = np.asarray(x, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.intp)
    sub = x[:, cols]
    w = spd_solve(spd_factor(gram_rows(x)), sub)
    return sub.T @ w
