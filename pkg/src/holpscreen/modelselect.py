"""Second-stage refinement on screened submodels.

A screened submodel is refined either by an L1 path tuned with the
extended BIC, or by a plain least-squares refit; ``run_pipeline`` composes
screening, submodel selection and refinement end to end.  EBIC is
log(RSS/n) + (d/n)(log n + 2 log p) with p the ambient dimension, so the
penalty stays honest after screening.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import screeners
from .exceptions import (
    ConvergenceError,
    DegeneracyWarning,
    PipelineStageError,
    RankDeficientError,
    SaturatedFitError,
)
from .screeners import ScreeningScores, SubmodelSelection, Threshold, TopD

__all__ = [
    "FitResult",
    "PipelineSpec",
    "EbicSized",
    "ebic",
    "lasso_path",
    "make_lambda_grid",
    "ols_refit",
    "ebic_size",
    "run_pipeline",
]


@dataclass(frozen=True)
class EbicSized:
    """Pick the screened-submodel size by minimizing EBIC over 1..dmax."""

    dmax: int


@dataclass
class FitResult:
    """A fitted (sub)model: support indices, aligned coefficients, intercept.

    ``support`` indexes the predictor columns of whatever matrix produced
    the fit; ``run_pipeline`` re-indexes it to the original p columns.
    ``rss`` is None for screening-only results, and ``lam`` is 0 for
    unpenalized fits.
    """

    support: np.ndarray
    coefficients: np.ndarray
    intercept: float
    rss: float | None
    lam: float = 0.0

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.intp)
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        # Screening-only results carry a support but no coefficients.
        if self.coefficients.size and self.support.shape != self.coefficients.shape:
            raise ValueError("coefficients must align with the support")


@dataclass(frozen=True)
class PipelineSpec:
    """Screen -> submodel -> refine recipe.

    screener: one of ``holp``, ``ridge_holp``, ``divide_holp``, ``sis``,
    ``rrcs``, ``forward_regression`` or ``null`` (empty support baseline).
    refiner: ``none``, ``lasso_ebic`` or ``ols``.  A Threshold rule is
    screening-only, so it requires the ``none`` refiner.
    """

    screener: str
    rule: TopD | EbicSized | Threshold
    refiner: str = "none"
    screener_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.screener not in {
            "holp",
            "ridge_holp",
            "divide_holp",
            "sis",
            "rrcs",
            "forward_regression",
            "null",
        }:
            raise ValueError(f"unknown screener {self.screener!r}")
        if self.refiner not in {"none", "lasso_ebic", "ols"}:
            raise ValueError(f"unknown refiner {self.refiner!r}")
        if not isinstance(self.rule, (TopD, EbicSized, Threshold)):
            raise ValueError("rule must be TopD, EbicSized or Threshold")
        if isinstance(self.rule, Threshold) and self.refiner != "none":
            raise ValueError("threshold selection is screening-only (refiner none)")
        if self.screener == "forward_regression" and isinstance(self.rule, Threshold):
            raise ValueError("forward regression needs a size-based rule")


def ebic(rss: float, n: int, p: int, d: int) -> float:
    """Extended BIC of a fit with d predictors: log(RSS/n) + (d/n)(log n + 2 log p)."""
    if n < 1 or p < 1 or d < 0:
        raise ValueError("need n >= 1, p >= 1, d >= 0")
    if rss < 0:
        raise ValueError(f"negative RSS {rss}")
    if rss == 0:
        raise SaturatedFitError(
            "RSS is zero (interpolating fit); EBIC is undefined"
        )
    return math.log(rss / n) + (d / n) * (math.log(n) + 2.0 * math.log(p))


@njit(cache=True, nogil=True)
def _cd_sweep(b, g, c, gram, lam, idx):  # pragma: no cover - jitted
    """One cyclic coordinate-descent sweep over idx.

    b: coefficients, g: gram @ b (updated in place), c: X'y/n.  Columns are
    standardized so every diagonal of gram is 1.  Returns max |change|.
    """
    dmax = 0.0
    for t in range(idx.shape[0]):
        j = idx[t]
        bj = b[j]
        rho = c[j] - g[j] + bj
        if rho > lam:
            bn = rho - lam
        elif rho < -lam:
            bn = rho + lam
        else:
            bn = 0.0
        if bn != bj:
            diff = bn - bj
            for i in range(g.shape[0]):
                g[i] += diff * gram[i, j]
            b[j] = bn
            if abs(diff) > dmax:
                dmax = abs(diff)
    return dmax


def make_lambda_grid(x, y, n_points: int = 100, min_ratio: float = 0.001) -> np.ndarray:
    """Log-spaced penalty grid from lambda_max down to min_ratio * lambda_max."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.shape[0]
    sd = x.std(axis=0)
    sd = np.where(sd == 0, 1.0, sd)
    xs = (x - x.mean(axis=0)) / sd
    lam_max = float(np.max(np.abs(xs.T @ (y - y.mean())))) / n
    if lam_max <= 0:
        lam_max = 1.0  # response orthogonal to every column; grid is arbitrary
    return np.geomspace(lam_max, min_ratio * lam_max, n_points)


def lasso_path(x, y, lambdas, tol: float = 1e-7, max_sweeps: int = 100_000) -> list[FitResult]:
    """L1 path by cyclic coordinate descent with warm starts.

    Columns are standardized internally (zero-variance columns are frozen
    at zero with a warning); reported coefficients are on the original
    scale.  The objective is (1/2n)||y - b0 - X b||^2 + lambda ||b||_1.
    Convergence at each path point means the largest single-coordinate
    change in a sweep fell below ``tol``; active-set sweeps run between
    full sweeps in the usual way.

    Raises
    ------
    ConvergenceError
        If some path point exceeds ``max_sweeps`` sweeps; the message
        carries the lambda index.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise ValueError("lambdas must be a non-empty 1-D sequence")
    if np.any(lambdas <= 0) or np.any(np.diff(lambdas) >= 0):
        raise ValueError("lambdas must be positive and strictly descending")
    n, d = x.shape
    if y.shape[0] != n:
        raise ValueError("response length does not match the design")

    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    dead = sd == 0
    if np.any(dead):
        warnings.warn(
            f"{int(dead.sum())} zero-variance column(s) held at zero",
            DegeneracyWarning,
            stacklevel=2,
        )
        sd = np.where(dead, 1.0, sd)
    xs = (x - mu) / sd
    ybar = y.mean()
    yc = y - ybar

    gram = xs.T @ xs / n
    c = xs.T @ yc / n
    live = np.flatnonzero(~dead).astype(np.intp)
    b = np.zeros(d)
    results = []
    for li, lam in enumerate(lambdas):
        g = gram @ b  # refresh to cancel incremental drift between points
        sweeps = 0
        while True:
            delta = _cd_sweep(b, g, c, gram, lam, live)
            sweeps += 1
            if delta < tol:
                break
            active = np.flatnonzero(b).astype(np.intp)
            while sweeps < max_sweeps and active.size:
                if _cd_sweep(b, g, c, gram, lam, active) < tol:
                    break
                sweeps += 1
            if sweeps >= max_sweeps:
                raise ConvergenceError(
                    f"coordinate descent exceeded {max_sweeps} sweeps at "
                    f"lambda index {li} (lambda={lam:.6g})",
                    iterations=sweeps,
                )
        resid = yc - xs @ b
        act = np.flatnonzero(b)
        coef = b[act] / sd[act]
        intercept = float(ybar - mu[act] @ coef)
        results.append(
            FitResult(
                support=act,
                coefficients=coef,
                intercept=intercept,
                rss=float(resid @ resid),
                lam=float(lam),
            )
        )
    return results


def ols_refit(x, y, support) -> FitResult:
    """Exact least squares with intercept on the selected columns.

    Raises RankDeficientError naming a dependent column when the selected
    submatrix is not of full column rank.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    support = np.asarray(support, dtype=np.intp)
    n = x.shape[0]
    if support.size >= n:
        raise ValueError(
            f"support size {support.size} leaves no degrees of freedom for n={n}"
        )
    if support.size == 0:
        ybar = float(y.mean())
        return FitResult(
            support=support,
            coefficients=np.empty(0),
            intercept=ybar,
            rss=float(((y - ybar) ** 2).sum()),
        )
    design = np.column_stack([np.ones(n), x[:, support]])
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    tol = max(design.shape) * np.finfo(np.float64).eps * (diag.max() or 1.0)
    small = np.flatnonzero(diag <= tol)
    if small.size:
        col = int(support[small[0] - 1]) if small[0] > 0 else None
        raise RankDeficientError(
            f"selected columns are collinear (column {col} is dependent "
            "on the earlier ones)",
            column=col,
        )
    coefs = np.linalg.solve(r, q.T @ y)
    resid = y - design @ coefs
    return FitResult(
        support=support,
        coefficients=coefs[1:],
        intercept=float(coefs[0]),
        rss=float(resid @ resid),
    )


def ebic_size(scores: ScreeningScores, x, y, dmax: int) -> SubmodelSelection:
    """EBIC-minimizing prefix of the score ranking.

    Refits the top-k predictors by OLS for k = 1..dmax and keeps the k
    with the smallest EBIC (ties to the smaller k).  Rank-deficient
    prefixes are skipped with a warning; a zero-RSS prefix scores -inf
    (an interpolating fit is never beaten by larger models).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = x.shape
    if not 1 <= dmax <= n - 2:
        raise ValueError(f"dmax={dmax} outside 1..n-2={n - 2}")
    ranking = screeners.rank_select(scores, min(dmax, p)).indices
    if ranking.size == 0:
        raise ValueError("no positive scores to rank")
    best_k, best_val = None, math.inf
    for k in range(1, len(ranking) + 1):
        try:
            fit = ols_refit(x, y, ranking[:k])
        except RankDeficientError:
            warnings.warn(
                f"top-{k} prefix is rank deficient; skipped",
                DegeneracyWarning,
                stacklevel=2,
            )
            continue
        try:
            val = ebic(fit.rss, n, p, k)
        except SaturatedFitError:
            val = -math.inf
        if val < best_val:
            best_k, best_val = k, val
    if best_k is None:
        raise RankDeficientError("every candidate prefix was rank deficient")
    return SubmodelSelection(indices=ranking[:best_k], rule=TopD(best_k))


def _screen(x, y, spec: PipelineSpec, d_hint: int) -> ScreeningScores | SubmodelSelection:
    params = dict(spec.screener_params)
    if spec.screener == "holp":
        return screeners.holp_scores(x, y, **params)
    if spec.screener == "ridge_holp":
        return screeners.ridge_holp_scores(x, y, r=params.get("ridge", 10.0))
    if spec.screener == "sis":
        return screeners.sis_scores(x, y)
    if spec.screener == "rrcs":
        return screeners.rrcs_scores(x, y)
    if spec.screener == "forward_regression":
        return screeners.forward_regression_rank(x, y, d_hint)
    if spec.screener == "divide_holp":
        if not isinstance(spec.rule, TopD):
            raise ValueError("divide_holp needs a TopD rule")
        return screeners.divide_holp_scores(
            x,
            y,
            m=params.get("partitions", 2),
            d=spec.rule.d,
            seed=params.get("seed", 0),
        )
    if spec.screener == "null":
        return SubmodelSelection(indices=np.empty(0, dtype=np.intp), rule=TopD(0))
    raise ValueError(f"unknown screener {spec.screener!r}")  # pragma: no cover


def run_pipeline(x, y, spec: PipelineSpec) -> FitResult:
    """Screen, select a submodel, refine; errors are tagged by stage.

    The final support always satisfies support <= screened submodel; a
    predictor dropped at screening cannot reappear.  For the L1 refiner
    the path point minimizing EBIC (with d = active-set size and the
    ambient p) wins, and coefficients are re-indexed to the original
    columns.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    n, p = x.shape
    if isinstance(spec.rule, TopD):
        d_hint = spec.rule.d
    elif isinstance(spec.rule, EbicSized):
        d_hint = spec.rule.dmax
    else:
        d_hint = 0

    try:
        screened = _screen(x, y, spec, d_hint)
    except Exception as exc:
        raise PipelineStageError("screening", exc) from exc

    try:
        if isinstance(screened, SubmodelSelection):
            selection = screened
        elif isinstance(spec.rule, TopD):
            selection = screeners.rank_select(screened, spec.rule.d)
        elif isinstance(spec.rule, Threshold):
            selection = screeners.threshold_select(screened, spec.rule.gamma)
        else:
            selection = ebic_size(screened, x, y, spec.rule.dmax)
    except Exception as exc:
        raise PipelineStageError("submodel selection", exc) from exc

    sel = selection.indices
    try:
        if spec.refiner == "none":
            return FitResult(
                support=sel, coefficients=np.empty(0), intercept=0.0, rss=None
            )
        if spec.refiner == "ols":
            fit = ols_refit(x, y, sel)
            return fit
        # lasso_ebic
        if sel.size == 0:
            fit = ols_refit(x, y, sel)
            return fit
        grid = make_lambda_grid(x[:, sel], y)
        path = lasso_path(x[:, sel], y, grid)
        best, best_val = None, math.inf
        for point in path:
            try:
                val = ebic(point.rss, n, p, point.support.size)
            except SaturatedFitError:
                val = -math.inf
            if val < best_val:
                best, best_val = point, val
        return FitResult(
            support=sel[best.support],
            coefficients=best.coefficients,
            intercept=best.intercept,
            rss=best.rss,
            lam=best.lam,
        )
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError("refinement", exc) from exc
