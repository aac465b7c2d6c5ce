"""Seeded generators for the benchmark's simulation designs.

Seven covariate families are supported; each couples a covariance
construction with a sparse coefficient rule, and the noise variance is
calibrated so the population R-squared var(x'beta)/var(y) hits the
scenario target.  All generators run in O(n p) (or O(n p k) for the
factor family) and never materialize a p x p matrix, so p up to about
1e6 stays cheap.

Reproducibility contract: a (scenario, replicate) pair fully determines
the dataset.  The replicate RNG is ``default_rng(SeedSequence((seed,
replicate)))`` and draws happen in a fixed order (coefficients, design,
noise), so streams for distinct replicates are independent and results do
not depend on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np
from scipy.signal import lfilter

__all__ = [
    "Family",
    "SimScenario",
    "SimDataset",
    "make_beta",
    "draw_design",
    "signal_variance",
    "calibrate_noise",
    "simulate_dataset",
    "replicate_rng",
    "trend_schedule",
]


class Family(str, Enum):
    INDEPENDENT = "independent"
    COMPOUND_SYMMETRY = "compound_symmetry"
    AUTOREGRESSIVE = "autoregressive"
    FACTOR = "factor"
    GROUP = "group"
    EXTREME = "extreme"
    MARGINAL_NULL = "marginal_null"


_NEEDS_RHO = {Family.COMPOUND_SYMMETRY, Family.AUTOREGRESSIVE, Family.MARGINAL_NULL}
# Families whose support is welded to the design construction; the
# support_size override is rejected for them.
_FIXED_SUPPORT = {Family.GROUP, Family.EXTREME, Family.MARGINAL_NULL}

# Value pattern cycled along the support when support_size overrides the
# autoregressive family's classic layout.
_AR_VALUES = (3.0, 1.5, 2.0)


@dataclass(frozen=True)
class SimScenario:
    """Declarative description of one simulation design.

    ``support_size`` widens or narrows the sparse support for the
    sample-size scaling experiments: the family's coefficient pattern is
    laid contiguously on the first ``support_size`` columns.  Without it
    each family keeps its classic support (for the autoregressive family
    that is columns 0, 3, 6 with values 3, 1.5, 2).
    """

    family: Family
    n: int
    p: int
    r_squared: float
    seed: int = 0
    rho: float | None = None
    k: int | None = None
    delta2: float | None = None
    support_size: int | None = None
    freeze_loadings: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 2:
            raise ValueError(f"need n >= 2, got {self.n}")
        if self.p <= self.n:
            raise ValueError(f"scenarios require p > n, got p={self.p}, n={self.n}")
        if not 0.0 < self.r_squared < 1.0:
            raise ValueError(f"r_squared must be in (0, 1), got {self.r_squared}")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")
        if self.family in _NEEDS_RHO:
            if self.rho is None or not 0.0 < self.rho < 1.0:
                raise ValueError(f"family {self.family.value} needs rho in (0, 1)")
        if self.family is Family.FACTOR and (self.k is None or self.k < 1):
            raise ValueError("factor family needs k >= 1")
        if self.family is Family.GROUP:
            if self.delta2 is None or self.delta2 <= 0:
                raise ValueError("group family needs delta2 > 0")
            if self.p <= 15:
                raise ValueError("group family needs p > 15")
        if self.family is Family.EXTREME and self.p <= 15:
            raise ValueError("extreme family needs p > 15")
        if self.support_size is not None:
            if self.family in _FIXED_SUPPORT:
                raise ValueError(
                    f"support_size cannot override the {self.family.value} family"
                )
            if not 0 <= self.support_size <= min(self.n, self.p):
                raise ValueError("support_size outside 0..min(n, p)")
        if self.freeze_loadings and self.family is not Family.FACTOR:
            raise ValueError("freeze_loadings only applies to the factor family")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        return {k: v for k, v in out.items() if v not in (None, False)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimScenario":
        return cls(**d)


@dataclass
class SimDataset:
    """One realized dataset: y = X beta + eps with eps ~ N(0, sigma2 I)."""

    x: np.ndarray
    y: np.ndarray
    beta: np.ndarray
    support: np.ndarray
    sigma2: float
    scenario: SimScenario
    replicate: int = 0


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent per-replicate stream: SeedSequence((seed, replicate))."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(replicate))))


def make_beta(
    family: Family,
    n: int,
    p: int,
    rng: np.random.Generator,
    *,
    rho: float | None = None,
    support_size: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sparse coefficient vector and its support for one design family."""
    family = Family(family)
    if support_size is not None and family in _FIXED_SUPPORT:
        raise ValueError(f"support_size cannot override the {family.value} family")
    beta = np.zeros(p)
    if family is Family.INDEPENDENT:
        s = 5 if support_size is None else support_size
        signs = np.where(rng.random(s) < 0.4, -1.0, 1.0)
        floor = 4.0 * math.log(n) / math.sqrt(n)
        beta[:s] = signs * (np.abs(rng.standard_normal(s)) + floor)
    elif family in (Family.COMPOUND_SYMMETRY, Family.FACTOR, Family.EXTREME):
        s = 5 if support_size is None else support_size
        beta[:s] = 5.0
    elif family is Family.AUTOREGRESSIVE:
        if support_size is None:
            beta[[0, 3, 6]] = _AR_VALUES
        else:
            for j in range(support_size):
                beta[j] = _AR_VALUES[j % 3]
    elif family is Family.GROUP:
        beta[:15] = 3.0
    elif family is Family.MARGINAL_NULL:
        if rho is None:
            raise ValueError("marginal_null coefficients need rho")
        beta[:5] = (5.0, 5.0, 5.0, 5.0, -20.0 * rho)
    else:  # pragma: no cover
        raise ValueError(f"unknown family {family}")
    return beta, np.flatnonzero(beta)


def _draw_design(
    family: Family,
    n: int,
    p: int,
    rng: np.random.Generator,
    *,
    rho: float | None = None,
    k: int | None = None,
    delta2: float | None = None,
    loadings: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Design matrix plus, for the factor family, the loadings used."""
    family = Family(family)
    if family is Family.INDEPENDENT:
        return rng.standard_normal((n, p)), None
    if family in (Family.COMPOUND_SYMMETRY, Family.MARGINAL_NULL):
        # One shared factor per row gives unit variance and constant
        # off-diagonal correlation rho without any p x p factorization.
        z0 = rng.standard_normal(n)
        z = rng.standard_normal((n, p))
        return math.sqrt(rho) * z0[:, None] + math.sqrt(1.0 - rho) * z, None
    if family is Family.AUTOREGRESSIVE:
        z = rng.standard_normal((n, p))
        z[:, 1:] *= math.sqrt(1.0 - rho * rho)
        # Stationary recursion x_j = rho x_{j-1} + sqrt(1-rho^2) z_j as an
        # IIR filter along columns.
        return lfilter([1.0], [1.0, -rho], z, axis=1), None
    if family is Family.FACTOR:
        f = rng.standard_normal((n, k))
        lam = rng.standard_normal((p, k)) if loadings is None else loadings
        return f @ lam.T + rng.standard_normal((n, p)), lam
    if family is Family.GROUP:
        zg = rng.standard_normal((n, 3))
        x = np.empty((n, p))
        x[:, :15] = zg[:, np.arange(15) % 3] + math.sqrt(delta2) * rng.standard_normal(
            (n, 15)
        )
        x[:, 15:] = rng.standard_normal((n, p - 15))
        return x, None
    if family is Family.EXTREME:
        z = rng.standard_normal((n, p))
        w = rng.standard_normal((n, 5))
        x = np.empty((n, p))
        x[:, :5] = (z[:, :5] + w) / math.sqrt(2.0)
        x[:, 5:10] = x[:, :5] + 0.1 * rng.standard_normal((n, 5))
        x[:, 10:15] = x[:, :5] + 0.1 * rng.standard_normal((n, 5))
        x[:, 15:] = (z[:, 15:] + w.sum(axis=1)[:, None]) / 2.0
        return x, None
    raise ValueError(f"unknown family {family}")  # pragma: no cover


def draw_design(family, n, p, rng, *, rho=None, k=None, delta2=None, loadings=None):
    """Draw an n x p design matrix for the given family."""
    return _draw_design(
        family, n, p, rng, rho=rho, k=k, delta2=delta2, loadings=loadings
    )[0]


def signal_variance(
    family,
    beta: np.ndarray,
    *,
    rho: float | None = None,
    delta2: float | None = None,
    loadings: np.ndarray | None = None,
) -> float:
    """Population var(x' beta) for the family's covariance structure.

    Closed forms where they exist; the factor family evaluates the
    quadratic form on the realized loadings, so it varies per replicate.
    """
    family = Family(family)
    beta = np.asarray(beta, dtype=np.float64)
    nz = np.flatnonzero(beta)
    if family is Family.INDEPENDENT:
        return float(beta @ beta)
    if family in (Family.COMPOUND_SYMMETRY, Family.MARGINAL_NULL):
        return float((1.0 - rho) * (beta @ beta) + rho * beta.sum() ** 2)
    if family is Family.AUTOREGRESSIVE:
        b = beta[nz]
        gaps = np.abs(nz[:, None] - nz[None, :])
        return float(b @ (rho**gaps) @ b)
    if family is Family.FACTOR:
        if loadings is None:
            raise ValueError("factor signal variance needs the realized loadings")
        lb = loadings.T @ beta
        return float(lb @ lb + beta @ beta)
    if family is Family.GROUP:
        if np.any(nz >= 15):
            raise ValueError("group support must lie in the first 15 columns")
        groups = nz % 3
        total = delta2 * float(beta[nz] @ beta[nz])
        for g in range(3):
            total += float(beta[nz[groups == g]].sum() ** 2)
        return total
    if family is Family.EXTREME:
        if np.any(nz >= 5):
            raise ValueError("extreme support must lie in the first 5 columns")
        # The five important predictors are mutually uncorrelated with
        # unit variance, so the quadratic form collapses.
        return float(beta @ beta)
    raise ValueError(f"unknown family {family}")  # pragma: no cover


def calibrate_noise(signal_var: float, r_squared: float) -> float:
    """Noise variance making var(x'beta)/var(y) equal the target."""
    if not signal_var > 0:
        raise ValueError(f"signal variance must be positive, got {signal_var}")
    if not 0.0 < r_squared < 1.0:
        raise ValueError(f"r_squared must be in (0, 1), got {r_squared}")
    return signal_var * (1.0 - r_squared) / r_squared


def _frozen_loadings(scenario: SimScenario) -> np.ndarray:
    # Dedicated stream so frozen loadings are shared by every replicate.
    rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, 0x10AD)))
    return rng.standard_normal((scenario.p, scenario.k))


def simulate_dataset(scenario: SimScenario, replicate: int = 0) -> SimDataset:
    """Realize one dataset; bit-identical for identical (scenario, replicate)."""
    rng = replicate_rng(scenario.seed, replicate)
    beta, support = make_beta(
        scenario.family,
        scenario.n,
        scenario.p,
        rng,
        rho=scenario.rho,
        support_size=scenario.support_size,
    )
    loadings = _frozen_loadings(scenario) if scenario.freeze_loadings else None
    x, loadings = _draw_design(
        scenario.family,
        scenario.n,
        scenario.p,
        rng,
        rho=scenario.rho,
        k=scenario.k,
        delta2=scenario.delta2,
        loadings=loadings,
    )
    if support.size == 0:
        sigma2 = 1.0  # pure-noise truth: no signal to calibrate against
    else:
        sig = signal_variance(
            scenario.family,
            beta,
            rho=scenario.rho,
            delta2=scenario.delta2,
            loadings=loadings,
        )
        sigma2 = calibrate_noise(sig, scenario.r_squared)
    y = x @ beta + math.sqrt(sigma2) * rng.standard_normal(scenario.n)
    return SimDataset(
        x=x,
        y=y,
        beta=beta,
        support=support,
        sigma2=sigma2,
        scenario=scenario,
        replicate=replicate,
    )


def trend_schedule(n: int, high_signal: bool = True) -> tuple[int, int]:
    """(p, s) growth schedule for the sample-size consistency experiment.

    Dimension grows as 4 * floor(exp(n^(1/3))); sparsity as floor(n^(1/4)),
    inflated by 1.5 (rounded up) in the high-signal variant.
    """
    p = 4 * math.floor(math.exp(n ** (1.0 / 3.0)))
    base = math.floor(n**0.25)
    s = math.ceil(1.5 * base) if high_signal else base
    return p, s
