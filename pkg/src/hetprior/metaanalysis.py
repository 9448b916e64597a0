"""Apply a heterogeneity prior in a single random-effects meta-analysis.

The Bayesian route integrates the normal-normal hierarchical model over a
deterministic tau grid: with the effect integrated out (flat prior, or a
proper normal prior absorbed as a pseudo-study with no heterogeneity
term), the integrated likelihood is

    L(tau) = (prod_i w_i)^(1/2) (sum_i w_i)^(-1/2) exp(-Q(tau)/2),
    w_i = 1/(sigma_i^2 + tau^2),
    Q(tau) = sum_i w_i (y_i - mu_hat(tau))^2,

with mu_hat(tau) the w-weighted mean.  The effect posterior is then the
grid mixture of the conditional normals N(mu_hat(tau), V(tau)),
V(tau) = 1/sum_i w_i.

The frequentist comparators are the DerSimonian-Laird and Paule-Mandel
heterogeneity estimates and the Normal / HKSJ / mKH confidence intervals
around the weighted mean at a plugged-in tau.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from .data import MetaAnalysisCollection
from .dist import Distribution, Normal
from .summarize import PriorSpec

__all__ = [
    "SingleMeta",
    "GridDensity",
    "MetaAnalysisResult",
    "LabeledInterval",
    "DlResult",
    "TauEstimates",
    "GridError",
    "UndefinedEstimatorError",
    "tau_marginal",
    "bayes_ma",
    "dl_estimate",
    "pm_estimate",
    "ci_suite",
    "tau_estimate_collection",
    "forest_rows",
    "single_meta",
]

_Z975 = float(special.ndtri(0.975))

_GRID_POINTS = 2000
_EXT_POINTS = 200
_TAIL_MASS = 1e-6
_MAX_EXTENSIONS = 60


class GridError(RuntimeError):
    """The tau grid could not be extended to cover the posterior mass."""


class UndefinedEstimatorError(ValueError):
    """A frequentist estimator needs at least two studies."""


@dataclass(frozen=True)
class SingleMeta:
    """One meta-analysis: study estimates and their standard errors."""

    y: tuple[float, ...]
    sigma: tuple[float, ...]

    def __post_init__(self):
        y = tuple(float(v) for v in self.y)
        sigma = tuple(float(v) for v in self.sigma)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma", sigma)
        if len(y) != len(sigma):
            raise ValueError(f"{len(y)} estimates but {len(sigma)} standard errors")
        if not y:
            raise ValueError("need at least one study")
        if not all(math.isfinite(v) for v in y):
            raise ValueError("estimates must be finite")
        if not all(math.isfinite(s) and s > 0.0 for s in sigma):
            raise ValueError("standard errors must be finite and positive")

    @property
    def k(self) -> int:
        return len(self.y)


def single_meta(c: MetaAnalysisCollection, analysis_id: str | None = None) -> SingleMeta:
    """Pull one analysis out of a collection (the only one, by default)."""
    if analysis_id is None:
        if c.n_analyses != 1:
            raise ValueError(
                f"collection holds {c.n_analyses} analyses; pass analysis_id to pick one"
            )
        analysis_id = c.analysis_ids[0]
    records = c.analysis(analysis_id)
    return SingleMeta(
        y=tuple(r.estimate for r in records), sigma=tuple(r.std_err for r in records)
    )


@dataclass(frozen=True, eq=False)
class GridDensity:
    """A normalized density tabulated on an increasing grid."""

    grid: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        if self.grid.shape != self.density.shape or self.grid.ndim != 1:
            raise ValueError("grid and density must be matching 1-d arrays")

    def _cdf_table(self) -> np.ndarray:
        cdf = integrate.cumulative_trapezoid(self.density, self.grid, initial=0.0)
        return cdf / cdf[-1]

    def quantile(self, p) -> np.ndarray | float:
        cdf = self._cdf_table()
        # keep the interpolation table strictly increasing
        keep = np.concatenate(([True], np.diff(cdf) > 0.0))
        return np.interp(p, cdf[keep], self.grid[keep])

    def median(self) -> float:
        return float(self.quantile(0.5))

    def central_interval(self, level: float = 0.95) -> tuple[float, float]:
        a = (1.0 - level) / 2.0
        lo, hi = self.quantile([a, 1.0 - a])
        return float(lo), float(hi)

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.grid))


@dataclass(frozen=True)
class LabeledInterval:
    label: str
    estimate: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"interval {self.label!r} has lo {self.lo} > hi {self.hi}")


@dataclass(frozen=True, eq=False)
class MetaAnalysisResult:
    mu_mean: float
    mu_median: float
    mu_sd: float
    mu_interval: tuple[float, float]
    mu_density: GridDensity
    tau_median: float
    tau_interval: tuple[float, float]
    tau_density: GridDensity
    prior: PriorSpec
    comparators: tuple[LabeledInterval, ...]


def _weights(sm: SingleMeta, mu_prior: Normal | None, tau: np.ndarray) -> tuple:
    """(T, k') weight matrix and y row for the (possibly augmented) studies."""
    y = np.asarray(sm.y, dtype=float)
    s2 = np.asarray(sm.sigma, dtype=float) ** 2
    tau2 = np.asarray(tau, dtype=float)[:, None] ** 2
    var = s2[None, :] + tau2
    if mu_prior is not None:
        if not isinstance(mu_prior, Normal):
            raise TypeError(
                f"mu_prior must be a Normal distribution or None, got {mu_prior!r}"
            )
        y = np.append(y, mu_prior.mean)
        prior_var = np.full((var.shape[0], 1), mu_prior.sd**2)
        var = np.concatenate([var, prior_var], axis=1)
    return y, 1.0 / var


def _integrated_loglik(sm: SingleMeta, mu_prior: Normal | None, tau: np.ndarray) -> np.ndarray:
    y, w = _weights(sm, mu_prior, tau)
    total_w = w.sum(axis=1)
    mu_hat = (w * y).sum(axis=1) / total_w
    q = (w * (y - mu_hat[:, None]) ** 2).sum(axis=1)
    return 0.5 * np.log(w).sum(axis=1) - 0.5 * np.log(total_w) - 0.5 * q


def _tau_grid(prior: Distribution, extensions: int) -> np.ndarray:
    hi0 = float(prior.quantile(0.9999))
    if not (math.isfinite(hi0) and hi0 > 0.0):
        raise GridError(
            f"prior {prior!r} has no finite positive 0.9999 quantile; cannot build tau grid"
        )
    base = hi0 * np.linspace(0.0, 1.0, _GRID_POINTS) ** 2
    if extensions == 0:
        return base
    ext = np.geomspace(hi0, hi0 * 2.0**extensions, extensions * _EXT_POINTS + 1)[1:]
    return np.concatenate([base, ext])


def tau_marginal(
    sm: SingleMeta, prior: Distribution, mu_prior: Normal | None = None
) -> GridDensity:
    """Heterogeneity posterior prior(tau) * L(tau), normalized on an
    adaptive grid (extended by doubling until the tail mass is negligible)."""
    for extensions in range(_MAX_EXTENSIONS + 1):
        grid = _tau_grid(prior, extensions)
        log_post = prior.log_density(grid) + _integrated_loglik(sm, mu_prior, grid)
        finite = log_post[np.isfinite(log_post)]
        if finite.size == 0:
            raise GridError("heterogeneity posterior vanished on the whole tau grid")
        g = np.exp(log_post - finite.max())
        total = np.trapezoid(g, grid)
        if total <= 0.0 or not math.isfinite(total):
            raise GridError("heterogeneity posterior could not be normalized")
        tail_start = 0.95 * grid[-1]
        tail = np.trapezoid(np.where(grid >= tail_start, g, 0.0), grid)
        if tail < _TAIL_MASS * total:
            return GridDensity(grid=grid, density=g / total)
    raise GridError(
        "tau posterior mass does not decay: grid extended "
        f"{_MAX_EXTENSIONS} times without reaching tail mass < {_TAIL_MASS:g}"
    )


def _mixture_weights(td: GridDensity) -> np.ndarray:
    """Trapezoid cell masses: nonnegative, summing to the grid integral (1)."""
    dx = np.diff(td.grid)
    w = np.zeros_like(td.grid)
    w[:-1] += 0.5 * dx * td.density[:-1]
    w[1:] += 0.5 * dx * td.density[1:]
    return w / w.sum()


def bayes_ma(
    sm: SingleMeta,
    prior: Distribution | PriorSpec,
    mu_prior: Normal | None = None,
    comparators: bool = True,
) -> MetaAnalysisResult:
    """Full Bayesian meta-analysis under the given heterogeneity prior."""
    if isinstance(prior, PriorSpec):
        spec = prior
    else:
        spec = PriorSpec(distribution=prior, method="point_estimate(mean)", source="given")
    td = tau_marginal(sm, spec.distribution, mu_prior)

    y, w = _weights(sm, mu_prior, td.grid)
    total_w = w.sum(axis=1)
    mu_hat = (w * y).sum(axis=1) / total_w
    v = 1.0 / total_w
    omega = _mixture_weights(td)

    mu_mean = float(np.sum(omega * mu_hat))
    mu_var = float(np.sum(omega * (v + mu_hat**2)) - mu_mean**2)
    mu_sd = math.sqrt(mu_var)

    sd_cond = np.sqrt(v)

    def mixture_cdf(x: float) -> float:
        return float(np.sum(omega * special.ndtr((x - mu_hat) / sd_cond)))

    lo0 = float(np.min(mu_hat - 10.0 * sd_cond))
    hi0 = float(np.max(mu_hat + 10.0 * sd_cond))

    def mixture_quantile(p: float) -> float:
        return float(optimize.brentq(lambda x: mixture_cdf(x) - p, lo0, hi0, xtol=1e-12))

    mu_median = mixture_quantile(0.5)
    mu_interval = (mixture_quantile(0.025), mixture_quantile(0.975))

    # report the density on a window holding all but ~1e-7 of the mixture
    # mass; wide components (large tau) push the window out adaptively
    lo_g = mu_mean - 6.0 * mu_sd
    hi_g = mu_mean + 6.0 * mu_sd
    for _ in range(200):
        if mixture_cdf(lo_g) <= 1e-7:
            break
        lo_g -= 2.0 * mu_sd
    for _ in range(200):
        if mixture_cdf(hi_g) >= 1.0 - 1e-7:
            break
        hi_g += 2.0 * mu_sd
    step = 0.5 * min(mu_sd, float(sd_cond.min()))
    n_grid = int(np.clip(math.ceil((hi_g - lo_g) / step), 1201, 40001))
    mu_grid = np.linspace(lo_g, hi_g, n_grid)
    mu_dens = np.empty_like(mu_grid)
    norm = omega / (sd_cond * math.sqrt(2.0 * math.pi))
    for start in range(0, n_grid, 4000):
        block = mu_grid[start : start + 4000, None]
        mu_dens[start : start + 4000] = (
            norm[None, :] * np.exp(-0.5 * ((block - mu_hat[None, :]) / sd_cond[None, :]) ** 2)
        ).sum(axis=1)

    rows: tuple[LabeledInterval, ...] = ()
    if comparators and sm.k >= 2:
        dl = dl_estimate(sm)
        rows = ci_suite(sm, dl.tau) + (_common_effect_interval(sm),)

    return MetaAnalysisResult(
        mu_mean=mu_mean,
        mu_median=mu_median,
        mu_sd=mu_sd,
        mu_interval=mu_interval,
        mu_density=GridDensity(grid=mu_grid, density=mu_dens),
        tau_median=td.median(),
        tau_interval=td.central_interval(),
        tau_density=td,
        prior=spec,
        comparators=rows,
    )


# -- frequentist comparators -----------------------------------------------------


@dataclass(frozen=True)
class DlResult:
    tau: float
    q: float


def _weighted_mean(sm: SingleMeta, tau: float) -> tuple[float, float, np.ndarray]:
    y = np.asarray(sm.y, dtype=float)
    w = 1.0 / (np.asarray(sm.sigma, dtype=float) ** 2 + tau**2)
    mu = float(np.sum(w * y) / np.sum(w))
    return mu, float(1.0 / np.sum(w)), w


def dl_estimate(sm: SingleMeta) -> DlResult:
    """DerSimonian-Laird moment estimate (truncated at zero) and Cochran's Q."""
    if sm.k < 2:
        raise UndefinedEstimatorError("DL estimate needs at least 2 studies")
    y = np.asarray(sm.y, dtype=float)
    w = 1.0 / np.asarray(sm.sigma, dtype=float) ** 2
    mu = float(np.sum(w * y) / np.sum(w))
    q = float(np.sum(w * (y - mu) ** 2))
    denom = float(np.sum(w) - np.sum(w**2) / np.sum(w))
    tau2 = max(0.0, (q - (sm.k - 1)) / denom)
    return DlResult(tau=math.sqrt(tau2), q=q)


def pm_estimate(sm: SingleMeta) -> float:
    """Paule-Mandel estimate: tau making the generalized Q statistic match
    its k-1 degrees of freedom (zero if already below at tau=0)."""
    if sm.k < 2:
        raise UndefinedEstimatorError("PM estimate needs at least 2 studies")

    def f(tau: float) -> float:
        mu, _, w = _weighted_mean(sm, tau)
        return float(np.sum(w * (np.asarray(sm.y) - mu) ** 2)) - (sm.k - 1)

    if f(0.0) <= 0.0:
        return 0.0
    hi = max(sm.sigma)
    cap = 1e3 * hi
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > cap:
            return float(cap)
    return float(optimize.brentq(f, 0.0, hi, xtol=1e-8))


def _common_effect_interval(sm: SingleMeta) -> LabeledInterval:
    mu, v, _ = _weighted_mean(sm, 0.0)
    half = _Z975 * math.sqrt(v)
    return LabeledInterval("common-effect", mu, mu - half, mu + half)


def ci_suite(sm: SingleMeta, tau_hat: float) -> tuple[LabeledInterval, ...]:
    """Normal, HKSJ and mKH 95% intervals around the weighted mean at tau_hat."""
    if sm.k < 2:
        raise UndefinedEstimatorError("confidence intervals need at least 2 studies")
    if not (math.isfinite(tau_hat) and tau_hat >= 0.0):
        raise ValueError(f"tau_hat must be finite and nonnegative, got {tau_hat!r}")
    mu, v, w = _weighted_mean(sm, tau_hat)
    q = float(np.sum(w * (np.asarray(sm.y) - mu) ** 2)) / (sm.k - 1)
    t = float(special.stdtrit(sm.k - 1, 0.975))
    half_normal_ci = _Z975 * math.sqrt(v)
    half_hksj = t * math.sqrt(q * v)
    half_mkh = t * math.sqrt(max(1.0, q) * v)
    return (
        LabeledInterval("normal", mu, mu - half_normal_ci, mu + half_normal_ci),
        LabeledInterval("hksj", mu, mu - half_hksj, mu + half_hksj),
        LabeledInterval("mkh", mu, mu - half_mkh, mu + half_mkh),
    )


@dataclass(frozen=True)
class TauEstimates:
    method: str
    estimates: tuple[tuple[str, float], ...]
    skipped: tuple[str, ...]

    @property
    def values(self) -> np.ndarray:
        return np.array([t for _, t in self.estimates])

    def summary(self) -> dict:
        v = self.values
        return {
            "n": int(v.size),
            "fraction_zero": float(np.mean(v == 0.0)),
            "mean": float(np.mean(v)),
            "median": float(np.quantile(v, 0.5)),
        }


def tau_estimate_collection(c: MetaAnalysisCollection, method: str = "DL") -> TauEstimates:
    """Per-analysis heterogeneity point estimates across a collection.

    Single-study analyses carry no heterogeneity information and are
    skipped with a warning.
    """
    norm = method.upper()
    if norm not in ("DL", "PM"):
        raise ValueError(f"method must be DL or PM, got {method!r}")
    estimates = []
    skipped = []
    for aid in c.analysis_ids:
        records = c.analysis(aid)
        if len(records) < 2:
            skipped.append(aid)
            continue
        sm = SingleMeta(
            y=tuple(r.estimate for r in records), sigma=tuple(r.std_err for r in records)
        )
        tau = dl_estimate(sm).tau if norm == "DL" else pm_estimate(sm)
        estimates.append((aid, float(tau)))
    if skipped:
        warnings.warn(
            f"skipped {len(skipped)} single-study analyses (no heterogeneity "
            f"information): {', '.join(skipped)}",
            UserWarning,
            stacklevel=2,
        )
    if not estimates:
        raise ValueError("no analysis with at least 2 studies")
    return TauEstimates(method=norm, estimates=tuple(estimates), skipped=tuple(skipped))


def forest_rows(
    sm: SingleMeta, result: MetaAnalysisResult, labels: list[str] | None = None
) -> list[dict]:
    """Forest-plot rows: one per study (normal 95% CI, inverse-variance
    weight) followed by the Bayesian summary and the comparators."""
    if labels is None:
        labels = [f"study {i + 1}" for i in range(sm.k)]
    if len(labels) != sm.k:
        raise ValueError(f"{len(labels)} labels for {sm.k} studies")
    w = 1.0 / np.asarray(sm.sigma, dtype=float) ** 2
    w = w / w.sum()
    rows = []
    for label, y, s, wt in zip(labels, sm.y, sm.sigma, w):
        rows.append(
            {
                "label": label,
                "estimate": y,
                "lo": y - _Z975 * s,
                "hi": y + _Z975 * s,
                "weight_or_type": f"{wt:.6f}",
            }
        )
    rows.append(
        {
            "label": f"bayes [{result.prior.text()}]",
            "estimate": result.mu_median,
            "lo": result.mu_interval[0],
            "hi": result.mu_interval[1],
            "weight_or_type": "posterior",
        }
    )
    for ci in result.comparators:
        rows.append(
            {
                "label": ci.label,
                "estimate": ci.estimate,
                "lo": ci.lo,
                "hi": ci.hi,
                "weight_or_type": "comparator",
            }
        )
    return rows
