"""Condense posterior output into communicable parametric heterogeneity priors.

Three routes:

1. point estimate — freeze the heterogeneity family at a posterior
   statistic of its hyperparameter(s) (the q95 variant is the
   deliberately conservative choice);
2. mixture match — use the analytic scale-mixture identities: a
   half-normal with uncertain scale becomes a half-Student-t, an
   exponential becomes a Lomax, a log-normal absorbs the location
   uncertainty into an inflated shape;
3. direct fit — fit a chosen family to the predictive draws themselves,
   by maximum likelihood (simplex search on log-reparametrized
   parameters) or by moment inversion.

The published form of a prior is rounded (2 decimals by default);
the unrounded parameters are kept alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .dist import (
    Distribution,
    Exponential,
    HalfCauchy,
    HalfNormal,
    HalfStudentT,
    InfeasibleError,
    LogNormal,
    Lomax,
    exp_mixture_lomax,
    format_distribution,
    half_t_moment_fit,
    scale_mixture_half_t,
)
from .sampler import PosteriorSamples, summarize_samples

__all__ = [
    "PriorSpec",
    "FitError",
    "point_estimate_prior",
    "mixture_match_prior",
    "fit_predictive_ml",
    "fit_predictive_moments",
    "approximation_table",
    "ApproximationRow",
    "prior_to_dict",
    "format_approximation_table",
]


class FitError(RuntimeError):
    """A direct fit did not converge within its evaluation budget."""


@dataclass(frozen=True)
class PriorSpec:
    """A condensed heterogeneity prior plus how it was obtained.

    ``method`` is one of ``point_estimate(<statistic>)``,
    ``mixture_match``, ``direct_fit_ml``, ``direct_fit_moments``.
    """

    distribution: Distribution
    method: str
    source: str = ""
    rounding: int = 2
    note: str | None = None
    log_likelihood: float | None = None

    def rounded_distribution(self) -> Distribution:
        params = [round(p, self.rounding) for p in self.distribution._params()]
        return type(self.distribution)(*params)

    def text(self) -> str:
        """Canonical (rounded, communicable) text form."""
        return format_distribution(self.rounded_distribution())


def prior_to_dict(spec: PriorSpec) -> dict:
    d = spec.distribution
    out = {
        "family": d.token,
        "params": [float(p) for p in d._params()],
        "rounded": [round(float(p), spec.rounding) for p in d._params()],
        "text": spec.text(),
        "method": spec.method,
        "source": spec.source,
        "rounding": spec.rounding,
    }
    if spec.note is not None:
        out["note"] = spec.note
    if spec.log_likelihood is not None:
        out["log_likelihood"] = spec.log_likelihood
    return out


def _statistic(draws: np.ndarray, statistic: str) -> float:
    x = np.asarray(draws, dtype=float).ravel()
    if statistic == "mean":
        return float(np.mean(x))
    if statistic == "median":
        return float(np.quantile(x, 0.5))
    if statistic == "q95":
        return float(np.quantile(x, 0.95))
    raise ValueError(f"unknown statistic {statistic!r}; choose mean, median or q95")


def point_estimate_prior(s: PosteriorSamples, statistic: str = "mean", source: str = "") -> PriorSpec:
    """Route 1: the conditional family frozen at a hyperparameter statistic."""
    note = "conservative" if statistic == "q95" else None
    method = f"point_estimate({statistic})"
    if s.family == "log-normal":
        theta_hat = _statistic(s.hyper["theta"], statistic)
        sigma_hat = _statistic(s.hyper["sigma"], statistic)
        dist = LogNormal(mu=math.log(theta_hat), sigma=sigma_hat)
    else:
        scale_hat = _statistic(s.hyper["scale"], statistic)
        dist = {"half-normal": HalfNormal, "exp": Exponential, "half-cauchy": HalfCauchy}[
            s.family
        ](scale_hat)
    return PriorSpec(distribution=dist, method=method, source=source, note=note)


def mixture_match_prior(s: PosteriorSamples, source: str = "") -> PriorSpec:
    """Route 2: analytic match of the hyperparameter-uncertainty mixture."""
    note = None
    if s.family == "half-normal":
        draws = s.hyper["scale"].ravel()
        mean_s, sd_s = float(np.mean(draws)), float(np.std(draws, ddof=1))
        if sd_s <= mean_s * 1e-12:  # spread below float noise of the mean
            dist: Distribution = scale_mixture_half_t(mean_s, 0.0)
            note = "degenerate mixture: zero hyperparameter spread"
        else:
            dist = scale_mixture_half_t(mean_s, sd_s)
    elif s.family == "exp":
        draws = s.hyper["scale"].ravel()
        mean_s, sd_s = float(np.mean(draws)), float(np.std(draws, ddof=1))
        if sd_s <= mean_s * 1e-12:
            dist = Exponential(mean_s)
            note = "degenerate mixture: zero hyperparameter spread"
        else:
            dist = exp_mixture_lomax(mean_s, sd_s)
    elif s.family == "log-normal":
        log_theta = np.log(s.hyper["theta"].ravel())
        sigma2 = s.hyper["sigma"].ravel() ** 2
        location = float(np.mean(log_theta))
        shape = math.sqrt(float(np.mean(sigma2)) + float(np.var(log_theta, ddof=1)))
        dist = LogNormal(mu=location, sigma=shape)
    else:
        raise ValueError(
            f"no analytic mixture match for the {s.family!r} family "
            "(supported: half-normal, exp, log-normal)"
        )
    return PriorSpec(distribution=dist, method="mixture_match", source=source, note=note)


# -- direct fits ---------------------------------------------------------------

_FIT_FAMILIES = ("half-normal", "half-t", "exp", "half-cauchy", "log-normal", "lomax")

_ROOT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _moment_start(x: np.ndarray, family: str) -> Distribution:
    """Moment-based (or robust fallback) starting point for the ML search."""
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if family == "half-normal":
        return HalfNormal(mean / _ROOT_2_OVER_PI)
    if family == "exp":
        return Exponential(mean)
    if family == "half-cauchy":
        return HalfCauchy(float(np.quantile(x, 0.5)))
    if family == "log-normal":
        lx = np.log(x[x > 0.0])
        return LogNormal(float(np.mean(lx)), max(float(np.std(lx)), 1e-6))
    if family == "half-t":
        try:
            return half_t_moment_fit(mean, sd)
        except InfeasibleError:
            return HalfStudentT(50.0, mean / _ROOT_2_OVER_PI)
    # lomax
    cv = sd / mean
    if cv > 1.0:
        return _lomax_from_moments(mean, sd)
    return Lomax(3.0, 2.0 * mean)


def _pack(d: Distribution) -> np.ndarray:
    """Unconstrained parameter vector (logs of positive parameters)."""
    if isinstance(d, LogNormal):
        return np.array([d.mu, math.log(d.sigma)])
    return np.log(np.asarray(d._params(), dtype=float))


def _unpack(family: str, v: np.ndarray) -> Distribution:
    if family == "half-normal":
        return HalfNormal(math.exp(v[0]))
    if family == "exp":
        return Exponential(math.exp(v[0]))
    if family == "half-cauchy":
        return HalfCauchy(math.exp(v[0]))
    if family == "log-normal":
        return LogNormal(v[0], math.exp(v[1]))
    if family == "half-t":
        return HalfStudentT(math.exp(v[0]), math.exp(v[1]))
    return Lomax(math.exp(v[0]), math.exp(v[1]))


def fit_predictive_ml(draws, family: str, source: str = "") -> PriorSpec:
    """Route 3a: maximum likelihood on the predictive draws.

    Simplex (Nelder-Mead) search over log-reparametrized parameters,
    starting from the moment estimate, with a 10^4-evaluation budget.
    """
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 1000:
        raise ValueError(f"need at least 1000 draws for a direct fit, got {x.size}")
    if family not in _FIT_FAMILIES:
        raise ValueError(f"unsupported fit family {family!r}; choose from {_FIT_FAMILIES}")

    def neg_ll(v):
        d = _unpack(family, v)
        ll = d.log_density(x)
        total = float(np.sum(ll))
        return math.inf if math.isnan(total) else -total

    start = _pack(_moment_start(x, family))
    res = optimize.minimize(
        neg_ll,
        start,
        method="Nelder-Mead",
        options={"maxfev": 10_000, "xatol": 1e-8, "fatol": 1e-10},
    )
    if not res.success:
        raise FitError(
            f"ML fit of {family!r} did not converge: {res.message} "
            f"(evaluations: {res.nfev}, last point: {res.x.tolist()})"
        )
    dist = _unpack(family, res.x)
    return PriorSpec(
        distribution=dist,
        method="direct_fit_ml",
        source=source,
        log_likelihood=-float(res.fun),
    )


def _lomax_from_moments(mean: float, sd: float) -> Lomax:
    """Lomax with the given mean and sd (needs cv > 1)."""
    cv2 = (sd / mean) ** 2
    if cv2 <= 1.0:
        raise InfeasibleError(
            f"sample cv {math.sqrt(cv2):.4g} <= 1 is not attainable by a Lomax "
            "with finite variance; an exponential fit may be appropriate"
        )
    shape = 2.0 * cv2 / (cv2 - 1.0)
    return Lomax(shape=shape, scale=mean * (shape - 1.0))


def fit_predictive_moments(draws, family: str, source: str = "") -> PriorSpec:
    """Route 3b: invert the family's first two moments at the sample values."""
    x = np.asarray(draws, dtype=float).ravel()
    if x.size < 2:
        raise ValueError(f"need at least 2 draws, got {x.size}")
    mean = float(np.mean(x))
    sd = float(np.std(x, ddof=1))
    if family == "half-normal":
        dist: Distribution = HalfNormal(mean / _ROOT_2_OVER_PI)
    elif family == "exp":
        dist = Exponential(mean)
    elif family == "half-t":
        dist = half_t_moment_fit(mean, sd)  # raises InfeasibleError for cv <= half-normal limit
    elif family == "lomax":
        dist = _lomax_from_moments(mean, sd)
    elif family == "log-normal":
        sigma = math.sqrt(math.log1p((sd / mean) ** 2))
        dist = LogNormal(mu=math.log(mean) - sigma**2 / 2.0, sigma=sigma)
    elif family == "half-cauchy":
        raise ValueError("half-cauchy has no defined moments; a moment fit is impossible")
    else:
        raise ValueError(f"unsupported fit family {family!r}")
    return PriorSpec(distribution=dist, method="direct_fit_moments", source=source)


# -- comparison table ----------------------------------------------------------


@dataclass(frozen=True)
class ApproximationRow:
    label: str
    mean: float | None
    sd: float | None
    median: float
    q95: float
    q99: float

    def as_dict(self) -> dict:
        return {
            "label": self.label,
            "mean": self.mean,
            "sd": self.sd,
            "median": self.median,
            "q95": self.q95,
            "q99": self.q99,
        }


def approximation_table(specs: list[PriorSpec], tau_star=None) -> list[ApproximationRow]:
    """Empirical predictive summary (first row, if draws given) against each
    prior's analytic moments and quantiles."""
    if not specs:
        raise ValueError("need at least one prior spec")
    rows = []
    if tau_star is not None and np.asarray(tau_star).size:
        emp = summarize_samples(tau_star)
        rows.append(
            ApproximationRow(
                label="MCMC",
                mean=emp["mean"],
                sd=emp["sd"],
                median=emp["median"],
                q95=emp["q95"],
                q99=emp["q99"],
            )
        )
    for spec in specs:
        d = spec.distribution
        m = d.moments()
        rows.append(
            ApproximationRow(
                label=spec.text(),
                mean=m.mean,
                sd=m.sd,
                median=float(d.quantile(0.5)),
                q95=float(d.quantile(0.95)),
                q99=float(d.quantile(0.99)),
            )
        )
    return rows


def format_approximation_table(rows: list[ApproximationRow]) -> str:
    label_w = max([len("prior")] + [len(r.label) for r in rows])

    def cell(v):
        return ("-" if v is None else f"{v:.2f}").rjust(6)

    lines = [
        f"{'prior'.ljust(label_w)}  {'mean'.rjust(6)}  {'sd'.rjust(6)}"
        f"  {'50%'.rjust(6)}  {'95%'.rjust(6)}  {'99%'.rjust(6)}"
    ]
    for r in rows:
        lines.append(
            f"{r.label.ljust(label_w)}  {cell(r.mean)}  {cell(r.sd)}"
            f"  {cell(r.median)}  {cell(r.q95)}  {cell(r.q99)}"
        )
    return "\n".join(lines)
