"""Deviance information criterion for comparing heterogeneity families.

The deviance is -2 times the study-level log likelihood at given
per-analysis (mu_j, tau_j); DIC combines the posterior mean deviance with
the effective parameter count p_D = mean deviance - deviance at the
posterior means. The plug-in point uses the posterior mean of each mu_j
and of each tau_j (the plain tau draws, not root-mean-square), so the
"parameters in focus" are the study-level model's parameters.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import _kernels
from .data import MetaAnalysisCollection
from .sampler import (
    HET_FAMILIES,
    McmcConfig,
    ModelSpec,
    PosteriorSamples,
    _flatten,
    run_hierarchical,
    summarize_samples,
)

__all__ = [
    "DicResult",
    "ComparisonRow",
    "deviance",
    "compute_dic",
    "compare_models",
    "comparison_to_dict",
    "format_comparison_table",
]


@dataclass(frozen=True)
class DicResult:
    family: str
    dic: float
    p_d: float
    mean_deviance: float
    plug_in_deviance: float

    def __post_init__(self):
        if not math.isclose(self.p_d, self.mean_deviance - self.plug_in_deviance, rel_tol=0, abs_tol=1e-9):
            raise ValueError("p_d must equal mean_deviance - plug_in_deviance")
        if not math.isclose(self.dic, self.mean_deviance + self.p_d, rel_tol=0, abs_tol=1e-9):
            raise ValueError("dic must equal mean_deviance + p_d")

    @classmethod
    def from_deviances(cls, family: str, mean_deviance: float, plug_in_deviance: float) -> "DicResult":
        p_d = mean_deviance - plug_in_deviance
        return cls(
            family=family,
            dic=mean_deviance + p_d,
            p_d=p_d,
            mean_deviance=mean_deviance,
            plug_in_deviance=plug_in_deviance,
        )


def deviance(c: MetaAnalysisCollection, mu, tau) -> float:
    """-2 sum of study log densities at per-analysis effects and taus."""
    mu = np.asarray(mu, dtype=float)
    tau = np.asarray(tau, dtype=float)
    n = c.n_analyses
    if mu.shape != (n,) or tau.shape != (n,):
        raise ValueError(f"mu and tau must each have length {n}, got {mu.shape} and {tau.shape}")
    if np.any(tau < 0.0):
        raise ValueError("tau values must be nonnegative")
    y, se2, offsets = _flatten(c)
    return float(_kernels._deviance(y, se2, offsets, mu, tau))


def compute_dic(
    s: PosteriorSamples | Mapping[str, np.ndarray],
    c: MetaAnalysisCollection,
    family: str | None = None,
) -> DicResult:
    """DIC from posterior draws.

    Accepts a :class:`PosteriorSamples` or a parameter->draws mapping (the
    draw-CSV form); the mapping route requires a ``deviance`` trace and
    ``mu[...]``/``tau[...]`` entries for every analysis in ``c``.
    """
    if isinstance(s, PosteriorSamples):
        dev = s.deviance
        mu_mean = s.mu.mean(axis=(0, 1))
        tau_mean = s.tau.mean(axis=(0, 1))
        label = family if family is not None else s.family
    else:
        if "deviance" not in s:
            raise ValueError("draws are missing the deviance trace")
        dev = np.asarray(s["deviance"], dtype=float)
        try:
            mu_mean = np.array([float(np.mean(s[f"mu[{aid}]"])) for aid in c.analysis_ids])
            tau_mean = np.array([float(np.mean(s[f"tau[{aid}]"])) for aid in c.analysis_ids])
        except KeyError as exc:
            raise ValueError(f"draws are missing parameter {exc.args[0]!r}") from None
        label = family if family is not None else "unspecified"
    mean_dev = float(np.mean(dev))
    plug_in = deviance(c, mu_mean, tau_mean)
    return DicResult.from_deviances(label, mean_dev, plug_in)


@dataclass(frozen=True)
class ComparisonRow:
    family: str
    dic: DicResult | None
    predictive: dict | None
    error: str | None = None


def compare_models(
    c: MetaAnalysisCollection,
    families: list[str],
    m_template: ModelSpec | None = None,
    cfg: McmcConfig | None = None,
) -> list[ComparisonRow]:
    """Fit each family on the same data and rank by DIC (lowest first).

    A family whose run fails contributes an error row at the end instead
    of aborting the whole comparison. Half-Cauchy predictive mean/sd are
    reported as undefined (the distribution has no moments; empirical
    values would be unstable noise).
    """
    if len(families) < 2:
        raise ValueError(f"need at least 2 families to compare, got {len(families)}")
    if m_template is None:
        m_template = ModelSpec()
    rows = []
    for fam in families:
        try:
            m = dataclasses.replace(m_template, het_family=fam)
            s = run_hierarchical(c, m, cfg)
            dic = compute_dic(s, c)
            pred = summarize_samples(s.predictive)
            if fam == "half-cauchy":
                pred["mean"] = None
                pred["sd"] = None
            rows.append(ComparisonRow(family=fam, dic=dic, predictive=pred))
        except Exception as exc:  # keep the other families alive
            rows.append(ComparisonRow(family=fam, dic=None, predictive=None, error=str(exc)))
    ok = sorted((r for r in rows if r.error is None), key=lambda r: r.dic.dic)
    failed = [r for r in rows if r.error is not None]
    return ok + failed


def comparison_to_dict(rows: list[ComparisonRow]) -> list[dict]:
    """JSON-ready form of a comparison table."""
    out = []
    for r in rows:
        if r.error is not None:
            out.append({"model": r.family, "error": r.error})
            continue
        out.append(
            {
                "model": r.family,
                "dic": r.dic.dic,
                "p_d": r.dic.p_d,
                "mean_deviance": r.dic.mean_deviance,
                "plug_in_deviance": r.dic.plug_in_deviance,
                "predictive": dict(r.predictive),
            }
        )
    return out


def _cell(v, width) -> str:
    if v is None:
        return "-".rjust(width)
    return f"{v:.2f}".rjust(width)


def format_comparison_table(rows: list[ComparisonRow]) -> str:
    """Aligned text table: model, DIC, predictive mean/sd/50%/95%/99%."""
    name_w = max([len("model")] + [len(r.family) for r in rows])
    header = (
        f"{'model'.ljust(name_w)}  {'DIC'.rjust(7)}  {'mean'.rjust(6)}  {'sd'.rjust(6)}"
        f"  {'50%'.rjust(6)}  {'95%'.rjust(6)}  {'99%'.rjust(6)}"
    )
    lines = [header]
    for r in rows:
        if r.error is not None:
            lines.append(f"{r.family.ljust(name_w)}  failed: {r.error}")
            continue
        p = r.predictive
        lines.append(
            f"{r.family.ljust(name_w)}  {r.dic.dic:7.1f}  {_cell(p['mean'], 6)}  {_cell(p['sd'], 6)}"
            f"  {_cell(p['median'], 6)}  {_cell(p['q95'], 6)}  {_cell(p['q99'], 6)}"
        )
    return "\n".join(lines)


# families eligible for comparison, in conventional order
COMPARISON_FAMILIES = tuple(HET_FAMILIES)
