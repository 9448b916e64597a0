"""Tests for condensing posterior draws into parametric priors."""

import math
import types

import numpy as np
import pytest

from hetprior.dist import (
    Exponential,
    HalfCauchy,
    HalfNormal,
    HalfStudentT,
    InfeasibleError,
    LogNormal,
    Lomax,
    NU_MAX,
    exp_mixture_lomax,
    half_t_moment_fit,
    scale_mixture_half_t,
)
from hetprior.sampler import PosteriorSamples
from hetprior.summarize import (
    ApproximationRow,
    FitError,
    PriorSpec,
    approximation_table,
    fit_predictive_ml,
    fit_predictive_moments,
    format_approximation_table,
    mixture_match_prior,
    point_estimate_prior,
    prior_to_dict,
)


def positive_draws_with_moments(mean, sd, n=4096, seed=0):
    """A positive sample whose sample mean/sd (ddof=1) are exact."""
    sigma = math.sqrt(math.log1p((sd / mean) ** 2))
    for attempt in range(20):
        rng = np.random.default_rng(seed + 1000 * attempt)
        x = rng.lognormal(math.log(mean) - sigma**2 / 2.0, sigma, n)
        x = mean + (x - x.mean()) * (sd / x.std(ddof=1))
        if x.min() > 0.0:
            return x
    raise AssertionError("could not standardize to a positive sample")


def fake_run(family, hyper, n_analyses=3):
    """Hand-built PosteriorSamples carrying only what the prior routes read."""
    kept = np.asarray(next(iter(hyper.values()))).size
    hyper2 = {k: np.asarray(v, dtype=float).reshape(1, kept) for k, v in hyper.items()}
    names = ("theta", "sigma") if family == "log-normal" else ("scale",)
    return PosteriorSamples(
        family=family,
        hyper_names=names,
        hyper=hyper2,
        mu=np.zeros((1, kept, n_analyses)),
        tau=np.full((1, kept, n_analyses), 0.1),
        predictive=np.full((1, kept), 0.1),
        deviance=np.zeros((1, kept)),
        analysis_ids=tuple(f"a{i}" for i in range(n_analyses)),
    )


# -- route 1: point estimates ---------------------------------------------------


@pytest.mark.parametrize("statistic", ["mean", "median", "q95"])
def test_point_estimate_constant_draws(statistic):
    s = fake_run("half-normal", {"scale": np.full(200, 0.31)})
    spec = point_estimate_prior(s, statistic)
    assert spec.distribution == HalfNormal(0.31)
    assert spec.method == f"point_estimate({statistic})"


def test_point_estimate_mean_half_normal():
    draws = positive_draws_with_moments(0.22, 0.064, seed=3)
    spec = point_estimate_prior(fake_run("half-normal", {"scale": draws}))
    assert isinstance(spec.distribution, HalfNormal)
    assert spec.distribution.scale == pytest.approx(0.22, abs=1e-12)
    assert spec.note is None


def test_point_estimate_q95_is_flagged_conservative():
    draws = positive_draws_with_moments(0.22, 0.064, seed=4)
    spec = point_estimate_prior(fake_run("half-normal", {"scale": draws}), "q95")
    assert spec.note == "conservative"
    assert spec.distribution.scale == pytest.approx(np.quantile(draws, 0.95))


def test_point_estimate_q95_exceeds_mean_for_right_skewed_draws():
    draws = np.random.default_rng(8).exponential(0.2, 5000)
    run = fake_run("half-normal", {"scale": draws})
    lo = point_estimate_prior(run, "mean").distribution.scale
    hi = point_estimate_prior(run, "q95").distribution.scale
    assert hi > lo


@pytest.mark.parametrize(
    "family,expected_type", [("exp", Exponential), ("half-cauchy", HalfCauchy)]
)
def test_point_estimate_other_scale_families(family, expected_type):
    spec = point_estimate_prior(fake_run(family, {"scale": np.full(100, 0.15)}))
    assert isinstance(spec.distribution, expected_type)
    assert spec.distribution.scale == pytest.approx(0.15)


def test_point_estimate_log_normal_family():
    theta = np.full(500, 0.08)
    sigma = np.full(500, 1.4)
    spec = point_estimate_prior(fake_run("log-normal", {"theta": theta, "sigma": sigma}))
    assert isinstance(spec.distribution, LogNormal)
    assert spec.distribution.mu == pytest.approx(math.log(0.08))
    assert spec.distribution.sigma == pytest.approx(1.4)


def test_point_estimate_unknown_statistic():
    s = fake_run("half-normal", {"scale": np.full(100, 0.2)})
    with pytest.raises(ValueError, match="statistic"):
        point_estimate_prior(s, "mode")


# -- route 2: mixture matching --------------------------------------------------


def test_mixture_match_half_normal_gives_half_t():
    draws = positive_draws_with_moments(0.22, 0.064, seed=11)
    spec = mixture_match_prior(fake_run("half-normal", {"scale": draws}))
    assert spec.method == "mixture_match"
    expected = scale_mixture_half_t(0.22, 0.064)
    assert spec.distribution.df == pytest.approx(expected.df)
    assert spec.distribution.scale == pytest.approx(expected.scale)
    # the communicated values
    assert spec.distribution.df == pytest.approx(8.2, abs=0.2)
    assert spec.distribution.scale == pytest.approx(0.20, abs=0.01)


def test_mixture_match_exponential_gives_lomax():
    draws = positive_draws_with_moments(0.2, 0.2, seed=12)
    spec = mixture_match_prior(fake_run("exp", {"scale": draws}))
    expected = exp_mixture_lomax(0.2, 0.2)
    assert isinstance(spec.distribution, Lomax)
    assert spec.distribution.shape == pytest.approx(expected.shape)
    assert spec.distribution.scale == pytest.approx(expected.scale)
    assert spec.distribution.shape == pytest.approx(3.0)
    assert spec.distribution.scale == pytest.approx(0.4)


def test_mixture_match_log_normal_inflates_shape():
    rng = np.random.default_rng(13)
    theta = rng.lognormal(-2.6, 0.3, 4000)
    sigma = rng.uniform(1.2, 1.8, 4000)
    spec = mixture_match_prior(fake_run("log-normal", {"theta": theta, "sigma": sigma}))
    log_theta = np.log(theta)
    assert spec.distribution.mu == pytest.approx(log_theta.mean())
    expected_shape = math.sqrt(np.mean(sigma**2) + np.var(log_theta, ddof=1))
    assert spec.distribution.sigma == pytest.approx(expected_shape)
    # inflation: strictly wider than the average conditional shape
    assert spec.distribution.sigma > np.sqrt(np.mean(sigma**2)) - 1e-12


def test_mixture_match_log_normal_degenerate_draws_reduce_to_conditional():
    theta = np.full(300, 0.07)
    sigma = np.full(300, 1.6)
    spec = mixture_match_prior(fake_run("log-normal", {"theta": theta, "sigma": sigma}))
    assert spec.distribution.mu == pytest.approx(math.log(0.07))
    assert spec.distribution.sigma == pytest.approx(1.6)


def test_mixture_match_half_cauchy_unsupported():
    s = fake_run("half-cauchy", {"scale": np.full(100, 0.1)})
    with pytest.raises(ValueError, match="half-cauchy"):
        mixture_match_prior(s)


def test_mixture_match_zero_spread_half_normal_caps_df():
    s = fake_run("half-normal", {"scale": np.full(100, 0.25)})
    spec = mixture_match_prior(s)
    assert spec.distribution.df == NU_MAX
    assert spec.distribution.scale == pytest.approx(0.25, rel=1e-3)
    assert "degenerate" in spec.note


def test_mixture_match_zero_spread_exponential_stays_exponential():
    s = fake_run("exp", {"scale": np.full(100, 0.2)})
    spec = mixture_match_prior(s)
    assert isinstance(spec.distribution, Exponential)
    assert spec.distribution.scale == pytest.approx(0.2)
    assert "degenerate" in spec.note


# -- route 3a: maximum likelihood ----------------------------------------------


def test_ml_self_fit_half_normal():
    draws = HalfNormal(0.3).sample(np.random.default_rng(21), 100_000)
    spec = fit_predictive_ml(draws, "half-normal")
    assert spec.method == "direct_fit_ml"
    assert spec.distribution.scale == pytest.approx(0.3, abs=0.01)


def test_ml_self_fit_exponential():
    draws = Exponential(0.25).sample(np.random.default_rng(22), 100_000)
    spec = fit_predictive_ml(draws, "exp")
    assert spec.distribution.scale == pytest.approx(0.25, abs=0.01)


def test_ml_self_fit_half_t():
    draws = HalfStudentT(8.2, 0.2).sample(np.random.default_rng(23), 100_000)
    spec = fit_predictive_ml(draws, "half-t")
    assert spec.distribution.df == pytest.approx(8.2, abs=1.0)
    assert spec.distribution.scale == pytest.approx(0.2, abs=0.01)


def test_ml_self_fit_half_cauchy():
    draws = HalfCauchy(0.1).sample(np.random.default_rng(24), 100_000)
    spec = fit_predictive_ml(draws, "half-cauchy")
    assert spec.distribution.scale == pytest.approx(0.1, abs=0.01)


def test_ml_self_fit_log_normal():
    draws = LogNormal(-2.6, 1.7).sample(np.random.default_rng(25), 100_000)
    spec = fit_predictive_ml(draws, "log-normal")
    assert spec.distribution.mu == pytest.approx(-2.6, abs=0.05)
    assert spec.distribution.sigma == pytest.approx(1.7, abs=0.05)


def test_ml_self_fit_lomax():
    draws = Lomax(4.0, 1.0).sample(np.random.default_rng(26), 100_000)
    spec = fit_predictive_ml(draws, "lomax")
    assert spec.distribution.shape == pytest.approx(4.0, rel=0.1)
    assert spec.distribution.scale == pytest.approx(1.0, rel=0.1)


def test_ml_log_likelihood_is_reported_and_consistent():
    draws = HalfNormal(0.3).sample(np.random.default_rng(27), 5000)
    spec = fit_predictive_ml(draws, "half-normal")
    recomputed = float(np.sum(spec.distribution.log_density(draws)))
    assert spec.log_likelihood == pytest.approx(recomputed)


@pytest.mark.parametrize(
    "family,generator",
    [
        ("half-normal", HalfNormal(0.3)),
        ("exp", Exponential(0.2)),
        ("half-t", HalfStudentT(6.0, 0.3)),
        ("lomax", Lomax(4.0, 1.0)),
        ("log-normal", LogNormal(-2.0, 0.8)),
    ],
)
def test_ml_log_likelihood_at_least_moment_fit(family, generator):
    draws = generator.sample(np.random.default_rng(28), 5000)
    ml = fit_predictive_ml(draws, family)
    mm = fit_predictive_moments(draws, family)
    moment_ll = float(np.sum(mm.distribution.log_density(draws)))
    assert ml.log_likelihood >= moment_ll - 1e-6


def test_ml_requires_enough_draws():
    with pytest.raises(ValueError, match="1000"):
        fit_predictive_ml(np.full(999, 0.2), "exp")


def test_ml_rejects_unknown_family():
    with pytest.raises(ValueError, match="family"):
        fit_predictive_ml(np.full(2000, 0.2), "weibull")


def test_ml_nonconvergence_raises_fit_error(monkeypatch):
    fake = types.SimpleNamespace(
        success=False, message="budget exhausted", nfev=10_000, x=np.array([0.0]), fun=1.0
    )
    monkeypatch.setattr(
        "hetprior.summarize.optimize.minimize", lambda *a, **k: fake
    )
    with pytest.raises(FitError, match="did not converge"):
        fit_predictive_ml(np.full(2000, 0.2), "exp")


# -- route 3b: moment inversion -------------------------------------------------


def test_moment_fit_half_normal_closed_form():
    draws = positive_draws_with_moments(0.1755, 0.05, seed=31)
    spec = fit_predictive_moments(draws, "half-normal")
    assert spec.method == "direct_fit_moments"
    assert spec.distribution.scale == pytest.approx(0.1755 / math.sqrt(2.0 / math.pi))


def test_moment_fit_exponential_is_sample_mean():
    draws = positive_draws_with_moments(0.27, 0.1, seed=32)
    spec = fit_predictive_moments(draws, "exp")
    assert spec.distribution.scale == pytest.approx(0.27)


def test_moment_fit_half_t_matches_dist_op():
    draws = positive_draws_with_moments(0.5, 0.4, seed=33)
    spec = fit_predictive_moments(draws, "half-t")
    expected = half_t_moment_fit(0.5, 0.4)
    assert spec.distribution.df == pytest.approx(expected.df, rel=1e-9)
    assert spec.distribution.scale == pytest.approx(expected.scale, rel=1e-9)


def test_moment_fit_half_t_infeasible_cv_advises_half_normal():
    draws = positive_draws_with_moments(0.5, 0.2, seed=34)  # cv = 0.4
    with pytest.raises(InfeasibleError, match="half-normal"):
        fit_predictive_moments(draws, "half-t")


def test_moment_fit_lomax_recovers_exact_moments():
    target = Lomax(9.9, 1.5)
    m = target.moments()
    draws = positive_draws_with_moments(m.mean, m.sd, seed=35)
    spec = fit_predictive_moments(draws, "lomax")
    assert spec.distribution.shape == pytest.approx(9.9, rel=1e-9)
    assert spec.distribution.scale == pytest.approx(1.5, rel=1e-9)


def test_moment_fit_lomax_needs_cv_above_one():
    draws = positive_draws_with_moments(0.3, 0.2, seed=36)
    with pytest.raises(InfeasibleError, match="exponential"):
        fit_predictive_moments(draws, "lomax")


def test_moment_fit_log_normal_recovers_exact_moments():
    target = LogNormal(-2.6, 0.5)
    m = target.moments()
    draws = positive_draws_with_moments(m.mean, m.sd, seed=37)
    spec = fit_predictive_moments(draws, "log-normal")
    assert spec.distribution.mu == pytest.approx(-2.6, rel=1e-9)
    assert spec.distribution.sigma == pytest.approx(0.5, rel=1e-9)


def test_moment_fit_half_cauchy_impossible():
    with pytest.raises(ValueError, match="moment"):
        fit_predictive_moments(np.full(100, 0.1), "half-cauchy")


def test_moment_fit_rejects_unknown_family():
    with pytest.raises(ValueError, match="family"):
        fit_predictive_moments(np.full(100, 0.1), "gamma")


def test_moment_self_fit_half_t_converges():
    draws = HalfStudentT(8.2, 0.2).sample(np.random.default_rng(38), 100_000)
    spec = fit_predictive_moments(draws, "half-t")
    assert spec.distribution.df == pytest.approx(8.2, abs=1.0)
    assert spec.distribution.scale == pytest.approx(0.2, abs=0.01)


# -- approximation table ---------------------------------------------------------


def _table_row(rows, label_prefix):
    matches = [r for r in rows if r.label.startswith(label_prefix)]
    assert matches, f"no row starting with {label_prefix!r}"
    return matches[0]


def test_table_half_normal_and_half_t_rows():
    specs = [
        PriorSpec(HalfNormal(0.22), "point_estimate(mean)"),
        PriorSpec(HalfStudentT(8.2, 0.20), "mixture_match"),
    ]
    rows = approximation_table(specs)
    hn = _table_row(rows, "half-normal")
    assert (round(hn.mean, 2), round(hn.sd, 2)) == (0.18, 0.13)
    assert (round(hn.median, 2), round(hn.q95, 2), round(hn.q99, 2)) == (0.15, 0.43, 0.57)
    ht = _table_row(rows, "half-t")
    assert (round(ht.mean, 2), round(ht.sd, 2)) == (0.18, 0.15)
    assert (round(ht.median, 2), round(ht.q95, 2), round(ht.q99, 2)) == (0.14, 0.46, 0.67)


def test_table_heavy_tail_rows():
    specs = [
        PriorSpec(Lomax(9.9, 1.5), "mixture_match"),
        PriorSpec(LogNormal(-2.6, 1.7), "mixture_match"),
        PriorSpec(HalfCauchy(0.10), "point_estimate(mean)"),
    ]
    rows = approximation_table(specs)
    lo = _table_row(rows, "lomax")
    assert (round(lo.mean, 2), round(lo.sd, 2)) == (0.17, 0.19)
    assert (round(lo.median, 2), round(lo.q95, 2), round(lo.q99, 2)) == (0.11, 0.53, 0.89)
    ln = _table_row(rows, "log-normal")
    assert (round(ln.mean, 2), round(ln.sd, 2)) == (0.32, 1.30)
    assert (round(ln.median, 2), round(ln.q95, 2), round(ln.q99, 2)) == (0.07, 1.22, 3.88)
    hc = _table_row(rows, "half-cauchy")
    assert hc.mean is None and hc.sd is None
    assert (round(hc.median, 2), round(hc.q95, 2), round(hc.q99, 2)) == (0.10, 1.27, 6.37)


def test_table_empirical_row_comes_first():
    rng = np.random.default_rng(41)
    tau_star = np.abs(rng.normal(0, 0.2, (4, 500)))
    rows = approximation_table([PriorSpec(HalfNormal(0.2), "point_estimate(mean)")], tau_star)
    assert rows[0].label == "MCMC"
    assert rows[0].mean == pytest.approx(tau_star.mean())
    assert rows[0].median == pytest.approx(np.quantile(tau_star, 0.5))
    assert len(rows) == 2


def test_table_without_draws_has_no_empirical_row():
    rows = approximation_table([PriorSpec(HalfNormal(0.2), "point_estimate(mean)")])
    assert [r.label for r in rows] == ["half-normal(0.2)"]


def test_table_requires_specs():
    with pytest.raises(ValueError):
        approximation_table([])


def test_format_table_marks_undefined_cells():
    rows = approximation_table([PriorSpec(HalfCauchy(0.1), "point_estimate(mean)")])
    text = format_approximation_table(rows)
    lines = text.splitlines()
    assert "prior" in lines[0] and "99%" in lines[0]
    assert "-" in lines[1]
    assert "6.37" in lines[1]


def test_row_as_dict_round_trip():
    row = ApproximationRow("x", 0.1, None, 0.2, 0.3, 0.4)
    d = row.as_dict()
    assert d == {"label": "x", "mean": 0.1, "sd": None, "median": 0.2, "q95": 0.3, "q99": 0.4}


def test_q95_prior_stochastically_dominates_mean_prior():
    draws = np.random.default_rng(42).exponential(0.2, 20_000)
    run = fake_run("half-normal", {"scale": draws})
    lo = point_estimate_prior(run, "mean").distribution
    hi = point_estimate_prior(run, "q95").distribution
    grid = np.linspace(0.001, 2.0, 400)
    assert np.all(hi.cdf(grid) <= lo.cdf(grid) + 1e-12)


# -- PriorSpec serialization ------------------------------------------------------


def test_prior_spec_text_is_rounded_canonical_form():
    spec = PriorSpec(HalfStudentT(8.12831573264689, 0.19894516561113754), "mixture_match")
    assert spec.text() == "half-t(8.13,0.2)"
    assert spec.rounded_distribution() == HalfStudentT(8.13, 0.2)


def test_prior_spec_honors_rounding_level():
    spec = PriorSpec(HalfNormal(0.21949), "point_estimate(mean)", rounding=3)
    assert spec.text() == "half-normal(0.219)"


def test_prior_to_dict_keys_and_values():
    spec = PriorSpec(
        HalfNormal(0.21949),
        "point_estimate(mean)",
        source="corpus-v1",
        note="conservative",
        log_likelihood=-12.5,
    )
    d = prior_to_dict(spec)
    assert d["family"] == "half-normal"
    assert d["params"] == [0.21949]
    assert d["rounded"] == [0.22]
    assert d["text"] == "half-normal(0.22)"
    assert d["method"] == "point_estimate(mean)"
    assert d["source"] == "corpus-v1"
    assert d["rounding"] == 2
    assert d["note"] == "conservative"
    assert d["log_likelihood"] == -12.5


def test_prior_to_dict_omits_absent_optionals():
    d = prior_to_dict(PriorSpec(Exponential(0.2), "direct_fit_moments"))
    assert "note" not in d and "log_likelihood" not in d
