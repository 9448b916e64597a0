"""Tests for the single meta-analysis module (grid Bayes + frequentist suite)."""

import math

import numpy as np
import pytest

from hetprior.data import parse_collection
from hetprior.dist import (
    HalfCauchy,
    HalfNormal,
    HalfStudentT,
    LogNormal,
    Lomax,
    Normal,
    Uniform,
)
from hetprior.metaanalysis import (
    DlResult,
    GridError,
    LabeledInterval,
    SingleMeta,
    UndefinedEstimatorError,
    bayes_ma,
    ci_suite,
    dl_estimate,
    forest_rows,
    pm_estimate,
    single_meta,
    tau_estimate_collection,
    tau_marginal,
)
from hetprior.sampler import McmcConfig, ModelSpec, run_hierarchical
from hetprior.summarize import PriorSpec

T_1_975 = 12.706204736432095
Z_975 = 1.959963984540054


def random_meta(rng, k=5, spread=1.0):
    return SingleMeta(
        y=tuple(rng.normal(0.0, spread, k)),
        sigma=tuple(rng.uniform(0.2, 1.0, k)),
    )


# -- SingleMeta ------------------------------------------------------------------


def test_single_meta_basics():
    sm = SingleMeta(y=(0.1, 0.2), sigma=(0.5, 0.6))
    assert sm.k == 2


@pytest.mark.parametrize(
    "y,sigma",
    [
        ((), ()),
        ((0.1,), (0.5, 0.6)),
        ((0.1, float("nan")), (0.5, 0.6)),
        ((0.1, 0.2), (0.5, 0.0)),
        ((0.1, 0.2), (0.5, -1.0)),
        ((0.1, 0.2), (0.5, float("inf"))),
    ],
)
def test_single_meta_rejects_bad_input(y, sigma):
    with pytest.raises(ValueError):
        SingleMeta(y=y, sigma=sigma)


def test_single_meta_from_collection():
    text = (
        "analysis_id,study_id,estimate,std_err\n"
        "a,s1,0.1,0.5\n"
        "a,s2,0.3,0.4\n"
        "b,s1,0.0,1.0\n"
    )
    c = parse_collection(text)
    sm = single_meta(c, "a")
    assert sm.y == (0.1, 0.3)
    assert sm.sigma == (0.5, 0.4)
    with pytest.raises(ValueError, match="analysis_id"):
        single_meta(c)


# -- tau marginal ----------------------------------------------------------------


def test_single_study_posterior_equals_prior():
    sm = SingleMeta(y=(0.4,), sigma=(0.5,))
    prior = HalfStudentT(8.2, 0.20)
    td = tau_marginal(sm, prior)
    sup = np.max(np.abs(td.density - prior.density(td.grid)))
    assert sup < 1e-3
    assert abs(td.integral() - 1.0) < 1e-6


def test_two_identical_studies_barely_move_the_prior():
    sm = SingleMeta(y=(0.2, 0.2), sigma=(0.5, 0.5))
    prior = HalfStudentT(8.2, 0.20)
    td = tau_marginal(sm, prior)
    assert abs(td.median() - prior.quantile(0.5)) < 0.02


def test_tau_marginal_matches_mcmc_oracle():
    # pin the hyperparameter so the hierarchical sampler reduces to a fixed
    # half-normal(0.3) heterogeneity prior on a single analysis
    y = (0.1, 0.5, -0.2, 0.3)
    sigma = (0.2, 0.25, 0.3, 0.22)
    rows = ["analysis_id,study_id,estimate,std_err"]
    rows += [f"a,s{i},{yi},{si}" for i, (yi, si) in enumerate(zip(y, sigma))]
    c = parse_collection("\n".join(rows) + "\n")
    m = ModelSpec(
        het_family="half-normal",
        scale_hyperprior=Uniform(0.3 * (1 - 1e-9), 0.3 * (1 + 1e-9)),
    )
    s = run_hierarchical(c, m, McmcConfig(chains=2, burn_in=500, iterations=6000, seed=77))
    mcmc_median = float(np.quantile(s.draws("tau[a]"), 0.5))
    td = tau_marginal(SingleMeta(y=y, sigma=sigma), HalfNormal(0.3))
    assert abs(td.median() - mcmc_median) < 0.01


def test_tau_marginal_normalizes_heavy_tailed_priors():
    sm = SingleMeta(y=(0.1, 0.4), sigma=(0.3, 0.3))
    td = tau_marginal(sm, HalfCauchy(0.1))
    assert abs(td.integral() - 1.0) < 1e-6
    assert np.all(td.density >= 0.0)


def test_tau_marginal_extends_past_bounded_priors():
    sm = SingleMeta(y=(0.1,), sigma=(0.5,))
    td = tau_marginal(sm, Uniform(0.0, 0.8))
    assert abs(td.integral() - 1.0) < 1e-6
    # posterior == prior: flat at 1/0.8 inside the support (the trapezoid
    # cell straddling the support edge biases the normalizer by ~2e-3)
    inside = td.grid < 0.79
    assert np.allclose(td.density[inside], 1.25, atol=5e-3)
    assert np.all(td.density[td.grid > 0.81] == 0.0)


def test_tau_marginal_rejects_prior_without_finite_quantile():
    class Diverging(HalfNormal):
        def quantile(self, p):
            return float("inf")

    sm = SingleMeta(y=(0.1, 0.2), sigma=(0.5, 0.5))
    with pytest.raises(GridError, match="quantile"):
        tau_marginal(sm, Diverging(0.2))


def test_tau_marginal_rejects_nondecaying_posterior():
    class ImproperFlat(HalfNormal):
        def quantile(self, p):
            return 1.0

        def log_density(self, x):
            return np.zeros_like(np.asarray(x, dtype=float))

    sm = SingleMeta(y=(0.1,), sigma=(0.5,))
    with pytest.raises(GridError, match="decay"):
        tau_marginal(sm, ImproperFlat(0.2))


# -- Bayesian meta-analysis -------------------------------------------------------


def test_symmetric_data_centers_posterior_at_zero():
    sm = SingleMeta(y=(0.0, 0.0), sigma=(1.0, 1.0))
    res = bayes_ma(sm, HalfNormal(0.5))
    assert res.mu_mean == pytest.approx(0.0, abs=1e-12)
    assert res.mu_median == pytest.approx(0.0, abs=1e-9)
    assert res.mu_interval[0] == pytest.approx(-res.mu_interval[1], abs=1e-9)


def test_degenerate_prior_reproduces_common_effect_interval():
    sm = SingleMeta(y=(0.1, 0.7, 0.4), sigma=(0.3, 0.4, 0.5))
    res = bayes_ma(sm, HalfNormal(1e-8))
    w = 1.0 / np.asarray(sm.sigma) ** 2
    mu = float(np.sum(w * sm.y) / w.sum())
    half = Z_975 * math.sqrt(1.0 / w.sum())
    assert res.mu_interval[0] == pytest.approx(mu - half, abs=1e-3)
    assert res.mu_interval[1] == pytest.approx(mu + half, abs=1e-3)
    assert res.mu_mean == pytest.approx(mu, abs=1e-3)


def test_heterogeneity_prior_widens_equal_study_interval():
    sm = SingleMeta(y=(0.41, 0.41), sigma=(0.3, 0.3))
    res = bayes_ma(sm, HalfStudentT(8.2, 0.20))
    normal = next(ci for ci in res.comparators if ci.label == "normal")
    bayes_width = res.mu_interval[1] - res.mu_interval[0]
    normal_width = normal.hi - normal.lo
    assert 1.0 < bayes_width / normal_width < 1.3


def test_mu_density_integrates_to_one_and_sd_floor():
    rng = np.random.default_rng(3)
    for _ in range(3):
        sm = random_meta(rng)
        res = bayes_ma(sm, HalfNormal(0.4))
        assert abs(res.mu_density.integral() - 1.0) < 1e-6
        v0 = 1.0 / np.sum(1.0 / np.asarray(sm.sigma) ** 2)
        assert res.mu_sd >= math.sqrt(v0) - 1e-12
        lo, hi = res.mu_interval
        assert lo <= res.mu_median <= hi


TABLE_PRIORS = [
    HalfNormal(0.22),
    HalfStudentT(8.2, 0.20),
    Lomax(9.9, 1.5),
    LogNormal(-2.6, 1.7),
    HalfCauchy(0.10),
]


def test_stochastically_larger_prior_never_shortens_interval():
    # The published prior set is not mutually stochastically ordered, so
    # scaled-up variants provide the dominating partners.
    priors = TABLE_PRIORS + [
        HalfNormal(0.5),
        HalfStudentT(8.2, 0.4),
        HalfCauchy(0.2),
        Lomax(9.9, 3.0),
    ]
    grid = np.geomspace(1e-4, 50.0, 400)
    sm = SingleMeta(y=(0.1, 0.6, 0.3), sigma=(0.25, 0.35, 0.3))
    widths = {}
    for prior in priors:
        res = bayes_ma(sm, prior, comparators=False)
        widths[prior] = res.mu_interval[1] - res.mu_interval[0]
    checked = 0
    for a in priors:
        for b in priors:
            if a is b:
                continue
            if np.all(a.cdf(grid) >= b.cdf(grid) - 1e-12):  # b stochastically larger
                checked += 1
                assert widths[b] >= widths[a] - 1e-9
    assert checked >= 4  # the augmented set contains ordered pairs


def test_informative_effect_prior_pulls_and_tightens():
    sm = SingleMeta(y=(1.0,), sigma=(0.5,))
    flat = bayes_ma(sm, HalfNormal(0.2))
    informative = bayes_ma(sm, HalfNormal(0.2), mu_prior=Normal(0.0, 0.1))
    assert informative.mu_mean < flat.mu_mean
    assert informative.mu_sd < flat.mu_sd
    # a very diffuse proper prior is indistinguishable from the flat default
    diffuse = bayes_ma(sm, HalfNormal(0.2), mu_prior=Normal(0.0, 1e6))
    assert diffuse.mu_mean == pytest.approx(flat.mu_mean, abs=1e-5)
    assert diffuse.mu_sd == pytest.approx(flat.mu_sd, rel=1e-5)


def test_invalid_effect_prior_type():
    sm = SingleMeta(y=(0.1, 0.2), sigma=(0.5, 0.5))
    with pytest.raises(TypeError, match="Normal"):
        bayes_ma(sm, HalfNormal(0.2), mu_prior=HalfNormal(1.0))


def test_prior_spec_is_carried_through():
    sm = SingleMeta(y=(0.1, 0.2), sigma=(0.5, 0.5))
    spec = PriorSpec(HalfNormal(0.22), "point_estimate(mean)", source="corpus")
    res = bayes_ma(sm, spec)
    assert res.prior is spec
    res2 = bayes_ma(sm, HalfNormal(0.22))
    assert res2.prior.distribution == HalfNormal(0.22)


# -- DL and PM estimates -----------------------------------------------------------


def test_dl_identical_studies():
    assert dl_estimate(SingleMeta(y=(0.0, 0.0), sigma=(1.0, 1.0))) == DlResult(0.0, 0.0)


def test_dl_hand_evaluated_example():
    res = dl_estimate(SingleMeta(y=(0.0, 2.0), sigma=(1.0, 1.0)))
    assert res.q == pytest.approx(2.0)
    assert res.tau == pytest.approx(1.0)


def test_dl_truncates_at_zero():
    res = dl_estimate(SingleMeta(y=(0.0, 0.5), sigma=(1.0, 1.0)))
    assert res.tau == 0.0
    assert res.q == pytest.approx(0.125)


def test_pm_hand_evaluated_example():
    assert pm_estimate(SingleMeta(y=(0.0, 2.0), sigma=(1.0, 1.0))) == pytest.approx(1.0, abs=1e-7)


def test_pm_identical_studies():
    assert pm_estimate(SingleMeta(y=(0.3, 0.3), sigma=(0.5, 1.0))) == 0.0


def test_pm_equals_dl_for_equal_sigmas():
    rng = np.random.default_rng(9)
    for _ in range(5):
        y = tuple(rng.normal(0.0, 2.0, 6))
        sm = SingleMeta(y=y, sigma=(0.7,) * 6)
        dl = dl_estimate(sm).tau
        if dl == 0.0:
            continue
        assert pm_estimate(sm) == pytest.approx(dl, abs=1e-6)


@pytest.mark.parametrize("func", [dl_estimate, pm_estimate])
def test_estimators_need_two_studies(func):
    with pytest.raises(UndefinedEstimatorError):
        func(SingleMeta(y=(0.1,), sigma=(0.5,)))


@pytest.mark.parametrize("c", [0.5, 2.7])
def test_scale_equivariance(c):
    rng = np.random.default_rng(11)
    sm = random_meta(rng, k=6, spread=1.5)
    scaled = SingleMeta(
        y=tuple(c * v for v in sm.y), sigma=tuple(c * s for s in sm.sigma)
    )
    assert dl_estimate(scaled).tau == pytest.approx(c * dl_estimate(sm).tau, rel=1e-9)
    assert pm_estimate(scaled) == pytest.approx(c * pm_estimate(sm), rel=1e-5, abs=1e-7)


# -- confidence interval suite ------------------------------------------------------


def test_ci_suite_hand_evaluated_example():
    sm = SingleMeta(y=(0.0, 2.0), sigma=(1.0, 1.0))
    normal, hksj, mkh = ci_suite(sm, 1.0)
    assert normal.estimate == pytest.approx(1.0)
    assert normal.lo == pytest.approx(1.0 - Z_975, abs=1e-9)
    assert normal.hi == pytest.approx(1.0 + Z_975, abs=1e-9)
    assert hksj.lo == pytest.approx(1.0 - T_1_975, abs=1e-9)
    assert hksj.hi == pytest.approx(1.0 + T_1_975, abs=1e-9)
    assert mkh.lo == hksj.lo and mkh.hi == hksj.hi


def test_ci_suite_equal_estimates_pathology():
    sm = SingleMeta(y=(0.3, 0.3, 0.3), sigma=(0.5, 0.4, 0.6))
    normal, hksj, mkh = ci_suite(sm, 0.0)
    assert hksj.hi - hksj.lo == pytest.approx(0.0, abs=1e-12)
    t = 4.302652729911275  # t_{2, 0.975}
    assert (mkh.hi - mkh.lo) / (normal.hi - normal.lo) == pytest.approx(t / Z_975)


def test_mkh_at_least_as_wide_as_normal():
    rng = np.random.default_rng(13)
    for _ in range(50):
        sm = random_meta(rng, k=int(rng.integers(2, 8)))
        tau = float(rng.uniform(0.0, 1.0))
        normal, _, mkh = ci_suite(sm, tau)
        assert mkh.hi - mkh.lo >= normal.hi - normal.lo - 1e-12


def test_ci_suite_translation_equivariance():
    rng = np.random.default_rng(15)
    sm = random_meta(rng, k=4)
    shifted = SingleMeta(y=tuple(v + 0.73 for v in sm.y), sigma=sm.sigma)
    for a, b in zip(ci_suite(sm, 0.2), ci_suite(shifted, 0.2)):
        assert b.estimate == pytest.approx(a.estimate + 0.73, abs=1e-9)
        assert b.lo == pytest.approx(a.lo + 0.73, abs=1e-9)
        assert b.hi == pytest.approx(a.hi + 0.73, abs=1e-9)


def test_ci_suite_validation():
    sm = SingleMeta(y=(0.1, 0.2), sigma=(0.5, 0.5))
    with pytest.raises(UndefinedEstimatorError):
        ci_suite(SingleMeta(y=(0.1,), sigma=(0.5,)), 0.1)
    with pytest.raises(ValueError, match="tau_hat"):
        ci_suite(sm, -0.1)


def test_k2_equal_estimates_reproduce_common_effect():
    sm = SingleMeta(y=(0.21, 0.21), sigma=(0.3, 0.5))
    dl = dl_estimate(sm)
    assert dl.tau == 0.0
    normal, _, _ = ci_suite(sm, dl.tau)
    w = 1.0 / np.asarray(sm.sigma) ** 2
    mu = float(np.sum(w * sm.y) / w.sum())
    assert normal.estimate == pytest.approx(mu)
    assert normal.hi - normal.lo == pytest.approx(2 * Z_975 / math.sqrt(w.sum()))


# -- collection-level estimates ------------------------------------------------------


def corpus_csv(analyses):
    rows = ["analysis_id,study_id,estimate,std_err"]
    for aid, studies in analyses:
        rows += [f"{aid},s{i},{y},{s}" for i, (y, s) in enumerate(studies)]
    return "\n".join(rows) + "\n"


def test_identical_y_corpus_is_all_zero():
    c = parse_collection(
        corpus_csv(
            [
                ("a", [(0.2, 0.5), (0.2, 0.4)]),
                ("b", [(1.0, 0.3), (1.0, 0.3), (1.0, 0.2)]),
            ]
        )
    )
    est = tau_estimate_collection(c, "DL")
    assert est.summary()["fraction_zero"] == 1.0
    assert est.summary()["mean"] == 0.0
    assert est.summary()["median"] == 0.0
    assert est.skipped == ()


def test_single_study_analyses_are_skipped_with_warning():
    c = parse_collection(
        corpus_csv(
            [
                ("a", [(0.0, 1.0), (2.0, 1.0)]),
                ("solo", [(0.5, 0.4)]),
            ]
        )
    )
    with pytest.warns(UserWarning, match="solo"):
        est = tau_estimate_collection(c, "DL")
    assert est.skipped == ("solo",)
    assert dict(est.estimates)["a"] == pytest.approx(1.0)
    assert est.summary()["n"] == 1


def test_pm_collection_matches_per_analysis_estimates():
    c = parse_collection(
        corpus_csv(
            [
                ("a", [(0.0, 1.0), (2.0, 1.0)]),
                ("b", [(0.1, 0.4), (0.3, 0.5), (0.9, 0.3)]),
            ]
        )
    )
    est = tau_estimate_collection(c, "pm")
    assert est.method == "PM"
    for aid, tau in est.estimates:
        sm = single_meta(c, aid)
        assert tau == pytest.approx(pm_estimate(sm))


def test_tau_estimate_collection_validation():
    c = parse_collection(corpus_csv([("solo", [(0.5, 0.4)])]))
    with pytest.raises(ValueError, match="method"):
        tau_estimate_collection(c, "REML")
    with pytest.warns(UserWarning):
        with pytest.raises(ValueError, match="2 studies"):
            tau_estimate_collection(c, "DL")


# -- forest rows -----------------------------------------------------------------


def test_forest_rows_layout():
    sm = SingleMeta(y=(0.1, 0.5), sigma=(0.3, 0.4))
    res = bayes_ma(sm, HalfStudentT(8.2, 0.20))
    rows = forest_rows(sm, res, labels=["alpha", "beta"])
    assert [r["label"] for r in rows[:2]] == ["alpha", "beta"]
    assert rows[0]["estimate"] == 0.1
    assert rows[0]["lo"] == pytest.approx(0.1 - Z_975 * 0.3)
    weights = [float(r["weight_or_type"]) for r in rows[:2]]
    assert sum(weights) == pytest.approx(1.0)
    bayes_row = rows[2]
    assert bayes_row["label"].startswith("bayes [half-t(8.2,0.2)]")
    assert bayes_row["weight_or_type"] == "posterior"
    comparator_labels = [r["label"] for r in rows[3:]]
    assert comparator_labels == ["normal", "hksj", "mkh", "common-effect"]
    assert all(r["weight_or_type"] == "comparator" for r in rows[3:])


def test_forest_rows_default_labels_and_validation():
    sm = SingleMeta(y=(0.1, 0.5), sigma=(0.3, 0.4))
    res = bayes_ma(sm, HalfNormal(0.22))
    rows = forest_rows(sm, res)
    assert rows[0]["label"] == "study 1"
    with pytest.raises(ValueError, match="labels"):
        forest_rows(sm, res, labels=["only-one"])


def test_labeled_interval_ordering_enforced():
    with pytest.raises(ValueError, match="lo"):
        LabeledInterval("x", 0.0, 1.0, -1.0)
