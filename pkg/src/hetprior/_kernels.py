"""Hot MCMC kernels: Gibbs/slice updates for the hierarchical model.

Two execution paths share this single source: the default compiles the
kernels with numba's ``@njit``; setting the environment variable
``HETPRIOR_NO_NUMBA`` (to any non-empty value) before import — or running
where numba is not installed — leaves them as pure Python. Both paths
consume the same ``numpy.random.Generator`` stream, so their output is
bit-identical; ``BACKEND`` reports which one is active.

Kernels take flattened study data (CSR-style ``offsets`` into ``y``/``se2``)
plus integer codes for the heterogeneity family and hyperprior families,
and write draws into caller-allocated output arrays.

Slice sampling uses stepping-out with shrinkage (initial width = current
value + 0.1, at most 50 step-outs per side). The shrinkage loop is capped
as an emergency guard; on the (pathological, interval below floating-point
resolution) cap it leaves the chain at its current state.
"""

import math
import os

import numpy as np

_use_numba = not os.environ.get("HETPRIOR_NO_NUMBA", "")
if _use_numba:
    try:
        from numba import njit
    except ImportError:
        _use_numba = False

if _use_numba:
    BACKEND = "numba"
else:
    BACKEND = "python"

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(func):
            return func

        return deco


# heterogeneity family codes
FAM_HALF_NORMAL = 0
FAM_EXP = 1
FAM_HALF_CAUCHY = 2
FAM_LOG_NORMAL = 3

# hyperprior family codes
HP_UNIFORM = 0
HP_HALF_NORMAL = 1
HP_EXP = 2
HP_HALF_CAUCHY = 3
HP_LOG_NORMAL = 4
HP_HALF_T = 5

_LOG_2PI = math.log(2.0 * math.pi)
_MAX_STEPOUT = 50
_MAX_SHRINK = 1000


@njit
def _het_logpdf(fam, th1, th2, x):
    """Log density of tau under the heterogeneity family; th1 is the scale
    (the log-normal's median), th2 the log-normal shape."""
    if x < 0.0:
        return -math.inf
    if fam == 0:
        return 0.5 * math.log(2.0 / math.pi) - math.log(th1) - 0.5 * (x / th1) ** 2
    if fam == 1:
        return -math.log(th1) - x / th1
    if fam == 2:
        z = x / th1
        return math.log(2.0 / math.pi) - math.log(th1) - math.log1p(z * z)
    # log-normal
    if x == 0.0:
        return -math.inf
    z = (math.log(x) - math.log(th1)) / th2
    return -math.log(x) - math.log(th2) - 0.5 * _LOG_2PI - 0.5 * z * z


@njit
def _hyper_logpdf(code, a, b, x):
    """Log density of a hyperparameter under its hyperprior."""
    if code == 0:
        if x < a or x > b:
            return -math.inf
        return -math.log(b - a)
    if x < 0.0:
        return -math.inf
    if code == 1:
        return 0.5 * math.log(2.0 / math.pi) - math.log(a) - 0.5 * (x / a) ** 2
    if code == 2:
        return -math.log(a) - x / a
    if code == 3:
        z = x / a
        return math.log(2.0 / math.pi) - math.log(a) - math.log1p(z * z)
    if code == 4:
        if x == 0.0:
            return -math.inf
        z = (math.log(x) - a) / b
        return -math.log(x) - math.log(b) - 0.5 * _LOG_2PI - 0.5 * z * z
    # half-t(df=a, scale=b)
    z = x / b
    return (
        math.log(2.0)
        + math.lgamma((a + 1.0) / 2.0)
        - math.lgamma(a / 2.0)
        - 0.5 * math.log(a * math.pi)
        - math.log(b)
        - (a + 1.0) / 2.0 * math.log1p(z * z / a)
    )


@njit
def _tau_logpost(tau, y, se2, i_lo, i_hi, mu_j, fam, th1, th2):
    """Log full conditional of one analysis' tau: likelihood + prior."""
    lp = _het_logpdf(fam, th1, th2, tau)
    if lp == -math.inf:
        return lp
    t2 = tau * tau
    for i in range(i_lo, i_hi):
        v = se2[i] + t2
        d = y[i] - mu_j
        lp += -0.5 * (math.log(v) + _LOG_2PI + d * d / v)
    return lp


@njit
def _hyper_logpost(val, which, th1, th2, tau, fam, code, a, b):
    """Log full conditional of hyperparameter `which` (0 = scale, 1 = shape)."""
    if which == 0:
        t1 = val
        t2 = th2
    else:
        t1 = th1
        t2 = val
    lp = _hyper_logpdf(code, a, b, val)
    if lp == -math.inf:
        return lp
    for j in range(tau.shape[0]):
        l_j = _het_logpdf(fam, t1, t2, tau[j])
        if l_j == -math.inf:
            return -math.inf
        lp += l_j
    return lp


@njit
def _slice_tau(x0, y, se2, i_lo, i_hi, mu_j, fam, th1, th2, rng):
    """One slice-sampling update of tau on [0, inf)."""
    w = x0 + 0.1
    logy = _tau_logpost(x0, y, se2, i_lo, i_hi, mu_j, fam, th1, th2) - rng.standard_exponential()
    left = x0 - w * rng.random()
    right = left + w
    if left < 0.0:
        left = 0.0
    steps = _MAX_STEPOUT
    while steps > 0 and left > 0.0 and _tau_logpost(left, y, se2, i_lo, i_hi, mu_j, fam, th1, th2) > logy:
        left -= w
        steps -= 1
    if left < 0.0:
        left = 0.0
    steps = _MAX_STEPOUT
    while steps > 0 and _tau_logpost(right, y, se2, i_lo, i_hi, mu_j, fam, th1, th2) > logy:
        right += w
        steps -= 1
    for _ in range(_MAX_SHRINK):
        x1 = left + rng.random() * (right - left)
        if _tau_logpost(x1, y, se2, i_lo, i_hi, mu_j, fam, th1, th2) > logy:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    return x0


@njit
def _slice_hyper(x0, which, th1, th2, tau, fam, code, a, b, lo, hi, rng):
    """One slice-sampling update of a hyperparameter on [lo, hi]."""
    w = x0 + 0.1
    logy = _hyper_logpost(x0, which, th1, th2, tau, fam, code, a, b) - rng.standard_exponential()
    left = x0 - w * rng.random()
    right = left + w
    if left < lo:
        left = lo
    if right > hi:
        right = hi
    steps = _MAX_STEPOUT
    while steps > 0 and left > lo and _hyper_logpost(left, which, th1, th2, tau, fam, code, a, b) > logy:
        left -= w
        steps -= 1
    if left < lo:
        left = lo
    steps = _MAX_STEPOUT
    while steps > 0 and right < hi and _hyper_logpost(right, which, th1, th2, tau, fam, code, a, b) > logy:
        right += w
        steps -= 1
    if right > hi:
        right = hi
    for _ in range(_MAX_SHRINK):
        x1 = left + rng.random() * (right - left)
        if _hyper_logpost(x1, which, th1, th2, tau, fam, code, a, b) > logy:
            return x1
        if x1 < x0:
            left = x1
        else:
            right = x1
    return x0


@njit
def _deviance(y, se2, offsets, mu, tau):
    """-2 log likelihood over all studies at the given (mu_j, tau_j)."""
    dev = 0.0
    for j in range(offsets.shape[0] - 1):
        t2 = tau[j] * tau[j]
        for i in range(offsets[j], offsets[j + 1]):
            v = se2[i] + t2
            d = y[i] - mu[j]
            dev += math.log(v) + _LOG_2PI + d * d / v
    return dev


@njit
def run_chain(
    y,
    se2,
    offsets,
    fam,
    hp1_code,
    hp1_a,
    hp1_b,
    hp1_lo,
    hp1_hi,
    hp2_code,
    hp2_a,
    hp2_b,
    hp2_lo,
    hp2_hi,
    mu_p,
    sp2,
    mu0,
    tau0,
    th10,
    th20,
    burn_in,
    kept,
    thin,
    rng,
    out_mu,
    out_tau,
    out_th,
    out_pred,
    out_dev,
):
    """Run one chain; write `kept` draws into the out arrays.

    One iteration: exact conjugate normal update for every mu_j, slice
    update for every tau_j, slice update(s) for the hyperparameter(s), one
    predictive draw from the heterogeneity family at the current
    hyperparameters, and the deviance at the current state.
    """
    n_analyses = offsets.shape[0] - 1
    mu = mu0.copy()
    tau = tau0.copy()
    th1 = th10
    th2 = th20
    total = burn_in + (kept - 1) * thin + 1
    k_idx = 0
    for it in range(total):
        for j in range(n_analyses):
            prec = 1.0 / sp2
            mw = mu_p / sp2
            t2 = tau[j] * tau[j]
            for i in range(offsets[j], offsets[j + 1]):
                wgt = 1.0 / (se2[i] + t2)
                prec += wgt
                mw += wgt * y[i]
            mu[j] = mw / prec + math.sqrt(1.0 / prec) * rng.standard_normal()
        for j in range(n_analyses):
            tau[j] = _slice_tau(
                tau[j], y, se2, offsets[j], offsets[j + 1], mu[j], fam, th1, th2, rng
            )
        th1 = _slice_hyper(
            th1, 0, th1, th2, tau, fam, hp1_code, hp1_a, hp1_b, hp1_lo, hp1_hi, rng
        )
        if fam == 3:
            th2 = _slice_hyper(
                th2, 1, th1, th2, tau, fam, hp2_code, hp2_a, hp2_b, hp2_lo, hp2_hi, rng
            )
        if fam == 0:
            pred = th1 * abs(rng.standard_normal())
        elif fam == 1:
            pred = th1 * rng.standard_exponential()
        elif fam == 2:
            pred = th1 * math.tan(math.pi * 0.5 * rng.random())
        else:
            pred = math.exp(math.log(th1) + th2 * rng.standard_normal())
        if it >= burn_in and (it - burn_in) % thin == 0:
            for j in range(n_analyses):
                out_mu[k_idx, j] = mu[j]
                out_tau[k_idx, j] = tau[j]
            out_th[k_idx, 0] = th1
            out_th[k_idx, 1] = th2
            out_pred[k_idx] = pred
            out_dev[k_idx] = _deviance(y, se2, offsets, mu, tau)
            k_idx += 1
    return k_idx
