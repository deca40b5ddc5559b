"""Weibull proportional-hazards math for interval-censored observations.

The intensity is ``h(t, x) = exp(g(x)) * (lam*t)^(k-1) * k * lam``; because
covariates are constant within an inspection interval, its integral over
``[t1, t2]`` has the closed form

    H = exp(g) * lam^k * (t2^k - t1^k)

and the probability of surviving the interval given survival to ``t1`` is
``exp(-H)``.  A pass/fail record then contributes a Bernoulli term with
success probability ``1 - exp(-H)``, giving the log-likelihood

    sum_i (1 - y_i) * log S_i + y_i * log(1 - S_i),   S_i = exp(-H_i).

Everything here works in unconstrained coordinates for the optimizers and
samplers: ``eta = log(lam)`` and ``kappa = log(k)``.  Gradients are returned
per record with respect to ``(g, eta, kappa)``; callers reduce them as their
parameterization requires.
"""

from __future__ import annotations

import numpy as np

# IEEE-754 guards: cap the cumulative hazard before exponentiation and floor
# failure probabilities inside logs.
CUM_HAZARD_CAP = 700.0
FAILURE_PROB_FLOOR = 1e-15


def _powdiff(t1, t2, k):
    """t2^k - t1^k, with t^k defined as 0 at t = 0.

    Overflow (wild shape values proposed during sampler warmup) is allowed
    to produce inf/nan here; downstream log-densities map those to -inf and
    the proposal is rejected.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return np.power(t2, k) - np.where(t1 > 0.0, np.power(t1, k), 0.0)


def cumulative_hazard(g, lam, k, t1, t2):
    """Integrated intensity over ``[t1, t2]``: exp(g) * lam^k * (t2^k - t1^k)."""
    g, lam, k, t1, t2 = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (g, lam, k, t1, t2))
    )
    if np.any(lam <= 0.0) or np.any(k <= 0.0):
        raise ValueError("lam and k must be positive")
    if np.any(t1 < 0.0) or np.any(t1 > t2):
        raise ValueError("need 0 <= t1 <= t2")
    out = np.exp(g) * np.power(lam, k) * _powdiff(t1, t2, k)
    return out if out.ndim else float(out)


def conditional_survival(g, lam, k, t1, t2):
    """P[survive to t2 | survived to t1] = exp(-cumulative_hazard)."""
    H = np.minimum(cumulative_hazard(g, lam, k, t1, t2), CUM_HAZARD_CAP)
    out = np.exp(-H)
    return out if np.ndim(out) else float(out)


def interval_failure_probability(g, lam, k, t1, t2):
    """1 - conditional_survival, computed stably for small hazards."""
    H = np.minimum(cumulative_hazard(g, lam, k, t1, t2), CUM_HAZARD_CAP)
    out = -np.expm1(-H)
    return out if np.ndim(out) else float(out)


def rate_from_reliability(R, k, t_fix):
    """Invert reliability at a fix time into a Weibull rate.

    Returns the unique ``lam`` with ``exp(-(lam*t_fix)^k) = R``, i.e.
    ``lam = (-ln R)^(1/k) / t_fix``.
    """
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0.0) or np.any(R >= 1.0):
        raise ValueError("R must lie strictly inside (0, 1)")
    if np.any(np.asarray(k) <= 0.0) or np.any(np.asarray(t_fix) <= 0.0):
        raise ValueError("k and t_fix must be positive")
    out = (-np.log(R)) ** (1.0 / np.asarray(k, dtype=float)) / t_fix
    return out if out.ndim else float(out)


def _hazard_terms(t1, t2, g, eta, kappa):
    """Cumulative hazard H and its partials wrt (g, eta, kappa), per record.

    H = exp(g + k*eta) * (t2^k - t1^k) with k = exp(kappa).  The kappa
    partial uses d(t^k)/dk = t^k * ln t (zero at t = 0).
    """
    k = np.exp(kappa)
    delta = _powdiff(t1, t2, k)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        logH = g + k * eta + np.log(delta)
        H = np.exp(np.minimum(logH, CUM_HAZARD_CAP))
        l2 = np.log(t2)
        safe_t1 = np.where(t1 > 0.0, t1, 1.0)
        dlogdelta_dk = (
            np.power(t2, k) * l2
            - np.where(t1 > 0.0, np.power(safe_t1, k) * np.log(safe_t1), 0.0)
        ) / delta
        dH_dg = H
        dH_deta = k * H
        dH_dkappa = k * H * (eta + dlogdelta_dk)
    return H, dH_dg, dH_deta, dH_dkappa


def _loglik_core(y, t1, t2, g, eta, kappa):
    """Per-record log-likelihood terms and gradients in (g, eta, kappa)."""
    H, dH_dg, dH_deta, dH_dkappa = _hazard_terms(t1, t2, g, eta, kappa)
    fail = y == 1
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        pfail = np.maximum(-np.expm1(-H), FAILURE_PROB_FLOOR)
        terms = np.where(fail, np.log(pfail), -H)
        # d(term)/dH: -1 on passes, exp(-H)/(1-exp(-H)) = 1/expm1(H) on failures
        dfail = 1.0 / np.expm1(H)
        dterm_dH = np.where(fail, dfail, -1.0)
        return terms, dterm_dH * dH_dg, dterm_dH * dH_deta, dterm_dH * dH_dkappa


def interval_log_likelihood(ds, g, lam, k):
    """Interval-censored log-likelihood of a dataset and its gradient.

    Parameters
    ----------
    ds : IntervalDataset
    g : array_like
        Covariate effect per record (scalar broadcasts).
    lam : array_like
        Weibull rate per record or shared (scalar broadcasts).
    k : float
        Shared shape parameter.

    Returns
    -------
    (float, dict)
        Total log-likelihood and per-record gradient arrays under keys
        ``"g"``, ``"eta"`` (= d/d log lam) and ``"kappa"`` (= d/d log k);
        callers sum entries that share a parameter.
    """
    _, y, t1, t2 = ds.arrays()
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0) or not k > 0.0:
        raise ValueError("lam and k must be positive")
    g = np.broadcast_to(np.asarray(g, dtype=float), y.shape)
    eta = np.broadcast_to(np.log(lam), y.shape)
    terms, dg, deta, dkappa = _loglik_core(y, t1, t2, g, eta, np.log(k))
    return float(np.sum(terms)), {"g": dg, "eta": deta, "kappa": dkappa}
