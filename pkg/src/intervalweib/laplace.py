"""Laplace posterior around the MAP with a generalized Gauss-Newton covariance.

The curvature of the interval-censored Bernoulli likelihood is accumulated
per record as ``J^T H J`` where ``J`` is the 2 x P Jacobian of the model
outputs ``(eta, kappa)`` and ``H`` the 2 x 2 negative Hessian of the
per-record log-likelihood with respect to those outputs.  Adding the prior
precision and inverting via Cholesky gives the Gaussian posterior
``N(phi*, Sigma)``.

The per-record ``H`` of this non-canonical link can be indefinite, so it is
eigenvalue-clipped to PSD by default (``psd=False`` exposes the raw
curvature, which for linear predictors reproduces the exact posterior
Hessian).

Two Monte-Carlo posterior predictives are provided: ``glm_predict`` pushes
samples through the first-order Taylor expansion of the network at the MAP,
``bnn_predict`` through the full nonlinear network.  For linear models they
coincide sample-for-sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, LinAlgError

from . import nn as _nn
from .survival import CUM_HAZARD_CAP, _loglik_core, _powdiff


def _link_parts(eta, kappa, t1, t2):
    """Value, gradient and Hessian of A = exp(k*eta)*(t2^k - t1^k) in the
    unconstrained coordinates (eta, kappa)."""
    with np.errstate(over="ignore", invalid="ignore"):
        k = np.exp(kappa)
        t1k = np.where(t1 > 0.0, np.power(np.maximum(t1, 1e-300), k), 0.0)
        t2k = np.power(t2, k)
        delta = t2k - t1k
        l1 = np.where(t1 > 0.0, np.log(np.maximum(t1, 1e-300)), 0.0)
        l2 = np.log(t2)
        E = np.exp(np.minimum(k * eta, CUM_HAZARD_CAP))
        A = E * delta
        d1 = t2k * l2 - t1k * l1          # d delta / d k
        d2 = t2k * l2**2 - t1k * l1**2    # d^2 delta / d k^2
        A_eta = k * A
        A_k = eta * A + E * d1
        A_kap = k * A_k
        A_ee = k**2 * A
        A_ek = k * A + k**2 * A_k
        A_kk_partial = eta**2 * A + 2.0 * eta * E * d1 + E * d2
        A_kaka = k * A_k + k**2 * A_kk_partial
    return A, (A_eta, A_kap), (A_ee, A_ek, A_kaka)


def link_hessian(y, z, t1, t2, psd=True):
    """2 x 2 negative Hessian of one record's log-likelihood wrt (eta, kappa).

    ``z = (eta, kappa)`` are the unconstrained model outputs.  With ``psd``
    the matrix is eigenvalue-clipped to the PSD cone; set ``psd=False`` for
    the raw curvature.
    """
    eta, kappa = float(z[0]), float(z[1])
    t1, t2 = float(t1), float(t2)
    if t1 == t2:
        return np.zeros((2, 2))
    A, (A_e, A_k), (A_ee, A_ek, A_kk) = _link_parts(eta, kappa, t1, t2)
    gradA = np.array([A_e, A_k])
    hessA = np.array([[A_ee, A_ek], [A_ek, A_kk]])
    if y == 0:
        # log p = -A, so the negative Hessian is +d2A
        H = hessA
    else:
        if A <= 0.0:
            return np.zeros((2, 2))
        # log p = log(1 - exp(-A)); with q = exp(-A), F = 1 - q:
        # d/dA = q/F, d2/dA2 = -q/F^2
        F = -np.expm1(-A)
        q_over_F = 1.0 / np.expm1(A)
        q_over_F2 = q_over_F / F
        H = q_over_F2 * np.outer(gradA, gradA) - q_over_F * hessA
    return _psd_clip_2x2(H) if psd else H


def _psd_clip_2x2(M):
    """Project a symmetric 2x2 matrix onto the PSD cone (clip eigenvalues)."""
    a, b, c = M[0, 0], M[0, 1], M[1, 1]
    mean = 0.5 * (a + c)
    r = np.hypot(0.5 * (a - c), b)
    lo, hi = mean - r, mean + r
    if lo >= 0.0:
        return M
    if hi <= 0.0:
        return np.zeros((2, 2))
    # keep only the positive eigenpair
    if abs(b) > 1e-300:
        v = np.array([hi - c, b])
    else:
        v = np.array([1.0, 0.0]) if a > c else np.array([0.0, 1.0])
    v = v / np.linalg.norm(v)
    return hi * np.outer(v, v)


def _link_hessian_batch(y, eta, kappa, t1, t2, psd=True):
    """Vectorized per-record H entries (H00, H01, H11)."""
    A, (A_e, A_k), (A_ee, A_ek, A_kk) = _link_parts(eta, kappa, t1, t2)
    fail = y == 1
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        F = -np.expm1(-A)
        q_over_F = 1.0 / np.expm1(A)
        q_over_F2 = q_over_F / F
    h00 = np.where(fail, q_over_F2 * A_e * A_e - q_over_F * A_ee, A_ee)
    h01 = np.where(fail, q_over_F2 * A_e * A_k - q_over_F * A_ek, A_ek)
    h11 = np.where(fail, q_over_F2 * A_k * A_k - q_over_F * A_kk, A_kk)
    degenerate = A <= 0.0
    h00 = np.where(degenerate, 0.0, h00)
    h01 = np.where(degenerate, 0.0, h01)
    h11 = np.where(degenerate, 0.0, h11)
    if not psd:
        return h00, h01, h11
    mean = 0.5 * (h00 + h11)
    r = np.hypot(0.5 * (h00 - h11), h01)
    lo = mean - r
    hi = mean + r
    neg_lo = lo < 0.0
    # rank-1 reconstruction from the positive eigenpair where clipping bites
    vx = np.where(np.abs(h01) > 1e-300, hi - h11, np.where(h00 >= h11, 1.0, 0.0))
    vy = np.where(np.abs(h01) > 1e-300, h01, np.where(h00 >= h11, 0.0, 1.0))
    norm = np.hypot(vx, vy)
    norm = np.where(norm > 0.0, norm, 1.0)
    vx, vy = vx / norm, vy / norm
    hi_pos = np.maximum(hi, 0.0)
    c00 = np.where(neg_lo, hi_pos * vx * vx, h00)
    c01 = np.where(neg_lo, hi_pos * vx * vy, h01)
    c11 = np.where(neg_lo, hi_pos * vy * vy, h11)
    return c00, c01, c11


def ggn_covariance(spec, phi, ds, rho, psd=True):
    """GGN posterior covariance: inv(sum_i J_i^T H_i J_i + rho*I).

    The Jacobian row for kappa is the unit vector, so the accumulation
    splits into the eta-Jacobian outer product plus kappa cross terms.
    """
    if rho <= 0.0:
        raise ValueError("prior precision must be positive")
    P = spec.n_params
    prec = rho * np.eye(P)
    if len(ds) > 0:
        X, y, t1, t2 = ds.arrays()
        eta = _nn.forward_eta(spec, phi, X)
        kappa = phi[spec.kappa_index]
        h00, h01, h11 = _link_hessian_batch(y, eta, kappa, t1, t2, psd=psd)
        Jeta = _nn.eta_jacobian(spec, phi, X)
        kidx = spec.kappa_index
        prec += (Jeta * h00[:, None]).T @ Jeta
        cross = Jeta.T @ h01
        prec[:, kidx] += cross
        prec[kidx, :] += cross
        prec[kidx, kidx] += float(np.sum(h11))
    try:
        cf = cho_factor(prec, lower=True)
    except LinAlgError as exc:
        raise LinAlgError(f"GGN precision is not positive definite: {exc}") from exc
    Sigma = cho_solve(cf, np.eye(P))
    return 0.5 * (Sigma + Sigma.T)


def log_marginal_likelihood(log_post_at_map, Sigma, n_params):
    """Laplace evidence: l(phi*) + (P/2) log(2 pi) + 0.5 log det Sigma."""
    sign, logdet = np.linalg.slogdet(Sigma)
    if sign <= 0.0 or not np.isfinite(logdet):
        raise ValueError("posterior covariance has a non-positive determinant")
    return float(log_post_at_map + 0.5 * n_params * np.log(2.0 * np.pi) + 0.5 * logdet)


@dataclass(frozen=True)
class LaplacePosterior:
    """Gaussian parameter posterior N(phi, Sigma) with its evidence value."""

    spec: _nn.MlpSpec
    phi: np.ndarray
    Sigma: np.ndarray
    rho: float
    log_marginal: float

    def scale_factor(self):
        """Matrix L with L L^T = Sigma (Cholesky; eigen fallback for the
        degenerate Sigma = 0 posterior used in plug-in checks)."""
        try:
            return cholesky(self.Sigma, lower=True)
        except LinAlgError:
            w, V = np.linalg.eigh(self.Sigma)
            return V * np.sqrt(np.clip(w, 0.0, None))


def fit_laplace(spec, ds, cfg):
    """MAP-train then wrap the GGN Gaussian around the optimum.

    Returns ``(MapResult, LaplacePosterior)``.
    """
    result = _nn.map_train(spec, ds, cfg)
    Sigma = ggn_covariance(spec, result.phi, ds, cfg.precision)
    lp, _ = _nn.log_posterior(spec, result.phi, ds, cfg.precision)
    evidence = log_marginal_likelihood(lp, Sigma, spec.n_params)
    return result, LaplacePosterior(
        spec=spec, phi=result.phi, Sigma=Sigma, rho=cfg.precision,
        log_marginal=evidence,
    )


def tune_precision(spec, phi, ds, rho_grid):
    """Post-hoc prior precision selection by the Laplace evidence.

    The MAP is held fixed; only the prior term and the covariance are
    recomputed per candidate.  Ties break toward the smaller precision.
    Returns ``(rho_star, evidences)`` aligned with the input grid.
    """
    rho_grid = list(rho_grid)
    if not rho_grid:
        raise ValueError("precision grid is empty")
    X, yv, t1, t2 = ds.arrays()
    eta = _nn.forward_eta(spec, phi, X)
    terms, _, _, _ = _loglik_core(yv, t1, t2, 0.0, eta, phi[spec.kappa_index])
    loglik = float(np.sum(terms))
    evidences = []
    for rho in rho_grid:
        Sigma = ggn_covariance(spec, phi, ds, rho)
        lp = loglik + _nn.log_prior(phi, rho)
        evidences.append(log_marginal_likelihood(lp, Sigma, spec.n_params))
    best = 0
    for i in range(1, len(rho_grid)):
        better = evidences[i] > evidences[best]
        tie_smaller = evidences[i] == evidences[best] and rho_grid[i] < rho_grid[best]
        if better or tie_smaller:
            best = i
    return rho_grid[best], np.asarray(evidences)


@dataclass(frozen=True)
class PredictiveConfig:
    n_samples: int = 100
    mode: str = "glm"           # {"glm", "bnn", "map"}
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("need at least one predictive sample")
        if self.mode not in ("glm", "bnn", "map"):
            raise ValueError(f"unknown predictive mode {self.mode!r}")


@dataclass(frozen=True)
class PredictiveResult:
    """Posterior predictive failure probabilities per record."""

    mean: np.ndarray        # (n,)
    samples: np.ndarray     # (S, n); single row in "map" mode


def _fail_prob(eta, kappa, t1, t2):
    k = np.exp(kappa)
    logH = k * eta + np.log(_powdiff(t1, t2, k))
    H = np.exp(np.minimum(logH, CUM_HAZARD_CAP))
    return -np.expm1(-H)


def _mc_mean(p):
    """Shifted Monte-Carlo mean: exact when all draws coincide (degenerate
    posterior) and less cancellation-prone otherwise."""
    return p[0] + (p - p[0]).mean(axis=0)


def _draw_params(posterior, S, seed):
    L = posterior.scale_factor()
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((S, posterior.phi.size))
    return posterior.phi + z @ L.T


def glm_predict(spec, posterior, X, t1, t2, cfg=PredictiveConfig()):
    """Monte-Carlo predictive through the linearized network (MAP tangent)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t1 = np.broadcast_to(np.asarray(t1, dtype=float), (X.shape[0],))
    t2 = np.broadcast_to(np.asarray(t2, dtype=float), (X.shape[0],))
    eta_map = _nn.forward_eta(spec, posterior.phi, X)
    if cfg.mode == "map":
        # same broadcast shapes as the sampled path so results match bitwise
        p = _fail_prob(eta_map[None, :],
                       np.array([[posterior.phi[spec.kappa_index]]]), t1, t2)
        return PredictiveResult(mean=p[0], samples=p)
    Jeta = _nn.eta_jacobian(spec, posterior.phi, X)
    draws = _draw_params(posterior, cfg.n_samples, cfg.seed)
    dphi = draws - posterior.phi
    etas = eta_map + dphi @ Jeta.T                      # (S, n)
    kappas = draws[:, spec.kappa_index]                 # linear in phi already
    p = _fail_prob(etas, kappas[:, None], t1, t2)
    return PredictiveResult(mean=_mc_mean(p), samples=p)


def bnn_predict(spec, posterior, X, t1, t2, cfg=PredictiveConfig(mode="bnn")):
    """Monte-Carlo predictive through the full nonlinear network."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t1 = np.broadcast_to(np.asarray(t1, dtype=float), (X.shape[0],))
    t2 = np.broadcast_to(np.asarray(t2, dtype=float), (X.shape[0],))
    if cfg.mode == "map":
        eta_map = _nn.forward_eta(spec, posterior.phi, X)
        p = _fail_prob(eta_map[None, :],
                       np.array([[posterior.phi[spec.kappa_index]]]), t1, t2)
        return PredictiveResult(mean=p[0], samples=p)
    draws = _draw_params(posterior, cfg.n_samples, cfg.seed)
    p = np.empty((cfg.n_samples, X.shape[0]))
    for s in range(cfg.n_samples):
        eta = _nn.forward_eta(spec, draws[s], X)
        p[s] = _fail_prob(eta[None, :],
                          np.array([[draws[s, spec.kappa_index]]]), t1, t2)[0]
    return PredictiveResult(mean=_mc_mean(p), samples=p)


def reliability_draw_arrays(spec, posterior, X, cfg=PredictiveConfig()):
    """Sampled ``(g, lam, k)`` arrays for reliability-curve rendering.

    Returns ``g`` of zeros (the network folds covariates into the rate),
    ``lam`` of shape (S, n_items) and ``k`` of shape (S,).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    draws = _draw_params(posterior, cfg.n_samples, cfg.seed)
    kappas = draws[:, spec.kappa_index]
    if cfg.mode == "glm":
        eta_map = _nn.forward_eta(spec, posterior.phi, X)
        Jeta = _nn.eta_jacobian(spec, posterior.phi, X)
        etas = eta_map + (draws - posterior.phi) @ Jeta.T
    else:
        etas = np.vstack([_nn.forward_eta(spec, d, X) for d in draws])
    lam = np.exp(etas)
    return np.zeros_like(lam), lam, np.exp(kappas)
