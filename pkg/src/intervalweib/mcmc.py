"""No-U-Turn sampling for the interval-censored Weibull regressions.

The kernel is a multinomial NUTS with a doubling trajectory tree, the
standard U-turn stopping rule on the tree edges (velocities, not raw
momenta, under a diagonal metric), dual-averaging step-size adaptation
toward a target acceptance statistic, and windowed diagonal mass-matrix
adaptation during warmup.  Divergences are flagged when the energy error
along the trajectory exceeds ``delta_max``.

Three model families share the kernel, all sampled in unconstrained
coordinates:

* baseline: reliability-at-fix-time and shape, ``(logit R, log k)``, with
  the rate recovered through the reliability inversion;
* linear regression: adds coefficients ``theta`` with a standard-normal
  prior (covariates are standardized, so unit variance is the natural
  scale);
* spike-and-slab regression: ``theta`` gets a two-component normal mixture
  prior whose indicator is marginalized analytically; posterior inclusion
  probabilities are the mean slab responsibilities over draws.

Chains are independent, each seeded from ``(seed, chain)``, so runs are
bit-for-bit reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln, logit, ndtri

from .survival import _loglik_core

DELTA_MAX = 1000.0  # energy error beyond which a trajectory is divergent


@dataclass(frozen=True)
class NutsConfig:
    chains: int = 4
    warmup: int = 20000
    draws: int = 1000
    target_accept: float = 0.99
    max_depth: int = 10
    seed: int = 0
    init_jitter: float = 0.5

    def __post_init__(self):
        if self.chains < 1 or self.draws < 1 or self.warmup < 1:
            raise ValueError("chains, warmup and draws must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must be in (0, 1)")
        if not 1 <= self.max_depth <= 12:
            raise ValueError("max_depth must be in [1, 12]")


@dataclass(frozen=True)
class ParamDiagnostics:
    rhat: float
    ess: float
    mcse: float


@dataclass
class PosteriorSamples:
    """Per-chain posterior draws with convergence diagnostics.

    ``draws`` has shape (chains, kept, n_params) on the reported
    (natural) scale.
    """

    names: list
    draws: np.ndarray
    divergences: np.ndarray
    config: NutsConfig
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def param(self, name):
        """All chains' draws of one parameter, flattened."""
        j = self.names.index(name)
        return self.draws[:, :, j].reshape(-1)

    def flat(self):
        return self.draws.reshape(-1, self.draws.shape[2])

    def to_json(self):
        return {
            "names": list(self.names),
            "draws": self.draws.tolist(),
            "divergences": self.divergences.tolist(),
            "config": {
                "chains": self.config.chains,
                "warmup": self.config.warmup,
                "draws": self.config.draws,
                "target_accept": self.config.target_accept,
                "max_depth": self.config.max_depth,
                "seed": self.config.seed,
                "init_jitter": self.config.init_jitter,
            },
            "diagnostics": {
                k: [v.rhat, v.ess, v.mcse] for k, v in self.diagnostics.items()
            },
            "warnings": list(self.warnings),
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, obj):
        return cls(
            names=list(obj["names"]),
            draws=np.asarray(obj["draws"]),
            divergences=np.asarray(obj["divergences"]),
            config=NutsConfig(**obj["config"]),
            diagnostics={
                k: ParamDiagnostics(*v) for k, v in obj["diagnostics"].items()
            },
            warnings=list(obj.get("warnings", [])),
            meta=dict(obj.get("meta", {})),
        )


# ---------------------------------------------------------------------------
# Convergence diagnostics
# ---------------------------------------------------------------------------

def _split_chains(x):
    """(C, n) -> (2C, n//2): first and second halves (odd middle dropped)."""
    n = x.shape[1]
    h = n // 2
    return np.vstack([x[:, :h], x[:, n - h :]])


def _rank_normalize(x):
    """Fractional-rank normal scores across all chains pooled."""
    flat = x.reshape(-1)
    order = np.argsort(flat, kind="stable")
    ranks = np.empty_like(flat)
    ranks[order] = np.arange(1, flat.size + 1, dtype=float)
    # average ranks over ties
    sorted_vals = flat[order]
    i = 0
    while i < flat.size:
        j = i
        while j + 1 < flat.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = 0.5 * (i + 1 + j + 1)
        i = j + 1
    z = ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(x.shape)


def _rhat(x):
    """Rank-normalized split R-hat of draws shaped (chains, n)."""
    if x.shape[0] < 2 and x.shape[1] < 4:
        return float("nan")
    s = _split_chains(np.asarray(x, dtype=float))
    if np.ptp(s) == 0.0:
        return float("nan")
    z = _rank_normalize(s)
    m, n = z.shape
    if n < 2:
        return float("nan")
    means = z.mean(axis=1)
    W = z.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W <= 0.0:
        return float("nan")
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


def _autocovariance(y):
    """Biased (1/n) autocovariance of one chain via FFT."""
    n = y.size
    y = y - y.mean()
    size = 1
    while size < 2 * n:
        size <<= 1
    f = np.fft.rfft(y, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    return acov


def _ess(x):
    """Effective sample size over split chains, Geyer initial sequences."""
    s = _split_chains(np.asarray(x, dtype=float))
    m, n = s.shape
    if n < 4 or np.ptp(s) == 0.0:
        return float("nan")
    acov = np.vstack([_autocovariance(s[c]) for c in range(m)])
    chain_var = s.var(axis=1, ddof=1)
    W = chain_var.mean()
    means = s.mean(axis=1)
    B_over_n = means.var(ddof=1) if m > 1 else 0.0
    var_plus = (n - 1) / n * W + B_over_n
    if var_plus <= 0.0:
        return float("nan")
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    # Geyer: sum consecutive pairs while positive, enforcing monotonicity
    tau = 0.0
    prev_pair = None
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        if prev_pair is not None:
            pair = min(pair, prev_pair)
        tau += pair
        prev_pair = pair
        t += 2
    tau = max(2.0 * tau - 1.0, 1e-12)
    return float(m * n / tau)


def diagnostics(chain_draws):
    """Per-parameter (rhat, ess, mcse) for draws shaped (chains, n, P).

    With a single chain R-hat is reported as NaN; MCSE is posterior
    standard deviation over sqrt(ESS).
    """
    x = np.asarray(chain_draws, dtype=float)
    if x.ndim != 3:
        raise ValueError("expected draws shaped (chains, n, params)")
    out = []
    for j in range(x.shape[2]):
        col = x[:, :, j]
        rhat = _rhat(col) if x.shape[0] > 1 else float("nan")
        ess = _ess(col)
        sd = col.reshape(-1).std(ddof=1) if col.size > 1 else float("nan")
        mcse = sd / math.sqrt(ess) if np.isfinite(ess) and ess > 0 else float("nan")
        out.append(ParamDiagnostics(rhat=rhat, ess=ess, mcse=mcse))
    return out


# ---------------------------------------------------------------------------
# NUTS kernel
# ---------------------------------------------------------------------------

@dataclass
class _Tree:
    q_back: np.ndarray
    p_back: np.ndarray
    grad_back: np.ndarray
    q_front: np.ndarray
    p_front: np.ndarray
    grad_front: np.ndarray
    q_prop: np.ndarray
    logp_prop: float
    grad_prop: np.ndarray
    log_weight: float
    divergent: bool
    turned: bool


def _leapfrog(logdens, q, p, grad, eps, inv_mass):
    p = p + 0.5 * eps * grad
    q = q + eps * inv_mass * p
    logp, grad = logdens(q)
    if np.all(np.isfinite(grad)):
        p = p + 0.5 * eps * grad
    return q, p, grad, logp


def _kinetic(p, inv_mass):
    return 0.5 * float(np.sum(inv_mass * p * p))


def _uturn(q_minus, q_plus, p_minus, p_plus, inv_mass):
    dq = q_plus - q_minus
    return (
        float(dq @ (inv_mass * p_minus)) < 0.0
        or float(dq @ (inv_mass * p_plus)) < 0.0
    )


def _build_tree(logdens, rng, q, p, grad, depth, direction, eps, inv_mass, H0, stats):
    if depth == 0:
        q1, p1, grad1, logp1 = _leapfrog(logdens, q, p, grad, direction * eps, inv_mass)
        if np.isfinite(logp1):
            H = -logp1 + _kinetic(p1, inv_mass)
            log_w = H0 - H
        else:
            log_w = -np.inf
        divergent = not np.isfinite(log_w) or -log_w > DELTA_MAX
        stats["alpha"] += math.exp(min(0.0, log_w)) if np.isfinite(log_w) else 0.0
        stats["n_alpha"] += 1
        stats["n_leapfrog"] += 1
        return _Tree(q1, p1, grad1, q1, p1, grad1, q1, logp1, grad1,
                     log_w, divergent, False)
    inner = _build_tree(
        logdens, rng, q, p, grad, depth - 1, direction, eps, inv_mass, H0, stats
    )
    if inner.divergent or inner.turned:
        return inner
    outer = _build_tree(
        logdens, rng, inner.q_front, inner.p_front, inner.grad_front,
        depth - 1, direction, eps, inv_mass, H0, stats,
    )
    merged_log_w = np.logaddexp(inner.log_weight, outer.log_weight)
    if outer.divergent:
        prop = inner  # discarded upstream anyway
    elif math.log(rng.uniform()) < outer.log_weight - merged_log_w:
        prop = outer
    else:
        prop = inner
    if direction > 0:
        q_minus, p_minus = inner.q_back, inner.p_back
        q_plus, p_plus = outer.q_front, outer.p_front
    else:
        q_minus, p_minus = outer.q_front, outer.p_front
        q_plus, p_plus = inner.q_back, inner.p_back
    turned = (
        outer.turned
        or _uturn(q_minus, q_plus, p_minus, p_plus, inv_mass)
    )
    return _Tree(
        inner.q_back, inner.p_back, inner.grad_back,
        outer.q_front, outer.p_front, outer.grad_front,
        prop.q_prop, prop.logp_prop, prop.grad_prop,
        merged_log_w, outer.divergent, turned,
    )


def _transition(logdens, rng, q, logp, grad, eps, inv_mass, max_depth):
    P = q.size
    p0 = rng.standard_normal(P) / np.sqrt(inv_mass)
    H0 = -logp + _kinetic(p0, inv_mass)
    stats = {"alpha": 0.0, "n_alpha": 0, "n_leapfrog": 0}
    q_minus = q_plus = q
    p_minus = p_plus = p0
    grad_minus = grad_plus = grad
    prop_q, prop_logp, prop_grad = q, logp, grad
    log_w_total = 0.0
    divergent = False
    depth = 0
    while depth < max_depth:
        direction = 1 if rng.uniform() < 0.5 else -1
        if direction > 0:
            sub = _build_tree(
                logdens, rng, q_plus, p_plus, grad_plus,
                depth, direction, eps, inv_mass, H0, stats,
            )
        else:
            sub = _build_tree(
                logdens, rng, q_minus, p_minus, grad_minus,
                depth, direction, eps, inv_mass, H0, stats,
            )
        if sub.divergent:
            divergent = True
            break
        if sub.turned:
            break
        # biased progressive sampling toward the new subtree
        if math.log(rng.uniform()) < sub.log_weight - log_w_total:
            prop_q, prop_logp, prop_grad = sub.q_prop, sub.logp_prop, sub.grad_prop
        log_w_total = np.logaddexp(log_w_total, sub.log_weight)
        if direction > 0:
            q_plus, p_plus, grad_plus = sub.q_front, sub.p_front, sub.grad_front
        else:
            q_minus, p_minus, grad_minus = sub.q_front, sub.p_front, sub.grad_front
        depth += 1
        if _uturn(q_minus, q_plus, p_minus, p_plus, inv_mass):
            break
    accept_stat = stats["alpha"] / max(stats["n_alpha"], 1)
    return prop_q, prop_logp, prop_grad, accept_stat, divergent


def _find_reasonable_epsilon(logdens, rng, q, logp, grad, inv_mass):
    eps = 1.0
    P = q.size
    p = rng.standard_normal(P) / np.sqrt(inv_mass)
    H0 = -logp + _kinetic(p, inv_mass)

    def joint_delta(eps_try):
        q1, p1, _, logp1 = _leapfrog(logdens, q, p, grad, eps_try, inv_mass)
        if not np.isfinite(logp1):
            return -np.inf
        return H0 - (-logp1 + _kinetic(p1, inv_mass))

    delta = joint_delta(eps)
    a = 1.0 if delta > math.log(0.5) else -1.0
    for _ in range(60):
        if a * delta <= -a * math.log(2.0):
            break
        eps *= 2.0**a
        if not 1e-10 < eps < 1e7:
            break
        delta = joint_delta(eps)
    return eps


class _DualAveraging:
    """Nesterov dual averaging on log step size (standard constants)."""

    def __init__(self, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.h_bar = 0.0
        self.log_eps_bar = math.log(eps0)
        self.m = 0
        self.log_eps = math.log(eps0)

    def update(self, accept_stat):
        self.m += 1
        frac = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept_stat)
        self.log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        w = self.m ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)


class _Welford:
    def __init__(self, dim):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def push(self, x):
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def variance(self):
        if self.n < 2:
            return None
        return self.m2 / (self.n - 1)


def _mass_windows(warmup):
    """End indices (1-based warmup iterations) of mass adaptation windows."""
    if warmup < 40:
        return []
    init_buf = max(1, int(0.15 * warmup))
    term_buf = max(1, int(0.10 * warmup))
    if warmup < 150:
        return [warmup - term_buf]
    ends = []
    start = init_buf
    size = 25
    while True:
        end = start + size
        if end + 2 * size + term_buf > warmup:
            ends.append(warmup - term_buf)
            return ends
        ends.append(end)
        start = end
        size *= 2


def _run_chain(logdens, q0, cfg, rng):
    logp, grad = logdens(q0)
    if not np.isfinite(logp):
        raise ValueError("log density is not finite at the initial point")
    P = q0.size
    inv_mass = np.ones(P)
    q, lp, gr = q0.copy(), logp, grad

    eps = _find_reasonable_epsilon(logdens, rng, q, lp, gr, inv_mass)
    da = _DualAveraging(eps, cfg.target_accept)
    windows = set(_mass_windows(cfg.warmup))
    welford = _Welford(P)
    for m in range(1, cfg.warmup + 1):
        q, lp, gr, accept, _ = _transition(
            logdens, rng, q, lp, gr, eps, inv_mass, cfg.max_depth
        )
        eps = da.update(accept)
        welford.push(q)
        if m in windows:
            var = welford.variance()
            if var is not None:
                n = welford.n
                inv_mass = n / (n + 5.0) * var + 1e-3 * (5.0 / (n + 5.0))
                inv_mass = np.maximum(inv_mass, 1e-10)
            welford = _Welford(P)
            eps = _find_reasonable_epsilon(logdens, rng, q, lp, gr, inv_mass)
            da = _DualAveraging(eps, cfg.target_accept)
    eps = math.exp(da.log_eps_bar)

    draws = np.empty((cfg.draws, P))
    divergences = 0
    for i in range(cfg.draws):
        q, lp, gr, _, div = _transition(
            logdens, rng, q, lp, gr, eps, inv_mass, cfg.max_depth
        )
        divergences += int(div)
        draws[i] = q
    return draws, divergences


def nuts_sample(logdens, init, cfg, names=None, transform=None, meta=None):
    """Sample a differentiable log density with NUTS.

    Parameters
    ----------
    logdens : callable
        ``q -> (log_density, gradient)`` on the unconstrained space.
    init : array_like
        Starting point; each chain adds seeded jitter.
    cfg : NutsConfig
    names : list of str, optional
        Parameter names on the reported scale.
    transform : callable, optional
        Maps unconstrained draws ``(n, P) -> (n, P')`` to the reported
        scale (identity by default).
    """
    init = np.asarray(init, dtype=float)
    P = init.size
    chain_draws = []
    divergences = np.zeros(cfg.chains, dtype=int)
    for c in range(cfg.chains):
        rng = np.random.default_rng([cfg.seed, c])
        q0 = init + cfg.init_jitter * rng.uniform(-1.0, 1.0, P)
        draws, div = _run_chain(logdens, q0, cfg, rng)
        chain_draws.append(draws)
        divergences[c] = div
    raw = np.stack(chain_draws)
    if transform is not None:
        nat = np.stack([transform(raw[c]) for c in range(cfg.chains)])
    else:
        nat = raw
    if names is None:
        names = [f"x{j}" for j in range(nat.shape[2])]
    diags = diagnostics(nat)
    warnings_ = []
    total_div = int(divergences.sum())
    if total_div > 0.25 * cfg.chains * cfg.draws:
        warnings_.append(
            f"{total_div} divergences in {cfg.chains * cfg.draws} draws (>25%); "
            "posterior geometry is likely pathological"
        )
    return PosteriorSamples(
        names=list(names),
        draws=nat,
        divergences=divergences,
        config=cfg,
        diagnostics={n: d for n, d in zip(names, diags)},
        warnings=warnings_,
        meta=dict(meta or {}),
    )


# ---------------------------------------------------------------------------
# Model log densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BaselinePriors:
    """Priors for the no-covariate model: R ~ Beta(a, b) at ``t_fix``,
    k ~ LogNormal(mu, sd)."""

    t_fix: float = 1.0
    reliability_alpha: float = 5.0
    reliability_beta: float = 1.0
    log_shape_mean: float = 0.0
    log_shape_sd: float = 1.0


@dataclass(frozen=True)
class SpikeSlabConfig:
    """Two-normal mixture prior; the slab must be much wider than the spike."""

    spike_var: float = 0.0025
    slab_var: float = 1.0
    inclusion_prob: float = 0.5
    nmig_hypervariance: bool = False
    ig_shape: float = 3.0
    ig_scale: float = 2.0  # inverse-gamma scale on the slab variance

    def __post_init__(self):
        if min(self.spike_var, self.slab_var) <= 0.0:
            raise ValueError("variances must be positive")
        if self.slab_var / self.spike_var < 100.0:
            raise ValueError(
                "slab_var/spike_var must be at least 100 for an identifiable "
                "spike-and-slab mixture"
            )
        if not 0.0 < self.inclusion_prob < 1.0:
            raise ValueError("inclusion_prob must be in (0, 1)")


def _reliability_terms(u_r, u_k, priors):
    """Map (logit R, log k) to the global log-rate eta and prior terms."""
    # double precision is exhausted far inside these bounds; the prior mass
    # beyond them rounds to zero, so rejecting outright is exact
    if not (-700.0 < u_r < 700.0 and -700.0 < u_k < 700.0):
        return None
    R = float(expit(u_r))
    k = math.exp(u_k)
    if not 0.0 < R < 1.0:
        return None
    neg_log_R = -math.log(R)
    if neg_log_R <= 0.0:
        return None
    L = math.log(neg_log_R)
    eta = L / k - math.log(priors.t_fix)
    deta_du_r = -(1.0 - R) / (k * neg_log_R)
    deta_du_k = -L / k
    a, b = priors.reliability_alpha, priors.reliability_beta
    # Beta prior plus the logit Jacobian, expressed directly in u_r
    log_prior_r = (
        a * math.log(R) + b * math.log1p(-R)
        - (gammaln(a) + gammaln(b) - gammaln(a + b))
    )
    dlog_prior_r = a * (1.0 - R) - b * R
    sd = priors.log_shape_sd
    mu = priors.log_shape_mean
    log_prior_k = -0.5 * ((u_k - mu) / sd) ** 2 - math.log(sd) - 0.5 * math.log(2 * math.pi)
    dlog_prior_k = -(u_k - mu) / sd**2
    return R, k, eta, deta_du_r, deta_du_k, log_prior_r, dlog_prior_r, log_prior_k, dlog_prior_k


def _baseline_transform(priors):
    def transform(draws_u):
        R = expit(draws_u[:, 0])
        k = np.exp(draws_u[:, 1])
        return np.column_stack([R, k])

    return transform


def baseline_log_density(ds, priors=BaselinePriors()):
    """(log density, gradient) closure over (logit R, log k)."""
    _, y, t1, t2 = ds.arrays()

    def logdens(u):
        parts = _reliability_terms(u[0], u[1], priors)
        if parts is None:
            return -np.inf, np.zeros(2)
        R, k, eta, de_dr, de_dk, lp_r, dlp_r, lp_k, dlp_k = parts
        terms, _, deta, dkappa = _loglik_core(y, t1, t2, 0.0, eta, u[1])
        ll = float(np.sum(terms))
        s_eta = float(np.sum(deta))
        s_kap = float(np.sum(dkappa))
        g = np.array(
            [s_eta * de_dr + dlp_r, s_kap + s_eta * de_dk + dlp_k]
        )
        return ll + lp_r + lp_k, g

    return logdens


def fit_baseline(ds, cfg, priors=BaselinePriors()):
    """Sample the no-covariate model; reports (R, k) on the natural scale."""
    logdens = baseline_log_density(ds, priors)
    init = np.array([logit(priors.reliability_alpha
                           / (priors.reliability_alpha + priors.reliability_beta)),
                     priors.log_shape_mean])
    return nuts_sample(
        logdens, init, cfg, names=["R", "k"],
        transform=_baseline_transform(priors),
        meta={"model": "baseline", "t_fix": priors.t_fix},
    )


def _theta_names(F):
    return [f"theta[{j}]" for j in range(F)]


def linear_mvn_log_density(ds, priors=BaselinePriors()):
    """(log density, gradient) over (theta, logit R, log k); theta ~ N(0, I)."""
    X, y, t1, t2 = ds.arrays()
    F = X.shape[1]

    def logdens(u):
        theta = u[:F]
        parts = _reliability_terms(u[F], u[F + 1], priors)
        if parts is None:
            return -np.inf, np.zeros(F + 2)
        R, k, eta, de_dr, de_dk, lp_r, dlp_r, lp_k, dlp_k = parts
        gvals = X @ theta
        terms, dg, deta, dkappa = _loglik_core(y, t1, t2, gvals, eta, u[F + 1])
        ll = float(np.sum(terms))
        s_eta = float(np.sum(deta))
        s_kap = float(np.sum(dkappa))
        lp_theta = -0.5 * float(theta @ theta) - 0.5 * F * math.log(2 * math.pi)
        grad = np.empty(F + 2)
        grad[:F] = X.T @ dg - theta
        grad[F] = s_eta * de_dr + dlp_r
        grad[F + 1] = s_kap + s_eta * de_dk + dlp_k
        return ll + lp_theta + lp_r + lp_k, grad

    return logdens


def _regression_transform(F, priors):
    def transform(draws_u):
        out = draws_u.copy()
        out[:, F] = expit(draws_u[:, F])
        out[:, F + 1] = np.exp(draws_u[:, F + 1])
        return out

    return transform


def fit_linear_mvn(ds, cfg, priors=BaselinePriors()):
    """Linear Weibull regression with a standard-normal coefficient prior."""
    F = ds.n_features
    logdens = linear_mvn_log_density(ds, priors)
    init = np.zeros(F + 2)
    init[F] = logit(
        priors.reliability_alpha / (priors.reliability_alpha + priors.reliability_beta)
    )
    init[F + 1] = priors.log_shape_mean
    return nuts_sample(
        logdens, init, cfg, names=_theta_names(F) + ["R", "k"],
        transform=_regression_transform(F, priors),
        meta={"model": "linear-mvn", "t_fix": priors.t_fix},
    )


def _slab_responsibility(theta, ss, slab_var=None):
    """Posterior probability each coefficient came from the slab component."""
    theta = np.asarray(theta, dtype=float)
    v2 = ss.slab_var if slab_var is None else slab_var
    log_spike = (
        math.log1p(-ss.inclusion_prob)
        - 0.5 * theta**2 / ss.spike_var
        - 0.5 * np.log(2 * math.pi * ss.spike_var)
    )
    log_slab = (
        math.log(ss.inclusion_prob)
        - 0.5 * theta**2 / v2
        - 0.5 * np.log(2 * math.pi * v2)
    )
    m = np.logaddexp(log_spike, log_slab)
    return np.exp(log_slab - m), m


def _mixture_prior_continuous(theta, ss):
    """NMIG-style fixed-variance mixture evaluated as a single density."""
    r, m = _slab_responsibility(theta, ss)
    grad = -theta * (r / ss.slab_var + (1.0 - r) / ss.spike_var)
    return float(np.sum(m)), grad


def _mixture_prior_discrete(theta, ss):
    """Indicator-marginalized form: enumerate gamma in {0, 1} per feature."""
    comps = np.stack(
        [
            math.log1p(-ss.inclusion_prob)
            - 0.5 * theta**2 / ss.spike_var
            - 0.5 * np.log(2 * math.pi * ss.spike_var),
            math.log(ss.inclusion_prob)
            - 0.5 * theta**2 / ss.slab_var
            - 0.5 * np.log(2 * math.pi * ss.slab_var),
        ]
    )
    m = np.logaddexp.reduce(comps, axis=0)
    w = np.exp(comps - m)
    dcomps = np.stack([-theta / ss.spike_var, -theta / ss.slab_var])
    grad = np.sum(w * dcomps, axis=0)
    return float(np.sum(m)), grad


def spike_slab_log_density(ds, ss, mode="continuous_nmig", priors=BaselinePriors()):
    """(log density, gradient) over (theta, logit R, log k[, log v2_f ...]).

    Both modes marginalize the inclusion indicators analytically; they differ
    in how the mixture is assembled (direct density vs. enumeration), which
    keeps them independently checkable.  The optional NMIG hypervariance adds
    one log-slab-variance latent per feature with an inverse-gamma prior.
    """
    if mode not in ("continuous_nmig", "discrete_marginalized"):
        raise ValueError(f"unknown spike-slab mode {mode!r}")
    X, y, t1, t2 = ds.arrays()
    F = X.shape[1]
    hyper = ss.nmig_hypervariance and mode == "continuous_nmig"
    mix = _mixture_prior_continuous if mode == "continuous_nmig" else _mixture_prior_discrete

    def logdens(u):
        theta = u[:F]
        parts = _reliability_terms(u[F], u[F + 1], priors)
        if parts is None:
            return -np.inf, np.zeros(u.size)
        R, k, eta, de_dr, de_dk, lp_r, dlp_r, lp_k, dlp_k = parts
        gvals = X @ theta
        terms, dg, deta, dkappa = _loglik_core(y, t1, t2, gvals, eta, u[F + 1])
        ll = float(np.sum(terms))
        s_eta = float(np.sum(deta))
        s_kap = float(np.sum(dkappa))
        grad = np.empty(u.size)
        if hyper:
            w = u[F + 2 :]
            v2 = np.exp(w)
            r, m = _slab_responsibility(theta, ss, slab_var=v2)
            lp_theta = float(np.sum(m))
            grad[:F] = X.T @ dg - theta * (r / v2 + (1.0 - r) / ss.spike_var)
            # IG(a, b) on v2 plus the log-variance Jacobian
            a, b = ss.ig_shape, ss.ig_scale
            lp_v = float(
                np.sum(a * math.log(b) - gammaln(a) - a * w - b * np.exp(-w))
            )
            grad[F + 2 :] = (
                r * (0.5 * theta**2 / v2 - 0.5) - a + b * np.exp(-w)
            )
            lp_theta += lp_v
        else:
            lp_theta, dtheta_prior = mix(theta, ss)
            grad[:F] = X.T @ dg + dtheta_prior
        grad[F] = s_eta * de_dr + dlp_r
        grad[F + 1] = s_kap + s_eta * de_dk + dlp_k
        return ll + lp_theta + lp_r + lp_k, grad

    return logdens


def fit_spike_slab(ds, ss, mode, cfg, priors=BaselinePriors()):
    """Spike-and-slab linear regression.

    Returns ``(PosteriorSamples, pip)`` where ``pip[f]`` is the mean slab
    responsibility of feature ``f`` over all draws.
    """
    F = ds.n_features
    hyper = ss.nmig_hypervariance and mode == "continuous_nmig"
    logdens = spike_slab_log_density(ds, ss, mode, priors)
    P = F + 2 + (F if hyper else 0)
    init = np.zeros(P)
    init[F] = logit(
        priors.reliability_alpha / (priors.reliability_alpha + priors.reliability_beta)
    )
    init[F + 1] = priors.log_shape_mean
    names = _theta_names(F) + ["R", "k"]
    if hyper:
        init[F + 2 :] = math.log(ss.slab_var)
        names += [f"log_slab_var[{j}]" for j in range(F)]

    def transform(draws_u):
        out = draws_u.copy()
        out[:, F] = expit(draws_u[:, F])
        out[:, F + 1] = np.exp(draws_u[:, F + 1])
        return out

    samples = nuts_sample(
        logdens, init, cfg, names=names, transform=transform,
        meta={"model": f"spike-slab-{mode}", "t_fix": priors.t_fix},
    )
    pip = compute_pip(samples, ss)
    return samples, pip


def compute_pip(samples, ss):
    """Posterior inclusion probability per feature: mean slab responsibility."""
    thetas = [n for n in samples.names if n.startswith("theta[")]
    pip = np.empty(len(thetas))
    for j, name in enumerate(thetas):
        r, _ = _slab_responsibility(samples.param(name), ss)
        pip[j] = float(np.mean(r))
    return pip


# ---------------------------------------------------------------------------
# Posterior predictive adapters
# ---------------------------------------------------------------------------

def _thin_indices(n, max_draws):
    if n <= max_draws:
        return np.arange(n)
    step = n / max_draws
    return np.unique((np.arange(max_draws) * step).astype(int))


def _rate_draws(samples):
    from .survival import rate_from_reliability

    t_fix = float(samples.meta.get("t_fix", 1.0))
    R = samples.param("R")
    k = samples.param("k")
    return rate_from_reliability(R, k, t_fix), k


def predict_failure_probability(samples, X, t1, t2, max_draws=1000):
    """Posterior-mean failure probability over each record's own interval."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    lam, k = _rate_draws(samples)
    idx = _thin_indices(lam.size, max_draws)
    lam, k = lam[idx], k[idx]
    theta_names = [n for n in samples.names if n.startswith("theta[")]
    if theta_names:
        theta = np.column_stack([samples.param(n)[idx] for n in theta_names])
        g = theta @ X.T                        # (S, n)
    else:
        g = np.zeros((lam.size, X.shape[0]))
    kk = k[:, None]
    H = np.exp(g) * lam[:, None] ** kk * (t2[None, :] ** kk - np.where(t1 > 0, t1, 0.0)[None, :] ** kk)
    p = -np.expm1(-np.minimum(H, 700.0))
    return p.mean(axis=0)


def reliability_draw_arrays(samples, X=None, max_draws=500):
    """Sampled (g, lam, k) arrays for reliability-curve rendering."""
    lam, k = _rate_draws(samples)
    idx = _thin_indices(lam.size, max_draws)
    lam, k = lam[idx], k[idx]
    theta_names = [n for n in samples.names if n.startswith("theta[")]
    if theta_names and X is not None:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        theta = np.column_stack([samples.param(n)[idx] for n in theta_names])
        g = theta @ X.T
    else:
        n_items = 1 if X is None else np.atleast_2d(X).shape[0]
        g = np.zeros((lam.size, n_items))
    return g, lam, k
