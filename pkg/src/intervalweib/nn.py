"""Feed-forward rate regression with a global shape parameter.

The model maps covariates to a per-record log-rate ``eta(x)`` through a
small network (zero or one tanh hidden layer; zero hidden layers is a
plain linear model).  One extra unconstrained parameter ``kappa = log k``
holds the shared Weibull shape, so the full parameter vector is

    phi = [network weights..., kappa],   length P.

Flattening order: with a hidden layer of width m over F inputs,
``[W1 (m*F, row-major), b1 (m), w2 (m), b2 (1), kappa]``; the linear model
is ``[w (F), b (1), kappa]``.  Outputs and Jacobians live in the
unconstrained coordinates ``(eta, kappa)``; the natural ``(lam, k)`` are
recovered by exponentiation.

MAP training maximizes the interval log-likelihood plus an isotropic
Gaussian log-prior with precision ``rho``, using Adam on minibatches drawn
without replacement each epoch and the ``N/B`` likelihood rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .survival import _loglik_core


@dataclass(frozen=True)
class MlpSpec:
    """Architecture: ``hidden_units == 0`` means a linear model."""

    n_features: int
    hidden_units: int = 0

    def __post_init__(self):
        if self.n_features < 1:
            raise ValueError("need at least one feature")
        if self.hidden_units < 0:
            raise ValueError("hidden_units must be >= 0")

    @property
    def n_params(self):
        """Total length of phi, including the shape slot."""
        f, m = self.n_features, self.hidden_units
        if m == 0:
            return f + 2
        return m * f + m + m + 1 + 1

    @property
    def kappa_index(self):
        return self.n_params - 1

    def unpack(self, phi):
        """Split a flat phi into (weights..., kappa) views."""
        f, m = self.n_features, self.hidden_units
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.n_params,):
            raise ValueError(f"phi must have length {self.n_params}, got {phi.shape}")
        if m == 0:
            return phi[:f], phi[f], phi[-1]
        W1 = phi[: m * f].reshape(m, f)
        b1 = phi[m * f : m * f + m]
        w2 = phi[m * f + m : m * f + 2 * m]
        b2 = phi[m * f + 2 * m]
        return W1, b1, w2, b2, phi[-1]


def init_params(spec, seed):
    """Glorot-uniform weights, zero shape (k = 1, the neutral hazard)."""
    rng = np.random.default_rng(seed)
    f, m = spec.n_features, spec.hidden_units
    phi = np.zeros(spec.n_params)
    if m == 0:
        lim = np.sqrt(6.0 / (f + 1))
        phi[: f + 1] = rng.uniform(-lim, lim, f + 1)
    else:
        lim1 = np.sqrt(6.0 / (f + m))
        lim2 = np.sqrt(6.0 / (m + 1))
        phi[: m * f + m] = rng.uniform(-lim1, lim1, m * f + m)
        phi[m * f + m : -1] = rng.uniform(-lim2, lim2, m + 1)
    return phi


def forward_eta(spec, phi, X):
    """Per-record log-rate eta(x), vectorized over rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.hidden_units == 0:
        w, b, _ = spec.unpack(phi)
        return X @ w + b
    W1, b1, w2, b2, _ = spec.unpack(phi)
    h = np.tanh(X @ W1.T + b1)
    return h @ w2 + b2


def forward(spec, phi, X):
    """Natural-scale outputs ``(lam, k)``: lam per record, shared k."""
    eta = forward_eta(spec, phi, X)
    return np.exp(eta), float(np.exp(phi[spec.kappa_index]))


def eta_jacobian(spec, phi, X):
    """d eta(x_i) / d phi for every record: an (n, P) matrix.

    The kappa column is zero (the rate head never sees kappa).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    J = np.zeros((n, spec.n_params))
    f, m = spec.n_features, spec.hidden_units
    if m == 0:
        J[:, :f] = X
        J[:, f] = 1.0
        return J
    W1, b1, w2, b2, _ = spec.unpack(phi)
    h = np.tanh(X @ W1.T + b1)          # (n, m)
    dh = (1.0 - h**2) * w2              # (n, m): d eta / d preactivation
    J[:, : m * f] = (dh[:, :, None] * X[:, None, :]).reshape(n, m * f)
    J[:, m * f : m * f + m] = dh
    J[:, m * f + m : m * f + 2 * m] = h
    J[:, m * f + 2 * m] = 1.0
    return J


def per_sample_jacobian(spec, phi, x):
    """2 x P Jacobian of the unconstrained outputs (eta, kappa) at one input."""
    J = np.zeros((2, spec.n_params))
    J[0] = eta_jacobian(spec, phi, np.atleast_2d(x))[0]
    J[1, spec.kappa_index] = 1.0
    return J


def _backprop_eta(spec, phi, X, d_eta):
    """Accumulate d(objective)/d(weights) given per-record d(objective)/d(eta)."""
    X = np.atleast_2d(X)
    grad = np.zeros(spec.n_params)
    f, m = spec.n_features, spec.hidden_units
    if m == 0:
        grad[:f] = X.T @ d_eta
        grad[f] = d_eta.sum()
        return grad
    W1, b1, w2, b2, _ = spec.unpack(phi)
    h = np.tanh(X @ W1.T + b1)
    grad[m * f + m : m * f + 2 * m] = h.T @ d_eta
    grad[m * f + 2 * m] = d_eta.sum()
    delta = (d_eta[:, None] * w2) * (1.0 - h**2)   # (n, m)
    grad[: m * f] = (delta.T @ X).reshape(m * f)
    grad[m * f : m * f + m] = delta.sum(axis=0)
    return grad


def log_prior(phi, rho):
    """Isotropic Gaussian log-density N(0, I/rho), normalization included."""
    phi = np.asarray(phi, dtype=float)
    P = phi.size
    return -0.5 * rho * float(phi @ phi) + 0.5 * P * (np.log(rho) - np.log(2.0 * np.pi))


def log_posterior(spec, phi, ds, rho, idx=None, scale=1.0):
    """Unnormalized log posterior and gradient wrt phi.

    With ``idx``/``scale`` the likelihood is evaluated on a minibatch and
    rescaled (scale = N/B); the prior is never rescaled.
    """
    X, y, t1, t2 = ds.arrays()
    if idx is not None:
        X, y, t1, t2 = X[idx], y[idx], t1[idx], t2[idx]
    eta = forward_eta(spec, phi, X)
    kappa = phi[spec.kappa_index]
    terms, _, deta, dkappa = _loglik_core(y, t1, t2, 0.0, eta, kappa)
    value = scale * float(np.sum(terms)) + log_prior(phi, rho)
    grad = _backprop_eta(spec, phi, X, scale * deta)
    grad[spec.kappa_index] += scale * float(np.sum(dkappa))
    grad -= rho * phi
    return value, grad


@dataclass
class AdamState:
    """First/second-moment accumulators plus the current parameters."""

    theta: np.ndarray
    m: np.ndarray = None
    v: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).copy()
        if self.m is None:
            self.m = np.zeros_like(self.theta)
        if self.v is None:
            self.v = np.zeros_like(self.theta)


def adam_step(state, grad, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam descent step; returns a new state."""
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad**2
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    theta = state.theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(theta, m, v, t)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    batch_size: int = 128
    epochs: int = 2000
    precision: float = 1e-2      # prior precision rho = 1/v^2
    coordinate_descent: bool = False
    seed: int = 0

    def __post_init__(self):
        if min(self.learning_rate, self.precision) <= 0.0:
            raise ValueError("learning_rate and precision must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


@dataclass(frozen=True)
class MapResult:
    """MAP point with its full-batch objective trace."""

    phi: np.ndarray
    objective: float
    history: np.ndarray  # full-batch objective after each epoch


def _masked_adam_update(state, grad, lr, mask):
    """Adam step restricted to masked coordinates (moments frozen elsewhere)."""
    sub = AdamState(state.theta[mask], state.m[mask], state.v[mask], state.t)
    sub = adam_step(sub, grad[mask], lr)
    theta = state.theta.copy()
    m = state.m.copy()
    v = state.v.copy()
    theta[mask], m[mask], v[mask] = sub.theta, sub.m, sub.v
    return AdamState(theta, m, v, sub.t)


def map_train(spec, ds, cfg):
    """Adam MAP estimation of phi on an interval-censored dataset.

    Minibatches are a seeded permutation of the records each epoch (batch
    size N degenerates to deterministic full-batch ascent).  With
    ``coordinate_descent`` the weights and the shape alternate: each epoch
    runs one pass updating the network weights only, then one updating
    kappa only, each group with its own Adam moments.
    """
    N = len(ds)
    if N == 0:
        raise ValueError("cannot train on an empty dataset")
    B = min(cfg.batch_size, N)
    rng = np.random.default_rng(cfg.seed)
    phi = init_params(spec, cfg.seed)

    kappa_mask = np.zeros(spec.n_params, dtype=bool)
    kappa_mask[spec.kappa_index] = True
    if cfg.coordinate_descent:
        states = [AdamState(phi), AdamState(phi)]   # weights phase, kappa phase
        masks = [~kappa_mask, kappa_mask]
    else:
        states = [AdamState(phi)]
        masks = [np.ones(spec.n_params, dtype=bool)]

    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        for phase, mask in enumerate(masks):
            order = rng.permutation(N)
            for start in range(0, N, B):
                idx = order[start : start + B]
                scale = N / idx.size
                _, grad = log_posterior(spec, phi, ds, cfg.precision, idx, scale)
                if not np.all(np.isfinite(grad)):
                    raise FloatingPointError(
                        "non-finite training gradient; the learning rate is "
                        "likely too high for this dataset"
                    )
                st = states[phase]
                st = _masked_adam_update(
                    AdamState(phi, st.m, st.v, st.t), -grad, cfg.learning_rate, mask
                )
                states[phase] = st
                phi = st.theta
        value, _ = log_posterior(spec, phi, ds, cfg.precision)
        if not np.isfinite(value):
            raise FloatingPointError(
                "non-finite training objective; the learning rate is likely "
                "too high for this dataset"
            )
        history[epoch] = value
    return MapResult(phi=phi, objective=float(history[-1]), history=history)
