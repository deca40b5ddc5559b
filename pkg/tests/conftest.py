"""Shared helpers: finite-difference oracles and small dataset builders."""

import numpy as np
import pytest

from intervalweib.dataset import IntervalDataset, TestRecord


def central_difference_gradient(func, x, h=1e-4):
    """Fourth-order central-difference gradient of a scalar function.

    The higher-order stencil keeps truncation error negligible while the
    wider step keeps round-off under control, so entries down to ~1e-4 of
    the gradient norm are still resolved at double precision.
    """
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for j in range(x.size):
        hj = h * max(1.0, abs(x[j]))
        e = np.zeros_like(x)
        e[j] = 1.0
        grad[j] = (
            -func(x + 2 * hj * e)
            + 8.0 * func(x + hj * e)
            - 8.0 * func(x - hj * e)
            + func(x - 2 * hj * e)
        ) / (12.0 * hj)
    return grad


def relative_gradient_error(analytic, numeric, floor=1e-5):
    """Worst per-entry relative error, flooring the denominator at the
    finite-difference resolution limit (~1e-11 absolute noise on these
    objectives, so entries below ``floor`` are compared absolutely)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return float(np.max(np.abs(analytic - numeric) / np.maximum(np.abs(numeric), floor)))


def toy_dataset(n_records=12, n_features=2, seed=0, p_fail=0.5):
    """Random single-record-per-item dataset with sane interval scales."""
    rng = np.random.default_rng(seed)
    recs = []
    for i in range(n_records):
        t1 = rng.uniform(0.0, 3.0)
        t2 = t1 + rng.uniform(0.2, 2.0)
        recs.append(
            TestRecord(
                f"i{i:03d}",
                tuple(rng.normal(size=n_features)),
                int(rng.uniform() < p_fail),
                t1,
                t2,
            )
        )
    return IntervalDataset(recs, n_features)


def windowed_dataset(rates, k, window=2.0, seed=0, prefix="w"):
    """Items with Weibull failure times chunked into inspection windows."""
    from intervalweib.datagen import CensorWindowSpec, chunk_into_intervals, weibull_inverse_cdf

    rng = np.random.default_rng(seed)
    spec = CensorWindowSpec(window=window, max_time=200.0)
    recs = []
    for i, lam in enumerate(np.atleast_1d(rates)):
        u = rng.uniform()
        t = float(weibull_inverse_cdf(u, lam, k))
        recs.append((f"{prefix}{i:04d}", t))
    records = []
    for item, t in recs:
        records.extend(chunk_into_intervals(item, (0.0,), max(t, 1e-9), spec))
    return IntervalDataset(records, 1)
