"""Synthetic interval-censored benchmark datasets.

Two families of generators are provided, matching the benchmark setup:

* per-class Weibull failure times (one rate/shape pair per class), and
* per-point rates computed from a closed-form function of the covariates.

Failure times are then discretized by sliding a disjoint inspection window
across time: every window before the failure is a pass record, the window
containing the failure is the single fail record.  A heart-failure style
clinical CSV can be ingested the same way, with the follow-up time acting
as the censoring horizon for survivors.

All generation is deterministic: each item draws from its own RNG stream
keyed by ``(seed, item_index)``, so serial and parallel generation agree.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .dataset import DatasetError, IntervalDataset, TestRecord


@dataclass(frozen=True)
class WeibullClassSpec:
    """Weibull rate/shape pair used for one class of items."""

    rate: float
    shape: float

    def __post_init__(self):
        if not (self.rate > 0.0 and self.shape > 0.0):
            raise ValueError(f"rate and shape must be positive, got {self}")


@dataclass(frozen=True)
class CensorWindowSpec:
    """Disjoint inspection window of fixed width, capped at ``max_time``."""

    window: float = 2.0
    max_time: float = 100.0

    def __post_init__(self):
        if not self.window > 0.0:
            raise ValueError(f"window must be positive, got {self.window}")
        if self.max_time < self.window:
            raise ValueError("max_time must be at least one window")


def weibull_inverse_cdf(u, rate, k):
    """Map uniforms to Weibull failure times: t = (-log(1-u))^(1/k) / rate."""
    u = np.asarray(u, dtype=float)
    return (-np.log1p(-u)) ** (1.0 / k) / rate


def sample_weibull_times(rates, k, n, seed):
    """Draw ``n`` Weibull failure times with per-point rates and shared shape.

    ``rates`` may be a scalar or a length-``n`` vector.  Deterministic under
    ``seed`` via the inverse-CDF transform of standard uniforms.
    """
    rates = np.broadcast_to(np.asarray(rates, dtype=float), (n,))
    if np.any(rates <= 0.0):
        raise ValueError("all rates must be positive")
    if not k > 0.0:
        raise ValueError(f"shape must be positive, got {k}")
    u = np.random.default_rng(seed).uniform(size=n)
    return weibull_inverse_cdf(u, rates, k)


def _failure_window_index(t_fail, window):
    # A failure exactly on a window edge belongs to the window ending there
    # (the inspection that discovers it).
    return int(np.ceil(t_fail / window)) - 1


def chunk_into_intervals(item_id, x, t_fail, spec, censored=False):
    """Discretize one item's failure time into interval records.

    Emits pass records for every window before the failure and one fail
    record for the window containing ``t_fail``.  If ``t_fail`` exceeds
    ``spec.max_time`` (or ``censored`` is set) the item never fails on
    record: full windows up to the horizon are passes, plus a final partial
    window when the horizon is not a multiple of the window width.
    """
    if not t_fail > 0.0:
        raise ValueError(f"item {item_id!r}: t_fail must be positive, got {t_fail}")
    w = spec.window
    x = tuple(x)
    records = []
    if censored or t_fail > spec.max_time:
        horizon = min(t_fail, spec.max_time) if censored else spec.max_time
        m = 0
        while (m + 1) * w <= horizon + 1e-12:
            records.append(TestRecord(item_id, x, 0, m * w, (m + 1) * w))
            m += 1
        if m * w < horizon - 1e-12:
            records.append(TestRecord(item_id, x, 0, m * w, horizon))
        return records
    fail_idx = _failure_window_index(t_fail, w)
    for m in range(fail_idx):
        records.append(TestRecord(item_id, x, 0, m * w, (m + 1) * w))
    records.append(TestRecord(item_id, x, 1, fail_idx * w, (fail_idx + 1) * w))
    return records


def _assemble(points, labels, rates, shapes, window, seed, prefix):
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    width = max(4, len(str(len(points) - 1)))
    records = []
    for i, (pt, cls) in enumerate(zip(points, labels)):
        rng = np.random.default_rng([seed, i])
        u = rng.uniform()
        t_fail = float(weibull_inverse_cdf(u, rates[i], shapes[cls]))
        if t_fail <= 0.0:  # u == 0 draws are measure-zero but guard anyway
            t_fail = np.nextafter(0.0, 1.0)
        records.extend(
            chunk_into_intervals(f"{prefix}{i:0{width}d}", pt, t_fail, window)
        )
    return IntervalDataset(records, points.shape[1])


def generate_synthetic_1(points, labels, specs, window, seed, prefix="item"):
    """Interval-censor a labeled point set with one Weibull spec per class.

    Each point becomes an item whose covariates are the point coordinates;
    its failure time is drawn from the class's (rate, shape).
    """
    labels = np.asarray(labels, dtype=int)
    if not set(np.unique(labels)) <= {0, 1}:
        raise ValueError("labels must be binary")
    for cls in (0, 1):
        if not np.any(labels == cls):
            raise ValueError(f"class {cls} is empty")
    rates = np.array([specs[c].rate for c in labels])
    shapes = [specs[0].shape, specs[1].shape]
    return _assemble(points, labels, rates, shapes, window, seed, prefix)


def synthetic_2_rate(cls, x):
    """Per-point failure rate for the continuous-rate benchmark.

    class 0: exp(-0.2*x1 - 0.15*x2 - 1)
    class 1: exp(-0.5*x1^2 - 0.15*x2^2) + 0.8
    """
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    if cls == 0:
        return np.exp(-0.2 * x1 - 0.15 * x2 - 1.0)
    if cls == 1:
        return np.exp(-0.5 * x1**2 - 0.15 * x2**2) + 0.8
    raise ValueError(f"unknown class {cls}")


def generate_synthetic_2(points, labels, shapes=(2.5, 3.0), window=CensorWindowSpec(),
                         seed=0, prefix="item"):
    """Like :func:`generate_synthetic_1` but the rate is a continuous
    function of the covariates, chosen by class via :func:`synthetic_2_rate`."""
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if points.shape[1] != 2:
        raise ValueError("continuous-rate generator expects 2-D points")
    for cls in (0, 1):
        if not np.any(labels == cls):
            raise ValueError(f"class {cls} is empty")
    rates = np.where(
        labels == 0, synthetic_2_rate(0, points), synthetic_2_rate(1, points)
    )
    return _assemble(points, labels, rates, list(shapes), window, seed, prefix)


def make_moons(n, noise=0.1, seed=0):
    """Two interleaving half-circles of radius 1, the second reflected and
    offset by (1, -0.5).  Returns ``(points, labels)`` with balanced labels."""
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    th0 = rng.uniform(0.0, np.pi, n0)
    th1 = rng.uniform(0.0, np.pi, n1)
    outer = np.column_stack([np.cos(th0), np.sin(th0)])
    inner = np.column_stack([1.0 - np.cos(th1), 0.5 - np.sin(th1)])
    points = np.vstack([outer, inner])
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    if noise > 0.0:
        points = points + rng.normal(0.0, noise, points.shape)
    return points, labels


BANANA_RADIUS = 2.0
BANANA_ARC = 2.2  # half-angle of each crescent, radians
BANANA_CENTERS = ((0.0, 0.5), (0.0, -0.5))


def make_banana(n, noise=0.1, seed=0):
    """Two interlocking crescents (radius-2 arcs around centers (0, +/-0.5),
    one opening up and one opening down).  Returns ``(points, labels)``."""
    if n < 2:
        raise ValueError("need at least 2 points")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    t0 = rng.uniform(-BANANA_ARC, BANANA_ARC, n0)
    t1 = rng.uniform(-BANANA_ARC, BANANA_ARC, n1)
    cx0, cy0 = BANANA_CENTERS[0]
    cx1, cy1 = BANANA_CENTERS[1]
    lower = np.column_stack(
        [cx0 + BANANA_RADIUS * np.sin(t0), cy0 - BANANA_RADIUS * np.cos(t0)]
    )
    upper = np.column_stack(
        [cx1 + BANANA_RADIUS * np.sin(t1), cy1 + BANANA_RADIUS * np.cos(t1)]
    )
    points = np.vstack([lower, upper])
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    if noise > 0.0:
        points = points + rng.normal(0.0, noise, points.shape)
    return points, labels


HEARTFAILURE_FEATURES = (
    "age",
    "anaemia",
    "creatinine_phosphokinase",
    "diabetes",
    "ejection_fraction",
    "high_blood_pressure",
    "platelets",
    "serum_creatinine",
    "serum_sodium",
    "sex",
    "smoking",
)
HEARTFAILURE_TIME = "time"
HEARTFAILURE_EVENT = "DEATH_EVENT"


def ingest_heartfailure(csv_path, window_days=30.0):
    """Convert the heart-failure clinical CSV to interval-censored records.

    Each patient is one item inspected every ``window_days``.  A death is
    recorded as a failure in the window containing the death day; survivors
    contribute pass records up to their follow-up time (final partial window
    included).
    """
    with open(csv_path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        needed = list(HEARTFAILURE_FEATURES) + [HEARTFAILURE_TIME, HEARTFAILURE_EVENT]
        missing = [c for c in needed if c not in fields]
        if missing:
            raise DatasetError(f"{csv_path}: missing columns: {', '.join(missing)}")
        records = []
        for i, row in enumerate(reader):
            item = f"p{i + 1:03d}"
            x = tuple(float(row[c]) for c in HEARTFAILURE_FEATURES)
            t = float(row[HEARTFAILURE_TIME])
            died = int(float(row[HEARTFAILURE_EVENT])) == 1
            spec = CensorWindowSpec(window=window_days, max_time=max(t, window_days))
            records.extend(
                chunk_into_intervals(item, x, t, spec, censored=not died)
            )
    return IntervalDataset(records, len(HEARTFAILURE_FEATURES))
