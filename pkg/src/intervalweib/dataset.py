"""Interval-censored reliability test records.

The data model is relational: an *item* (a physical unit under test) is
inspected repeatedly, and each inspection yields one record covering the
interval (t_agelt, t_age] with a binary outcome -- 1 if the item was found
failed at the inspection, 0 if it passed.  Covariates are constant within
an interval.  Items are the unit of train/test splitting so that no item's
records leak across the partition.

Containers are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class DatasetError(ValueError):
    """A record or dataset violates the interval-censoring contract."""


@dataclass(frozen=True)
class TestRecord:
    """One inspection interval for one item.

    Attributes
    ----------
    item_id : str
        Opaque key identifying the item this interval belongs to.
    x : tuple of float
        Covariate vector, constant over the interval.
    y : int
        1 if a failure was discovered at ``t_age``, 0 if the item passed.
    t_agelt : float
        Item age at the previous inspection (left edge, exclusive).
    t_age : float
        Item age at this inspection (right edge, inclusive).
    """

    item_id: str
    x: tuple
    y: int
    t_agelt: float
    t_age: float

    __test__ = False  # "Test" prefix is domain language, not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "t_agelt", float(self.t_agelt))
        object.__setattr__(self, "t_age", float(self.t_age))
        if self.y not in (0, 1):
            raise DatasetError(f"record {self.item_id!r}: y must be 0 or 1, got {self.y!r}")
        if not (0.0 <= self.t_agelt < self.t_age):
            raise DatasetError(
                f"record {self.item_id!r}: need 0 <= t_agelt < t_age, "
                f"got [{self.t_agelt}, {self.t_age}]"
            )
        if not all(math.isfinite(v) for v in self.x):
            raise DatasetError(f"record {self.item_id!r}: non-finite covariate in {self.x}")
        if not (math.isfinite(self.t_agelt) and math.isfinite(self.t_age)):
            raise DatasetError(f"record {self.item_id!r}: non-finite interval endpoint")


class IntervalDataset:
    """Ordered collection of :class:`TestRecord` grouped by item.

    Validates on construction that every item's records are sorted by
    ``t_agelt`` with non-overlapping intervals (gaps are fine), that all
    records share one covariate length, and -- for non-repairable datasets
    (the default) -- that no item fails more than once.
    """

    def __init__(self, records, n_features=None, non_repairable=True):
        records = list(records)
        if n_features is None:
            if not records:
                raise DatasetError("n_features is required for an empty dataset")
            n_features = len(records[0].x)
        self.records = tuple(records)
        self.n_features = int(n_features)
        self.non_repairable = bool(non_repairable)

        items: dict = {}
        for idx, rec in enumerate(self.records):
            if len(rec.x) != self.n_features:
                raise DatasetError(
                    f"record {idx} (item {rec.item_id!r}) has {len(rec.x)} covariates, "
                    f"expected {self.n_features}"
                )
            items.setdefault(rec.item_id, []).append(idx)
        self.items = {k: tuple(v) for k, v in items.items()}

        for item_id, idxs in self.items.items():
            prev = None
            failures = 0
            for i in idxs:
                rec = self.records[i]
                if prev is not None and rec.t_agelt < prev.t_age - 1e-12:
                    raise DatasetError(
                        f"item {item_id!r}: interval [{rec.t_agelt}, {rec.t_age}] overlaps "
                        f"or precedes [{prev.t_agelt}, {prev.t_age}]"
                    )
                failures += rec.y
                prev = rec
            if self.non_repairable and failures > 1:
                raise DatasetError(
                    f"item {item_id!r} has {failures} failure records; "
                    "non-repairable datasets allow at most one"
                )

        self._arrays = None

    def __len__(self):
        return len(self.records)

    def __eq__(self, other):
        if not isinstance(other, IntervalDataset):
            return NotImplemented
        return (
            self.n_features == other.n_features
            and self.non_repairable == other.non_repairable
            and self.records == other.records
        )

    @property
    def n_items(self):
        return len(self.items)

    @property
    def item_ids(self):
        """Item ids in order of first appearance."""
        return tuple(self.items.keys())

    def arrays(self):
        """Dense views ``(X, y, t_agelt, t_age)`` over all records, cached."""
        if self._arrays is None:
            n = len(self.records)
            X = np.empty((n, self.n_features))
            y = np.empty(n)
            t1 = np.empty(n)
            t2 = np.empty(n)
            for i, rec in enumerate(self.records):
                X[i] = rec.x
                y[i] = rec.y
                t1[i] = rec.t_agelt
                t2[i] = rec.t_age
            for a in (X, y, t1, t2):
                a.setflags(write=False)
            self._arrays = (X, y, t1, t2)
        return self._arrays

    def subset_items(self, item_ids):
        """New dataset containing exactly the given items' records, in original order."""
        wanted = set(item_ids)
        recs = [r for r in self.records if r.item_id in wanted]
        return IntervalDataset(recs, self.n_features, self.non_repairable)


def split_by_item(ds, test_fraction, seed):
    """Partition a dataset into train/test with whole items on one side.

    The test partition receives ``round(test_fraction * n_items)`` items
    (at least 1, and at least 1 left for train), chosen by a seeded shuffle
    of the item ids.

    Returns ``(train, test)``.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DatasetError(f"test_fraction must be in (0,1), got {test_fraction}")
    ids = list(ds.item_ids)
    if len(ids) < 2:
        raise DatasetError("cannot split: dataset has fewer than 2 items")
    n_test = int(round(test_fraction * len(ids)))
    n_test = min(max(n_test, 1), len(ids) - 1)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ids))
    test_ids = {ids[i] for i in perm[:n_test]}
    train = ds.subset_items([i for i in ids if i not in test_ids])
    test = ds.subset_items([i for i in ids if i in test_ids])
    return train, test


@dataclass(frozen=True)
class Standardizer:
    """Per-feature location/scale transform fitted on training covariates.

    Uses the population standard deviation (divide by N).  Zero-variance
    columns get std 1 so they center to zero and stay inert.
    """

    mean: tuple
    std: tuple

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return (X - np.asarray(self.mean)) / np.asarray(self.std)

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=float)
        return X * np.asarray(self.std) + np.asarray(self.mean)


def fit_standardizer(train):
    """Fit a :class:`Standardizer` on the training dataset's covariates."""
    if len(train) == 0:
        raise DatasetError("cannot fit standardizer on an empty dataset")
    X = train.arrays()[0]
    mean = X.mean(axis=0)
    std = X.std(axis=0)  # population convention
    std = np.where(std > 0.0, std, 1.0)
    return Standardizer(tuple(mean), tuple(std))


def _replace_covariates(ds, X_new):
    recs = [
        TestRecord(r.item_id, tuple(row), r.y, r.t_agelt, r.t_age)
        for r, row in zip(ds.records, X_new)
    ]
    return IntervalDataset(recs, ds.n_features, ds.non_repairable)


def apply_standardizer(sc, ds):
    """Return a copy of ``ds`` with standardized covariates."""
    return _replace_covariates(ds, sc.transform(ds.arrays()[0]))


def inverse_standardizer(sc, ds):
    """Undo :func:`apply_standardizer` (up to float rounding)."""
    return _replace_covariates(ds, sc.inverse_transform(ds.arrays()[0]))


def write_dataset(ds, path):
    """Serialize to CSV with header ``item_id,t_agelt,t_age,y,x1..xF``.

    Floats are written with 17 significant digits so that a read-back
    reproduces the records exactly.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["item_id", "t_agelt", "t_age", "y"]
            + [f"x{j + 1}" for j in range(ds.n_features)]
        )
        for rec in ds.records:
            writer.writerow(
                [rec.item_id, f"{rec.t_agelt:.17g}", f"{rec.t_age:.17g}", rec.y]
                + [f"{v:.17g}" for v in rec.x]
            )


def read_dataset(path, non_repairable=True):
    """Parse a CSV written by :func:`write_dataset`.

    Raises :class:`DatasetError` naming the line number for malformed rows
    and the record for invariant violations.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected a header row") from None
        expected_prefix = ["item_id", "t_agelt", "t_age", "y"]
        if header[:4] != expected_prefix:
            raise DatasetError(
                f"{path}: header must start with {','.join(expected_prefix)}, got {header[:4]}"
            )
        n_features = len(header) - 4
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 + n_features:
                raise DatasetError(
                    f"{path}:{lineno}: expected {4 + n_features} fields, got {len(row)}"
                )
            try:
                rec = TestRecord(
                    item_id=row[0],
                    x=tuple(float(v) for v in row[4:]),
                    y=int(row[3]),
                    t_agelt=float(row[1]),
                    t_age=float(row[2]),
                )
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed value ({exc})") from None
            records.append(rec)
    return IntervalDataset(records, n_features, non_repairable)
