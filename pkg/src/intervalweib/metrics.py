"""Classification metrics, Kaplan-Meier estimation, and reliability curves.

Scores are per-record predicted failure probabilities; labels are the
observed pass/fail outcomes.  ROC-AUC follows the Mann-Whitney convention
(ties count one half); PR-AUC is average precision with tied scores grouped
at one threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class ScoredRecord(NamedTuple):
    score: float
    label: int


def _scores_labels(scores, labels=None):
    if labels is None:
        pairs = list(scores)
        scores = np.array([p.score for p in pairs], dtype=float)
        labels = np.array([p.label for p in pairs], dtype=int)
    else:
        scores = np.asarray(scores, dtype=float)
        labels = np.asarray(labels, dtype=int)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and aligned")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be binary")
    return scores, labels


def roc_auc(scores, labels=None):
    """P[random positive outranks random negative], ties counting 1/2.

    Computed from average ranks (exactly the pairwise tie-1/2 count).
    Accepts ``(scores, labels)`` arrays or an iterable of ScoredRecord.
    """
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes present")
    order = np.argsort(s, kind="stable")
    ranks = np.empty(s.size)
    sorted_s = s[order]
    i = 0
    while i < s.size:
        j = i
        while j + 1 < s.size and sorted_s[j + 1] == sorted_s[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum_pos = ranks[y == 1].sum()
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(scores, labels=None):
    """Average precision: step-wise integral of precision over recall.

    Thresholds sweep distinct scores in descending order with ties grouped;
    no interpolation.
    """
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("PR-AUC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    prev_recall = 0.0
    while i < s.size:
        j = i
        while j + 1 < s.size and s[j + 1] == s[i]:
            j += 1
        tp += int(y[i : j + 1].sum())
        seen += j - i + 1
        recall = tp / n_pos
        precision = tp / seen
        ap += (recall - prev_recall) * precision
        prev_recall = recall
        i = j + 1
    return float(ap)


@dataclass(frozen=True)
class KaplanMeierCurve:
    """Product-limit estimate: step function dropping at each event time."""

    times: np.ndarray      # distinct event times, increasing
    survival: np.ndarray   # S(t) just after each event time
    at_risk: np.ndarray
    events: np.ndarray

    def evaluate(self, t):
        """S(t) for scalar or array t (right-continuous step function)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        vals = np.concatenate([[1.0], self.survival])
        out = vals[idx]
        return out if out.ndim else float(out)


def kaplan_meier(ds):
    """Kaplan-Meier curve over a non-repairable interval dataset.

    An item's event time is the right endpoint of its failure record (the
    inspection that discovered the failure); items that never fail are
    censored at their last inspection time.
    """
    if len(ds) == 0:
        raise ValueError("empty dataset")
    event_times = []
    censor_times = []
    for item_id, idxs in ds.items.items():
        fail = [ds.records[i] for i in idxs if ds.records[i].y == 1]
        if fail:
            event_times.append(fail[0].t_age)
        else:
            censor_times.append(max(ds.records[i].t_age for i in idxs))
    event_times = np.sort(np.asarray(event_times, dtype=float))
    censor_times = np.asarray(censor_times, dtype=float)
    distinct = np.unique(event_times)
    n_items = ds.n_items
    times, surv, at_risk_out, events_out = [], [], [], []
    s = 1.0
    for t in distinct:
        d = int(np.sum(event_times == t))
        # at risk: not yet failed and not yet censored strictly before t
        n_at_risk = (
            n_items
            - int(np.sum(event_times < t))
            - int(np.sum(censor_times < t))
        )
        if n_at_risk <= 0:
            break
        s *= 1.0 - d / n_at_risk
        times.append(t)
        surv.append(s)
        at_risk_out.append(n_at_risk)
        events_out.append(d)
    return KaplanMeierCurve(
        times=np.asarray(times),
        survival=np.asarray(surv),
        at_risk=np.asarray(at_risk_out),
        events=np.asarray(events_out),
    )


@dataclass(frozen=True)
class ReliabilityCurve:
    """Pointwise posterior summary of R(t): mean with a central credible band."""

    times: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float

    def rows(self):
        """CSV-ready (t, mean, lo, hi) rows."""
        return np.column_stack([self.times, self.mean, self.lower, self.upper])


def _curve_from_draws(R, times, level):
    # R: (S, T) reliability draws at each grid time
    lo_q = 0.5 * (1.0 - level)
    hi_q = 1.0 - lo_q
    return ReliabilityCurve(
        times=np.asarray(times, dtype=float),
        mean=R.mean(axis=0),
        lower=np.quantile(R, lo_q, axis=0),
        upper=np.quantile(R, hi_q, axis=0),
        level=level,
    )


def reliability_curves(g, lam, k, times, level=0.80):
    """Per-item reliability curves plus the population average.

    Parameters
    ----------
    g : (S, n_items) array
        Covariate effect per posterior draw and item (zeros when absent).
    lam : (S,) or (S, n_items) array
        Weibull rate draws, global or per item.
    k : (S,) array
        Shape draws.
    times : increasing grid starting at or after 0.
    level : credible level for the pointwise band.

    Each draw contributes R_s(t | item) = exp(-e^g * lam^k * t^k); item
    curves summarize draws pointwise, the population curve averages over
    items within each draw before taking quantiles.

    Returns ``(per_item, population)``.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    k = np.asarray(k, dtype=float)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) <= 0) or np.any(times < 0):
        raise ValueError("time grid must be increasing and nonnegative")
    S, n_items = g.shape
    lam = np.asarray(lam, dtype=float)
    if lam.ndim == 1:
        lam = np.broadcast_to(lam[:, None], (S, n_items))
    # (S, n_items, T)
    tk = np.power(times[None, None, :], k[:, None, None])
    hazard = np.exp(g)[:, :, None] * np.power(lam, k[:, None])[:, :, None] * tk
    R = np.exp(-np.minimum(hazard, 700.0))
    per_item = [_curve_from_draws(R[:, i, :], times, level) for i in range(n_items)]
    population = _curve_from_draws(R.mean(axis=1), times, level)
    return per_item, population
