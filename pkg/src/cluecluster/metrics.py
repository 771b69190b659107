"""Clustering evaluation: weighted purity, NMI, and per-character P/R/F.

A partition is a plain dict mapping item id to label. Predicted and
ground-truth partitions must cover exactly the same items.
"""

from __future__ import annotations

import math
from collections import Counter

from .errors import InvalidInput


def _check_pair(pred: dict, truth: dict) -> int:
    if not pred or not truth:
        raise InvalidInput("empty partition")
    if set(pred) != set(truth):
        raise InvalidInput("partitions cover different item sets")
    return len(pred)


def _entropy(counts, n: int) -> float:
    # fsum over the sorted count multiset keeps the value independent of
    # label naming and dict order
    return -math.fsum((c / n) * math.log(c / n) for c in sorted(counts))


def wcp(pred: dict, truth: dict) -> float:
    """Weighted clustering purity: majority mass of each predicted cluster
    over the total item count."""
    n = _check_pair(pred, truth)
    by_cluster: dict = {}
    for item, lab in pred.items():
        by_cluster.setdefault(lab, []).append(truth[item])
    hit = sum(max(Counter(members).values()) for members in by_cluster.values())
    return hit / n


def nmi(pred: dict, truth: dict) -> float:
    """Mutual information over the arithmetic mean of the two entropies,
    natural log. Both entropies zero -> 1, exactly one zero -> 0."""
    n = _check_pair(pred, truth)
    ca = Counter(pred.values())
    cb = Counter(truth.values())
    cj = Counter((pred[i], truth[i]) for i in pred)
    h_a = _entropy(ca.values(), n)
    h_b = _entropy(cb.values(), n)
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    mi = h_a + h_b - _entropy(cj.values(), n)
    return mi / ((h_a + h_b) / 2.0)


def character_pr(pred: dict, truth: dict) -> tuple[float, float]:
    """Majority-vote precision and recall per character, unweighted means.

    Each predicted cluster votes for its majority character (ties to the
    lower character id). A character that wins no cluster contributes zero
    recall and is left out of the precision mean.
    """
    _check_pair(pred, truth)
    clusters: dict = {}
    for item, lab in pred.items():
        clusters.setdefault(lab, []).append(item)
    assigned: dict = {}
    for members in clusters.values():
        votes = Counter(truth[i] for i in members)
        best = min(votes, key=lambda ch: (-votes[ch], ch))
        assigned.setdefault(best, []).extend(members)

    precisions = []
    recalls = []
    for ch in sorted(set(truth.values())):
        own = [i for i, t in truth.items() if t == ch]
        got = assigned.get(ch, [])
        correct = sum(1 for i in got if truth[i] == ch)
        if got:
            precisions.append(correct / len(got))
        recalls.append(correct / len(own))
    cp = sum(precisions) / len(precisions) if precisions else 0.0
    cr = sum(recalls) / len(recalls)
    return cp, cr


def cf(cp: float, cr: float) -> float:
    """Harmonic mean of character precision and recall, zero when both are."""
    if cp + cr == 0.0:
        return 0.0
    return 2.0 * cp * cr / (cp + cr)
