"""Subgraph sampling: neighbor tracks per pivot, diverse features per track.

Feature selection follows a density-peaks scheme: clues that sit in dense
similarity neighborhoods but far from even denser ones score highest, which
favors representative yet non-redundant picks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .graph import MODALITIES, Clue, Modality, Track


@dataclass(frozen=True)
class SamplerConfig:
    """Neighborhood and feature sampling knobs.

    p: neighbor tracks per pivot; q: features kept per track and modality;
    k: kNN width used when building neighbor lists (k >= p); tau: similarity
    threshold for the density indicator, on the (1+cos)/2 scale.
    """

    p: int = 8
    q: int = 8
    k: int = 8
    tau: float = 0.8

    def __post_init__(self):
        if self.p < 1:
            raise InvalidInput("p must be >= 1")
        if self.q < 1:
            raise InvalidInput("q must be >= 1")
        if self.k < self.p:
            raise InvalidInput("k must be >= p")
        if not 0.0 <= self.tau <= 1.0:
            raise InvalidInput("tau must be in [0, 1]")


@dataclass(frozen=True)
class DensityStats:
    """Per-feature local density, distance to the nearest denser peak, and
    their min-max-normalized product used as the sampling score."""

    rho: np.ndarray
    peak_dist: np.ndarray
    score: np.ndarray


def _minmax(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.ones_like(values)
    return (values - lo) / (hi - lo)


def density_stats(features: np.ndarray, tau: float) -> DensityStats:
    """Density-peaks statistics over one track's same-modality features.

    Similarity s = (1+cos)/2. Local density rho_i sums s over neighbors with
    s > tau. peak_dist_i = 1 - s(i, peak) where peak is the most similar
    feature among those with strictly greater density (density ties rank the
    lower index as denser); the densest feature overall gets peak_dist 1.
    rho and peak_dist are min-max normalized before multiplying into score.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] == 0:
        raise InvalidInput("features must be a non-empty (n, d) array")
    n = feats.shape[0]
    s = np.clip((1.0 + feats @ feats.T) / 2.0, 0.0, 1.0)
    np.fill_diagonal(s, 0.0)
    rho = np.sum(np.where(s > tau, s, 0.0), axis=1)

    peak_dist = np.ones(n)
    for i in range(n):
        denser = [j for j in range(n) if rho[j] > rho[i] or (rho[j] == rho[i] and j < i)]
        if denser:
            best = max(denser, key=lambda j: (s[i, j], -j))
            peak_dist[i] = 1.0 - s[i, best]

    score = _minmax(rho) * _minmax(peak_dist)
    if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(score))):
        raise InvalidInput("non-finite density statistics")
    return DensityStats(rho=rho, peak_dist=peak_dist, score=score)


def density_sample_features(track: Track, modality: Modality, cfg: SamplerConfig) -> list[Clue]:
    """Pick up to q clues of the given modality with the highest density score.

    Clues are ranked on the canonical ascending-clue_id ordering so the result
    does not depend on storage order; score ties go to the lower clue_id.
    """
    clues = sorted(track.clues[modality], key=lambda c: c.clue_id)
    if not clues:
        return []
    if len(clues) <= cfg.q:
        return clues
    stats = density_stats(np.stack([c.feature for c in clues]), cfg.tau)
    ranked = sorted(range(len(clues)), key=lambda i: (-stats.score[i], clues[i].clue_id))
    keep = sorted(ranked[: cfg.q])
    return [clues[i] for i in keep]


@dataclass(frozen=True)
class NeighborhoodSample:
    """Pivot-first track selection; degenerate means the dataset had fewer
    than p+1 tracks and every track was returned."""

    track_ids: list[int]
    degenerate: bool


def sample_neighborhood(
    pivot: int,
    all_tracks: dict[int, Track],
    knn: dict[int, list[int]],
    cfg: SamplerConfig,
) -> NeighborhoodSample:
    """Select the pivot plus p neighbor tracks.

    The pivot's kNN fill the slots first. If some modality present within two
    hops is absent from the selection, the closest carrier found by scanning
    the pivot's neighbors and then neighbors-of-neighbors is swapped in for
    the latest-added track whose removal keeps all covered modalities covered.
    """
    if pivot not in all_tracks:
        raise InvalidInput(f"unknown pivot track {pivot}")
    if len(all_tracks) < cfg.p + 1:
        ids = [pivot] + sorted(t for t in all_tracks if t != pivot)
        return NeighborhoodSample(track_ids=ids, degenerate=True)

    # Two-hop candidate stream in deterministic order, pivot excluded.
    stream: list[int] = []
    seen = {pivot}
    for t in knn.get(pivot, []):
        if t not in seen:
            seen.add(t)
            stream.append(t)
    for t in list(stream):
        for u in knn.get(t, []):
            if u not in seen:
                seen.add(u)
                stream.append(u)

    selected = [pivot] + stream[: cfg.p]
    if len(selected) < cfg.p + 1:
        # kNN width should prevent this, but fill from remaining ids anyway.
        for t in sorted(all_tracks):
            if len(selected) == cfg.p + 1:
                break
            if t not in selected:
                selected.append(t)

    def covered(sel: list[int]) -> set[Modality]:
        out: set[Modality] = set()
        for t in sel:
            out |= all_tracks[t].modalities_present()
        return out

    for m in MODALITIES:
        if m in covered(selected):
            continue
        carrier = next(
            (t for t in stream if t not in selected and m in all_tracks[t].modalities_present()),
            None,
        )
        if carrier is None:
            continue
        # Drop the most recently added track that is not the sole carrier of
        # any currently covered modality.
        for pos in range(len(selected) - 1, 0, -1):
            rest = selected[:pos] + selected[pos + 1 :]
            if covered(rest) == covered(selected):
                selected = rest
                selected.append(carrier)
                break
    return NeighborhoodSample(track_ids=selected, degenerate=False)
