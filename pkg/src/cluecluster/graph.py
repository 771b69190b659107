"""Clues, tracks, and the multi-modal graph.

A clue is one modality-specific feature (face, body, or voice embedding)
attached to a track.  The graph over sampled clues carries two edge
relations: modality edges between same-modality clues and track edges
between different-modality clues of the same track.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import InvalidInput

UNIT_NORM_TOL = 1e-9


class Modality(IntEnum):
    """Clue modalities, ordered as they appear inside a track's node block."""

    FACE = 0
    BODY = 1
    VOICE = 2

    @classmethod
    def parse(cls, name: str) -> "Modality":
        try:
            return cls[name.upper()]
        except KeyError:
            raise InvalidInput(f"unknown modality {name!r}") from None


MODALITIES = (Modality.FACE, Modality.BODY, Modality.VOICE)


def normalize(vec: np.ndarray) -> np.ndarray:
    """Return ``vec`` scaled to unit L2 norm."""
    v = np.asarray(vec, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not np.isfinite(n):
        raise InvalidInput("cannot normalize a zero or non-finite vector")
    return v / n


@dataclass(frozen=True)
class Clue:
    """One modality-specific feature with its track and optional identity."""

    clue_id: int
    track_id: int
    modality: Modality
    feature: np.ndarray
    identity: int | None = None

    def __post_init__(self):
        feat = np.asarray(self.feature, dtype=np.float64)
        object.__setattr__(self, "feature", feat)
        n = float(np.linalg.norm(feat))
        if abs(n - 1.0) > UNIT_NORM_TOL:
            raise InvalidInput(
                f"clue {self.clue_id}: feature norm {n:.12f} is not 1 +/- {UNIT_NORM_TOL}"
            )


@dataclass
class Track:
    """A track's clues bundled per modality.

    Voice lists carry at most one clue by convention (zero is allowed);
    face and body lists may be long.
    """

    track_id: int
    clues: dict[Modality, list[Clue]] = field(default_factory=dict)

    def __post_init__(self):
        for m in MODALITIES:
            self.clues.setdefault(m, [])
        for m, lst in self.clues.items():
            for c in lst:
                if c.track_id != self.track_id:
                    raise InvalidInput(
                        f"clue {c.clue_id} carries track {c.track_id}, expected {self.track_id}"
                    )
                if c.modality != m:
                    raise InvalidInput(f"clue {c.clue_id} filed under wrong modality")

    @property
    def n_clues(self) -> int:
        return sum(len(v) for v in self.clues.values())

    def modalities_present(self) -> set[Modality]:
        return {m for m in MODALITIES if self.clues[m]}

    def identity(self) -> int | None:
        """Ground-truth label for the track: face identity first, then voice,
        then body, so that body-swap noise cannot relabel a face-bearing track."""
        for m in (Modality.FACE, Modality.VOICE, Modality.BODY):
            for c in self.clues[m]:
                if c.identity is not None:
                    return c.identity
        return None


@dataclass
class MultiModalGraph:
    """Sampled clue nodes plus the two Definition-style edge predicates.

    Nodes are ordered deterministically: by position of their track in the
    sampled track list, then modality (face < body < voice), then clue index.
    """

    nodes: list[Clue]
    pivot_track_id: int

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def modality_of(self, i: int) -> Modality:
        return self.nodes[i].modality

    def track_of(self, i: int) -> int:
        return self.nodes[i].track_id

    def modality_edge(self, i: int, j: int) -> bool:
        return i != j and self.nodes[i].modality == self.nodes[j].modality

    def track_edge(self, i: int, j: int) -> bool:
        return (
            self.nodes[i].track_id == self.nodes[j].track_id
            and self.nodes[i].modality != self.nodes[j].modality
        )

    def features(self) -> np.ndarray:
        """Node features stacked into an (N, O) array."""
        return np.stack([c.feature for c in self.nodes])

    def modality_ids(self) -> np.ndarray:
        return np.array([int(c.modality) for c in self.nodes], dtype=np.int64)

    def track_ids(self) -> np.ndarray:
        return np.array([c.track_id for c in self.nodes], dtype=np.int64)

    def identities(self) -> np.ndarray:
        """Per-node identity labels, -1 where unknown."""
        return np.array(
            [c.identity if c.identity is not None else -1 for c in self.nodes],
            dtype=np.int64,
        )


def build_graph(sampled_tracks: list[Track], features_per_track: int) -> MultiModalGraph:
    """Assemble the multi-modal graph over the sampled tracks' clues.

    Each modality list is capped at ``features_per_track`` clues (the first
    ones in stored order; upstream sampling already ordered them).  The first
    track in the list is taken as the pivot.
    """
    if not sampled_tracks:
        raise InvalidInput("sampled_tracks must be non-empty")
    if features_per_track < 1:
        raise InvalidInput("features_per_track must be >= 1")
    nodes: list[Clue] = []
    for t in sampled_tracks:
        if t.n_clues == 0:
            raise InvalidInput(f"track {t.track_id} has no clues")
        for m in MODALITIES:
            nodes.extend(t.clues[m][:features_per_track])
    return MultiModalGraph(nodes=nodes, pivot_track_id=sampled_tracks[0].track_id)


def track_representative(track: Track) -> np.ndarray:
    """Unit-norm mean feature used for track-level kNN.

    Face clues are preferred; tracks without faces fall back to body,
    then voice.
    """
    for m in (Modality.FACE, Modality.BODY, Modality.VOICE):
        lst = track.clues[m]
        if lst:
            mean = np.mean([c.feature for c in lst], axis=0)
            return normalize(mean)
    raise InvalidInput(f"track {track.track_id} has no clues")


def knn_tracks(
    track_reps: list[tuple[int, np.ndarray]], k: int
) -> dict[int, list[int]]:
    """For each track, the k most cosine-similar other tracks.

    Ties break toward the lower track id; the track itself is excluded.
    Representative vectors must be unit-normalized.
    """
    if k < 0:
        raise InvalidInput("k must be >= 0")
    if k >= len(track_reps):
        raise InvalidInput(f"k={k} must be < number of tracks ({len(track_reps)})")
    ids = [tid for tid, _ in track_reps]
    if len(set(ids)) != len(ids):
        raise InvalidInput("duplicate track ids in track_reps")
    if k == 0:
        return {tid: [] for tid in ids}
    reps = np.stack([vec for _, vec in track_reps])
    neg_sims = -(reps @ reps.T)
    id_arr = np.asarray(ids)
    result: dict[int, list[int]] = {}
    for pos, tid in enumerate(ids):
        # lexsort: most similar first, ties toward the lower track id
        order = np.lexsort((id_arr, neg_sims[pos]))
        picked: list[int] = []
        for q in order:
            qid = int(id_arr[q])
            if qid == tid:
                continue
            picked.append(qid)
            if len(picked) == k:
                break
        result[tid] = picked
    return result
