"""Synthetic labeled multi-modal datasets with controllable separability.

Each (identity, modality) pair gets an independent unit prototype, so
cross-modal identity evidence exists only through shared tracks. Clues are
the prototype rotated by a fixed angle toward a random orthogonal direction,
which makes the expected within-identity cosine cos(theta)^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInput
from .graph import MODALITIES, Clue, Modality, Track, normalize
from .seeding import subsystem_rng


def angle_for_within_cosine(target: float) -> float:
    """Rotation angle whose clue pairs average the given cosine."""
    if not 0.0 < target <= 1.0:
        raise InvalidInput("target cosine must be in (0, 1]")
    return math.acos(math.sqrt(target))


@dataclass(frozen=True)
class SynthConfig:
    """Generator knobs. Clue count ranges are inclusive."""

    n_identities: int = 16
    tracks_per_identity: int = 12
    clues_face: tuple[int, int] = (2, 4)
    clues_body: tuple[int, int] = (2, 4)
    clues_voice: tuple[int, int] = (1, 1)
    feat_dim: int = 16
    noise_face: float = 0.4
    noise_body: float = 0.4
    noise_voice: float = 0.4
    p_face: float = 1.0
    p_body: float = 1.0
    p_voice: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_identities < 2:
            raise InvalidInput("need at least 2 identities")
        if self.tracks_per_identity < 1:
            raise InvalidInput("need at least 1 track per identity")
        if self.feat_dim < 2:
            raise InvalidInput("feature dim must be >= 2")
        for name in ("clues_face", "clues_body", "clues_voice"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise InvalidInput(f"{name} range must satisfy 0 <= lo <= hi")
        for name in ("noise_face", "noise_body", "noise_voice"):
            v = getattr(self, name)
            if not 0.0 <= v < math.pi / 2.0:
                raise InvalidInput(f"{name} must be an angle in [0, pi/2)")
        for name in ("p_face", "p_body", "p_voice"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidInput(f"{name} must be a probability")

    def clue_range(self, m: Modality) -> tuple[int, int]:
        return {
            Modality.FACE: self.clues_face,
            Modality.BODY: self.clues_body,
            Modality.VOICE: self.clues_voice,
        }[m]

    def noise(self, m: Modality) -> float:
        return {
            Modality.FACE: self.noise_face,
            Modality.BODY: self.noise_body,
            Modality.VOICE: self.noise_voice,
        }[m]

    def presence(self, m: Modality) -> float:
        return {
            Modality.FACE: self.p_face,
            Modality.BODY: self.p_body,
            Modality.VOICE: self.p_voice,
        }[m]


@dataclass(frozen=True)
class NoiseConfig:
    """Probability that a body-bearing track's body clues get exchanged."""

    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidInput("rho must be in [0, 1]")


@dataclass
class Dataset:
    tracks: list[Track]
    feat_dim: int
    n_identities: int

    @property
    def n_tracks(self) -> int:
        return len(self.tracks)

    @property
    def n_clues(self) -> int:
        return sum(t.n_clues for t in self.tracks)

    def truth(self) -> dict[int, int]:
        """track_id -> ground-truth identity (face first, then voice, body)."""
        out = {}
        for t in self.tracks:
            ident = t.identity()
            if ident is None:
                raise InvalidInput(f"track {t.track_id} has no labeled clue")
            out[t.track_id] = ident
        return out


def _perturbed(rng, proto: np.ndarray, theta: float) -> np.ndarray:
    if theta == 0.0:
        return proto.copy()
    u = rng.standard_normal(proto.shape[0])
    u -= float(np.dot(u, proto)) * proto
    u = normalize(u)
    return math.cos(theta) * proto + math.sin(theta) * u


def generate(cfg: SynthConfig) -> Dataset:
    """Draw a labeled dataset; same config (incl. seed) is bit-identical."""
    rng = subsystem_rng(cfg.seed, "synth.generate")
    protos = {
        (i, m): normalize(rng.standard_normal(cfg.feat_dim))
        for i in range(cfg.n_identities)
        for m in MODALITIES
    }
    tracks = []
    clue_id = 0
    track_id = 0
    for ident in range(cfg.n_identities):
        for _ in range(cfg.tracks_per_identity):
            present = [m for m in MODALITIES if rng.random() < cfg.presence(m)]
            # a track is a visual detection: it always carries a face or a
            # body; voice can only ride along
            if Modality.FACE not in present and Modality.BODY not in present:
                present.append(Modality.FACE)
            clues: dict[Modality, list[Clue]] = {m: [] for m in MODALITIES}
            for m in MODALITIES:
                if m not in present:
                    continue
                lo, hi = cfg.clue_range(m)
                n = int(rng.integers(lo, hi + 1))
                for _ in range(n):
                    feat = _perturbed(rng, protos[(ident, m)], cfg.noise(m))
                    clues[m].append(
                        Clue(
                            clue_id=clue_id,
                            track_id=track_id,
                            modality=m,
                            feature=normalize(feat),
                            identity=ident,
                        )
                    )
                    clue_id += 1
            if sum(len(v) for v in clues.values()) == 0:
                # a zero-width range on every present modality: keep one face
                feat = _perturbed(rng, protos[(ident, Modality.FACE)], cfg.noise_face)
                clues[Modality.FACE].append(
                    Clue(clue_id, track_id, Modality.FACE, normalize(feat), ident)
                )
                clue_id += 1
            tracks.append(Track(track_id=track_id, clues=clues))
            track_id += 1
    return Dataset(tracks=tracks, feat_dim=cfg.feat_dim, n_identities=cfg.n_identities)


def _move_body(clues: list[Clue], new_track: int) -> list[Clue]:
    return [replace(c, track_id=new_track) for c in clues]


def inject_noise(dataset: Dataset, cfg: NoiseConfig, seed: int) -> Dataset:
    """Exchange body clue sets between randomly paired selected tracks.

    Every body-bearing track is selected independently with probability rho;
    the selected set is shuffled and swapped in consecutive pairs, an odd
    leftover keeps its own body. Face and voice clues never move.
    """
    rng = subsystem_rng(seed, "synth.noise")
    body_positions = [
        idx for idx, t in enumerate(dataset.tracks) if t.clues[Modality.BODY]
    ]
    selected = [idx for idx in body_positions if rng.random() < cfg.rho]
    order = [selected[i] for i in rng.permutation(len(selected))]
    swapped_body: dict[int, list[Clue]] = {}
    for a, b in zip(order[0::2], order[1::2]):
        ta, tb = dataset.tracks[a], dataset.tracks[b]
        swapped_body[a] = _move_body(tb.clues[Modality.BODY], ta.track_id)
        swapped_body[b] = _move_body(ta.clues[Modality.BODY], tb.track_id)
    tracks = []
    for idx, t in enumerate(dataset.tracks):
        if idx not in swapped_body:
            tracks.append(t)
            continue
        clues = {
            Modality.FACE: list(t.clues[Modality.FACE]),
            Modality.BODY: swapped_body[idx],
            Modality.VOICE: list(t.clues[Modality.VOICE]),
        }
        tracks.append(Track(track_id=t.track_id, clues=clues))
    return Dataset(
        tracks=tracks, feat_dim=dataset.feat_dim, n_identities=dataset.n_identities
    )
