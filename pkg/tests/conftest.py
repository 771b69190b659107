"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from cluecluster.graph import Clue, Modality, Track, normalize


def unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    return normalize(rng.normal(size=dim))


def make_track(
    track_id: int,
    n_face: int,
    n_body: int,
    n_voice: int,
    rng: np.random.Generator,
    dim: int = 8,
    identity: int | None = None,
    next_clue_id: list[int] | None = None,
) -> Track:
    """Random-feature track with the requested per-modality clue counts."""
    counter = next_clue_id if next_clue_id is not None else [0]
    clues: dict[Modality, list[Clue]] = {m: [] for m in Modality}
    for m, n in (
        (Modality.FACE, n_face),
        (Modality.BODY, n_body),
        (Modality.VOICE, n_voice),
    ):
        for _ in range(n):
            clues[m].append(
                Clue(
                    clue_id=counter[0],
                    track_id=track_id,
                    modality=m,
                    feature=unit(rng, dim),
                    identity=identity,
                )
            )
            counter[0] += 1
    return Track(track_id=track_id, clues=clues)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
