"""Synthetic dataset generation and body-association noise."""

import numpy as np
import pytest

from cluecluster.errors import InvalidInput
from cluecluster.graph import Modality
from cluecluster.synth import (
    Dataset,
    NoiseConfig,
    SynthConfig,
    angle_for_within_cosine,
    generate,
    inject_noise,
)


def body_mats(ds: Dataset):
    return {
        t.track_id: np.array([c.feature for c in t.clues[Modality.BODY]])
        for t in ds.tracks
        if t.clues[Modality.BODY]
    }


class TestConfig:
    def test_defaults_valid(self):
        SynthConfig()
        NoiseConfig()

    def test_small_feature_dim_rejected(self):
        with pytest.raises(InvalidInput):
            generate(SynthConfig(feat_dim=1))

    def test_bad_ranges_rejected(self):
        with pytest.raises(InvalidInput):
            SynthConfig(clues_face=(3, 2))
        with pytest.raises(InvalidInput):
            SynthConfig(n_identities=1)
        with pytest.raises(InvalidInput):
            SynthConfig(p_voice=1.5)
        with pytest.raises(InvalidInput):
            SynthConfig(noise_body=2.0)
        with pytest.raises(InvalidInput):
            NoiseConfig(rho=-0.1)

    def test_angle_helper(self):
        assert angle_for_within_cosine(1.0) == 0.0
        theta = angle_for_within_cosine(0.81)
        assert np.cos(theta) ** 2 == pytest.approx(0.81, abs=1e-12)
        with pytest.raises(InvalidInput):
            angle_for_within_cosine(0.0)


class TestGenerate:
    def test_shape_and_labels(self):
        cfg = SynthConfig(n_identities=4, tracks_per_identity=3, seed=11)
        ds = generate(cfg)
        assert ds.n_tracks == 12
        assert sorted(t.track_id for t in ds.tracks) == list(range(12))
        truth = ds.truth()
        assert sorted(set(truth.values())) == [0, 1, 2, 3]
        for t in ds.tracks:
            for m, lo_hi in (
                (Modality.FACE, cfg.clues_face),
                (Modality.BODY, cfg.clues_body),
                (Modality.VOICE, cfg.clues_voice),
            ):
                if t.clues[m]:
                    assert lo_hi[0] <= len(t.clues[m]) <= lo_hi[1]
            for lst in t.clues.values():
                for c in lst:
                    assert abs(np.linalg.norm(c.feature) - 1.0) < 1e-9

    def test_unique_clue_ids(self):
        ds = generate(SynthConfig(seed=3))
        ids = [c.clue_id for t in ds.tracks for lst in t.clues.values() for c in lst]
        assert len(ids) == len(set(ids))

    def test_same_seed_bit_identical(self):
        cfg = SynthConfig(seed=42)
        a, b = generate(cfg), generate(cfg)
        assert a.n_clues == b.n_clues
        for ta, tb in zip(a.tracks, b.tracks):
            assert ta.track_id == tb.track_id
            for m in Modality:
                assert len(ta.clues[m]) == len(tb.clues[m])
                for ca, cb in zip(ta.clues[m], tb.clues[m]):
                    assert ca.clue_id == cb.clue_id
                    assert ca.identity == cb.identity
                    assert np.array_equal(ca.feature, cb.feature)

    def test_different_seed_differs(self):
        a = generate(SynthConfig(seed=1))
        b = generate(SynthConfig(seed=2))
        fa = a.tracks[0].clues[Modality.FACE][0].feature
        fb = b.tracks[0].clues[Modality.FACE][0].feature
        assert not np.allclose(fa, fb)

    def test_zero_noise_collapses_within_identity(self):
        cfg = SynthConfig(
            n_identities=3,
            tracks_per_identity=4,
            noise_face=0.0,
            noise_body=0.0,
            noise_voice=0.0,
            seed=5,
        )
        ds = generate(cfg)
        for m in Modality:
            by_ident = {}
            for t in ds.tracks:
                for c in t.clues[m]:
                    by_ident.setdefault(c.identity, []).append(c.feature)
            for feats in by_ident.values():
                base = feats[0]
                for f in feats[1:]:
                    assert np.array_equal(f, base)

    def test_measured_cosine_targets(self):
        theta = angle_for_within_cosine(0.9)
        cfg = SynthConfig(
            n_identities=16,
            tracks_per_identity=6,
            feat_dim=32,
            noise_face=theta,
            noise_body=theta,
            noise_voice=theta,
            seed=2024,
        )
        ds = generate(cfg)
        faces = [
            (c.identity, c.feature)
            for t in ds.tracks
            for c in t.clues[Modality.FACE]
        ]
        idents = np.array([x[0] for x in faces])
        mat = np.array([x[1] for x in faces])
        sims = mat @ mat.T
        same = idents[:, None] == idents[None, :]
        off = ~np.eye(len(faces), dtype=bool)
        within = sims[same & off]
        across = sims[~same]
        assert abs(float(within.mean()) - 0.9) < 0.05
        assert abs(float(across.mean())) < 0.05

    def test_cross_modal_prototypes_independent(self):
        ds = generate(SynthConfig(n_identities=12, feat_dim=32, seed=8))
        pairs = []
        for t in ds.tracks:
            if t.clues[Modality.FACE] and t.clues[Modality.BODY]:
                pairs.append(
                    float(
                        np.dot(
                            t.clues[Modality.FACE][0].feature,
                            t.clues[Modality.BODY][0].feature,
                        )
                    )
                )
        assert abs(float(np.mean(pairs))) < 0.1

    def test_modality_dropout(self):
        ds = generate(SynthConfig(p_voice=0.0, seed=6))
        assert all(not t.clues[Modality.VOICE] for t in ds.tracks)
        ds2 = generate(SynthConfig(p_face=0.0, p_body=0.0, p_voice=0.0, seed=6))
        for t in ds2.tracks:
            assert t.clues[Modality.FACE] and t.n_clues == len(t.clues[Modality.FACE])

    def test_every_track_has_a_visual_modality(self):
        # voice-only tracks must not exist, whatever the dropout draws
        ds = generate(
            SynthConfig(p_face=0.3, p_body=0.3, p_voice=1.0, seed=21)
        )
        for t in ds.tracks:
            assert t.clues[Modality.FACE] or t.clues[Modality.BODY]


class TestInjectNoise:
    def _base(self, seed=17):
        return generate(
            SynthConfig(n_identities=6, tracks_per_identity=4, seed=seed)
        )

    def test_rho_zero_unchanged(self):
        ds = self._base()
        out = inject_noise(ds, NoiseConfig(rho=0.0), seed=99)
        assert out.n_clues == ds.n_clues
        before, after = body_mats(ds), body_mats(out)
        assert before.keys() == after.keys()
        for k in before:
            assert np.array_equal(before[k], after[k])

    def test_rho_one_two_tracks_swap(self):
        ds = generate(
            SynthConfig(n_identities=2, tracks_per_identity=1, seed=4)
        )
        assert len(body_mats(ds)) == 2
        out = inject_noise(ds, NoiseConfig(rho=1.0), seed=1)
        b0, b1 = body_mats(ds)[0], body_mats(ds)[1]
        a0, a1 = body_mats(out)[0], body_mats(out)[1]
        assert np.array_equal(a0, b1) and np.array_equal(a1, b0)

    def test_face_voice_and_ids_invariant(self):
        ds = self._base()
        out = inject_noise(ds, NoiseConfig(rho=0.8), seed=5)
        assert [t.track_id for t in out.tracks] == [t.track_id for t in ds.tracks]
        assert out.n_clues == ds.n_clues
        for ta, tb in zip(ds.tracks, out.tracks):
            for m in (Modality.FACE, Modality.VOICE):
                assert len(ta.clues[m]) == len(tb.clues[m])
                for ca, cb in zip(ta.clues[m], tb.clues[m]):
                    assert ca.clue_id == cb.clue_id
                    assert np.array_equal(ca.feature, cb.feature)
        assert out.truth() == ds.truth()

    def test_moved_bodies_keep_source_identity(self):
        ds = generate(SynthConfig(n_identities=2, tracks_per_identity=1, seed=4))
        out = inject_noise(ds, NoiseConfig(rho=1.0), seed=1)
        for t in out.tracks:
            for c in t.clues[Modality.BODY]:
                assert c.track_id == t.track_id
                assert c.identity != t.identity()

    def test_same_seed_same_noise(self):
        ds = self._base()
        o1 = inject_noise(ds, NoiseConfig(rho=0.5), seed=7)
        o2 = inject_noise(ds, NoiseConfig(rho=0.5), seed=7)
        m1, m2 = body_mats(o1), body_mats(o2)
        assert m1.keys() == m2.keys()
        for k in m1:
            assert np.array_equal(m1[k], m2[k])

    def test_swapped_fraction_concentrates(self):
        ds = generate(
            SynthConfig(n_identities=100, tracks_per_identity=10, seed=33)
        )
        before = body_mats(ds)
        fracs = []
        for seed in range(5):
            out = inject_noise(ds, NoiseConfig(rho=0.5), seed=seed)
            after = body_mats(out)
            changed = sum(
                0 if before[k].shape == after[k].shape
                and np.array_equal(before[k], after[k])
                else 1
                for k in before
            )
            fracs.append(changed / len(before))
        for f in fracs:
            assert 0.44 <= f <= 0.56, fracs
