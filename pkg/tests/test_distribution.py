"""Distribution-representation computation against brute-force references."""

from __future__ import annotations

import numpy as np
import pytest

from cluecluster.distribution import (
    DistributionConfig,
    DistributionState,
    compute_distribution,
    cross_modality_prob,
    distribution_backward,
    distribution_forward,
    init_distribution,
    init_distribution_arrays,
    intra_modality_prob,
)
from cluecluster.errors import InvalidInput
from cluecluster.graph import Clue, Modality, Track, build_graph

from conftest import make_track, unit
from oracles import distribution_oracle


def random_arrays(rng, n_max=12, t_max=4, dim=5):
    n = int(rng.integers(2, n_max + 1))
    modality = rng.integers(0, 3, size=n)
    track = rng.integers(0, t_max, size=n)
    feats = np.stack([unit(rng, dim) for _ in range(n)])
    return modality, track, feats


def test_config_bounds():
    DistributionConfig(eta=0.0, alpha=1.0)
    with pytest.raises(InvalidInput):
        DistributionConfig(eta=-0.1)
    with pytest.raises(InvalidInput):
        DistributionConfig(alpha=1.5)


def test_init_values(rng):
    counter = [0]
    tracks = [
        make_track(0, 1, 1, 0, rng, next_clue_id=counter),
        make_track(1, 1, 0, 1, rng, next_clue_id=counter),
    ]
    g = build_graph(tracks, features_per_track=2)
    st = init_distribution(g, eta=0.7)
    assert st.cycle == 0
    expect = np.array(
        [
            [1.0, 0.7, 0.3, 0.3],
            [0.7, 1.0, 0.3, 0.3],
            [0.3, 0.3, 1.0, 0.7],
            [0.3, 0.3, 0.7, 1.0],
        ]
    )
    np.testing.assert_allclose(st.d, expect)


def test_init_eta_half_and_singleton(rng):
    g = build_graph([make_track(0, 1, 1, 0, rng)], features_per_track=2)
    st = init_distribution(g, eta=0.5)
    np.testing.assert_allclose(st.d, [[1.0, 0.5], [0.5, 1.0]])

    g1 = build_graph([make_track(0, 1, 0, 0, rng)], features_per_track=1)
    st1 = init_distribution(g1, eta=0.9)
    np.testing.assert_allclose(st1.d, [[1.0]])


def test_init_rejects_bad_eta():
    with pytest.raises(InvalidInput):
        init_distribution_arrays(np.array([0, 1]), eta=1.2)


def test_intra_modality_prob_basics():
    v = np.array([1.0, 0.0])
    assert intra_modality_prob(v, v) == 1.0
    assert intra_modality_prob(v, np.array([0.0, 1.0])) == 0.5
    assert intra_modality_prob(v, -v) == 0.0
    with pytest.raises(InvalidInput):
        intra_modality_prob(v, np.zeros(2))


def _two_track_graph(rng):
    counter = [0]
    tracks = [
        make_track(0, 2, 1, 0, rng, next_clue_id=counter),
        make_track(1, 2, 0, 1, rng, next_clue_id=counter),
    ]
    return build_graph(tracks, features_per_track=4)


def test_cross_modality_same_track_is_one(rng):
    g = _two_track_graph(rng)
    intra = np.zeros((g.n_nodes, g.n_nodes))
    prev = init_distribution(g, 0.7)
    # node 0 face and node 2 body share track 0
    assert cross_modality_prob(g, 0, 2, intra, prev) == 1.0


def test_cross_modality_bridge_mean():
    # body clue 0 in track 0; face clues 1, 2 in track 1; face clue 3 in
    # track 0 bridges nothing here.  Probing (0 body, 1 face): bridges are
    # face clues in track... build it concretely instead.
    feats = {
        0: np.array([1.0, 0.0]),
        1: np.array([0.0, 1.0]),
    }
    c_body = Clue(0, 0, Modality.BODY, np.array([1.0, 0.0]))
    c_face_t0 = Clue(1, 0, Modality.FACE, np.array([1.0, 0.0]))
    c_face_t1a = Clue(2, 1, Modality.FACE, np.array([0.6, 0.8]))
    c_face_t1b = Clue(3, 1, Modality.FACE, np.array([0.8, 0.6]))
    t0 = Track(0, {Modality.FACE: [c_face_t0], Modality.BODY: [c_body]})
    t1 = Track(1, {Modality.FACE: [c_face_t1a, c_face_t1b]})
    g = build_graph([t0, t1], features_per_track=4)
    # order: t0 face(1), t0 body(0), t1 face(2), t1 face(3)
    n = g.n_nodes
    intra = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if g.nodes[i].modality == g.nodes[j].modality:
                intra[i, j] = intra_modality_prob(g.nodes[i].feature, g.nodes[j].feature)
    prev = init_distribution(g, 0.7)
    # node 1 = body clue in track 0; nodes 2,3 = faces in track 1: no body
    # clues in track 1, so bridges for (1 -> 2) are empty: carry-forward.
    assert cross_modality_prob(g, 1, 2, intra, prev) == pytest.approx(0.3)
    # node 0 = face in track 0 probing body clue? reverse direction: (2 -> 1):
    # bridges = face clues in track 0 = {node 0}; mean of intra(2, 0)
    expect = intra[2, 0]
    assert cross_modality_prob(g, 2, 1, intra, prev) == pytest.approx(expect)


def test_cross_modality_hand_mean_example():
    # bridge similarities 0.8 and 0.6 average to 0.7
    c0 = Clue(0, 0, Modality.BODY, np.array([1.0, 0.0, 0.0]))
    b1 = Clue(1, 1, Modality.BODY, np.array([0.6, 0.8, 0.0]))   # cos 0.6 -> s 0.8
    b2 = Clue(2, 1, Modality.BODY, np.array([0.2, np.sqrt(1 - 0.04), 0.0]))  # s 0.6
    f1 = Clue(3, 1, Modality.FACE, np.array([0.0, 0.0, 1.0]))
    t0 = Track(0, {Modality.BODY: [c0]})
    t1 = Track(1, {Modality.FACE: [f1], Modality.BODY: [b1, b2]})
    g = build_graph([t0, t1], features_per_track=4)
    # node order: 0=c0(t0 body), 1=f1(t1 face), 2=b1, 3=b2
    n = g.n_nodes
    intra = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if g.nodes[i].modality == g.nodes[j].modality:
                intra[i, j] = intra_modality_prob(g.nodes[i].feature, g.nodes[j].feature)
    prev = init_distribution(g, 0.7)
    got = cross_modality_prob(g, 0, 1, intra, prev)
    assert got == pytest.approx(0.7, abs=1e-12)


def test_cross_modality_rejects_same_modality(rng):
    g = _two_track_graph(rng)
    prev = init_distribution(g, 0.7)
    with pytest.raises(InvalidInput):
        cross_modality_prob(g, 0, 1, prev.d, prev)


def test_compute_momentum_degenerate_cases(rng):
    g = _two_track_graph(rng)
    prev = init_distribution(g, 0.7)
    feats = g.features()

    out1 = compute_distribution(g, feats, prev, DistributionConfig(eta=0.7, alpha=1.0))
    np.testing.assert_allclose(out1.d, prev.d, atol=0)
    assert out1.cycle == 1

    out0 = compute_distribution(g, feats, prev, DistributionConfig(eta=0.7, alpha=0.0))
    oracle = distribution_oracle(
        [int(m) for m in g.modality_ids()],
        [int(t) for t in g.track_ids()],
        feats,
        prev.d.tolist(),
        alpha=0.0,
    )
    np.testing.assert_allclose(out0.d, oracle, atol=1e-15)


def test_compute_matches_oracle_hand_graph(rng):
    counter = [0]
    tracks = [
        make_track(0, 2, 1, 0, rng, next_clue_id=counter),
        make_track(1, 1, 1, 1, rng, next_clue_id=counter),
    ]
    g = build_graph(tracks, features_per_track=4)
    assert g.n_nodes == 6
    prev = init_distribution(g, 0.7)
    out = compute_distribution(g, g.features(), prev, DistributionConfig(0.7, 0.5))
    oracle = distribution_oracle(
        [int(m) for m in g.modality_ids()],
        [int(t) for t in g.track_ids()],
        g.features(),
        None,
        eta=0.7,
        alpha=0.5,
    )
    np.testing.assert_allclose(out.d, oracle, atol=1e-12)


def test_compute_matches_oracle_random_graphs(rng):
    for trial in range(50):
        modality, track, feats = random_arrays(rng)
        n = len(modality)
        prev = init_distribution_arrays(track, eta=0.7)
        alpha = float(rng.uniform(0, 1))
        d, _ = distribution_forward(feats, modality, track, prev, alpha)
        oracle = distribution_oracle(
            [int(m) for m in modality],
            [int(t) for t in track],
            feats,
            prev.tolist(),
            alpha=alpha,
        )
        assert np.max(np.abs(d - oracle)) < 1e-12


def test_output_invariants_fuzz(rng):
    for trial in range(25):
        modality, track, feats = random_arrays(rng)
        prev = init_distribution_arrays(track, eta=float(rng.uniform(0, 1)))
        d, _ = distribution_forward(feats, modality, track, prev, 0.5)
        np.testing.assert_allclose(d, d.T, atol=1e-15)
        np.testing.assert_allclose(np.diag(d), 1.0)
        assert np.all(d >= 0.0) and np.all(d <= 1.0)


def test_momentum_linearity(rng):
    modality, track, feats = random_arrays(rng)
    prev = init_distribution_arrays(track, eta=0.6)
    alpha = 0.37
    d_a, _ = distribution_forward(feats, modality, track, prev, alpha)
    d_0, _ = distribution_forward(feats, modality, track, prev, 0.0)
    np.testing.assert_array_equal(d_a, alpha * prev + (1.0 - alpha) * d_0)


def test_permutation_equivariance(rng):
    modality, track, feats = random_arrays(rng, n_max=10)
    n = len(modality)
    prev = init_distribution_arrays(track, eta=0.7)
    d, _ = distribution_forward(feats, modality, track, prev, 0.5)
    perm = rng.permutation(n)
    d_p, _ = distribution_forward(
        feats[perm], modality[perm], track[perm], prev[np.ix_(perm, perm)], 0.5
    )
    np.testing.assert_allclose(d_p, d[np.ix_(perm, perm)], atol=1e-12)


def test_dimension_mismatch_rejected(rng):
    g = _two_track_graph(rng)
    prev = init_distribution(g, 0.7)
    with pytest.raises(InvalidInput):
        compute_distribution(g, g.features()[:-1], prev, DistributionConfig())
    bad_prev = DistributionState(d=np.eye(3))
    with pytest.raises(InvalidInput):
        compute_distribution(g, g.features(), bad_prev, DistributionConfig())


def _fd_grad(fn, x, step=1e-6):
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        hi = fn()
        flat[idx] = orig - step
        lo = fn()
        flat[idx] = orig
        gf[idx] = (hi - lo) / (2 * step)
    return g


def test_backward_matches_finite_differences(rng):
    # includes a track lacking any body clue so carry-forward entries exist
    modality = np.array([0, 0, 1, 2, 0, 2])
    track = np.array([0, 0, 0, 1, 1, 2])
    feats = np.stack([unit(rng, 4) for _ in range(6)])
    prev = init_distribution_arrays(track, eta=0.7)
    r = rng.normal(size=(6, 6))

    def loss():
        d, _ = distribution_forward(feats, modality, track, prev, 0.5)
        return float(np.sum(r * d))

    d, cache = distribution_forward(feats, modality, track, prev, 0.5)
    grad_feats, grad_prev = distribution_backward(cache, r)

    fd_feats = _fd_grad(loss, feats)
    np.testing.assert_allclose(grad_feats, fd_feats, atol=1e-7)

    fd_prev = _fd_grad(loss, prev)
    np.testing.assert_allclose(grad_prev, fd_prev, atol=1e-7)


def test_backward_carry_forward_entries_route_to_prev(rng):
    # two tracks, disjoint modalities: every cross pair lacks bridges
    modality = np.array([0, 2])
    track = np.array([0, 1])
    feats = np.stack([unit(rng, 3) for _ in range(2)])
    prev = init_distribution_arrays(track, eta=0.7)
    d, cache = distribution_forward(feats, modality, track, prev, 0.0)
    # carry-forward keeps the initialization value
    assert d[0, 1] == pytest.approx(0.3)
    grad = np.zeros((2, 2))
    grad[0, 1] = 1.0
    g_feats, g_prev = distribution_backward(cache, grad)
    np.testing.assert_allclose(g_feats, 0.0, atol=0)
    # symmetrization splits the unit upstream gradient across (0,1) and (1,0)
    assert g_prev[0, 1] == pytest.approx(0.5)
    assert g_prev[1, 0] == pytest.approx(0.5)
