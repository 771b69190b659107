"""Distribution representations: per-node identity-probability vectors.

Row i of the state matrix holds node i's probability of sharing an identity
with every node in the graph.  Entries come from three rules: same-modality
pairs use feature similarity mapped to [0,1]; same-track cross-modality pairs
are certain (probability 1); cross-track cross-modality pairs average the
similarities toward bridge nodes (same modality as i, same track as j).
Updates blend the previous state with the freshly computed matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput
from .graph import MultiModalGraph


@dataclass(frozen=True)
class DistributionConfig:
    """eta: soft-initialization value for same-track entries; alpha: momentum
    weight on the previous state."""

    eta: float = 0.7
    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidInput("eta must be in [0, 1]")
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidInput("alpha must be in [0, 1]")


@dataclass
class DistributionState:
    """N x N identity-probability matrix plus the cycle that produced it."""

    d: np.ndarray
    cycle: int = 0

    @property
    def n(self) -> int:
        return self.d.shape[0]


def init_distribution_arrays(track_ids: np.ndarray, eta: float) -> np.ndarray:
    """Soft initialization: eta where tracks match, 1-eta elsewhere, diagonal 1."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidInput("eta must be in [0, 1]")
    t = np.asarray(track_ids)
    if t.size == 0:
        raise InvalidInput("graph must be non-empty")
    same = t[:, None] == t[None, :]
    d = np.where(same, eta, 1.0 - eta)
    np.fill_diagonal(d, 1.0)
    return d


def init_distribution(graph: MultiModalGraph, eta: float) -> DistributionState:
    return DistributionState(d=init_distribution_arrays(graph.track_ids(), eta), cycle=0)


def intra_modality_prob(f_i: np.ndarray, f_j: np.ndarray) -> float:
    """Cosine similarity mapped to [0,1]: (1 + cos) / 2."""
    a = np.asarray(f_i, dtype=np.float64)
    b = np.asarray(f_j, dtype=np.float64)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise InvalidInput("zero vector has no direction")
    cos = float(a @ b) / (na * nb)
    return min(1.0, max(0.0, (1.0 + cos) / 2.0))


def cross_modality_prob(
    graph: MultiModalGraph,
    i: int,
    j: int,
    intra: np.ndarray,
    prev: DistributionState,
) -> float:
    """Identity probability across modalities.

    Same track: 1 by definition.  Otherwise the mean of intra(i, k) over
    bridge nodes k (same modality as i, same track as j); an empty bridge set
    carries the previous state's entry forward.
    """
    if graph.modality_of(i) == graph.modality_of(j):
        raise InvalidInput("cross_modality_prob requires differing modalities")
    if graph.track_edge(i, j):
        return 1.0
    bridges = [
        k
        for k in range(graph.n_nodes)
        if graph.modality_edge(i, k) and graph.track_edge(k, j)
    ]
    if not bridges:
        return float(prev.d[i, j])
    return float(np.mean([intra[i, k] for k in bridges]))


@dataclass
class DistributionCache:
    """Intermediates retained by distribution_forward for the backward pass."""

    feats: np.ndarray
    clip_pass: np.ndarray
    same_mod_all: np.ndarray
    same_mod_offdiag: np.ndarray
    cross_bridge: np.ndarray
    cross_carry: np.ndarray
    counts_by_pair: np.ndarray
    track_onehot: np.ndarray
    track_col: np.ndarray
    alpha: float


def distribution_forward(
    feats: np.ndarray,
    modality: np.ndarray,
    track: np.ndarray,
    prev_d: np.ndarray,
    alpha: float,
) -> tuple[np.ndarray, DistributionCache]:
    """Vectorized distribution update over all node pairs.

    Returns the momentum-blended matrix alpha*prev + (1-alpha)*sym, where sym
    is the freshly computed pairwise matrix symmetrized by averaging with its
    transpose and given a unit diagonal.
    """
    feats = np.asarray(feats, dtype=np.float64)
    n = feats.shape[0]
    if prev_d.shape != (n, n):
        raise InvalidInput(f"prev matrix shape {prev_d.shape} does not match {n} nodes")
    modality = np.asarray(modality)
    track = np.asarray(track)

    raw_cos01 = (1.0 + feats @ feats.T) / 2.0
    clip_pass = (raw_cos01 >= 0.0) & (raw_cos01 <= 1.0)
    s = np.clip(raw_cos01, 0.0, 1.0)

    eye = np.eye(n, dtype=bool)
    same_mod_all = modality[:, None] == modality[None, :]
    same_mod_offdiag = same_mod_all & ~eye
    same_track = track[:, None] == track[None, :]
    diff_mod = ~same_mod_all
    track_xmod = same_track & diff_mod
    cross = ~same_track & diff_mod

    # Bridge means: group same-modality similarities of row i by the bridge
    # node's track, then read off the column of j's track.
    uniq, track_idx = np.unique(track, return_inverse=True)
    onehot = np.zeros((n, uniq.size))
    onehot[np.arange(n), track_idx] = 1.0
    group_sum = (s * same_mod_all) @ onehot
    group_cnt = same_mod_all.astype(np.float64) @ onehot
    sums_by_pair = group_sum[:, track_idx]
    counts_by_pair = group_cnt[:, track_idx]

    has_bridge = counts_by_pair > 0.0
    cross_bridge = cross & has_bridge
    cross_carry = cross & ~has_bridge

    raw = np.zeros((n, n))
    raw[same_mod_offdiag] = s[same_mod_offdiag]
    raw[track_xmod] = 1.0
    safe_cnt = np.where(counts_by_pair > 0.0, counts_by_pair, 1.0)
    bridge_mean = sums_by_pair / safe_cnt
    raw[cross_bridge] = bridge_mean[cross_bridge]
    raw[cross_carry] = prev_d[cross_carry]
    np.fill_diagonal(raw, 1.0)

    sym = (raw + raw.T) / 2.0
    np.fill_diagonal(sym, 1.0)
    d = alpha * prev_d + (1.0 - alpha) * sym

    cache = DistributionCache(
        feats=feats,
        clip_pass=clip_pass,
        same_mod_all=same_mod_all,
        same_mod_offdiag=same_mod_offdiag,
        cross_bridge=cross_bridge,
        cross_carry=cross_carry,
        counts_by_pair=safe_cnt,
        track_onehot=onehot,
        track_col=track_idx,
        alpha=alpha,
    )
    return d, cache


def distribution_backward(
    cache: DistributionCache, grad_d: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of a scalar loss w.r.t. the input features and the previous
    matrix, given the gradient w.r.t. distribution_forward's output.

    The previous-matrix gradient combines the momentum term and any
    carried-forward entries; the caller decides whether to propagate it.
    """
    alpha = cache.alpha
    grad_prev = alpha * grad_d

    g = (1.0 - alpha) * grad_d
    g = g.copy()
    np.fill_diagonal(g, 0.0)
    grad_raw = (g + g.T) / 2.0

    grad_s = np.where(cache.same_mod_offdiag, grad_raw, 0.0)

    per_pair = np.where(cache.cross_bridge, grad_raw / cache.counts_by_pair, 0.0)
    w_by_track = per_pair @ cache.track_onehot
    grad_s += w_by_track[:, cache.track_col] * cache.same_mod_all

    grad_prev = grad_prev + np.where(cache.cross_carry, grad_raw, 0.0)

    grad_cos = np.where(cache.clip_pass, grad_s, 0.0) * 0.5
    grad_feats = (grad_cos + grad_cos.T) @ cache.feats
    return grad_feats, grad_prev


def compute_distribution(
    graph: MultiModalGraph,
    features: np.ndarray,
    prev: DistributionState,
    cfg: DistributionConfig,
) -> DistributionState:
    """One momentum-blended distribution update for a graph."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.shape[0] != graph.n_nodes:
        raise InvalidInput("feature count does not match graph size")
    if prev.d.shape != (graph.n_nodes, graph.n_nodes):
        raise InvalidInput("previous state size does not match graph")
    d, _ = distribution_forward(
        feats, graph.modality_ids(), graph.track_ids(), prev.d, cfg.alpha
    )
    return DistributionState(d=d, cycle=prev.cycle + 1)
