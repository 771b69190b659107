"""Cyclic training: distribution update, affinity scoring, feature aggregation.

Each cycle recomputes the distribution matrix from current features with
momentum, scores all node pairs from distribution-row differences, and
aggregates same-modality neighbor features through the gated residual block.
Losses are binary cross-entropies against the identity co-membership labels:
one on feature cosines over same-modality pairs, one on affinities over all
pairs.  Backpropagation is hand-written through the entire unrolled
computation; by default the momentum term and carried-forward entries of the
previous distribution state are treated as constants (an option unrolls
through them fully).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .blocks import (
    PhiParams,
    SigmaParams,
    init_phi,
    init_sigma,
    phi_backward_batch,
    phi_forward_batch,
    sigma_backward_batch,
    sigma_forward_batch,
)
from .distribution import (
    DistributionConfig,
    DistributionState,
    distribution_backward,
    distribution_forward,
    init_distribution_arrays,
)
from .errors import InvalidInput, NumericalError
from .graph import MODALITIES, Modality, MultiModalGraph
from .optim import AdamState, adam_step

MODES = ("full", "feature-only", "distribution-only")

FEATURE_SIM_LO = 1e-6
FEATURE_SIM_HI = 1.0 - 1e-6
# affinity clamp is a numerical guard only; sigmoid outputs are in (0,1)
AFFINITY_LO = 1e-12
AFFINITY_HI = 1.0 - 1e-12


@dataclass(frozen=True)
class TrainerConfig:
    """Cycle count, loss weights, per-cycle weights, and run-length knobs."""

    cycles: int = 2
    lambda_f: float = 1.0
    lambda_d: float = 0.2
    mu_f: tuple[float, ...] | None = None
    mu_d: tuple[float, ...] | None = None
    hidden: int = 64
    iterations: int = 2000
    batch_graphs: int = 1
    lr: float = 1e-3
    lr_decay: float = 0.1
    decay_at: float = 0.8
    mode: str = "full"
    full_momentum_grad: bool = False

    def __post_init__(self):
        if self.cycles < 1:
            raise InvalidInput("cycles must be >= 1")
        if self.lambda_f < 0 or self.lambda_d < 0:
            raise InvalidInput("loss weights must be >= 0")
        for name, arr in (("mu_f", self.mu_f), ("mu_d", self.mu_d)):
            if arr is not None:
                if len(arr) != self.cycles:
                    raise InvalidInput(f"{name} must have one weight per cycle")
                if any(w < 0 for w in arr):
                    raise InvalidInput(f"{name} weights must be >= 0")
        if self.hidden < 1 or self.iterations < 1 or self.batch_graphs < 1:
            raise InvalidInput("hidden, iterations, batch_graphs must be >= 1")
        if self.mode not in MODES:
            raise InvalidInput(f"mode must be one of {MODES}")
        if not 0.0 < self.decay_at <= 1.0:
            raise InvalidInput("decay_at must be in (0, 1]")

    def mu_f_weights(self) -> np.ndarray:
        if self.mu_f is not None:
            return np.asarray(self.mu_f, dtype=np.float64)
        return _default_mu(self.cycles)

    def mu_d_weights(self) -> np.ndarray:
        if self.mu_d is not None:
            return np.asarray(self.mu_d, dtype=np.float64)
        return _default_mu(self.cycles)


def _default_mu(cycles: int) -> np.ndarray:
    # intermediate cycles weigh 0.2, the final cycle weighs 1
    mu = np.full(cycles, 0.2)
    mu[-1] = 1.0
    return mu


@dataclass
class ModelParams:
    """All learnable blocks: one scorer per cycle, one gated residual block
    per (cycle, modality).  n_input is the fixed scorer width including pads."""

    n_input: int
    feat_dim: int
    cycles: int
    hidden: int
    sigmas: list[SigmaParams]
    phis: list[dict[Modality, PhiParams]]

    def copy(self) -> "ModelParams":
        return ModelParams(
            n_input=self.n_input,
            feat_dim=self.feat_dim,
            cycles=self.cycles,
            hidden=self.hidden,
            sigmas=[s.copy() for s in self.sigmas],
            phis=[{m: p.copy() for m, p in d.items()} for d in self.phis],
        )


def init_model(
    n_input: int, feat_dim: int, cycles: int, hidden: int, rng: np.random.Generator
) -> ModelParams:
    sigmas = []
    phis = []
    for _ in range(cycles):
        sigmas.append(init_sigma(n_input, hidden, rng))
        phis.append({m: init_phi(feat_dim, rng) for m in MODALITIES})
    return ModelParams(
        n_input=n_input,
        feat_dim=feat_dim,
        cycles=cycles,
        hidden=hidden,
        sigmas=sigmas,
        phis=phis,
    )


def params_to_dict(model: ModelParams) -> dict[str, np.ndarray]:
    """Flat named view of every parameter array (shared, not copied)."""
    out: dict[str, np.ndarray] = {}
    for l, s in enumerate(model.sigmas, start=1):
        for name in ("W1", "b1", "W2", "b2"):
            out[f"sigma.{l}.{name}"] = getattr(s, name)
    for l, per_mod in enumerate(model.phis, start=1):
        for m in MODALITIES:
            p = per_mod[m]
            for name in ("Wt", "bt", "Wg", "bg"):
                out[f"phi.{l}.{m.name.lower()}.{name}"] = getattr(p, name)
    return out


def zero_grads_like(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


def label_matrix(identities: np.ndarray) -> np.ndarray:
    """Binary co-membership matrix from per-node identity labels."""
    ids = np.asarray(identities)
    if np.any(ids < 0):
        raise InvalidInput("all nodes must be labeled for training")
    return (ids[:, None] == ids[None, :]).astype(np.float64)


@dataclass
class GraphTensors:
    """A compiled subgraph: arrays plus precomputed index structures."""

    feats0: np.ndarray
    modality: np.ndarray
    track: np.ndarray
    identities: np.ndarray
    pivot_track: int
    # pair indexing (upper triangle including diagonal for affinity rows)
    iu: np.ndarray = field(init=False)
    ju: np.ndarray = field(init=False)
    # strict same-modality pairs and all strict pairs for the losses
    fpairs: tuple[np.ndarray, np.ndarray] = field(init=False)
    dpairs: tuple[np.ndarray, np.ndarray] = field(init=False)
    mod_index: dict[Modality, np.ndarray] = field(init=False)

    def __post_init__(self):
        n = self.feats0.shape[0]
        self.iu, self.ju = np.triu_indices(n)
        si, sj = np.triu_indices(n, k=1)
        same = self.modality[si] == self.modality[sj]
        self.fpairs = (si[same], sj[same])
        self.dpairs = (si, sj)
        self.mod_index = {
            m: np.flatnonzero(self.modality == int(m)) for m in MODALITIES
        }

    @property
    def n_real(self) -> int:
        return self.feats0.shape[0]


def compile_graph(graph: MultiModalGraph, require_labels: bool = False) -> GraphTensors:
    ids = graph.identities()
    if require_labels and np.any(ids < 0):
        raise InvalidInput(
            f"pivot {graph.pivot_track_id}: unlabeled clues cannot be trained on"
        )
    return GraphTensors(
        feats0=graph.features(),
        modality=graph.modality_ids(),
        track=graph.track_ids(),
        identities=ids,
        pivot_track=graph.pivot_track_id,
    )


@dataclass
class CycleTrace:
    """Per-cycle outputs: features, distribution states, affinity matrices."""

    feats: list[np.ndarray]
    dists: list[DistributionState]
    affinities: list[np.ndarray]

    @property
    def final_affinity(self) -> np.ndarray:
        return self.affinities[-1]


# ------------------------------------------------------------- affinities ---


def _pad_columns(x: np.ndarray, width: int) -> np.ndarray:
    if x.shape[1] == width:
        return x
    out = np.zeros((x.shape[0], width))
    out[:, : x.shape[1]] = x
    return out


def build_affinity(sigma: SigmaParams, dist: DistributionState) -> np.ndarray:
    """Affinity matrix over all node pairs (diagonal included) from
    distribution-row differences.  Rows narrower than the scorer are padded
    with zeros, matching inert pad nodes."""
    d = dist.d
    n = d.shape[0]
    if n > sigma.n_input:
        raise InvalidInput(
            f"graph has {n} nodes but the scorer accepts at most {sigma.n_input}"
        )
    iu, ju = np.triu_indices(n)
    x = np.abs(d[iu] - d[ju])
    a_pairs, _ = sigma_forward_batch(sigma, _pad_columns(x, sigma.n_input))
    a = np.zeros((n, n))
    a[iu, ju] = a_pairs
    a[ju, iu] = a_pairs
    return a


def feature_affinity(feats: np.ndarray) -> np.ndarray:
    """Feature-cosine fallback affinity used by the feature-only mode."""
    return np.clip((1.0 + feats @ feats.T) / 2.0, 0.0, 1.0)


def aggregate_features(
    graph: MultiModalGraph,
    affinity: np.ndarray,
    feats: np.ndarray,
    phis: dict[Modality, PhiParams],
) -> np.ndarray:
    """Row-normalized same-modality aggregation (self-loop included) followed
    by the per-modality gated residual transform."""
    gt = compile_graph(graph)
    out = np.array(feats, dtype=np.float64, copy=True)
    for m in MODALITIES:
        idx = gt.mod_index[m]
        if idx.size == 0:
            continue
        sub = affinity[np.ix_(idx, idx)]
        weights = sub / np.sum(sub, axis=1, keepdims=True)
        h = weights @ feats[idx]
        out[idx], _ = phi_forward_batch(phis[m], h, feats[idx])
    return out


# ----------------------------------------------------------------- losses ---


def _bce_forward(y: np.ndarray, p_raw: np.ndarray, lo: float, hi: float):
    p = np.clip(p_raw, lo, hi)
    loss = float(np.sum(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))
    pass_mask = (p_raw > lo) & (p_raw < hi)
    grad = np.where(pass_mask, -y / p + (1.0 - y) / (1.0 - p), 0.0)
    return loss, grad


def feature_loss(
    feats_per_cycle: list[np.ndarray],
    y: np.ndarray,
    fpairs: tuple[np.ndarray, np.ndarray],
    mu_f: np.ndarray,
) -> float:
    """Cross-entropy between labels and same-modality feature cosine
    similarities, summed over cycles with per-cycle weights."""
    pi, pj = fpairs
    total = 0.0
    for l, feats in enumerate(feats_per_cycle):
        sims = (1.0 + np.sum(feats[pi] * feats[pj], axis=1)) / 2.0
        loss, _ = _bce_forward(y[pi, pj], sims, FEATURE_SIM_LO, FEATURE_SIM_HI)
        total += float(mu_f[l]) * loss
    return total


def distribution_loss(
    affinities: list[np.ndarray],
    y: np.ndarray,
    dpairs: tuple[np.ndarray, np.ndarray],
    mu_d: np.ndarray,
) -> float:
    """Cross-entropy between labels and affinities over all node pairs."""
    qi, qj = dpairs
    total = 0.0
    for l, a in enumerate(affinities):
        loss, _ = _bce_forward(y[qi, qj], a[qi, qj], AFFINITY_LO, AFFINITY_HI)
        total += float(mu_d[l]) * loss
    return total


# ------------------------------------------------------ forward + backward ---


@dataclass
class _CycleCache:
    dist_cache: object | None
    sigma_cache: object | None
    sign_pairs: np.ndarray | None
    # per modality: (idx, weights, row_sums, gW_dot helper inputs, phi cache)
    agg: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, object]]
    feats_in: np.ndarray
    affinity: np.ndarray


def _forward(
    model: ModelParams,
    gt: GraphTensors,
    dcfg: DistributionConfig,
    tcfg: TrainerConfig,
) -> tuple[CycleTrace, list[_CycleCache]]:
    n = gt.n_real
    if n > model.n_input:
        raise InvalidInput(
            f"graph has {n} nodes but the model was built for at most {model.n_input}"
        )
    feats = gt.feats0
    d = init_distribution_arrays(gt.track, dcfg.eta)
    trace = CycleTrace(feats=[], dists=[], affinities=[])
    caches: list[_CycleCache] = []
    for l in range(tcfg.cycles):
        dist_cache = None
        sigma_cache = None
        sign_pairs = None
        if tcfg.mode == "feature-only":
            affinity = feature_affinity(feats)
        else:
            dist_in = gt.feats0 if tcfg.mode == "distribution-only" else feats
            d, dist_cache = distribution_forward(
                dist_in, gt.modality, gt.track, d, dcfg.alpha
            )
            diff = d[gt.iu] - d[gt.ju]
            sign_pairs = np.sign(diff)
            a_pairs, sigma_cache = sigma_forward_batch(
                model.sigmas[l], _pad_columns(np.abs(diff), model.n_input)
            )
            affinity = np.zeros((n, n))
            affinity[gt.iu, gt.ju] = a_pairs
            affinity[gt.ju, gt.iu] = a_pairs

        agg = []
        if tcfg.mode == "distribution-only":
            new_feats = feats
        else:
            new_feats = np.array(feats, copy=True)
            for m in MODALITIES:
                idx = gt.mod_index[m]
                if idx.size == 0:
                    continue
                sub = affinity[np.ix_(idx, idx)]
                row_sums = np.sum(sub, axis=1, keepdims=True)
                weights = sub / row_sums
                h = weights @ feats[idx]
                out, phi_cache = phi_forward_batch(model.phis[l][m], h, feats[idx])
                new_feats[idx] = out
                agg.append((idx, weights, row_sums, feats[idx], phi_cache))

        caches.append(
            _CycleCache(
                dist_cache=dist_cache,
                sigma_cache=sigma_cache,
                sign_pairs=sign_pairs,
                agg=agg,
                feats_in=feats,
                affinity=affinity,
            )
        )
        feats = new_feats
        trace.feats.append(feats)
        trace.dists.append(DistributionState(d=d, cycle=l + 1))
        trace.affinities.append(affinity)
    return trace, caches


def loss_forward(
    model: ModelParams,
    gt: GraphTensors,
    dcfg: DistributionConfig,
    tcfg: TrainerConfig,
) -> tuple[float, float, float, CycleTrace, list[_CycleCache], np.ndarray]:
    trace, caches = _forward(model, gt, dcfg, tcfg)
    y = label_matrix(gt.identities)
    lf = feature_loss(trace.feats, y, gt.fpairs, tcfg.mu_f_weights())
    if tcfg.mode == "feature-only":
        ld = 0.0
    else:
        ld = distribution_loss(trace.affinities, y, gt.dpairs, tcfg.mu_d_weights())
    total = tcfg.lambda_f * lf + tcfg.lambda_d * ld
    return total, lf, ld, trace, caches, y


def loss_backward(
    model: ModelParams,
    gt: GraphTensors,
    tcfg: TrainerConfig,
    trace: CycleTrace,
    caches: list[_CycleCache],
    y: np.ndarray,
) -> dict[str, np.ndarray]:
    """Gradients of the weighted total loss w.r.t. every model parameter."""
    n = gt.n_real
    mu_f = tcfg.mu_f_weights()
    mu_d = tcfg.mu_d_weights()
    pi, pj = gt.fpairs
    qi, qj = gt.dpairs
    grads = zero_grads_like(params_to_dict(model))

    # per-cycle loss gradients w.r.t. F^l and A^l
    grad_feats_loss: list[np.ndarray] = []
    grad_aff_loss: list[np.ndarray] = []
    for l in range(tcfg.cycles):
        gF = np.zeros((n, model.feat_dim))
        if tcfg.lambda_f > 0 and pi.size:
            feats = trace.feats[l]
            sims = (1.0 + np.sum(feats[pi] * feats[pj], axis=1)) / 2.0
            _, dbce = _bce_forward(y[pi, pj], sims, FEATURE_SIM_LO, FEATURE_SIM_HI)
            coef = tcfg.lambda_f * float(mu_f[l]) * dbce / 2.0
            np.add.at(gF, pi, coef[:, None] * feats[pj])
            np.add.at(gF, pj, coef[:, None] * feats[pi])
        grad_feats_loss.append(gF)

        gA = np.zeros((n, n))
        if tcfg.mode != "feature-only" and tcfg.lambda_d > 0:
            a = trace.affinities[l]
            _, dbce = _bce_forward(y[qi, qj], a[qi, qj], AFFINITY_LO, AFFINITY_HI)
            gA[qi, qj] = tcfg.lambda_d * float(mu_d[l]) * dbce
        grad_aff_loss.append(gA)

    grad_F = np.zeros((n, model.feat_dim))
    grad_d_carry = np.zeros((n, n))
    for l in range(tcfg.cycles - 1, -1, -1):
        cache = caches[l]
        grad_F = grad_F + grad_feats_loss[l]
        grad_A = grad_aff_loss[l]
        grad_F_prev = np.zeros((n, model.feat_dim))

        if tcfg.mode == "distribution-only":
            grad_F_prev += grad_F  # features pass through unchanged
        else:
            # gated residual + row-normalized aggregation, per modality
            grad_A = grad_A.copy()
            for idx, weights, row_sums, feats_sub, phi_cache in cache.agg:
                m = Modality(int(gt.modality[idx[0]]))
                pgrads, gH, gFsub = phi_backward_batch(phi_cache, grad_F[idx])
                key = f"phi.{l + 1}.{m.name.lower()}"
                grads[f"{key}.Wt"] += pgrads.Wt
                grads[f"{key}.bt"] += pgrads.bt
                grads[f"{key}.Wg"] += pgrads.Wg
                grads[f"{key}.bg"] += pgrads.bg
                grad_F_prev[idx] += gFsub
                grad_F_prev[idx] += weights.T @ gH
                gW = gH @ feats_sub.T
                dots = np.sum(gW * weights, axis=1, keepdims=True)
                grad_A[np.ix_(idx, idx)] += (gW - dots) / row_sums
            # nodes outside every aggregation (none in practice) pass through

        if tcfg.mode == "feature-only":
            # affinity was the clipped feature cosine map
            gC = grad_A * 0.5
            feats_in = cache.feats_in
            raw = (1.0 + feats_in @ feats_in.T) / 2.0
            gC = np.where((raw >= 0.0) & (raw <= 1.0), gC, 0.0)
            grad_F_prev += (gC + gC.T) @ feats_in
        else:
            # scorer over |d_i - d_j| rows
            g_pairs = grad_A[gt.iu, gt.ju] + grad_A[gt.ju, gt.iu]
            g_pairs = np.where(gt.iu == gt.ju, grad_A[gt.iu, gt.ju], g_pairs)
            sgrads, gX = sigma_backward_batch(cache.sigma_cache, g_pairs)
            grads[f"sigma.{l + 1}.W1"] += sgrads.W1
            grads[f"sigma.{l + 1}.b1"] += sgrads.b1
            grads[f"sigma.{l + 1}.W2"] += sgrads.W2
            grads[f"sigma.{l + 1}.b2"] += sgrads.b2
            g_diff = gX[:, :n] * cache.sign_pairs
            grad_d = np.zeros((n, n))
            np.add.at(grad_d, gt.iu, g_diff)
            np.add.at(grad_d, gt.ju, -g_diff)
            grad_d += grad_d_carry
            grad_d_carry = np.zeros((n, n))

            g_dist_feats, g_prev = distribution_backward(cache.dist_cache, grad_d)
            if tcfg.mode != "distribution-only":
                grad_F_prev += g_dist_feats
            if tcfg.full_momentum_grad:
                grad_d_carry = g_prev

        grad_F = grad_F_prev
    return grads


def train_iteration(
    graphs: list[GraphTensors],
    model: ModelParams,
    adam: AdamState,
    dcfg: DistributionConfig,
    tcfg: TrainerConfig,
) -> tuple[float, float, float]:
    """One optimization step over a batch of compiled subgraphs.

    Returns (total loss, feature loss, distribution loss) summed over the
    batch, evaluated before the parameter update.
    """
    if not graphs:
        raise InvalidInput("batch must contain at least one graph")
    params = params_to_dict(model)
    batch_grads = zero_grads_like(params)
    tot = lf_tot = ld_tot = 0.0
    for gt in graphs:
        try:
            total, lf, ld, trace, caches, y = loss_forward(model, gt, dcfg, tcfg)
        except NumericalError as exc:
            raise NumericalError(
                f"subgraph pivoted at track {gt.pivot_track}: {exc}"
            ) from exc
        if not np.isfinite(total):
            raise NumericalError(
                f"non-finite loss on the subgraph pivoted at track {gt.pivot_track}"
            )
        tot += total
        lf_tot += lf
        ld_tot += ld
        g = loss_backward(model, gt, tcfg, trace, caches, y)
        for k in batch_grads:
            batch_grads[k] += g[k]
    adam_step(adam, params, batch_grads)
    return tot, lf_tot, ld_tot


def run_inference(
    gt: GraphTensors,
    model: ModelParams,
    dcfg: DistributionConfig,
    tcfg: TrainerConfig,
) -> CycleTrace:
    """Forward pass only; the final affinity matrix feeds clustering."""
    trace, _ = _forward(model, gt, dcfg, tcfg)
    return trace


def decayed_lr(tcfg: TrainerConfig, iteration: int) -> float:
    """Learning rate for a 0-based iteration index: one multiplicative decay
    step once the configured fraction of total iterations is reached."""
    cut = int(np.floor(tcfg.decay_at * tcfg.iterations))
    if iteration >= cut and cut < tcfg.iterations:
        return tcfg.lr * tcfg.lr_decay
    return tcfg.lr
