"""Dataset-level orchestration: sampling, training, inference, evaluation.

Everything downstream of a loaded dataset lives here: per-track density
sampling, the track kNN graph, per-pivot neighborhood subgraphs, the
training loop, whole-dataset linkage inference, and metric evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import LinkageTable, cluster, merge_linkages, track_linkage
from .config import RunConfig
from .errors import InvalidInput
from .graph import (
    MODALITIES,
    Modality,
    Track,
    build_graph,
    knn_tracks,
    track_representative,
)
from .metrics import cf, character_pr, nmi, wcp
from .optim import AdamState
from .sampling import NeighborhoodSample, density_sample_features, sample_neighborhood
from .seeding import subsystem_rng
from .synth import Dataset, NoiseConfig, inject_noise
from .training import (
    GraphTensors,
    ModelParams,
    compile_graph,
    decayed_lr,
    init_model,
    run_inference,
    train_iteration,
)

SWEEP_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(1, 10))


def filter_modalities(ds: Dataset, keep: tuple[Modality, ...]) -> Dataset:
    """Drop clues outside the kept modalities; tracks left empty are removed."""
    if set(keep) == set(MODALITIES):
        return ds
    tracks = []
    for t in ds.tracks:
        clues = {m: (list(t.clues[m]) if m in keep else []) for m in MODALITIES}
        if sum(len(v) for v in clues.values()) == 0:
            continue
        tracks.append(Track(track_id=t.track_id, clues=clues))
    if not tracks:
        raise InvalidInput("modality filter removed every track")
    return Dataset(tracks=tracks, feat_dim=ds.feat_dim, n_identities=ds.n_identities)


def apply_load_transforms(ds: Dataset, cfg: RunConfig) -> Dataset:
    """Modality subset plus optional body-association noise, both load-time."""
    out = filter_modalities(ds, cfg.subset())
    if cfg.rho > 0.0:
        out = inject_noise(out, NoiseConfig(rho=cfg.rho), seed=cfg.seed)
    return out


@dataclass
class PreparedDataset:
    """Sampled tracks, their kNN, and one neighborhood per pivot track."""

    dataset: Dataset
    sampled: dict[int, Track]
    neighborhoods: dict[int, NeighborhoodSample]
    n_input: int
    per_modality_cap: int
    require_labels: bool

    @property
    def track_ids(self) -> list[int]:
        return sorted(self.sampled)

    def compile_pivot(self, pivot: int) -> GraphTensors:
        hood = self.neighborhoods[pivot]
        graph = build_graph(
            [self.sampled[tid] for tid in hood.track_ids],
            features_per_track=self.per_modality_cap,
        )
        return compile_graph(graph, require_labels=self.require_labels)


def prepare(ds: Dataset, cfg: RunConfig, require_labels: bool) -> PreparedDataset:
    sampled: dict[int, Track] = {}
    for t in ds.tracks:
        picked = {m: density_sample_features(t, m, cfg.sampler) for m in MODALITIES}
        sampled[t.track_id] = Track(track_id=t.track_id, clues=picked)
    reps = [(tid, track_representative(sampled[tid])) for tid in sorted(sampled)]
    k = min(cfg.sampler.k, len(reps) - 1)
    knn = knn_tracks(reps, k)
    neighborhoods = {
        tid: sample_neighborhood(tid, sampled, knn, cfg.sampler)
        for tid in sorted(sampled)
    }
    widest = max(t.n_clues for t in sampled.values())
    n_input = min(cfg.sampler.p + 1, len(sampled)) * widest
    return PreparedDataset(
        dataset=ds,
        sampled=sampled,
        neighborhoods=neighborhoods,
        n_input=n_input,
        per_modality_cap=cfg.sampler.q,
        require_labels=require_labels,
    )


@dataclass
class TrainResult:
    model: ModelParams
    adam: AdamState
    log_rows: list[tuple[int, float, float, float, float]]
    n_input: int

    @property
    def final_loss(self) -> float:
        return self.log_rows[-1][1] if self.log_rows else float("nan")


def train_model(ds: Dataset, cfg: RunConfig) -> TrainResult:
    """Run the configured number of iterations over random pivot batches."""
    tcfg = cfg.trainer
    prepared = prepare(ds, cfg, require_labels=True)
    tensors = {
        tid: prepared.compile_pivot(tid) for tid in prepared.track_ids
    }
    model = init_model(
        n_input=prepared.n_input,
        feat_dim=ds.feat_dim,
        cycles=tcfg.cycles,
        hidden=tcfg.hidden,
        rng=subsystem_rng(cfg.seed, "trainer.init"),
    )
    adam = AdamState(lr=tcfg.lr)
    batch_rng = subsystem_rng(cfg.seed, "trainer.batch")
    pivots = prepared.track_ids
    take = min(tcfg.batch_graphs, len(pivots))
    rows = []
    for it in range(tcfg.iterations):
        adam.lr = decayed_lr(tcfg, it)
        chosen = batch_rng.choice(len(pivots), size=take, replace=False)
        batch = [tensors[pivots[int(i)]] for i in chosen]
        total, lf, ld = train_iteration(batch, model, adam, cfg.distribution, tcfg)
        rows.append((it, total, lf, ld, adam.lr))
    return TrainResult(model=model, adam=adam, log_rows=rows, n_input=prepared.n_input)


def check_width(model: ModelParams, prepared: PreparedDataset) -> None:
    if prepared.n_input > model.n_input:
        raise InvalidInput(
            f"checkpoint scorer width {model.n_input} cannot host subgraphs "
            f"of up to {prepared.n_input} nodes; regenerate or retrain"
        )


def infer_linkage(ds: Dataset, cfg: RunConfig, model: ModelParams) -> tuple[LinkageTable, list[int]]:
    """Run inference with every track as pivot and pool the evidence."""
    prepared = prepare(ds, cfg, require_labels=False)
    check_width(model, prepared)
    tables = []
    for pivot in prepared.track_ids:
        gt = prepared.compile_pivot(pivot)
        trace = run_inference(gt, model, cfg.distribution, cfg.trainer)
        table = LinkageTable()
        for (a, b), score, count in track_linkage(gt, trace.final_affinity):
            table.add(a, b, score, count)
        tables.append(table)
    return merge_linkages(tables), prepared.track_ids


def evaluate_assignment(assignment: dict[int, int], truth: dict[int, int]) -> dict[str, float]:
    missing = sorted(set(truth) - set(assignment))
    if missing:
        raise InvalidInput(f"assignment is missing tracks: {missing}")
    extra = sorted(set(assignment) - set(truth))
    if extra:
        raise InvalidInput(f"assignment has unknown tracks: {extra}")
    cp, cr = character_pr(assignment, truth)
    return {
        "wcp": wcp(assignment, truth),
        "nmi": nmi(assignment, truth),
        "cp": cp,
        "cr": cr,
        "cf": cf(cp, cr),
    }


def sweep_rows(
    linkage: LinkageTable, track_ids: list[int], truth: dict[int, int]
) -> list[tuple[float, float, float, float, float, float]]:
    rows = []
    for thr in SWEEP_THRESHOLDS:
        assn = cluster(linkage, thr, track_ids)
        m = evaluate_assignment(assn.assignment, truth)
        rows.append((thr, m["wcp"], m["nmi"], m["cp"], m["cr"], m["cf"]))
    return rows


def best_by_nmi(rows) -> tuple[float, float]:
    """(threshold, nmi) of the sweep row with the highest NMI."""
    best = max(rows, key=lambda r: (r[2], -r[0]))
    return best[0], best[2]
