"""Command-line front end: gen, train, cluster, eval, gradcheck."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dataio, pipeline
from .clustering import cluster
from .config import MODALITY_SUBSETS, RunConfig, apply_overrides, load_config
from .errors import ClueClusterError, NumericalError
from .gradcheck import check_end_to_end, check_phi, check_sigma
from .plots import plot_metric_bars, plot_sweep, plot_training_curve
from .synth import generate

ABLATION_MODES = ("full", "feature-only", "distribution-only")
BLOCK_TOL = 1e-5
END_TO_END_TOL = 1e-4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config file")
    p.add_argument("--seed", type=int, help="root seed override")
    p.add_argument(
        "--mode",
        choices=ABLATION_MODES + tuple(k for k in MODALITY_SUBSETS if k != "fbv"),
        help="ablation mode or modality subset",
    )
    p.add_argument("--threshold", type=float, help="clustering threshold")
    p.add_argument("--sweep", action="store_true", help="sweep 9 thresholds")
    p.add_argument("--eta", type=float, help="soft initialization weight")
    p.add_argument("--alpha", type=float, help="distribution momentum")
    p.add_argument("--lambda-f", dest="lambda_f", type=float, help="feature loss weight")
    p.add_argument("--lambda-d", dest="lambda_d", type=float, help="distribution loss weight")
    p.add_argument("--generations", type=int, help="refinement cycles L")
    p.add_argument("--iterations", type=int, help="training iterations")
    p.add_argument("--rho", type=float, help="body-noise injection ratio at load")


def _effective_config(args, base: RunConfig | None = None) -> RunConfig:
    cfg = base
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    if cfg is None:
        cfg = RunConfig()
    over = dict(
        seed=args.seed,
        threshold=args.threshold,
        rho=args.rho,
        eta=args.eta,
        alpha=args.alpha,
        lambda_f=args.lambda_f,
        lambda_d=args.lambda_d,
        cycles=args.generations,
        iterations=args.iterations,
    )
    if args.mode is not None:
        if args.mode in ABLATION_MODES:
            over["mode"] = args.mode
        else:
            over["modalities"] = args.mode
    return apply_overrides(cfg, **over)


def _load(datadir, cfg: RunConfig):
    ds = dataio.read_dataset(datadir)
    return pipeline.apply_load_transforms(ds, cfg)


def cmd_gen(args) -> int:
    cfg = _effective_config(args)
    synth_cfg = cfg.synth
    if cfg.seed != synth_cfg.seed:
        from dataclasses import replace

        synth_cfg = replace(synth_cfg, seed=cfg.seed)
    ds = generate(synth_cfg)
    dataio.write_dataset(ds, args.outdir)
    per_mod = {
        m.name.lower(): sum(len(t.clues[m]) for t in ds.tracks)
        for m in list(ds.tracks[0].clues)
    }
    print(
        f"wrote {args.outdir}: {ds.n_tracks} tracks, {ds.n_clues} clues "
        f"({per_mod['face']} face / {per_mod['body']} body / {per_mod['voice']} voice), "
        f"{ds.n_identities} identities"
    )
    return 0


def cmd_train(args) -> int:
    cfg = _effective_config(args)
    ds = _load(args.datadir, cfg)
    result = pipeline.train_model(ds, cfg)
    out = Path(args.out) if args.out else Path(args.datadir) / "checkpoint.ckpt"
    dataio.write_checkpoint(out, cfg, result.model, result.adam)
    log_path = out.with_name(out.stem + "_log.csv")
    dataio.write_table(
        log_path,
        ["iteration", "loss", "feature_loss", "distribution_loss", "lr"],
        [[it, lo, lf, ld, lr] for it, lo, lf, ld, lr in result.log_rows],
    )
    curve_path = out.with_name(out.stem + "_curve.png")
    plot_training_curve(result.log_rows, curve_path)
    print(
        f"trained {cfg.trainer.iterations} iterations (mode {cfg.trainer.mode}, "
        f"L={cfg.trainer.cycles}, width {result.n_input}); final loss {result.final_loss:.6f}"
    )
    print(f"checkpoint {out}")
    print(f"log {log_path}")
    print(f"figure {curve_path}")
    return 0


def cmd_cluster(args) -> int:
    header, arrays = dataio.read_checkpoint(args.checkpoint)
    base = dataio.checkpoint_config(header)
    cfg = _effective_config(args, base=base)
    model = dataio.model_from_checkpoint(header, arrays)
    ds = _load(args.datadir, cfg)
    linkage, track_ids = pipeline.infer_linkage(ds, cfg, model)
    out = Path(args.out) if args.out else Path(args.datadir) / "assignment.csv"
    if args.sweep:
        truth = ds.truth()
        rows = pipeline.sweep_rows(linkage, track_ids, truth)
        sweep_path = out.with_name(out.stem + "_sweep.csv")
        dataio.write_table(
            sweep_path,
            ["threshold", "wcp", "nmi", "cp", "cr", "cf"],
            [list(r) for r in rows],
        )
        fig_path = out.with_name(out.stem + "_sweep.png")
        plot_sweep(rows, fig_path)
        best_thr, best_nmi = pipeline.best_by_nmi(rows)
        assn = cluster(linkage, best_thr, track_ids)
        dataio.write_assignment(out, assn.assignment)
        print(f"sweep {sweep_path}")
        print(f"figure {fig_path}")
        print(
            f"best threshold {best_thr:g}: NMI {best_nmi:.4f}, "
            f"{assn.n_clusters} clusters"
        )
    else:
        assn = cluster(linkage, cfg.threshold, track_ids)
        dataio.write_assignment(out, assn.assignment)
        print(
            f"threshold {cfg.threshold:g}: {assn.n_clusters} clusters "
            f"over {len(track_ids)} tracks"
        )
    print(f"assignment {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _effective_config(args)
    ds = _load(args.datadir, cfg)
    assignment = dataio.read_assignment(args.assignment)
    metrics = pipeline.evaluate_assignment(assignment, ds.truth())
    out = Path(args.assignment)
    report_path = out.with_name(out.stem + "_metrics.csv")
    dataio.write_metrics_report(report_path, metrics)
    fig_path = out.with_name(out.stem + "_metrics.png")
    plot_metric_bars(metrics, fig_path)
    for name in ("wcp", "nmi", "cp", "cr", "cf"):
        print(f"{name.upper()} {metrics[name]:.6f}")
    print(f"report {report_path}")
    print(f"figure {fig_path}")
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    reports = [
        (check_sigma(seed), BLOCK_TOL),
        (check_phi(seed), BLOCK_TOL),
        (check_end_to_end(seed), END_TO_END_TOL),
    ]
    ok = True
    for rep, tol in reports:
        print(rep.line(tol))
        ok = ok and rep.passed(tol)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cluecluster",
        description="Multi-modal track clustering: generate, train, cluster, evaluate.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic labeled dataset")
    p.add_argument("outdir")
    _add_common(p)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("train", help="train blocks on a dataset directory")
    p.add_argument("datadir")
    p.add_argument("--out", help="checkpoint path (default <datadir>/checkpoint.ckpt)")
    _add_common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("cluster", help="cluster tracks with a trained checkpoint")
    p.add_argument("datadir")
    p.add_argument("checkpoint")
    p.add_argument("--out", help="assignment path (default <datadir>/assignment.csv)")
    _add_common(p)
    p.set_defaults(fn=cmd_cluster)

    p = sub.add_parser("eval", help="score an assignment against dataset labels")
    p.add_argument("assignment")
    p.add_argument("datadir")
    _add_common(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ClueClusterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
