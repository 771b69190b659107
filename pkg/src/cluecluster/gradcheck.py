"""Finite-difference verification of the hand-written backward passes.

Central differences with a configurable step; relative error uses a floored
denominator so near-zero gradients compare on an absolute scale.  Random
configurations that land within one step of a relu kink are redrawn, since
finite differences are invalid across the kink.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import blocks
from .seeding import subsystem_rng

DEFAULT_STEP = 1e-5
REL_FLOOR = 1e-6


@dataclass
class CheckReport:
    name: str
    trials: int
    max_rel_err: float
    worst_coordinate: str

    def passed(self, tol: float) -> bool:
        return self.max_rel_err < tol

    def line(self, tol: float) -> str:
        verdict = "PASS" if self.passed(tol) else "FAIL"
        return (
            f"{verdict} {self.name}: max rel err {self.max_rel_err:.3e} "
            f"(tol {tol:.0e}, {self.trials} trials, worst at {self.worst_coordinate})"
        )


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def central_diff(fn: Callable[[], float], array: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    """Gradient of fn() w.r.t. array, mutating entries in place."""
    grad = np.zeros_like(array)
    flat = array.ravel()
    gflat = grad.ravel()
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + step
        hi = fn()
        flat[idx] = orig - step
        lo = fn()
        flat[idx] = orig
        gflat[idx] = (hi - lo) / (2.0 * step)
    return grad


def _compare(
    analytic: dict[str, np.ndarray],
    fn: Callable[[], float],
    arrays: dict[str, np.ndarray],
    step: float,
) -> tuple[float, str]:
    worst = 0.0
    worst_name = "-"
    for name, arr in arrays.items():
        fd = central_diff(fn, arr, step)
        err = rel_err(analytic[name], fd)
        if err > worst:
            worst = err
            worst_name = name
    return worst, worst_name


def check_sigma(root_seed: int, trials: int = 20, step: float = DEFAULT_STEP) -> CheckReport:
    """Scorer gradients vs central differences over random configurations."""
    rng = subsystem_rng(root_seed, "gradcheck.sigma")
    worst = 0.0
    worst_at = "-"
    done = 0
    while done < trials:
        n = int(rng.integers(3, 9))
        h = int(rng.integers(2, 7))
        params = blocks.init_sigma(n, h, rng)
        d_i = rng.uniform(0.0, 1.0, size=n)
        d_j = rng.uniform(0.0, 1.0, size=n)
        _, cache = blocks.sigma_forward(params, d_i, d_j)
        # redraw configurations adjacent to relu kinks or abs kinks
        if np.min(np.abs(cache.pre1)) < 10 * step or np.min(np.abs(d_i - d_j)) < 10 * step:
            continue
        upstream = float(rng.normal())
        grads, g_di, g_dj = blocks.sigma_backward(cache, upstream)

        def loss() -> float:
            a, _ = blocks.sigma_forward(params, d_i, d_j)
            return upstream * a

        analytic = {
            "W1": grads.W1, "b1": grads.b1, "W2": grads.W2, "b2": grads.b2,
            "d_i": g_di, "d_j": g_dj,
        }
        arrays = {
            "W1": params.W1, "b1": params.b1, "W2": params.W2, "b2": params.b2,
            "d_i": d_i, "d_j": d_j,
        }
        err, name = _compare(analytic, loss, arrays, step)
        if err > worst:
            worst, worst_at = err, f"trial{done}.{name}"
        done += 1
    return CheckReport("sigma-block", trials, worst, worst_at)


def toy_graph_tensors(root_seed: int, feat_dim: int = 4):
    """Six-node two-track toy: every track carries one clue per modality, so
    every cross pair has a bridge and no carry-forward entries occur."""
    from .graph import Clue, Modality, Track, build_graph, normalize
    from .training import compile_graph

    rng = subsystem_rng(root_seed, "gradcheck.toy")
    tracks = []
    cid = 0
    for tid, ident in ((0, 0), (1, 1)):
        clues = {}
        for m in (Modality.FACE, Modality.BODY, Modality.VOICE):
            feat = normalize(rng.normal(size=feat_dim))
            clues[m] = [Clue(cid, tid, m, feat, identity=ident)]
            cid += 1
        tracks.append(Track(tid, clues))
    return compile_graph(build_graph(tracks, features_per_track=2), require_labels=True)


def check_end_to_end(
    root_seed: int,
    cycles: int = 2,
    mode: str = "full",
    full_momentum_grad: bool = False,
    step: float = DEFAULT_STEP,
) -> CheckReport:
    """Whole-loss gradient vs central differences on the toy graph."""
    from .distribution import DistributionConfig
    from .training import (
        TrainerConfig,
        init_model,
        loss_backward,
        loss_forward,
        params_to_dict,
    )

    rng = subsystem_rng(root_seed, "gradcheck.e2e")
    gt = toy_graph_tensors(root_seed)
    tcfg = TrainerConfig(
        cycles=cycles, hidden=4, mode=mode, full_momentum_grad=full_momentum_grad
    )
    dcfg = DistributionConfig(eta=0.7, alpha=0.5)
    model = init_model(gt.n_real, gt.feats0.shape[1], cycles, tcfg.hidden, rng)
    total, _, _, trace, caches, y = loss_forward(model, gt, dcfg, tcfg)
    analytic = loss_backward(model, gt, tcfg, trace, caches, y)
    params = params_to_dict(model)

    def loss() -> float:
        return loss_forward(model, gt, dcfg, tcfg)[0]

    worst, worst_name = _compare(analytic, loss, params, step)
    return CheckReport(f"end-to-end[{mode},L={cycles}]", 1, worst, worst_name)


def check_phi(root_seed: int, trials: int = 20, step: float = DEFAULT_STEP) -> CheckReport:
    """Gated-residual gradients vs central differences."""
    rng = subsystem_rng(root_seed, "gradcheck.phi")
    worst = 0.0
    worst_at = "-"
    for t in range(trials):
        o = int(rng.integers(3, 9))
        params = blocks.init_phi(o, rng)
        h = rng.normal(size=o)
        f = rng.normal(size=o)
        f /= np.linalg.norm(f)
        upstream = rng.normal(size=o)
        _, cache = blocks.phi_forward(params, h, f)
        grads, g_h, g_f = blocks.phi_backward(cache, upstream)

        def loss() -> float:
            out, _ = blocks.phi_forward(params, h, f)
            return float(out @ upstream)

        analytic = {
            "Wt": grads.Wt, "bt": grads.bt, "Wg": grads.Wg, "bg": grads.bg,
            "h": g_h, "f": g_f,
        }
        arrays = {
            "Wt": params.Wt, "bt": params.bt, "Wg": params.Wg, "bg": params.bg,
            "h": h, "f": f,
        }
        err, name = _compare(analytic, loss, arrays, step)
        if err > worst:
            worst, worst_at = err, f"trial{t}.{name}"
    return CheckReport("phi-block", trials, worst, worst_at)
