"""Learnable blocks with hand-written forward and backward passes.

Two block families exist: the distribution-similarity scorer (two fully
connected layers plus a sigmoid over the absolute difference of two
distribution rows) and the gated residual feature transform (tanh transform
gated against the residual, then renormalized to unit length).  Batch
variants operate on stacked rows and must agree with the single-pair ops.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .errors import InvalidInput, InvalidState, NumericalError


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # numerically stable on both tails
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class SigmaParams:
    """Scorer weights: W1 (hidden x n_input), b1, W2 (1 x hidden), b2 (1,)."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def n_input(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    def copy(self) -> "SigmaParams":
        return SigmaParams(*(getattr(self, f.name).copy() for f in fields(self)))


@dataclass
class PhiParams:
    """Gated residual transform weights for one modality.

    Wt (O x O), bt transform the aggregated input; Wg (O x 2O), bg gate the
    transform against the residual from the concatenated pair.
    """

    Wt: np.ndarray
    bt: np.ndarray
    Wg: np.ndarray
    bg: np.ndarray

    @property
    def dim(self) -> int:
        return self.Wt.shape[0]

    def copy(self) -> "PhiParams":
        return PhiParams(*(getattr(self, f.name).copy() for f in fields(self)))


def init_sigma(n_input: int, hidden: int, rng: np.random.Generator) -> SigmaParams:
    if n_input < 1 or hidden < 1:
        raise InvalidInput("n_input and hidden must be >= 1")
    return SigmaParams(
        W1=_uniform_init(rng, (hidden, n_input), n_input),
        b1=_uniform_init(rng, (hidden,), n_input),
        W2=_uniform_init(rng, (1, hidden), hidden),
        b2=_uniform_init(rng, (1,), hidden),
    )


def init_phi(dim: int, rng: np.random.Generator) -> PhiParams:
    if dim < 1:
        raise InvalidInput("dim must be >= 1")
    return PhiParams(
        Wt=_uniform_init(rng, (dim, dim), dim),
        bt=_uniform_init(rng, (dim,), dim),
        Wg=_uniform_init(rng, (dim, 2 * dim), 2 * dim),
        bg=_uniform_init(rng, (dim,), 2 * dim),
    )


class _Cache:
    """Single-use backward cache."""

    def __init__(self):
        self._consumed = False

    def consume(self):
        if self._consumed:
            raise InvalidState("backward cache already consumed")
        self._consumed = True


# --------------------------------------------------------------- sigma ------


class SigmaCache(_Cache):
    def __init__(self, params: SigmaParams, x: np.ndarray, sign: np.ndarray | None,
                 pre1: np.ndarray, hid: np.ndarray, a: np.ndarray):
        super().__init__()
        self.params = params
        self.x = x
        self.sign = sign
        self.pre1 = pre1
        self.hid = hid
        self.a = a


@dataclass
class SigmaGrads:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray


def sigma_forward(params: SigmaParams, d_i: np.ndarray, d_j: np.ndarray) -> tuple[float, SigmaCache]:
    """Similarity of two distribution rows: sigmoid over a two-layer net
    applied to |d_i - d_j|.  Symmetric in its arguments by construction."""
    d_i = np.asarray(d_i, dtype=np.float64)
    d_j = np.asarray(d_j, dtype=np.float64)
    if d_i.shape != (params.n_input,) or d_j.shape != (params.n_input,):
        raise InvalidInput(
            f"expected two vectors of length {params.n_input}, got {d_i.shape} and {d_j.shape}"
        )
    diff = d_i - d_j
    sign = np.sign(diff)
    x = np.abs(diff)
    pre1 = params.W1 @ x + params.b1
    hid = np.maximum(pre1, 0.0)
    logit = params.W2 @ hid + params.b2
    a = _sigmoid(logit)
    cache = SigmaCache(params, x, sign, pre1, hid, a)
    return float(a[0]), cache


def sigma_backward(cache: SigmaCache, upstream: float) -> tuple[SigmaGrads, np.ndarray, np.ndarray]:
    """Gradients of upstream * a_ij w.r.t. parameters and both input rows."""
    cache.consume()
    p = cache.params
    a = cache.a
    g_logit = upstream * a * (1.0 - a)          # scalar array shape (1,)
    grad_W2 = g_logit[:, None] * cache.hid[None, :]
    grad_b2 = g_logit.copy()
    g_hid = p.W2[0] * g_logit[0]
    g_pre1 = np.where(cache.pre1 > 0.0, g_hid, 0.0)   # relu'(0) = 0
    grad_W1 = g_pre1[:, None] * cache.x[None, :]
    grad_b1 = g_pre1.copy()
    g_x = p.W1.T @ g_pre1
    g_di = g_x * cache.sign
    return SigmaGrads(grad_W1, grad_b1, grad_W2, grad_b2), g_di, -g_di


class SigmaBatchCache(_Cache):
    def __init__(self, params: SigmaParams, X: np.ndarray, pre1: np.ndarray,
                 hid: np.ndarray, a: np.ndarray):
        super().__init__()
        self.params = params
        self.X = X
        self.pre1 = pre1
        self.hid = hid
        self.a = a


def sigma_forward_batch(params: SigmaParams, X: np.ndarray) -> tuple[np.ndarray, SigmaBatchCache]:
    """Scorer over stacked absolute-difference rows X (P x n_input)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_input:
        raise InvalidInput(f"X must be (P, {params.n_input})")
    pre1 = X @ params.W1.T + params.b1
    hid = np.maximum(pre1, 0.0)
    logit = hid @ params.W2.T + params.b2
    a = _sigmoid(logit[:, 0])
    return a, SigmaBatchCache(params, X, pre1, hid, a)


def sigma_backward_batch(
    cache: SigmaBatchCache, upstream: np.ndarray
) -> tuple[SigmaGrads, np.ndarray]:
    """Batch gradients; returns parameter grads and grad w.r.t. X rows."""
    cache.consume()
    p = cache.params
    a = cache.a
    g_logit = upstream * a * (1.0 - a)                 # (P,)
    grad_W2 = (g_logit @ cache.hid)[None, :]
    grad_b2 = np.array([np.sum(g_logit)])
    g_hid = g_logit[:, None] * p.W2[0][None, :]        # (P, H)
    g_pre1 = np.where(cache.pre1 > 0.0, g_hid, 0.0)
    grad_W1 = g_pre1.T @ cache.X
    grad_b1 = np.sum(g_pre1, axis=0)
    g_X = g_pre1 @ p.W1
    return SigmaGrads(grad_W1, grad_b1, grad_W2, grad_b2), g_X


# ----------------------------------------------------------------- phi ------


class PhiCache(_Cache):
    def __init__(self, params: PhiParams, h, f, gate, z, o_pre, nrm, out):
        super().__init__()
        self.params = params
        self.h = h
        self.f = f
        self.gate = gate
        self.z = z
        self.o_pre = o_pre
        self.nrm = nrm
        self.out = out


@dataclass
class PhiGrads:
    Wt: np.ndarray
    bt: np.ndarray
    Wg: np.ndarray
    bg: np.ndarray


def phi_forward(params: PhiParams, h: np.ndarray, f: np.ndarray) -> tuple[np.ndarray, PhiCache]:
    """Gated residual transform, renormalized to unit length.

    gate = sigmoid(Wg [h; f] + bg); z = tanh(Wt h + bt);
    out = normalize(gate * z + (1 - gate) * f).
    """
    h = np.asarray(h, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    o = params.dim
    if h.shape != (o,) or f.shape != (o,):
        raise InvalidInput(f"expected two vectors of length {o}")
    cat = np.concatenate([h, f])
    gate = _sigmoid(params.Wg @ cat + params.bg)
    z = np.tanh(params.Wt @ h + params.bt)
    o_pre = gate * z + (1.0 - gate) * f
    nrm = float(np.linalg.norm(o_pre))
    if nrm == 0.0 or not np.isfinite(nrm):
        raise NumericalError("gated residual output has no direction")
    out = o_pre / nrm
    return out, PhiCache(params, h, f, gate, z, o_pre, nrm, out)


def phi_backward(cache: PhiCache, upstream: np.ndarray) -> tuple[PhiGrads, np.ndarray, np.ndarray]:
    """Gradients through the renormalization, gate, transform, and residual."""
    cache.consume()
    p = cache.params
    u = np.asarray(upstream, dtype=np.float64)
    # renormalization Jacobian: (I - out out^T) / nrm
    g_opre = (u - cache.out * float(cache.out @ u)) / cache.nrm
    g_gate = g_opre * (cache.z - cache.f)
    g_z = g_opre * cache.gate
    g_f = g_opre * (1.0 - cache.gate)
    # tanh branch
    g_zpre = g_z * (1.0 - cache.z**2)
    grad_Wt = g_zpre[:, None] * cache.h[None, :]
    grad_bt = g_zpre.copy()
    g_h = p.Wt.T @ g_zpre
    # gate branch
    g_gpre = g_gate * cache.gate * (1.0 - cache.gate)
    cat = np.concatenate([cache.h, cache.f])
    grad_Wg = g_gpre[:, None] * cat[None, :]
    grad_bg = g_gpre.copy()
    g_cat = p.Wg.T @ g_gpre
    o = p.dim
    g_h = g_h + g_cat[:o]
    g_f = g_f + g_cat[o:]
    return PhiGrads(grad_Wt, grad_bt, grad_Wg, grad_bg), g_h, g_f


class PhiBatchCache(_Cache):
    def __init__(self, params: PhiParams, H, F, gate, z, o_pre, nrm, out):
        super().__init__()
        self.params = params
        self.H = H
        self.F = F
        self.gate = gate
        self.z = z
        self.o_pre = o_pre
        self.nrm = nrm
        self.out = out


def phi_forward_batch(params: PhiParams, H: np.ndarray, F: np.ndarray) -> tuple[np.ndarray, PhiBatchCache]:
    """Gated residual transform over stacked rows (M x O each)."""
    H = np.asarray(H, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    o = params.dim
    if H.ndim != 2 or H.shape != F.shape or H.shape[1] != o:
        raise InvalidInput(f"H and F must both be (M, {o})")
    cat = np.concatenate([H, F], axis=1)
    gate = _sigmoid(cat @ params.Wg.T + params.bg)
    z = np.tanh(H @ params.Wt.T + params.bt)
    o_pre = gate * z + (1.0 - gate) * F
    nrm = np.linalg.norm(o_pre, axis=1)
    if np.any(nrm == 0.0) or not np.all(np.isfinite(nrm)):
        raise NumericalError("gated residual output has no direction")
    out = o_pre / nrm[:, None]
    return out, PhiBatchCache(params, H, F, gate, z, o_pre, nrm, out)


def phi_backward_batch(
    cache: PhiBatchCache, upstream: np.ndarray
) -> tuple[PhiGrads, np.ndarray, np.ndarray]:
    cache.consume()
    p = cache.params
    U = np.asarray(upstream, dtype=np.float64)
    dot = np.sum(cache.out * U, axis=1, keepdims=True)
    g_opre = (U - cache.out * dot) / cache.nrm[:, None]
    g_gate = g_opre * (cache.z - cache.F)
    g_z = g_opre * cache.gate
    g_F = g_opre * (1.0 - cache.gate)
    g_zpre = g_z * (1.0 - cache.z**2)
    grad_Wt = g_zpre.T @ cache.H
    grad_bt = np.sum(g_zpre, axis=0)
    g_H = g_zpre @ p.Wt
    g_gpre = g_gate * cache.gate * (1.0 - cache.gate)
    cat = np.concatenate([cache.H, cache.F], axis=1)
    grad_Wg = g_gpre.T @ cat
    grad_bg = np.sum(g_gpre, axis=0)
    g_cat = g_gpre @ p.Wg
    o = p.dim
    g_H = g_H + g_cat[:, :o]
    g_F = g_F + g_cat[:, o:]
    return PhiGrads(grad_Wt, grad_bt, grad_Wg, grad_bg), g_H, g_F
