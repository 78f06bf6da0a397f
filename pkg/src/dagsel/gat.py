"""Graph-attention scorer over node-feature matrices.

Two attention layers (one head each), ELU between them, mean-pool
readout, and a linear head producing a raw logit. Message passing runs
along dependency edges u->v plus a self-loop per node, so information
flows in execution order.

forward/backward accept H of shape (n, d) or any batched (..., n, d);
the backward pass is exact reverse-mode differentiation of the forward
pass, written against a recorded tape.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ShapeError

LEAKY_SLOPE = 0.2


@dataclass
class AttentionLayer:
    W: np.ndarray  # (d_in, d_out)
    a: np.ndarray  # (2 * d_out,) split as [source half, target half]
    leaky_slope: float = LEAKY_SLOPE

    @property
    def d_in(self) -> int:
        return self.W.shape[0]

    @property
    def d_out(self) -> int:
        return self.W.shape[1]

    def copy(self) -> "AttentionLayer":
        return AttentionLayer(self.W.copy(), self.a.copy(), self.leaky_slope)


@dataclass
class LearnerParams:
    layers: list[AttentionLayer]
    head_weight: np.ndarray  # (d_out of last layer,)
    head_bias: float

    @classmethod
    def init(cls, dims: Sequence[int], rng: np.random.Generator) -> "LearnerParams":
        """dims chains layer sizes, e.g. (d, hidden, hidden) for 2 layers."""
        layers = []
        for d_in, d_out in zip(dims[:-1], dims[1:]):
            bw = 1.0 / math.sqrt(d_in)
            ba = 1.0 / math.sqrt(2 * d_out)
            layers.append(
                AttentionLayer(
                    W=rng.uniform(-bw, bw, size=(d_in, d_out)),
                    a=rng.uniform(-ba, ba, size=2 * d_out),
                )
            )
        bh = 1.0 / math.sqrt(dims[-1])
        return cls(
            layers=layers,
            head_weight=rng.uniform(-bh, bh, size=dims[-1]),
            head_bias=0.0,
        )

    def copy(self) -> "LearnerParams":
        return LearnerParams(
            layers=[l.copy() for l in self.layers],
            head_weight=self.head_weight.copy(),
            head_bias=float(self.head_bias),
        )


@dataclass
class LayerGrads:
    W: np.ndarray
    a: np.ndarray


@dataclass
class LearnerGrads:
    layers: list[LayerGrads]
    head_weight: np.ndarray
    head_bias: float


@dataclass
class LayerTape:
    H_in: np.ndarray
    Z: np.ndarray
    E_pre: np.ndarray  # raw attention logits before masking
    A: np.ndarray  # attention weights, zero outside the neighbor mask
    P: np.ndarray  # pre-activation of the layer output


@dataclass
class ForwardTape:
    mask: np.ndarray  # (n, n) bool; mask[v, u] marks u in N(v)
    layers: list[LayerTape]
    H_last: np.ndarray
    readout: np.ndarray
    params: LearnerParams


def build_neighbor_mask(n_nodes: int, edges: Sequence[tuple[int, int]]) -> np.ndarray:
    """mask[v, u] is True when u feeds v, including v itself."""
    mask = np.eye(n_nodes, dtype=bool)
    for (u, v) in edges:
        if not (0 <= u < n_nodes and 0 <= v < n_nodes):
            raise ShapeError(f"edge ({u}, {v}) outside 0..{n_nodes - 1}")
        mask[v, u] = True
    return mask


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def _leaky(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, x, slope * x)


def _leaky_grad(x: np.ndarray, slope: float) -> np.ndarray:
    return np.where(x > 0, 1.0, slope)


def _masked_softmax(E: np.ndarray, mask: np.ndarray) -> np.ndarray:
    Em = np.where(mask, E, -np.inf)
    Em = Em - Em.max(axis=-1, keepdims=True)
    expE = np.exp(Em)
    return expE / expE.sum(axis=-1, keepdims=True)


def forward(H: np.ndarray, edges: Sequence[tuple[int, int]], params: LearnerParams):
    """Score H (shape (..., n, d)) and record a tape for backward.

    Returns (s, tape); s has H's leading shape, or is a float for a
    single unbatched matrix.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim < 2:
        raise ShapeError(f"H must be at least 2-D, got shape {H.shape}")
    n = H.shape[-2]
    if H.shape[-1] != params.layers[0].d_in:
        raise ShapeError(f"H feature dim {H.shape[-1]} != layer 0 input {params.layers[0].d_in}")
    mask = build_neighbor_mask(n, edges)
    tapes = []
    cur = H
    for layer in params.layers:
        Z = cur @ layer.W
        src = Z @ layer.a[: layer.d_out]  # contribution of u as a message source
        dst = Z @ layer.a[layer.d_out :]  # contribution of v as the target
        E_pre = dst[..., :, None] + src[..., None, :]
        E = _leaky(E_pre, layer.leaky_slope)
        A = _masked_softmax(E, mask)
        P = A @ Z
        tapes.append(LayerTape(H_in=cur, Z=Z, E_pre=E_pre, A=A, P=P))
        cur = _elu(P)
    readout = cur.mean(axis=-2)
    s = readout @ params.head_weight + params.head_bias
    tape = ForwardTape(mask=mask, layers=tapes, H_last=cur, readout=readout, params=params)
    if s.ndim == 0:
        return float(s), tape
    return s, tape


def backward(tape: ForwardTape, d_s) -> tuple[LearnerGrads, np.ndarray]:
    """Exact gradients of (d_s . s) w.r.t. parameters and input H.

    Parameter gradients are summed over all leading batch dimensions;
    the returned dH keeps them, one gradient matrix per batch element.
    """
    params = tape.params
    n = tape.H_last.shape[-2]
    d_s = np.asarray(d_s, dtype=np.float64)
    lead = tape.readout.shape[:-1]
    if d_s.shape != lead:
        raise ShapeError(f"d_s shape {d_s.shape} != batch shape {lead}")

    # flatten all leading dims into one batch axis for the matrix algebra
    B = int(np.prod(lead)) if lead else 1
    ds = d_s.reshape(B)
    readout = tape.readout.reshape(B, -1)

    d_head_w = ds @ readout
    d_head_b = float(ds.sum())
    d_read = ds[:, None] * params.head_weight
    dH = np.repeat(d_read[:, None, :] / n, n, axis=1)

    layer_grads: list[LayerGrads] = []
    for layer, lt in zip(reversed(params.layers), reversed(tape.layers)):
        Z = lt.Z.reshape(B, n, -1)
        A = lt.A.reshape(B, n, n)
        P = lt.P.reshape(B, n, -1)
        E_pre = lt.E_pre.reshape(B, n, n)
        H_in = lt.H_in.reshape(B, n, -1)

        dP = dH * _elu_grad(P)
        dA = dP @ Z.swapaxes(1, 2)
        dZ = A.swapaxes(1, 2) @ dP
        # softmax rows: masked-out entries have A = 0 and so contribute 0
        dE = A * (dA - (A * dA).sum(axis=2, keepdims=True))
        dE_pre = dE * _leaky_grad(E_pre, layer.leaky_slope)
        d_dst = dE_pre.sum(axis=2)  # per target node v
        d_src = dE_pre.sum(axis=1)  # per source node u
        a_src = layer.a[: layer.d_out]
        a_dst = layer.a[layer.d_out :]
        dZ = dZ + d_src[:, :, None] * a_src + d_dst[:, :, None] * a_dst
        da_src = np.tensordot(d_src, Z, axes=([0, 1], [0, 1]))
        da_dst = np.tensordot(d_dst, Z, axes=([0, 1], [0, 1]))
        dW = np.tensordot(H_in, dZ, axes=([0, 1], [0, 1]))
        dH = dZ @ layer.W.T
        layer_grads.append(LayerGrads(W=dW, a=np.concatenate([da_src, da_dst])))

    layer_grads.reverse()
    grads = LearnerGrads(layers=layer_grads, head_weight=d_head_w, head_bias=d_head_b)
    return grads, dH.reshape(tape.layers[0].H_in.shape)


def score_sigmoid(logit):
    """Success probability for reporting; selection uses raw logits."""
    s = np.asarray(logit, dtype=np.float64)
    out = np.where(s >= 0, 1.0 / (1.0 + np.exp(-np.abs(s))), np.exp(-np.abs(s)) / (1.0 + np.exp(-np.abs(s))))
    if out.ndim == 0:
        return float(out)
    return out
