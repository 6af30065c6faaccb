"""Graph-attention convolution, pooling, dense layers and hinge loss.

A convolution aggregates over each node's neighborhood plus a self loop.
Attention logits score the concatenation [W h_i || W h_j || flags_ij]
through a learned vector and a leaky ReLU (slope 0.2); self-loop flags
are all-zero.  Edge flags are direction-sensitive, so each stored
undirected edge expands into two directed messages with the flag pairs
swapped.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor

ATTENTION_SLOPE = 0.2
NUM_EDGE_FLAGS = 4


@dataclass(eq=False)
class GatParams:
    weight: Tensor   # (f_in, f_out)
    attn: Tensor     # (2*f_out + 4, 1): [self block | neighbor block | flag block]
    bias: Tensor     # (1, f_out)

    @property
    def f_out(self) -> int:
        return self.weight.data.shape[1]


def glorot(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    fan_in, fan_out = (shape + (1,))[:2] if len(shape) == 1 else shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_gat_params(rng: np.random.Generator, f_in: int, f_out: int) -> GatParams:
    return GatParams(
        weight=Tensor(glorot(rng, (f_in, f_out)), requires_grad=True),
        attn=Tensor(glorot(rng, (2 * f_out + NUM_EDGE_FLAGS, 1)), requires_grad=True),
        bias=Tensor(np.zeros((1, f_out)), requires_grad=True),
    )


@dataclass(frozen=True, eq=False)
class EdgeArrays:
    """Directed message arrays (self loops included) for one graph."""

    src: np.ndarray    # (m,) message sources
    dst: np.ndarray    # (m,) message destinations
    flags: np.ndarray  # (m, 4) relation flags as seen from dst
    num_nodes: int


def build_edge_arrays(num_nodes: int, edges) -> EdgeArrays:
    src = list(range(num_nodes))
    dst = list(range(num_nodes))
    flags = [(0.0, 0.0, 0.0, 0.0)] * num_nodes
    for i, j, f in edges:
        fi = (float(f[0]), float(f[1]), float(f[2]), float(f[3]))
        # message j -> i: flags as (i_follows_j, j_follows_i, spread_i_to_j, spread_j_to_i)
        src.append(j)
        dst.append(i)
        flags.append(fi)
        # message i -> j: the directed flag pairs swap
        src.append(i)
        dst.append(j)
        flags.append((fi[1], fi[0], fi[3], fi[2]))
    return EdgeArrays(np.asarray(src, dtype=np.intp), np.asarray(dst, dtype=np.intp),
                      np.asarray(flags, dtype=np.float64), num_nodes)


def gat_forward(h: Tensor, ea: EdgeArrays, params: GatParams,
                return_attention: bool = False):
    """One attention head over the graph; output is (n, f_out)."""
    if h.data.ndim != 2:
        raise ValueError("node matrix must be rank 2")
    if h.data.shape[0] != ea.num_nodes:
        raise ValueError(f"node matrix has {h.data.shape[0]} rows for {ea.num_nodes} nodes")
    if h.data.shape[1] != params.weight.data.shape[0]:
        raise ValueError(f"feature width {h.data.shape[1]} does not match weight "
                         f"{params.weight.data.shape}")
    f_out = params.f_out
    wh = ag.matmul(h, params.weight)                       # (n, f_out)
    a_self = ag.slice_rows(params.attn, 0, f_out)
    a_neigh = ag.slice_rows(params.attn, f_out, 2 * f_out)
    a_flags = ag.slice_rows(params.attn, 2 * f_out, 2 * f_out + NUM_EDGE_FLAGS)

    score_self = ag.matmul(wh, a_self)                     # (n, 1)
    score_neigh = ag.matmul(wh, a_neigh)                   # (n, 1)
    logits = ag.leaky_relu(
        ag.add(ag.add(ag.gather_rows(score_self, ea.dst), ag.gather_rows(score_neigh, ea.src)),
               ag.matmul(Tensor(ea.flags), a_flags)),
        ATTENTION_SLOPE)
    alpha = ag.segment_softmax(logits, ea.dst, ea.num_nodes)
    messages = ag.mul(alpha, ag.gather_rows(wh, ea.src))   # (m, f_out)
    out = ag.add(ag.segment_sum(messages, ea.dst, ea.num_nodes), params.bias)
    if return_attention:
        return out, alpha
    return out


def mean_pool_channels(h: Tensor, window: int = 2) -> Tensor:
    """Channel-pair mean pooling for dimensionality reduction."""
    return ag.pair_mean_channels(h, window)


def global_mean_pool(h: Tensor) -> Tensor:
    """Graph readout: column-wise mean over all nodes, shape (1, f)."""
    if h.data.shape[0] < 1:
        raise ValueError("global mean pool needs at least one node")
    return ag.mean_axis0(h)


def fc_forward(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    return ag.add(ag.matmul(x, weight), bias)


def hinge_loss(scores: Tensor, label: int) -> Tensor:
    """max(0, 1 - margin) where margin = s_correct - s_incorrect.

    ``scores`` is a (1, 2) row (s_true, s_fake); ``label`` indexes the
    correct class (0 true, 1 fake).
    """
    if scores.data.shape != (1, 2):
        raise ValueError(f"scores must have shape (1, 2), got {scores.data.shape}")
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    sign = np.array([[1.0, -1.0]]) if label == 0 else np.array([[-1.0, 1.0]])
    margin = ag.sum_all(ag.mul(scores, Tensor(sign)))
    return ag.relu(ag.sub(Tensor(np.asarray(1.0)), margin))


def softmax(scores: np.ndarray) -> np.ndarray:
    """Plain inference-time softmax of a 1-D score vector."""
    z = np.exp(scores - scores.max())
    return z / z.sum()
