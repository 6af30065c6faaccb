"""The four-layer propagation classifier.

Pipeline: GC1(F->hidden)+SELU -> channel-pair mean pool (hidden->hidden/2)
-> GC2+SELU -> global mean pool -> FC1+SELU -> FC2 -> 2 raw scores.
Softmax is applied only at inference; training uses the hinge margin of
the two scores with AMSGrad and mini-batches of one graph.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import autograd as ag
from . import nn
from .autograd import Tensor
from .features import FEATURE_GROUPS, FeatureSchema
from .metrics import roc_auc
from .nn import EdgeArrays, GatParams, build_edge_arrays
from .optim import NumericError, OptimizerState, amsgrad_step
from .types import LABEL_FAKE, PropagationGraph

VALIDATION_EVERY = 500

DEFAULT_ITERATIONS = {"url_wise": 25_000, "cascade_wise": 50_000}


@dataclass(frozen=True)
class ModelConfig:
    schema: FeatureSchema
    hidden: int = 64
    fc1: int = 32
    out: int = 2
    learning_rate: float = 5e-4
    iterations: int = 25_000
    seed: int = 0
    active_groups: tuple[str, ...] = FEATURE_GROUPS

    def __post_init__(self):
        if not self.active_groups:
            raise ValueError("active_groups must be non-empty")
        unknown = set(self.active_groups) - set(FEATURE_GROUPS)
        if unknown:
            raise ValueError(f"unknown feature groups: {sorted(unknown)}")
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if self.out != 2:
            raise ValueError("the classifier is binary; out must be 2")
        if self.hidden % 2 != 0:
            raise ValueError("hidden width must be even for channel-pair pooling")


@dataclass(eq=False)
class ModelParams:
    gc1: GatParams
    gc2: GatParams
    fc1_w: Tensor
    fc1_b: Tensor
    fc2_w: Tensor
    fc2_b: Tensor

    def named(self) -> dict[str, Tensor]:
        return {
            "gc1.weight": self.gc1.weight, "gc1.attn": self.gc1.attn, "gc1.bias": self.gc1.bias,
            "gc2.weight": self.gc2.weight, "gc2.attn": self.gc2.attn, "gc2.bias": self.gc2.bias,
            "fc1.weight": self.fc1_w, "fc1.bias": self.fc1_b,
            "fc2.weight": self.fc2_w, "fc2.bias": self.fc2_b,
        }

    def copy_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.named().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, t in self.named().items():
            t.data[...] = arrays[k]

    def zero_grad(self) -> None:
        for t in self.named().values():
            t.zero_grad()


def init_params(config: ModelConfig) -> ModelParams:
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 71)))
    f_in = config.schema.width
    half = config.hidden // 2
    return ModelParams(
        gc1=nn.init_gat_params(rng, f_in, config.hidden),
        gc2=nn.init_gat_params(rng, half, config.hidden),
        fc1_w=Tensor(nn.glorot(rng, (config.hidden, config.fc1)), requires_grad=True),
        fc1_b=Tensor(np.zeros((1, config.fc1)), requires_grad=True),
        fc2_w=Tensor(nn.glorot(rng, (config.fc1, config.out)), requires_grad=True),
        fc2_b=Tensor(np.zeros((1, config.out)), requires_grad=True),
    )


@dataclass(frozen=True, eq=False)
class PreparedGraph:
    """One training/eval sample: masked features plus directed edge arrays."""

    key: str
    url_id: str
    features: np.ndarray
    edges: EdgeArrays
    label: int  # 0 true, 1 fake


def mask_columns(features: np.ndarray, schema: FeatureSchema,
                 active_groups) -> np.ndarray:
    out = features.copy()
    for group in FEATURE_GROUPS:
        if group not in active_groups:
            out[:, schema.group_columns(group)] = 0.0
    return out


def apply_feature_mask(graph: PropagationGraph, schema: FeatureSchema,
                       active_groups) -> PropagationGraph:
    """Zero the node-feature slices of inactive groups; topology is untouched."""
    masked = mask_columns(graph.node_features, schema, active_groups)
    return replace(graph, node_features=masked)


def prepare_graph(graph: PropagationGraph, schema: FeatureSchema,
                  active_groups=FEATURE_GROUPS, key: str | None = None,
                  url_id: str = "") -> PreparedGraph:
    return PreparedGraph(
        key=key if key is not None else (graph.nodes[0] if graph.nodes else ""),
        url_id=url_id,
        features=mask_columns(graph.node_features, schema, active_groups),
        edges=build_edge_arrays(graph.num_nodes, graph.edges),
        label=int(graph.label == LABEL_FAKE),
    )


def _forward_tensors(features: Tensor, edges: EdgeArrays,
                     params: ModelParams) -> tuple[Tensor, Tensor]:
    h1 = ag.selu(nn.gat_forward(features, edges, params.gc1))
    pooled = nn.mean_pool_channels(h1, 2)
    h2 = ag.selu(nn.gat_forward(pooled, edges, params.gc2))
    readout = nn.global_mean_pool(h2)
    fc1 = ag.selu(nn.fc_forward(readout, params.fc1_w, params.fc1_b))
    scores = nn.fc_forward(fc1, params.fc2_w, params.fc2_b)
    return scores, h2


def forward(sample: PreparedGraph | PropagationGraph, params: ModelParams,
            schema: FeatureSchema | None = None):
    """Run the network; returns (scores, probabilities, node_embeddings)."""
    if isinstance(sample, PropagationGraph):
        if schema is None:
            raise ValueError("schema required when passing a PropagationGraph")
        sample = prepare_graph(sample, schema)
    scores_t, h2 = _forward_tensors(Tensor(sample.features), sample.edges, params)
    scores = scores_t.data.reshape(2)
    return scores, nn.softmax(scores), h2.data


def fake_score(scores: np.ndarray) -> float:
    """Ranking score for the positive (fake) class."""
    return float(scores[1] - scores[0])


@dataclass
class TrainResult:
    params: ModelParams
    loss_trace: list[float]
    val_auc_trace: list[tuple[int, float]]
    best_iteration: int
    best_val_auc: float | None
    opt_state: OptimizerState | None = None


def _validation_auc(val: list[PreparedGraph], params: ModelParams) -> float | None:
    labels = [s.label for s in val]
    if len(set(labels)) < 2:
        return None
    scores = [fake_score(forward(s, params)[0]) for s in val]
    return roc_auc(scores, labels)[1]


def train(train_set: list[PreparedGraph], val_set: list[PreparedGraph],
          config: ModelConfig, params: ModelParams | None = None) -> TrainResult:
    """Single-graph AMSGrad steps with uniform sampling.

    Validation AUC is evaluated every 500 iterations (and at the end);
    the returned parameters are the snapshot with the best validation
    AUC.  When the validation set cannot score an AUC the final
    parameters are returned.
    """
    if not train_set:
        raise ValueError("empty training set")
    if params is None:
        params = init_params(config)
    named = params.named()
    arrays = {k: t.data for k, t in named.items()}
    state = OptimizerState(learning_rate=config.learning_rate)
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 11)))

    loss_trace: list[float] = []
    val_trace: list[tuple[int, float]] = []
    best_auc = -1.0
    best_iteration = 0
    best_arrays = None

    for it in range(1, config.iterations + 1):
        sample = train_set[rng.integers(len(train_set))]
        scores, _ = _forward_tensors(Tensor(sample.features), sample.edges, params)
        loss = nn.hinge_loss(scores, sample.label)
        value = loss.item()
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss at iteration {it}")
        loss_trace.append(value)
        params.zero_grad()
        loss.backward()
        grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data))
                 for k, t in named.items()}
        amsgrad_step(arrays, grads, state)

        if it % VALIDATION_EVERY == 0 or it == config.iterations:
            auc = _validation_auc(val_set, params)
            if auc is not None:
                val_trace.append((it, auc))
                if auc > best_auc:
                    best_auc = auc
                    best_iteration = it
                    best_arrays = params.copy_arrays()

    if best_arrays is not None:
        params.load_arrays(best_arrays)
        return TrainResult(params, loss_trace, val_trace, best_iteration, best_auc, state)
    return TrainResult(params, loss_trace, val_trace, config.iterations, None, state)


def user_embeddings(graphs, params: ModelParams, schema: FeatureSchema,
                    active_groups=FEATURE_GROUPS) -> dict[str, np.ndarray]:
    """Mean of each user's node embeddings (last convolution output)
    across all given propagation graphs."""
    sums: dict[str, np.ndarray] = {}
    counts: dict[str, int] = {}
    for graph in graphs:
        sample = prepare_graph(graph, schema, active_groups)
        _, _, emb = forward(sample, params)
        for author, row in zip(graph.node_authors, emb):
            if author in sums:
                sums[author] += row
                counts[author] += 1
            else:
                sums[author] = row.copy()
                counts[author] = 1
    return {u: sums[u] / counts[u] for u in sums}


# -- checkpointing ----------------------------------------------------------

CHECKPOINT_FORMAT = "cascade-gnn-checkpoint-v1"


def save_checkpoint(path, params: ModelParams, state: OptimizerState | None = None,
                    seed: int | None = None, meta: dict | None = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "seed": seed,
        "meta": meta or {},
        "params": {k: {"shape": list(t.data.shape), "data": t.data.reshape(-1).tolist()}
                   for k, t in params.named().items()},
        "optimizer": state.to_dict() if state is not None else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path, config: ModelConfig) -> tuple[ModelParams, OptimizerState | None, int | None]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a recognized checkpoint: {path}")
    params = init_params(config)
    for k, t in params.named().items():
        entry = doc["params"][k]
        arr = np.asarray(entry["data"]).reshape(entry["shape"])
        if arr.shape != t.data.shape:
            raise ValueError(f"checkpoint parameter {k!r} has shape {arr.shape}, "
                             f"expected {t.data.shape}")
        t.data[...] = arr
    state = OptimizerState.from_dict(doc["optimizer"]) if doc.get("optimizer") else None
    return params, state, doc.get("seed")
