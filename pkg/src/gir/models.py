"""GCN baseline, GIR and its anchor-labelled / multi-anchor-set variants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ndiff as nd
from .anchors import AnchorPartition
from .graph import Graph, LabeledTask, NodeFeatures, SplitSpec
from .metrics import accuracy, roc_auc
from .schedule import Schedule, mean_matrix

VARIANTS = ("GCN", "GCN-A", "GCN-O", "GIR", "GIR-A", "GIR-O", "GIR-MIX")
AUGMENT_MODES = ("none", "anchor-onehot", "node-onehot")


class ModelError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}: {detail}")
        self.epoch = epoch


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "GIR"
    layers: int = 3
    hidden: int = 32
    out_dim: int = 32
    partition: AnchorPartition | None = None
    mode: str = "literal"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant {self.variant!r}")
        if self.layers < 1:
            raise ModelError("need at least one layer")
        if self.variant == "GIR-MIX":
            if self.partition is None:
                raise ModelError("GIR-MIX needs an anchor partition")
            if self.hidden % len(self.partition):
                raise ModelError("hidden width must be divisible by the number of anchor sets")

    @property
    def family(self) -> str:
        return "GCN" if self.variant.startswith("GCN") else ("GIR-MIX" if self.variant == "GIR-MIX" else "GIR")

    @property
    def augment(self) -> str:
        if self.variant.endswith("-A"):
            return "anchor-onehot"
        if self.variant.endswith("-O"):
            return "node-onehot"
        return "none"

    def dims(self, in_dim: int) -> list[int]:
        return [in_dim] + [self.hidden] * (self.layers - 1) + [self.out_dim]


@dataclass
class Hyper:
    lr: float = 0.01
    weight_decay: float = 1e-5
    epochs: int = 200
    patience: int = 50
    seed: int = 0


def augment_features(x: NodeFeatures | np.ndarray, mode: str, anchors: Sequence[int] | None = None) -> np.ndarray:
    """Append anchor one-hot (selection order) or node one-hot columns."""
    base = x.values if isinstance(x, NodeFeatures) else np.asarray(x, dtype=np.float64)
    n = base.shape[0]
    if mode == "none":
        return base.copy()
    if mode == "anchor-onehot":
        if anchors is None:
            raise ModelError("anchor-onehot needs anchors")
        extra = np.zeros((n, len(anchors)))
        extra[list(anchors), np.arange(len(anchors))] = 1.0
    elif mode == "node-onehot":
        extra = np.eye(n)
    else:
        raise ModelError(f"unknown augment mode {mode!r}")
    return np.concatenate([base, extra], axis=1)


def schedule_anchors(schedule) -> tuple[int, ...]:
    if schedule is None:
        return ()
    if isinstance(schedule, Schedule):
        return schedule.anchors
    return tuple(a for s in schedule for a in s.anchors)


def model_inputs(config: ModelConfig, x: NodeFeatures | np.ndarray, anchors: Sequence[int] = ()) -> np.ndarray:
    return augment_features(x, config.augment, anchors)


def gcn_operator(g: Graph):
    """Random-walk normalised in-adjacency with self-loops, cached on the graph."""
    if "gcn_op" not in g._cache:
        e = g.edges()
        loops = np.arange(g.n)
        rows = np.concatenate([e[:, 1], loops])
        cols = np.concatenate([e[:, 0], loops])
        g._cache["gcn_op"] = mean_matrix(g.n, rows, cols)
    return g._cache["gcn_op"]


def gcn_layer(h: nd.Tensor, g: Graph, W: nd.Tensor, b: nd.Tensor, activation: bool = True) -> nd.Tensor:
    out = nd.affine(nd.grouped_mean(h, gcn_operator(g)), W, b)
    return nd.relu(out) if activation else out


def sage_gir_layer(h: nd.Tensor, active_sources, W: nd.Tensor, b: nd.Tensor,
                   activation: bool = True) -> nd.Tensor:
    """concat(own state, mean over active in-neighbours) -> affine -> relu."""
    out = nd.affine(nd.concat_cols(h, nd.grouped_mean(h, active_sources)), W, b)
    return nd.relu(out) if activation else out


def _block_names(config: ModelConfig, layer: int) -> list[str]:
    if config.family == "GIR-MIX":
        return [f"l{layer}.s{j}" for j in range(len(config.partition))]
    return [f"l{layer}"]


def init_params(config: ModelConfig, in_dim: int, seed: int) -> nd.Params:
    rng = np.random.default_rng(seed)
    dims = config.dims(in_dim)
    params: nd.Params = {}
    for l in range(1, config.layers + 1):
        fan_in = dims[l - 1] * (1 if config.family == "GCN" else 2)
        fan_out = dims[l]
        if config.family == "GIR-MIX" and l < config.layers:
            fan_out //= len(config.partition)
        for name in _block_names(config, l):
            params[f"{name}.W"] = nd.glorot(rng, fan_in, fan_out)
            params[f"{name}.b"] = np.zeros((1, fan_out))
    return params


def forward(config: ModelConfig, params: nd.Params, g: Graph, schedule, x: np.ndarray,
            tape: nd.Tape | None = None, prefix: str = ""):
    """Node embeddings (the last layer is linear).

    With a tape the parameters are registered on it (names prefixed by
    ``prefix``) and a Tensor is returned; without one a plain array is returned.
    """
    own_tape = tape is None
    tape = nd.Tape() if own_tape else tape
    fam = config.family
    if fam == "GIR" and not isinstance(schedule, Schedule):
        raise ModelError("GIR variants need a Schedule")
    if fam == "GIR-MIX":
        if isinstance(schedule, Schedule) or len(schedule) != len(config.partition):
            raise ModelError("GIR-MIX needs one schedule per anchor set")
    if fam != "GCN":
        scheds = [schedule] if fam == "GIR" else list(schedule)
        if any(s.layers != config.layers for s in scheds):
            raise ModelError("schedule layer count differs from model depth")

    h = tape.const(x)
    for l in range(1, config.layers + 1):
        last = l == config.layers
        blocks = []
        for j, name in enumerate(_block_names(config, l)):
            W = tape.param(prefix + name + ".W", params[name + ".W"])
            b = tape.param(prefix + name + ".b", params[name + ".b"])
            if fam == "GCN":
                blocks.append(gcn_layer(h, g, W, b, activation=not last))
            else:
                sched = schedule if fam == "GIR" else schedule[j]
                blocks.append(sage_gir_layer(h, sched.mean_operator(l), W, b, activation=not last))
        if len(blocks) == 1:
            h = blocks[0]
        elif last:
            # final GIR-MIX blocks each emit out_dim and are summed
            h = blocks[0]
            for blk in blocks[1:]:
                h = nd.add(h, blk)
        else:
            h = nd.concat_cols(*blocks)
    return h.value if own_tape else h


def pair_score(z_u, z_v) -> float | np.ndarray:
    """Inner-product logit for one pair or row-aligned batches of pairs."""
    z_u = np.asarray(z_u, dtype=np.float64)
    z_v = np.asarray(z_v, dtype=np.float64)
    if z_u.shape != z_v.shape:
        raise ModelError("pair_score needs equal dimensions")
    if z_u.ndim == 1:
        return float(z_u @ z_v)
    return (z_u * z_v).sum(axis=1)


def task_loss(out: nd.Tensor, task: LabeledTask, items: np.ndarray) -> nd.Tensor:
    if task.is_pair_task:
        pairs = task.pairs[items]
        return nd.bce_with_logits(nd.pair_dot(out, pairs), task.pair_labels[items])
    return nd.cross_entropy(out, task.node_labels[items], rows=items)


def evaluate(z: np.ndarray, task: LabeledTask, items: np.ndarray) -> float:
    """ROC AUC for pair tasks, accuracy for node classification."""
    if task.is_pair_task:
        pairs = task.pairs[items]
        return roc_auc(pair_score(z[pairs[:, 0]], z[pairs[:, 1]]), task.pair_labels[items])
    return accuracy(z[items].argmax(axis=1), task.node_labels[items])


@dataclass
class TrainResult:
    params: nd.Params
    best_epoch: int
    trace: list[dict] = field(default_factory=list)

    @property
    def epochs_run(self) -> int:
        return len(self.trace) - 1

    @property
    def best(self) -> dict:
        return self.trace[self.best_epoch]


def train_model(config: ModelConfig, g: Graph, schedule, task: LabeledTask, split: SplitSpec,
                hyper: Hyper, x: np.ndarray) -> TrainResult:
    """Full-batch Adam training; keeps the parameters of the best validation epoch.

    ``x`` must already carry the variant's feature augmentation (see
    ``model_inputs``). Trace entry ``e`` describes the parameters after ``e``
    updates, so entry 0 is the initialisation.
    """
    params = init_params(config, x.shape[1], hyper.seed)
    state = nd.AdamState(lr=hyper.lr, weight_decay=hyper.weight_decay)
    trace: list[dict] = []
    best_epoch, best_val, best_params = 0, -np.inf, nd.copy_params(params)
    for epoch in range(hyper.epochs + 1):
        tape = nd.Tape()
        try:
            out = forward(config, params, g, schedule, x, tape)
            loss = task_loss(out, task, split.train)
        except nd.NonFiniteError as exc:
            raise TrainingDiverged(epoch, str(exc)) from exc
        z = out.value
        val = evaluate(z, task, split.val)
        trace.append({"epoch": epoch, "loss": float(loss.value[0, 0]), "val": val,
                      "test": evaluate(z, task, split.test)})
        if val > best_val:
            best_epoch, best_val, best_params = epoch, val, nd.copy_params(params)
        if epoch == hyper.epochs or epoch - best_epoch >= hyper.patience:
            break
        grads = tape.backward(loss)
        nd.adam_step(params, grads, state)
    return TrainResult(best_params, best_epoch, trace)
