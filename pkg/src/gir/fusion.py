"""Decision fusion of pretrained experts with a logit-driven softmax gate."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ndiff as nd
from .graph import Graph, LabeledTask, SplitSpec
from .metrics import accuracy
from .models import Hyper, ModelConfig, TrainingDiverged, forward, init_params, train_model


class FusionError(ValueError):
    pass


@dataclass
class Expert:
    config: ModelConfig
    schedule: object  # Schedule, list of Schedules (GIR-MIX) or None (GCN)
    x: np.ndarray
    params: nd.Params | None = None
    frozen: bool = False

    def logits(self, g: Graph) -> np.ndarray:
        return forward(self.config, self.params, g, self.schedule, self.x)


@dataclass
class ExpertBundle:
    experts: list[Expert]

    def logits(self, g: Graph) -> list[np.ndarray]:
        out = [e.logits(g) for e in self.experts]
        if len({o.shape for o in out}) != 1:
            raise FusionError("experts disagree on logit shape")
        return out


def init_gate(k: int, num_classes: int, seed: int) -> nd.Params:
    rng = np.random.default_rng(seed)
    return {"gate.W": nd.glorot(rng, k * num_classes, k), "gate.b": np.zeros((1, k))}


def gate_fuse(expert_logits: Sequence[nd.Tensor], W: nd.Tensor, b: nd.Tensor) -> tuple[nd.Tensor, nd.Tensor]:
    """Gate weights from all experts' logits, then a per-node weighted sum of logits."""
    k = len(expert_logits)
    if W.shape[1] != k:
        raise FusionError(f"gate emits {W.shape[1]} weights for {k} experts")
    weights = nd.softmax_rows(nd.affine(nd.concat_cols(*expert_logits), W, b))
    return nd.weighted_sum(weights, expert_logits), weights


def gate_fuse_arrays(expert_logits: Sequence[np.ndarray], gate: nd.Params) -> tuple[np.ndarray, np.ndarray]:
    tape = nd.Tape()
    fused, weights = gate_fuse([tape.const(z) for z in expert_logits],
                               tape.const(gate["gate.W"]), tape.const(gate["gate.b"]))
    return fused.value, weights.value


def fwr_target(losses: np.ndarray, tau: float) -> np.ndarray:
    """Per-node softmax(-loss / tau): lower-loss experts get more target weight."""
    if tau <= 0:
        raise FusionError("temperature must be positive")
    z = -np.asarray(losses, dtype=np.float64) / tau
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def fwr_penalty(weights, losses, tau: float = 1.0):
    """Mean cross-entropy between gate weights and softmax(-loss / tau).

    Accepts a Tensor (returns a scalar Tensor) or a plain array (returns a float).
    """
    target = fwr_target(losses, tau)
    if isinstance(weights, nd.Tensor):
        return nd.soft_cross_entropy(weights, target)
    tape = nd.Tape()
    return float(nd.soft_cross_entropy(tape.const(weights), target).value[0, 0])


@dataclass
class ECReport:
    per_expert: list[float]
    aggregate: float
    false_sizes: list[int]
    others_true_sizes: list[int]
    intersection_sizes: list[int]

    def rows(self) -> list[tuple[str, float]]:
        out = [(f"ec_{i}", v) for i, v in enumerate(self.per_expert)]
        return out + [("ec", self.aggregate)]


def _harmonic(a: float, b: float) -> float:
    return 0.0 if a == 0 or b == 0 else 2 * a * b / (a + b)


def expert_complementarity(predictions: Sequence[np.ndarray], labels) -> ECReport:
    """How often the other experts get right what expert i gets wrong.

    A ratio with an empty denominator counts as 0, so a perfect expert has 0.
    """
    labels = np.asarray(labels)
    correct = []
    for p in predictions:
        p = np.asarray(p)
        if p.shape != labels.shape:
            raise FusionError("prediction and label lengths differ")
        correct.append(p == labels)
    correct = np.stack(correct)
    per, fs, ts, xs = [], [], [], []
    for i in range(len(correct)):
        wrong_i = ~correct[i]
        others_true = np.delete(correct, i, axis=0).any(axis=0)
        inter = int((wrong_i & others_true).sum())
        nf, nt = int(wrong_i.sum()), int(others_true.sum())
        per.append(_harmonic(inter / nf if nf else 0.0, inter / nt if nt else 0.0))
        fs.append(nf)
        ts.append(nt)
        xs.append(inter)
    return ECReport(per, float(np.mean(per)), fs, ts, xs)


@dataclass(frozen=True)
class FusionOptions:
    pretrain: bool = True
    freeze: bool = True
    fwr_coefficient: float = 0.1
    tau: float = 1.0
    uni_losses: bool = False


ABLATIONS = {
    "GCN-GIR": FusionOptions(),
    "GCN-GIR-nf": FusionOptions(freeze=False),
    "GCN-GIR-nFWR": FusionOptions(fwr_coefficient=0.0),
    "GCN-GIR-J": FusionOptions(pretrain=False, freeze=False, fwr_coefficient=0.0),
    "GCN-GIR-JA": FusionOptions(pretrain=False, freeze=False, fwr_coefficient=0.0, uni_losses=True),
}


@dataclass
class FusionResult:
    bundle: ExpertBundle
    gate: nd.Params
    metrics: dict[str, float]
    stage1_params: list[nd.Params] | None
    ec: ECReport
    trace: list[dict] = field(default_factory=list)


def two_stage_train(experts: Sequence[Expert], g: Graph, task: LabeledTask, split: SplitSpec,
                    hyper: Hyper, options: FusionOptions = FusionOptions()) -> FusionResult:
    """Stage 1 trains each expert alone; stage 2 trains the gate (and, unless
    frozen, the experts) on fused cross-entropy + FWR."""
    if len(experts) < 2:
        raise FusionError("fusion needs at least two experts")
    if task.is_pair_task:
        raise FusionError("fusion is implemented for node classification")
    experts = list(experts)
    labels = task.node_labels
    C = task.num_classes
    stage1 = None
    if options.pretrain:
        stage1 = []
        for j, e in enumerate(experts):
            res = train_model(e.config, g, e.schedule, task, split,
                              Hyper(hyper.lr, hyper.weight_decay, hyper.epochs, hyper.patience,
                                    hyper.seed + 1000 * j), e.x)
            e.params = res.params
            stage1.append(nd.copy_params(res.params))
    else:
        for j, e in enumerate(experts):
            e.params = init_params(e.config, e.x.shape[1], hyper.seed + 1000 * j)
    for e in experts:
        e.frozen = options.freeze

    gate = init_gate(len(experts), C, hyper.seed + 7)
    params = dict(gate)
    if not options.freeze:
        for j, e in enumerate(experts):
            params.update({f"e{j}.{k}": v for k, v in e.params.items()})
    fixed = [e.logits(g) for e in experts] if options.freeze else None

    state = nd.AdamState(lr=hyper.lr, weight_decay=hyper.weight_decay)
    train = split.train
    trace = []
    best_epoch, best_val, best = 0, -np.inf, nd.copy_params(params)
    for epoch in range(hyper.epochs + 1):
        tape = nd.Tape()
        try:
            if fixed is not None:
                outs = [tape.const(z) for z in fixed]
            else:
                outs = [forward(e.config, {k: params[f"e{j}.{k}"] for k in e.params}, g, e.schedule,
                                e.x, tape, prefix=f"e{j}.") for j, e in enumerate(experts)]
            W = tape.param("gate.W", params["gate.W"])
            b = tape.param("gate.b", params["gate.b"])
            fused, weights = gate_fuse(outs, W, b)
            loss = nd.cross_entropy(fused, labels[train], rows=train)
            if options.fwr_coefficient:
                per_node = np.stack([nd.per_row_cross_entropy(o.value[train], labels[train]) for o in outs], axis=1)
                pen = fwr_penalty(nd.take_rows(weights, train), per_node, options.tau)
                loss = nd.add(loss, nd.scale(pen, options.fwr_coefficient))
            if options.uni_losses:
                for o in outs:
                    loss = nd.add(loss, nd.cross_entropy(o, labels[train], rows=train))
        except nd.NonFiniteError as exc:
            raise TrainingDiverged(epoch, str(exc)) from exc
        pred = fused.value.argmax(axis=1)
        val = accuracy(pred[split.val], labels[split.val])
        trace.append({"epoch": epoch, "loss": float(loss.value[0, 0]), "val": val,
                      "test": accuracy(pred[split.test], labels[split.test])})
        if val > best_val:
            best_epoch, best_val, best = epoch, val, nd.copy_params(params)
        if epoch == hyper.epochs or epoch - best_epoch >= hyper.patience:
            break
        grads = tape.backward(loss)
        nd.adam_step(params, grads, state)

    gate = {k: best[k] for k in ("gate.W", "gate.b")}
    if not options.freeze:
        for j, e in enumerate(experts):
            e.params = {k: best[f"e{j}.{k}"] for k in e.params}
    bundle = ExpertBundle(experts)
    logits = bundle.logits(g)
    fused, weights = gate_fuse_arrays(logits, gate)
    test = split.test
    preds = [z.argmax(axis=1) for z in logits]
    metrics = {"accuracy": accuracy(fused[test].argmax(axis=1), labels[test])}
    for j, p in enumerate(preds):
        metrics[f"expert{j}_accuracy"] = accuracy(p[test], labels[test])
    ec = expert_complementarity([p[test] for p in preds], labels[test])
    metrics["ec"] = ec.aggregate
    for j in range(len(experts)):
        metrics[f"gate{j}_mean_weight"] = float(weights[test, j].mean())
    metrics["stage2_best_epoch"] = best_epoch
    return FusionResult(bundle, gate, metrics, stage1, ec, trace)
