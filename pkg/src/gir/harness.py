"""Experiment configuration, multi-seed orchestration and CSV output."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .anchors import AnchorSet, partition_anchors, select_anchors
from .datasets import (
    BENCHMARKS, Dataset, link_prediction_task, make_dataset, mirror_pair_dataset, two_view_fixture,
)
from .graph import (
    LINK_TASK, TASK_ALIASES, Graph, build_graph, ones_features, read_edge_list, read_labels,
    split_dataset,
)
from .fusion import ABLATIONS, Expert, FusionOptions, two_stage_train
from .metrics import summarize
from .models import Hyper, ModelConfig, TrainingDiverged, model_inputs, train_model
from .schedule import build_schedule

CSV_COLUMNS = ("dataset", "task", "variant", "seed", "split_seed", "metric_name",
               "metric_value", "epochs_run", "wall_ms")
SUMMARY_COLUMNS = ("dataset", "task", "variant", "metric_name", "n", "mean", "std", "min", "max")
SHORT_TASK = {v: k for k, v in TASK_ALIASES.items()}

DESK_SEEDS = list(range(5))
DESK_SPLIT_SEEDS = list(range(3))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    dataset: dict
    variants: list[str] = field(default_factory=lambda: ["GCN", "GIR", "GIR-A"])
    layers: int = 3
    hidden: int | None = None
    anchors: int | None = None
    anchor_sets: int | None = None
    anchor_strategy: str = "greedy-cover"
    anchor_nodes: list[int] | None = None
    mode: str = "literal"
    lr: float = 0.01
    weight_decay: float = 1e-5
    epochs: int = 200
    patience: int = 50
    seeds: list[int] = field(default_factory=lambda: list(range(20)))
    split_seeds: list[int] = field(default_factory=lambda: list(range(5)))
    output: str | None = None

    def __post_init__(self):
        if not self.seeds or not self.split_seeds:
            raise ConfigError("seed lists must be nonempty")
        if not self.variants:
            raise ConfigError("no model variants given")
        edges = self.dataset.get("edges")
        for key in ("edges", "labels"):
            path = self.dataset.get(key)
            if path is not None and not Path(path).exists():
                raise ConfigError(f"dataset file {path} does not exist")
        if edges is None and not any(k in self.dataset for k in ("synthetic", "mirror", "two_view")):
            raise ConfigError("dataset needs 'edges' or a synthetic generator")
        preset = BENCHMARKS.get(self.dataset.get("synthetic", self.dataset.get("name", "")))
        if preset is not None:
            self.hidden = self.hidden or preset.hidden
            self.anchors = self.anchors or preset.anchors
            self.anchor_sets = self.anchor_sets or preset.anchor_sets
        self.hidden = self.hidden or 32
        self.anchors = self.anchors or (len(self.anchor_nodes) if self.anchor_nodes else 16)
        self.anchor_sets = self.anchor_sets or 4

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc = dict(doc)
        if "variant" in doc:
            doc["variants"] = [doc.pop("variant")]
        return cls(**doc)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def desk(self) -> "ExperimentConfig":
        doc = asdict(self)
        doc.update(seeds=DESK_SEEDS, split_seeds=DESK_SPLIT_SEEDS)
        return ExperimentConfig(**doc)

    def hyper(self, seed: int) -> Hyper:
        return Hyper(self.lr, self.weight_decay, self.epochs, self.patience, seed)


def load_dataset(spec: dict) -> Dataset:
    """Dataset from edge/label files or one of the synthetic generators."""
    if "synthetic" in spec:
        return make_dataset(spec["synthetic"], spec.get("seed", 0))
    if "mirror" in spec:
        opts = spec["mirror"]
        return mirror_pair_dataset(opts.get("arm_size", 12), opts.get("seed", 0))[0]
    if "two_view" in spec:
        return two_view_fixture(**spec["two_view"])
    kind = TASK_ALIASES.get(spec["task"], spec["task"])
    g = read_edge_list(spec["edges"], spec.get("nodes"), bool(spec.get("undirected", False)))
    undirected = is_symmetric(g)
    if kind == LINK_TASK:
        task = link_prediction_task(g, undirected, spec.get("seed", 0))
    else:
        task = read_labels(spec["labels"], kind)
    task.validate(g.n)
    return Dataset(spec.get("name", Path(spec["edges"]).stem), g, ones_features(g.n), task, undirected)


def message_graph(ds: Dataset, split) -> Graph:
    """Graph used for propagation; held-out positive links are removed for link prediction."""
    if ds.task.kind != LINK_TASK:
        return ds.graph
    held = np.concatenate([split.val, split.test])
    held = held[ds.task.pair_labels[held] == 1]
    drop = ds.task.pairs[held]
    if len(drop):
        drop = np.concatenate([drop, drop[:, ::-1]]) if ds.undirected else drop
    n = ds.graph.n
    keys = ds.graph.edge_keys()
    keep = ~np.isin(keys, drop[:, 0] * n + drop[:, 1]) if len(drop) else np.ones(len(keys), bool)
    return build_graph(ds.graph.edges()[keep], n)


def is_symmetric(g: Graph) -> bool:
    e = g.edges()
    return np.array_equal(np.sort(e[:, 0] * g.n + e[:, 1]), np.sort(e[:, 1] * g.n + e[:, 0]))


@dataclass
class RunRecord:
    dataset: str
    task: str
    variant: str
    seed: int
    split_seed: int
    metric_name: str
    metric_value: float
    epochs_run: int
    wall_ms: int
    best_epoch: int = -1
    status: str = "ok"

    def row(self) -> list:
        return [self.dataset, self.task, self.variant, self.seed, self.split_seed, self.metric_name,
                repr(float(self.metric_value)), self.epochs_run, self.wall_ms]


@dataclass
class RunResult:
    records: list[RunRecord]

    def summary(self) -> list[dict]:
        return aggregate_runs(self.records)

    def values(self, variant: str) -> list[float]:
        return [r.metric_value for r in self.records if r.variant == variant and r.status == "ok"]


def pick_anchors(cfg: ExperimentConfig, g: Graph, split_seed: int) -> AnchorSet:
    if cfg.anchor_nodes:
        if max(cfg.anchor_nodes) >= g.n or min(cfg.anchor_nodes) < 0:
            raise ConfigError("anchor_nodes out of range")
        return AnchorSet(tuple(int(a) for a in cfg.anchor_nodes), "fixed")
    return select_anchors(g, min(cfg.anchors, g.n), cfg.anchor_strategy, split_seed)


def build_model(cfg: ExperimentConfig, variant: str, ds: Dataset, g, anchors, out_dim: int):
    """Config, schedule(s) and augmented inputs for one variant on one split."""
    partition = partition_anchors(anchors, cfg.anchor_sets) if variant == "GIR-MIX" else None
    config = ModelConfig(variant, cfg.layers, cfg.hidden, out_dim, partition, cfg.mode)
    if config.family == "GCN":
        schedule = None
    elif config.family == "GIR":
        schedule = build_schedule(g, anchors.nodes, cfg.layers, cfg.mode)
    else:
        schedule = [build_schedule(g, s.nodes, cfg.layers, cfg.mode) for s in partition]
    return config, schedule, model_inputs(config, ds.features, anchors.nodes)


def run_experiment(cfg: ExperimentConfig, progress=None) -> RunResult:
    """Every (split seed x model seed x variant) run; splits are shared across variants."""
    ds = load_dataset(cfg.dataset)
    task = ds.task
    metric = "roc_auc" if task.is_pair_task else "accuracy"
    out_dim = cfg.hidden if task.is_pair_task else task.num_classes
    records = []
    for split_seed in cfg.split_seeds:
        split = split_dataset(task, split_seed)
        g = message_graph(ds, split)
        anchors = pick_anchors(cfg, g, split_seed)
        for variant in cfg.variants:
            config, schedule, x = build_model(cfg, variant, ds, g, anchors, out_dim)
            for seed in cfg.seeds:
                t0 = time.perf_counter()
                try:
                    res = train_model(config, g, schedule, task, split, cfg.hyper(seed), x)
                    rec = RunRecord(ds.name, SHORT_TASK[task.kind], variant, seed, split_seed, metric,
                                    res.best["test"], res.epochs_run, 0, res.best_epoch)
                except TrainingDiverged as exc:
                    rec = RunRecord(ds.name, SHORT_TASK[task.kind], variant, seed, split_seed, metric,
                                    float("nan"), exc.epoch, 0, status="diverged")
                rec.wall_ms = int(1000 * (time.perf_counter() - t0))
                records.append(rec)
                if progress:
                    progress(rec)
    records.sort(key=lambda r: (r.variant, r.split_seed, r.seed))
    return RunResult(records)


def aggregate_runs(records) -> list[dict]:
    """Mean / sample std / min / max per (dataset, task, variant, metric).

    Diverged runs are reported in ``n_diverged`` and left out of the statistics.
    """
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.dataset, r.task, r.variant, r.metric_name), []).append(r)
    out = []
    for key in sorted(groups):
        recs = groups[key]
        ok = [r.metric_value for r in recs if r.status == "ok"]
        row = dict(zip(SUMMARY_COLUMNS[:4], key))
        if ok:
            row.update(summarize(ok))
        else:
            row.update(n=0, mean=float("nan"), std=float("nan"), min=float("nan"), max=float("nan"))
        row["n_diverged"] = len(recs) - len(ok)
        out.append(row)
    return out


def records_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def summary_csv(summary: list[dict]) -> str:
    buf = io.StringIO()
    cols = SUMMARY_COLUMNS + ("n_diverged",)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in summary:
        w.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in cols])
    return buf.getvalue()


def read_records_csv(path: str | Path) -> list[RunRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [RunRecord(r["dataset"], r["task"], r["variant"], int(r["seed"]), int(r["split_seed"]),
                          r["metric_name"], float(r["metric_value"]), int(r["epochs_run"]), int(r["wall_ms"]))
                for r in csv.DictReader(fh)]


@dataclass
class FusionConfig:
    dataset: dict
    experts: list[str] = field(default_factory=lambda: ["GCN", "GIR"])
    variants: list[str] = field(default_factory=lambda: ["GCN-GIR"])
    layers: int = 3
    hidden: int = 16
    anchors: int = 8
    anchor_strategy: str = "greedy-cover"
    mode: str = "literal"
    lr: float = 0.01
    weight_decay: float = 1e-5
    epochs: int = 200
    patience: int = 50
    fwr_coefficient: float | None = None
    tau: float | None = None
    seeds: list[int] = field(default_factory=lambda: list(range(5)))
    split_seeds: list[int] | None = None
    output: str | None = None

    def __post_init__(self):
        unknown = [v for v in self.variants if v not in ABLATIONS]
        if unknown:
            raise ConfigError(f"unknown fusion variants {unknown}; choose from {sorted(ABLATIONS)}")
        if len(self.experts) < 2:
            raise ConfigError("fusion needs at least two experts")
        if not self.seeds:
            raise ConfigError("seed list must be nonempty")

    @classmethod
    def from_dict(cls, doc: dict) -> "FusionConfig":
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    def options(self, variant: str) -> FusionOptions:
        opts = ABLATIONS[variant]
        changes = {}
        if self.fwr_coefficient is not None and opts.fwr_coefficient:
            changes["fwr_coefficient"] = self.fwr_coefficient
        if self.tau is not None:
            changes["tau"] = self.tau
        return replace(opts, **changes)


def run_fusion(cfg: FusionConfig, progress=None) -> RunResult:
    """Two-stage fusion per seed; the split seed follows the model seed unless given.

    A two-view fixture dataset is regenerated per seed when its own seed is not pinned.
    """
    records = []
    split_seeds = cfg.split_seeds or [None]
    for seed in cfg.seeds:
        spec = dict(cfg.dataset)
        if "two_view" in spec and "seed" not in spec["two_view"]:
            spec["two_view"] = dict(spec["two_view"], seed=seed)
        ds = load_dataset(spec)
        if ds.task.is_pair_task:
            raise ConfigError("fusion runs on node classification tasks")
        C = ds.task.num_classes
        for split_seed in split_seeds:
            ss = seed if split_seed is None else split_seed
            split = split_dataset(ds.task, ss)
            anchors = select_anchors(ds.graph, min(cfg.anchors, ds.graph.n), cfg.anchor_strategy, ss)
            for variant in cfg.variants:
                t0 = time.perf_counter()
                experts = []
                for name in cfg.experts:
                    config = ModelConfig(name, cfg.layers, cfg.hidden, C, None, cfg.mode)
                    if config.family == "GIR-MIX":
                        raise ConfigError("GIR-MIX experts are not supported in fusion configs")
                    sched = None if config.family == "GCN" else build_schedule(ds.graph, anchors.nodes, cfg.layers, cfg.mode)
                    experts.append(Expert(config, sched, model_inputs(config, ds.features, anchors.nodes)))
                hyper = Hyper(cfg.lr, cfg.weight_decay, cfg.epochs, cfg.patience, seed)
                res = two_stage_train(experts, ds.graph, ds.task, split, hyper, cfg.options(variant))
                wall = int(1000 * (time.perf_counter() - t0))
                for name, value in res.metrics.items():
                    if name == "stage2_best_epoch":
                        continue
                    rec = RunRecord(ds.name, "nc", variant, seed, ss, name, value, len(res.trace) - 1, wall,
                                    res.metrics["stage2_best_epoch"])
                    records.append(rec)
                    if progress:
                        progress(rec)
    records.sort(key=lambda r: (r.variant, r.split_seed, r.seed, r.metric_name))
    return RunResult(records)


def write_embeddings_csv(path: str | Path, z: np.ndarray) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node"] + [f"z{j}" for j in range(z.shape[1])])
        for v, row in enumerate(z):
            w.writerow([v] + [repr(float(t)) for t in row])
