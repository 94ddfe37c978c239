"""Minibatch training and evaluation with a versioned CSV metrics log."""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import autodiff as ad
from ..topnet import TopNet, TopNetSpec
from .datasets import DatasetRecord, load_dataset, split_indices

METRICS_HEADER = "# topnets-metrics v1"
METRIC_FIELDS = ["epoch", "lr", "train_loss", "train_acc", "val_loss", "val_acc", "val_auroc"]


class TrainingError(RuntimeError):
    pass


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    data: str | None = None
    seed: int = 0
    epochs: int = 100
    batch_size: int = 16
    lr: float = 1e-3
    split: tuple = (0.8, 0.1, 0.1)
    out: str | None = None
    cosine: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr < 0:
            raise ValueError("epochs >= 0, batch_size >= 1 and lr >= 0 required")
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be three numbers summing to 1, got {self.split}")
        self.split = tuple(float(s) for s in self.split)

    @property
    def spec(self) -> TopNetSpec:
        return TopNetSpec.from_dict(dict(self.model))

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "RunConfig":
        d = dict(d)
        base = base or Path(".")
        if isinstance(d.get("model"), str):
            d["model"] = json.loads((base / d["model"]).read_text())
        if isinstance(d.get("data"), str) and not os.path.isabs(d["data"]):
            d["data"] = str(base / d["data"])
        env = os.environ.get("TOPNET_SEED")
        if env is not None:
            d["seed"] = int(env)
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base=path.parent)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def auroc(scores, labels) -> float:
    """Probability a random positive outscores a random negative (ties count half)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    pos, neg = s[y], s[~y]
    if len(pos) == 0 or len(neg) == 0:
        return float("nan")
    gt = (pos[:, None] > neg[None, :]).sum()
    eq = (pos[:, None] == neg[None, :]).sum()
    return float((gt + 0.5 * eq) / (len(pos) * len(neg)))


def _labels(records, task):
    y = [r.label for r in records]
    return np.asarray(y, dtype=np.int64 if task == "classify" else float)


def _batches(n, size, rng=None):
    idx = np.arange(n) if rng is None else rng.permutation(n)
    return [idx[i:i + size] for i in range(0, n, size)]


def predict(model: TopNet, records: list[DatasetRecord], batch_size: int = 64) -> np.ndarray:
    outs = []
    for b in _batches(len(records), batch_size):
        batch = model.prepare([records[i].item for i in b])
        outs.append(model.forward(batch).data)
    w = 1 if model.spec.task == "regress" else model.spec.classes
    return np.concatenate(outs) if outs else np.zeros((0, w))


def evaluate(model: TopNet, records: list[DatasetRecord], batch_size: int = 64) -> dict:
    if not records:
        return {"n": 0, "loss": float("nan"), "acc": float("nan"), "auroc": float("nan")}
    out = predict(model, records, batch_size)
    y = _labels(records, model.spec.task)
    if model.spec.task == "regress":
        pred = out.reshape(-1)
        mae = float(np.abs(pred - y).mean())
        return {"n": len(y), "loss": mae, "mae": mae, "acc": float("nan"), "auroc": float("nan")}
    z = out - out.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    res = {"n": len(y), "loss": float(-logp[np.arange(len(y)), y].mean()),
           "acc": float((out.argmax(axis=1) == y).mean()), "auroc": float("nan")}
    if out.shape[1] == 2:
        res["auroc"] = auroc(logp[:, 1] - logp[:, 0], y == 1)
    return res


def _dump_diagnostics(out_dir, model, epoch, step, loss_value):
    info = {
        "epoch": epoch, "step": step, "loss": repr(loss_value),
        "param_norms": {k: float(np.linalg.norm(p.data)) for k, p in model.store},
        "nonfinite_params": [k for k, p in model.store if not np.all(np.isfinite(p.data))],
    }
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "diagnostics.json").write_text(json.dumps(info, indent=2, sort_keys=True))
    return info


@dataclass
class TrainResult:
    model: TopNet
    rows: list
    best_epoch: int
    test: dict
    splits: tuple


def _fmt(v):
    return "nan" if isinstance(v, float) and math.isnan(v) else repr(float(v)) if isinstance(v, float) else str(v)


def train(config: RunConfig, records: list[DatasetRecord] | None = None, verbose: bool = False) -> TrainResult:
    """Adam on minibatches; keeps the best-validation parameters; logs one CSV row per epoch.

    Epoch 0 is the untrained model. Raises :class:`TrainingError` (after writing
    ``diagnostics.json``) when the loss becomes non-finite.
    """
    if records is None:
        if config.data is None:
            raise ValueError("no dataset given")
        records = load_dataset(config.data)
    spec = config.spec
    if not records:
        raise ValueError("empty dataset")
    in_width = records[0].attributed.width
    model = TopNet(spec, in_width, seed=config.seed)
    tr, va, te = split_indices(records, config.split, seed=config.seed)
    train_r = [records[i] for i in tr]
    val_r = [records[i] for i in va]
    test_r = [records[i] for i in te]
    rng = np.random.default_rng(config.seed + 1)
    out_dir = Path(config.out) if config.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    best = ad.ParamStore()
    for k, p in model.store:
        best.params[k] = ad.Tensor(p.data.copy())
    rows, best_key, best_epoch = [], None, 0

    def log_epoch(epoch, lr):
        nonlocal best_key, best_epoch
        t = evaluate(model, train_r, config.batch_size)
        v = evaluate(model, val_r, config.batch_size) if val_r else t
        row = {"epoch": epoch, "lr": lr, "train_loss": t["loss"], "train_acc": t["acc"],
               "val_loss": v["loss"], "val_acc": v["acc"], "val_auroc": v["auroc"]}
        rows.append(row)
        key = (-v["acc"] if not math.isnan(v["acc"]) else 0.0, v["loss"])
        if best_key is None or key < best_key:
            best_key, best_epoch = key, epoch
            best.copy_from(model.store)
        if verbose:
            print(" ".join(f"{k}={_fmt(row[k])}" for k in METRIC_FIELDS), flush=True)

    log_epoch(0, config.lr)
    y_train = _labels(train_r, spec.task)
    for epoch in range(1, config.epochs + 1):
        lr = config.lr
        if config.cosine:
            lr = 0.5 * config.lr * (1 + math.cos(math.pi * (epoch - 1) / max(1, config.epochs)))
        for step, b in enumerate(_batches(len(train_r), config.batch_size, rng)):
            batch = model.prepare([train_r[i].item for i in b])
            model.store.zero_grad()
            with ad.Tape() as tape:
                loss, _ = model.loss(batch, y_train[b])
                if not np.isfinite(loss.data):
                    info = _dump_diagnostics(out_dir, model, epoch, step, float(loss.data))
                    raise TrainingError(f"non-finite loss at epoch {epoch} step {step}: {info['loss']}")
                tape.backward(loss)
            ad.adam_step(model.store, lr)
        log_epoch(epoch, lr)

    model.store.copy_from(best)
    test = evaluate(model, test_r, config.batch_size)
    test["best_epoch"] = best_epoch
    if out_dir is not None:
        write_metrics(rows, out_dir / "metrics.csv")
        meta = json.dumps({"spec": json.loads(spec.to_json()), "in_width": in_width})
        ad.save_checkpoint(model.store, out_dir / "checkpoint.txt", meta)
        (out_dir / "report.json").write_text(json.dumps({"test": test, "config": json.loads(config.to_json())},
                                                        indent=2, sort_keys=True))
    if verbose:
        print("test " + " ".join(f"{k}={_fmt(v)}" for k, v in sorted(test.items())), flush=True)
    return TrainResult(model, rows, best_epoch, test, (tr, va, te))


def write_metrics(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write(METRICS_HEADER + "\n")
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in METRIC_FIELDS})


def read_metrics(path) -> list[dict]:
    with open(path) as fh:
        head = fh.readline().strip()
        if head != METRICS_HEADER:
            raise ValueError(f"{path}: unsupported metrics header {head!r}")
        rows = []
        for r in csv.DictReader(fh):
            rows.append({k: (int(v) if k == "epoch" else float(v)) for k, v in r.items()})
    return rows


def load_model(path) -> TopNet:
    params, meta = ad.load_checkpoint(path)
    if meta is None:
        raise ValueError(f"{path}: checkpoint has no model metadata")
    info = json.loads(meta)
    model = TopNet(TopNetSpec.from_dict(info["spec"]), info["in_width"])
    missing = set(model.store.params) ^ set(params)
    if missing:
        raise ValueError(f"{path}: parameter names differ from the model: {sorted(missing)[:5]}")
    for k, v in params.items():
        model.store[k].data[...] = v
    return model
