"""Training loop for the desk-scale tasks."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import queue
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .. import tensor as T
from ..decoders import Network, build_network
from . import tasks
from .checkpoint import save_checkpoint
from .config import NetworkConfig, config_hash, dump_config
from .optim import Optimizer, poly_decay
from .scenes import TRAIN_STREAM, VAL_STREAM, Sample, generate_batch

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Raised on a non-finite loss; ``snapshot`` holds what was known at the time."""

    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class TrainResult:
    network: Network
    history: list[dict] = field(default_factory=list)
    val_loss: float = math.nan
    metrics: dict = field(default_factory=dict)
    checkpoint: Path | None = None


def thread_count() -> int:
    raw = os.environ.get("DF_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DF_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"DF_THREADS must be a positive integer, got {raw!r}")
    return n


@contextmanager
def limited_threads():
    with threadpool_limits(limits=thread_count()):
        yield


def make_optimizer(cfg: NetworkConfig, params) -> tuple[Optimizer, float]:
    o = cfg.optim
    name = o.name or tasks.defaults(cfg).optimizer
    lr = o.lr or tasks.defaults(cfg).lr
    if name == "sgd":
        opt = Optimizer(params, "sgd", momentum=o.momentum, weight_decay=o.weight_decay)
    elif name == "adam":
        opt = Optimizer(params, "adam", beta1=o.beta1, beta2=o.beta2, eps=o.eps or 1e-8, weight_decay=o.weight_decay)
    elif name == "rmsprop":
        opt = Optimizer(params, "rmsprop", momentum=o.momentum, decay=o.decay, eps=o.eps or 1e-10,
                        weight_decay=o.weight_decay)
    else:
        raise ValueError(f"unknown optimizer {name!r}")
    return opt, lr


def _batches(template, batch: int, start: int, stop: int, prefetch: int):
    """Training batches for iterations [start, stop), optionally produced ahead on a thread."""
    if prefetch <= 0:
        for i in range(start, stop):
            yield generate_batch(template, TRAIN_STREAM, i, batch)
        return
    chan: queue.Queue = queue.Queue(maxsize=prefetch)
    stop_flag = threading.Event()

    def produce():
        for i in range(start, stop):
            if stop_flag.is_set():
                return
            chan.put(generate_batch(template, TRAIN_STREAM, i, batch))

    worker = threading.Thread(target=produce, daemon=True)
    worker.start()
    try:
        for _ in range(start, stop):
            yield chan.get()
    finally:
        stop_flag.set()
        while worker.is_alive():
            try:
                chan.get_nowait()
            except queue.Empty:
                worker.join(timeout=0.01)


def loss_and_grads(cfg: NetworkConfig, net: Network, batch: Sample) -> float:
    with T.Tape() as tape:
        out = net(batch.input)
        loss = tasks.compute_loss(cfg, out, batch)
    T.backward(tape, loss)
    return float(loss.item())


def validation_batches(cfg: NetworkConfig) -> list[Sample]:
    template = tasks.scene_template(cfg)
    return [generate_batch(template, VAL_STREAM, i, cfg.data.batch) for i in range(cfg.data.val_batches)]


def evaluate(cfg: NetworkConfig, net: Network, batches: list[Sample] | None = None) -> tuple[float, dict, np.ndarray, np.ndarray]:
    """Mean validation loss, task metrics, and the stacked predictions and targets."""
    batches = validation_batches(cfg) if batches is None else batches
    losses, preds, targets = [], [], []
    with T.no_tape():
        for b in batches:
            out = net(b.input)
            losses.append(float(tasks.compute_loss(cfg, out, b).item()))
            preds.append(tasks.prediction(cfg, out.data, b))
            targets.append(b.target.data)
    pred, target = np.concatenate(preds), np.concatenate(targets)
    metrics = tasks.evaluate_arrays(cfg.run.task, pred, target, num_classes=cfg.data.classes,
                                    head_length=cfg.data.head_length)
    return float(np.mean(losses)), metrics, pred, target


def _write_logs(out_dir: Path, history: list[dict], summary: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, ["iteration", "lr", "loss"])
        writer.writeheader()
        writer.writerows(history)
    (out_dir / "metrics.json").write_text(json.dumps({"history": history, **summary}, indent=2, default=float))


def train(cfg: NetworkConfig, out_dir=None, *, evaluate_at_end: bool = True) -> TrainResult:
    """Run the scheduled iterations; write a checkpoint and metric logs when ``out_dir`` is given."""
    cfg.validate()
    out_dir = Path(out_dir) if out_dir is not None else None
    with limited_threads():
        net = build_network(tasks.build_topology(cfg), cfg.run.seed)
        opt, base_lr = make_optimizer(cfg, net.parameters())
        template = tasks.scene_template(cfg)
        total = cfg.schedule.iterations
        history: list[dict] = []
        for it, batch in enumerate(_batches(template, cfg.data.batch, 0, total, cfg.data.prefetch)):
            lr = poly_decay(base_lr, it, total, cfg.schedule.decay_power) if cfg.schedule.kind == "poly" else base_lr
            loss = loss_and_grads(cfg, net, batch)
            if not math.isfinite(loss):
                snapshot = {
                    "iteration": it,
                    "lr": lr,
                    "loss": loss,
                    "last_losses": [h["loss"] for h in history[-5:]],
                    "nonfinite_params": [n for n, p in net.named_parameters() if not np.all(np.isfinite(p.data))],
                    "grad_norms": {n: float(np.linalg.norm(p.grad)) for n, p in net.named_parameters()
                                   if p.grad is not None},
                }
                if out_dir is not None:
                    out_dir.mkdir(parents=True, exist_ok=True)
                    (out_dir / "diverged.json").write_text(json.dumps(snapshot, indent=2, default=str))
                raise TrainingDiverged(f"loss became {loss} at iteration {it}", snapshot)
            opt.step(lr)
            history.append({"iteration": it, "lr": lr, "loss": loss})
            if cfg.run.log_every and it % cfg.run.log_every == 0:
                log.info("iter %d lr %.3g loss %.5f", it, lr, loss)

        result = TrainResult(net, history)
        summary: dict = {"config_hash": config_hash(cfg), "iterations": total}
        if evaluate_at_end and total > 0:
            result.val_loss, result.metrics, _, _ = evaluate(cfg, net)
            summary.update(val_loss=result.val_loss, metrics=result.metrics)
        if out_dir is not None:
            result.checkpoint = save_checkpoint(net, out_dir / "checkpoint", total, dump_config(cfg), config_hash(cfg))
            if total > 0:
                _write_logs(out_dir, history, summary)
    return result
