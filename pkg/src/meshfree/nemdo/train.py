"""Mini-batch Adam training with a validation-driven plateau scheduler."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import IncompatibleCheckpoint, InvalidArgument, NumericalFailure
from .config import ModelConfig, TrainConfig
from .model import NemdoNet, init_params, loss_and_grad, moment_loss_from_weights

log = logging.getLogger(__name__)

PRECISIONS = {"float32": np.float32, "float64": np.float64}


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` after ``patience`` epochs without improvement."""

    def __init__(self, lr, factor=0.5, patience=50, min_lr=1e-7, threshold=1e-4):
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.threshold = threshold
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, metric):
        """Record ``metric``; returns True when the rate was reduced."""
        if metric < self.best * (1.0 - self.threshold):
            self.best = metric
            self.bad_epochs = 0
            return False
        self.bad_epochs += 1
        if self.bad_epochs > self.patience and self.lr > self.min_lr:
            self.lr = max(self.lr * self.factor, self.min_lr)
            self.bad_epochs = 0
            return True
        return False

    def state(self):
        return {"lr": self.lr, "best": self.best, "bad_epochs": self.bad_epochs}

    def load(self, st):
        self.lr, self.best, self.bad_epochs = st["lr"], st["best"], st["bad_epochs"]


@dataclass
class TrainResult:
    params: np.ndarray  # best-validation parameters, float64
    log: list = field(default_factory=list)
    best_epoch: int = -1
    best_val: float = np.inf
    diverged: bool = False
    state: dict = field(default_factory=dict)


def _eval_loss(net, theta, offsets, cfg, batch=2048):
    total = 0.0
    for i in range(0, len(offsets), batch):
        chunk = offsets[i:i + batch]
        w = net.forward(theta, chunk)
        total += moment_loss_from_weights(w, chunk, cfg.kind, cfg.order_p) * len(chunk)
    return total / len(offsets)


def train(dataset, model_config: ModelConfig, train_config: TrainConfig, *, init=None,
          resume=None, precision="float32", callback=None, checkpoint=None, state_path=None,
          state_every=10):
    """Fit ``model_config`` to the dataset's train split.

    ``resume`` is the ``state`` dict of an earlier :class:`TrainResult` and
    continues the run exactly where it stopped. ``checkpoint`` is an optional
    path; the best-validation parameters are written there whenever they
    improve. ``state_path`` receives the full resume state every
    ``state_every`` epochs. The returned parameters are always the
    best-validation ones.
    """
    cfg, tc = model_config, train_config
    if precision not in PRECISIONS:
        raise InvalidArgument(f"precision must be one of {sorted(PRECISIONS)}")
    dtype = PRECISIONS[precision]
    train_x = dataset.part("train")
    val_x = dataset.part("val")
    if len(train_x) == 0 or len(val_x) == 0:
        raise InvalidArgument("dataset needs non-empty train and val splits")
    if dataset.stencil_n != cfg.stencil_n:
        raise InvalidArgument(f"dataset stencils have {dataset.stencil_n} neighbours, model expects {cfg.stencil_n}")
    train_x = train_x.astype(dtype)
    val_x = val_x.astype(dtype)
    net = NemdoNet(cfg)

    sched = PlateauScheduler(tc.learning_rate, tc.plateau_factor, tc.plateau_patience, tc.min_lr)
    rng = np.random.default_rng(tc.seed)
    if resume is not None:
        if resume.get("config_hash") != cfg.hash():
            raise IncompatibleCheckpoint("resume state was produced by a different model config")
        theta = np.array(resume["theta"], dtype=np.float64)
        m1, m2 = np.array(resume["m1"]), np.array(resume["m2"])
        step, start = int(resume["step"]), int(resume["epoch"])
        best = np.array(resume["best_theta"])
        best_val, best_epoch = float(resume["best_val"]), int(resume["best_epoch"])
        sched.load(resume["scheduler"])
        rng.bit_generator.state = resume["rng"]
        history = list(resume["log"])
    else:
        theta = np.array(init_params(cfg, tc.seed) if init is None else init, dtype=np.float64)
        m1 = np.zeros_like(theta)
        m2 = np.zeros_like(theta)
        step, start = 0, 0
        best, best_val, best_epoch = theta.copy(), np.inf, -1
        history = []

    def snapshot():
        return {"config_hash": cfg.hash(), "theta": theta, "m1": m1, "m2": m2, "step": step,
                "epoch": len(history), "best_theta": best, "best_val": best_val,
                "best_epoch": best_epoch, "scheduler": sched.state(),
                "rng": rng.bit_generator.state, "log": history}

    diverged = False
    for epoch in range(start, tc.epochs):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_x))
        acc, seen = 0.0, 0
        try:
            for i in range(0, len(order), tc.batch_size):
                xb = train_x[order[i:i + tc.batch_size]]
                value, g = loss_and_grad(theta.astype(dtype), xb, cfg, net)
                if not np.isfinite(value):
                    raise NumericalFailure(f"training loss became {value} at epoch {epoch}")
                g = g.astype(np.float64)
                step += 1
                m1 = tc.beta1 * m1 + (1 - tc.beta1) * g
                m2 = tc.beta2 * m2 + (1 - tc.beta2) * g * g
                mhat = m1 / (1 - tc.beta1 ** step)
                vhat = m2 / (1 - tc.beta2 ** step)
                theta = theta - sched.lr * mhat / (np.sqrt(vhat) + tc.eps_adam)
                acc += value * len(xb)
                seen += len(xb)
            val = _eval_loss(net, theta.astype(dtype), val_x, cfg)
            if not np.isfinite(val):
                raise NumericalFailure(f"validation loss became {val} at epoch {epoch}")
        except NumericalFailure as exc:
            log.error("aborting: %s; keeping parameters from epoch %d", exc, best_epoch)
            diverged = True
            break

        lr_used = sched.lr
        reduced = sched.step(val)
        if val < best_val:
            best, best_val, best_epoch = theta.copy(), val, epoch
            if checkpoint is not None:
                from .checkpoint import save_checkpoint
                save_checkpoint(checkpoint, best, cfg)
        row = {"epoch": epoch, "train_loss": acc / seen, "val_loss": val, "lr": lr_used,
               "seconds": time.perf_counter() - t0}
        history.append(row)
        if reduced:
            log.info("epoch %d: learning rate reduced to %.3e", epoch, sched.lr)
        log.debug("epoch %d train %.4e val %.4e lr %.2e", epoch, row["train_loss"], val, lr_used)
        if callback is not None:
            callback(row)
        if state_path is not None and (epoch + 1) % state_every == 0:
            save_train_state(snapshot(), state_path)

    state = snapshot()
    if state_path is not None:
        save_train_state(state, state_path)
    return TrainResult(best, history, best_epoch, best_val, diverged, state)


def save_train_state(state, path):
    """Persist a resume state as ``.npz`` arrays plus a JSON blob for the scalars."""
    arrays = {k: np.asarray(state[k]) for k in ("theta", "m1", "m2", "best_theta")}
    meta = {k: v for k, v in state.items() if k not in arrays}
    np.savez(Path(path), meta=np.array(json.dumps(meta)), **arrays)


def load_train_state(path):
    with np.load(Path(path)) as z:
        state = json.loads(str(z["meta"]))
        for k in ("theta", "m1", "m2", "best_theta"):
            state[k] = z[k].copy()
    return state
