"""Minibatch training for all four strategies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ..autodiff import ops
from ..autodiff.optim import make_optimizer
from ..autodiff.tensor import no_grad
from ..canon import DiscreteCanonOutput, prior_loss, total_loss
from ..config import TrainConfig
from ..errors import NumericalError
from ..groups.cyclic import rotate_array
from ..groups.rotations import rotation_angle, sample_uniform_rotation
from .augment import augment_batch, sample_rotation_3d
from .models import ModelBundle

N_PROBE = 8


@dataclass
class TrainResult:
    bundle: ModelBundle
    history: List[dict] = field(default_factory=list)
    rng_state: Optional[dict] = None  # training RNG state after the last batch


def _inputs(dataset):
    return dataset.images if hasattr(dataset, "images") else dataset.clouds


def _augment(kind, rng, batch, config):
    if kind == "none":
        return batch
    if config.task == "images":
        return augment_batch(kind, rng, batch, config.group_order)
    return np.stack([b @ sample_rotation_3d(kind, rng).T for b in batch])


def _check_finite(value: float, batch: int, epoch: int, lr: float) -> None:
    if not math.isfinite(value):
        raise NumericalError(f"non-finite loss {value} at epoch {epoch}, batch {batch} (lr={lr})")


def _orbit_dispersion(bundle: ModelBundle, probe: np.ndarray, config: TrainConfig, rng) -> float:
    """Mean spread of canonical forms across transformed copies of probe inputs.

    Zero means every copy of a probe input was mapped to the same canonical
    form.
    """
    canon = bundle.canonicalizer
    was_training = canon.training
    canon.eval()
    spreads = []
    with no_grad():
        for x in probe:
            if config.task == "images":
                n = config.group_order
                copies = np.stack([rotate_array(x, k=g, n=n) for g in range(n)])
            else:
                copies = np.stack([x] + [x @ sample_uniform_rotation(rng, 3).T for _ in range(3)])
            forms = bundle.canonicalize(copies).canonical_input.data
            spreads.append(float(forms.std(axis=0).mean()))
    canon.train(was_training)
    return float(np.mean(spreads))


def _run_epoch(bundle, X, y, config, optimizer, params, rng, epoch, prior_only=False, task_only=False,
               augment="none"):
    N = X.shape[0]
    order = rng.permutation(N)
    totals = dict(task=0.0, prior=0.0, correct=0, identity=0, angle=0.0)
    for b, start in enumerate(range(0, N, config.batch_size)):
        idx = order[start:start + config.batch_size]
        xb = _augment(augment, rng, X[idx], config)
        yb = y[idx]
        logits, out = bundle(xb, return_canon=True) if not task_only else (bundle.predictor(xb), None)
        task = ops.cross_entropy_logits(logits, yb)
        prior = prior_loss(out, config.lam) if out is not None else None
        if prior_only:
            loss = total_loss(None, prior, config.beta)
        elif prior is not None:
            loss = total_loss(task, prior, config.beta)
        else:
            loss = task
        _check_finite(loss.item(), b, epoch, config.lr)
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        totals["task"] += task.item() * len(idx)
        if prior is not None:
            totals["prior"] += prior.item() * len(idx)
            if isinstance(out, DiscreteCanonOutput):
                totals["identity"] += int((out.selected == 0).sum())
            else:
                totals["angle"] += float(rotation_angle(out.rotation.data).sum())
        totals["correct"] += int((logits.data.argmax(-1) == yb).sum())
    row = {"epoch": epoch, "task_loss": totals["task"] / N,
           "prior_loss": totals["prior"] / N if bundle.has_canonicalizer and not task_only else None,
           "accuracy": totals["correct"] / N}
    if bundle.has_canonicalizer and not task_only:
        if config.task == "images":
            row["identity_fraction"] = totals["identity"] / N
        else:
            row["mean_angle"] = totals["angle"] / N
    return row


def train(bundle: ModelBundle, dataset, config: Optional[TrainConfig] = None,
          log: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Train ``bundle`` on ``dataset`` according to ``config.mode``.

    A pretraining phase (``config.pretrain_epochs``) first fits the predictor
    alone on the aligned data. Then:

    - ``vanilla`` / ``rotation-augmented``: predictor on the task loss,
      inputs augmented by ``config.augment``;
    - ``joint``: both networks on ``task + beta * prior``;
    - ``zero-shot-canon``: canonicalizer only, on ``beta * prior``.

    One metrics row per epoch is appended to the history (and passed to
    ``log``). A non-finite loss raises :class:`NumericalError`.
    """
    config = bundle.config if config is None else config
    if config.uses_canonicalizer and not bundle.has_canonicalizer:
        raise ValueError(f"mode {config.mode!r} needs a canonicalizer")
    rng = np.random.default_rng([config.seed, 3])
    X, y = _inputs(dataset), dataset.labels
    history: List[dict] = []

    def emit(row):
        history.append(row)
        if log is not None:
            log(row)

    if config.pretrain_epochs:
        opt = make_optimizer(config.optimizer, bundle.predictor.parameters(), config.lr)
        bundle.predictor.train()
        for epoch in range(config.pretrain_epochs):
            row = _run_epoch(bundle, X, y, config, opt, None, rng, epoch, task_only=True)
            row["phase"] = "pretrain"
            emit(row)

    if config.mode in ("vanilla", "rotation-augmented"):
        params = bundle.predictor.parameters()
        augment = config.augment if config.mode == "rotation-augmented" else "none"
        task_only, prior_only = True, False
    elif config.mode == "joint":
        params = bundle.parameters()
        augment, task_only, prior_only = "none", False, False
    else:
        params = bundle.canonicalizer.parameters()
        augment, task_only, prior_only = "none", False, True
    opt = make_optimizer(config.optimizer, params, config.lr)
    probe = X[:N_PROBE]
    bundle.train()
    if prior_only:
        bundle.predictor.eval()
    for epoch in range(config.epochs):
        row = _run_epoch(bundle, X, y, config, opt, params, rng, epoch, prior_only, task_only, augment)
        row["phase"] = "main"
        if bundle.has_canonicalizer and not task_only:
            row["orbit_dispersion"] = _orbit_dispersion(bundle, probe, config, np.random.default_rng(epoch))
        emit(row)
    bundle.eval()
    return TrainResult(bundle, history, rng.bit_generator.state)
