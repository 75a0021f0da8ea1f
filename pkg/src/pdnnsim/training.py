"""Offline digital-twin training and transfer of the weights to the chip.

The twin is the chip's own topology in normalized units.  Attenuators can
only remove light, so weights are transmissions: training projects every
weight back into ``[weight_floor, 1]`` after each SGD step, and no neuron
has an additive bias.  Trained transmissions are turned into attenuator
drive currents through a sampled look-up table.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .devices import AttenuatorParams, attenuator_transmission
from .errors import TrainingError, ValidationError
from .network import WEIGHT_SHAPES, _as_weight_arrays
from .optics import ImageFormer, RoutingPlan, default_routing_plan

ORDINAL_LEVELS = (-0.75, -0.25, 0.25, 0.75)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 300
    batch_size: int = 16
    seed: int = 0
    loss_kind: str = "cross_entropy2"  # or "ordinal4"
    weight_floor: float = 1e-4  # smallest realizable transmission
    constraint: str = "project"  # or "clamp_after"
    init_range: tuple = (0.1, 0.9)
    target_scale: float = 1.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValidationError(f"invalid training config: {self}")
        if self.loss_kind not in ("cross_entropy2", "ordinal4"):
            raise ValidationError(f"unknown loss {self.loss_kind!r}")
        if self.constraint not in ("project", "clamp_after"):
            raise ValidationError(f"unknown constraint mode {self.constraint!r}")
        if not 0 <= self.weight_floor < 1:
            raise ValidationError("weight_floor must lie in [0, 1)")

    @property
    def n_classes(self) -> int:
        return 2 if self.loss_kind == "cross_entropy2" else 4

    @classmethod
    def for_classes(cls, k: int, **overrides) -> "TrainConfig":
        """Defaults for a 2- or 4-class task.  The ordinal loss has larger
        gradients early on and collapses layer 2 onto the floor at 0.05; at
        0.02 it needs ~500 epochs to fit noise-free letters exactly."""
        if k not in (2, 4):
            raise ValidationError("classes must be 2 or 4")
        base = {"loss_kind": "cross_entropy2"} if k == 2 else {"loss_kind": "ordinal4", "learning_rate": 0.02, "epochs": 500}
        return cls(**{**base, **overrides})


@dataclass
class WeightSolution:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    train_metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.w1, self.w2, self.w3 = _as_weight_arrays((self.w1, self.w2, self.w3))
        for w in self.weights:
            if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
                raise ValidationError("weights must be transmissions in [0, 1]")

    @property
    def weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.w1, self.w2, self.w3

    def to_dict(self) -> dict:
        return {"w1": self.w1.tolist(), "w2": self.w2.tolist(), "w3": self.w3.tolist(),
                "train_metrics": self.train_metrics}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightSolution":
        return cls(data["w1"], data["w2"], data["w3"], data.get("train_metrics", {}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "WeightSolution":
        return cls.from_dict(json.loads(Path(path).read_text()))


def record_calibration_pixels(scenes, former: ImageFormer) -> np.ndarray:
    """Pixel values as read on the calibration array, normalized so that the
    mean of the unobstructed reference frame is 1."""
    frames = former.form_image(scenes)
    return frames / former.reference_frame().mean()


def extract_patches(pixels, plan: RoutingPlan) -> np.ndarray:
    rows, cols = plan.index_arrays()
    pixels = np.asarray(pixels, dtype=float)
    return pixels[..., rows, cols] / plan.split_counts[rows, cols]


def _forward(weights, patches):
    w1, w2, w3 = weights
    z1 = (patches * w1).sum(axis=-1)
    h1 = np.maximum(z1, 0.0)
    z2 = h1 @ w2.T
    h2 = np.maximum(z2, 0.0)
    return z1, h1, z2, h2, h2 @ w3.T


def _loss_head(out, labels, cfg: TrainConfig):
    """Loss and its gradient w.r.t. the two network outputs."""
    n = len(labels)
    if cfg.loss_kind == "cross_entropy2":
        shifted = out - out.max(axis=1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        loss = -logp[np.arange(n), labels].mean()
        grad = np.exp(logp)
        grad[np.arange(n), labels] -= 1.0
        return loss, grad / n
    targets = np.asarray(ORDINAL_LEVELS)[labels] * cfg.target_scale
    resid = out[:, 0] - out[:, 1] - targets
    loss = float(np.mean(resid**2))
    dv = 2.0 * resid / n
    return loss, np.stack([dv, -dv], axis=1)


def loss_and_grad(weights, patches, labels, cfg: TrainConfig):
    """Mean loss over the batch and its gradient for each weight matrix."""
    w1, w2, w3 = weights
    z1, h1, z2, h2, out = _forward(weights, patches)
    loss, d_out = _loss_head(out, labels, cfg)
    g3 = d_out.T @ h2
    d_z2 = (d_out @ w3) * (z2 > 0)
    g2 = d_z2.T @ h1
    d_z1 = (d_z2 @ w2) * (z1 > 0)
    g1 = np.einsum("nk,nkj->kj", d_z1, patches)
    return float(loss), (g1, g2, g3)


def predict(weights, patches, cfg: TrainConfig) -> np.ndarray:
    out = _forward(weights, patches)[-1]
    if cfg.loss_kind == "cross_entropy2":
        return np.argmax(out, axis=1)
    v = out[:, 0] - out[:, 1]
    levels = np.asarray(ORDINAL_LEVELS) * cfg.target_scale
    return np.argmin(np.abs(v[:, None] - levels[None, :]), axis=1)


def train_digital_twin(pixels, labels, cfg: TrainConfig = TrainConfig(),
                       plan: RoutingPlan | None = None, step_hook=None) -> WeightSolution:
    """Mini-batch SGD on the twin; deterministic for a given seed.

    ``step_hook(weights)`` is called after every step (after projection).
    """
    plan = plan or default_routing_plan()
    labels = np.asarray(labels, dtype=int)
    if len(labels) == 0:
        raise TrainingError("empty training set")
    if labels.min() < 0 or labels.max() >= cfg.n_classes:
        raise TrainingError(f"labels must lie in 0..{cfg.n_classes - 1}")
    patches = extract_patches(pixels, plan)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.init_range
    weights = [rng.uniform(lo, hi, size=s) for s in WEIGHT_SHAPES]
    project = cfg.constraint == "project"
    n = len(labels)
    epoch_losses = []
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grad(weights, patches[idx], labels[idx], cfg)
            if not math.isfinite(loss):
                raise TrainingError("loss became non-finite")
            for w, g in zip(weights, grads):
                w -= cfg.learning_rate * g
                if project:
                    np.clip(w, cfg.weight_floor, 1.0, out=w)
            if step_hook is not None:
                step_hook(weights)
            total += loss * len(idx)
        epoch_losses.append(total / n)
    if not project:
        weights = [np.clip(w, cfg.weight_floor, 1.0) for w in weights]
    final_loss, _ = loss_and_grad(weights, patches, labels, cfg)
    if not math.isfinite(final_loss):
        raise TrainingError("loss became non-finite")
    accuracy = float(np.mean(predict(weights, patches, cfg) == labels))
    metrics = {"final_loss": final_loss, "train_accuracy": accuracy,
               "epoch_losses": epoch_losses, "config": asdict(cfg)}
    return WeightSolution(*weights, train_metrics=metrics)


def write_loss_csv(sol: WeightSolution, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for i, loss in enumerate(sol.train_metrics.get("epoch_losses", []), start=1):
            writer.writerow([i, repr(loss)])


@dataclass(frozen=True)
class LookupTable:
    """Sampled attenuator curve, current (mA) to transmission."""

    currents: np.ndarray
    transmissions: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.currents, dtype=float)
        t = np.asarray(self.transmissions, dtype=float)
        if c.shape != t.shape or c.ndim != 1 or len(c) < 2:
            raise ValidationError("look-up table needs matching 1-D grids")
        if np.any(np.diff(t) >= 0) or np.any(np.diff(c) <= 0):
            raise ValidationError("look-up table must be strictly monotone")
        object.__setattr__(self, "currents", c)
        object.__setattr__(self, "transmissions", t)

    @property
    def floor(self) -> float:
        return float(self.transmissions[-1])

    def transmission(self, current):
        return np.interp(current, self.currents, self.transmissions)

    def current(self, transmission):
        """Inverse query, linear interpolation in the dB domain."""
        t = np.asarray(transmission, dtype=float)
        loss_db = -10.0 * np.log10(np.clip(t, self.floor, 1.0))
        grid_db = -10.0 * np.log10(self.transmissions)
        return np.interp(loss_db, grid_db, self.currents)

    def to_dict(self) -> dict:
        return {"currents_ma": self.currents.tolist(), "transmissions": self.transmissions.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "LookupTable":
        return cls(data["currents_ma"], data["transmissions"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def build_lookup_table(att: AttenuatorParams = AttenuatorParams(), n_points: int = 256) -> LookupTable:
    if n_points < 16:
        raise ValidationError("look-up table needs at least 16 points")
    currents = np.linspace(0.0, att.max_current, n_points)
    return LookupTable(currents, attenuator_transmission(currents, att))


@dataclass(frozen=True)
class CompileReport:
    n_clamped: int
    clamped: tuple  # (layer, row, col) of weights below the table floor

    def to_dict(self) -> dict:
        return {"n_clamped": self.n_clamped, "clamped": [list(c) for c in self.clamped]}


def weights_to_currents(sol: WeightSolution, lut: LookupTable):
    """Drive currents for every attenuator, plus a report of clamped weights.

    Weights below the table floor are driven at the maximum current.
    """
    currents, clamped = [], []
    for layer, w in enumerate(sol.weights, start=1):
        if np.any(w > 1.0):
            raise ValidationError(f"layer {layer} has a weight above 1")
        low = w < lut.floor
        clamped.extend((layer, int(r), int(c)) for r, c in zip(*np.nonzero(low)))
        cur = lut.current(w)
        cur[low] = lut.currents[-1]
        currents.append(cur)
    return tuple(currents), CompileReport(len(clamped), tuple(clamped))
