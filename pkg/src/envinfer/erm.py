"""Full-batch ERM training and the hand-balanced subset builder."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import net, rng
from .colored import ColoredDataset
from .errors import DivergedLoss, EmptyDataset, EmptyGroup


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 501
    step_size: float = 1e-3
    weight_decay: float = 1.1e-3
    seed: int = 0
    eval_every: int = 50
    widths: tuple = (392, 390, 390, 1)

    def __post_init__(self):
        if self.steps <= 0 or self.step_size <= 0:
            raise ValueError("steps and step_size must be positive")


@dataclass
class TrainedModel:
    params: net.ModelParams
    history: list           # dicts: step, loss, train_acc (+ per-env fields for IRM)
    config: object
    dataset_id: str = ""


def train_erm(dataset: ColoredDataset, config: TrainConfig,
              dataset_id: str = "") -> TrainedModel:
    """Full-batch gradient training of the binary classifier."""
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    x = dataset.flat_images()
    y = dataset.labels.astype(np.float64)
    params = net.init_mlp(config.widths, config.seed)
    state = net.zero_state(params, step_size=config.step_size,
                           weight_decay=config.weight_decay)
    history = []
    for step in range(config.steps):
        logits, acts = net.forward(params, x)
        loss, dlogits = net.bce_loss(logits, y)
        if not math.isfinite(loss):
            raise DivergedLoss(f"loss became {loss} at step {step}")
        if step % config.eval_every == 0 or step == config.steps - 1:
            history.append({"step": step, "loss": loss,
                            "train_acc": net.accuracy(logits, dataset.labels)})
        grads = net.backward(params, acts, dlogits)
        net.update_params(params, grads, state)
    return TrainedModel(params=params, history=history, config=config,
                        dataset_id=dataset_id)


def make_spurious_free_subset(dataset: ColoredDataset, seed: int) -> np.ndarray:
    """Largest subset with equal counts in all four (y, z) groups.

    The three larger groups are downsampled uniformly at random to the
    smallest group's size, so color and label are independent by
    construction (empirical conflict rate exactly 0.5).
    """
    y = dataset.labels
    z = dataset.color_ids
    groups = [np.flatnonzero((y == a) & (z == b)) for a in (0, 1) for b in (0, 1)]
    sizes = [len(g) for g in groups]
    if min(sizes) == 0:
        raise EmptyGroup(f"(y,z) group sizes {sizes}")
    m = min(sizes)
    gen = rng.stream(seed, "spurious_free")
    picked = [g if len(g) == m else gen.choice(g, size=m, replace=False) for g in groups]
    return np.sort(np.concatenate(picked))
