"""Invariance-penalty training over multiple environments.

Per environment the objective adds lambda * g^2 to the mean BCE risk, where
g is the exact derivative of that risk with respect to a scalar multiplier
on the logits, evaluated at multiplier 1.  Both the risk and the penalty
are differentiated analytically and fed through the network backward pass
as a single logit cotangent.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import net
from .colored import ColoredDataset
from .erm import TrainedModel
from .errors import DivergedLoss, ShapeMismatch, TooFewEnvironments


@dataclass(frozen=True)
class IrmConfig:
    steps: int = 501
    step_size: float = 1e-3
    weight_decay: float = 1.1e-3
    seed: int = 0
    eval_every: int = 50
    widths: tuple = (392, 390, 390, 1)
    warmup: int = 100
    lambda_final: float = 1e4

    def __post_init__(self):
        if self.warmup < 0 or self.lambda_final < 1:
            raise ValueError("warmup must be >= 0 and lambda_final >= 1")


@dataclass
class EnvBatchView:
    x: np.ndarray   # (B, d) float64
    y: np.ndarray   # (B,) float64
    labels: np.ndarray  # (B,) uint8, for accuracy


def env_view(dataset: ColoredDataset) -> EnvBatchView:
    return EnvBatchView(x=dataset.flat_images(),
                        y=dataset.labels.astype(np.float64),
                        labels=dataset.labels)


def irm_penalty(logits: np.ndarray, labels: np.ndarray):
    """Squared risk-gradient w.r.t. the unit logit multiplier.

    Returns (penalty, cotangent); the cotangent is the exact derivative of
    the penalty w.r.t. each logit, ready for the network backward pass.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise ShapeMismatch(f"{z.shape} vs {y.shape}")
    b = z.size
    s = net.sigmoid(z)
    g = float((z * (s - y)).mean())
    cotangent = (2.0 * g / b) * ((s - y) + z * s * (1.0 - s))
    return g * g, cotangent


def train_irm(envs, config: IrmConfig, dataset_id: str = "") -> TrainedModel:
    """Train on >= 2 environments with penalty-weight annealing.

    lambda is 1 before `warmup` steps and `lambda_final` after; when it
    exceeds 1 the whole objective is rescaled by 1/lambda so the effective
    step size stays comparable across the anneal.
    """
    if len(envs) < 2:
        raise TooFewEnvironments(f"need >= 2 environments, got {len(envs)}")
    views = [e if isinstance(e, EnvBatchView) else env_view(e) for e in envs]
    params = net.init_mlp(config.widths, config.seed)
    state = net.zero_state(params, step_size=config.step_size,
                           weight_decay=config.weight_decay)
    history = []
    for step in range(config.steps):
        lam = 1.0 if step < config.warmup else config.lambda_final
        scale = 1.0 / lam if lam > 1.0 else 1.0
        total = None
        record = step % config.eval_every == 0 or step == config.steps - 1
        for env_id, view in enumerate(views):
            logits, acts = net.forward(params, view.x)
            risk, dlogits = net.bce_loss(logits, view.y)
            if not math.isfinite(risk):
                raise DivergedLoss(f"risk became {risk} at step {step}, env {env_id}")
            penalty, cot = irm_penalty(logits, view.y)
            grads = net.backward(params, acts, (dlogits + lam * cot) * scale)
            if total is None:
                total = grads
            else:
                for k in range(params.n_layers):
                    total.weights[k] += grads.weights[k]
                    total.biases[k] += grads.biases[k]
            if record:
                history.append({"step": step, "env_id": env_id, "risk": risk,
                                "penalty": penalty, "lambda": lam,
                                "train_acc": net.accuracy(logits, view.labels)})
        net.update_params(params, total, state)
    return TrainedModel(params=params, history=history, config=config,
                        dataset_id=dataset_id)
