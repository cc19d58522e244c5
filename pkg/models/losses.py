"""Training losses on solved trajectories and their parameter gradients.

Gradients are obtained with autograd; the `grad_*` helpers return one
tensor per named parameter (zeros where a loss does not reach a parameter,
e.g. the heuristic head under the Levin loss).
"""
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from utils.exceptions import ConfigError, ShapeMismatchError


@dataclass
class TrainSample:
    """States along a solution path, root first and solution last."""

    features: np.ndarray  # (T+1, H, W, C)
    actions: np.ndarray  # (T,)
    search_loss: float
    # legal actions per state, (T+1, A)
    masks: Optional[np.ndarray] = None

    def __post_init__(self):
        self.actions = np.asarray(self.actions, dtype=np.int64)
        if len(self.features) != len(self.actions) + 1:
            raise ShapeMismatchError(
                f"{len(self.features)} states for {len(self.actions)} actions; expected one more state"
            )

    @property
    def length(self) -> int:
        return len(self.actions)

    @property
    def remaining(self) -> np.ndarray:
        """d(n*) − d(n) for every state on the path."""
        return np.arange(self.length, -1, -1, dtype=np.float64)


def masked_log_softmax(logits: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """log-softmax renormalized over the legal actions; illegal ones get −inf."""
    if mask is None:
        return F.log_softmax(logits, dim=-1)
    return F.log_softmax(logits.masked_fill(~mask.bool(), float("-inf")), dim=-1)


def levin_loss_from_log_probs(
    log_probs: torch.Tensor, actions: torch.Tensor, search_loss: float
) -> torch.Tensor:
    """L · (−Σ_t log π(a_t | s_t))."""
    chosen = log_probs.gather(-1, actions.long().unsqueeze(-1)).squeeze(-1)
    return -float(search_loss) * chosen.sum()


def cross_entropy_from_log_probs(log_probs: torch.Tensor, actions: torch.Tensor) -> torch.Tensor:
    return levin_loss_from_log_probs(log_probs, actions, 1.0)


def mse_from_values(values: torch.Tensor, targets: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    squared = (targets.to(values.dtype) - values) ** 2
    if reduction == "mean":
        return squared.mean()
    if reduction == "sum":
        return squared.sum()
    raise ConfigError(f"MSE reduction {reduction} not available. Choose from ['mean', 'sum']")


def sample_outputs(model, sample: TrainSample) -> Tuple[torch.Tensor, torch.Tensor]:
    """Policy log-probabilities at the T decision states and raw heuristic
    values at all T+1 states."""
    parameter = next(model.parameters())
    features = torch.as_tensor(sample.features, dtype=parameter.dtype, device=parameter.device)
    mask = None
    if sample.masks is not None:
        mask = torch.as_tensor(sample.masks, dtype=torch.bool, device=parameter.device)
    log_probs, h = model(features, mask)
    return log_probs[: sample.length], h


def _actions(sample: TrainSample, device) -> torch.Tensor:
    return torch.as_tensor(sample.actions, dtype=torch.long, device=device)


def levin_loss(model, samples: Sequence[TrainSample]) -> torch.Tensor:
    total = 0.0
    for sample in samples:
        log_probs, _ = sample_outputs(model, sample)
        total = total + levin_loss_from_log_probs(
            log_probs, _actions(sample, log_probs.device), sample.search_loss
        )
    return total


def cross_entropy_loss(model, samples: Sequence[TrainSample]) -> torch.Tensor:
    total = 0.0
    for sample in samples:
        log_probs, _ = sample_outputs(model, sample)
        total = total + cross_entropy_from_log_probs(log_probs, _actions(sample, log_probs.device))
    return total


def mse_loss(model, samples: Sequence[TrainSample], reduction: str = "mean") -> torch.Tensor:
    """Per-trajectory MSE of the heuristic against the remaining distance,
    summed over trajectories."""
    total = 0.0
    for sample in samples:
        _, h = sample_outputs(model, sample)
        targets = torch.as_tensor(sample.remaining, device=h.device)
        total = total + mse_from_values(h, targets, reduction)
    return total


def training_loss(
    model, samples: Sequence[TrainSample], losses: Iterable[str], mse_reduction: str = "mean"
) -> torch.Tensor:
    total = 0.0
    for name in losses:
        if name == "levin":
            total = total + levin_loss(model, samples)
        elif name == "cross_entropy":
            total = total + cross_entropy_loss(model, samples)
        elif name == "mse":
            total = total + mse_loss(model, samples, mse_reduction)
        else:
            raise ConfigError(f"Loss {name} not available. Choose from ['levin', 'cross_entropy', 'mse']")
    return total


def gradients(model, loss) -> Dict[str, torch.Tensor]:
    named = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    if not torch.is_tensor(loss) or not loss.requires_grad:
        return {name: torch.zeros_like(p) for name, p in named}
    grads = torch.autograd.grad(loss, [p for _, p in named], allow_unused=True)
    return {
        name: torch.zeros_like(p) if g is None else g
        for (name, p), g in zip(named, grads)
    }


def grad_levin_loss(model, samples: Sequence[TrainSample]) -> Dict[str, torch.Tensor]:
    return gradients(model, levin_loss(model, samples))


def grad_mse_heuristic(model, samples: Sequence[TrainSample], reduction: str = "mean") -> Dict[str, torch.Tensor]:
    return gradients(model, mse_loss(model, samples, reduction))


def grad_cross_entropy_policy(model, samples: Sequence[TrainSample]) -> Dict[str, torch.Tensor]:
    return gradients(model, cross_entropy_loss(model, samples))


def adam_update(model, optimizer: torch.optim.Optimizer, grads: Dict[str, torch.Tensor]) -> None:
    """One optimizer step with the given gradients; weight decay in the
    optimizer adds l2·θ to each of them."""
    for name, p in model.named_parameters():
        if name not in grads:
            p.grad = None
            continue
        if grads[name].shape != p.shape:
            raise ShapeMismatchError(
                f"Gradient for {name} has shape {tuple(grads[name].shape)}, parameter has {tuple(p.shape)}"
            )
        p.grad = grads[name].detach().clone().to(p.dtype)
    optimizer.step()
