from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn

from pytorch_lightning import LightningModule

from models.configurations import ARCHITECTURES, OPTIMIZER
from models.losses import TrainSample, masked_log_softmax, training_loss
from utils.exceptions import ConfigError, ShapeMismatchError


class PolicyHeuristicNet(LightningModule):
    """Shared trunk with a policy head (log-softmax over actions) and a
    heuristic head (one raw value, clipped at 0 only when used by a search).

    Inputs are (batch, H, W, C) one-hot feature tensors.
    """

    def __init__(
        self,
        feature_shape: Sequence[int],
        num_actions: int = 4,
        architecture: str = "conv",
        losses: Sequence[str] = ("levin", "mse"),
        mse_reduction: str = "mean",
        lr: float = OPTIMIZER["lr"],
        weight_decay: float = OPTIMIZER["weight_decay"],
        **architecture_kwargs,
    ):
        super().__init__()
        if architecture not in ARCHITECTURES:
            raise ConfigError(
                f"Architecture {architecture} not available. "
                f"Choose from {list(ARCHITECTURES.keys())}"
            )
        if mse_reduction not in ("mean", "sum"):
            raise ConfigError(f"MSE reduction {mse_reduction} not available. Choose from ['mean', 'sum']")
        config = {**ARCHITECTURES[architecture], **architecture_kwargs}
        self.save_hyperparameters(
            {
                "feature_shape": tuple(int(d) for d in feature_shape),
                "num_actions": num_actions,
                "architecture": architecture,
                "losses": tuple(losses),
                "mse_reduction": mse_reduction,
                "lr": lr,
                "weight_decay": weight_decay,
                **config,
            }
        )
        self.feature_shape = tuple(int(d) for d in feature_shape)
        height, width, channels = self.feature_shape

        if architecture == "conv":
            k, filters = config["kernel_size"], config["filters"]
            out_h, out_w = height - 2 * (k - 1), width - 2 * (k - 1)
            if out_h < 1 or out_w < 1:
                raise ConfigError(f"Input {self.feature_shape} is too small for two {k}x{k} convolutions")
            self.trunk = nn.Sequential(
                nn.Conv2d(channels, filters, k),
                nn.ReLU(),
                nn.Conv2d(filters, filters, k),
                nn.ReLU(),
                nn.Flatten(),
            )
            trunk_dim = filters * out_h * out_w
        else:
            trunk_dim = config["trunk_dim"]
            self.trunk = nn.Sequential(
                nn.Flatten(),
                nn.Linear(height * width * channels, trunk_dim),
                nn.ReLU(),
            )

        hidden = config["hidden_dim"]
        self.policy_head = nn.Sequential(
            nn.Linear(trunk_dim, hidden), nn.ReLU(), nn.Linear(hidden, num_actions)
        )
        self.heuristic_head = nn.Sequential(
            nn.Linear(trunk_dim, hidden), nn.ReLU(), nn.Linear(hidden, 1)
        )

    def forward(
        self, features: torch.Tensor, mask: Optional[torch.Tensor] = None
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        if features.dim() != 4 or tuple(features.shape[1:]) != self.feature_shape:
            raise ShapeMismatchError(
                f"Expected features of shape (batch, {', '.join(map(str, self.feature_shape))}), "
                f"got {tuple(features.shape)}"
            )
        x = features
        if self.hparams.architecture == "conv":
            x = x.permute(0, 3, 1, 2)
        embedding = self.trunk(x)
        logits = self.policy_head(embedding)
        log_probs = masked_log_softmax(logits, mask)
        h = self.heuristic_head(embedding).squeeze(-1)
        return log_probs, h

    def predict(self, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Log-probabilities and raw heuristic values as numpy arrays."""
        parameter = next(self.parameters())
        batch = torch.as_tensor(np.asarray(features), dtype=parameter.dtype, device=parameter.device)
        was_training = self.training
        self.eval()
        with torch.no_grad():
            log_probs, h = self(batch)
        self.train(was_training)
        return log_probs.cpu().numpy(), h.cpu().numpy()

    def training_step(self, batch: List[TrainSample], batch_idx: int = 0) -> torch.Tensor:
        return training_loss(self, batch, self.hparams.losses, self.hparams.mse_reduction)

    def configure_optimizers(self):
        return torch.optim.Adam(
            self.parameters(), lr=self.hparams.lr, weight_decay=self.hparams.weight_decay
        )
