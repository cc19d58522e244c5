import os
import sys
from typing import Iterable, Optional, Tuple

import torch
import pytorch_lightning as pl
from pytorch_lightning.loggers import CSVLogger, WandbLogger
from tqdm import tqdm

from models.configurations import CHECKPOINT_VERSION
from models.network import PolicyHeuristicNet
from utils.exceptions import ConfigError, ShapeMismatchError


def progress_bar(iterable: Iterable, desc: str, total: Optional[int] = None, disable: bool = False):
    return tqdm(
        iterable,
        desc=desc,
        total=total,
        disable=disable,
        leave=True,
        dynamic_ncols=True,
        file=sys.stdout,
        smoothing=0,
    )


def save_checkpoint(
    path: str,
    model: PolicyHeuristicNet,
    domain: str,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    state_dict = model.state_dict()
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "domain": domain,
            "hyper_parameters": dict(model.hparams),
            "shapes": {name: tuple(t.shape) for name, t in state_dict.items()},
            "state_dict": state_dict,
            "optimizer_state": optimizer.state_dict() if optimizer is not None else None,
            "pytorch-lightning_version": pl.__version__,
        },
        path,
    )


def load_checkpoint(
    path: str, domain: Optional[str] = None
) -> Tuple[PolicyHeuristicNet, Optional[dict]]:
    """The model and the saved optimizer state (None if none was saved)."""
    if not os.path.isfile(path):
        raise ConfigError(f"Checkpoint {path} does not exist")
    checkpoint = torch.load(path, map_location="cpu")
    if checkpoint.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(
            f"Checkpoint version {checkpoint.get('version')} is not supported (expected {CHECKPOINT_VERSION})"
        )
    if domain is not None and checkpoint["domain"] != domain:
        raise ConfigError(f"Checkpoint was trained on {checkpoint['domain']}, not {domain}")
    model = PolicyHeuristicNet(**checkpoint["hyper_parameters"])
    expected = {name: tuple(t.shape) for name, t in model.state_dict().items()}
    if expected != {name: tuple(s) for name, s in checkpoint["shapes"].items()}:
        raise ShapeMismatchError(f"Checkpoint {path} does not match the architecture it names")
    first = next(iter(checkpoint["state_dict"].values()))
    model = model.to(first.dtype)
    model.load_state_dict(checkpoint["state_dict"])
    return model, checkpoint["optimizer_state"]


def build_optimizer(model: PolicyHeuristicNet, state: Optional[dict] = None) -> torch.optim.Optimizer:
    optimizer = model.configure_optimizers()
    if state is not None:
        optimizer.load_state_dict(state)
    return optimizer


def load_guiding_model(path: Optional[str], domain: str) -> Optional[PolicyHeuristicNet]:
    if path is None:
        return None
    model, _ = load_checkpoint(path, domain)
    model.eval()
    return model


def build_metrics_logger(args, name: str):
    """CSVLogger under `--out`, or WandbLogger with `--wandb` (credentials
    come from the environment)."""
    if getattr(args, "wandb", False):
        metrics_logger = WandbLogger(
            project=args.project_name or f"phs_{args.domain}",
            name=name,
            save_dir=args.out,
            job_type="train",
        )
    else:
        metrics_logger = CSVLogger(args.out, name=name)
    metrics_logger.log_hyperparams({k: v for k, v in vars(args).items() if v is not None})
    return metrics_logger
