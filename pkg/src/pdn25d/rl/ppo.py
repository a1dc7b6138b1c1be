"""PPO with reward-to-go returns and advantage = return - value."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import NumericFaultError
from .policy import PolicyValueNet, masked_log_probs


@dataclass(frozen=True)
class PpoConfig:
    clip: float = 0.2
    discount: float = 0.99
    lr: float = 3e-4
    epochs: int = 4
    rollout: int = 512
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_steps: int = 50
    conv_channels: tuple[int, ...] = (16, 32)
    kernel: int = 3
    hidden: int = 256
    minibatch: int | None = None
    normalize_advantage: bool = False
    optimizer: str = "adam"
    dtype: str = "float32"
    max_grad_norm: float | None = None

    def __post_init__(self):
        if not self.clip > 0:
            raise ValueError("clip ratio must be > 0")
        if math.isfinite(self.clip) and not self.clip < 1:
            raise ValueError("clip ratio must lie in (0, 1) (inf disables clipping)")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if min(self.epochs, self.rollout, self.max_steps, self.hidden, self.kernel) < 1:
            raise ValueError("counts must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError("optimizer must be 'adam' or 'sgd'")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be 'float32' or 'float64'")

    @property
    def torch_dtype(self) -> torch.dtype:
        return torch.float64 if self.dtype == "float64" else torch.float32


@dataclass
class Batch:
    states: torch.Tensor  # (N, C, H, W)
    actions: torch.Tensor  # (N, n_slots) category indices
    old_logp: torch.Tensor  # (N,)
    returns: torch.Tensor  # (N,)
    mask: torch.Tensor  # (n_slots,) bool
    advantages: torch.Tensor | None = None

    def __len__(self) -> int:
        return len(self.returns)


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logps: list = field(default_factory=list)
    rewards: list = field(default_factory=list)


def discounted_returns(rewards, discount: float) -> np.ndarray:
    """Reward-to-go for one episode."""
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + discount * acc
        out[t] = acc
    return out


def make_batch(trajectories, mask, discount: float, dtype=torch.float32) -> Batch:
    states = np.concatenate([np.stack(tr.states) for tr in trajectories])
    actions = np.concatenate([np.stack(tr.actions) for tr in trajectories])
    logps = np.concatenate([np.asarray(tr.logps, dtype=float) for tr in trajectories])
    rets = np.concatenate([discounted_returns(tr.rewards, discount) for tr in trajectories])
    return Batch(
        torch.as_tensor(states, dtype=dtype),
        torch.as_tensor(actions, dtype=torch.long),
        torch.as_tensor(logps, dtype=dtype),
        torch.as_tensor(rets, dtype=dtype),
        torch.as_tensor(np.asarray(mask), dtype=torch.bool),
    )


def evaluate_actions(net: PolicyValueNet, states, actions, mask):
    """(joint log-prob, entropy, value) per sample."""
    logits, values = net(states)
    logp_all = masked_log_probs(logits, mask)
    logp = logp_all.gather(-1, actions[..., None]).squeeze(-1).sum(-1)
    entropy = -(logp_all.exp() * logp_all).sum(-1).sum(-1)
    return logp, entropy, values


def clipped_surrogate(ratio: torch.Tensor, adv: torch.Tensor, clip: float) -> torch.Tensor:
    """Per-sample min(r A, clip(r, 1-eps, 1+eps) A)."""
    if math.isinf(clip):
        return ratio * adv
    return torch.minimum(ratio * adv, torch.clamp(ratio, 1 - clip, 1 + clip) * adv)


def ppo_loss(net: PolicyValueNet, batch: Batch, advantages: torch.Tensor, cfg: PpoConfig):
    """Total loss and its parts: -surrogate + c_v * value MSE - c_e * entropy."""
    logp, entropy, values = evaluate_actions(net, batch.states, batch.actions, batch.mask)
    ratio = torch.exp(logp - batch.old_logp)
    surrogate = clipped_surrogate(ratio, advantages, cfg.clip).mean()
    value_loss = ((batch.returns - values) ** 2).mean()
    ent = entropy.mean()
    total = -surrogate + cfg.value_coef * value_loss - cfg.entropy_coef * ent
    parts = {"surrogate": surrogate, "value_loss": value_loss, "entropy": ent, "ratio": ratio}
    return total, parts


def compute_advantages(net: PolicyValueNet, batch: Batch, cfg: PpoConfig) -> torch.Tensor:
    with torch.no_grad():
        _, values = net(batch.states)
    adv = batch.returns - values
    if cfg.normalize_advantage and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    return adv


def make_optimizer(net: PolicyValueNet, cfg: PpoConfig) -> torch.optim.Optimizer:
    if cfg.optimizer == "sgd":
        return torch.optim.SGD(net.parameters(), lr=cfg.lr)
    return torch.optim.Adam(net.parameters(), lr=cfg.lr)


def ppo_update(net: PolicyValueNet, optimizer, batch: Batch, cfg: PpoConfig,
               generator: torch.Generator | None = None) -> dict:
    """Run ``cfg.epochs`` passes over the batch; returns loss diagnostics of the last pass."""
    adv = batch.advantages if batch.advantages is not None else compute_advantages(net, batch, cfg)
    n = len(batch)
    mb = cfg.minibatch or n
    diag = {}
    for _ in range(cfg.epochs):
        order = torch.randperm(n, generator=generator) if mb < n else torch.arange(n)
        for start in range(0, n, mb):
            idx = order[start : start + mb]
            sub = Batch(batch.states[idx], batch.actions[idx], batch.old_logp[idx],
                        batch.returns[idx], batch.mask)
            total, parts = ppo_loss(net, sub, adv[idx], cfg)
            if not torch.isfinite(total):
                raise NumericFaultError(
                    "non-finite PPO loss "
                    f"(returns mean {float(sub.returns.mean()):.4g}, std {float(sub.returns.std()):.4g}, "
                    f"advantage mean {float(adv[idx].mean()):.4g}, max ratio {float(parts['ratio'].detach().max()):.4g})"
                )
            optimizer.zero_grad()
            total.backward()
            if cfg.max_grad_norm:
                torch.nn.utils.clip_grad_norm_(net.parameters(), cfg.max_grad_norm)
            optimizer.step()
            ratio = parts["ratio"].detach()
            diag = {
                "loss": float(total.detach()),
                "surrogate": float(parts["surrogate"].detach()),
                "value_loss": float(parts["value_loss"].detach()),
                "entropy": float(parts["entropy"].detach()),
                "clip_fraction": float(((ratio - 1).abs() > cfg.clip).double().mean()),
            }
    return diag
