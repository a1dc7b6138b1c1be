"""Shared-trunk convolutional policy/value network with factorized ternary heads."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..errors import NumericFaultError

MASK_LOGIT = -1e9  # exp() underflows to exactly 0 in both float32 and float64


class PolicyValueNet(nn.Module):
    def __init__(self, in_channels: int, canvas: tuple[int, int], n_slots: int,
                 conv_channels=(16, 32), kernel: int = 3, hidden: int = 256):
        super().__init__()
        layers = []
        c_in = in_channels
        for c_out in conv_channels:
            layers += [nn.Conv2d(c_in, c_out, kernel, padding=kernel // 2), nn.ReLU()]
            c_in = c_out
        self.trunk = nn.Sequential(*layers, nn.Flatten(),
                                   nn.Linear(c_in * canvas[0] * canvas[1], hidden), nn.ReLU())
        self.policy_head = nn.Linear(hidden, 3 * n_slots)
        self.value_head = nn.Linear(hidden, 1)
        self.n_slots = n_slots

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Raw logits (B, n_slots, 3) and values (B,)."""
        h = self.trunk(x)
        return self.policy_head(h).view(-1, self.n_slots, 3), self.value_head(h).squeeze(-1)

    def zero_(self) -> PolicyValueNet:
        with torch.no_grad():
            for p in self.parameters():
                p.zero_()
        return self


def masked_log_probs(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Log-probabilities per slot; masked slots put all mass on the no-op action."""
    forced = torch.full_like(logits, MASK_LOGIT)
    forced[..., 1] = 0.0
    return torch.log_softmax(torch.where(mask[..., None], logits, forced), dim=-1)


def _check_finite(*tensors) -> None:
    for t in tensors:
        if not torch.isfinite(t).all():
            raise NumericFaultError("non-finite activations in policy/value network")


def _batch(state, net) -> torch.Tensor:
    dtype = next(net.parameters()).dtype
    x = torch.as_tensor(np.asarray(state), dtype=dtype)
    if not torch.isfinite(x).all():
        raise NumericFaultError("non-finite state matrix")
    return x[None] if x.ndim == 3 else x


@torch.no_grad()
def policy_forward(state, net: PolicyValueNet, mask) -> np.ndarray:
    """Per-slot probabilities over (-1, 0, +1); shape (n_slots, 3) or (B, n_slots, 3)."""
    x = _batch(state, net)
    logits, _ = net(x)
    _check_finite(logits)
    probs = masked_log_probs(logits, torch.as_tensor(np.asarray(mask), dtype=torch.bool)).exp()
    out = probs.numpy()
    return out[0] if np.asarray(state).ndim == 3 else out


@torch.no_grad()
def value_forward(state, net: PolicyValueNet):
    x = _batch(state, net)
    _, v = net(x)
    _check_finite(v)
    return float(v[0]) if np.asarray(state).ndim == 3 else v.numpy()


def sample_action(net: PolicyValueNet, state, mask, generator: torch.Generator):
    """(category indices per slot, joint log-probability, value)."""
    with torch.no_grad():
        x = _batch(state, net)
        logits, value = net(x)
        _check_finite(logits, value)
        logp = masked_log_probs(logits[0], torch.as_tensor(mask, dtype=torch.bool))
        choice = torch.multinomial(logp.exp(), 1, generator=generator).squeeze(-1)
        joint = logp.gather(-1, choice[:, None]).sum()
    return choice.numpy().astype(np.int64), float(joint), float(value[0])
