"""Seeded PPO training loop shared by both phases."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import torch

from ..floorplan import DecapLayout
from .policy import PolicyValueNet, sample_action
from .ppo import PpoConfig, Trajectory, make_batch, make_optimizer, ppo_update


@dataclass
class EpisodeRecord:
    episode: int
    reward: float  # reward of the episode's final step
    c_mos: float
    c_mim: float
    wall_s: float
    best: float  # best step reward seen so far


@dataclass
class TrainResult:
    best_layout: DecapLayout
    best_reward: float
    best_info: dict
    episodes: list[EpisodeRecord] = field(default_factory=list)
    updates: list[dict] = field(default_factory=list)
    steps: int = 0
    net: PolicyValueNet | None = None

    @property
    def best_history(self) -> list[float]:
        return [e.best for e in self.episodes]


def build_net(env, cfg: PpoConfig) -> PolicyValueNet:
    net = PolicyValueNet(env.n_channels, env.fp.interposer_dims, env.slots.n_slots,
                         cfg.conv_channels, cfg.kernel, cfg.hidden)
    return net.to(cfg.torch_dtype)


def train(env, cfg: PpoConfig, seed: int, budget: int,
          on_improve: Callable[[DecapLayout, float, int], None] | None = None) -> TrainResult:
    """Run PPO until ``budget`` environment steps (reward evaluations) are spent.

    ``on_improve(layout, reward, episode)`` fires whenever the best step
    reward improves.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed)
    net = build_net(env, cfg)
    opt = make_optimizer(net, cfg)
    mask = env.slots.mask
    t0 = time.perf_counter()
    result = TrainResult(env.start.copy(), -np.inf, {}, net=net)
    state = {"steps": 0}

    def run_episode() -> Trajectory:
        obs = env.reset()
        tr = Trajectory()
        episode = len(result.episodes)
        while state["steps"] < budget:
            choice, logp, _ = sample_action(net, obs, mask, gen)
            res = env.step(env.slots.to_action_vector(choice))
            state["steps"] += 1
            tr.states.append(obs)
            tr.actions.append(choice)
            tr.logps.append(logp)
            tr.rewards.append(res.reward)
            if res.reward > result.best_reward:
                result.best_reward = res.reward
                result.best_layout = res.layout.copy()
                result.best_info = dict(res.info, episode=episode, step=state["steps"])
                if on_improve is not None:
                    on_improve(result.best_layout, res.reward, episode)
            obs = res.state
            if res.done:
                break
        result.episodes.append(EpisodeRecord(
            episode, tr.rewards[-1], env.layout.total_mos(), env.layout.total_mim(),
            time.perf_counter() - t0, result.best_reward,
        ))
        return tr

    while state["steps"] < budget:
        trajectories = []
        collected = 0
        while collected < cfg.rollout and state["steps"] < budget:
            tr = run_episode()
            trajectories.append(tr)
            collected += len(tr.rewards)
        batch = make_batch(trajectories, mask, cfg.discount, cfg.torch_dtype)
        result.updates.append(ppo_update(net, opt, batch, cfg, gen))

    result.best_reward = float(result.best_reward)
    result.steps = state["steps"]
    return result


def checkpoint_tensors(net: PolicyValueNet) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().double().numpy() for k, v in net.state_dict().items()}
