from __future__ import annotations

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from pdn25d.errors import NumericFaultError
from pdn25d.floorplan import DecapLayout, Floorplan
from pdn25d.rl.policy import PolicyValueNet, masked_log_probs, policy_forward, sample_action, value_forward
from pdn25d.rl.ppo import (
    Batch,
    PpoConfig,
    Trajectory,
    clipped_surrogate,
    discounted_returns,
    evaluate_actions,
    make_batch,
    make_optimizer,
    ppo_loss,
    ppo_update,
)
from pdn25d.rl.state import SlotMap, apply_action, encode_freq_state, encode_time_state

from conftest import two_chip_floorplan

# ---------------------------------------------------------------- state encoding


def test_freq_state_encoding(two_fp):
    lay = DecapLayout.empty(two_fp)
    s = encode_freq_state(two_fp, lay)
    assert s.shape == (4, 3, 4)
    assert not s[2:].any()
    assert s[1, 1, 2:].tolist() == [1, 1] and s[1, 2, 0] == 0
    assert s[1, 1, 0] == 0  # chiplet "a" infeasible UDC
    lay.mim[0, 1] = 10
    lay.mos["b"][1, 0] = 5
    s = encode_freq_state(two_fp, lay)
    assert s[2].sum() == 1.0 and s[2, 0, 1] == 1.0
    assert s[3, 2, 2] == 0.5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_state_entries_in_unit_range_and_masked(seed):
    from conftest import random_layout

    fp = two_chip_floorplan()
    s = encode_freq_state(fp, random_layout(fp, np.random.default_rng(seed)))
    assert ((s >= 0) & (s <= 1)).all()
    assert not s[2][s[0] == 0].any()
    assert not s[3][s[1] == 0].any()


def test_time_state_normalization(toy_fp):
    grid = np.array([[0.0, 2e-12], [1e-12, 4e-12]])
    s = encode_time_state(toy_fp, DecapLayout.empty(toy_fp), grid, 4e-12)
    assert s.shape == (5, 2, 2)
    assert s[4].max() == 1.0 and s[4].min() == 0.0


# ---------------------------------------------------------------- actions


def test_slot_map_and_actions(two_fp):
    slots = SlotMap.build(two_fp)
    assert slots.n_slots == 12 + 4 + 4 and slots.n_active == 18
    time_slots = SlotMap.build(two_fp, include_mim=False)
    assert time_slots.n_active == 7
    choice = np.full(slots.n_slots, 2)
    act = slots.to_action_vector(choice)
    assert act.tolist() == [1] * 18
    lay = apply_action(two_fp, DecapLayout.empty(two_fp), act)
    assert (lay.to_vector(two_fp) == 1).all()
    assert lay.mim[2, 3] == 0
    sat = DecapLayout.saturated(two_fp)
    assert apply_action(two_fp, sat, act) == sat
    assert apply_action(two_fp, DecapLayout.empty(two_fp), -act) == DecapLayout.empty(two_fp)
    with pytest.raises(ValueError):
        apply_action(two_fp, sat, act[:-1])
    with pytest.raises(ValueError):
        apply_action(two_fp, sat, act * 2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 9), min_size=18, max_size=18), st.lists(st.sampled_from([-1, 0, 1]), min_size=18, max_size=18))
def test_action_inverse_on_interior_levels(levels, action):
    fp = two_chip_floorplan()
    lay = DecapLayout.empty(fp).with_vector(fp, np.array(levels))
    act = np.array(action)
    assert apply_action(fp, apply_action(fp, lay, act), -act) == lay


# ---------------------------------------------------------------- network


def tiny_setup(seed=0, dtype=torch.float64):
    """2-UDC toy: one 1x2 interposer, no chiplets."""
    fp = Floorplan((1, 2), [], None, [(0, 0)], [])
    slots = SlotMap.build(fp)
    torch.manual_seed(seed)
    net = PolicyValueNet(4, (1, 2), slots.n_slots, (3,), 3, 5).to(dtype)
    return fp, slots, net


def test_zero_network_is_uniform_and_zero_valued(two_fp):
    slots = SlotMap.build(two_fp)
    net = PolicyValueNet(4, (3, 4), slots.n_slots).zero_()
    s = encode_freq_state(two_fp, DecapLayout.empty(two_fp))
    p = policy_forward(s, net, slots.mask)
    assert np.allclose(p[slots.mask], 1 / 3, rtol=0, atol=1e-7)
    assert (p[~slots.mask] == [0.0, 1.0, 0.0]).all()
    assert value_forward(s, net) == 0.0


def test_probabilities_normalized_and_batched(two_fp):
    from conftest import random_layout

    slots = SlotMap.build(two_fp)
    torch.manual_seed(1)
    net = PolicyValueNet(4, (3, 4), slots.n_slots, hidden=32).double()
    rng = np.random.default_rng(0)
    states = np.stack([encode_freq_state(two_fp, random_layout(two_fp, rng)) for _ in range(5)])
    batch = policy_forward(states, net, slots.mask)
    assert np.allclose(batch.sum(-1), 1.0, atol=1e-12)
    for k in range(5):
        assert np.allclose(batch[k], policy_forward(states[k], net, slots.mask), atol=1e-14)
        assert value_forward(states[k], net) == pytest.approx(value_forward(states, net)[k], abs=1e-14)


def test_sampled_logp_is_sum_of_slot_logps(two_fp):
    slots = SlotMap.build(two_fp)
    torch.manual_seed(2)
    net = PolicyValueNet(4, (3, 4), slots.n_slots, hidden=16).double()
    s = encode_freq_state(two_fp, DecapLayout.empty(two_fp))
    gen = torch.Generator().manual_seed(0)
    for _ in range(5):
        choice, logp, _ = sample_action(net, s, slots.mask, gen)
        p = policy_forward(s, net, slots.mask)
        assert logp == pytest.approx(float(np.log(p[np.arange(len(choice)), choice]).sum()), abs=1e-10)
        assert (choice[~slots.mask] == 1).all()


def test_non_finite_state_raises(two_fp):
    slots = SlotMap.build(two_fp)
    net = PolicyValueNet(4, (3, 4), slots.n_slots)
    s = encode_freq_state(two_fp, DecapLayout.empty(two_fp))
    s[0, 0, 0] = np.nan
    with pytest.raises(NumericFaultError):
        policy_forward(s, net, slots.mask)
    with pytest.raises(NumericFaultError):
        value_forward(s, net)


# ---------------------------------------------------------------- PPO objective


def test_ratio_one_surrogate_equals_advantage():
    adv = torch.tensor([0.5, -1.0, 2.0], dtype=torch.float64)
    assert torch.equal(clipped_surrogate(torch.ones(3, dtype=torch.float64), adv, 0.2), adv)


def test_clip_boundaries():
    eps = 0.2
    a = torch.tensor([1.0, -1.0], dtype=torch.float64)
    out = clipped_surrogate(torch.tensor([1 + 2 * eps, 1 - 2 * eps], dtype=torch.float64), a, eps)
    assert out.tolist() == pytest.approx([(1 + eps) * 1.0, (1 - eps) * -1.0])
    # the pessimistic side is kept unclipped
    out = clipped_surrogate(torch.tensor([1 - 2 * eps, 1 + 2 * eps], dtype=torch.float64), a, eps)
    assert out.tolist() == pytest.approx([(1 - 2 * eps) * 1.0, (1 + 2 * eps) * -1.0])
    inf = clipped_surrogate(torch.tensor([5.0]), torch.tensor([1.0]), float("inf"))
    assert inf.item() == 5.0


def test_config_validation():
    for bad in (dict(clip=0.0), dict(clip=1.0), dict(discount=0.0), dict(epochs=0), dict(lr=0.0),
                dict(optimizer="rmsprop"), dict(dtype="float16")):
        with pytest.raises(ValueError):
            PpoConfig(**bad)
    PpoConfig(clip=float("inf"))


def test_discounted_returns():
    assert discounted_returns([1.0, 0.0, 2.0], 0.5).tolist() == [1.5, 1.0, 2.0]


def _toy_batch(fp, slots, net, n=6, seed=0, perturb=0.3):
    """Batch whose old log-probs come from a perturbed copy of ``net``."""
    rng = np.random.default_rng(seed)
    from conftest import random_layout

    states = np.stack([encode_freq_state(fp, random_layout(fp, rng)) for _ in range(n)])
    actions = rng.integers(0, 3, (n, slots.n_slots))
    old = PolicyValueNet(4, (1, 2), slots.n_slots, (3,), 3, 5).double()
    old.load_state_dict(net.state_dict())
    with torch.no_grad():
        for p in old.parameters():
            p.add_(perturb * torch.as_tensor(rng.standard_normal(p.shape)))
    x = torch.as_tensor(states)
    a = torch.as_tensor(actions)
    mask = torch.as_tensor(slots.mask)
    with torch.no_grad():
        old_logp, _, _ = evaluate_actions(old, x, a, mask)
    returns = torch.as_tensor(rng.standard_normal(n))
    adv = torch.as_tensor(rng.standard_normal(n))
    return Batch(x, a, old_logp, returns, mask), adv


def fd_gradient_error(seed: int = 0, h: float = 1e-6) -> float:
    """Max relative error of autograd vs central differences over all parameters."""
    fp, slots, net = tiny_setup(seed)
    batch, adv = _toy_batch(fp, slots, net, seed=seed)
    cfg = PpoConfig(clip=0.2, dtype="float64")
    net.zero_grad()
    loss, _ = ppo_loss(net, batch, adv, cfg)
    loss.backward()
    analytic = torch.cat([p.grad.flatten() for p in net.parameters()]).numpy()
    numeric = []
    with torch.no_grad():
        for p in net.parameters():
            flat = p.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + h
                up = ppo_loss(net, batch, adv, cfg)[0].item()
                flat[i] = orig - h
                down = ppo_loss(net, batch, adv, cfg)[0].item()
                flat[i] = orig
                numeric.append((up - down) / (2 * h))
    numeric = np.array(numeric)
    scale = np.maximum(np.abs(numeric), 1e-3 * np.abs(numeric).max())
    return float(np.max(np.abs(analytic - numeric) / scale))


def test_loss_gradient_matches_finite_differences():
    assert fd_gradient_error() <= 1e-4


def test_zero_advantage_leaves_policy_unchanged():
    fp, slots, net = tiny_setup(3)
    batch, _ = _toy_batch(fp, slots, net, seed=3)
    batch.advantages = torch.zeros(len(batch), dtype=torch.float64)
    cfg = PpoConfig(dtype="float64", entropy_coef=0.0, value_coef=0.5, optimizer="sgd", lr=0.1, epochs=2)
    before = {k: v.clone() for k, v in net.state_dict().items()}
    ppo_update(net, make_optimizer(net, cfg), batch, cfg)
    after = net.state_dict()
    assert torch.equal(before["policy_head.weight"], after["policy_head.weight"])
    assert torch.equal(before["policy_head.bias"], after["policy_head.bias"])
    assert not torch.equal(before["value_head.bias"], after["value_head.bias"])


def pg_equivalence_error(seed: int = 4) -> float:
    """Unclipped single-epoch PPO step vs a hand-written policy-gradient step."""
    fp, slots, net = tiny_setup(seed)
    batch, adv = _toy_batch(fp, slots, net, seed=seed)
    with torch.no_grad():
        batch.old_logp, _, _ = evaluate_actions(net, batch.states, batch.actions, batch.mask)
    batch.advantages = adv
    lr = 0.05
    ref = PolicyValueNet(4, (1, 2), slots.n_slots, (3,), 3, 5).double()
    ref.load_state_dict(net.state_dict())
    logp, _, _ = evaluate_actions(ref, batch.states, batch.actions, batch.mask)
    objective = (logp * adv).mean()
    grads = torch.autograd.grad(objective, list(ref.parameters()), allow_unused=True)
    with torch.no_grad():
        for p, g in zip(ref.parameters(), grads):
            if g is not None:
                p.add_(lr * g)
    cfg = PpoConfig(clip=float("inf"), epochs=1, entropy_coef=0.0, value_coef=0.0, optimizer="sgd",
                    lr=lr, dtype="float64")
    ppo_update(net, make_optimizer(net, cfg), batch, cfg)
    return max(float((a - b).detach().abs().max()) for a, b in zip(net.parameters(), ref.parameters()))


def test_unclipped_ppo_is_policy_gradient():
    assert pg_equivalence_error() <= 1e-10


def test_make_batch_shapes():
    tr = Trajectory()
    for k in range(3):
        tr.states.append(np.zeros((4, 1, 2)))
        tr.actions.append(np.array([k % 3, 1]))
        tr.logps.append(-1.0)
        tr.rewards.append(1.0)
    b = make_batch([tr, tr], np.array([True, True]), 1.0)
    assert b.states.shape == (6, 4, 1, 2) and len(b) == 6
    assert b.returns[:3].tolist() == [3.0, 2.0, 1.0]


def test_non_finite_loss_aborts_update():
    fp, slots, net = tiny_setup(5)
    batch, adv = _toy_batch(fp, slots, net, seed=5)
    batch.returns[0] = float("nan")
    cfg = PpoConfig(dtype="float64")
    with pytest.raises(NumericFaultError, match="returns mean"):
        ppo_update(net, make_optimizer(net, cfg), batch, cfg)


def test_masked_log_probs_force_noop():
    logits = torch.randn(2, 3, dtype=torch.float64)
    lp = masked_log_probs(logits, torch.tensor([True, False]))
    assert lp[1].exp().tolist() == [0.0, 1.0, 0.0]
    assert lp[0].exp().sum().item() == pytest.approx(1.0)
