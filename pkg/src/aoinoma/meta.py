"""Preference-weight meta-training and per-weight fine-tuning.

The meta loop treats each preference weight as a task. An inner stage
adapts the shared initialization with plain gradient steps, one step per
freshly collected episode; the outer stage moves the initialization
against the adapted parameters' loss gradient, evaluated on independent
data. Two outer modes ship: the common first-order shortcut (use the
adapted gradient directly) and the exact chain that multiplies through
(I - alpha * Hessian) factors via Hessian-vector products recorded along
the inner trajectory.

Fine-tuning copies the meta initialization and runs the ordinary
single-task trainer for a handful of episodes at the requested weight.
"""

import numpy as np

from . import nn
from .agents import Batch, HybridPolicy, dqn_loss, ddpg_losses, train_hybrid
from .config import seed_streams
from .env import DisseminationEnv, Transition


def collect_episode(env, policy, epsilon, noise, rng):
    """One rollout; returns transitions with normalized states."""
    out = []
    s = env.normalizer(env.reset())
    done = False
    while not done:
        order_idx = policy.act_discrete(s, epsilon, rng)
        alphas = policy.act_continuous(s, noise, rng)
        raw, reward, done = env.step(order_idx, alphas)
        s_next = env.normalizer(raw)
        out.append(Transition(s, order_idx, alphas, reward, s_next, done))
        s = s_next
    return out


def to_batch(transitions):
    return Batch(
        states=np.stack([t.state for t in transitions]),
        orders=np.array([t.order_index for t in transitions], dtype=np.int64),
        alphas=np.stack([t.alphas for t in transitions]),
        rewards=np.array([t.reward for t in transitions]),
        next_states=np.stack([t.next_state for t in transitions]),
        dones=np.array([float(t.done) for t in transitions]),
    )


def minibatches(transitions, batch_size, rng):
    idx = rng.permutation(len(transitions))
    return [to_batch([transitions[i] for i in idx[k:k + batch_size]])
            for k in range(0, len(idx), batch_size)]


def task_gradients(policy, batches, discount):
    """Per-network loss gradients averaged over minibatches, mean-normalized.

    The squared losses are sums over a batch; plain gradient descent is
    scale-sensitive, so the inner/outer stages work with per-sample
    means. Bootstrap targets are taken from the current networks (tied
    targets) and treated as constants.
    """
    q_list, c_list, a_list = [], [], []
    for batch in batches:
        b = batch.states.shape[0]
        _, q_g = dqn_loss(policy.q, policy.q, batch, discount)
        _, c_g, _, a_g = ddpg_losses(policy.critic, policy.critic,
                                     policy.actor, policy.actor, batch, discount)
        q_list.append(nn.grad_scale(q_g, 1.0 / b))
        c_list.append(nn.grad_scale(c_g, 1.0 / b))
        a_list.append(a_g)                      # actor loss is already a mean
    return (nn.grad_combine(q_list), nn.grad_combine(c_list), nn.grad_combine(a_list))


def _hvp_masked_sq(net, states, actions, targets, v, scale):
    """HVP of scale * sum_b (targets_b - net(states)[b, actions_b])^2."""
    b = states.shape[0]
    rows = np.arange(b)
    out, dout = nn.forward_with_tangent(net, states, v)
    q = out[rows, actions]
    dq = dout[rows, actions]
    upstream = np.zeros_like(out)
    upstream[rows, actions] = -2.0 * scale * (targets - q)
    dup = np.zeros_like(out)
    dup[rows, actions] = 2.0 * scale * dq
    _, hvp, _, _ = nn.backward_with_tangent(net, states, upstream, v,
                                            upstream_tangent=dup)
    return hvp


def _hvp_actor(actor, critic, states, v):
    """HVP of -mean_b critic(states_b, actor(states_b)) wrt actor parameters."""
    b = states.shape[0]
    mu, dmu = nn.forward_with_tangent(actor, states, v)
    critic_in = np.concatenate([states, mu], axis=1)
    din = np.concatenate([np.zeros_like(states), dmu], axis=1)
    upstream = np.full((b, 1), -1.0 / b)
    zero_dir = nn.zeros_like_grads(critic)
    _, _, gin, dgin = nn.backward_with_tangent(
        critic, critic_in, upstream, zero_dir, x_tangent=din)
    sdim = actor.sizes[0]
    _, hvp, _, _ = nn.backward_with_tangent(
        actor, states, gin[:, sdim:], v, upstream_tangent=dgin[:, sdim:])
    return hvp


def task_hvps(policy, batches, discount, directions):
    """Hessian-vector products of the three mean-normalized losses."""
    v_q, v_c, v_a = directions
    q_list, c_list, a_list = [], [], []
    for batch in batches:
        b = batch.states.shape[0]
        rows = np.arange(b)
        next_q = policy.q.forward(batch.next_states)
        q_targets = batch.rewards + discount * next_q.max(axis=1) * (1.0 - batch.dones)
        q_list.append(_hvp_masked_sq(policy.q, batch.states, batch.orders,
                                     q_targets, v_q, 1.0 / b))
        next_alpha = policy.actor.forward(batch.next_states)
        next_qc = policy.critic.forward(
            np.concatenate([batch.next_states, next_alpha], axis=1))[:, 0]
        y = batch.rewards + discount * next_qc * (1.0 - batch.dones)
        critic_in = np.concatenate([batch.states, batch.alphas], axis=1)
        c_list.append(_hvp_masked_sq(policy.critic, critic_in,
                                     np.zeros(b, dtype=np.int64), y, v_c, 1.0 / b))
        a_list.append(_hvp_actor(policy.actor, policy.critic, batch.states, v_a))
    return (nn.grad_combine(q_list), nn.grad_combine(c_list), nn.grad_combine(a_list))


def inner_adapt(policy, cfg, zeta, inner_steps, env_seed, rng, record=False):
    """Adapt a copy of ``policy`` with plain gradient steps, one per episode.

    Returns (adapted policy, trace); the trace holds the pre-step
    parameter snapshots and minibatches needed by the exact outer mode.
    """
    mc = cfg.meta
    adapted = policy.copy()
    adapted.zeta = zeta
    env = DisseminationEnv(cfg, seed=env_seed, zeta=zeta)
    trace = []
    for _ in range(inner_steps):
        transitions = collect_episode(env, adapted, mc.explore_eps,
                                      mc.explore_noise, rng)
        batches = minibatches(transitions, cfg.train.batch_size, rng)
        if record:
            trace.append((adapted.copy(), batches))
        g_q, g_c, g_a = task_gradients(adapted, batches, cfg.train.discount)
        adapted.q = nn.sgd_step(adapted.q, g_q, mc.inner_lr_dqn)
        adapted.critic = nn.sgd_step(adapted.critic, g_c, mc.inner_lr_critic)
        adapted.actor = nn.sgd_step(adapted.actor, g_a, mc.inner_lr_actor)
        adapted.reset_targets()
    return adapted, env, trace


def outer_gradients(cfg, adapted, env, rng, trace, mode):
    """Task gradient at the adapted parameters on independently sampled data.

    In exact mode the gradient is pushed back through the recorded inner
    steps: v <- v - alpha * H_k v at each step, per network.
    """
    mc = cfg.meta
    transitions = collect_episode(env, adapted, mc.explore_eps, mc.explore_noise, rng)
    batches = minibatches(transitions, cfg.train.batch_size, rng)
    g_q, g_c, g_a = task_gradients(adapted, batches, cfg.train.discount)
    if mode == "first_order":
        return g_q, g_c, g_a
    for snap, data in reversed(trace):
        h_q, h_c, h_a = task_hvps(snap, data, cfg.train.discount, (g_q, g_c, g_a))
        g_q = nn.grad_combine([g_q, nn.grad_scale(h_q, -mc.inner_lr_dqn)], [1.0, 1.0])
        g_c = nn.grad_combine([g_c, nn.grad_scale(h_c, -mc.inner_lr_critic)], [1.0, 1.0])
        g_a = nn.grad_combine([g_a, nn.grad_scale(h_a, -mc.inner_lr_actor)], [1.0, 1.0])
    return g_q, g_c, g_a


def outer_update(meta_policy, task_grads, outer_lrs):
    """Average the per-task outer gradients and step the meta parameters."""
    if not task_grads:
        raise ValueError("need at least one task result")
    lr_q, lr_c, lr_a = outer_lrs
    g_q = nn.grad_combine([g[0] for g in task_grads])
    g_c = nn.grad_combine([g[1] for g in task_grads])
    g_a = nn.grad_combine([g[2] for g in task_grads])
    meta_policy.q = nn.sgd_step(meta_policy.q, g_q, lr_q)
    meta_policy.critic = nn.sgd_step(meta_policy.critic, g_c, lr_c)
    meta_policy.actor = nn.sgd_step(meta_policy.actor, g_a, lr_a)
    meta_policy.reset_targets()
    return meta_policy


def meta_train(cfg, seed=None, iterations=None, task_sampler=None):
    """Full meta loop; returns (meta policy, bookkeeping dict)."""
    mc = cfg.meta
    iterations = mc.iterations if iterations is None else int(iterations)
    streams = seed_streams(cfg.seed if seed is None else seed)
    rng = streams["agent"]
    env_rng = streams["env"]
    sampler = task_sampler or (lambda r: float(r.uniform(0.0, 1.0)))

    probe = DisseminationEnv(cfg, seed=0)
    meta_policy = HybridPolicy(probe.state_dim, probe.n_orders, cfg.processes,
                               cfg.train.hidden, cfg.zeta, rng=rng)
    episodes_consumed = 0
    for _ in range(iterations):
        task_grads = []
        for _ in range(mc.tasks_per_iter):
            zeta_j = sampler(rng)
            env_seed = int(env_rng.integers(2 ** 63))
            adapted, env, trace = inner_adapt(
                meta_policy, cfg, zeta_j, mc.inner_steps, env_seed, rng,
                record=(mc.mode == "exact"))
            task_grads.append(outer_gradients(cfg, adapted, env, rng, trace, mc.mode))
            episodes_consumed += mc.inner_steps + 1
        outer_update(meta_policy, task_grads,
                     (mc.outer_lr_dqn, mc.outer_lr_critic, mc.outer_lr_actor))
    return meta_policy, {"iterations": iterations,
                         "episodes_consumed": episodes_consumed}


def fine_tune(cfg, meta_policy, zeta, steps=None, seed=None):
    """Copy the meta parameters and run a short ordinary training burst."""
    steps = cfg.meta.finetune_steps if steps is None else int(steps)
    start = meta_policy.copy()
    start.zeta = float(zeta)
    start.reset_targets()
    if steps == 0:
        return start
    policy, _, _ = train_hybrid(cfg, zeta=zeta, seed=seed, episodes=steps,
                                policy=start)
    return policy
