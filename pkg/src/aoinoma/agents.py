"""Replay buffer, the coupled discrete/continuous agents, and their training loop.

The discrete head is a Q-network over all decoding orders (epsilon
greedy); the continuous head is a deterministic actor emitting power
fractions in (0,1) per process, judged by a critic on (state, fractions)
pairs. Both heads act every slot and share one reward, so neither can go
lazy: a bad order or a bad allocation drags the same scalar down.

Training follows the usual pattern: act, store, sample a mini-batch,
take one Adam step per network on the squared bootstrap errors (targets
detached, terminal transitions drop the bootstrap), then Polyak-update
the target copies.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import nn
from .config import seed_streams
from .env import DisseminationEnv, Transition


@dataclass
class Batch:
    states: np.ndarray       # (B, state_dim) normalized
    orders: np.ndarray       # (B,) int action indices
    alphas: np.ndarray       # (B, F)
    rewards: np.ndarray      # (B,)
    next_states: np.ndarray  # (B, state_dim)
    dones: np.ndarray        # (B,) float 0/1


class ReplayBuffer:
    """Fixed-capacity ring buffer; evicts oldest first."""

    def __init__(self, capacity, state_dim, n_processes):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.orders = np.zeros(capacity, dtype=np.int64)
        self.alphas = np.zeros((capacity, n_processes))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.dones = np.zeros(capacity)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, tr):
        i = self._next
        self.states[i] = tr.state
        self.orders[i] = tr.order_index
        self.alphas[i] = tr.alphas
        self.rewards[i] = tr.reward
        self.next_states[i] = tr.next_state
        self.dones[i] = float(tr.done)
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size, rng):
        if self._size < 1:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.choice(self._size, size=min(batch_size, self._size), replace=False)
        return Batch(self.states[idx], self.orders[idx], self.alphas[idx],
                     self.rewards[idx], self.next_states[idx], self.dones[idx])


class HybridPolicy:
    """The three online networks, their target copies, and the preference weight."""

    def __init__(self, state_dim, n_orders, n_processes, hidden, zeta, rng=None):
        rng = rng or np.random.default_rng()
        self.state_dim = state_dim
        self.n_orders = n_orders
        self.n_processes = n_processes
        self.zeta = float(zeta)
        self.q = nn.Mlp((state_dim, *hidden, n_orders), rng=rng)
        self.actor = nn.Mlp((state_dim, *hidden, n_processes), output="sigmoid", rng=rng)
        self.critic = nn.Mlp((state_dim + n_processes, *hidden, 1), rng=rng)
        self.q_target = self.q.copy()
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()

    def copy(self):
        dup = HybridPolicy.__new__(HybridPolicy)
        dup.state_dim = self.state_dim
        dup.n_orders = self.n_orders
        dup.n_processes = self.n_processes
        dup.zeta = self.zeta
        for name in ("q", "actor", "critic", "q_target", "actor_target", "critic_target"):
            setattr(dup, name, getattr(self, name).copy())
        return dup

    def reset_targets(self):
        self.q_target = self.q.copy()
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()

    # -- acting -------------------------------------------------------------

    def act_discrete(self, state, epsilon, rng):
        if epsilon > 0.0 and rng.random() < epsilon:
            return int(rng.integers(self.n_orders))
        qvals = self.q.forward(state)[0]
        return int(np.argmax(qvals))          # ties resolve to the lowest index

    def act_continuous(self, state, noise_scale, rng):
        mu = self.actor.forward(state)[0]
        if noise_scale > 0.0:
            mu = mu + rng.normal(0.0, noise_scale, size=mu.shape)
        return np.clip(mu, 0.0, 1.0)

    def act(self, state, epsilon=0.0, noise_scale=0.0, rng=None):
        rng = rng or np.random.default_rng()
        return self.act_discrete(state, epsilon, rng), \
            self.act_continuous(state, noise_scale, rng)

    # -- persistence ----------------------------------------------------------

    def save(self, path, manifest=None):
        nets = {"q": self.q, "actor": self.actor, "critic": self.critic,
                "q_target": self.q_target, "actor_target": self.actor_target,
                "critic_target": self.critic_target}
        nn.save_nets(path, nets)
        meta = {"zeta": self.zeta, "state_dim": self.state_dim,
                "n_orders": self.n_orders, "n_processes": self.n_processes}
        meta.update(manifest or {})
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path):
        nets = nn.load_nets(path)
        with open(str(path) + ".json") as fh:
            meta = json.load(fh)
        pol = cls.__new__(cls)
        pol.state_dim = meta["state_dim"]
        pol.n_orders = meta["n_orders"]
        pol.n_processes = meta["n_processes"]
        pol.zeta = meta["zeta"]
        for name in ("q", "actor", "critic", "q_target", "actor_target", "critic_target"):
            setattr(pol, name, nets[name])
        return pol


# -- losses -------------------------------------------------------------------

def dqn_loss(q_net, q_target, batch, discount):
    """Summed squared bootstrap error of the discrete head; gradients wrt q_net."""
    if batch.states.shape[0] == 0:
        raise ValueError("empty batch")
    b = batch.states.shape[0]
    next_q = q_target.forward(batch.next_states)
    targets = batch.rewards + discount * next_q.max(axis=1) * (1.0 - batch.dones)
    out, cache = nn.forward_cached(q_net, batch.states)
    chosen = out[np.arange(b), batch.orders]
    err = targets - chosen
    loss = float(np.sum(err ** 2))
    upstream = np.zeros_like(out)
    upstream[np.arange(b), batch.orders] = -2.0 * err
    grads, _ = nn.backward(q_net, cache, upstream)
    return loss, grads


def ddpg_losses(critic, critic_target, actor, actor_target, batch, discount):
    """Critic squared error against its bootstrap, and the actor ascent loss.

    Critic gradients treat the target as constant; actor gradients flow
    through the actor only, chained through the critic's input gradient.
    """
    if batch.states.shape[0] == 0:
        raise ValueError("empty batch")
    b = batch.states.shape[0]
    next_alpha = actor_target.forward(batch.next_states)
    next_q = critic_target.forward(
        np.concatenate([batch.next_states, next_alpha], axis=1))[:, 0]
    y = batch.rewards + discount * next_q * (1.0 - batch.dones)

    critic_in = np.concatenate([batch.states, batch.alphas], axis=1)
    q_out, cache = nn.forward_cached(critic, critic_in)
    err = y - q_out[:, 0]
    critic_loss = float(np.sum(err ** 2))
    critic_grads, _ = nn.backward(critic, cache, (-2.0 * err)[:, None])

    mu, actor_cache = nn.forward_cached(actor, batch.states)
    eval_in = np.concatenate([batch.states, mu], axis=1)
    q_mu, eval_cache = nn.forward_cached(critic, eval_in)
    actor_loss = float(-np.mean(q_mu))
    _, dinput = nn.backward(critic, eval_cache, np.full((b, 1), -1.0 / b))
    actor_grads, _ = nn.backward(actor, actor_cache, dinput[:, actor.sizes[0]:])
    return critic_loss, critic_grads, actor_loss, actor_grads


# -- training loop --------------------------------------------------------------

def _linear_anneal(start, end, episode, decay_episodes):
    if decay_episodes <= 0:
        return end
    frac = min(episode / decay_episodes, 1.0)
    return start + (end - start) * frac


def _update_once(policy, buffer, tc, rng):
    batch = buffer.sample(tc.batch_size, rng)
    _, q_grads = dqn_loss(policy.q, policy.q_target, batch, tc.discount)
    nn.adam_step(policy.q, q_grads, policy._adam_q, tc.lr_dqn)
    _, c_grads, _, a_grads = ddpg_losses(
        policy.critic, policy.critic_target, policy.actor, policy.actor_target,
        batch, tc.discount)
    nn.adam_step(policy.critic, c_grads, policy._adam_critic, tc.lr_critic)
    nn.adam_step(policy.actor, a_grads, policy._adam_actor, tc.lr_actor)
    nn.soft_update(policy.q_target, policy.q, tc.tau)
    nn.soft_update(policy.critic_target, policy.critic, tc.tau)
    nn.soft_update(policy.actor_target, policy.actor, tc.tau)


def train_hybrid(cfg, zeta=None, seed=None, episodes=None, policy=None,
                 buffer=None):
    """Episode loop for one preference weight.

    Starts from ``policy`` if given (fine-tuning), otherwise from fresh
    random networks. Returns (policy, per-episode mean rewards, running
    average of those rewards).
    """
    zeta = cfg.zeta if zeta is None else float(zeta)
    tc = cfg.train
    episodes = tc.episodes if episodes is None else int(episodes)
    streams = seed_streams(cfg.seed if seed is None else seed)
    env = DisseminationEnv(cfg, seed=int(streams["env"].integers(2 ** 63)), zeta=zeta)
    agent_rng = streams["agent"]

    if policy is None:
        policy = HybridPolicy(env.state_dim, env.n_orders, cfg.processes,
                              tc.hidden, zeta, rng=agent_rng)
    else:
        policy = policy.copy()
        policy.zeta = zeta
    policy._adam_q = nn.AdamState(policy.q)
    policy._adam_critic = nn.AdamState(policy.critic)
    policy._adam_actor = nn.AdamState(policy.actor)

    if buffer is None:
        buffer = ReplayBuffer(tc.replay_capacity, env.state_dim, cfg.processes)
    decay_eps = max(1, int(episodes * tc.eps_decay_fraction))

    ep_rewards = []
    best = (-np.inf, None)
    for ep in range(episodes):
        epsilon = _linear_anneal(tc.eps_start, tc.eps_end, ep, decay_eps)
        noise = _linear_anneal(tc.noise_start, tc.noise_end, ep, decay_eps)
        s = env.normalizer(env.reset())
        total = 0.0
        done = False
        while not done:
            order_idx = policy.act_discrete(s, epsilon, agent_rng)
            alphas = policy.act_continuous(s, noise, agent_rng)
            s_next_raw, reward, done = env.step(order_idx, alphas)
            s_next = env.normalizer(s_next_raw)
            buffer.push(Transition(s, order_idx, alphas, reward, s_next, done))
            total += reward
            s = s_next
            if tc.update_cadence == "step" and len(buffer) >= tc.batch_size:
                for _ in range(tc.updates_per_step):
                    _update_once(policy, buffer, tc, agent_rng)
        if tc.update_cadence == "episode" and len(buffer) >= tc.batch_size:
            for _ in range(tc.updates_per_step):
                _update_once(policy, buffer, tc, agent_rng)
        ep_rewards.append(total / env.horizon)
        if tc.keep_best and ep >= decay_eps:
            trailing = float(np.mean(ep_rewards[-10:]))
            if trailing > best[0]:
                best = (trailing, policy.copy())
    if tc.keep_best and best[1] is not None:
        policy = best[1]

    ep_rewards = np.asarray(ep_rewards)
    window = max(1, min(50, len(ep_rewards)))
    running = np.convolve(ep_rewards, np.ones(window) / window, mode="full")[:len(ep_rewards)]
    # correct the warmup region of the moving average
    for i in range(min(window - 1, len(ep_rewards))):
        running[i] = ep_rewards[:i + 1].mean()
    return policy, ep_rewards, running


def evaluate_policy(cfg, policy, episodes, seed, zeta=None):
    """Noise-free rollouts; returns (mean aoi, mean power, per-episode pairs)."""
    zeta = policy.zeta if zeta is None else zeta
    env = DisseminationEnv(cfg, seed=seed, zeta=zeta)
    pairs = []
    for _ in range(episodes):
        s = env.normalizer(env.reset())
        done = False
        while not done:
            order_idx = policy.act_discrete(s, 0.0, None)
            alphas = policy.act_continuous(s, 0.0, None)
            raw, _, done = env.step(order_idx, alphas)
            s = env.normalizer(raw)
        pairs.append((env.avg_aoi(), env.avg_power()))
    pairs = np.asarray(pairs)
    return float(pairs[:, 0].mean()), float(pairs[:, 1].mean()), pairs
