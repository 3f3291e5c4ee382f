"""Q-learning agent with replay, a Polyak-averaged target network and guided exploration."""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .env import DeadStateError, SubgraphEnv, rollout
from .nn import QNet, as_tensor, polyak_update, seeded

log = logging.getLogger(__name__)


@dataclass
class Transition:
    state: np.ndarray
    v_emb: np.ndarray
    u_emb: np.ndarray
    reward: float
    next_state: np.ndarray
    next_actions: np.ndarray  # (k, 2 d'): out-vertex rows | in-vertex rows
    terminal: bool = False


class ReplayBuffer:
    """Fixed-capacity FIFO ring buffer."""

    def __init__(self, capacity=25_000):
        self.capacity = capacity
        self.items = []
        self.index = 0

    def __len__(self):
        return len(self.items)

    def push(self, item):
        if len(self.items) < self.capacity:
            self.items.append(item)
        else:
            self.items[self.index] = item
        self.index = (self.index + 1) % self.capacity

    def ordered(self):
        """Contents from oldest to newest."""
        if len(self.items) < self.capacity:
            return list(self.items)
        return self.items[self.index:] + self.items[:self.index]

    def sample(self, size, rng):
        idx = rng.choice(len(self.items), size=min(size, len(self.items)), replace=False)
        return [self.items[i] for i in idx]


def action_embeddings(state, actions):
    """Stack layer-1 embeddings of the out/in vertices of ``actions``."""
    parents = state.subgraph.parent_index
    vs = np.searchsorted(parents, [a.out_vertex for a in actions])
    us = np.searchsorted(parents, [a.in_vertex for a in actions])
    return state.vertex_embeddings[vs], state.vertex_embeddings[us]


def q_values(qnet, state_emb, v_embs, u_embs):
    with torch.no_grad():
        s = as_tensor(state_emb).unsqueeze(0).expand(len(v_embs), -1)
        return qnet(s, as_tensor(v_embs), as_tensor(u_embs)).numpy()


def q_value(qnet, state_emb, v_emb, u_emb):
    return float(q_values(qnet, state_emb, np.atleast_2d(v_emb), np.atleast_2d(u_emb))[0])


def greedy_action(qnet, state, A):
    """Arg-max Q over ``A``; ties go to the lexicographically smallest (v, u)."""
    v, u = action_embeddings(state, A)
    q = q_values(qnet, state.embedding, v, u)
    top = np.flatnonzero(q == q.max())
    return min((A[i] for i in top), key=lambda a: (a.out_vertex, a.in_vertex))


RANDOM, GUIDED, GREEDY = "random", "guided", "greedy"


def select_action(A, B_t, eps, alpha, qnet, state, rng):
    """Guided epsilon-greedy: uniform over A w.p. eps(1-alpha), uniform over B_t
    w.p. eps*alpha (uniform over A when B_t is empty), else arg-max Q.

    Returns ``(action, branch)``.
    """
    if not A:
        raise ValueError("empty action set")
    r = rng.random()
    if r < eps * (1.0 - alpha):
        return A[rng.integers(len(A))], RANDOM
    if r < eps:
        pool = B_t if B_t else A
        return pool[rng.integers(len(pool))], GUIDED
    return greedy_action(qnet, state, A), GREEDY


def td_targets(target_net, batch, gamma):
    rewards = torch.tensor([t.reward for t in batch], dtype=torch.float64)
    live = [i for i, t in enumerate(batch) if not t.terminal]
    y = rewards.clone()
    if not live:
        return y
    for i in live:
        if len(batch[i].next_actions) == 0:
            raise ValueError("non-terminal transition without next actions")
    acts = np.concatenate([batch[i].next_actions for i in live])
    seg = np.concatenate([np.full(len(batch[i].next_actions), j) for j, i in enumerate(live)])
    states = np.stack([batch[i].next_state for i in live])[seg]
    d = acts.shape[1] // 2
    with torch.no_grad():
        q = target_net(as_tensor(states), as_tensor(acts[:, :d]), as_tensor(acts[:, d:]))
        best = torch.full((len(live),), -torch.inf, dtype=torch.float64).scatter_reduce(
            0, torch.as_tensor(seg), q, "amax")
    y[live] = rewards[live] + gamma * best
    return y


def td_loss(qnet, target_net, batch, gamma):
    y = td_targets(target_net, batch, gamma)
    s = as_tensor(np.stack([t.state for t in batch]))
    v = as_tensor(np.stack([t.v_emb for t in batch]))
    u = as_tensor(np.stack([t.u_emb for t in batch]))
    return torch.mean((qnet(s, v, u) - y) ** 2)


def td_update(qnet, target_net, batch, optimizer, gamma=0.995):
    """One Adam step on the mean squared TD error; returns the pre-step loss."""
    if not batch:
        raise ValueError("empty batch")
    loss = td_loss(qnet, target_net, batch, gamma)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return loss.item()


@dataclass
class AgentConfig:
    M: int = 300
    T_train: int = 2000
    episodes: int = 10
    alpha: float = 0.0
    c: int = 20
    beta: float = 50.0
    gamma: float = 0.995
    lr: float = 1e-3
    batch: int = 128
    eps_start: float = 1.0
    eps_decay: float = 0.9995
    eps_min: float = 0.01
    buffer: int = 25_000
    rho: float = 0.0025
    T_test: int = 2000
    extra: dict = field(default_factory=dict)


@dataclass
class EpisodeLog:
    episode: int
    mean_reward: float
    final_distance: float
    epsilon: float
    loss: float


def train_agent(env: SubgraphEnv, config: AgentConfig, seed=0, qnet=None):
    """Guided-exploration DQN on ``env``; returns ``(qnet, episode logs, buffer)``."""
    rng = np.random.default_rng(seed)
    s0 = env.reset(np.random.default_rng(seed))
    with seeded(seed):
        qnet = qnet or QNet(len(s0.embedding), s0.vertex_embeddings.shape[1])
        target = QNet(qnet.state_dim, qnet.vertex_dim, qnet.width)
    target.load_state_dict(qnet.state_dict())
    opt = torch.optim.Adam(qnet.parameters(), lr=config.lr)
    buf = ReplayBuffer(config.buffer)
    eps, logs = config.eps_start, []
    for ep in range(config.episodes):
        state = env.reset(rng)
        rewards, losses = [], []
        pending = None
        try:
            A, B_t = env.candidates(state, rng)
        except DeadStateError:
            log.warning("episode %d started in a dead state; skipped", ep)
            continue
        for t in range(1, config.T_train + 1):
            action, branch = select_action(A, B_t, eps, config.alpha, qnet, state, rng)
            if branch != GREEDY:
                eps = max(eps * config.eps_decay, config.eps_min)
            v_emb, u_emb = (x[0] for x in action_embeddings(state, [action]))
            nxt, r = env.step(state, action)
            rewards.append(r)
            try:
                A, B_t = env.candidates(nxt, rng)
                nv, nu = action_embeddings(nxt, A)
                buf.push(Transition(state.embedding, v_emb, u_emb, r, nxt.embedding, np.hstack([nv, nu])))
                dead = False
            except DeadStateError:
                buf.push(Transition(state.embedding, v_emb, u_emb, r, nxt.embedding,
                                    np.empty((0, 2 * len(v_emb))), terminal=True))
                dead = True
            state = nxt
            if t % config.c == 0 and len(buf) > 0:
                losses.append(td_update(qnet, target, buf.sample(config.batch, rng), opt, config.gamma))
                polyak_update(target, qnet, config.rho)
            if dead:
                log.warning("episode %d hit a dead state at step %d", ep, t)
                break
        logs.append(EpisodeLog(ep, float(np.mean(rewards)) if rewards else 0.0, env.distance(state), eps,
                               float(np.mean(losses)) if losses else float("nan")))
        log.info("episode %d mean reward %.4f final distance %.4f eps %.4f", ep, logs[-1].mean_reward,
                 logs[-1].final_distance, eps)
    return qnet, logs, buf


def write_training_log(path, logs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "mean_reward", "final_distance", "epsilon", "loss"])
        for r in logs:
            w.writerow([r.episode, repr(r.mean_reward), repr(r.final_distance), repr(r.epsilon), repr(r.loss)])


def greedy_policy(qnet):
    def policy(state, A, B_t, rng):
        return greedy_action(qnet, state, A)
    return policy


@dataclass
class TestEpisode:
    seed: int
    best_X: np.ndarray
    best_subgraph: object
    distances: list
    trajectory: object
    seconds: float


def navigate_test(env: SubgraphEnv, qnet, T_test, n_episodes=10, seed=0):
    """Greedy (eps = 0) rollouts; each returns its closest-to-goal subgraph."""
    out = []
    seeds = np.random.SeedSequence(seed).generate_state(n_episodes)
    for s in seeds:
        t0 = time.perf_counter()
        traj = rollout(env, greedy_policy(qnet), T_test, seed=int(s))
        out.append(TestEpisode(int(s), traj.best_state.X, traj.best_state.subgraph, traj.distances, traj,
                               time.perf_counter() - t0))
    return out
