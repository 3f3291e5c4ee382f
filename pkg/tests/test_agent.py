import numpy as np
import pytest
import torch

from subnav import agent as agent_mod
from subnav.agent import (GREEDY, GUIDED, RANDOM, AgentConfig, ReplayBuffer, Transition, greedy_action,
                          navigate_test, select_action, td_targets, td_update, train_agent, write_training_log)
from subnav.env import ActionTuple, GoalPoint, SubgraphEnv
from subnav.heuristics import greedy_mvc
from subnav.nn import DTYPE, QNet, as_tensor, grad_check, seeded

from conftest import ba_graph


class SolutionShareEmbed:
    """Toy embedder: (share of solution vertices in X, mean degree); vertex rows = (in B, degree)."""

    def __init__(self, g, B):
        self.g = g
        self.in_b = np.zeros(g.n)
        self.in_b[list(B)] = 1.0
        self.b = len(B)
        self.deg = g.degree() / g.degree().max()

    def __call__(self, sub):
        p = sub.parent_index
        rows = np.column_stack([self.in_b[p], self.deg[p]])
        return np.array([self.in_b[p].sum() / self.b, self.deg[p].mean()]), rows


def toy_env(n=150, M=20, b=10, seed=0):
    g = ba_graph(n, 2, seed=seed)
    B = greedy_mvc(g, b).vertices
    embed = SolutionShareEmbed(g, B)
    return SubgraphEnv(g, M, embed, GoalPoint(np.array([1.0, 0.5]), 1.0), solution=B)


def transition(r, terminal=False, k=3, d=2, seed=0):
    rng = np.random.default_rng(seed)
    return Transition(rng.random(2), rng.random(d), rng.random(d), r, rng.random(2),
                      np.empty((0, 2 * d)) if terminal else rng.random((k, 2 * d)), terminal)


class TestReplay:
    def test_fifo(self):
        buf = ReplayBuffer(25_000)
        for i in range(25_001):
            buf.push(i)
        items = buf.ordered()
        assert len(buf) == 25_000 and 0 not in items
        assert items == list(range(1, 25_001))

    def test_sample_without_replacement(self):
        buf = ReplayBuffer(10)
        for i in range(10):
            buf.push(i)
        s = buf.sample(5, np.random.default_rng(0))
        assert len(set(s)) == 5


class TestSelection:
    def setup_method(self):
        self.env = toy_env()
        self.state = self.env.reset(np.random.default_rng(0))
        self.A, self.Bt = self.env.candidates(self.state, np.random.default_rng(1))
        with seeded(0):
            self.q = QNet(2, 2, width=8)

    def test_eps_zero_is_argmax_and_pure(self):
        rng = np.random.default_rng(0)
        picks = {select_action(self.A, self.Bt, 0.0, 0.5, self.q, self.state, rng) for _ in range(20)}
        assert picks == {(greedy_action(self.q, self.state, self.A), GREEDY)}

    def test_alpha_zero_never_guided(self):
        rng = np.random.default_rng(0)
        A = [ActionTuple(i, 100 + i) for i in range(10)]
        counts = np.zeros(10)
        for _ in range(20_000):
            a, branch = select_action(A, A[:2], 1.0, 0.0, self.q, self.state, rng)
            assert branch == RANDOM
            counts[a.out_vertex] += 1
        assert np.all(np.abs(counts - 2000) < 4 * np.sqrt(20_000 * 0.1 * 0.9))

    def test_empty_guided_set_falls_back(self):
        rng = np.random.default_rng(0)
        A = [ActionTuple(i, 100 + i) for i in range(4)]
        seen = {select_action(A, [], 1.0, 1.0, self.q, self.state, rng)[0] for _ in range(200)}
        assert seen == set(A)

    def test_argmax_ties_lexicographic(self):
        with torch.no_grad():
            for p in self.q.parameters():
                p.zero_()
        best = greedy_action(self.q, self.state, self.A)
        assert best == min(self.A, key=lambda a: (a.out_vertex, a.in_vertex))


class TestTD:
    def test_terminal_target(self):
        with seeded(0):
            q = QNet(2, 2, 8)
        assert td_targets(q, [transition(-1.5, terminal=True)], 0.995).tolist() == [-1.5]

    def test_zero_target_net(self):
        q = QNet(2, 2, 8)
        with torch.no_grad():
            for p in q.parameters():
                p.zero_()
        assert td_targets(q, [transition(-0.7)], 0.995).tolist() == [-0.7]

    def test_missing_next_actions(self):
        bad = transition(0.0)
        bad.next_actions = np.empty((0, 4))
        with pytest.raises(ValueError):
            td_targets(QNet(2, 2, 8), [bad], 0.9)

    def test_target_uses_max(self):
        with seeded(1):
            q = QNet(2, 2, 8)
        t = transition(0.5, k=5)
        qs = q(as_tensor(np.tile(t.next_state, (5, 1))), as_tensor(t.next_actions[:, :2]),
               as_tensor(t.next_actions[:, 2:]))
        assert td_targets(q, [t], 0.9).item() == pytest.approx(0.5 + 0.9 * qs.max().item(), abs=1e-12)

    def test_gradient(self):
        with seeded(2):
            q, target = QNet(2, 2, 8), QNet(2, 2, 8)
        batch = [transition(-0.3, seed=3)]
        assert grad_check(lambda: agent_mod.td_loss(q, target, batch, 0.995), list(q.parameters())) < 1e-4

    def test_small_step_decreases_loss(self):
        with seeded(3):
            q, target = QNet(2, 2, 8), QNet(2, 2, 8)
        batch = [transition(-float(i), seed=i) for i in range(8)]
        opt = torch.optim.SGD(q.parameters(), lr=1e-5)
        before = td_update(q, target, batch, opt)
        after = agent_mod.td_loss(q, target, batch, 0.995).item()
        assert after < before


def test_epsilon_decay_closed_form(monkeypatch):
    env = toy_env()
    monkeypatch.setattr(agent_mod, "select_action", lambda A, B, eps, alpha, q, s, rng: (A[0], RANDOM))
    cfg = AgentConfig(M=20, T_train=400, episodes=10, c=10**9)
    _, logs, _ = train_agent(env, cfg, seed=0)
    assert logs[-1].epsilon == pytest.approx(max(0.9995 ** 4000, 0.01), rel=1e-9)
    assert logs[-1].epsilon == pytest.approx(0.135, abs=1e-3)


def test_training_is_deterministic(tmp_path):
    env = toy_env()
    cfg = AgentConfig(M=20, T_train=40, episodes=2, c=5, batch=16, alpha=0.1)
    q1, logs1, _ = train_agent(env, cfg, seed=4)
    q2, logs2, _ = train_agent(env, cfg, seed=4)
    assert logs1 == [l for l in logs2]
    assert all(torch.equal(a, b) for a, b in zip(q1.parameters(), q2.parameters()))
    write_training_log(tmp_path / "log.csv", logs1)
    assert (tmp_path / "log.csv").read_text().splitlines()[0] == "episode,mean_reward,final_distance,epsilon,loss"


def test_guided_exploration_helps():
    """Guided exploration ends episodes closer to the goal than plain epsilon-greedy."""
    env = toy_env(n=300, M=30, b=15, seed=1)
    finals = {0.0: [], 0.3: []}
    for alpha in finals:
        for seed in range(5):
            cfg = AgentConfig(M=30, T_train=150, episodes=2, c=10, batch=32, alpha=alpha)
            _, logs, _ = train_agent(env, cfg, seed=seed)
            finals[alpha].append(np.mean([l.final_distance for l in logs]))
    assert np.median(finals[0.3]) < np.median(finals[0.0])


def test_navigation_episodes_are_deterministic():
    env = toy_env()
    with seeded(0):
        q = QNet(2, 2, 8)
    a = navigate_test(env, q, T_test=10, n_episodes=10, seed=3)
    b = navigate_test(env, q, T_test=10, n_episodes=10, seed=3)
    assert len(a) == 10
    assert [e.best_X.tolist() for e in a] == [e.best_X.tolist() for e in b]
    assert all(min(e.distances) == env.goal.distance(e.trajectory.embeddings[e.trajectory.best_index]) for e in a)


@pytest.mark.slow
def test_table_row_scale_run_completes():
    """Facebook-MVC-sized schedule (M=300, 10 x 2000 steps, c=20) on a toy embedder."""
    g = ba_graph(1500, 3, seed=2)
    B = greedy_mvc(g, 100).vertices
    env = SubgraphEnv(g, 300, SolutionShareEmbed(g, B), GoalPoint(np.array([1.0, 0.5]), 50.0), solution=B)
    cfg = AgentConfig(M=300, T_train=2000, episodes=10, c=20, beta=50, alpha=0.0)
    _, logs, buf = train_agent(env, cfg, seed=0)
    assert len(logs) == 10 and len(buf) <= 25_000
