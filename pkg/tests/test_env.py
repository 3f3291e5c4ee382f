import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subnav.env import (ActionTuple, DeadStateError, GoalPoint, SubgraphEnv, apply_action, induce_subgraph,
                        reward, rollout, sample_actions)

from conftest import ba_graph, graph_of


def xi_predicates_hold(g, X, sub):
    """Vertices = X plus neighbours; edges = exactly those touching X."""
    X = set(int(x) for x in X)
    want_v = X | {int(u) for x in X for u in g.neighbors(x)}
    got_v = set(sub.parent_index.tolist())
    in_x = np.isin(np.arange(g.n), list(X))
    want_e = {(int(s), int(d)) for s, d in zip(g.src, g.dst) if in_x[s] or in_x[d]}
    got_e = {(int(sub.parent_index[s]), int(sub.parent_index[d])) for s, d in zip(sub.src, sub.dst)}
    return want_v == got_v and want_e == got_e


class TestInduce:
    def test_path_single(self, path4):
        sub = induce_subgraph(path4, [1])
        assert sub.parent_index.tolist() == [0, 1, 2]
        assert sub.edge_set(True) == {(0, 1), (1, 2)}

    def test_path_pair(self, path4):
        sub = induce_subgraph(path4, [1, 2])
        assert sub.n == 4 and sub.n_edges == 3

    def test_star_leaf_excludes_other_leaves(self, star4):
        sub = induce_subgraph(star4, [1])
        assert sub.edge_set(True) == {(0, 1)}
        assert (0, 2) not in sub.edge_set(True)

    def test_empty(self, path3):
        with pytest.raises(ValueError):
            induce_subgraph(path3, [])

    def test_predicates_random(self):
        g = ba_graph(200, 3, seed=2)
        rng = np.random.default_rng(0)
        for _ in range(30):
            X = rng.choice(g.n, size=rng.integers(1, 40), replace=False)
            assert xi_predicates_hold(g, X, induce_subgraph(g, X))


def fig1_graph():
    # u=0, v=1; N(v)\X = {2,3,4}; N(u)\X = {5,6}
    return graph_of([(0, 1), (1, 2), (1, 3), (1, 4), (0, 5), (0, 6)])


class TestActions:
    def test_one_tuple_per_vertex_uniform(self):
        g = fig1_graph()
        counts = {2: 0, 3: 0, 4: 0}
        for s in range(3000):
            A, _ = sample_actions(g, [0, 1], seed=s)
            assert len(A) == 2
            assert {a.out_vertex for a in A} == {0, 1}
            counts[next(a.in_vertex for a in A if a.out_vertex == 1)] += 1
        sigma = np.sqrt(3000 * (1 / 3) * (2 / 3))
        assert all(abs(c - 1000) < 4 * sigma for c in counts.values())

    def test_guided_subset(self):
        g = fig1_graph()
        for s in range(50):
            A, Bt = sample_actions(g, [0, 1], B=[2], seed=s)
            assert Bt == [a for a in A if a.in_vertex == 2]
            assert set(Bt) <= set(A)

    def test_exhausted_neighbourhood(self, path4):
        A, _ = sample_actions(path4, [0, 1], seed=0)
        assert [a.out_vertex for a in A] == [1]

    def test_dead_state(self, triangle):
        with pytest.raises(DeadStateError):
            sample_actions(triangle, [0, 1, 2], seed=0)


class TestApply:
    def test_swap(self):
        assert apply_action(np.array([1, 2]), ActionTuple(1, 0)).tolist() == [0, 2]

    def test_inverse(self):
        X = np.array([1, 2])
        assert apply_action(apply_action(X, ActionTuple(1, 0)), ActionTuple(0, 1)).tolist() == X.tolist()

    def test_invalid(self):
        with pytest.raises(RuntimeError):
            apply_action(np.array([1, 2]), ActionTuple(1, 2))

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 10**6))
    def test_size_preserved(self, seed):
        g = ba_graph(60, 2, seed=0)
        rng = np.random.default_rng(seed)
        X = np.sort(rng.choice(g.n, size=int(rng.integers(1, 30)), replace=False))
        A, _ = sample_actions(g, X, seed=seed)
        assert len(apply_action(X, A[rng.integers(len(A))])) == len(X)


class TestReward:
    def test_at_goal(self):
        assert reward(GoalPoint(np.array([1.0, 2.0]), 50), [1.0, 2.0]) == 0.0

    def test_scaled(self):
        assert reward(GoalPoint(np.zeros(2), 50), [0.2, 0.0]) == pytest.approx(-10)

    def test_dim_mismatch(self):
        with pytest.raises(ValueError):
            reward(GoalPoint(np.zeros(2)), [0.0])


def size_embed(sub):
    return np.array([sub.n / 10.0, sub.n_edges / 10.0]), None


def scripted_policy(env):
    """One-step lookahead toward the goal."""
    def policy(state, A, Bt, rng):
        return min(A, key=lambda a: env.goal.distance(size_embed(induce_subgraph(env.g, apply_action(state.X, a)))[0]))
    return policy


class TestRollout:
    def make_env(self):
        g = ba_graph(20, 2, seed=1)
        return SubgraphEnv(g, 4, size_embed, GoalPoint(np.array([2.0, 2.0]), 1.0))

    def test_zero_steps(self):
        env = self.make_env()
        traj = rollout(env, scripted_policy(env), 0, seed=1)
        assert len(traj.Xs) == 1 and traj.best_state.X.tolist() == traj.Xs[0].tolist()

    def test_scripted_policy_approaches_goal(self):
        env = self.make_env()
        for seed in range(5):
            traj = rollout(env, scripted_policy(env), 15, seed=seed)
            assert traj.distances[-1] <= traj.distances[0]
            assert min(traj.distances) == traj.distances[traj.best_index]

    def test_deterministic(self):
        env = self.make_env()
        rand = lambda s, A, B, rng: A[rng.integers(len(A))]  # noqa: E731
        a = rollout(env, rand, 10, seed=4)
        b = rollout(env, rand, 10, seed=4)
        assert [x.tolist() for x in a.Xs] == [x.tolist() for x in b.Xs] and a.actions == b.actions

    def test_dead_state_ends_episode(self, triangle):
        env = SubgraphEnv(triangle, 3, size_embed, GoalPoint(np.zeros(2)))
        traj = rollout(env, None, 5, seed=0)
        assert not traj.complete and len(traj.Xs) == 1

    def test_jsonl(self, tmp_path):
        env = self.make_env()
        traj = rollout(env, scripted_policy(env), 3, seed=0)
        path = tmp_path / "t.jsonl"
        traj.to_jsonl(path, env.g.labels, beta=2.0)
        recs = [json.loads(l) for l in path.read_text().splitlines()]
        assert [r["t"] for r in recs] == [0, 1, 2, 3]
        assert recs[0]["reward"] is None
        assert recs[1]["goal_distance"] == pytest.approx(2.0 * traj.distances[1])
