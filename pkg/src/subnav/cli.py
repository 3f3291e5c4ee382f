"""Command-line pipeline: split -> solve -> gen-dataset -> train-encoder ->
train-agent -> evaluate, plus baseline, export-embedding and report."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import problems
from .agent import navigate_test, train_agent, write_training_log
from .baselines import (PruneError, gcomb_fit, gcomb_prune, gnn_rank_prune, gnn_threshold_prune,
                        train_vertex_classifier, ClassifierConfig)
from .config import ConfigError, load_config
from .encoder import (Embedder, GenerationError, SubgraphDataset, compute_goal, dataset_embeddings,
                      generate_dataset, train_encoder)
from .env import GoalPoint, SubgraphEnv, induce_subgraph
from .graph import (GraphParseError, GraphValidationError, SplitError, compute_features, load_edge_list,
                    split_edges, write_edge_list)
from .heuristics import lift, solve
from .metrics import MetricsRow, aggregate, evaluate_pruned, pruned_fractions, write_metrics
from .nn import load_checkpoint, save_checkpoint
from .problems import objective, with_cascade_weights

log = logging.getLogger("subnav")

EXIT_OK, EXIT_ERROR, EXIT_PARSE, EXIT_VALIDATION, EXIT_GENERATION, EXIT_MISSING = 0, 1, 3, 4, 5, 6

PRODUCERS = {
    "train.edges": "split", "test.edges": "split",
    "solution-train.json": "solve --which train", "solution-test.json": "solve --which test",
    "dataset.jsonl": "gen-dataset", "encoder.json": "train-encoder", "goal.json": "train-encoder",
    "qnet.json": "train-agent", "subgraphs.json": "evaluate", "trajectories.jsonl": "evaluate",
}


class MissingArtifact(RuntimeError):
    pass


class Context:
    def __init__(self, cfg, out_dir, jobs):
        self.cfg, self.out, self.jobs = cfg, Path(out_dir), jobs
        self.out.mkdir(parents=True, exist_ok=True)

    def path(self, name, must_exist=True):
        p = self.out / name
        if must_exist and not p.exists():
            raise MissingArtifact(f"{p} is missing; run `subnav {PRODUCERS.get(name, '?')}` first")
        return p

    def graph(self, which):
        if which == "full":
            if not self.cfg.graph:
                raise ConfigError("config key 'graph' is not set")
            path = Path(self.cfg.graph)
            if not path.exists():
                raise MissingArtifact(f"input graph {path} not found")
        else:
            path = self.path(f"{which}.edges")
        g = load_edge_list(path, directed=self.cfg.directed, weighted=self.cfg.weighted)
        return with_cascade_weights(g) if self.cfg.problem == "IM" else g

    def problem(self):
        return self.cfg.problem_kind()

    def solution(self, which, g):
        doc = json.loads(self.path(f"solution-{which}.json").read_text())
        return [g.index_of(v) for v in doc["vertices"]], doc["score"]

    def encoder(self):
        enc, meta = load_checkpoint(self.path("encoder.json"))
        goal_doc = json.loads(self.path("goal.json").read_text())
        return enc, meta, GoalPoint(np.array(goal_doc["g_star"]), goal_doc["beta"])

    def features(self, g, meta=None):
        if meta is not None and self.cfg.feature_stats == "reuse":
            return compute_features(g, self.cfg.problem, stats=(meta["feature_mins"], meta["feature_maxs"]))
        return compute_features(g, self.cfg.problem)


def _json_dump(obj, path):
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


# -- commands -------------------------------------------------------------------

def cmd_split(ctx, args):
    g = ctx.graph("full")
    if ctx.cfg.problem == "IM":  # split the raw graph; cascade weights are derived per side
        g = load_edge_list(ctx.cfg.graph, directed=ctx.cfg.directed, weighted=ctx.cfg.weighted)
    train, test = split_edges(g, ctx.cfg.train_fraction, ctx.cfg.split_seed)
    write_edge_list(train, ctx.path("train.edges", False))
    write_edge_list(test, ctx.path("test.edges", False))
    _json_dump({"train": {"n": train.n, "m": train.n_edges}, "test": {"n": test.n, "m": test.n_edges},
                "train_fraction": ctx.cfg.train_fraction, "seed": ctx.cfg.split_seed}, ctx.path("split.json", False))
    log.info("split: train %s, test %s", train, test)


def cmd_solve(ctx, args):
    g = ctx.graph(args.which)
    b = args.budget or ctx.cfg.b
    sol = solve(ctx.problem(), g, b, seed=ctx.cfg.seed, n_rr=ctx.cfg.n_rr_or_none)
    score = objective(ctx.problem(), g, sol.vertices, seed=ctx.cfg.seed, jobs=ctx.jobs)
    doc = sol.to_json(g, ctx.problem())
    doc.update(score=score, solver_score=float(sol.score), seed=ctx.cfg.seed)
    _json_dump(doc, ctx.path(f"solution-{args.which}.json", False))
    log.info("solve %s: score %.6g", args.which, score)


def cmd_gen_dataset(ctx, args):
    g = ctx.graph("train")
    B, score = ctx.solution("train", g)
    cfg = ctx.cfg
    ds = generate_dataset(g, ctx.problem(), B, score, cfg.n_per_class * cfg.K, cfg.M, cfg.K, seed=cfg.seed,
                          b=cfg.b, n_rr=cfg.n_rr_or_none)
    ds.save(ctx.path("dataset.jsonl", False), g)
    log.info("dataset: %s per class", ds.class_counts().tolist())


def cmd_train_encoder(ctx, args):
    g = ctx.graph("train")
    ds = SubgraphDataset.load(ctx.path("dataset.jsonl"), g)
    feats = ctx.features(g)
    enc, history = train_encoder(ds, feats, ctx.cfg.encoder_config(), seed=ctx.cfg.seed)
    goal = compute_goal(enc, ds, feats, beta=ctx.cfg.beta)
    save_checkpoint(ctx.path("encoder.json", False), enc, "encoder",
                    {"feature_mins": feats.mins.tolist(), "feature_maxs": feats.maxs.tolist(),
                     "feature_columns": list(feats.columns)})
    _json_dump({"g_star": goal.g_star.tolist(), "beta": goal.beta}, ctx.path("goal.json", False))
    with open(ctx.path("encoder_log.csv", False), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "loss"])
        w.writerows([i, repr(h)] for i, h in enumerate(history))


def cmd_train_agent(ctx, args):
    g = ctx.graph("train")
    enc, meta, goal = ctx.encoder()
    B, _ = ctx.solution("train", g)
    env = SubgraphEnv(g, ctx.cfg.M, Embedder(enc, ctx.features(g)), goal, solution=B)
    qnet, logs, _ = train_agent(env, ctx.cfg.agent_config(), seed=ctx.cfg.seed)
    save_checkpoint(ctx.path("qnet.json", False), qnet, "qnet")
    write_training_log(ctx.path("agent_log.csv", False), logs)


def _test_setup(ctx):
    g = ctx.graph("test")
    if not ctx.path("solution-test.json", False).exists():
        raise MissingArtifact(f"{ctx.out / 'solution-test.json'} is missing; run `subnav solve --which test` first")
    _, full_score = ctx.solution("test", g)
    return g, full_score


def cmd_evaluate(ctx, args):
    g, full_score = _test_setup(ctx)
    cfg = ctx.cfg
    label = Path(cfg.graph).stem if cfg.graph else "graph"
    if args.method == "identity":
        row = evaluate_pruned(ctx.problem(), g, g, cfg.b, graph=label, method="identity", seed=cfg.seed,
                              full_score=full_score, n_rr=cfg.n_rr_or_none)
        write_metrics(ctx.path("metrics.csv", False), [row])
        return
    enc, meta, goal = ctx.encoder()
    qnet, _ = load_checkpoint(ctx.path("qnet.json"))
    env = SubgraphEnv(g, cfg.M, Embedder(enc, ctx.features(g, meta)), goal)
    episodes = navigate_test(env, qnet, cfg.T_test, cfg.test_episodes, seed=cfg.seed)
    rows, subs = [], []
    traj_path = ctx.path("trajectories.jsonl", False)
    traj_path.write_text("")
    for i, ep in enumerate(episodes):
        t0 = time.perf_counter()
        row = evaluate_pruned(ctx.problem(), g, ep.best_subgraph, cfg.b, graph=label, method="lense",
                              seed=cfg.seed, full_score=full_score, n_rr=cfg.n_rr_or_none)
        row.runtime_s = ep.seconds + (time.perf_counter() - t0)
        rows.append(row)
        subs.append({"episode": i, "seed": ep.seed, "X": [int(g.labels[v]) for v in ep.best_X],
                     "best_step": ep.trajectory.best_index,
                     "initial_distance": ep.distances[0], "final_distance": ep.distances[-1]})
        ep.trajectory.to_jsonl(traj_path, g.labels, beta=goal.beta)
    write_metrics(ctx.path("episodes.csv", False), rows)
    write_metrics(ctx.path("metrics.csv", False), [aggregate(rows)])
    _json_dump({"episodes": subs}, ctx.path("subgraphs.json", False))


def _lense_subgraphs(ctx, g):
    doc = json.loads(ctx.path("subgraphs.json").read_text())
    return [induce_subgraph(g, np.sort([g.index_of(v) for v in ep["X"]])) for ep in doc["episodes"]]


def cmd_baseline(ctx, args):
    cfg = ctx.cfg
    train = ctx.graph("train")
    test, full_score = _test_setup(ctx)
    B, _ = ctx.solution("train", train)
    label = Path(cfg.graph).stem if cfg.graph else "graph"
    f_train = ctx.features(train)
    f_test = compute_features(test, cfg.problem, stats=(f_train.mins, f_train.maxs)) \
        if cfg.feature_stats == "reuse" else compute_features(test, cfg.problem)
    keep_k = args.keep_k
    if keep_k is None:
        keep_k = int(round(np.mean([s.n for s in _lense_subgraphs(ctx, test)])))
    rows = []
    clf, _ = train_vertex_classifier(train, f_train, B, ClassifierConfig(cfg.hidden, cfg.lr, cfg.classifier_epochs),
                                     seed=cfg.seed)
    prunes = [("gnn-r", lambda: gnn_rank_prune(clf, test, f_test, keep_k)),
              ("gnn-t", lambda: gnn_threshold_prune(clf, test, f_test)),
              ("gcomb-p", lambda: gcomb_prune(gcomb_fit(train, ctx.problem(), cfg.b, cfg.gcomb_L, seed=cfg.seed,
                                                        n_rr=cfg.n_rr_or_none), test, cfg.b))]
    for name, prune in prunes:
        t0 = time.perf_counter()
        try:
            pruned = prune()
        except PruneError as exc:
            log.warning("%s pruned everything (%s); reporting ratio 0", name, exc)
            rows.append(MetricsRow(label, cfg.problem, name, cfg.b, 0.0, 0.0, 1.0, 1.0,
                                   time.perf_counter() - t0, cfg.seed))
            continue
        row = evaluate_pruned(ctx.problem(), test, pruned, cfg.b, graph=label, method=name, seed=cfg.seed,
                              full_score=full_score, n_rr=cfg.n_rr_or_none)
        row.runtime_s += time.perf_counter() - t0
        rows.append(row)
    write_metrics(ctx.path("baseline_metrics.csv", False), rows)


def pca_2d(x):
    """Project rows onto the top two principal axes (sign fixed by largest loading)."""
    centred = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    axes = vt[:2]
    flip = np.sign(axes[np.arange(len(axes)), np.argmax(np.abs(axes), axis=1)])
    axes = axes * flip[:, None]
    return centred @ axes.T, x.mean(axis=0), axes


def cmd_export_embedding(ctx, args):
    g = ctx.graph("train")
    enc, meta, goal = ctx.encoder()
    ds = SubgraphDataset.load(ctx.path("dataset.jsonl"), g)
    emb = dataset_embeddings(enc, ds, ctx.features(g, meta))
    xy, mean, axes = pca_2d(emb)
    with open(ctx.path("embedding.csv", False), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "label"])
        w.writerows([repr(float(a)), repr(float(b)), int(s.label)] for (a, b), s in zip(xy, ds.samples))
    traj = ctx.out / "trajectories.jsonl"
    if traj.exists():
        with open(traj) as src, open(ctx.path("trajectory_pca.csv", False), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "t", "x", "y", "goal_distance"])
            episode = -1
            for line in src:
                rec = json.loads(line)
                episode += rec["t"] == 0
                p = (np.asarray(rec["embedding"]) - mean) @ axes.T
                w.writerow([episode, rec["t"], repr(float(p[0])), repr(float(p[1])), repr(rec["goal_distance"])])


def cmd_report(ctx, args):
    cfg = ctx.cfg
    g = ctx.graph("test")
    subs = _lense_subgraphs(ctx, g)
    label = Path(cfg.graph).stem if cfg.graph else "graph"
    budgets = args.budgets or cfg.budgets
    rows = []
    for b in budgets:
        if b > g.n:
            continue
        full = solve(ctx.problem(), g, b, seed=cfg.seed, n_rr=cfg.n_rr_or_none)
        full_score = objective(ctx.problem(), g, full.vertices, seed=cfg.seed, jobs=ctx.jobs)
        per = [evaluate_pruned(ctx.problem(), g, s, b, graph=label, method="lense", seed=cfg.seed,
                               full_score=full_score, n_rr=cfg.n_rr_or_none) for s in subs]
        row = aggregate(per)
        row.ratio = float(np.median([p.ratio for p in per])) if args.median else row.ratio
        rows.append(row)
    write_metrics(ctx.path("multibudget.csv", False), rows)


COMMANDS = {
    "split": cmd_split, "solve": cmd_solve, "gen-dataset": cmd_gen_dataset, "train-encoder": cmd_train_encoder,
    "train-agent": cmd_train_agent, "evaluate": cmd_evaluate, "baseline": cmd_baseline,
    "export-embedding": cmd_export_embedding, "report": cmd_report,
}


def build_parser():
    p = argparse.ArgumentParser(prog="subnav", description=__doc__)
    p.add_argument("--config", help="key = value config file (supports include = preset:<name>)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1, help="threads for Monte Carlo loops (results unchanged)")
    p.add_argument("--out-dir", default="runs/default", help="artifact directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name == "solve":
            sp.add_argument("--which", choices=("train", "test", "full"), default="train")
            sp.add_argument("--budget", type=int)
        if name == "evaluate":
            sp.add_argument("--method", choices=("lense", "identity"), default="lense")
        if name == "baseline":
            sp.add_argument("--keep-k", type=int, help="GNN-R vertex count (default: mean learned subgraph size)")
        if name == "report":
            sp.add_argument("--budgets", type=lambda s: [int(x) for x in s.split(",")])
            sp.add_argument("--median", action="store_true", help="report the median ratio instead of the mean")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    torch.set_num_threads(1)
    try:
        cfg = load_config(args.config, seed=args.seed)
        ctx = Context(cfg, args.out_dir, args.jobs)
        COMMANDS[args.command](ctx, args)
    except (GraphParseError, ConfigError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (GraphValidationError, SplitError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GenerationError as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
