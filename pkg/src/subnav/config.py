"""Flat ``key = value`` pipeline configuration with ``include`` support.

``include = preset:facebook-mvc`` pulls a shipped preset; ``include = other.cfg``
pulls a file relative to the including one. Later keys win.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

PRESET_DIR = Path(__file__).parent / "presets"


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    graph: str = ""
    directed: bool = False
    weighted: bool = False
    problem: str = "MVC"
    b: int = 100
    M: int = 300
    K: int = 4
    n_per_class: int = 100
    train_fraction: float = 0.3
    split_seed: int = 0
    feature_stats: str = "reuse"
    # encoder
    hidden: int = 30
    out_dim: int = 10
    pool_ratio: float = 0.8
    tau: float = 0.1
    lr: float = 1e-3
    batch: int = 128
    epochs: int = 100
    negatives: int = 6
    patience: int = 15
    # agent
    T_train: int = 2000
    episodes: int = 10
    alpha: float = 0.0
    c: int = 20
    beta: float = 50.0
    gamma: float = 0.995
    eps_decay: float = 0.9995
    eps_min: float = 0.01
    buffer: int = 25_000
    rho: float = 0.0025
    T_test: int = 2000
    test_episodes: int = 10
    # objectives
    n_sim: int = 1000
    n_rr: int = 0
    # baselines / reporting
    classifier_epochs: int = 300
    gcomb_L: int = 5
    budgets: list = field(default_factory=lambda: [1, 10, 25, 50, 75, 100])
    seed: int = 0

    @property
    def n_rr_or_none(self):
        return self.n_rr or None

    def problem_kind(self):
        from .problems import ProblemKind

        return ProblemKind(self.problem, n_sim=self.n_sim, seed=self.seed)

    def encoder_config(self):
        from .encoder import EncoderConfig

        return EncoderConfig(self.hidden, self.out_dim, self.pool_ratio, self.tau, self.lr, self.batch,
                             self.epochs, self.negatives, self.patience)

    def agent_config(self):
        from .agent import AgentConfig

        return AgentConfig(M=self.M, T_train=self.T_train, episodes=self.episodes, alpha=self.alpha, c=self.c,
                           beta=self.beta, gamma=self.gamma, lr=self.lr, batch=self.batch,
                           eps_decay=self.eps_decay, eps_min=self.eps_min, buffer=self.buffer, rho=self.rho,
                           T_test=self.T_test)

    def dumps(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_TYPES = {f.name: f.type for f in fields(Config)}


def _convert(key, raw):
    kind = _TYPES[key]
    try:
        if kind == "bool":
            low = raw.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return low in ("1", "true", "yes")
        if kind == "int":
            value = float(raw.replace("_", ""))
            if value != int(value):
                raise ValueError(raw)
            return int(value)
        if kind == "float":
            return float(raw)
        if kind == "list":
            return [int(x) for x in raw.replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def read_pairs(path, _seen=None):
    path = Path(path)
    _seen = _seen or set()
    if path.resolve() in _seen:
        raise ConfigError(f"include cycle at {path}")
    _seen = _seen | {path.resolve()}
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    pairs = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "include":
            target = PRESET_DIR / f"{value[7:]}.cfg" if value.startswith("preset:") else path.parent / value
            pairs.update(read_pairs(target, _seen))
            continue
        if key not in _TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        pairs[key] = value
    return pairs


def load_config(path=None, **overrides):
    pairs = read_pairs(path) if path else {}
    values = {k: _convert(k, v) for k, v in pairs.items()}
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = Config(**values)
    if cfg.problem not in ("MVC", "BMC", "IM"):
        raise ConfigError(f"problem must be MVC, BMC or IM, got {cfg.problem!r}")
    if cfg.feature_stats not in ("reuse", "refit"):
        raise ConfigError("feature_stats must be 'reuse' or 'refit'")
    return cfg


def presets():
    return sorted(p.stem for p in PRESET_DIR.glob("*.cfg"))
