"""Run configuration: model, training, and generator settings.

All randomness in a run flows from the single ``seed`` through named
substreams (init, shuffle, dropout, datagen). The config hash recorded in
outputs is the SHA-256 of the canonical JSON form.
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    d_emb: int = 50  # word-embedding width
    d_m: int = 50  # question model dimension (positional encoding width)
    d_q: int = 100  # question-RNN hidden size
    d_h: int = 50  # encoder node hidden size
    d_mp: int = 50  # message-passing GRU hidden size (per direction)
    d_c: int = 100  # gate pre-activation width
    d_g: int = 50  # graph-embedding width
    g_hidden: int = 50  # hidden width of the graph-embedding MLP
    n_heads: int = 5
    predictor_hidden: int = 100
    t_steps: int = 5
    dropout: float = 0.2
    gates: str = "logistic"  # "logistic" | "relu"
    qenc: str = "gru"  # "gru" | "lstm"
    wo_attr: bool = False
    wo_rela: bool = False
    wo_qf: bool = False
    base_obj: bool = False  # object encoder only (single-encoder baseline)
    max_answers: int = 2000

    @property
    def d_f(self):
        return self.d_g + self.d_emb

    @classmethod
    def reduced(cls, **overrides):
        """Reduced-dimension preset used for desk-scale experiments."""
        base = dict(
            d_emb=16,
            d_m=16,
            d_q=16,
            d_h=16,
            d_mp=16,
            d_c=32,
            d_g=16,
            g_hidden=16,
            n_heads=4,
            predictor_hidden=32,
            t_steps=2,
            dropout=0.0,
        )
        base.update(overrides)
        return cls(**base).validate()

    def validate(self):
        if self.d_m % 2 != 0:
            raise ConfigError(f"d_m must be even, got {self.d_m}")
        if self.d_emb > self.d_m:
            raise ConfigError("d_emb must not exceed d_m")
        if self.d_emb > self.d_h:
            raise ConfigError("d_emb must not exceed d_h (zero-padded init)")
        if self.d_f % self.n_heads != 0:
            raise ConfigError(
                f"n_heads {self.n_heads} must divide d_f {self.d_f}"
            )
        if self.gates not in ("logistic", "relu"):
            raise ConfigError(f"unknown gate kind {self.gates!r}")
        if self.qenc not in ("gru", "lstm"):
            raise ConfigError(f"unknown question encoder {self.qenc!r}")
        if self.t_steps < 0:
            raise ConfigError("t_steps must be >= 0")
        return self


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    base_lr: float = 1e-3
    optimizer: str = "adam"  # "adam" | "sgd"
    seed: int = 0
    stop_at_train_accuracy: float = 0.0  # 0 disables early stopping

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        return self


@dataclass
class GenConfig:
    seed: int = 0
    n_examples: int = 200
    object_vocab_size: int = 4
    predicate_vocab_size: int = 3
    attribute_vocab_size: int = 3
    nodes_range: tuple = (2, 2)
    edges_range: tuple = (1, 1)
    attrs_per_node_range: tuple = (0, 1)
    qtype_mix: dict = field(
        default_factory=lambda: {
            "object-query": 0.35,
            "relation-query": 0.3,
            "attribute-query": 0.25,
            "composite-why": 0.1,
        }
    )

    def validate(self):
        for name in ("nodes_range", "edges_range", "attrs_per_node_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ConfigError(f"{name} is not a valid range: ({lo}, {hi})")
        weights = list(self.qtype_mix.values())
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ConfigError("qtype_mix weights must be non-negative, not all zero")
        unknown = set(self.qtype_mix) - {
            "object-query",
            "relation-query",
            "attribute-query",
            "composite-why",
        }
        if unknown:
            raise ConfigError(f"unknown qtypes in mix: {sorted(unknown)}")
        return self


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    gen: GenConfig = field(default_factory=GenConfig)

    def validate(self):
        self.model.validate()
        self.train.validate()
        self.gen.validate()
        return self

    def to_dict(self):
        d = asdict(self)
        for key in ("nodes_range", "edges_range", "attrs_per_node_range"):
            d["gen"][key] = list(d["gen"][key])
        return d


def _apply_section(cfg_obj, section, raw, path):
    known = {f.name: f for f in fields(cfg_obj)}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown config key")
        if key.endswith("_range"):
            value = tuple(value)
        if key == "qtype_mix" and not isinstance(value, dict):
            raise ConfigError(f"{path}.{key}: expected a mapping")
        setattr(cfg_obj, key, value)


def load_run_config(path=None, overrides=None):
    """Build a RunConfig from an optional JSON file plus override dicts
    {"model": {...}, "train": {...}, "gen": {...}}. Unknown keys are
    rejected."""
    cfg = RunConfig()
    sources = []
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            try:
                sources.append(json.load(fh))
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if overrides:
        sources.append(overrides)
    for raw in sources:
        unknown = set(raw) - {"model", "train", "gen"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        for section in ("model", "train", "gen"):
            if section in raw:
                _apply_section(getattr(cfg, section), section, raw[section], section)
    return cfg.validate()


def config_hash(cfg):
    payload = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
