"""Training configuration with every tunable left open by the method description."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

SIGN_CONVENTIONS = ("minmax", "paper-literal")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    T: int = field(default=32, metadata={"help": "fixed sequence length"})
    batch_size: int = field(default=16, metadata={"help": "sequences per minibatch slot"})
    embed_dim: int = field(default=32, metadata={"help": "generator/critic embedding width E"})
    hidden_size: int = field(default=64, metadata={"help": "generator LSTM hidden size H"})
    critic_widths: tuple = field(default=(1, 2, 3, 5), metadata={"help": "critic filter widths"})
    critic_filters: int = field(default=32, metadata={"help": "feature maps per filter width"})
    init_scale: float = field(default=0.05, metadata={"help": "uniform init half-width"})
    alpha_mle: float = field(default=1e-2, metadata={"help": "Adam step size for MLE pre-training"})
    alpha_gen: float = field(default=1e-3, metadata={"help": "Adam step size for policy-gradient steps"})
    alpha_critic: float = field(default=5e-4, metadata={"help": "Adam step size for critic updates"})
    n_rollouts: int = field(default=16, metadata={"help": "Monte-Carlo completions per prefix"})
    pretrain_mle_epochs: int = field(default=20, metadata={"help": "MLE epochs per domain"})
    pretrain_classifier_steps: int = field(default=50, metadata={"help": "initial classifier steps"})
    pretrain_adv_iters: int = field(default=20, metadata={"help": "adversarial pre-training iteration cap"})
    fusion_iters: int = field(default=300, metadata={"help": "fusion iteration cap"})
    critic_steps_per_gen_step: int = field(default=3, metadata={"help": "critic updates per generator update"})
    lambda_balance: float = field(default=1.0, metadata={"help": "weight of the balance penalties"})
    clip_bound: float = field(default=0.01, metadata={"help": "critic weight clip bound c"})
    baseline_decay: float = field(default=0.9, metadata={"help": "EMA decay of the reward baseline"})
    convergence_window: int = field(default=10, metadata={"help": "moving-average window for convergence"})
    convergence_tol: float = field(default=1e-3, metadata={"help": "relative change that counts as converged; 0 disables"})
    eval_samples: int = field(default=200, metadata={"help": "held-out G_F samples for per-iteration Diff/Ratio"})
    eval_every: int = field(default=10, metadata={"help": "iterations between Diff/Ratio evaluations"})
    generator_sign_convention: str = field(default="minmax", metadata={"help": "minmax | paper-literal"})
    adversarial_pretrain_F: bool = field(default=False, metadata={"help": "also run the adversarial loop for F"})
    seed: int = field(default=0, metadata={"help": "master RNG seed"})

    def __post_init__(self):
        self.critic_widths = tuple(int(w) for w in self.critic_widths)
        self.validate()

    def validate(self) -> None:
        positive = ("T", "batch_size", "embed_dim", "hidden_size", "critic_filters", "n_rollouts",
                    "critic_steps_per_gen_step", "convergence_window", "eval_every")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("alpha_mle", "alpha_gen", "alpha_critic", "clip_bound", "init_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        for name in ("pretrain_mle_epochs", "pretrain_classifier_steps", "pretrain_adv_iters",
                     "fusion_iters", "lambda_balance", "convergence_tol", "eval_samples"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not 0 <= self.baseline_decay < 1:
            raise ConfigError("baseline_decay must be in [0, 1)")
        if not self.critic_widths or min(self.critic_widths) < 1:
            raise ConfigError("critic_widths must be positive")
        if max(self.critic_widths) > self.T:
            raise ConfigError("widest critic filter exceeds T")
        if self.generator_sign_convention not in SIGN_CONVENTIONS:
            raise ConfigError(f"generator_sign_convention must be one of {SIGN_CONVENTIONS}")

    def replace(self, **changes) -> TrainConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["critic_widths"] = list(self.critic_widths)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def coerce(name: str, raw: str, cls=TrainConfig):
    """Parse a ``--set key=value`` string into the field's type."""
    by_name = {f.name: f for f in fields(cls)}
    if name not in by_name:
        raise ConfigError(f"unknown config key: {name}")
    default = by_name[name].default
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(x) for x in raw.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse {name}={raw!r}") from None
    return raw


def load_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data
