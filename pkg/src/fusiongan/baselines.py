"""Comparison systems: random mixing (RM), Monte-Carlo sampling (MC), plain MLE,
a single-domain GAN on the mixed corpus, and RL with exchanged critics."""

from __future__ import annotations

import enum

import numpy as np

from .config import TrainConfig
from .corpus import Corpus, Vocabulary
from .nets import GeneratorParams
from .pretrain import (
    DomainBundle,
    _null_log,
    new_bundle,
    mle_pretrain,
    policy_gradient_step,
    pretrain_domain,
    rollout_q,
)


class BaselineKind(str, enum.Enum):
    RM = "RM"
    MC = "MC"
    MLE = "MLE"
    GAN = "GAN"
    RL = "RL"


def _token_counts(vocab: Vocabulary, corpus: Corpus) -> np.ndarray:
    if corpus.vocabulary != vocab:
        raise ValueError("corpus does not use the given vocabulary")
    return np.bincount(corpus.tokens.ravel(), minlength=vocab.size).astype(np.float64)


def rm_generate(vocab: Vocabulary, combined: Corpus, n: int, T: int, rng: np.random.Generator) -> np.ndarray:
    """Every token observed in the combined corpus is equally likely, i.i.d. per step."""
    support = np.flatnonzero(_token_counts(vocab, combined))
    if len(support) == 0:
        raise ValueError("empty token support")
    return support[rng.integers(len(support), size=(n, T))]


def mc_generate(vocab: Vocabulary, combined: Corpus, n: int, T: int, rng: np.random.Generator) -> np.ndarray:
    """Tokens drawn i.i.d. from the combined corpus' empirical token frequencies."""
    counts = _token_counts(vocab, combined)
    if counts.sum() == 0:
        raise ValueError("empty corpus")
    return rng.choice(vocab.size, size=(n, T), p=counts / counts.sum())


def mle_baseline(combined: Corpus, config: TrainConfig, rng: np.random.Generator, log=_null_log) -> GeneratorParams:
    bundle = new_bundle("F", combined, config, rng)
    bundle, _ = mle_pretrain(bundle, config.pretrain_mle_epochs, config, rng, log)
    return bundle.generator


def gan_baseline(combined: Corpus, config: TrainConfig, rng: np.random.Generator, log=_null_log) -> DomainBundle:
    bundle, _ = pretrain_domain("F", combined, config, rng, adversarial=True, log=log)
    return bundle


def rl_baseline(bundle_a: DomainBundle, bundle_b: DomainBundle, config: TrainConfig, rng: np.random.Generator,
                iters: int | None = None, log=_null_log) -> tuple[GeneratorParams, GeneratorParams]:
    """Continue policy-gradient training of G_A against the frozen D_B and of G_B against D_A."""
    iters = config.pretrain_adv_iters if iters is None else iters
    critic_a, critic_b = bundle_a.critic, bundle_b.critic
    for it in range(1, iters + 1):
        for name in ("A", "B"):
            bundle = bundle_a if name == "A" else bundle_b
            critic = critic_b if name == "A" else critic_a
            gen = bundle.generator
            reward = lambda seqs, r, g=gen, c=critic: rollout_q(g, c, seqs, config.n_rollouts, r)  # noqa: E731
            bundle, diag = policy_gradient_step(bundle, config.batch_size, reward, config, rng)
            log(it, "rl", name, "mean_q", diag["mean_q"])
            if name == "A":
                bundle_a = bundle
            else:
                bundle_b = bundle
    return bundle_a.generator, bundle_b.generator
