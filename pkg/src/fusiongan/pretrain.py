"""Single-domain pre-training: MLE warm start, classifier training on generated
negatives, Monte-Carlo rollout rewards and the adversarial policy-gradient loop."""

from __future__ import annotations

import dataclasses
import io
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from .config import TrainConfig
from .corpus import Corpus
from .nets import (
    AdamState,
    CriticParams,
    GeneratorParams,
    NumericError,
    adam_step,
    clip_parameters,
    complete_prefixes,
    critic_scores,
    critic_weighted_grad,
    grad_nll,
    grad_weighted_logprob,
    init_critic,
    init_generator,
    mean_nll,
    sample_sequences,
)

SCORE_CHUNK = 2048

Scorer = Callable[[np.ndarray], np.ndarray]


@dataclass
class DomainBundle:
    label: str
    corpus: Corpus
    generator: GeneratorParams
    critic: CriticParams
    gen_opt: AdamState
    critic_opt: AdamState
    baseline: float | None = None

    def replace(self, **changes) -> DomainBundle:
        return dataclasses.replace(self, **changes)


class TrainingLog:
    """Tab-separated ``iter phase domain metric value`` rows, kept in memory and
    optionally streamed to a file."""

    def __init__(self, stream: io.TextIOBase | None = None):
        self.rows: list[tuple[int, str, str, str, float]] = []
        self.stream = stream

    def __call__(self, it: int, phase: str, domain: str, metric: str, value: float) -> None:
        row = (int(it), phase, domain, metric, float(value))
        self.rows.append(row)
        if self.stream is not None:
            self.stream.write(self.format_row(row) + "\n")

    @staticmethod
    def format_row(row) -> str:
        it, phase, domain, metric, value = row
        return f"{it}\t{phase}\t{domain}\t{metric}\t{value!r}"

    def values(self, phase: str, metric: str, domain: str | None = None) -> list[float]:
        return [r[4] for r in self.rows if r[1] == phase and r[3] == metric and (domain is None or r[2] == domain)]


def _null_log(*_args) -> None:
    pass


class ConvergenceMonitor:
    """Converged once the moving average over ``window`` values moves by less than
    ``tol`` (relative) between consecutive iterations. ``tol == 0`` never converges."""

    def __init__(self, window: int = 10, tol: float = 1e-3):
        self.window = window
        self.tol = tol
        self.values: deque[float] = deque(maxlen=window)
        self.previous: float | None = None

    def update(self, value: float) -> bool:
        self.values.append(value)
        if len(self.values) < self.window:
            return False
        avg = sum(self.values) / len(self.values)
        prev, self.previous = self.previous, avg
        if prev is None or self.tol <= 0:
            return False
        return abs(avg - prev) <= self.tol * max(abs(prev), 1e-12)


def new_bundle(label: str, corpus: Corpus, config: TrainConfig, rng: np.random.Generator) -> DomainBundle:
    V = corpus.vocabulary.size
    gen = init_generator(V, config.embed_dim, config.hidden_size, rng, config.init_scale)
    critic = init_critic(V, config.embed_dim, config.critic_widths, config.critic_filters, rng,
                         config.clip_bound, config.init_scale)
    return DomainBundle(label, corpus, gen, critic, AdamState.zeros(gen), AdamState.zeros(critic))


def score_batch(critic: CriticParams, tokens: np.ndarray) -> np.ndarray:
    if len(tokens) <= SCORE_CHUNK:
        return critic_scores(critic, tokens)
    return np.concatenate([critic_scores(critic, tokens[i:i + SCORE_CHUNK])
                           for i in range(0, len(tokens), SCORE_CHUNK)])


def _as_scorer(critic) -> Scorer:
    if isinstance(critic, CriticParams):
        return lambda tokens: score_batch(critic, tokens)
    return critic


def mle_pretrain(bundle: DomainBundle, epochs: int, config: TrainConfig, rng: np.random.Generator,
                 log=_null_log) -> tuple[DomainBundle, list[float]]:
    """Descend mean sequence NLL over shuffled minibatches.

    The returned trace holds the full-corpus NLL before training followed by one
    value per epoch.
    """
    data = bundle.corpus.tokens
    gen = bundle.generator
    opt = AdamState.zeros(gen)
    trace = [mean_nll(gen, data)]
    log(0, "mle", bundle.label, "nll", trace[0])
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(data))
        for start in range(0, len(data), config.batch_size):
            batch = data[order[start:start + config.batch_size]]
            gen, opt = adam_step(gen, grad_nll(gen, batch), "descend", opt, config.alpha_mle)
        nll = mean_nll(gen, data)
        if not math.isfinite(nll):
            raise NumericError(f"MLE pre-training of {bundle.label} diverged at epoch {epoch}")
        trace.append(nll)
        log(epoch, "mle", bundle.label, "nll", nll)
    return bundle.replace(generator=gen), trace


def generate_negatives(bundle: DomainBundle, n: int, rng: np.random.Generator, T: int | None = None) -> np.ndarray:
    T = bundle.corpus.T if T is None else T
    if n == 0:
        return np.zeros((0, T), dtype=np.int64)
    return sample_sequences(bundle.generator, n, T, rng)[0]


def classifier_loss(critic: CriticParams, positives: np.ndarray, negatives: np.ndarray) -> float:
    """Mean logistic loss with the raw critic scalar as the logit (real = 1)."""
    s_pos = score_batch(critic, positives)
    s_neg = score_batch(critic, negatives)
    losses = np.concatenate([np.logaddexp(0.0, -s_pos), np.logaddexp(0.0, s_neg)])
    return float(losses.mean())


def classifier_step(critic: CriticParams, opt: AdamState, positives: np.ndarray, negatives: np.ndarray,
                    lr: float) -> tuple[CriticParams, AdamState]:
    tokens = np.concatenate([positives, negatives])
    labels = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    scores = score_batch(critic, tokens)
    coef = (expit(scores) - labels) / len(tokens)
    critic, opt = adam_step(critic, critic_weighted_grad(critic, tokens, coef), "descend", opt, lr)
    return clip_parameters(critic), opt


def train_classifier(bundle: DomainBundle, positives: np.ndarray, negatives: np.ndarray, steps: int,
                     config: TrainConfig, rng: np.random.Generator | None = None,
                     batch_size: int | None = None) -> tuple[DomainBundle, list[float]]:
    """Logistic-loss training of the critic; clipping after every step.

    With ``batch_size`` set, each step draws that many rows from each set.
    The trace records the loss on the step's batch before the update.
    """
    if len(positives) == 0 or len(negatives) == 0:
        raise ValueError("train_classifier needs non-empty positive and negative sets")
    critic, opt = bundle.critic, bundle.critic_opt
    trace = []
    for _ in range(steps):
        pos, neg = positives, negatives
        if batch_size is not None:
            pos = positives[rng.choice(len(positives), min(batch_size, len(positives)), replace=False)]
            neg = negatives[rng.choice(len(negatives), min(batch_size, len(negatives)), replace=False)]
        loss = classifier_loss(critic, pos, neg)
        if not math.isfinite(loss):
            raise NumericError(f"classifier loss diverged for domain {bundle.label}")
        trace.append(loss)
        critic, opt = classifier_step(critic, opt, pos, neg, config.alpha_critic)
    return bundle.replace(critic=critic, critic_opt=opt), trace


def rollout_q(gen: GeneratorParams, critic, seqs: np.ndarray, n_rollouts: int,
              rng: np.random.Generator) -> np.ndarray:
    """Per-step rewards for each sequence.

    For t < T, Q_t is the mean critic score over ``n_rollouts`` completions of the
    prefix s_1..s_t sampled from ``gen``; Q_T is the score of the sequence itself.
    ``critic`` is a :class:`CriticParams` or any callable mapping (M, T) tokens to
    (M,) scores. Accepts one sequence (T,) or a batch (N, T).
    """
    if n_rollouts < 1:
        raise ValueError("n_rollouts must be >= 1")
    score = _as_scorer(critic)
    seqs = np.asarray(seqs, dtype=np.int64)
    single = seqs.ndim == 1
    seqs = np.atleast_2d(seqs)
    N, T = seqs.shape
    q = np.empty((N, T))
    q[:, -1] = score(seqs)
    if T > 1:
        done = complete_prefixes(gen, seqs, n_rollouts, rng)
        q[:, :-1] = score(done.reshape(-1, T)).reshape(T - 1, n_rollouts, N).mean(axis=1).T
    return q[0] if single else q


def policy_gradient_step(bundle: DomainBundle, batch_size: int, reward_fn: Callable, config: TrainConfig,
                         rng: np.random.Generator, baseline: float | None = None) -> tuple[DomainBundle, dict]:
    """One REINFORCE ascent step with per-step rewards ``reward_fn(tokens, rng) -> (N, T)``.

    The baseline subtracted from every reward is the bundle's exponential moving
    average of mean Q unless ``baseline`` is given explicitly.
    """
    seqs, _ = sample_sequences(bundle.generator, batch_size, bundle.corpus.T, rng)
    q = np.asarray(reward_fn(seqs, rng), dtype=np.float64)
    mean_q = float(q.mean())
    if not math.isfinite(mean_q):
        raise NumericError(f"non-finite rewards for domain {bundle.label}")
    if baseline is None:
        baseline = mean_q if bundle.baseline is None else bundle.baseline
    grad = grad_weighted_logprob(bundle.generator, seqs, q - baseline)
    gen, opt = adam_step(bundle.generator, grad, "ascend", bundle.gen_opt, config.alpha_gen)
    ema = mean_q if bundle.baseline is None else config.baseline_decay * bundle.baseline + (1 - config.baseline_decay) * mean_q
    return bundle.replace(generator=gen, gen_opt=opt, baseline=ema), {"mean_q": mean_q, "baseline": baseline}


def critic_gap(bundle: DomainBundle, rng: np.random.Generator, n: int) -> float:
    """|mean score(real) - mean score(generated)| on ``n`` rows of each."""
    real = bundle.corpus.tokens[rng.choice(len(bundle.corpus), min(n, len(bundle.corpus)), replace=False)]
    fake = generate_negatives(bundle, n, rng)
    return abs(float(score_batch(bundle.critic, real).mean() - score_batch(bundle.critic, fake).mean()))


def adversarial_pretrain(bundle: DomainBundle, iters: int, config: TrainConfig, rng: np.random.Generator,
                         log=_null_log) -> tuple[DomainBundle, dict]:
    """Alternate rollout-rewarded generator steps with classifier updates on fresh
    negatives until the critic objective's moving average settles or ``iters`` runs out."""
    monitor = ConvergenceMonitor(config.convergence_window, config.convergence_tol)
    traces = {"critic_loss": [], "mean_q": [], "iterations": 0}
    data = bundle.corpus.tokens
    for it in range(1, iters + 1):
        critic = bundle.critic
        reward = lambda seqs, r: rollout_q(bundle.generator, critic, seqs, config.n_rollouts, r)  # noqa: E731
        bundle, diag = policy_gradient_step(bundle, config.batch_size, reward, config, rng)
        losses = []
        for _ in range(config.critic_steps_per_gen_step):
            negatives = generate_negatives(bundle, config.batch_size, rng)
            positives = data[rng.choice(len(data), min(config.batch_size, len(data)), replace=False)]
            bundle, trace = train_classifier(bundle, positives, negatives, 1, config)
            losses.extend(trace)
        loss = float(np.mean(losses))
        traces["critic_loss"].append(loss)
        traces["mean_q"].append(diag["mean_q"])
        traces["iterations"] = it
        log(it, "adversarial", bundle.label, "critic_loss", loss)
        log(it, "adversarial", bundle.label, "mean_q", diag["mean_q"])
        if monitor.update(loss):
            break
    return bundle, traces


def pretrain_domain(label: str, corpus: Corpus, config: TrainConfig, rng: np.random.Generator,
                    adversarial: bool = True, log=_null_log) -> tuple[DomainBundle, dict]:
    """MLE warm start, negative sampling and classifier training, then (optionally)
    the adversarial loop."""
    bundle = new_bundle(label, corpus, config, rng)
    bundle, nll_trace = mle_pretrain(bundle, config.pretrain_mle_epochs, config, rng, log)
    negatives = generate_negatives(bundle, len(corpus), rng)
    bundle, clf_trace = train_classifier(bundle, corpus.tokens, negatives, config.pretrain_classifier_steps,
                                         config, rng, batch_size=config.batch_size)
    for i, v in enumerate(clf_trace, 1):
        log(i, "classifier", label, "loss", v)
    traces = {"nll": nll_trace, "classifier_loss": clf_trace}
    if adversarial:
        bundle, adv = adversarial_pretrain(bundle, config.pretrain_adv_iters, config, rng, log)
        traces.update(adv)
    bundle = bundle.replace(gen_opt=AdamState.zeros(bundle.generator),
                            critic_opt=AdamState.zeros(bundle.critic), baseline=None)
    return bundle, traces
