"""Three-domain adversarial training: the 15-term objective, the balance and
sandwich penalties, the six update rules and the alternating training loop."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .corpus import combine
from .evaluation import diff_ratio, duration_distribution, pitch_distribution
from .nets import (
    CriticParams,
    NumericError,
    adam_step,
    clip_parameters,
    critic_weighted_grad,
    sample_sequences,
)
from .pretrain import (
    ConvergenceMonitor,
    DomainBundle,
    _null_log,
    policy_gradient_step,
    pretrain_domain,
    rollout_q,
    score_batch,
)

SLOTS = ("real_A", "real_B", "gen_A", "gen_B", "gen_F")

# Sign of each slot's mean score in each critic's part of the objective.
CRITIC_SIGNS = {
    "A": {"real_A": 1.0, "real_B": -1.0, "gen_A": -1.0, "gen_B": -1.0, "gen_F": -1.0},
    "B": {"real_A": -1.0, "real_B": 1.0, "gen_A": -1.0, "gen_B": -1.0, "gen_F": -1.0},
    "F": {"real_A": 1.0, "real_B": 1.0, "gen_A": 1.0, "gen_B": 1.0, "gen_F": -1.0},
}


@dataclass
class BatchSet:
    real_A: np.ndarray
    real_B: np.ndarray
    gen_A: np.ndarray
    gen_B: np.ndarray
    gen_F: np.ndarray

    def __post_init__(self):
        sizes = {len(getattr(self, s)) for s in SLOTS}
        if len(sizes) != 1:
            raise ValueError(f"all five batch slots must have equal size, got {sizes}")

    def slot(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def mirrored(self) -> BatchSet:
        return BatchSet(self.real_B, self.real_A, self.gen_B, self.gen_A, self.gen_F)


@dataclass
class Trio:
    A: DomainBundle
    B: DomainBundle
    F: DomainBundle
    config: TrainConfig
    iteration: int = 0

    def __post_init__(self):
        labels = (self.A.label, self.B.label, self.F.label)
        if labels != ("A", "B", "F"):
            raise ValueError(f"trio labels must be A, B, F; got {labels}")
        vocab = self.A.corpus.vocabulary
        if any(b.corpus.vocabulary != vocab for b in (self.B, self.F)):
            raise ValueError("all bundles must share one vocabulary")
        if len({b.corpus.T for b in (self.A, self.B, self.F)}) != 1:
            raise ValueError("all bundles must share the sequence length T")

    def bundle(self, label: str) -> DomainBundle:
        return getattr(self, label)

    def with_bundle(self, bundle: DomainBundle) -> Trio:
        return dataclasses.replace(self, **{bundle.label: bundle})

    @property
    def critics(self) -> dict[str, CriticParams]:
        return {k: self.bundle(k).critic for k in "ABF"}


def draw_batches(trio: Trio, rng: np.random.Generator, batch_size: int | None = None) -> BatchSet:
    n = trio.config.batch_size if batch_size is None else batch_size
    T = trio.A.corpus.T

    def real(bundle):
        data = bundle.corpus.tokens
        return data[rng.choice(len(data), n, replace=len(data) < n)]

    def fake(bundle):
        return sample_sequences(bundle.generator, n, T, rng)[0]

    return BatchSet(real(trio.A), real(trio.B), fake(trio.A), fake(trio.B), fake(trio.F))


def _slot_means(critic: CriticParams, batches: BatchSet) -> dict[str, float]:
    return {s: float(score_batch(critic, batches.slot(s)).mean()) for s in SLOTS}


def total_objective(batches: BatchSet, critics: dict[str, CriticParams]) -> float:
    """Empirical value of the 15-term three-critic objective."""
    def m(label, slot):
        return float(score_batch(critics[label], batches.slot(slot)).mean())

    return (
        m("A", "real_A") - m("A", "real_B") - m("A", "gen_A") - m("A", "gen_B") - m("A", "gen_F")
        - m("B", "real_A") + m("B", "real_B") - m("B", "gen_A") - m("B", "gen_B") - m("B", "gen_F")
        + m("F", "real_A") + m("F", "real_B") + m("F", "gen_A") + m("F", "gen_B") - m("F", "gen_F")
    )


def critic_objective(label: str, batches: BatchSet, critic: CriticParams) -> float:
    """One critic's five-term share of :func:`total_objective`."""
    means = _slot_means(critic, batches)
    return sum(CRITIC_SIGNS[label][s] * means[s] for s in SLOTS)


def balance_penalty(gen_a: float, gen_b: float, real_a: float, real_b: float) -> float:
    return abs(gen_a - gen_b) + abs(real_a - real_b)


def balance_penalty_F(batches: BatchSet, critic_F: CriticParams) -> float:
    """|mean D_F(G_A) - mean D_F(G_B)| + |mean D_F(X_A) - mean D_F(X_B)|."""
    m = _slot_means(critic_F, batches)
    return balance_penalty(m["gen_A"], m["gen_B"], m["real_A"], m["real_B"])


def sandwich_penalty(own_real: float, fused: float, other_real: float) -> float:
    """|a - f| + |f - b|; equals |a - b| exactly when f lies between a and b."""
    return abs(own_real - fused) + abs(fused - other_real)


def sandwich_penalty_source(label: str, batches: BatchSet, critic: CriticParams) -> float:
    own, other = ("real_A", "real_B") if label == "A" else ("real_B", "real_A")
    m = _slot_means(critic, batches)
    return sandwich_penalty(m[own], m["gen_F"], m[other])


def sandwich_penalty_A(batches: BatchSet, critic_A: CriticParams) -> float:
    return sandwich_penalty_source("A", batches, critic_A)


def sandwich_penalty_B(batches: BatchSet, critic_B: CriticParams) -> float:
    return sandwich_penalty_source("B", batches, critic_B)


def critic_update_objective(label: str, batches: BatchSet, critic: CriticParams, lambda_balance: float) -> float:
    """The scalar each critic ascends: its objective share minus the weighted penalty."""
    if label == "F":
        penalty = balance_penalty_F(batches, critic)
    else:
        penalty = sandwich_penalty_source(label, batches, critic)
    return critic_objective(label, batches, critic) - lambda_balance * penalty


def _slot_coefficients(label: str, means: dict[str, float], lambda_balance: float) -> dict[str, float]:
    """d(update objective)/d(mean score of each slot); |.| has subgradient 0 at 0."""
    coef = dict(CRITIC_SIGNS[label])
    lam = lambda_balance
    if label == "F":
        s_gen = np.sign(means["gen_A"] - means["gen_B"])
        s_real = np.sign(means["real_A"] - means["real_B"])
        coef["gen_A"] -= lam * s_gen
        coef["gen_B"] += lam * s_gen
        coef["real_A"] -= lam * s_real
        coef["real_B"] += lam * s_real
    else:
        own, other = ("real_A", "real_B") if label == "A" else ("real_B", "real_A")
        s_af = np.sign(means[own] - means["gen_F"])
        s_fb = np.sign(means["gen_F"] - means[other])
        coef[own] -= lam * s_af
        coef["gen_F"] -= lam * (s_fb - s_af)
        coef[other] += lam * s_fb
    return coef


def critic_update_grad(label: str, batches: BatchSet, critic: CriticParams, lambda_balance: float) -> CriticParams:
    """Exact gradient of :func:`critic_update_objective` w.r.t. the critic parameters."""
    coef = _slot_coefficients(label, _slot_means(critic, batches), lambda_balance)
    tokens = np.concatenate([batches.slot(s) for s in SLOTS])
    weights = np.concatenate([np.full(len(batches.slot(s)), coef[s] / len(batches.slot(s))) for s in SLOTS])
    return critic_weighted_grad(critic, tokens, weights)


def _update_critic(trio: Trio, label: str, batches: BatchSet) -> tuple[Trio, dict]:
    cfg = trio.config
    bundle = trio.bundle(label)
    if label == "F":
        penalty = balance_penalty_F(batches, bundle.critic)
    else:
        penalty = sandwich_penalty_source(label, batches, bundle.critic)
    objective = critic_objective(label, batches, bundle.critic)
    if not (math.isfinite(objective) and math.isfinite(penalty)):
        raise NumericError(f"critic {label} objective is not finite")
    grad = critic_update_grad(label, batches, bundle.critic, cfg.lambda_balance)
    critic, opt = adam_step(bundle.critic, grad, "ascend", bundle.critic_opt, cfg.alpha_critic)
    bundle = bundle.replace(critic=clip_parameters(critic), critic_opt=opt)
    return trio.with_bundle(bundle), {"objective": objective, "penalty": penalty}


def update_DF(trio: Trio, batches: BatchSet) -> tuple[Trio, dict]:
    """Ascend D_F's share of the objective minus lambda * balance penalty, then clip."""
    return _update_critic(trio, "F", batches)


def update_DA(trio: Trio, batches: BatchSet) -> tuple[Trio, dict]:
    return _update_critic(trio, "A", batches)


def update_DB(trio: Trio, batches: BatchSet) -> tuple[Trio, dict]:
    return _update_critic(trio, "B", batches)


def generator_reward_signs(label: str, convention: str = "minmax") -> dict[str, float]:
    """Terminal-reward weights on each critic's score for generator ``label``.

    Under ``minmax`` the generator descends the total objective; ``paper-literal``
    ascends it, which negates every weight.
    """
    if label == "F":
        signs = {"A": 1.0, "B": 1.0, "F": 1.0}
    else:
        signs = {"A": 1.0, "B": 1.0, "F": -1.0}
    if convention == "paper-literal":
        signs = {k: -v for k, v in signs.items()}
    elif convention != "minmax":
        raise ValueError(f"unknown sign convention {convention!r}")
    return signs


def terminal_scorer(critics: dict[str, CriticParams], signs: dict[str, float]):
    def score(tokens: np.ndarray) -> np.ndarray:
        total = np.zeros(len(tokens))
        for k, s in signs.items():
            if s != 0.0:
                total += s * score_batch(critics[k], tokens)
        return total
    return score


def generator_reward_fn(trio: Trio, label: str):
    cfg = trio.config
    scorer = terminal_scorer(trio.critics, generator_reward_signs(label, cfg.generator_sign_convention))
    gen = trio.bundle(label).generator
    return lambda seqs, rng: rollout_q(gen, scorer, seqs, cfg.n_rollouts, rng)


def _update_generator(trio: Trio, label: str, rng: np.random.Generator) -> tuple[Trio, dict]:
    bundle, diag = policy_gradient_step(trio.bundle(label), trio.config.batch_size,
                                        generator_reward_fn(trio, label), trio.config, rng)
    return trio.with_bundle(bundle), diag


def update_GF(trio: Trio, rng: np.random.Generator) -> tuple[Trio, dict]:
    """Policy-gradient step on G_F rewarded by D_A + D_B + D_F."""
    return _update_generator(trio, "F", rng)


def update_GA(trio: Trio, rng: np.random.Generator) -> tuple[Trio, dict]:
    """Policy-gradient step on G_A rewarded by D_A + D_B - D_F."""
    return _update_generator(trio, "A", rng)


def update_GB(trio: Trio, rng: np.random.Generator) -> tuple[Trio, dict]:
    return _update_generator(trio, "B", rng)


@dataclass
class FusionHistory:
    rows: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, key: str) -> list:
        return [r.get(key) for r in self.rows]


def held_out_diff_ratio(trio: Trio, rng: np.random.Generator, n: int) -> dict[str, float]:
    """EUD Diff/Ratio of fresh G_F samples against both corpora, on DD and NPD."""
    vocab = trio.A.corpus.vocabulary
    gen = sample_sequences(trio.F.generator, n, trio.A.corpus.T, rng)[0]
    out = {}
    for kind, extract in (("DD", duration_distribution), ("NPD", pitch_distribution)):
        hA = extract(trio.A.corpus.tokens, vocab).normalized()
        hB = extract(trio.B.corpus.tokens, vocab).normalized()
        hG = extract(gen, vocab).normalized()
        d, r = diff_ratio(hA, hB, hG, "EUD")
        out[f"diff_{kind}"], out[f"ratio_{kind}"] = d, r
    return out


def fusion_train(trio: Trio, rng: np.random.Generator, iters: int | None = None,
                 log=_null_log, on_iteration=None) -> tuple[Trio, FusionHistory]:
    """Alternate the F, A and B update blocks until ``iters`` or convergence.

    Each iteration: ``critic_steps_per_gen_step`` D_F updates then one G_F update,
    the same for A, then for B. Every critic step draws a fresh :class:`BatchSet`.
    A history row records the penalty each critic's last step saw before updating
    (``step_penalty_*``), then the total objective and penalties on a diagnostic batch
    of ``max(batch_size, eval_samples)`` per slot; Diff/Ratio on held-out G_F samples every ``eval_every`` iterations.
    Non-finite diagnostics raise :class:`NumericError` after ``on_iteration`` has
    seen the last good trio.
    """
    cfg = trio.config
    iters = cfg.fusion_iters if iters is None else iters
    history = FusionHistory()
    monitor = ConvergenceMonitor(cfg.convergence_window, cfg.convergence_tol)
    blocks = (("F", update_DF, update_GF), ("A", update_DA, update_GA), ("B", update_DB, update_GB))
    for _ in range(iters):
        it = trio.iteration + 1
        row = {"iteration": it}
        for label, update_critic, update_generator in blocks:
            for _ in range(cfg.critic_steps_per_gen_step):
                batches = draw_batches(trio, rng)
                trio, diag = update_critic(trio, batches)
            trio, gdiag = update_generator(trio, rng)
            row[f"critic_objective_{label}"] = diag["objective"]
            row[f"step_penalty_{label}"] = diag["penalty"]
            row[f"mean_reward_{label}"] = gdiag["mean_q"]
        batches = draw_batches(trio, rng, max(cfg.batch_size, cfg.eval_samples))
        row["total_objective"] = total_objective(batches, trio.critics)
        row["balance_penalty_F"] = balance_penalty_F(batches, trio.F.critic)
        row["sandwich_penalty_A"] = sandwich_penalty_A(batches, trio.A.critic)
        row["sandwich_penalty_B"] = sandwich_penalty_B(batches, trio.B.critic)
        if cfg.eval_samples > 0 and (it == 1 or it % cfg.eval_every == 0 or it == iters):
            row.update(held_out_diff_ratio(trio, rng, cfg.eval_samples))
        trio = dataclasses.replace(trio, iteration=it)
        bad = [k for k, v in row.items() if isinstance(v, float) and not math.isfinite(v)]
        if bad:
            raise NumericError(f"non-finite diagnostics at fusion iteration {it}: {bad}")
        history.rows.append(row)
        for key, value in row.items():
            if key != "iteration":
                log(it, "fusion", "trio", key, value)
        if on_iteration is not None:
            on_iteration(trio, row)
        if monitor.update(row["total_objective"]):
            break
    return trio, history


def pretrain_trio(corpus_a, corpus_b, config: TrainConfig, rng: np.random.Generator, log=_null_log):
    """Pre-train A and B fully and F (on X_A + X_B) through the classifier stage."""
    bundle_a, _ = pretrain_domain("A", corpus_a, config, rng, adversarial=True, log=log)
    bundle_b, _ = pretrain_domain("B", corpus_b, config, rng, adversarial=True, log=log)
    bundle_f, _ = pretrain_domain("F", combine(corpus_a, corpus_b), config, rng,
                                  adversarial=config.adversarial_pretrain_F, log=log)
    return Trio(bundle_a, bundle_b, bundle_f, config)
