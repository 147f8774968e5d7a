import numpy as np
import pytest

from fusiongan.config import TrainConfig
from fusiongan.corpus import Corpus, Vocabulary, harmonize, synth_corpus
from fusiongan.nets import init_critic, init_generator

FD_STEP = 1e-5
FD_FLOOR = 1e-7  # below this magnitude both gradients count as zero


def fd_gradient(f, params):
    """Central finite differences of scalar f over every coordinate of a ParamSet."""
    flat = params.flat()
    out = np.zeros_like(flat)
    for i in range(len(flat)):
        up, down = flat.copy(), flat.copy()
        up[i] += FD_STEP
        down[i] -= FD_STEP
        out[i] = (f(params.from_flat(up)) - f(params.from_flat(down))) / (2 * FD_STEP)
    return out


def max_rel_error(analytic, numeric):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), FD_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale))


def tiny_vocab(n_notes: int) -> Vocabulary:
    return Vocabulary([(60 + i, i) for i in range(n_notes)])


def tiny_generator(V=5, E=3, H=4, seed=0, scale=0.5):
    return init_generator(V, E, H, np.random.default_rng(seed), scale=scale)


def tiny_critic(V=5, E=3, widths=(1, 2, 3), F=2, seed=1, scale=0.5, clip_bound=None):
    return init_critic(V, E, widths, F, np.random.default_rng(seed), clip_bound=clip_bound, scale=scale)


def tiny_config(**kw) -> TrainConfig:
    base = dict(T=6, batch_size=4, embed_dim=3, hidden_size=4, critic_widths=(1, 2), critic_filters=2,
                n_rollouts=2, pretrain_mle_epochs=1, pretrain_classifier_steps=2, pretrain_adv_iters=1,
                fusion_iters=2, eval_samples=8, eval_every=1)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def synth_pair():
    a = synth_corpus("arpeggio", 40, 8, seed=1, domain_label="A")
    b = synth_corpus("stepwise", 40, 8, seed=2, domain_label="B")
    return tuple(harmonize(a, b))


def random_corpus(label, n, T, vocab, rng) -> Corpus:
    return Corpus(label, rng.integers(1, vocab.size, size=(n, T)), vocab)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
