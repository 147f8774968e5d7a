"""scikit-learn style wrappers around the training functions.

Sequences are passed as ``(n_sequences, T)`` integer arrays of token ids (or as
:class:`Corpus` objects). Estimators that train networks also need the
:class:`Vocabulary` the ids refer to.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import baselines
from .config import TrainConfig
from .corpus import Corpus, Vocabulary
from .evaluation import KIND_BINS, duration_distribution, pitch_distribution
from .fusion import fusion_train, pretrain_trio
from .nets import sample_sequences


def check_sequences(X, vocab_size: int | None = None, T: int | None = None) -> np.ndarray:
    """Validate a batch of token sequences and return it as a 2-D int64 array."""
    if isinstance(X, Corpus):
        X = X.tokens
    arr = np.asarray(X)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"expected a non-empty 2-D array of token ids, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
            raise ValueError("token ids must be integers")
    arr = arr.astype(np.int64)
    if (arr < 1).any():
        raise ValueError("token ids must be >= 1 (0 is the reserved START id)")
    if vocab_size is not None and (arr >= vocab_size).any():
        raise ValueError(f"token id {int(arr.max())} out of range for vocabulary of size {vocab_size}")
    if T is not None and arr.shape[1] != T:
        raise ValueError(f"expected sequences of length {T}, got {arr.shape[1]}")
    return arr


def _as_corpus(X, label: str, vocabulary: Vocabulary | None) -> Corpus:
    if isinstance(X, Corpus):
        if vocabulary is not None and X.vocabulary != vocabulary:
            raise ValueError("corpus vocabulary differs from the estimator's vocabulary")
        return Corpus(label, X.tokens, X.vocabulary)
    if vocabulary is None:
        raise ValueError("a vocabulary is required when sequences are passed as arrays")
    return Corpus(label, check_sequences(X, vocabulary.size), vocabulary)


def _config(config: TrainConfig | None, T: int, random_state) -> TrainConfig:
    cfg = config if config is not None else TrainConfig()
    changes = {"T": T}
    if random_state is not None:
        changes["seed"] = int(random_state)
    return cfg.replace(**changes)


class FusionGAN(BaseEstimator):
    """Pre-train three generator/critic pairs and run fusion training.

    ``fit(X_A, X_B)`` learns; ``sample(n)`` draws from the fused generator
    (or from ``domain="A"`` / ``"B"``).
    """

    def __init__(self, config: TrainConfig | None = None, vocabulary: Vocabulary | None = None,
                 random_state: int | None = None):
        self.config = config
        self.vocabulary = vocabulary
        self.random_state = random_state

    def fit(self, X_A, X_B):
        a = _as_corpus(X_A, "A", self.vocabulary)
        b = _as_corpus(X_B, "B", a.vocabulary)
        if a.T != b.T:
            raise ValueError("both domains need the same sequence length")
        cfg = _config(self.config, a.T, self.random_state)
        rng = np.random.default_rng(cfg.seed)
        trio = pretrain_trio(a, b, cfg, rng)
        self.trio_, self.history_ = fusion_train(trio, rng)
        self.vocabulary_ = a.vocabulary
        self.n_features_in_ = a.T
        return self

    def sample(self, n: int, domain: str = "F", random_state=None) -> np.ndarray:
        check_is_fitted(self, "trio_")
        rng = np.random.default_rng(random_state)
        return sample_sequences(self.trio_.bundle(domain).generator, n, self.n_features_in_, rng)[0]


class SequenceGenerator(BaseEstimator):
    """Single-corpus generator: ``kind="MLE"`` (likelihood only) or ``"GAN"``
    (likelihood warm start plus the adversarial loop)."""

    def __init__(self, kind: str = "MLE", config: TrainConfig | None = None,
                 vocabulary: Vocabulary | None = None, random_state: int | None = None):
        self.kind = kind
        self.config = config
        self.vocabulary = vocabulary
        self.random_state = random_state

    def fit(self, X, y=None):
        corpus = _as_corpus(X, "F", self.vocabulary)
        cfg = _config(self.config, corpus.T, self.random_state)
        rng = np.random.default_rng(cfg.seed)
        if self.kind == "MLE":
            self.generator_ = baselines.mle_baseline(corpus, cfg, rng)
        elif self.kind == "GAN":
            self.generator_ = baselines.gan_baseline(corpus, cfg, rng).generator
        else:
            raise ValueError(f"kind must be 'MLE' or 'GAN', got {self.kind!r}")
        self.vocabulary_ = corpus.vocabulary
        self.n_features_in_ = corpus.T
        return self

    def sample(self, n: int, random_state=None) -> np.ndarray:
        check_is_fitted(self, "generator_")
        return sample_sequences(self.generator_, n, self.n_features_in_, np.random.default_rng(random_state))[0]


class IIDTokenSampler(BaseEstimator):
    """Context-free token sampler: ``kind="RM"`` draws uniformly over the observed
    tokens, ``kind="MC"`` by their observed frequencies."""

    def __init__(self, kind: str = "MC", vocabulary: Vocabulary | None = None):
        self.kind = kind
        self.vocabulary = vocabulary

    def fit(self, X, y=None):
        corpus = _as_corpus(X, "F", self.vocabulary)
        if self.kind not in ("RM", "MC"):
            raise ValueError(f"kind must be 'RM' or 'MC', got {self.kind!r}")
        self.corpus_ = corpus
        self.n_features_in_ = corpus.T
        return self

    def sample(self, n: int, random_state=None) -> np.ndarray:
        check_is_fitted(self, "corpus_")
        draw = baselines.rm_generate if self.kind == "RM" else baselines.mc_generate
        rng = np.random.default_rng(random_state)
        return draw(self.corpus_.vocabulary, self.corpus_, n, self.n_features_in_, rng)


class HistogramTransformer(TransformerMixin, BaseEstimator):
    """Per-sequence DD or NPD histograms, one row per input sequence."""

    def __init__(self, kind: str = "DD", vocabulary: Vocabulary | None = None, normalize: bool = False):
        self.kind = kind
        self.vocabulary = vocabulary
        self.normalize = normalize

    def fit(self, X, y=None):
        if self.kind not in KIND_BINS:
            raise ValueError(f"kind must be one of {sorted(KIND_BINS)}")
        if self.vocabulary is None:
            raise ValueError("HistogramTransformer needs a vocabulary")
        check_sequences(X, self.vocabulary.size)
        self.n_bins_ = KIND_BINS[self.kind]
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "n_bins_")
        X = check_sequences(X, self.vocabulary.size)
        extract = duration_distribution if self.kind == "DD" else pitch_distribution
        out = np.stack([extract(row, self.vocabulary).bins for row in X])
        if self.normalize:
            totals = out.sum(axis=1, keepdims=True)
            out = np.divide(out, totals, out=np.zeros_like(out), where=totals > 0)
        return out
