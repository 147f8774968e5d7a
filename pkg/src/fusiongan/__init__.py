"""Three-domain adversarial melody fusion: two source genres, one fused generator."""

from .config import ConfigError, TrainConfig
from .corpus import Corpus, NoteEvent, Vocabulary, load_corpus, save_corpus, synth_corpus
from .evaluation import Histogram, ListeningCounts, diff_ratio, evaluate_system, fusion_level
from .nets import NumericError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Corpus",
    "Histogram",
    "ListeningCounts",
    "NoteEvent",
    "NumericError",
    "TrainConfig",
    "Vocabulary",
    "diff_ratio",
    "evaluate_system",
    "fusion_level",
    "load_corpus",
    "save_corpus",
    "synth_corpus",
]
