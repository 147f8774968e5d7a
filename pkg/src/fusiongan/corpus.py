"""Symbolic melody data model: note events, joint-token vocabulary, corpus I/O
and the two synthetic grammars used as stand-in source domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

REST = -1
START = 0
N_DURATION_BINS = 20
N_PITCH_CLASSES = 12
PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
DOMAINS = ("A", "B", "F")

CORPUS_MAGIC = "#fusiongan-corpus v1"


class CorpusFormatError(ValueError):
    """Malformed corpus or vocabulary file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, order=True)
class NoteEvent:
    pitch: int
    duration_units: int

    def __post_init__(self):
        if self.pitch != REST and not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch must be in [0, 127] or REST, got {self.pitch}")
        if self.duration_units < 1:
            raise ValueError(f"duration_units must be >= 1, got {self.duration_units}")

    @property
    def is_rest(self) -> bool:
        return self.pitch == REST


def quantize_duration(duration_units: int) -> int:
    """Map a duration in grid units to one of 20 bins, clipping long notes into bin 19."""
    if duration_units < 1:
        raise ValueError(f"duration must be a positive number of units, got {duration_units}")
    return min(int(duration_units) - 1, N_DURATION_BINS - 1)


def pitch_class(pitch: int) -> int:
    if pitch == REST:
        raise ValueError("REST has no pitch class")
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch out of MIDI range: {pitch}")
    return int(pitch) % 12


class Vocabulary:
    """Bijection between (pitch-or-REST, duration_bin) pairs and token ids.

    Id 0 is START; note pairs take ids 1..n in sorted (pitch, bin) order, so the
    assignment depends only on the set of pairs, never on the order they were seen.
    """

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        unique = sorted({(int(p), int(b)) for p, b in pairs})
        for p, b in unique:
            if p != REST and not 0 <= p <= 127:
                raise ValueError(f"invalid pitch {p} in vocabulary")
            if not 0 <= b < N_DURATION_BINS:
                raise ValueError(f"invalid duration bin {b} in vocabulary")
        self._pairs: list[tuple[int, int]] = unique
        self._ids = {pair: i + 1 for i, pair in enumerate(unique)}
        # per-id lookup tables, index 0 (START) holds sentinels
        self.pitches = np.array([REST] + [p for p, _ in unique], dtype=np.int64)
        self.duration_bins = np.array([-1] + [b for _, b in unique], dtype=np.int64)

    def __len__(self) -> int:
        return len(self._pairs) + 1

    @property
    def size(self) -> int:
        return len(self)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(self._pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._pairs == other._pairs

    def __hash__(self):
        return hash(tuple(self._pairs))

    def __repr__(self) -> str:
        return f"Vocabulary(size={self.size})"

    def token_for(self, pitch: int, duration_bin: int) -> int:
        try:
            return self._ids[(pitch, duration_bin)]
        except KeyError:
            raise KeyError(f"pair (pitch={pitch}, duration_bin={duration_bin}) not in vocabulary") from None

    def pair_for(self, token: int) -> tuple[int, int]:
        if token == START:
            raise ValueError("START token has no note pair")
        if not 0 < token < self.size:
            raise ValueError(f"token {token} out of range for vocabulary of size {self.size}")
        return self._pairs[token - 1]

    def merge(self, other: Vocabulary) -> Vocabulary:
        return Vocabulary(self._pairs + other._pairs)

    def save(self, path) -> None:
        lines = [f"{i + 1} {p} {b}" for i, (p, b) in enumerate(self._pairs)]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> Vocabulary:
        pairs = []
        for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not raw.strip():
                continue
            parts = raw.split()
            if len(parts) != 3:
                raise CorpusFormatError("expected 'id pitch duration_bin'", lineno)
            try:
                tok, p, b = (int(x) for x in parts)
            except ValueError:
                raise CorpusFormatError(f"non-integer field in {raw!r}", lineno) from None
            if tok != len(pairs) + 1:
                raise CorpusFormatError(f"expected id {len(pairs) + 1}, got {tok}", lineno)
            pairs.append((p, b))
        vocab = cls(pairs)
        if vocab.pairs != pairs:
            raise CorpusFormatError("vocabulary entries are not in canonical sorted order")
        return vocab


def build_vocabulary(corpora_events: Sequence[Sequence[NoteEvent]]) -> Vocabulary:
    pairs = {(e.pitch, quantize_duration(e.duration_units)) for events in corpora_events for e in events}
    if not pairs:
        raise ValueError("cannot build a vocabulary from zero events")
    return Vocabulary(pairs)


def encode_events(events: Sequence[NoteEvent], vocab: Vocabulary, T: int) -> np.ndarray:
    """Encode events into consecutive length-T windows; a trailing partial window is dropped.

    Returns an int array of shape (n_windows, T).
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    tokens = [vocab.token_for(e.pitch, quantize_duration(e.duration_units)) for e in events]
    n = len(tokens) // T
    return np.asarray(tokens[: n * T], dtype=np.int64).reshape(n, T)


def decode_tokens(tokens: Sequence[int], vocab: Vocabulary) -> list[tuple[int, int]]:
    """Token ids back to quantized (pitch, duration_bin) pairs."""
    return [vocab.pair_for(int(t)) for t in tokens]


@dataclass
class Corpus:
    domain_label: str
    tokens: np.ndarray
    vocabulary: Vocabulary = field(repr=False)

    def __post_init__(self):
        if self.domain_label not in DOMAINS:
            raise ValueError(f"domain_label must be one of {DOMAINS}, got {self.domain_label!r}")
        self.tokens = np.asarray(self.tokens, dtype=np.int64)
        if self.tokens.ndim != 2 or self.tokens.shape[0] == 0:
            raise ValueError("corpus must be a non-empty (n_sequences, T) array")
        bad = (self.tokens < 1) | (self.tokens >= self.vocabulary.size)
        if bad.any():
            row, col = np.argwhere(bad)[0]
            raise ValueError(f"invalid token {self.tokens[row, col]} at sequence {row}, position {col}")

    def __len__(self) -> int:
        return self.tokens.shape[0]

    @property
    def T(self) -> int:
        return self.tokens.shape[1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Corpus)
            and self.domain_label == other.domain_label
            and self.vocabulary == other.vocabulary
            and np.array_equal(self.tokens, other.tokens)
        )

    def relabel(self, vocab: Vocabulary) -> Corpus:
        """Re-encode onto a (super-set) vocabulary."""
        lut = np.array(
            [0] + [vocab.token_for(p, b) for p, b in self.vocabulary.pairs], dtype=np.int64
        )
        return Corpus(self.domain_label, lut[self.tokens], vocab)


def combine(corpus_a: Corpus, corpus_b: Corpus, label: str = "F") -> Corpus:
    """X_F = X_A + X_B on their shared vocabulary."""
    if corpus_a.vocabulary != corpus_b.vocabulary:
        raise ValueError("corpora must share a vocabulary; use harmonize() first")
    if corpus_a.T != corpus_b.T:
        raise ValueError("corpora must share the sequence length")
    return Corpus(label, np.concatenate([corpus_a.tokens, corpus_b.tokens]), corpus_a.vocabulary)


def harmonize(*corpora: Corpus) -> list[Corpus]:
    """Re-encode several corpora onto the union of their vocabularies."""
    vocab = corpora[0].vocabulary
    for c in corpora[1:]:
        vocab = vocab.merge(c.vocabulary)
    return [c.relabel(vocab) for c in corpora]


def vocab_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".vocab")


def save_corpus(corpus: Corpus, path, vocab_path=None) -> None:
    """Write the corpus file and its vocabulary (default: sibling ``<path>.vocab``)."""
    header = f"{CORPUS_MAGIC} T={corpus.T} V={corpus.vocabulary.size} domain={corpus.domain_label}"
    body = [" ".join(str(int(t)) for t in row) for row in corpus.tokens]
    Path(path).write_text("\n".join([header] + body) + "\n", encoding="utf-8")
    corpus.vocabulary.save(vocab_path or vocab_path_for(path))


def _parse_header(line: str) -> dict[str, str]:
    if not line.startswith(CORPUS_MAGIC):
        raise CorpusFormatError(f"missing header {CORPUS_MAGIC!r}", 1)
    fields = {}
    for item in line[len(CORPUS_MAGIC):].split():
        key, sep, value = item.partition("=")
        if not sep:
            raise CorpusFormatError(f"bad header field {item!r}", 1)
        fields[key] = value
    missing = {"T", "V", "domain"} - set(fields)
    if missing:
        raise CorpusFormatError(f"header lacks {sorted(missing)}", 1)
    return fields


def load_corpus(path, vocabulary: Vocabulary | None = None, vocab_path=None) -> Corpus:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise CorpusFormatError("empty file", 1)
    header = _parse_header(lines[0])
    try:
        T, V = int(header["T"]), int(header["V"])
    except ValueError:
        raise CorpusFormatError("T and V must be integers", 1) from None
    if vocabulary is None:
        vocabulary = Vocabulary.load(vocab_path or vocab_path_for(path))
    if vocabulary.size != V:
        raise CorpusFormatError(f"header V={V} but vocabulary has {vocabulary.size} entries", 1)
    rows = []
    for lineno, raw in enumerate(lines[1:], 2):
        if not raw.strip():
            continue
        try:
            row = [int(x) for x in raw.split()]
        except ValueError:
            raise CorpusFormatError(f"non-integer token in {raw[:40]!r}", lineno) from None
        if len(row) != T:
            raise CorpusFormatError(f"expected {T} tokens, got {len(row)}", lineno)
        for tok in row:
            if not 0 < tok < V:
                raise CorpusFormatError(f"token {tok} out of range [1, {V})", lineno)
        rows.append(row)
    if not rows:
        raise CorpusFormatError("corpus has no sequences", len(lines))
    return Corpus(header["domain"], np.array(rows, dtype=np.int64), vocabulary)


# -- synthetic grammars -------------------------------------------------------

MAJOR_SCALE = (0, 2, 4, 5, 7, 9, 11)
GRAMMARS = ("arpeggio", "stepwise")


def _arpeggio_events(rng: np.random.Generator, count: int) -> list[NoteEvent]:
    root = int(rng.integers(12))
    triad = {root, (root + 4) % 12, (root + 7) % 12}
    ladder = [p for p in range(48, 85) if p % 12 in triad]
    pos = int(rng.integers(len(ladder)))
    events = []
    for _ in range(count):
        duration = int(rng.geometric(0.5))
        if rng.random() < 0.05:
            events.append(NoteEvent(REST, duration))
            continue
        events.append(NoteEvent(ladder[pos], duration))
        pos += int(rng.choice((-1, 1)))
        if pos < 0:
            pos = 1
        elif pos >= len(ladder):
            pos = len(ladder) - 2
    return events


def _stepwise_events(rng: np.random.Generator, count: int) -> list[NoteEvent]:
    ladder = [p for p in range(55, 80) if p % 12 in MAJOR_SCALE]
    pos = int(rng.integers(len(ladder)))
    events = []
    for _ in range(count):
        events.append(NoteEvent(ladder[pos], int(rng.choice((2, 4, 8)))))
        pos += int(rng.choice((-2, -1, 1, 2)))
        if pos < 0:
            pos = -pos
        elif pos >= len(ladder):
            pos = 2 * (len(ladder) - 1) - pos
    return events


def synth_events(grammar: str, n: int, T: int, seed: int) -> list[list[NoteEvent]]:
    if grammar not in GRAMMARS:
        raise ValueError(f"unknown grammar {grammar!r}; expected one of {GRAMMARS}")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    make = _arpeggio_events if grammar == "arpeggio" else _stepwise_events
    return [make(rng, T) for _ in range(n)]


def synth_corpus(grammar: str, n: int, T: int = 32, seed: int = 0, domain_label: str = "A") -> Corpus:
    """Synthetic desk-scale domain.

    ``arpeggio``: a random major triad walked up and down over MIDI 48-84 with
    geometric (mean 2) durations and occasional rests, a short-note heavy shape.
    ``stepwise``: C-major scale steps of one or two degrees over MIDI 55-79 with
    durations in {2, 4, 8}.
    """
    melodies = synth_events(grammar, n, T, seed)
    vocab = build_vocabulary(melodies)
    tokens = np.stack([encode_events(m, vocab, T)[0] for m in melodies])
    return Corpus(domain_label, tokens, vocab)
