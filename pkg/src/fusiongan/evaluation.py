"""Duration / pitch-class histograms, the two distribution distances, the
triangle Diff/Ratio scores and the listening-test fusion level."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import N_DURATION_BINS, N_PITCH_CLASSES, REST, Vocabulary

KIND_BINS = {"DD": N_DURATION_BINS, "NPD": N_PITCH_CLASSES}
METRICS = ("EUD", "EM")
DEFAULT_REFERENCE_MASS = 1e4


@dataclass(frozen=True)
class Histogram:
    """Binned distribution. ``kind`` is DD, NPD, or any other label for ad-hoc
    histograms (whose length is then unconstrained)."""

    kind: str
    bins: np.ndarray
    normalization: str = "counts"

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.float64)
        object.__setattr__(self, "bins", bins)
        if bins.ndim != 1 or len(bins) == 0:
            raise ValueError("histogram bins must be a non-empty vector")
        if self.kind in KIND_BINS and len(bins) != KIND_BINS[self.kind]:
            raise ValueError(f"{self.kind} histogram needs {KIND_BINS[self.kind]} bins, got {len(bins)}")
        if (bins < 0).any() or not np.isfinite(bins).all():
            raise ValueError("histogram entries must be finite and non-negative")
        if self.normalization not in ("counts", "probability"):
            raise ValueError("normalization must be 'counts' or 'probability'")
        if self.normalization == "probability" and abs(bins.sum() - 1.0) > 1e-9:
            raise ValueError("probability histogram must sum to 1")

    @property
    def total(self) -> float:
        return float(self.bins.sum())

    @property
    def is_empty(self) -> bool:
        return self.total == 0.0

    def normalized(self) -> Histogram:
        if self.is_empty:
            raise ValueError(f"cannot normalize an all-zero {self.kind} histogram")
        return Histogram(self.kind, self.bins / self.total, "probability")

    def scaled(self, mass: float) -> Histogram:
        """Probability form rescaled to total ``mass`` (reported as counts)."""
        return Histogram(self.kind, self.normalized().bins * mass, "counts")


def duration_distribution(samples: np.ndarray, vocab: Vocabulary) -> Histogram:
    """Count duration bins over every token, rests included."""
    tokens = np.asarray(samples, dtype=np.int64).ravel()
    _check_decodable(tokens, vocab)
    bins = np.bincount(vocab.duration_bins[tokens], minlength=N_DURATION_BINS)
    return Histogram("DD", bins)


def pitch_distribution(samples: np.ndarray, vocab: Vocabulary) -> Histogram:
    """Count pitch classes over non-rest tokens."""
    tokens = np.asarray(samples, dtype=np.int64).ravel()
    _check_decodable(tokens, vocab)
    pitches = vocab.pitches[tokens]
    pitches = pitches[pitches != REST]
    return Histogram("NPD", np.bincount(pitches % 12, minlength=N_PITCH_CLASSES))


def _check_decodable(tokens: np.ndarray, vocab: Vocabulary) -> None:
    bad = (tokens < 1) | (tokens >= vocab.size)
    if bad.any():
        raise ValueError(f"undecodable token {int(tokens[bad][0])} for vocabulary of size {vocab.size}")


def _check_compatible(h1: Histogram, h2: Histogram) -> None:
    if h1.kind != h2.kind or len(h1.bins) != len(h2.bins):
        raise ValueError(f"histogram kinds differ: {h1.kind}[{len(h1.bins)}] vs {h2.kind}[{len(h2.bins)}]")
    if h1.normalization != h2.normalization:
        raise ValueError("histograms must share a normalization")


def euclidean_distance(h1: Histogram, h2: Histogram) -> float:
    _check_compatible(h1, h2)
    return float(np.linalg.norm(h1.bins - h2.bins))


def emd_1d(h1: Histogram, h2: Histogram, rtol: float = 1e-9) -> float:
    """Wasserstein-1 between equal-mass histograms on unit-spaced bins: the L1
    distance between their cumulative sums."""
    _check_compatible(h1, h2)
    m1, m2 = h1.total, h2.total
    if abs(m1 - m2) > rtol * max(m1, m2, 1.0):
        raise ValueError(f"earth mover distance needs equal masses, got {m1} and {m2}")
    return float(np.abs(np.cumsum(h1.bins - h2.bins)).sum())


def distance(h1: Histogram, h2: Histogram, metric: str) -> float:
    if metric == "EUD":
        return euclidean_distance(h1, h2)
    if metric == "EM":
        return emd_1d(h1, h2)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def diff_ratio(hA: Histogram, hB: Histogram, hG: Histogram, metric: str) -> tuple[float, float]:
    """Diff = d(A,G) + d(B,G) - d(A,B) and Ratio = (d(A,G) + d(B,G)) / d(A,B)."""
    d_ab = distance(hA, hB, metric)
    if d_ab == 0.0:
        raise ValueError("Ratio undefined: the two reference histograms coincide")
    d_ag = distance(hA, hG, metric)
    d_bg = distance(hB, hG, metric)
    if np.array_equal(hG.bins, hA.bins) or np.array_equal(hG.bins, hB.bins):
        # exact degenerate triangle, kept free of rounding
        return 0.0, 1.0
    return d_ag + d_bg - d_ab, (d_ag + d_bg) / d_ab


@dataclass(frozen=True)
class ListeningCounts:
    jazz: float
    folk: float
    mixture: float
    neither: float

    def __post_init__(self):
        values = (self.jazz, self.folk, self.mixture, self.neither)
        if any(v < 0 for v in values):
            raise ValueError("listening counts must be non-negative")
        if sum(values) == 0:
            raise ValueError("listening counts are all zero")


def fusion_level(counts: ListeningCounts) -> float:
    """1 - (|jazz - folk| + neither) / (jazz + folk + mixture + neither)."""
    total = counts.jazz + counts.folk + counts.mixture + counts.neither
    return 1.0 - (abs(counts.jazz - counts.folk) + counts.neither) / total


def evaluate_system(gen_samples: np.ndarray, corpus_a, corpus_b, system: str = "G",
                    reference_mass: float = DEFAULT_REFERENCE_MASS) -> dict:
    """Diff/Ratio of a generated sample set for {EUD, EM} x {DD, NPD}.

    All three histograms are put in probability form and rescaled to
    ``reference_mass`` so sample-set sizes do not leak into the distances.
    """
    vocab = corpus_a.vocabulary
    if corpus_b.vocabulary != vocab:
        raise ValueError("corpora must share a vocabulary")
    gen_samples = np.atleast_2d(np.asarray(gen_samples, dtype=np.int64))
    histograms = {}
    rows = []
    for kind, extract in (("DD", duration_distribution), ("NPD", pitch_distribution)):
        raw = {
            "A": extract(corpus_a.tokens, vocab),
            "B": extract(corpus_b.tokens, vocab),
            system: extract(gen_samples, vocab),
        }
        histograms[kind] = raw
        scaled = {k: h.scaled(reference_mass) for k, h in raw.items()}
        for metric in METRICS:
            d, r = diff_ratio(scaled["A"], scaled["B"], scaled[system], metric)
            rows.append({"system": system, "metric": metric, "histogram_kind": kind,
                         "diff": d, "ratio": r, "n_samples": int(len(gen_samples))})
    return {"rows": rows, "histograms": histograms}


def write_report(report: dict, out_dir) -> list[Path]:
    """Write ``report.json`` plus one ``hist_<set>.csv`` (kind,bin,value) per sample set."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "report.json"]
    paths[0].write_text(json.dumps(report["rows"], indent=2, sort_keys=True) + "\n", encoding="utf-8")
    names = list(next(iter(report["histograms"].values())))
    for name in names:
        path = out_dir / f"hist_{name}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "bin", "value"])
            for kind, hists in report["histograms"].items():
                for i, v in enumerate(hists[name].bins):
                    writer.writerow([kind, i, repr(float(v))])
        paths.append(path)
    return paths
