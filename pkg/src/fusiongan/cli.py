"""Command-line entry point: ``fusiongan {synth,pretrain,fuse,generate,baseline,eval}``.

Exit status: 0 on success, 1 for usage or configuration errors, 2 when training
aborts on a numeric divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import baselines
from .checkpoint import load_bundle, load_generator, load_trio, save_bundle, save_trio
from .config import ConfigError, TrainConfig, coerce, load_json
from .corpus import (
    GRAMMARS,
    Corpus,
    CorpusFormatError,
    combine,
    harmonize,
    load_corpus,
    save_corpus,
    synth_corpus,
)
from .evaluation import evaluate_system, write_report
from .fusion import Trio, fusion_train
from .nets import NumericError, sample_sequences
from .pretrain import TrainingLog, pretrain_domain

log = logging.getLogger("fusiongan")

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2
CONFIG_VERSION = 1
DOMAIN_STREAM = {"A": 1, "B": 2, "F": 3, "fuse": 4, "baseline": 5, "generate": 6}


@dataclass
class RunConfig:
    """Everything a command needs: corpus and checkpoint paths plus the TrainConfig."""

    version: int = CONFIG_VERSION
    corpus_A: str | None = None
    corpus_B: str | None = None
    checkpoint_A: str | None = None
    checkpoint_B: str | None = None
    checkpoint_F: str | None = None
    out_dir: str = "runs"
    n_samples: int = 500
    train: TrainConfig = field(default_factory=TrainConfig)

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        data = dict(data)
        if data.get("version", CONFIG_VERSION) != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {data['version']}")
        train = data.pop("train", {})
        if not isinstance(train, dict):
            raise ConfigError("'train' must be an object")
        return cls(**data, train=TrainConfig.from_dict(train))

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "train"}
        d["train"] = self.train.to_dict()
        return d

    def apply_overrides(self, pairs: list[str]) -> RunConfig:
        top = {f.name: f for f in fields(self)}
        cfg, train = self, self.train
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            if not sep:
                raise ConfigError(f"--set expects key=value, got {pair!r}")
            key = key.removeprefix("train.")
            if key in top and key != "train":
                value = int(raw) if key in ("version", "n_samples") else raw
                cfg = dataclasses.replace(cfg, **{key: value})
            else:
                train = train.replace(**{key: coerce(key, raw)})
        return dataclasses.replace(cfg, train=train)


def resolve_config(path: str | None, overrides: list[str]) -> RunConfig:
    data = load_json(path) if path else {}
    try:
        return RunConfig.from_dict(data).apply_overrides(overrides or [])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), DOMAIN_STREAM[stream]])


def _run_dir(base: str, name: str) -> Path:
    stamp = _dt.datetime.now().strftime("%Y%m%dT%H%M%S-%f")
    path = Path(base) / f"{name}-{stamp}"
    path.mkdir(parents=True, exist_ok=False)
    return path


def _write_resolved(run_dir: Path, cfg: RunConfig) -> None:
    (run_dir / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def _load_corpora(cfg: RunConfig) -> dict[str, Corpus]:
    if not cfg.corpus_A or not cfg.corpus_B:
        raise ConfigError("config must name corpus_A and corpus_B")
    a, b = harmonize(load_corpus(cfg.corpus_A), load_corpus(cfg.corpus_B))
    a, b = dataclasses.replace(a, domain_label="A"), dataclasses.replace(b, domain_label="B")
    if a.T != cfg.train.T:
        raise ConfigError(f"corpus length T={a.T} differs from config T={cfg.train.T}")
    return {"A": a, "B": b, "F": combine(a, b)}


def _write_samples(path, tokens: np.ndarray, vocab, label: str = "F") -> None:
    save_corpus(Corpus(label, tokens, vocab), path)


# -- commands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    corpus = synth_corpus(args.grammar, args.n, args.T, args.seed, args.domain)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, args.out)
    print(args.out)
    return EXIT_OK


def cmd_pretrain(args) -> int:
    cfg = resolve_config(args.config, args.set)
    corpora = _load_corpora(cfg)
    run_dir = _run_dir(cfg.out_dir, f"pretrain-{args.domain}")
    _write_resolved(run_dir, cfg)
    adversarial = args.domain != "F" or cfg.train.adversarial_pretrain_F
    with (run_dir / "train.log").open("w", encoding="utf-8") as fh:
        bundle, _ = pretrain_domain(args.domain, corpora[args.domain], cfg.train, _rng(cfg.train.seed, args.domain),
                                    adversarial=adversarial, log=TrainingLog(fh))
    save_bundle(run_dir / "checkpoint.ckpt", bundle, cfg.train)
    print(run_dir)
    return EXIT_OK


def cmd_fuse(args) -> int:
    cfg = resolve_config(args.config, args.set)
    corpora = _load_corpora(cfg)
    paths = {k: getattr(cfg, f"checkpoint_{k}") for k in "ABF"}
    if not all(paths.values()):
        raise ConfigError("fuse needs checkpoint_A, checkpoint_B and checkpoint_F")
    bundles = {k: load_bundle(paths[k], corpora[k]) for k in "ABF"}
    trio = Trio(bundles["A"], bundles["B"], bundles["F"], cfg.train)
    run_dir = _run_dir(cfg.out_dir, "fuse")
    _write_resolved(run_dir, cfg)
    last_good = {"trio": trio}

    def remember(t, _row):
        last_good["trio"] = t

    with (run_dir / "history.tsv").open("w", encoding="utf-8") as fh:
        try:
            trio, history = fusion_train(trio, _rng(cfg.train.seed, "fuse"), log=TrainingLog(fh),
                                         on_iteration=remember)
        except NumericError:
            save_trio(run_dir / "last_good.ckpt", last_good["trio"])
            raise
    save_trio(run_dir / "trio.ckpt", trio)
    final = history.rows[-1] if history.rows else {}
    summary = {"iterations": trio.iteration, "final": final,
               "first": history.rows[0] if history.rows else {}}
    (run_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(run_dir)
    return EXIT_OK


def cmd_generate(args) -> int:
    gen, vocab, T = load_generator(args.checkpoint, args.domain)
    tokens, _ = sample_sequences(gen, args.n, T, _rng(args.seed, "generate"))
    _write_samples(args.out, tokens, vocab, args.domain)
    print(args.out)
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = resolve_config(args.config, args.set)
    corpora = _load_corpora(cfg)
    vocab, T, n = corpora["A"].vocabulary, cfg.train.T, cfg.n_samples
    rng = _rng(cfg.train.seed, "baseline")
    kind = baselines.BaselineKind(args.kind)
    if kind is baselines.BaselineKind.RM:
        tokens = baselines.rm_generate(vocab, corpora["F"], n, T, rng)
    elif kind is baselines.BaselineKind.MC:
        tokens = baselines.mc_generate(vocab, corpora["F"], n, T, rng)
    elif kind is baselines.BaselineKind.MLE:
        tokens = sample_sequences(baselines.mle_baseline(corpora["F"], cfg.train, rng), n, T, rng)[0]
    elif kind is baselines.BaselineKind.GAN:
        bundle = baselines.gan_baseline(corpora["F"], cfg.train, rng)
        tokens = sample_sequences(bundle.generator, n, T, rng)[0]
    else:
        pair = {}
        for k in "AB":
            path = getattr(cfg, f"checkpoint_{k}")
            pair[k] = (load_bundle(path, corpora[k]) if path
                       else pretrain_domain(k, corpora[k], cfg.train, _rng(cfg.train.seed, k))[0])
        gen_a, gen_b = baselines.rl_baseline(pair["A"], pair["B"], cfg.train, rng)
        half = n // 2
        tokens = np.concatenate([sample_sequences(gen_a, half, T, rng)[0],
                                 sample_sequences(gen_b, n - half, T, rng)[0]])
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    _write_samples(args.out, tokens, vocab)
    print(args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    gen, a, b = harmonize(load_corpus(args.gen), load_corpus(args.corpus_a), load_corpus(args.corpus_b))
    report = evaluate_system(gen.tokens, a, b, system=args.system)
    for path in write_report(report, args.out):
        print(path)
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_help() -> str:
    lines = ["TrainConfig keys (override with --set key=value):"]
    for f in fields(TrainConfig):
        lines.append(f"  {f.name} = {f.default!r}: {f.metadata.get('help', '')}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusiongan", description="Three-domain melody fusion GAN.",
                     formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_config_help())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config or TrainConfig key")
        p.formatter_class = argparse.RawDescriptionHelpFormatter
        p.epilog = _config_help()
        return p

    p = sub.add_parser("synth", help="write a synthetic corpus")
    p.add_argument("--grammar", choices=GRAMMARS, required=True)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--T", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--domain", choices=("A", "B", "F"), default="A")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = with_config(sub.add_parser("pretrain", help="pre-train one domain"))
    p.add_argument("--domain", choices=("A", "B", "F"), required=True)
    p.set_defaults(func=cmd_pretrain)

    p = with_config(sub.add_parser("fuse", help="run fusion training from three pre-trained checkpoints"))
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("generate", help="sample sequences from a stored generator")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--domain", choices=("A", "B", "F"), default="F")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = with_config(sub.add_parser("baseline", help="run one baseline end to end"))
    p.add_argument("--kind", choices=[k.value for k in baselines.BaselineKind], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="Diff/Ratio report and histogram CSVs")
    p.add_argument("--gen", required=True, help="generated corpus file")
    p.add_argument("--corpus-a", required=True)
    p.add_argument("--corpus-b", required=True)
    p.add_argument("--system", default="G")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NumericError as exc:
        log.error("numeric divergence: %s", exc)
        print(f"fusiongan: numeric divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, CorpusFormatError, FileNotFoundError, FileExistsError, ValueError, KeyError) as exc:
        print(f"fusiongan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
