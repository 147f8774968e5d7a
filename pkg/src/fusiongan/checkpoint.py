"""Persist domain bundles and trios in the checkpoint file format."""

from __future__ import annotations

from .config import TrainConfig
from .corpus import Corpus, Vocabulary
from .fusion import Trio
from .nets import (
    AdamState,
    CriticParams,
    GeneratorParams,
    arrays_to_params,
    load_checkpoint,
    params_to_arrays,
    save_checkpoint,
)
from .pretrain import DomainBundle


def _bundle_arrays(prefix: str, bundle: DomainBundle) -> dict:
    arrays = {}
    arrays.update(params_to_arrays(f"{prefix}gen", bundle.generator))
    arrays.update(params_to_arrays(f"{prefix}critic", bundle.critic))
    arrays.update(params_to_arrays(f"{prefix}gen_opt/m", bundle.gen_opt.m))
    arrays.update(params_to_arrays(f"{prefix}gen_opt/v", bundle.gen_opt.v))
    arrays.update(params_to_arrays(f"{prefix}critic_opt/m", bundle.critic_opt.m))
    arrays.update(params_to_arrays(f"{prefix}critic_opt/v", bundle.critic_opt.v))
    return arrays


def _bundle_meta(bundle: DomainBundle) -> dict:
    return {
        "label": bundle.label,
        "widths": list(bundle.critic.widths),
        "clip_bound": bundle.critic.clip_bound,
        "gen_opt_t": bundle.gen_opt.t,
        "critic_opt_t": bundle.critic_opt.t,
        "baseline": bundle.baseline,
        "gen_shape": [bundle.generator.vocab_size, bundle.generator.embed_dim, bundle.generator.hidden_size],
        "critic_shape": [bundle.critic.vocab_size, bundle.critic["embedding"].shape[1], bundle.critic.n_filters],
    }


def _templates(meta: dict) -> tuple[GeneratorParams, CriticParams]:
    from .nets import init_critic, init_generator

    V, E, H = meta["gen_shape"]
    Vc, Ec, F = meta["critic_shape"]
    return init_generator(V, E, H), init_critic(Vc, Ec, meta["widths"], F, clip_bound=meta["clip_bound"])


def _restore_bundle(prefix: str, arrays: dict, meta: dict, corpus: Corpus) -> DomainBundle:
    gen_t, critic_t = _templates(meta)
    gen = arrays_to_params(f"{prefix}gen", arrays, gen_t)
    critic = arrays_to_params(f"{prefix}critic", arrays, critic_t)
    gen_opt = AdamState(arrays_to_params(f"{prefix}gen_opt/m", arrays, gen_t),
                        arrays_to_params(f"{prefix}gen_opt/v", arrays, gen_t), meta["gen_opt_t"])
    critic_opt = AdamState(arrays_to_params(f"{prefix}critic_opt/m", arrays, critic_t),
                           arrays_to_params(f"{prefix}critic_opt/v", arrays, critic_t), meta["critic_opt_t"])
    return DomainBundle(meta["label"], corpus, gen, critic, gen_opt, critic_opt, meta["baseline"])


def save_bundle(path, bundle: DomainBundle, config: TrainConfig | None = None) -> None:
    meta = {
        "kind": "bundle",
        "bundle": _bundle_meta(bundle),
        "vocabulary": [list(p) for p in bundle.corpus.vocabulary.pairs],
        "T": bundle.corpus.T,
        "config": config.to_dict() if config is not None else None,
    }
    save_checkpoint(path, _bundle_arrays("", bundle), meta)


def load_bundle(path, corpus: Corpus) -> DomainBundle:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "bundle":
        raise ValueError(f"{path} is not a bundle checkpoint")
    _check_vocab(path, meta, corpus.vocabulary)
    return _restore_bundle("", arrays, meta["bundle"], corpus)


def save_trio(path, trio: Trio) -> None:
    arrays, bundles = {}, {}
    for label in "ABF":
        bundle = trio.bundle(label)
        arrays.update(_bundle_arrays(f"{label}/", bundle))
        bundles[label] = _bundle_meta(bundle)
    meta = {
        "kind": "trio",
        "bundles": bundles,
        "iteration": trio.iteration,
        "vocabulary": [list(p) for p in trio.A.corpus.vocabulary.pairs],
        "T": trio.A.corpus.T,
        "config": trio.config.to_dict(),
    }
    save_checkpoint(path, arrays, meta)


def load_trio(path, corpora: dict[str, Corpus]) -> Trio:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "trio":
        raise ValueError(f"{path} is not a trio checkpoint")
    _check_vocab(path, meta, corpora["A"].vocabulary)
    bundles = {k: _restore_bundle(f"{k}/", arrays, meta["bundles"][k], corpora[k]) for k in "ABF"}
    return Trio(bundles["A"], bundles["B"], bundles["F"], TrainConfig.from_dict(meta["config"]), meta["iteration"])


def load_generator(path, label: str = "F") -> tuple[GeneratorParams, Vocabulary, int]:
    """Generator, vocabulary and T from either a bundle or a trio checkpoint."""
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") == "bundle":
        prefix, bmeta = "", meta["bundle"]
    elif meta.get("kind") == "trio":
        prefix, bmeta = f"{label}/", meta["bundles"][label]
    else:
        raise ValueError(f"{path}: unknown checkpoint kind {meta.get('kind')!r}")
    gen_t, _ = _templates(bmeta)
    vocab = Vocabulary(tuple(p) for p in meta["vocabulary"])
    return arrays_to_params(f"{prefix}gen", arrays, gen_t), vocab, int(meta["T"])


def _check_vocab(path, meta: dict, vocab: Vocabulary) -> None:
    if [tuple(p) for p in meta["vocabulary"]] != vocab.pairs:
        raise ValueError(f"{path}: checkpoint vocabulary does not match the corpora")
