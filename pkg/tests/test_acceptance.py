"""Acceptance suite. Each test records one PASS/FAIL line, shown in the terminal summary."""
import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import ACCEPTANCE_LINES, fd_gradient, max_rel_error, tiny_config, tiny_critic, tiny_generator, tiny_vocab
from fusiongan import cli
from fusiongan.baselines import rm_generate
from fusiongan.config import TrainConfig
from fusiongan.corpus import Corpus, combine, harmonize, synth_corpus
from fusiongan.evaluation import (
    Histogram,
    ListeningCounts,
    diff_ratio,
    emd_1d,
    euclidean_distance,
    evaluate_system,
    fusion_level,
)
from fusiongan.fusion import (
    SLOTS,
    BatchSet,
    Trio,
    critic_objective,
    critic_update_grad,
    critic_update_objective,
    fusion_train,
    generator_reward_fn,
    generator_reward_signs,
    pretrain_trio,
    sandwich_penalty,
    terminal_scorer,
    total_objective,
)
from fusiongan.nets import (
    critic_scores,
    grad_critic,
    grad_nll,
    grad_weighted_logprob,
    mean_nll,
    sample_sequences,
    sequence_log_probs,
)
from fusiongan.pretrain import new_bundle


def record(number: int, name: str, ok: bool, detail: str = "") -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {name}" + (f" ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# -- 1: fusion level ------------------------------------------------------

LISTENING = {
    "RM": ((25.0, 22.5, 12.5, 40.0), 0.575),
    "MLE": ((43.6, 9.1, 30.9, 16.4), 0.491),
    "RL": ((20.1, 28.3, 20.8, 30.8), 0.610),
    "Fusion": ((35.9, 25.0, 20.0, 19.1), 0.700),
}
# rows whose tabulated FL disagrees with the formula; expected values come from the formula
LISTENING_FORMULA_ONLY = {
    "GAN": ((34.0, 17.0, 26.0, 14.0), 1 - (17.0 + 14.0) / 91.0),
    "MC": ((32.0, 2.0, 14.0, 52.0), 1 - (30.0 + 52.0) / 100.0),
}


def test_criterion_1_fusion_level():
    errs = {k: abs(fusion_level(ListeningCounts(*c)) - fl) for k, (c, fl) in LISTENING.items()}
    ok = max(errs.values()) <= 1e-3
    formula = {k: fusion_level(ListeningCounts(*c)) for k, (c, _) in LISTENING_FORMULA_ONLY.items()}
    ok &= all(abs(formula[k] - fl) <= 1e-12 for k, (_, fl) in LISTENING_FORMULA_ONLY.items())
    ok &= abs(formula["GAN"] - 0.659) < 5e-4 and abs(formula["MC"] - 0.180) < 5e-4
    record(1, "FL reproduction", ok, f"max err {max(errs.values()):.1e}; GAN {formula['GAN']:.3f}, MC {formula['MC']:.3f}")


# -- 2: EMD against a transport LP ------------------------------------------

def transport_oracle(p: np.ndarray, q: np.ndarray) -> float:
    """Min-cost transport with |i - j| ground cost, solved as a dense LP."""
    n = len(p)
    cost = np.abs(np.subtract.outer(np.arange(n), np.arange(n))).ravel().astype(float)
    rows = np.kron(np.eye(n), np.ones(n))
    cols = np.kron(np.ones(n), np.eye(n))
    res = linprog(cost, A_eq=np.vstack([rows, cols]), b_eq=np.concatenate([p, q]),
                  bounds=(0, None), method="highs-ds")
    assert res.status == 0
    return float(res.fun)


def test_criterion_2_emd_oracle():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 9))
        p, q = (rng.integers(0, 50, n).astype(float) + (rng.random(n) < 0.2) for _ in range(2))
        p[rng.integers(n)] += 1
        q[rng.integers(n)] += 1
        hp, hq = Histogram("t", p).normalized(), Histogram("t", q).normalized()
        worst = max(worst, abs(emd_1d(hp, hq) - transport_oracle(hp.bins, hq.bins)))
    record(2, "EMD matches transport LP", worst <= 1e-9, f"max abs err {worst:.1e}")


# -- 3: triangle Diff/Ratio -------------------------------------------------

def test_criterion_3_triangle_properties():
    rng = np.random.default_rng(3)
    bad = []
    for i in range(1000):
        n = int(rng.integers(2, 21))
        # sparse draws make exact coincidences and collinear cases likely
        hA, hB, hG = (Histogram("t", rng.integers(0, 4, n) * (rng.random(n) < 0.6) + np.eye(n)[k % n]).normalized()
                      for k in range(3))
        if np.array_equal(hA.bins, hB.bins):
            continue
        for metric in ("EUD", "EM"):
            diff, ratio = diff_ratio(hA, hB, hG, metric)
            if diff < -1e-9 or ratio < 1 - 1e-9:
                bad.append((i, metric, diff, ratio))
            for g in (hA, hB):
                if diff_ratio(hA, hB, g, metric) != (0.0, 1.0):
                    bad.append((i, metric, "degenerate"))
    record(3, "Diff/Ratio triangle bounds", not bad, f"{len(bad)} violations")


# -- 4: gradients vs finite differences ---------------------------------------

def test_criterion_4_gradients():
    V, E, H, T = 5, 3, 4, 6
    rng = np.random.default_rng(4)
    tokens = rng.integers(1, V, size=(3, T))
    weights = rng.normal(size=(3, T))
    gen = tiny_generator(V, E, H, seed=4)
    critic = tiny_critic(V, E, widths=(1, 2, 3), F=2, seed=5)
    batches = BatchSet(*(rng.integers(1, V, size=(4, T)) for _ in SLOTS))
    signs = rng.choice([-1.0, 1.0], size=3)

    def weighted(p):
        return float((sequence_log_probs(p, tokens) * weights).sum() / len(tokens))

    checks = {
        "nll": (grad_nll(gen, tokens), lambda p: mean_nll(p, tokens), gen),
        "weighted_logprob": (grad_weighted_logprob(gen, tokens, weights), weighted, gen),
        "critic_score": (grad_critic(critic, tokens, signs),
                         lambda p: float(signs @ critic_scores(p, tokens)) / len(tokens), critic),
    }
    for label in ("F", "A"):
        checks[f"critic_{label}+penalty"] = (critic_update_grad(label, batches, critic, 1.0),
                                             lambda p, lb=label: critic_update_objective(lb, batches, p, 1.0), critic)
    errs = {k: max_rel_error(g.flat(), fd_gradient(f, p)) for k, (g, f, p) in checks.items()}
    worst = max(errs, key=errs.get)
    record(4, "analytic gradients match finite differences", errs[worst] <= 1e-4, f"worst {worst} {errs[worst]:.1e}")


# -- 5: policy-gradient unbiasedness ------------------------------------------

def enumerable_trio(seed=5):
    V, T = 3, 2
    cfg = tiny_config(T=T, embed_dim=2, hidden_size=3, critic_widths=(1, 2), critic_filters=2, n_rollouts=1)
    rng = np.random.default_rng(seed)
    vocab = tiny_vocab(V - 1)
    a = Corpus("A", np.array([[1, 1], [1, 2]]), vocab)
    b = Corpus("B", np.array([[2, 2], [2, 1]]), vocab)
    f = Corpus("F", np.vstack([a.tokens, b.tokens]), vocab)
    bundles = []
    for i, (label, corpus) in enumerate((("A", a), ("B", b), ("F", f))):
        bundle = new_bundle(label, corpus, cfg, rng)
        bundles.append(bundle.replace(generator=tiny_generator(V, 2, 3, seed=10 + i, scale=1.0),
                                      critic=tiny_critic(V, 2, widths=(1, 2), F=2, seed=20 + i, scale=1.0)))
    return Trio(*bundles, cfg)


def pg_check(trio: Trio, label: str, n: int, rng: np.random.Generator) -> float:
    """Largest |estimate - exact| / sigma over coordinates of the batch-mean gradient."""
    gen = trio.bundle(label).generator
    T = trio.config.T
    seqs_all = np.array(list(itertools.product([1, 2], repeat=T)))
    reward = terminal_scorer(trio.critics, generator_reward_signs(label))(seqs_all)
    p = np.exp(sequence_log_probs(gen, seqs_all).sum(axis=1))
    # per (sequence, step) score-function vectors; the estimator is linear in them
    basis = np.array([[grad_weighted_logprob(gen, s[None], np.eye(T)[t][None]).flat() for t in range(T)]
                      for s in seqs_all])
    exact = np.einsum("s,s,std->d", p, reward, basis)
    expected_reward = lambda g: float(np.exp(sequence_log_probs(g, seqs_all).sum(axis=1)) @ reward)
    assert max_rel_error(exact, fd_gradient(expected_reward, gen)) <= 1e-5

    seqs, _ = sample_sequences(gen, n, T, rng)
    q = generator_reward_fn(trio, label)(seqs, rng)
    baseline = 0.3  # any constant keeps the estimator unbiased
    idx = (seqs - 1) @ (2 ** np.arange(T)[::-1])
    per_sample = np.einsum("nt,ntd->nd", q - baseline, basis[idx])
    estimate = grad_weighted_logprob(gen, seqs, q - baseline).flat()
    assert np.allclose(estimate, per_sample.mean(axis=0), rtol=1e-9, atol=1e-12)
    sigma = per_sample.std(axis=0, ddof=1) / math.sqrt(n)
    live = sigma > 0
    assert np.allclose(estimate[~live], exact[~live], atol=1e-12)
    return float(np.max(np.abs(estimate - exact)[live] / sigma[live]))


def test_criterion_5_policy_gradient_unbiased():
    trio = enumerable_trio()
    rng = np.random.default_rng(55)
    z = {label: pg_check(trio, label, 50_000, rng) for label in ("F", "A")}
    # with ~50 coordinates a 3-sigma bound per coordinate is the stated tolerance
    record(5, "policy gradient matches enumerated expectation", max(z.values()) <= 3.0,
           ", ".join(f"G_{k} max |z| {v:.2f}" for k, v in z.items()))


# -- 6: sandwich floor --------------------------------------------------------

def test_criterion_6_sandwich_floor():
    rng = np.random.default_rng(6)
    bad = 0
    for _ in range(10_000):
        a, f, b = (Fraction(int(x), int(d)) for x, d in zip(rng.integers(-20, 21, 3), rng.integers(1, 5, 3)))
        p = sandwich_penalty(a, f, b)
        between = min(a, b) <= f <= max(a, b)
        bad += not (p >= abs(a - b) and (p == abs(a - b)) == between)
    record(6, "sandwich floor in exact arithmetic", bad == 0, f"{bad} violations")


# -- 7: sign bookkeeping ------------------------------------------------------

def test_criterion_7_sign_bookkeeping():
    rng = np.random.default_rng(7)
    worst = 0.0
    for i in range(100):
        critics = {k: tiny_critic(seed=100 * i + j, scale=1.0) for j, k in enumerate("ABF")}
        n = int(rng.integers(1, 6))
        batches = BatchSet(*(rng.integers(1, 5, size=(n, 6)) for _ in SLOTS))
        parts = sum(critic_objective(k, batches, critics[k]) for k in "ABF")
        worst = max(worst, abs(total_objective(batches, critics) - parts))
    record(7, "objective decomposes into per-critic parts", worst <= 1e-10, f"max abs err {worst:.1e}")


# -- 8: end-to-end fusion on synthetic domains ------------------------------

E2E_CONFIG = dict(T=32, batch_size=8, embed_dim=16, hidden_size=32, critic_filters=16, n_rollouts=4,
                  pretrain_mle_epochs=3, pretrain_classifier_steps=50, pretrain_adv_iters=10,
                  fusion_iters=300, convergence_tol=0.0, eval_samples=200, eval_every=50)


def dd_eud_ratio(samples, a, b) -> float:
    rows = evaluate_system(samples, a, b)["rows"]
    return next(r["ratio"] for r in rows if r["metric"] == "EUD" and r["histogram_kind"] == "DD")


@pytest.mark.slow
def test_criterion_8_end_to_end_fusion():
    a, b = harmonize(synth_corpus("arpeggio", 500, 32, seed=1, domain_label="A"),
                     synth_corpus("stepwise", 500, 32, seed=2, domain_label="B"))
    cfg = TrainConfig(**E2E_CONFIG)
    step_ratio, diag_ratio, ratio_g, ratio_rm = [], [], [], []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        trio = pretrain_trio(a, b, cfg, rng)
        trio, history = fusion_train(trio, rng)
        first, last = history.rows[0], history.rows[-1]
        step_ratio.append(last["step_penalty_F"] / first["step_penalty_F"])
        diag_ratio.append(last["balance_penalty_F"] / first["balance_penalty_F"])
        gen = sample_sequences(trio.F.generator, 500, cfg.T, rng)[0]
        ratio_g.append(dd_eud_ratio(gen, a, b))
        ratio_rm.append(dd_eud_ratio(rm_generate(a.vocabulary, combine(a, b), 500, cfg.T, rng), a, b))
    med = {k: float(np.median(v)) for k, v in
           {"step": step_ratio, "diag": diag_ratio, "G": ratio_g, "RM": ratio_rm}.items()}
    ok = med["diag"] <= 0.5 and med["G"] < med["RM"]
    record(8, "balance penalty halves and G_F beats RM on Ratio(EUD, DD)", ok,
           f"median final/first penalty {med['diag']:.3f} (last critic step reading {med['step']:.3f}); "
           f"Ratio G_F {med['G']:.4f} vs RM {med['RM']:.4f}")


# -- 9: published duration histograms ----------------------------------------

JAZZ_DD = [124689, 12475, 5047, 2573, 1493, 1024, 694, 451, 355, 264,
           208, 167, 105, 59, 50, 48, 32, 25, 25, 31]
FOLK_DD = [18739, 8697, 1390, 997, 109, 96, 20, 21, 4, 1,
           4, 0, 0, 3, 0, 0, 0, 0, 0, 0]
TABLE_DD_EUD = {"RM": (39742.2, 1.375), "MC": (13988.7, 1.132)}


def test_criterion_9_published_histograms():
    direct = math.sqrt(sum((a - b) ** 2 for a, b in zip(JAZZ_DD, FOLK_DD)))
    d = euclidean_distance(Histogram("DD", JAZZ_DD), Histogram("DD", FOLK_DD))
    implied = {k: diff / (ratio - 1) for k, (diff, ratio) in TABLE_DD_EUD.items()}
    rel = {k: abs(v - d) / d for k, v in implied.items()}
    ok = abs(d - direct) <= 1e-9 * direct and max(rel.values()) <= 0.02
    record(9, "duration histogram distance agrees with table rows", ok,
           f"EUD {d:.1f}; " + ", ".join(f"{k} implies {implied[k]:.1f}" for k in implied))


# -- 10: determinism through the CLI ------------------------------------------

TRAIN = {"T": 8, "batch_size": 4, "embed_dim": 4, "hidden_size": 6, "critic_widths": [1, 2],
         "critic_filters": 2, "n_rollouts": 2, "pretrain_mle_epochs": 1, "pretrain_classifier_steps": 2,
         "pretrain_adv_iters": 1, "fusion_iters": 3, "eval_samples": 8, "eval_every": 1, "seed": 11}


def test_criterion_10_determinism(tmp_path):
    def run(*argv):
        assert cli.main([str(a) for a in argv]) == 0

    outputs = []
    for rep in range(2):
        ws = tmp_path / f"rep{rep}"
        ws.mkdir()
        run("synth", "--grammar", "arpeggio", "--n", 12, "--T", 8, "--seed", 1, "--out", ws / "a.txt")
        run("synth", "--grammar", "stepwise", "--n", 12, "--T", 8, "--seed", 2, "--domain", "B", "--out", ws / "b.txt")
        cfg = {"corpus_A": str(ws / "a.txt"), "corpus_B": str(ws / "b.txt"), "out_dir": str(ws / "runs"),
               "train": TRAIN}
        (ws / "cfg.json").write_text(json.dumps(cfg))
        files = [ws / "a.txt", ws / "a.txt.vocab", ws / "b.txt", ws / "b.txt.vocab"]
        sets = []
        for d in "ABF":
            run("pretrain", "--config", ws / "cfg.json", "--domain", d)
            ckpt = sorted((ws / "runs").glob(f"pretrain-{d}-*"))[-1] / "checkpoint.ckpt"
            files.append(ckpt)
            sets += ["--set", f"checkpoint_{d}={ckpt}"]
        run("fuse", "--config", ws / "cfg.json", *sets)
        files.append(sorted((ws / "runs").glob("fuse-*"))[-1] / "trio.ckpt")
        outputs.append([f.read_bytes() for f in files])
    same = [x == y for x, y in zip(*outputs)]
    record(10, "synth/pretrain/fuse outputs are byte-identical", all(same), f"{sum(same)}/{len(same)} files equal")
