"""Command-line interface.

Subcommands cover the full workflow: generate or validate a
vocabulary, split it, run the efficiency sweep, optimize a schedule,
run the full comparison, sample sequences from a saved distribution,
and produce the word-variable correlation report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, harness, optimizer, schedule, vocab as vocab_mod
from .seeds import mix

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


class DataError(ValueError):
    pass


def _load_config(args) -> harness.ExperimentConfig:
    if getattr(args, "config", None):
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    if getattr(args, "workers", None) is not None:
        cfg = dataclasses.replace(cfg, workers=args.workers)
    if getattr(args, "out", None) is not None:
        cfg = dataclasses.replace(cfg, outdir=args.out)
    return cfg


def _load_vocab(args, cfg: harness.ExperimentConfig | None = None) -> vocab_mod.Vocabulary:
    if getattr(args, "vocab", None):
        if not getattr(args, "inventory", None):
            raise DataError("--vocab requires --inventory")
        inv = vocab_mod.parse_phoneme_inventory(Path(args.inventory).read_text())
        return vocab_mod.parse_vocabulary(Path(args.vocab).read_text(), inv)
    cfg = cfg or _load_config(args)
    return harness.build_vocabulary(cfg)


def _outdir(args) -> Path:
    out = Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


# ----------------------------------------------------------------------
# Subcommands

def cmd_gen_vocab(args) -> int:
    spec = {
        "n_words": args.n_words,
        "n_consonants": args.n_consonants,
        "n_vowel_graphemes": args.n_vowel_graphemes,
        "exception_rate": args.exception_rate,
        "zipf_exponent": args.zipf_exponent,
    }
    seed = args.seed if args.seed is not None else 42
    vocabulary = vocab_mod.generate_synthetic_vocabulary(spec, seed)
    out = _outdir(args)
    (out / "vocab.tsv").write_text(vocab_mod.vocabulary_to_tsv(vocabulary))
    (out / "phonemes.tsv").write_text(vocab_mod.inventory_to_tsv(vocabulary.inventory))
    print(f"wrote {len(vocabulary)} words to {out / 'vocab.tsv'}")
    return EXIT_OK


def cmd_encode(args) -> int:
    vocabulary = _load_vocab(args)
    if args.out:
        lines = ["word\taligned_orth\taligned_phon"]
        for it in vocabulary.items:
            lines.append(f"{it.word}\t{it.aligned_orth}\t{' '.join(it.aligned_phon)}")
        out = _outdir(args)
        (out / "encoded.tsv").write_text("\n".join(lines) + "\n")
    print(f"{len(vocabulary)} words encoded, inventory of {len(vocabulary.inventory)} phonemes")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _load_config(args)
    vocabulary = _load_vocab(args, cfg)
    seed = args.seed if args.seed is not None else mix(cfg.master_seed, "split")
    split = vocab_mod.split_vocabulary(vocabulary, args.K, seed)
    doc = {
        "K": args.K,
        "seed": seed,
        "pool": [vocabulary[int(i)].word for i in split.pool_indices],
        "test": [vocabulary[int(i)].word for i in split.test_indices],
    }
    out = _outdir(args)
    (out / "split.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(f"pool {split.K} words, test {len(split.test_indices)} words -> {out / 'split.json'}")
    return EXIT_OK


def cmd_efficiency(args) -> int:
    cfg = _load_config(args)
    vocabulary = _load_vocab(args, cfg)
    Ks = [int(k) for k in args.Ks.split(",")]
    criteria = {}
    if args.max_epochs is not None:
        criteria["max_epochs"] = args.max_epochs

    def progress(K, rep, epochs, acc):
        print(f"K={K} rep={rep} epochs={epochs} test_acc={acc:.4f}", file=sys.stderr)

    report = harness.efficiency_experiment(
        vocabulary, Ks, args.reps, criteria or None, cfg.master_seed,
        lr=args.lr, progress=progress,
    )
    harness.emit_efficiency(report, _outdir(args))
    for cell in report.cells:
        print(f"K={cell.K} efficiency={cell.mean_efficiency:.3f} "
              f"[{cell.q25:.3f}, {cell.q75:.3f}]")
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _load_config(args)
    vocabulary = harness.build_vocabulary(cfg)
    split = vocab_mod.split_vocabulary(vocabulary, cfg.K, mix(cfg.master_seed, "split"))
    ctx = optimizer.build_context(
        vocabulary, split, cfg.optimizer.horizon,
        learner_seed=mix(cfg.master_seed, "learner-init"),
    )
    out = _outdir(args)

    def progress(tag):
        def cb(s, mean, err):
            print(f"{tag} s={s} mean={mean:.4f} se={err:.4f}", file=sys.stderr)
        return cb

    resumed = None
    if args.resume:
        resumed = harness.load_optimizer_state(args.resume)

    p_bar, state1 = None, None
    if args.stage in ("one", "both") or (resumed and resumed.stage_tag == "stage1"):
        ckpt = out / "stage1.ckpt.json"
        p_bar, state1 = optimizer.optimize_stage1(
            ctx, cfg.optimizer, cfg.master_seed, workers=cfg.workers,
            progress=progress("stage1"),
            checkpoint=lambda st: harness.save_optimizer_state(st, ckpt),
            state=resumed if (resumed and resumed.stage_tag == "stage1") else None,
        )
        (out / "distribution_stationary.csv").write_text(
            schedule.distribution_to_csv(vocabulary, split, p_bar, p_bar)
        )
        print(f"stage1 best mean cost {state1.best_mean:.4f}")
    if args.stage in ("two", "both") or (resumed and resumed.stage_tag == "stage2"):
        if p_bar is None and not (resumed and resumed.stage_tag == "stage2"):
            raise DataError("stage two needs a stage-one result; run --stage both or --resume")
        ckpt = out / "stage2.ckpt.json"
        state2_init = resumed if (resumed and resumed.stage_tag == "stage2") else None
        if state2_init is not None and p_bar is None:
            p_bar = schedule.uniform_multinomial(ctx.K)  # placeholder; state carries z
        (P_star, Q_star), state2 = optimizer.optimize_stage2(
            p_bar, ctx, cfg.optimizer, cfg.master_seed, workers=cfg.workers,
            progress=progress("stage2"),
            checkpoint=lambda st: harness.save_optimizer_state(st, ckpt),
            state=state2_init,
        )
        (out / "distribution_optimized.csv").write_text(
            schedule.distribution_to_csv(vocabulary, split, P_star, Q_star)
        )
        print(f"stage2 best mean cost {state2.best_mean:.4f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _load_config(args)
    report = harness.run_comparison(cfg)
    for c in report.conditions:
        p = "" if c.p_vs_optimized is None else f" p_vs_optimized={c.p_vs_optimized:.2e}"
        print(f"{c.name}: acc={c.mean_accuracy:.4f} se={c.stderr:.4f} "
              f"best={c.best_seq_accuracy:.4f}{p}")
    print(f"reports in {cfg.outdir}")
    return EXIT_OK


def _read_distribution_csv(path: str) -> tuple[list[str], np.ndarray, np.ndarray]:
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    header = lines[0].split(",")
    if header[:3] != ["word", "p_start", "p_end"]:
        raise DataError(f"{path}: expected header word,p_start,p_end[,...]")
    words, ps, qs = [], [], []
    for line in lines[1:]:
        parts = line.split(",")
        words.append(parts[0])
        ps.append(float(parts[1]))
        qs.append(float(parts[2]))
    return words, np.array(ps), np.array(qs)


def cmd_sample_seq(args) -> int:
    words, ps, qs = _read_distribution_csv(args.dist)
    P, Q = schedule.Multinomial(ps), schedule.Multinomial(qs)
    seed = args.seed if args.seed is not None else 1
    tvd = schedule.TimeVaryingDistribution(
        schedule.probs_to_logits(P), schedule.probs_to_logits(Q), args.T
    )
    seq = schedule.sample_sequence(tvd, seed, dist_id=Path(args.dist).stem)
    out_lines = [f"# distribution: {seq.provenance[0]}", f"# seed: {seq.provenance[1]}"]
    out_lines += [words[i] for i in seq.item_indices]
    text = "\n".join(out_lines) + "\n"
    if args.out:
        out = _outdir(args)
        (out / "sequence.txt").write_text(text)
        print(f"wrote {args.T} draws to {out / 'sequence.txt'}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load_config(args) if not args.vocab else None
    vocabulary = _load_vocab(args, cfg)
    out = _outdir(args)
    variables = analysis.word_variables(vocabulary)
    lines = ["word," + ",".join(analysis.STRUCTURAL_VARIABLES)]
    for v in variables:
        vals = ",".join(repr(v.value(n)) for n in analysis.STRUCTURAL_VARIABLES)
        lines.append(f"{v.word},{vals}")
    (out / "word_variables.csv").write_text("\n".join(lines) + "\n")
    if args.dist:
        words, ps, qs = _read_distribution_csv(args.dist)
        by_word = {it.word: i for i, it in enumerate(vocabulary.items)}
        try:
            pool_idx = np.array(sorted(by_word[w] for w in words))
        except KeyError as e:
            raise DataError(f"distribution word {e.args[0]!r} not in vocabulary") from None
        order = np.argsort([by_word[w] for w in words], kind="stable")
        split = vocab_mod.PoolSplit(
            pool_indices=pool_idx,
            test_indices=np.array(
                sorted(set(range(len(vocabulary))) - set(pool_idx.tolist()))
            ),
        )
        P = schedule.Multinomial(np.array(ps)[order])
        Q = schedule.Multinomial(np.array(qs)[order])
        rows = analysis.correlate_with_mean_pq(vocabulary, split, P, Q)
        (out / "correlations.csv").write_text(analysis.correlations_to_csv(rows))
        for r in rows:
            if r.rho is None:
                print(f"{r.variable}: {r.note or 'undefined'}")
            else:
                flag = " *" if r.p_value < 0.05 else ""
                print(f"{r.variable}: rho={r.rho:+.3f} p={r.p_value:.2e}{flag}")
    else:
        print(f"word variables for {len(vocabulary)} words -> {out / 'word_variables.csv'}")
    return EXIT_OK


# ----------------------------------------------------------------------

def build_parser() -> _Parser:
    p = _Parser(prog="seqteach", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, workers=False):
        sp.add_argument("--seed", type=int, default=None, help="master seed")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--config", default=None, help="TOML experiment config")
        if workers:
            sp.add_argument("--workers", type=int, default=None)

    g = sub.add_parser("gen-vocab", help="generate a synthetic vocabulary")
    g.add_argument("--n-words", type=int, default=harness.DESK_SYNTHETIC["n_words"])
    g.add_argument("--n-consonants", type=int, default=harness.DESK_SYNTHETIC["n_consonants"])
    g.add_argument("--n-vowel-graphemes", type=int,
                   default=harness.DESK_SYNTHETIC["n_vowel_graphemes"])
    g.add_argument("--exception-rate", type=float,
                   default=harness.DESK_SYNTHETIC["exception_rate"])
    g.add_argument("--zipf-exponent", type=float,
                   default=harness.DESK_SYNTHETIC["zipf_exponent"])
    common(g)
    g.set_defaults(func=cmd_gen_vocab)

    e = sub.add_parser("encode", help="validate and encode a vocabulary")
    e.add_argument("--vocab", help="vocabulary TSV")
    e.add_argument("--inventory", help="phoneme inventory TSV")
    common(e)
    e.set_defaults(func=cmd_encode)

    s = sub.add_parser("split", help="draw a train/test split")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--vocab")
    s.add_argument("--inventory")
    common(s)
    s.set_defaults(func=cmd_split)

    f = sub.add_parser("efficiency", help="pool-size efficiency sweep")
    f.add_argument("--Ks", default="30,60,90,120,150", help="comma-separated pool sizes")
    f.add_argument("--reps", type=int, default=3)
    f.add_argument("--lr", type=float, default=0.1)
    f.add_argument("--max-epochs", type=int, default=None)
    f.add_argument("--vocab")
    f.add_argument("--inventory")
    common(f)
    f.set_defaults(func=cmd_efficiency)

    o = sub.add_parser("optimize", help="run schedule optimization")
    o.add_argument("--stage", choices=["one", "two", "both"], default="both")
    o.add_argument("--resume", help="optimizer checkpoint to resume")
    common(o, workers=True)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("compare", help="baselines vs optimized schedules")
    common(c, workers=True)
    c.set_defaults(func=cmd_compare)

    q = sub.add_parser("sample-seq", help="sample a training sequence")
    q.add_argument("--dist", required=True, help="distribution CSV (word,p_start,p_end)")
    q.add_argument("--T", type=int, default=1500, help="sequence length")
    common(q)
    q.set_defaults(func=cmd_sample_seq)

    a = sub.add_parser("analyze", help="word variables and correlations")
    a.add_argument("--vocab")
    a.add_argument("--inventory")
    a.add_argument("--dist", help="distribution CSV to correlate against")
    common(a)
    a.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (vocab_mod.VocabError, DataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
