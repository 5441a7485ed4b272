"""Command-line entry point: ``mtlab <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import align, bench, corpus, decoder, lm, metrics, neural
from .corpus import ParallelCorpus, SentencePair, SplitSpec

log = logging.getLogger("mtlab")


def _tokenized_pair(source, target) -> ParallelCorpus:
    src = corpus.read_tokenized(source)
    tgt = corpus.read_tokenized(target)
    if len(src) != len(tgt):
        raise corpus.CorpusError(
            f"line count mismatch: {source} has {len(src)} lines, {target} has {len(tgt)} lines")
    return ParallelCorpus([SentencePair(i, s, t) for i, (s, t) in enumerate(zip(src, tgt))])


def cmd_prepare(args) -> None:
    raw = corpus.load_parallel(args.source, args.target, args.source_lang, args.target_lang)
    cleaned, removed = corpus.clean_corpus(corpus.tokenize_corpus(raw), args.max_len, args.max_ratio)
    train, test = corpus.split_corpus(cleaned, SplitSpec(args.test_size, args.max_test_words, args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("test", test)):
        corpus.write_parallel(part, out / f"{name}.{args.source_lang}",
                              out / f"{name}.{args.target_lang}", out / f"{name}.stats.json")
    print(f"{len(raw)} pairs loaded, {removed} removed, {len(train)} train, {len(test)} test")


def cmd_train_lm(args) -> None:
    sents = corpus.read_tokenized(args.input)
    vocab = corpus.Vocabulary(Counter(w for s in sents for w in s))
    model = lm.train_lm([vocab.encode(s, wrap=True) for s in sents], args.order,
                        args.unk_floor, vocabulary=vocab)
    lm.save_lm(model, args.output)
    if args.dev:
        dev = [vocab.encode(s, wrap=True) for s in corpus.read_tokenized(args.dev)]
        print(f"dev perplexity {lm.perplexity(model, dev):.3f}")


def cmd_align(args) -> None:
    pairs = _tokenized_pair(args.source, args.target)
    fwd = align.train_ibm1(pairs, args.iterations)
    rev = align.train_ibm1(pairs.reversed(), args.iterations)
    alignments = align.symmetrized_alignments(pairs, fwd, rev)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(a.to_text() + "\n" for a in alignments)
    if args.lex:
        with open(args.lex, "w", encoding="utf-8") as fh:
            json.dump({"fwd": fwd.probs, "rev": rev.probs}, fh, ensure_ascii=False, sort_keys=True)
    for i, ll in enumerate(fwd.log_likelihood):
        log.info("fwd iteration %d log-likelihood %.6f", i, ll)


def cmd_extract(args) -> None:
    pairs = _tokenized_pair(args.source, args.target)
    with open(args.alignment, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh]
    if len(lines) != len(pairs):
        raise align.AlignError(
            f"{args.alignment} has {len(lines)} lines but the corpus has {len(pairs)} pairs")
    with open(args.lex, encoding="utf-8") as fh:
        lex = json.load(fh)
    fwd, rev = align.TranslationTable(lex["fwd"]), align.TranslationTable(lex["rev"])
    all_phrases, per_sentence = [], []
    for pair, line in zip(pairs.pairs, lines):
        a = align.AlignmentMatrix.from_text(line, len(pair.source), len(pair.target))
        phrases = align.extract_phrases(pair, a, args.max_phrase_len)
        all_phrases.extend(phrases)
        per_sentence.append((phrases, len(pair.source), len(pair.target)))
    align.write_phrase_table(align.score_phrases(all_phrases, fwd, rev), args.output)
    if args.reordering:
        align.write_reordering_table(align.train_reordering(per_sentence, args.smoothing),
                                     args.reordering)


def cmd_train_neural(args) -> None:
    pairs = _tokenized_pair(args.source, args.target)
    src_vocab = corpus.build_vocab(pairs, "source")
    tgt_vocab = corpus.build_vocab(pairs, "target")
    config = neural.TrainConfig(variant=args.variant, emb=args.emb, hidden=args.hidden,
                                att=args.att, max_updates=args.updates,
                                batch_size=args.batch_size, learning_rate=args.learning_rate,
                                clip_norm=args.clip_norm, seed=args.seed)
    dims = neural.Dims(len(src_vocab), len(tgt_vocab), args.emb, args.hidden, args.att)
    data = [(src_vocab.encode(p.source), tgt_vocab.encode(p.target)) for p in pairs.pairs]
    params, losses = neural.train(data, config, dims, log_path=args.log)
    neural.save_params(params, args.output)
    with open(args.vocab or f"{args.output}.vocab.json", "w", encoding="utf-8") as fh:
        json.dump({"source": src_vocab.to_dict(), "target": tgt_vocab.to_dict()}, fh,
                  ensure_ascii=False, sort_keys=True)
    print(f"{len(losses)} updates, final batch loss {losses[-1]:.4f}")


def cmd_decode(args) -> None:
    table = align.read_phrase_table(args.phrase_table)
    reordering = (align.read_reordering_table(args.reordering) if args.reordering
                  else align.ReorderingTable({}))
    model = lm.load_lm(args.lm)
    config = decoder.DecoderConfig.from_json(args.weights) if args.weights else decoder.DecoderConfig()
    if args.beam is not None:
        config.beam_size = args.beam
    sources = corpus.read_tokenized(args.input)
    traces = []
    with open(args.output, "w", encoding="utf-8", newline="\n") as out:
        for i, src in enumerate(sources):
            if args.nbest:
                for tokens, score in decoder.nbest(src, table, reordering, model, config, args.nbest):
                    out.write(f"{i} ||| {' '.join(tokens)} ||| {score:.6f}\n")
                continue
            result = decoder.decode(src, table, reordering, model, config)
            out.write(" ".join(result.target) + "\n")
            if args.trace:
                traces.append(result.trace())
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for t in traces:
                fh.write(json.dumps(t, ensure_ascii=False) + "\n")


def cmd_translate(args) -> None:
    params = neural.load_params(args.model)
    src_vocab, tgt_vocab = bench.load_vocab_pair(args.vocab or f"{args.model}.vocab.json")
    with open(args.output, "w", encoding="utf-8", newline="\n") as out:
        for src in corpus.read_tokenized(args.input):
            ids = src_vocab.encode(src)
            max_out = int(args.max_ratio * len(ids)) + 1
            if args.beam > 1:
                hyp, _ = neural.translate_beam(params, ids, args.variant, max_out, args.beam)
            else:
                hyp, _ = neural.translate_greedy(params, ids, args.variant, max_out)
            out.write(" ".join(tgt_vocab.decode(hyp)) + "\n")


def cmd_score(args) -> None:
    if args.lines:
        hyps = corpus.read_tokenized(args.hyp)
        refs = corpus.read_tokenized(args.ref)
        for v in metrics.sentence_scores(args.lines, hyps, refs):
            print(f"{v:.4f}")
        return
    print(bench.score_outputs(args.hyp, args.ref).to_json())


def cmd_report(args) -> None:
    with open(args.scores, encoding="utf-8") as fh:
        table = bench.ScoreTable.from_dict(json.load(fh))
    sys.stdout.write(bench.render_report(table, args.format))


def cmd_run(args) -> None:
    if args.config:
        config = bench.ExperimentConfig.from_json(args.config, out=args.out)
    else:
        if not args.out:
            raise bench.ConfigError("--out is required without --config")
        config = bench.toy_config(args.out)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    table = bench.run_pipeline(config)
    sys.stdout.write(bench.render_report(table, "text"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mtlab", description="Phrase-based and neural MT toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prepare", help="tokenize, clean and split a raw parallel corpus")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--source-lang", default="pl")
    s.add_argument("--target-lang", default="en")
    s.add_argument("--out", required=True)
    s.add_argument("--test-size", type=int, default=1000)
    s.add_argument("--max-test-words", type=int, default=50)
    s.add_argument("--max-len", type=int, default=80)
    s.add_argument("--max-ratio", type=float, default=9.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("train-lm", help="train a Kneser-Ney language model")
    s.add_argument("--input", required=True, help="tokenized text, one sentence per line")
    s.add_argument("--output", required=True)
    s.add_argument("--order", type=int, default=5)
    s.add_argument("--unk-floor", type=float, default=1.0)
    s.add_argument("--dev", help="report perplexity on this tokenized file")
    s.set_defaults(func=cmd_train_lm)

    s = sub.add_parser("align", help="IBM Model 1 both ways plus grow-diag-final")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--output", required=True, help="symmetrized alignments, i-j per line")
    s.add_argument("--lex", help="write both lexical tables as JSON")
    s.add_argument("--iterations", type=int, default=5)
    s.set_defaults(func=cmd_align)

    s = sub.add_parser("extract", help="extract and score phrases, train reordering")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--alignment", required=True)
    s.add_argument("--lex", required=True, help="lexical tables written by align")
    s.add_argument("--output", required=True, help="phrase table")
    s.add_argument("--reordering", help="reordering table")
    s.add_argument("--max-phrase-len", type=int, default=7)
    s.add_argument("--smoothing", type=float, default=0.5)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train-neural", help="train an ENDEC or SEARCH model")
    s.add_argument("--source", required=True)
    s.add_argument("--target", required=True)
    s.add_argument("--variant", choices=neural.VARIANTS, default=neural.SEARCH)
    s.add_argument("--output", required=True)
    s.add_argument("--vocab", help="vocabulary JSON (default: <output>.vocab.json)")
    s.add_argument("--log", help="JSONL training log")
    s.add_argument("--emb", type=int, default=16)
    s.add_argument("--hidden", type=int, default=32)
    s.add_argument("--att", type=int, default=32)
    s.add_argument("--updates", type=int, default=3000)
    s.add_argument("--batch-size", type=int, default=16)
    s.add_argument("--learning-rate", type=float, default=0.5)
    s.add_argument("--clip-norm", type=float, default=5.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train_neural)

    s = sub.add_parser("decode", help="phrase-based decoding")
    s.add_argument("--phrase-table", required=True)
    s.add_argument("--reordering")
    s.add_argument("--lm", required=True)
    s.add_argument("--weights", help="JSON feature weights")
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--beam", type=int)
    s.add_argument("--nbest", type=int, default=0)
    s.add_argument("--trace", help="JSONL derivation trace")
    s.set_defaults(func=cmd_decode)

    s = sub.add_parser("translate", help="neural translation")
    s.add_argument("--model", required=True)
    s.add_argument("--vocab")
    s.add_argument("--variant", choices=neural.VARIANTS, default=neural.SEARCH)
    s.add_argument("--input", required=True)
    s.add_argument("--output", required=True)
    s.add_argument("--beam", type=int, default=1)
    s.add_argument("--max-ratio", type=float, default=2.0)
    s.set_defaults(func=cmd_translate)

    s = sub.add_parser("score", help="BLEU, NIST, METEOR and TER of a hypothesis file")
    s.add_argument("--hyp", required=True)
    s.add_argument("--ref", required=True)
    s.add_argument("--lines", choices=("bleu", "nist", "meteor", "ter"),
                   help="print one segment-level score per line instead")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("report", help="render scores.json")
    s.add_argument("--scores", required=True)
    s.add_argument("--format", choices=("text", "json"), default="text")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("run", help="full pipeline (bundled toy corpus without --config)")
    s.add_argument("--config")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"mtlab {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
