"""Train phrase-based models on the toy corpus and decode a few test sentences.

Run: python demos/decoding.py
"""

from collections import Counter

from mtlab import align, corpus, decoder, lm, metrics, toydata


def main():
    pl, en = toydata.toy_paths()
    data = corpus.tokenize_corpus(corpus.load_parallel(pl, en, "pl", "en"))
    train, test = corpus.split_corpus(data, corpus.SplitSpec(20, 50, seed=1))

    table, reordering, _, _ = align.train_phrase_models(train, iterations=8, max_phrase_len=4)
    targets = train.targets()
    vocab = corpus.Vocabulary(Counter(w for s in targets for w in s))
    model = lm.train_lm([vocab.encode(s, wrap=True) for s in targets], 4, vocabulary=vocab)
    print(f"{len(table)} phrase pairs, {len(reordering.entries)} reordering entries")

    config = decoder.DecoderConfig(beam_size=30)
    hyps = []
    for pair in test.pairs:
        result = decoder.decode(pair.source, table, reordering, model, config)
        hyps.append(result.target)
    for pair, hyp in list(zip(test.pairs, hyps))[:3]:
        print(f"\nsource: {' '.join(pair.source)}\noutput: {' '.join(hyp)}\n   ref: {' '.join(pair.target)}")

    first = decoder.decode(test.pairs[0].source, table, reordering, model, config)
    print("\nderivation of the first sentence:")
    for step in first.derivation:
        print(f"  {step.span}  {step.orientation}  {' '.join(step.source)} -> {' '.join(step.target)}")

    rep = metrics.score_corpus(hyps, test.targets())
    print(f"\nBLEU {rep.bleu:.2f}  METEOR {rep.meteor:.2f}  TER {rep.ter:.2f}")


if __name__ == "__main__":
    main()
