"""Train a small Kneser-Ney model on the bundled English side and query it.

Run: python demos/language_model.py
"""

from collections import Counter

from mtlab import corpus, lm, toydata


def main():
    _, en_path = toydata.toy_paths()
    sents = [corpus.tokenize(line) for line in en_path.read_text(encoding="utf-8").splitlines()]
    train, dev = sents[:1800], sents[1800:]
    vocab = corpus.Vocabulary(Counter(w for s in train for w in s))

    for order in (1, 2, 3, 4):
        model = lm.train_lm([vocab.encode(s, wrap=True) for s in train], order, vocabulary=vocab)
        ppl = lm.perplexity(model, [vocab.encode(s, wrap=True) for s in dev])
        print(f"order {order}: dev perplexity {ppl:7.2f}  discounts "
              + " ".join(f"{d:.3f}" for d in model.discounts[1:]))

    # unseen words all share the unknown-word mass
    ctx = [vocab.id(w) for w in ("twice", "a")]
    for word in ("day", "meal", "tablet", "zebra"):
        p = model.prob(model.word_id(word), ctx)
        print(f"P({word} | twice a) = {p:.4f}")


if __name__ == "__main__":
    main()
