"""Word alignment, symmetrization and phrase extraction on a few sentence pairs.

Run: python demos/alignment_and_phrases.py
"""

from mtlab import align, corpus, toydata


def show(matrix, src, tgt):
    print("      " + " ".join(f"{w[:6]:>6}" for w in tgt))
    for i, w in enumerate(src):
        row = " ".join(f"{'#' if (i, j) in matrix.points else '.':>6}" for j in range(len(tgt)))
        print(f"{w[:6]:>6}{row}")


def main():
    pl, en = toydata.toy_paths()
    pairs = corpus.tokenize_corpus(corpus.load_parallel(pl, en, "pl", "en"))

    fwd = align.train_ibm1(pairs, 10)
    rev = align.train_ibm1(pairs.reversed(), 10)
    print("IBM-1 log-likelihood by iteration:",
          " ".join(f"{x:.0f}" for x in fwd.log_likelihood))

    pair = pairs.pairs[8]
    a_fwd = align.viterbi_align(fwd, pair, "fwd")
    a_rev = align.viterbi_align(rev, pair, "rev")
    sym = align.grow_diag_final(a_fwd, a_rev)
    print(f"\n{' '.join(pair.source)}\n{' '.join(pair.target)}\n")
    print(f"forward {len(a_fwd.points)} points, reverse {len(a_rev.points)}, "
          f"intersection {len(align.intersect(a_fwd, a_rev).points)}, grow-diag-final {len(sym.points)}")
    show(sym, pair.source, pair.target)

    phrases = align.extract_phrases(pair, sym, max_len=3)
    print(f"\n{len(phrases)} phrase pairs up to three words, for example:")
    for ph in phrases[:8]:
        print(f"  {' '.join(ph.source):<28} -> {' '.join(ph.target)}")


if __name__ == "__main__":
    main()
