"""Score a few hand-made hypotheses with all four metrics.

Run: python demos/metrics_walkthrough.py
"""

from mtlab import metrics

REFERENCE = "take one tablet twice a day after a meal".split()
HYPOTHESES = {
    "exact": "take one tablet twice a day after a meal",
    "reordered": "after a meal take one tablet twice a day",
    "substituted": "take one capsule twice a day after food",
    "short": "take one tablet",
}


def main():
    print(f"reference: {' '.join(REFERENCE)}\n")
    print(f"{'hypothesis':<12} {'BLEU':>7} {'NIST':>6} {'METEOR':>7} {'TER':>7}  band")
    for name, text in HYPOTHESES.items():
        hyp = text.split()
        rep = metrics.score_corpus([hyp], [REFERENCE])
        print(f"{name:<12} {rep.bleu:7.2f} {rep.nist_raw:6.2f} {rep.meteor:7.2f} {rep.ter:7.2f}"
              f"  {metrics.interpret_bleu(rep.bleu)}")

    # TER counts a block move as one edit, which is why the reordered line scores well
    comp = metrics.ter_components("after a meal take one tablet twice a day".split(), REFERENCE)
    print(f"\nreordered: {comp.shifts} shift(s), {comp.edits} edit(s) in total")

    comp = metrics.meteor_components("take one capsule twice a day after food".split(), REFERENCE)
    print(f"substituted: METEOR matched {comp.matches} words in {comp.chunks} chunks")


if __name__ == "__main__":
    main()
