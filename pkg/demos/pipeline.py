"""Run the full three-system comparison on the bundled corpus.

Equivalent to ``mtlab run --out runs/toy``. Takes a few minutes.
Run: python demos/pipeline.py [output-dir]
"""

import sys

from mtlab import bench


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else "runs/toy"
    table = bench.run_pipeline(bench.toy_config(out))
    print(bench.render_report(table, "text"))
    print(f"artifacts written under {out}/")


if __name__ == "__main__":
    main()
