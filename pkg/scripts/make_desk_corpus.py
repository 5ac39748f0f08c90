#!/usr/bin/env python3
"""Generate the procedural HR corpora used by the desk-scale preset.

Writes 32 training images (indices 0001-0032; the split uses 1-16 as the
degraded-input half and 17-32 as the clean-HR half) plus a small held-out
evaluation set. Run `cyclesr degrade` afterwards to produce the LR inputs.
"""

import argparse
from pathlib import Path

from cyclesr.synth import make_synthetic_corpus


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--train-root", default="data/desk/train")
    p.add_argument("--eval-root", default="data/desk/eval")
    p.add_argument("--train-count", type=int, default=32)
    p.add_argument("--eval-count", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    train = make_synthetic_corpus(
        Path(args.train_root) / "hr", count=args.train_count, seed=args.seed
    )
    evals = make_synthetic_corpus(
        Path(args.eval_root) / "hr", count=args.eval_count, seed=args.seed + 1
    )
    print(f"wrote {len(train)} training and {len(evals)} evaluation HR images")


if __name__ == "__main__":
    main()
