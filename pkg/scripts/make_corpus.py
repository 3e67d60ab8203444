#!/usr/bin/env python3
"""Generate the deterministic synthetic training corpus.

The images mix smooth gradients, Gaussian blobs, hard-edged rectangles,
stripes, and band-limited texture so that both denoising and sharpening
objectives have signal to work with.
"""

import argparse

from tuneconv.data import generate_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", help="directory to write PNGs into")
    parser.add_argument("--count", type=int, default=24)
    parser.add_argument("--size", type=int, default=96)
    parser.add_argument("--seed", type=int, default=1234)
    args = parser.parse_args()

    paths = generate_corpus(args.out_dir, count=args.count, size=args.size,
                            seed=args.seed)
    print(f"wrote {len(paths)} images to {args.out_dir}")


if __name__ == "__main__":
    main()
