"""Sliced Wasserstein distance of WGAN-GP pattern generators, one per upsampler kind.

    python scripts/gan_patterns.py --iterations 200 --residual
"""

import argparse
import json

from decoderlab.decoders import ALL_KINDS
from decoderlab.gan import GanConfig, train_gan


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--iterations", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--residual", action="store_true")
    parser.add_argument("--out", default=None, help="optional JSON file for the distances")
    args = parser.parse_args()
    distances = {}
    for kind in ALL_KINDS:
        cfg = GanConfig(data="patterns", kind=kind.value, residual=args.residual, iterations=args.iterations,
                        batch=16, seed=args.seed)
        distances[kind.value] = train_gan(cfg).distance
        print(f"{kind.value:22s} sliced W {distances[kind.value]:.4f}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(distances, f, indent=2)


if __name__ == "__main__":
    main()
