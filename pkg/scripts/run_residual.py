"""Residual connection on/off for every upsampler kind on the desk superres and depth tasks.

Also reports the depth triplet artifact rates of the plain (non-residual) runs.

    python scripts/run_residual.py --out runs/residual
"""

import argparse
import json
import time
from pathlib import Path

from decoderlab.harness.experiments import (STUDY_ITERATIONS, STUDY_SEEDS, artifact_groups, artifact_means,
                                            residual_outcomes, residual_study)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/residual")
    parser.add_argument("--iterations", type=int, default=STUDY_ITERATIONS)
    parser.add_argument("--seeds", type=int, nargs="+", default=list(STUDY_SEEDS))
    parser.add_argument("--tasks", nargs="+", default=["superres", "depth"])
    args = parser.parse_args()
    summary = {}
    for task in args.tasks:
        start = time.time()
        table = residual_study(task, args.iterations, tuple(args.seeds), out_dir=Path(args.out) / task)
        outcomes = residual_outcomes(table)
        wins = sum(o.residual_helps for o in outcomes)
        print(f"{task}: residual <= plain for {wins}/{len(outcomes)} kinds ({time.time() - start:.0f}s)")
        for o in outcomes:
            print(f"  {o.kind:22s} plain {o.plain:.5f}  residual {o.residual:.5f}")
        summary[task] = {"wins": wins, "outcomes": [o.__dict__ for o in outcomes]}
        if task == "depth":
            means = artifact_means(table)
            interp, learned = artifact_groups(means)
            print(f"  artifact rate: interpolating {interp:.2f}%  transposed/depth-to-space {learned:.2f}%")
            summary[task]["artifacts"] = {"per_kind": means, "interpolating": interp, "learned": learned}
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "summary.json").write_text(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
