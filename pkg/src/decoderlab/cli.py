"""Command-line entry point: ``decoderlab <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .artifacts import artifact_rate, dependency_map
from .costs import introspect_costs
from .decoders import ALL_KINDS, build_network
from .fileio import list_dft, read_dft, write_pgm
from .gan import GanConfig, train_gan
from .harness import tasks
from .harness.compare import run_comparison
from .harness.config import TASKS, NetworkConfig, load_config, override
from .harness.train import TrainingDiverged, limited_threads, train

KIND_NAMES = [k.value for k in ALL_KINDS]


def _write(out: Path | None, name: str, text: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _stack(path) -> np.ndarray:
    files = list_dft(path)
    if not files:
        raise FileNotFoundError(f"no .dft files at {path}")
    return np.concatenate([read_dft(f).data for f in files])


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.iterations is not None:
        cfg = override(cfg, schedule__iterations=args.iterations)
    if args.seed is not None:
        cfg = override(cfg, run__seed=args.seed)
    out = Path(args.out)
    if cfg.run.gan:
        g = cfg.gan
        gcfg = GanConfig(data=g.data, modes=g.modes, kind=cfg.network.upsampler, residual=cfg.network.residual,
                         iterations=cfg.schedule.iterations, batch=g.batch, latent=g.latent,
                         critic_steps=g.critic_steps, lam=g.lam, lr=cfg.optim.lr or GanConfig.lr,
                         beta1=cfg.optim.beta1, beta2=cfg.optim.beta2, seed=cfg.run.seed)
        with limited_threads():
            res = train_gan(gcfg)
        summary = {"sliced_wasserstein": res.distance, "log": res.log}
        _write(out, "gan.json", json.dumps(summary, indent=2))
        print(json.dumps({"sliced_wasserstein": res.distance}))
        return 0
    try:
        result = train(cfg, out)
    except TrainingDiverged as err:
        print(f"error: {err}", file=sys.stderr)
        print(json.dumps(err.snapshot, indent=2, default=str), file=sys.stderr)
        return 3
    print(json.dumps({"checkpoint": str(result.checkpoint), "val_loss": result.val_loss, **result.metrics},
                     default=float))
    return 0


def cmd_eval(args) -> int:
    pred, target = _stack(args.pred), _stack(args.target)
    if pred.shape[0] != target.shape[0] or pred.shape[2:] != target.shape[2:]:
        print(f"error: prediction {pred.shape} and target {target.shape} do not line up", file=sys.stderr)
        return 2
    metrics = tasks.evaluate_arrays(args.task, pred, target, num_classes=args.classes, head_length=args.head_length)
    text = json.dumps(metrics, indent=2, default=float)
    _write(Path(args.out) if args.out else None, "metrics.json", text)
    print(text)
    return 0


def cmd_count(args) -> int:
    cfg = load_config(args.config)
    net = build_network(tasks.build_topology(cfg), cfg.run.seed)
    report = introspect_costs(net, tasks.input_shape(cfg))
    out = Path(args.out) if args.out else None
    _write(out, "costs.csv", report.to_csv())
    _write(out, "costs.json", report.to_json())
    print(report.to_json() if args.format == "json" else report.to_csv(), end="")
    return 0


def cmd_artifacts(args) -> int:
    if args.probe:
        counts = dependency_map(args.probe, (args.kernel, args.kernel), (args.dims, args.dims))
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            write_pgm(out / f"dependency_{args.probe}.pgm", counts.astype(np.float64))
            np.savetxt(out / f"dependency_{args.probe}.csv", counts, fmt="%d", delimiter=",")
        print("\n".join(" ".join(f"{v:2d}" for v in row) for row in counts))
        return 0
    if not (args.gt and args.pred):
        print("error: --gt and --pred are required unless --probe is given", file=sys.stderr)
        return 2
    gt_files, pred_files = list_dft(args.gt), list_dft(args.pred)
    gt, pred = _stack(args.gt), _stack(args.pred)
    if gt.shape != pred.shape:
        print(f"error: ground truth {gt.shape} and prediction {pred.shape} differ", file=sys.stderr)
        return 2
    names = None
    if len(pred_files) == gt.shape[0]:
        names = [f.stem for f in pred_files]
    report = artifact_rate(gt, pred, args.min_depth, args.max_step, names=names)
    out = Path(args.out) if args.out else None
    _write(out, "artifacts.csv", report.to_csv())
    _write(out, "artifacts.json", report.to_json())
    print(report.to_json() if args.format == "json" else report.to_csv(), end="" if args.format == "csv" else "\n")
    return 0


def cmd_compare(args) -> int:
    base = load_config(args.config) if args.config else NetworkConfig()
    if args.iterations is not None:
        base = override(base, schedule__iterations=args.iterations)
    with limited_threads():
        table = run_comparison(args.task, args.kinds, out_dir=args.out, base=base, seeds=tuple(args.seeds))
    print(table.to_csv(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decoderlab", description="Decoder upsampling layers: training, costs, artifacts.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one network from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="runs/train")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="task metrics for saved predictions")
    p.add_argument("--pred", required=True, help=".dft file or directory")
    p.add_argument("--target", required=True, help=".dft file or directory")
    p.add_argument("--task", required=True, choices=[*TASKS, "color"])
    p.add_argument("--classes", type=int)
    p.add_argument("--head-length", type=float, default=8.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("count", help="parameter and MAC counts per layer")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_count)

    p = sub.add_parser("artifacts", help="monotonic-triplet artifact rate, or a dependency-map probe")
    p.add_argument("--gt")
    p.add_argument("--pred")
    p.add_argument("--min-depth", type=float, default=0.3)
    p.add_argument("--max-step", type=float, default=0.01)
    p.add_argument("--probe", choices=KIND_NAMES)
    p.add_argument("--kernel", type=int, default=3)
    p.add_argument("--dims", type=int, default=8)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.set_defaults(func=cmd_artifacts)

    p = sub.add_parser("compare", help="train all upsampler variants for one task")
    p.add_argument("--task", required=True, choices=TASKS)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--kinds", nargs="+", choices=KIND_NAMES)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
