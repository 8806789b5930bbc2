"""Train every (upsampler kind, skip, residual) variant under one budget and tabulate results."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

from ..decoders import ALL_KINDS, UpsamplerKind
from ..fileio import write_dft
from .config import NetworkConfig, override
from .train import evaluate, train

BASE_COLUMNS = ["task", "kind", "skip", "residual", "seed", "iterations", "val_loss"]


def default_flags(task: str) -> list[tuple[bool, bool]]:
    """(skip, residual) combinations; super-resolution has no encoder to skip from."""
    if task == "superres":
        return [(False, False), (False, True)]
    return list(product((False, True), repeat=2))


def variant_name(kind: str, skip: bool, residual: bool) -> str:
    return f"{kind}{'_skip' if skip else ''}{'_res' if residual else ''}"


@dataclass
class ComparisonTable:
    rows: list[dict] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        extra = []
        for row in self.rows:
            extra += [k for k in row if k not in BASE_COLUMNS and k not in extra and k != "prediction"]
        return BASE_COLUMNS + extra + ["prediction"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, self.columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.rows)
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.rows, indent=2, default=float)

    def select(self, **match) -> list[dict]:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]


def run_comparison(task: str, kinds=None, flags=None, out_dir=None, base: NetworkConfig | None = None,
                   seeds=(0,)) -> ComparisonTable:
    base = override(base or NetworkConfig(), run__task=task)
    kinds = [UpsamplerKind(k).value for k in (kinds or ALL_KINDS)]
    flags = flags if flags is not None else default_flags(task)
    out_dir = Path(out_dir) if out_dir is not None else None
    pred_dir = None
    if out_dir is not None:
        pred_dir = out_dir / "predictions"
        pred_dir.mkdir(parents=True, exist_ok=True)
    table = ComparisonTable()
    for seed in seeds:
        for kind, (skip, residual) in product(kinds, flags):
            cfg = override(base, run__seed=seed, network__upsampler=kind, network__skip=skip,
                           network__residual=residual)
            result = train(cfg, evaluate_at_end=False)
            val_loss, metrics, pred, target = evaluate(cfg, result.network)
            row = {"task": task, "kind": kind, "skip": skip, "residual": residual, "seed": seed,
                   "iterations": cfg.schedule.iterations, "val_loss": val_loss, **metrics, "prediction": ""}
            if pred_dir is not None:
                name = f"{variant_name(kind, skip, residual)}_s{seed}.dft"
                write_dft(pred_dir / name, pred)
                write_dft(pred_dir / f"target_s{seed}.dft", target)
                row["prediction"] = f"predictions/{name}"
            table.rows.append(row)
    if out_dir is not None:
        (out_dir / "results.csv").write_text(table.to_csv())
        (out_dir / "results.json").write_text(table.to_json())
    return table
