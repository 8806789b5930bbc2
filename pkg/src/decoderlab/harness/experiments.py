"""Fixed experiment protocols shared by the scripts and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..decoders import INTERP_KINDS, TRANSPOSED_KINDS, UpsamplerKind
from .compare import ComparisonTable, run_comparison
from .config import NetworkConfig, override

STUDY_ITERATIONS = 500
STUDY_SEEDS = (0, 1, 2)


def residual_study(task: str, iterations: int = STUDY_ITERATIONS, seeds=STUDY_SEEDS, kinds=None,
                   out_dir=None) -> ComparisonTable:
    """Every kind with and without the residual connection, same budget, several seeds."""
    base = override(NetworkConfig(), run__task=task, schedule__iterations=iterations)
    return run_comparison(task, kinds, flags=[(False, False), (False, True)], out_dir=out_dir, base=base,
                          seeds=seeds)


@dataclass
class ResidualOutcome:
    kind: str
    plain: float
    residual: float

    @property
    def residual_helps(self) -> bool:
        return self.residual <= self.plain


def residual_outcomes(table: ComparisonTable) -> list[ResidualOutcome]:
    """Seed-averaged final validation loss per kind, without and with the residual connection."""
    kinds = list(dict.fromkeys(r["kind"] for r in table.rows))
    out = []
    for kind in kinds:
        plain = np.mean([r["val_loss"] for r in table.select(kind=kind, residual=False, skip=False)])
        res = np.mean([r["val_loss"] for r in table.select(kind=kind, residual=True, skip=False)])
        out.append(ResidualOutcome(kind, float(plain), float(res)))
    return out


def artifact_means(table: ComparisonTable, residual: bool = False) -> dict[str, float]:
    """Mean over seeds and both axes of the triplet artifact rate, per kind."""
    means = {}
    for kind in dict.fromkeys(r["kind"] for r in table.rows):
        rows = table.select(kind=kind, residual=residual, skip=False)
        means[kind] = float(np.mean([0.5 * (r["artifacts_x"] + r["artifacts_y"]) for r in rows]))
    return means


def artifact_groups(means: dict[str, float]) -> tuple[float, float]:
    """(interpolating kinds, transposed and depth-to-space kinds) group means."""
    interp = [means[UpsamplerKind(k).value] for k in INTERP_KINDS]
    learned = [means[UpsamplerKind(k).value] for k in TRANSPOSED_KINDS]
    return float(np.mean(interp)), float(np.mean(learned))
