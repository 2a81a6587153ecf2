from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..mcmc import ChainDiagnostics, Draws
from ..roc import RocCurve, concavity_violations, default_grid

MODEL_IDS = ("BN", "BG", "PBN", "pCN", "spCN")
CONCAVE_MODELS = frozenset({"BG", "PBN", "pCN", "spCN"})


@dataclass
class ModelFit:
    """Posterior ROC/AUC summaries of one fitted model.

    ``roc_draws`` holds one curve per retained draw (rows) on ``grid``; it can
    be dropped with :meth:`compact` once summaries are computed.
    """

    model: str
    grid: np.ndarray
    auc_draws: np.ndarray
    roc_draws: np.ndarray | None
    diagnostics: ChainDiagnostics
    draws: Draws
    mean_curve: RocCurve = field(init=False)
    concavity_violations: int | None = field(init=False)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.auc_draws = np.asarray(self.auc_draws, dtype=float)
        mean_values = self.roc_draws.mean(axis=0)
        self.mean_curve = RocCurve(self.grid, mean_values, float(self.auc_draws.mean()))
        if self.model in CONCAVE_MODELS:
            self.concavity_violations = concavity_violations(self.roc_draws, self.grid)
        else:
            self.concavity_violations = None

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged

    def auc_summary(self) -> dict:
        a = self.auc_draws
        lo, hi = np.quantile(a, [0.025, 0.975])
        return {
            "mean": float(a.mean()),
            "sd": float(a.std(ddof=1)),
            "q025": float(lo),
            "q975": float(hi),
        }

    def compact(self) -> "ModelFit":
        self.roc_draws = None
        self.draws.records = None
        return self

    def to_dict(self, roc_csv: str | None = None) -> dict:
        s = self.auc_summary()
        return {
            "model": self.model,
            "auc_mean": s["mean"],
            "auc_sd": s["sd"],
            "auc_q025": s["q025"],
            "auc_q975": s["q975"],
            "n_draws": int(self.auc_draws.size),
            "r_hat": self.diagnostics.to_dict()["r_hat"],
            "effective_sample_size": self.diagnostics.to_dict()["effective_sample_size"],
            "converged": self.diagnostics.converged,
            "concavity_violations": self.concavity_violations,
            "crosses_chance_line": self.mean_curve.crosses_chance_line(),
            "roc_csv": roc_csv,
            "notes": list(self.notes),
        }

    def to_json(self, path=None, roc_csv: str | None = None) -> str:
        text = json.dumps(self.to_dict(roc_csv), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def grid_or_default(grid):
    return default_grid() if grid is None else np.asarray(grid, dtype=float)


def dispersion(chain: int, n_chains: int) -> float:
    """Symmetric offsets in [-1, 1] used to spread chain starting points."""
    if n_chains == 1:
        return 0.0
    return 2.0 * chain / (n_chains - 1) - 1.0
