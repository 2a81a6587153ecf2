"""File formats: datasets, run configs, fit outputs and plots."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import InputError
from .mcmc import ChainConfig
from .models import MODEL_IDS, ModelFit, normalize_model_id
from .roc import GRID_SIZE, RocCurve, Sample

# ----------------------------------------------------------------------------
# datasets


def read_dataset(path, log_transform: bool = False) -> Sample:
    """Read a ``score,group`` CSV (group 0 = reference, 1 = affected).

    Extra columns are ignored.  With ``log_transform`` every score must be
    positive and the returned sample holds natural logs.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"dataset not found: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        cols = [c.strip() for c in reader.fieldnames or []]
        missing = [c for c in ("score", "group") if c not in cols]
        if missing:
            raise InputError(f"{path.name}: missing column(s) {', '.join(missing)}; expected header 'score,group'")
        groups: dict[int, list[float]] = {0: [], 1: []}
        for line, row in enumerate(reader, start=2):
            row = {k.strip(): v for k, v in row.items() if k is not None}
            g_raw, s_raw = (row.get("group") or "").strip(), (row.get("score") or "").strip()
            try:
                g = int(float(g_raw))
                if g not in groups or float(g_raw) != g:
                    raise ValueError
            except ValueError:
                raise InputError(f"{path.name} line {line}: group must be 0 or 1, got {g_raw!r}") from None
            try:
                s = float(s_raw)
            except ValueError:
                raise InputError(f"{path.name} line {line}: score {s_raw!r} is not a number") from None
            if not math.isfinite(s):
                raise InputError(f"{path.name} line {line}: score must be finite")
            if log_transform and s <= 0:
                raise InputError(f"{path.name} line {line}: log transform needs positive scores, got {s}")
            groups[g].append(s)
    for g, name in ((0, "reference"), (1, "affected")):
        if len(groups[g]) < 2:
            raise InputError(f"{path.name}: the {name} group (group {g}) needs at least 2 rows")
    y0, y1 = np.array(groups[0]), np.array(groups[1])
    if log_transform:
        y0, y1 = np.log(y0), np.log(y1)
    return Sample(y0, y1)


def write_dataset(sample: Sample, path) -> None:
    buf = io.StringIO(newline="")
    buf.write("score,group\n")
    for g, ys in ((0, sample.scores0), (1, sample.scores1)):
        for y in ys:
            buf.write(f"{float(y)!r},{g}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


# ----------------------------------------------------------------------------
# run configuration


@dataclass
class RunConfig:
    """Options shared by the CLI commands; any field may come from a JSON file."""

    models: list[str] = field(default_factory=lambda: list(MODEL_IDS))
    n_chains: int = 4
    burn_in: int = 2000
    keep: int = 1250
    thin: int = 1
    reference_mode: str = "parametric"
    log_transform: bool = True
    grid_size: int = GRID_SIZE
    out: str | None = None
    scenarios: list[str] = field(default_factory=list)
    replicates: int = 50
    n0: int = 1000
    n1: int = 1000
    params: dict = field(default_factory=dict)
    sim_burn_in: int = 500
    sim_keep: int = 1000
    sim_chains: int = 2
    truth_reps: int = 10_000

    def __post_init__(self):
        self.models = [normalize_model_id(m) for m in self.models]
        if self.reference_mode not in ("parametric", "dpm"):
            raise InputError("reference_mode must be 'parametric' or 'dpm'")
        if self.grid_size < 3:
            raise InputError("grid_size must be at least 3")
        for name in ("n_chains", "burn_in", "keep", "thin", "replicates", "n0", "n1", "sim_burn_in", "sim_keep", "sim_chains", "truth_reps"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise InputError(f"{name} must be a positive integer")
        if min(self.n_chains, self.sim_chains) < 2:
            raise InputError("at least 2 chains are needed for convergence diagnostics")
        if min(self.keep, self.sim_keep) < 1000:
            raise InputError("keep must be at least 1000 draws per chain")

    def chain_config(self, seed) -> ChainConfig:
        return ChainConfig(self.n_chains, self.burn_in, self.keep, self.thin, seed)

    def sim_chain_config(self) -> ChainConfig:
        return ChainConfig(self.sim_chains, self.sim_burn_in, self.sim_keep, 1)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InputError(f"unknown config key(s): {', '.join(unknown)}; valid keys: {', '.join(sorted(known))}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InputError(f"bad config: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InputError(f"config not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{path.name} is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise InputError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------------------
# outputs


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8", newline="")


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


AUC_TABLE_COLUMNS = ("model", "auc_mean", "auc_q025", "auc_q975", "converged")


def auc_table_csv(fits: list[ModelFit]) -> str:
    buf = io.StringIO(newline="")
    buf.write(",".join(AUC_TABLE_COLUMNS) + "\n")
    for f in fits:
        s = f.auc_summary()
        buf.write(f"{f.model},{s['mean']:.6f},{s['q025']:.6f},{s['q975']:.6f},{str(f.converged).lower()}\n")
    return buf.getvalue()


def read_auc_table(source) -> list[dict]:
    text = Path(source).read_text(encoding="utf-8") if isinstance(source, Path) or "\n" not in str(source) else source
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != AUC_TABLE_COLUMNS:
        raise InputError(f"AUC table must have columns {','.join(AUC_TABLE_COLUMNS)}")
    return [
        {
            "model": r["model"],
            "auc_mean": float(r["auc_mean"]),
            "auc_q025": float(r["auc_q025"]),
            "auc_q975": float(r["auc_q975"]),
            "converged": r["converged"] == "true",
        }
        for r in reader
    ]


def write_fit_outputs(fits: list[ModelFit], out_dir, run_info: dict, plot: bool = True) -> list[Path]:
    """Write per-model JSON and ROC CSV, the AUC table, a run summary and the overlay plot."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for f in fits:
        roc_name = f"{f.model}_roc.csv"
        f.mean_curve.to_csv(out / roc_name)
        f.to_json(out / f"{f.model}.json", roc_csv=roc_name)
        written += [out / roc_name, out / f"{f.model}.json"]
    (out / "auc_table.csv").write_text(auc_table_csv(fits), encoding="utf-8", newline="")
    summary = dict(run_info)
    summary["models"] = {f.model: f.to_dict(f"{f.model}_roc.csv") for f in fits}
    summary["all_converged"] = all(f.converged for f in fits)
    dump_json(summary, out / "summary.json")
    written += [out / "auc_table.csv", out / "summary.json"]
    if plot:
        written.append(plot_curves({f.model: f.mean_curve for f in fits}, out / "roc_overlay.svg"))
    return written


def plot_curves(curves: dict[str, RocCurve], path, title: str = "Posterior mean ROC curves") -> Path:
    """Static SVG overlay of ROC curves with the chance line and an AUC legend."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "concaveroc"
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--", label="chance")
    for name, c in curves.items():
        ax.plot(c.grid, c.values, lw=1.2, label=f"{name} (AUC {c.auc:.3f})")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(title)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
