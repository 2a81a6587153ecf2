"""Data generators, the scenario registry and the replicated bias/EMSE study."""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .distributions import norm_cdf, norm_ppf
from .errors import FitError, InputError
from .mcmc import ChainConfig, derive_seed
from .models import MODEL_IDS, bg_auc, bg_roc_values, fit_model, normalize_model_id, pbn_auc, pbn_roc_values
from .roc import RocCurve, Sample, default_grid, emse

log = logging.getLogger(__name__)

GENERATORS = ("PBN", "BG", "PCN")
LEVELS = ("low", "medium", "high")

# (generator, level) -> generator parameters
REGISTRY: dict[tuple[str, str], dict[str, float]] = {
    ("PBN", "low"): {"alpha0": 0.5, "alpha1": 0.7},
    ("PBN", "medium"): {"alpha0": 0.5, "alpha1": 0.45},
    ("PBN", "high"): {"alpha0": 0.5, "alpha1": 0.28},
    ("BG", "low"): {"k": 1.0, "phi0": 1.0, "phi1": 2.0},
    ("BG", "medium"): {"k": 1.0, "phi0": 1.0, "phi1": 3.5},
    ("BG", "high"): {"k": 1.0, "phi0": 1.0, "phi1": 7.0},
    ("PCN", "low"): {"alpha0": 1.0, "alpha1": 1.0},
    ("PCN", "medium"): {"alpha0": 0.1, "alpha1": 3.0},
    ("PCN", "high"): {"alpha0": -15.0, "alpha1": 15.0},
}

# shorter chains for replicated studies; single fits use ChainConfig()
SIM_CHAINS = ChainConfig(n_chains=2, burn_in=500, keep=1000)
DEFAULT_REPLICATES = 50
TRUTH_REPS = 10_000
PV_EPS = 1e-12


def scenario_names() -> list[str]:
    return [f"{g.lower()}-{lv}" for g in GENERATORS for lv in LEVELS]


def parse_scenario(name: str) -> tuple[str, str]:
    try:
        g, lv = name.strip().lower().split("-")
        key = (g.upper(), lv)
        if key in REGISTRY:
            return key
    except ValueError:
        pass
    raise InputError(f"unknown scenario {name!r}; valid scenarios: {', '.join(scenario_names())}")


# ----------------------------------------------------------------------------
# generators


def generate_pbn(alpha0, alpha1, n0, n1, rng) -> Sample:
    """Reference N(0, 1); affected N(alpha0 / alpha1, 1 / alpha1^2)."""
    if not alpha1 > 0:
        raise InputError("alpha1 must be positive")
    y0 = rng.standard_normal(n0)
    y1 = alpha0 / alpha1 + rng.standard_normal(n1) / alpha1
    return Sample(y0, y1)


def generate_bg(k, phi0, phi1, n0, n1, rng) -> Sample:
    if not (k > 0 and phi0 > 0 and phi1 > 0):
        raise InputError("BG parameters must be positive")
    return Sample(rng.gamma(k, phi0, n0), rng.gamma(k, phi1, n1))


def _pcn_placements(alpha0, alpha1, n, rng):
    x = alpha0 / alpha1 + rng.standard_normal(n) / alpha1
    return rng.uniform(size=n) * norm_cdf(x)


def generate_pcn(alpha0, alpha1, n0, n1, rng) -> Sample:
    """Reference N(0, 1); affected scores are standard-normal quantiles of
    ``1 - z`` with ``z ~ U(0, Phi(x))`` and ``x ~ N(alpha0 / alpha1, 1 / alpha1^2)``."""
    if not alpha1 > 0:
        raise InputError("alpha1 must be positive")
    y0 = rng.standard_normal(n0)
    z = np.clip(_pcn_placements(alpha0, alpha1, n1, rng), PV_EPS, 1 - PV_EPS)
    return Sample(y0, norm_ppf(1 - z))


GENERATE = {"PBN": generate_pbn, "BG": generate_bg, "PCN": generate_pcn}


# ----------------------------------------------------------------------------
# truth


@dataclass(frozen=True)
class TruthCurve:
    curve: RocCurve
    true_auc: float
    provenance: str  # "closed-form" or "empirical-<reps>"

    def to_dict(self) -> dict:
        return {"true_auc": self.true_auc, "provenance": self.provenance}


def pcn_closed_form_auc(alpha0, alpha1) -> float:
    """``1 - E[Phi(x)] / 2`` with ``x ~ N(alpha0/alpha1, 1/alpha1^2)``; used as a cross-check only."""
    mu, sd = alpha0 / alpha1, 1.0 / alpha1
    return float(1 - norm_cdf(mu / np.sqrt(1 + sd * sd)) / 2)


def pcn_truth(alpha0, alpha1, reps: int = TRUTH_REPS, n_per_rep: int = 1000, rng=None, grid=None) -> TruthCurve:
    """Average of per-replicate empirical PV CDFs and of ``1 - mean(z)``.

    With equal replicate sizes the average of the empirical CDFs is the
    pooled empirical CDF, which is accumulated in chunks.
    """
    if reps < 1:
        raise InputError("reps must be at least 1")
    rng = np.random.default_rng(rng)
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    counts = np.zeros(grid.size + 1)
    total = 0.0
    chunk = max(1, 1_000_000 // n_per_rep)
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        z = _pcn_placements(alpha0, alpha1, m * n_per_rep, rng)
        # z <= grid[j] counted via the first grid index at or above z
        counts += np.bincount(np.searchsorted(grid, z, side="left"), minlength=grid.size + 1)
        total += z.sum()
        done += m
    n = reps * n_per_rep
    values = np.cumsum(counts)[: grid.size] / n
    auc = 1.0 - total / n
    return TruthCurve(RocCurve(grid, values, auc), float(auc), f"empirical-{reps}")


@lru_cache(maxsize=32)
def _cached_pcn_truth(alpha0, alpha1, reps, n_per_rep, seed):
    return pcn_truth(alpha0, alpha1, reps, n_per_rep, np.random.default_rng(seed))


def scenario_truth(generator: str, params: dict, seed=0, reps: int = TRUTH_REPS, n_per_rep: int = 1000) -> TruthCurve:
    grid = default_grid()
    if generator == "PBN":
        a0, a1 = params["alpha0"], params["alpha1"]
        auc = float(pbn_auc(a0, a1)[0])
        return TruthCurve(RocCurve(grid, pbn_roc_values(a0, a1, grid)[0], auc), auc, "closed-form")
    if generator == "BG":
        k, p0, p1 = params["k"], params["phi0"], params["phi1"]
        auc = float(bg_auc(k, p0, p1))
        return TruthCurve(RocCurve(grid, bg_roc_values(k, p0, p1, grid)[0], auc), auc, "closed-form")
    if generator == "PCN":
        seed = np.random.SeedSequence(derive_seed(seed, 7)).generate_state(2).tolist()
        return _cached_pcn_truth(params["alpha0"], params["alpha1"], reps, n_per_rep, tuple(seed))
    raise InputError(f"unknown generator {generator!r}")


# ----------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class ScenarioConfig:
    generator: str
    level: str
    params: dict
    n0: int = 1000
    n1: int = 1000
    replicates: int = DEFAULT_REPLICATES
    fit_models: tuple[str, ...] = MODEL_IDS
    seed: int = 0
    chains: ChainConfig = SIM_CHAINS
    override: bool = False

    def __post_init__(self):
        key = (self.generator, self.level)
        if key not in REGISTRY:
            raise InputError(f"unknown scenario {self.name!r}; valid scenarios: {', '.join(scenario_names())}")
        if not self.override and dict(self.params) != REGISTRY[key]:
            raise InputError(f"parameters for {self.name} differ from the registry; pass override=True to use them")
        if min(self.n0, self.n1, self.replicates) < 1:
            raise InputError("sample sizes and replicate count must be positive")
        object.__setattr__(self, "fit_models", tuple(normalize_model_id(m) for m in self.fit_models))
        if not self.fit_models:
            raise InputError("at least one fit model is required")

    @property
    def name(self) -> str:
        return f"{self.generator.lower()}-{self.level}"

    @classmethod
    def from_name(cls, name: str, **kw) -> "ScenarioConfig":
        g, lv = parse_scenario(name)
        return cls(g, lv, dict(REGISTRY[(g, lv)]), **kw)

    def truth(self, reps: int = TRUTH_REPS) -> TruthCurve:
        return scenario_truth(self.generator, self.params, self.seed, reps, self.n1)

    def reference_mode(self) -> str:
        # gamma reference scores are far from normal: use the mixture stage-1 fit
        return "dpm" if self.generator == "BG" else "parametric"


@dataclass
class ReplicateRecord:
    index: int
    model: str
    auc_mean: float | None
    auc_sd: float | None
    emse: float | None
    converged: bool | None
    concavity_violations: int | None
    error: str | None = None


def _model_chains(cfg: ScenarioConfig, index: int, model: str) -> ChainConfig:
    # one fixed stream per (replicate, model) so subsets of models reproduce
    return replace(cfg.chains, seed=derive_seed(cfg.seed, index, 1 + MODEL_IDS.index(model)))


def replicate_sample(cfg: ScenarioConfig, index: int) -> Sample:
    rng = np.random.default_rng(derive_seed(cfg.seed, index, 0))
    return GENERATE[cfg.generator](**cfg.params, n0=cfg.n0, n1=cfg.n1, rng=rng)


def fit_replicate(cfg: ScenarioConfig, index: int, model: str, sample: Sample):
    """Fit one model to one replicate, with the scenario's PV and BG conventions."""
    chains = _model_chains(cfg, index, model)
    mode = cfg.reference_mode()
    if model in ("pCN", "spCN") and mode == "dpm":
        # the mixture stage-1 fit works on log scores; PVs are invariant to the transform
        sample = sample.transform(np.log)
    return fit_model(model, sample, chains, reference_mode=mode, shift_for_bg=cfg.generator != "BG")


def run_replicate(cfg: ScenarioConfig, index: int, truth: TruthCurve) -> list[ReplicateRecord]:
    sample = replicate_sample(cfg, index)
    out = []
    for model in cfg.fit_models:
        try:
            fit = fit_replicate(cfg, index, model, sample)
        except (FitError, InputError, FloatingPointError, ValueError) as exc:
            log.warning("replicate %d, model %s failed: %s", index, model, exc)
            out.append(ReplicateRecord(index, model, None, None, None, None, None, f"{type(exc).__name__}: {exc}"))
            continue
        s = fit.auc_summary()
        out.append(
            ReplicateRecord(
                index,
                model,
                s["mean"],
                s["sd"],
                emse(fit.mean_curve, truth.curve),
                fit.converged,
                fit.concavity_violations,
            )
        )
    return out


def _run_replicate_star(args):
    return run_replicate(*args)


@dataclass
class SummaryRow:
    generator: str
    level: str
    fit_model: str
    true_auc: float
    mean_auc: float
    bias: float
    emse_x1000: float
    n_ok: int = 0
    n_failed: int = 0
    n_unconverged: int = 0


CSV_COLUMNS = ("generator", "level", "fit_model", "true_auc", "mean_auc", "bias", "emse_x1000")


@dataclass
class SimulationReport:
    rows: list[SummaryRow]
    records: dict[str, list[ReplicateRecord]] = field(default_factory=dict)  # scenario name -> records
    meta: dict = field(default_factory=dict)

    def row(self, generator: str, level: str, model: str) -> SummaryRow:
        for r in self.rows:
            if (r.generator, r.level, r.fit_model) == (generator, level, model):
                return r
        raise KeyError((generator, level, model))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO(newline="")
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            buf.write(
                f"{r.generator},{r.level},{r.fit_model},{r.true_auc:.6f},{_fmt(r.mean_auc)},{_fmt(r.bias)},{_fmt(r.emse_x1000)}\n"
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="")
        return text

    @classmethod
    def from_csv(cls, source) -> "SimulationReport":
        text = Path(source).read_text(encoding="utf-8") if _is_path(source) else source
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise InputError(f"simulation CSV must have columns {','.join(CSV_COLUMNS)}")
        rows = [
            SummaryRow(
                d["generator"],
                d["level"],
                d["fit_model"],
                float(d["true_auc"]),
                _parse(d["mean_auc"]),
                _parse(d["bias"]),
                _parse(d["emse_x1000"]),
            )
            for d in reader
        ]
        return cls(rows)

    def to_dict(self) -> dict:
        return {
            "meta": self.meta,
            "rows": [asdict(r) for r in self.rows],
            "replicates": {k: [asdict(r) for r in v] for k, v in sorted(self.records.items())},
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8", newline="")
        return text

    @classmethod
    def from_json(cls, source) -> "SimulationReport":
        text = Path(source).read_text(encoding="utf-8") if _is_path(source) else source
        d = json.loads(text)
        rows = [SummaryRow(**r) for r in d["rows"]]
        records = {k: [ReplicateRecord(**r) for r in v] for k, v in d.get("replicates", {}).items()}
        return cls(rows, records, d.get("meta", {}))

    @classmethod
    def merge(cls, reports: list["SimulationReport"]) -> "SimulationReport":
        """Combine reports; a later report's row replaces an earlier one for the same cell."""
        cells: dict[tuple, SummaryRow] = {}
        records: dict[str, list[ReplicateRecord]] = {}
        for rep in reports:
            for r in rep.rows:
                cells[(r.generator, r.level, r.fit_model)] = r
            records.update(rep.records)
        order = {g: i for i, g in enumerate(GENERATORS)}
        lv = {v: i for i, v in enumerate(LEVELS)}
        keys = sorted(cells, key=lambda c: (order.get(c[0], 99), lv.get(c[1], 99), _model_rank(c[2])))
        return cls([cells[k] for k in keys], records)


def _model_rank(m):
    return MODEL_IDS.index(m) if m in MODEL_IDS else 99


def _fmt(v):
    return "nan" if v is None or not np.isfinite(v) else f"{v:.6f}"


def _parse(s):
    return float(s)


def _is_path(source) -> bool:
    return isinstance(source, Path) or (isinstance(source, str) and "\n" not in source)


def summarize(cfg: ScenarioConfig, truth: TruthCurve, records: list[ReplicateRecord]) -> list[SummaryRow]:
    """Average replicate results per model; failures are counted and excluded."""
    rows = []
    for model in cfg.fit_models:
        recs = sorted((r for r in records if r.model == model), key=lambda r: r.index)
        ok = [r for r in recs if r.error is None]
        if ok:
            mean_auc = float(np.mean([r.auc_mean for r in ok]))
            emse_k = 1000.0 * float(np.mean([r.emse for r in ok]))
            bias = mean_auc - truth.true_auc
        else:
            mean_auc = bias = emse_k = float("nan")
        rows.append(
            SummaryRow(
                cfg.generator,
                cfg.level,
                model,
                truth.true_auc,
                mean_auc,
                bias,
                emse_k,
                n_ok=len(ok),
                n_failed=len(recs) - len(ok),
                n_unconverged=sum(1 for r in ok if not r.converged),
            )
        )
    return rows


def run_scenario(cfg: ScenarioConfig, workers: int = 1, indices=None, truth: TruthCurve | None = None) -> SimulationReport:
    """Generate ``cfg.replicates`` datasets, fit each requested model, aggregate.

    Replicate ``i`` draws all of its randomness from ``(cfg.seed, i)``, so the
    report does not depend on ``workers`` or on the order replicates run in.
    """
    truth = truth or cfg.truth()
    indices = list(range(cfg.replicates)) if indices is None else list(indices)
    jobs = [(cfg, i, truth) for i in indices]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replicate_star, jobs))
    else:
        results = [_run_replicate_star(j) for j in jobs]
    records = sorted((r for batch in results for r in batch), key=lambda r: (r.index, _model_rank(r.model)))
    rows = summarize(cfg, truth, records)
    meta = {
        "scenario": cfg.name,
        "params": dict(cfg.params),
        "n0": cfg.n0,
        "n1": cfg.n1,
        "replicates": len(indices),
        "seed": cfg.seed,
        "chains": {k: v for k, v in asdict(cfg.chains).items() if k != "seed"},
        "truth": truth.to_dict(),
    }
    return SimulationReport(rows, {cfg.name: records}, {cfg.name: meta})
