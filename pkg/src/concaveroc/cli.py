"""Command-line entry point: ``concaveroc {fit,simulate,truth,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import FitError, InputError
from .io import RunConfig, dump_json, plot_curves, read_dataset, write_fit_outputs
from .mcmc import derive_seed
from .models import MODEL_IDS, fit_model, normalize_model_id
from .roc import default_grid, empirical_roc
from .simulation import (
    ScenarioConfig,
    SimulationReport,
    parse_scenario,
    run_scenario,
    scenario_names,
)

EXIT_OK, EXIT_UNCONVERGED, EXIT_INPUT, EXIT_FIT = 0, 1, 2, 3

log = logging.getLogger("concaveroc")


def _split(values) -> list[str]:
    out = []
    for v in values or []:
        out += [s for s in v.split(",") if s.strip()]
    return out


def _resolve_seed(seed):
    """Explicit seed, or fresh OS entropy that is echoed so the run can be repeated."""
    if seed is not None:
        return int(seed), False
    return int(np.random.SeedSequence().entropy % (2**63)), True


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if getattr(args, "fit", None):
        cfg.models = [normalize_model_id(m) for m in _split(args.fit)]
    if getattr(args, "replicates", None) is not None:
        if args.replicates < 1:
            raise InputError("--replicates must be positive")
        cfg.replicates = args.replicates
    if getattr(args, "scenario", None):
        cfg.scenarios = _split(args.scenario)
    if args.out:
        cfg.out = args.out
    return cfg


def _out_dir(cfg: RunConfig, default: str) -> Path:
    return Path(cfg.out or default)


# ----------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    cfg = _load_config(args)
    if not args.data:
        raise InputError("fit needs --data")
    sample = read_dataset(args.data, log_transform=cfg.log_transform)
    # gamma scores live on the positive raw scale; the log transform serves the normal-based models
    raw = read_dataset(args.data) if cfg.log_transform else sample
    seed, fresh = _resolve_seed(args.seed)
    grid = default_grid(cfg.grid_size)
    fits = []
    for m in cfg.models:
        chains = cfg.chain_config(derive_seed(seed, MODEL_IDS.index(m)))
        fit = fit_model(m, raw if m == "BG" else sample, chains, grid, reference_mode=cfg.reference_mode)
        fits.append(fit)
        s = fit.auc_summary()
        flag = "" if fit.converged else "  [not converged]"
        print(f"{m:5s} AUC {s['mean']:.3f} ({s['q025']:.3f}, {s['q975']:.3f}){flag}")
        for note in fit.notes:
            if "separated" in note:
                print(f"warning: {m}: {note}", file=sys.stderr)
    out = _out_dir(cfg, "fit_output")
    info = {
        "command": "fit",
        "data": str(args.data),
        "seed": seed,
        "seed_from_entropy": fresh,
        "n0": sample.n0,
        "n1": sample.n1,
        "empirical_auc": empirical_roc(sample, grid).auc,
        "config": cfg.to_dict(),
    }
    for f in fits:
        f.compact()
    write_fit_outputs(fits, out, info)
    print(f"outputs written to {out}" + (f" (seed {seed})" if fresh else ""))
    if not all(f.converged for f in fits):
        print("warning: some chains did not converge (R-hat >= 1.1); outputs are flagged", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _scenario_configs(cfg: RunConfig, seed: int) -> list[ScenarioConfig]:
    names = cfg.scenarios
    if not names:
        raise InputError(f"simulate needs --scenario; valid scenarios: {', '.join(scenario_names())}")
    if names == ["all"]:
        names = scenario_names()
    out = []
    for n in names:
        parse_scenario(n)
        kw = dict(
            n0=cfg.n0,
            n1=cfg.n1,
            replicates=cfg.replicates,
            fit_models=tuple(cfg.models),
            seed=seed,
            chains=cfg.sim_chain_config(),
        )
        sc = ScenarioConfig.from_name(n, **kw)
        if n in cfg.params:
            sc = replace(sc, params=dict(cfg.params[n]), override=True)
        out.append(sc)
    return out


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    seed, fresh = _resolve_seed(args.seed)
    scenarios = _scenario_configs(cfg, seed)
    reports = []
    for sc in scenarios:
        truth = sc.truth(cfg.truth_reps)
        print(f"{sc.name}: true AUC {truth.true_auc:.4f} ({truth.provenance}), {sc.replicates} replicates", file=sys.stderr)
        reports.append(run_scenario(sc, workers=args.threads, truth=truth))
    report = SimulationReport.merge(reports)
    for rep in reports:
        report.meta.update(rep.meta)
    report.meta["seed"] = seed
    report.meta["seed_from_entropy"] = fresh
    out = _out_dir(cfg, "simulation_output")
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(out / "simulation.csv")
    report.to_json(out / "simulation.json")
    sys.stdout.write(report.to_csv())
    print(f"outputs written to {out}" + (f" (seed {seed})" if fresh else ""), file=sys.stderr)
    return EXIT_OK


def cmd_truth(args) -> int:
    cfg = _load_config(args)
    seed, fresh = _resolve_seed(args.seed)
    names = cfg.scenarios or []
    if not names:
        raise InputError(f"truth needs --scenario; valid scenarios: {', '.join(scenario_names())}")
    if names == ["all"]:
        names = scenario_names()
    out = _out_dir(cfg, "truth_output")
    configs = [ScenarioConfig.from_name(n, seed=seed, n1=cfg.n1) for n in names]
    out.mkdir(parents=True, exist_ok=True)
    curves = {}
    for sc in configs:
        truth = sc.truth(cfg.truth_reps)
        truth.curve.to_csv(out / f"{sc.name}_truth.csv")
        dump_json(
            {
                "scenario": sc.name,
                "params": sc.params,
                "true_auc": truth.true_auc,
                "provenance": truth.provenance,
                "seed": seed,
                "seed_from_entropy": fresh,
                "roc_csv": f"{sc.name}_truth.csv",
            },
            out / f"{sc.name}_truth.json",
        )
        curves[sc.name] = truth.curve
        print(f"{sc.name}: AUC {truth.true_auc:.4f} ({truth.provenance})")
    plot_curves(curves, out / "truth.svg", title="True ROC curves")
    return EXIT_OK


def cmd_report(args) -> int:
    if not args.inputs:
        raise InputError("report needs one or more simulation CSV files")
    reports = []
    for p in args.inputs:
        if not Path(p).is_file():
            raise InputError(f"simulation CSV not found: {p}")
        reports.append(SimulationReport.from_csv(Path(p)))
    merged = SimulationReport.merge(reports)
    text = merged.to_csv()
    if args.out:
        out = Path(args.out)
        if out.suffix.lower() != ".csv":
            out.mkdir(parents=True, exist_ok=True)
            out = out / "table1.csv"
        else:
            out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8", newline="")
    sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="concaveroc",
        description="Bayesian concave ROC estimation from placement values.",
        epilog="Exit codes: 0 ok, 1 chains not converged (outputs written), 2 input error, 3 fit error.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fit=True):
        sp.add_argument("--config", help="JSON run config; unknown keys are rejected")
        sp.add_argument("--seed", type=int, help="master seed; omitted = fresh entropy, echoed in the outputs")
        sp.add_argument("--out", help="output directory")
        if fit:
            sp.add_argument("--fit", action="append", help=f"models to fit, comma separated ({', '.join(MODEL_IDS)})")

    sp = sub.add_parser(
        "fit",
        help="fit models to a score,group CSV",
        description="Fit models to a dataset. Defaults: all five models, 4 chains, "
        "burn-in 2000, 1250 kept draws per chain, parametric reference fit, log transform on "
        "(BG is always fit to the raw positive scores).",
    )
    sp.add_argument("--data", required=True, help="CSV with columns score,group (0 reference, 1 affected)")
    common(sp)
    sp.add_argument("--threads", type=int, default=1, help="accepted for symmetry; fits run single-threaded")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser(
        "simulate",
        help="replicated bias/EMSE study",
        description="Run registry scenarios. Defaults: 50 replicates, N=1000 per group, "
        "2 chains with burn-in 500 and 1000 kept draws per chain.",
    )
    sp.add_argument("--scenario", action="append", help=f"scenario names or 'all' ({', '.join(scenario_names())})")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--threads", type=int, default=1, help="worker processes for replicates")
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("truth", help="write a scenario's true ROC curve and AUC")
    sp.add_argument("--scenario", action="append", help="scenario names or 'all'")
    common(sp, fit=False)
    sp.set_defaults(func=cmd_truth)

    sp = sub.add_parser("report", help="merge simulation CSVs into one table")
    sp.add_argument("inputs", nargs="*", help="simulation CSV files")
    sp.add_argument("--out", help="output CSV path or directory")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
