import json

import numpy as np
import pytest

from concaveroc import cli
from concaveroc.errors import InputError
from concaveroc.io import RunConfig, read_auc_table, read_dataset, write_dataset
from concaveroc.roc import RocCurve, Sample

FAST = {"n_chains": 2, "burn_in": 100, "keep": 1000, "sim_burn_in": 50, "sim_keep": 1000, "truth_reps": 500}


@pytest.fixture
def dataset(tmp_path):
    rng = np.random.default_rng(0)
    s = Sample(np.exp(rng.normal(0, 1, 60)), np.exp(rng.normal(1, 1, 80)))
    path = tmp_path / "data.csv"
    write_dataset(s, path)
    return path


@pytest.fixture
def config(tmp_path):
    def make(**extra):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({**FAST, **extra}))
        return str(path)

    return make


def test_dataset_round_trip(tmp_path, dataset):
    s = read_dataset(dataset)
    write_dataset(s, tmp_path / "again.csv")
    assert np.array_equal(read_dataset(tmp_path / "again.csv").scores1, s.scores1)
    logged = read_dataset(dataset, log_transform=True)
    assert np.allclose(logged.scores0, np.log(s.scores0))


@pytest.mark.parametrize(
    "text,msg",
    [
        ("score\n1\n2\n", "missing column"),
        ("score,group\n1,0\n2,2\n", "group must be 0 or 1"),
        ("score,group\nabc,0\n", "not a number"),
        ("score,group\ninf,0\n", "finite"),
        ("score,group\n1,0\n2,0\n3,1\n", "at least 2 rows"),
    ],
)
def test_dataset_errors(tmp_path, text, msg):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(InputError, match=msg):
        read_dataset(p)


def test_log_transform_needs_positive_scores(tmp_path):
    p = tmp_path / "neg.csv"
    p.write_text("score,group\n-1,0\n2,0\n3,1\n4,1\n")
    with pytest.raises(InputError, match="positive"):
        read_dataset(p, log_transform=True)
    assert read_dataset(p).n0 == 2


def test_run_config_validation():
    with pytest.raises(InputError, match="unknown config key"):
        RunConfig.from_dict({"burnin": 10})
    with pytest.raises(InputError):
        RunConfig(keep=10)
    with pytest.raises(InputError):
        RunConfig(n_chains=1)
    with pytest.raises(InputError):
        RunConfig(models=["XYZ"])
    assert RunConfig.from_dict({"models": ["bn", "pcn"]}).models == ["BN", "pCN"]


def test_fit_writes_all_outputs(tmp_path, dataset, config, capsys):
    out = tmp_path / "out"
    code = cli.main(["fit", "--data", str(dataset), "--config", config(), "--fit", "BN,pCN", "--fit", "BG", "--seed", "3", "--out", str(out)])
    assert code in (0, 1)
    for m in ("BN", "pCN", "BG"):
        assert (out / f"{m}.json").is_file()
        roc = RocCurve.from_csv(out / f"{m}_roc.csv")
        assert roc.values.size == 1001
    table = read_auc_table(out / "auc_table.csv")
    assert [r["model"] for r in table] == ["BN", "pCN", "BG"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 3 and summary["n0"] == 60 and summary["n1"] == 80
    assert (out / "roc_overlay.svg").read_text().startswith("<?xml")
    pcn = json.loads((out / "pCN.json").read_text())
    assert pcn["concavity_violations"] == 0
    assert "AUC" in capsys.readouterr().out


def test_fit_is_reproducible_with_seed(tmp_path, dataset, config):
    outs = []
    for i in range(2):
        out = tmp_path / f"o{i}"
        cli.main(["fit", "--data", str(dataset), "--config", config(), "--fit", "spCN", "--seed", "9", "--out", str(out)])
        outs.append((out / "auc_table.csv").read_text() + (out / "spCN_roc.csv").read_text())
    assert outs[0] == outs[1]


def test_fit_without_seed_echoes_entropy(tmp_path, dataset, config, capsys):
    out = tmp_path / "o"
    cli.main(["fit", "--data", str(dataset), "--config", config(), "--fit", "BN", "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed_from_entropy"] is True
    assert f"seed {summary['seed']}" in capsys.readouterr().out


def test_perfect_separation_warns(tmp_path, config, capsys):
    p = tmp_path / "sep.csv"
    write_dataset(Sample(np.linspace(1, 2, 20), np.linspace(3, 4, 20)), p)
    code = cli.main(["fit", "--data", str(p), "--config", config(), "--fit", "BN", "--seed", "1", "--out", str(tmp_path / "o")])
    assert code in (0, 1)
    assert "separated" in capsys.readouterr().err


def test_missing_column_exits_2_without_outputs(tmp_path, config, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("score,label\n1,0\n2,1\n")
    out = tmp_path / "o"
    assert cli.main(["fit", "--data", str(p), "--config", config(), "--out", str(out)]) == cli.EXIT_INPUT
    assert not out.exists()
    assert "group" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, dataset):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"chains": 3}')
    assert cli.main(["fit", "--data", str(dataset), "--config", str(cfg)]) == cli.EXIT_INPUT


def test_fit_error_exits_3_without_outputs(tmp_path, config):
    p = tmp_path / "flat.csv"
    p.write_text("score,group\n1,0\n1,0\n1,0\n2,1\n3,1\n")
    out = tmp_path / "o"
    assert cli.main(["fit", "--data", str(p), "--config", config(), "--fit", "BN", "--out", str(out)]) == cli.EXIT_FIT
    assert not out.exists()


def test_unconverged_fit_exits_1_and_still_writes(tmp_path, dataset, config, monkeypatch):
    real = cli.fit_model

    def stuck(*a, **kw):
        fit = real(*a, **kw)
        fit.diagnostics.converged = False
        return fit

    monkeypatch.setattr(cli, "fit_model", stuck)
    out = tmp_path / "o"
    assert cli.main(["fit", "--data", str(dataset), "--config", config(), "--fit", "BN", "--seed", "2", "--out", str(out)]) == cli.EXIT_UNCONVERGED
    assert read_auc_table(out / "auc_table.csv")[0]["converged"] is False


def test_simulate_is_byte_reproducible(tmp_path, config):
    texts = []
    for i in range(2):
        out = tmp_path / f"s{i}"
        code = cli.main(
            ["simulate", "--scenario", "pbn-low", "--replicates", "1", "--seed", "7", "--config", config(n0=100, n1=100, models=["BN", "pCN"]), "--out", str(out)]
        )
        assert code == 0
        texts.append((out / "simulation.csv").read_bytes())
    assert texts[0] == texts[1]
    assert texts[0].decode().count("\n") == 3


def test_simulate_unknown_scenario_lists_valid_names(capsys):
    assert cli.main(["simulate", "--scenario", "pbn-huge", "--seed", "1"]) == cli.EXIT_INPUT
    assert "pcn-medium" in capsys.readouterr().err


def test_truth_command_is_seed_stable(tmp_path, capsys):
    aucs = []
    for seed in (1, 2):
        out = tmp_path / f"t{seed}"
        assert cli.main(["truth", "--scenario", "pcn-low", "--seed", str(seed), "--out", str(out)]) == 0
        aucs.append(json.loads((out / "pcn-low_truth.json").read_text())["true_auc"])
        assert (out / "pcn-low_truth.csv").is_file() and (out / "truth.svg").is_file()
    assert abs(aucs[0] - aucs[1]) < 0.01


def test_report_merges_simulation_csvs(tmp_path, config, capsys):
    paths = []
    for name in ("bg-low", "pbn-low"):
        out = tmp_path / name
        cli.main(["simulate", "--scenario", name, "--replicates", "1", "--seed", "1", "--config", config(n0=80, n1=80, models=["BN"]), "--out", str(out)])
        paths.append(str(out / "simulation.csv"))
    capsys.readouterr()
    target = tmp_path / "table1.csv"
    assert cli.main(["report", *paths, "--out", str(target)]) == 0
    lines = target.read_text().splitlines()
    assert [ln.split(",")[0] for ln in lines[1:]] == ["PBN", "BG"]
    assert cli.main(["report", str(tmp_path / "nope.csv")]) == cli.EXIT_INPUT
