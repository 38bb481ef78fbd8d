import csv
import statistics
from pathlib import Path

import pytest

from membudget.harness import (
    ConfigError,
    aggregate,
    cli_main,
    load_config,
    plot,
    read_rows,
)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def small_mcts_cfg(tmp_path, grid="0, 20, 250", kinds="Oa, Ra100"):
    path = tmp_path / "small.cfg"
    path.write_text(f"[experiment]\nkind = mcts-sweep\n[budget]\nplan_grid = {grid}\n"
                    f"[datasets]\nkinds = {kinds}\n")
    return path


def small_ptdqn_cfg(tmp_path):
    path = tmp_path / "pt.cfg"
    path.write_text("[experiment]\nkind = ptdqn-sweep\n"
                    "[budget]\npermanent_fractions = 0.0, 0.5\n"
                    "[jellybean]\ngreen_density = 0.1\nswap_period = 100\n"
                    "[agent]\ntotal_steps = 120\ntrace_stride = 10\nsmoothing_window = 20\n")
    return path


def test_aggregate_examples():
    rows = [{"k": "a", "v": 0.65}, {"k": "a", "v": 0.65}, {"k": "b", "v": 0.0},
            {"k": "b", "v": 1.0}, {"k": "c", "v": 0.3}]
    a, b, c = aggregate(rows, ("k",), "v")
    assert a["mean"] == pytest.approx(0.65) and a["se"] == pytest.approx(0.0)
    assert b["mean"] == 0.5 and b["se"] == pytest.approx(0.354, abs=1e-3)
    assert c["n"] == 1 and c["se"] is None


def test_shipped_configs_load():
    for path in CONFIGS.glob("*.cfg"):
        cfg = load_config(path)
        assert cfg.seeds >= 1
    cfg = load_config(CONFIGS / "continual_surrogate.cfg")
    assert cfg.world.swap_period == 5000 and cfg.agent.consolidation_period == 500
    assert load_config(CONFIGS / "continual_full_scale.cfg").agent.consolidation_period == 15000


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        load_config(small_mcts_cfg(tmp_path, grid="0, 600"))
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError):
        load_config(None, seeds=0)


def test_master_seed_env_override(monkeypatch):
    monkeypatch.setenv("MEMBUDGET_SEED", "99")
    assert load_config(None).master_seed == 99


def test_sweep_writes_one_row_per_seed_and_cell(tmp_path):
    out = tmp_path / "out"
    assert cli_main(["sweep-mcts", "--config", str(small_mcts_cfg(tmp_path)),
                     "--seeds", "20", "--out", str(out)]) == 0
    rows = read_rows(out / "mcts_raw.csv")
    assert list(rows[0]) == ["dataset", "n_pi", "seed", "return", "steps", "goal"]
    cells = {}
    for r in rows:
        cells.setdefault((r["dataset"], r["n_pi"]), []).append(r)
    assert len(cells) == 6 and all(len(v) == 20 for v in cells.values())


def test_aggregates_recomputed_independently(tmp_path):
    out = tmp_path / "out"
    cli_main(["sweep-mcts", "--config", str(small_mcts_cfg(tmp_path)), "--seeds", "7",
              "--out", str(out)])
    raw = read_rows(out / "mcts_raw.csv")
    for agg in read_rows(out / "mcts_aggregate.csv"):
        values = [float(r["return"]) for r in raw
                  if r["dataset"] == agg["dataset"] and r["n_pi"] == agg["n_pi"]]
        assert int(agg["n"]) == len(values)
        assert abs(float(agg["mean"]) - statistics.fmean(values)) < 1e-12
        se = statistics.pstdev(values) / len(values) ** 0.5
        assert abs(float(agg["se"]) - se) < 1e-12


def test_sweep_bytes_independent_of_jobs(tmp_path):
    cfg = small_mcts_cfg(tmp_path, grid="5, 100", kinds="Ra500")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli_main(["sweep-mcts", "--config", str(cfg), "--seeds", "4", "--jobs", "1",
                     "--out", str(a)]) == 0
    assert cli_main(["sweep-mcts", "--config", str(cfg), "--seeds", "4", "--jobs", "2",
                     "--out", str(b)]) == 0
    assert (a / "mcts_raw.csv").read_bytes() == (b / "mcts_raw.csv").read_bytes()


def test_master_seed_changes_results(tmp_path, monkeypatch):
    cfg = small_mcts_cfg(tmp_path, grid="480", kinds="Ra500")
    cli_main(["sweep-mcts", "--config", str(cfg), "--seeds", "5", "--out", str(tmp_path / "a")])
    monkeypatch.setenv("MEMBUDGET_SEED", "12345")
    cli_main(["sweep-mcts", "--config", str(cfg), "--seeds", "5", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "mcts_raw.csv").read_bytes() != \
        (tmp_path / "b" / "mcts_raw.csv").read_bytes()


def test_plan_units_flag_overrides_grid(tmp_path):
    out = tmp_path / "out"
    assert cli_main(["sweep-mcts", "--config", str(small_mcts_cfg(tmp_path)),
                     "--plan-units", "42", "--seeds", "2", "--out", str(out)]) == 0
    assert {r["n_pi"] for r in read_rows(out / "mcts_raw.csv")} == {"42"}


def test_run_ptdqn_traces(tmp_path, capsys):
    out = tmp_path / "pt"
    assert cli_main(["run-ptdqn", "--config", str(small_ptdqn_cfg(tmp_path)), "--seeds", "3",
                     "--out", str(out), "--render-ascii"]) == 0
    rows = read_rows(out / "ptdqn_traces.csv")
    assert list(rows[0]) == ["step", "seed", "permanent_fraction", "reward_smoothed"]
    for frac in ("0.0", "0.5"):
        seeds = {r["seed"] for r in rows if r["permanent_fraction"] == frac}
        assert seeds == {"0", "1", "2"}
    assert len(rows) == 2 * 3 * 12
    assert "@" in capsys.readouterr().out


def test_run_ptdqn_baseline(tmp_path):
    out = tmp_path / "pt"
    assert cli_main(["run-ptdqn", "--config", str(small_ptdqn_cfg(tmp_path)), "--seeds", "2",
                     "--baseline", "--out", str(out)]) == 0
    rows = read_rows(out / "ptdqn_baseline.csv")
    assert {r["permanent_fraction"] for r in rows} == {"random"}


def test_run_ptdqn_rejects_over_budget(tmp_path):
    assert cli_main(["run-ptdqn", "--config", str(small_ptdqn_cfg(tmp_path)),
                     "--buffer-capacity", "53", "--out", str(tmp_path / "x")]) == 1


def test_gen_data(tmp_path):
    cfg = small_mcts_cfg(tmp_path, kinds="O3, Ronly36")
    out = tmp_path / "data"
    assert cli_main(["gen-data", "--config", str(cfg), "--seeds", "2", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["O3_seed0.csv", "O3_seed1.csv", "Ronly36_seed0.csv", "Ronly36_seed1.csv"]
    with open(out / "Ronly36_seed0.csv") as fh:
        assert len(list(csv.reader(fh))) == 37


def test_plot_mcts_and_ptdqn(tmp_path):
    out = tmp_path / "out"
    cli_main(["sweep-mcts", "--config", str(small_mcts_cfg(tmp_path)), "--seeds", "3",
              "--out", str(out)])
    svg = tmp_path / "fig.svg"
    assert cli_main(["plot", str(out / "mcts_raw.csv"), "--kind", "mcts",
                     "--out", str(svg)]) == 0
    text = svg.read_text()
    assert text.lstrip().startswith("<?xml") and "<svg" in text
    # Two datasets -> two lines in the legend.
    assert text.count("Ra100") >= 1 and text.count("Oa") >= 1

    pt = tmp_path / "pt"
    cli_main(["run-ptdqn", "--config", str(small_ptdqn_cfg(tmp_path)), "--seeds", "2",
              "--permanent-fraction", "0.1", "--out", str(pt)])
    assert cli_main(["plot", str(pt / "ptdqn_traces.csv"), "--kind", "ptdqn",
                     "--out", str(tmp_path / "pt.svg")]) == 0


def test_plot_is_deterministic(tmp_path):
    rows = [{"dataset": "Oa", "n_pi": n, "seed": s, "return": 0.1 * n + s, "steps": 1,
             "goal": ""} for n in (0, 1, 2) for s in (0, 1)]
    plot(rows, "mcts", tmp_path / "a.svg")
    plot(rows, "mcts", tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_plot_errors(tmp_path):
    out = tmp_path / "out"
    cli_main(["sweep-mcts", "--config", str(small_mcts_cfg(tmp_path)), "--seeds", "2",
              "--out", str(out)])
    assert cli_main(["plot", str(out / "mcts_raw.csv"), "--kind", "ptdqn",
                     "--out", str(tmp_path / "x.svg")]) == 1
    empty = tmp_path / "empty.csv"
    empty.write_text("dataset,n_pi,seed,return,steps,goal\n")
    assert cli_main(["plot", str(empty), "--kind", "mcts", "--out", str(tmp_path / "y.svg")]) == 1


def test_cli_exit_codes(tmp_path, capsys):
    assert cli_main(["selftest"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert cli_main(["sweep-mcts", "--no-such-flag"]) == 1
    assert "usage" in capsys.readouterr().err
    assert cli_main(["sweep-mcts", "--plan-units", "600", "--out", str(tmp_path)]) == 1
    assert cli_main([]) == 1
    # A missing input file is an I/O failure, not a usage error.
    assert cli_main(["plot", str(tmp_path / "missing.csv"), "--kind", "mcts",
                     "--out", str(tmp_path / "z.svg")]) == 2
