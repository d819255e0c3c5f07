import csv
import json

import pytest

from encrelay.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, main
from encrelay.cli.config import ConfigError, build_policy, load_config, parse_config
from encrelay.cli.tables import Table, format_value, simulation_config, write_csv


@pytest.fixture
def write_config(tmp_path):
    def write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)

    return write


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def read_rows(path):
    return list(csv.DictReader(path.read_text(encoding="utf-8").splitlines()))


def error_line(err):
    lines = [line for line in err.splitlines() if line.startswith("{")]
    assert len(lines) == 1
    return json.loads(lines[0])


def test_analyze_conventional(capsys, write_config):
    path = write_config({"K": 2, "lambda": 1.0, "policy": "conventional"})
    code, out, _ = run_cli(capsys, "analyze", "--config", path)
    assert code == EXIT_OK
    assert out.splitlines() == [
        "K,lambda,epsilon,delay,loss,energy,normalized_energy",
        "2,1,1,0.6,0.2,0.8,0.8",
    ]


def test_analyze_fcfs_with_epsilon(capsys, write_config):
    path = write_config({"K": 2, "lambda": 1, "epsilon": 2.0, "policy": "fcfs"})
    code, out, _ = run_cli(capsys, "analyze", "--config", path)
    assert code == EXIT_OK
    assert out.splitlines()[1] == "2,1,2,0.6,0,2.4,1.2"


def test_analyze_explicit_policy(capsys, write_config):
    path = write_config(
        {"K": 2, "lambda": 1.0, "policy": {"g": [0, 0, 1], "f": [0, 0, 0]}}
    )
    code, out, _ = run_cli(capsys, "analyze", "--config", path)
    assert code == EXIT_OK
    assert out.splitlines()[1] == "2,1,1,0.6,0,1.2,1.2"


def test_output_file(tmp_path, capsys, write_config):
    out_path = tmp_path / "out.csv"
    path = write_config({"K": 2, "lambda": 1.0, "policy": "conventional"})
    code, out, _ = run_cli(capsys, "analyze", "--config", path, "--out", str(out_path))
    assert code == EXIT_OK
    assert out == ""
    assert out_path.read_bytes().endswith(b"0.8,0.8\n")


def test_unknown_key_is_a_config_error(capsys, write_config):
    path = write_config(
        {"K": 2, "lambda": 1.0, "policy": "conventional", "colour": "blue"}
    )
    code, out, err = run_cli(capsys, "analyze", "--config", path)
    assert code == EXIT_CONFIG
    assert out == ""
    message = error_line(err)
    assert message["error"] == "config"
    assert "colour" in message["message"]


@pytest.mark.parametrize(
    "data",
    [
        {"K": 0, "lambda": 1.0, "policy": "conventional"},
        {"K": True, "lambda": 1.0, "policy": "conventional"},
        {"K": 2, "lambda": -1.0, "policy": "conventional"},
        {"K": 2, "lambda": 1.0, "policy": "greedy"},
        {"K": 2, "lambda": 1.0, "policy": {"g": [0, 1.5, 0]}},
        {"K": 2, "lambda": 1.0, "policy": {"g": [0, 0]}},
        {"K": 2, "lambda": 1.0},
        {"K": 2, "lambda": 1.0, "policy": "fcfs", "command": "simulate"},
    ],
)
def test_invalid_analyze_configs(capsys, write_config, data):
    code, _, err = run_cli(capsys, "analyze", "--config", write_config(data))
    assert code == EXIT_CONFIG
    assert error_line(err)["error"] == "config"


def test_missing_and_malformed_files(tmp_path, capsys):
    code, _, err = run_cli(capsys, "analyze", "--config", str(tmp_path / "none.json"))
    assert code == EXIT_CONFIG
    assert "Cannot read" in error_line(err)["message"]

    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    code, _, err = run_cli(capsys, "analyze", "--config", str(bad))
    assert code == EXIT_CONFIG
    assert "not valid JSON" in error_line(err)["message"]


def test_tradeoff(capsys, write_config):
    path = write_config({"K": 3, "lambda": 1.0, "e_grid": [1.1, 1.2]})
    code, out, _ = run_cli(capsys, "tradeoff", "--config", path)
    assert code == EXIT_OK
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["e_max", "delay", "k_star", "feasible", "g", "f"]
    assert rows[1] == ["1.1", "", "", "0", "", ""]
    assert rows[2][:4] == ["1.2", "0.6", "2", "1"]


def test_tradeoff_grid_object(capsys, write_config):
    path = write_config(
        {"K": 3, "lambda": 1.0, "e_grid": {"start": 1.1, "stop": 1.3, "step": 0.1}}
    )
    code, out, _ = run_cli(capsys, "tradeoff", "--config", path)
    assert code == EXIT_OK
    rows = list(csv.reader(out.splitlines()))
    assert [row[0] for row in rows[1:]] == ["1.1", "1.2", "1.3"]


def test_strict_all_infeasible(capsys, write_config):
    path = write_config({"K": 3, "lambda": 1.0, "e_grid": [1.05, 1.1]})
    code, out, _ = run_cli(capsys, "tradeoff", "--config", path, "--strict")
    assert code == EXIT_INFEASIBLE
    assert len(out.splitlines()) == 3

    code, _, _ = run_cli(capsys, "tradeoff", "--config", path)
    assert code == EXIT_OK


def test_optimize(capsys, write_config):
    path = write_config({"K": 3, "lambda": 1.0, "e_max": 1.5})
    code, out, _ = run_cli(capsys, "optimize", "--config", path)
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0] == "e_max,xi,delay,k_star,feasible,energy,g,f"
    assert lines[1] == '1.5,0,0.25,0,1,1.5,"[0,1,1,1]","[0,1,0,0]"'


def test_optimize_lossy(capsys, write_config):
    path = write_config({"K": 3, "lambda": 1.0, "e_max": 1.06, "xi": 0.05})
    code, out, _ = run_cli(capsys, "optimize", "--config", path)
    assert code == EXIT_OK
    row = next(csv.DictReader(out.splitlines()))
    assert row["delay"] == "0.78"
    assert row["feasible"] == "1"
    assert float(row["energy"]) == pytest.approx(1.06)


def test_optimize_strict_infeasible(capsys, write_config):
    path = write_config({"K": 3, "lambda": 1.0, "e_max": 1.1})
    code, out, _ = run_cli(capsys, "optimize", "--config", path, "--strict")
    assert code == EXIT_INFEASIBLE
    assert out.splitlines()[1] == "1.1,0,,,0,,,"


def test_simulate_is_byte_deterministic(tmp_path, capsys, write_config):
    path = write_config(
        {
            "K": [1, 2],
            "lambda": 1.0,
            "policy": "conventional",
            "horizon": 300.0,
            "replications": 2,
            "seed": 17,
        }
    )
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(capsys, "simulate", "--config", path, "--out", str(first))[0] == 0
    assert run_cli(capsys, "simulate", "--config", path, "--out", str(second))[0] == 0
    assert first.read_bytes() == second.read_bytes()

    rows = read_rows(first)
    assert [row["replication"] for row in rows] == ["0", "1", "all", "0", "1", "all"]
    assert rows[0]["mean_delay_se"] == ""
    assert rows[2]["loss_se"] != ""
    for row in rows:
        total = (
            2 * int(row["coded_tx"])
            + int(row["uncoded_tx"])
            + int(row["drops"])
            + int(row["final_queue"])
        )
        assert total == int(row["arrivals"])


def test_simulate_seed_override(tmp_path, capsys, write_config):
    path = write_config(
        {"K": 2, "lambda": 1.0, "policy": "fcfs", "horizon": 200.0, "seed": 1}
    )
    code, out_default, _ = run_cli(capsys, "simulate", "--config", path)
    assert code == EXIT_OK
    code, out_seeded, _ = run_cli(capsys, "simulate", "--config", path, "--seed", "2")
    assert code == EXIT_OK
    assert out_default != out_seeded
    code, _, err = run_cli(capsys, "simulate", "--config", path, "--seed", "-1")
    assert code == EXIT_CONFIG
    assert "--seed" in error_line(err)["message"]


def test_simulate_renewal_arrivals(capsys, write_config):
    path = write_config(
        {
            "K": 2,
            "lambda": 1.0,
            "policy": {"optimal": {"e_max": 1.5}},
            "arrivals_a": {"kind": "deterministic", "period": 1.0},
            "arrivals_b": {"kind": "erlang", "shape": 2, "rate": 2.0},
            "horizon": 200.0,
        }
    )
    code, out, _ = run_cli(capsys, "simulate", "--config", path)
    assert code == EXIT_OK
    assert len(out.splitlines()) == 3


def test_simulate_bad_arrivals(capsys, write_config):
    path = write_config(
        {
            "K": 2,
            "lambda": 1.0,
            "policy": "fcfs",
            "arrivals_a": {"kind": "pareto", "alpha": 1.5},
            "horizon": 200.0,
        }
    )
    code, _, err = run_cli(capsys, "simulate", "--config", path)
    assert code == EXIT_CONFIG
    assert "pareto" in error_line(err)["message"]


def test_overflow(capsys, write_config):
    path = write_config({"K": [0, 200], "q_total": 10000, "trials": 2000})
    code, out, _ = run_cli(capsys, "overflow", "--config", path)
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.splitlines()))
    assert [row["K"] for row in rows] == ["0", "200"]
    assert float(rows[0]["probability"]) > 0.95
    assert float(rows[1]["theory"]) == pytest.approx(0.0455, abs=1e-3)


def test_overflow_too_few_trials(capsys, write_config):
    path = write_config({"K": 10, "q_total": 10000, "trials": 10})
    code, _, err = run_cli(capsys, "overflow", "--config", path)
    assert code == EXIT_CONFIG
    assert "trials" in error_line(err)["message"]


def test_reproduce_figure4(tmp_path, capsys, write_config):
    path = write_config({"figure": 4, "K": 5, "horizon": 50.0})
    out_dir = tmp_path / "fig4"
    code, _, _ = run_cli(
        capsys, "reproduce-fig", "--config", path, "--out", str(out_dir)
    )
    assert code == EXIT_OK
    for name in ("fig4_conventional.csv", "fig4_enc.csv"):
        lines = (out_dir / name).read_text(encoding="utf-8").splitlines()
        assert lines[0] == "time,backlog"
        assert len(lines) == 52
    enc = (out_dir / "fig4_enc.csv").read_text(encoding="utf-8").splitlines()[1:]
    assert max(abs(int(line.split(",")[1])) for line in enc) <= 5


def test_reproduce_figure5(tmp_path, capsys, write_config):
    path = write_config(
        {"figure": 5, "K": [1], "horizon": 2000.0, "replications": 2, "xi_points": 2}
    )
    code, _, _ = run_cli(
        capsys, "reproduce-fig", "--config", path, "--out", str(tmp_path)
    )
    assert code == EXIT_OK
    theory = read_rows(tmp_path / "fig5_theory.csv")
    assert len(theory) == 21
    assert theory[0]["g_K"] == "1"
    assert theory[-1]["g_K"] == "0"
    sim = read_rows(tmp_path / "fig5_sim.csv")
    assert [row["xi"] for row in sim] == ["0", format_value(1 / 3)]
    assert sim[0]["loss"] == "0"
    assert float(sim[1]["loss"]) == pytest.approx(1 / 3, abs=0.05)


def test_reproduce_figure6(tmp_path, capsys, write_config):
    path = write_config(
        {"figure": 6, "K": [1, 2], "horizon": 2000.0, "replications": 2}
    )
    code, _, _ = run_cli(
        capsys, "reproduce-fig", "--config", path, "--out", str(tmp_path)
    )
    assert code == EXIT_OK
    theory = (tmp_path / "fig6_theory.csv").read_text(encoding="utf-8").splitlines()
    assert theory == ["K,loss", f"1,{format_value(1 / 3)}", "2,0.2"]
    sim = read_rows(tmp_path / "fig6_sim.csv")
    assert [row["K"] for row in sim] == ["1", "2"]
    assert float(sim[1]["loss"]) == pytest.approx(0.2, abs=0.05)


def test_reproduce_figure7(tmp_path, capsys, write_config):
    path = write_config(
        {"figure": 7, "K": 2, "horizon": 1000.0, "replications": 2, "e_step": 0.1}
    )
    code, _, _ = run_cli(
        capsys, "reproduce-fig", "--config", path, "--out", str(tmp_path)
    )
    assert code == EXIT_OK
    theory = read_rows(tmp_path / "fig7_theory.csv")
    assert len(theory) == 11
    assert theory[0]["e_max"] == "1.1"
    assert theory[0]["feasible"] == "0"
    assert theory[-1]["delay"] == "0"
    sim = read_rows(tmp_path / "fig7_sim.csv")
    assert [row["m"] for row in sim] == ["1", "2"]


def test_reproduce_unknown_figure_key(capsys, write_config):
    path = write_config({"figure": 4, "xi_points": 3})
    code, _, err = run_cli(capsys, "reproduce-fig", "--config", path)
    assert code == EXIT_CONFIG
    assert "xi_points" in error_line(err)["message"]


def test_reproduce_out_is_an_existing_file(tmp_path, capsys, write_config):
    path = write_config({"figure": 6, "K": [1], "horizon": 100.0, "replications": 1})
    taken = tmp_path / "taken"
    taken.write_text("", encoding="utf-8")
    code, _, err = run_cli(
        capsys, "reproduce-fig", "--config", path, "--out", str(taken)
    )
    assert code == EXIT_CONFIG
    assert error_line(err)["error"] == "config"


def test_simulate_output_in_missing_directory(tmp_path, capsys, write_config):
    path = write_config({"K": 1, "lambda": 1, "policy": "fcfs", "horizon": 10.0})
    out = tmp_path / "missing" / "sim.csv"
    code, _, err = run_cli(capsys, "simulate", "--config", path, "--out", str(out))
    assert code == EXIT_CONFIG
    assert "Cannot write output" in error_line(err)["message"]
    assert not out.exists()


def test_simulation_config_builds_policy_for_each_K():
    params = {"lambda": 1.0, "policy": "fcfs", "horizon": 50.0, "replications": 2}
    for K in (1, 4):
        config = simulation_config(params, K, seed=7)
        assert config.policy.K == K
        assert [float(g) for g in config.policy.g] == [0.0] * K + [1.0]
        assert config.seed == 7
        assert config.replications == 2


def test_parse_config_defaults():
    config = parse_config({"K": 3, "lambda": 2, "e_max": 1.5}, "optimize")
    assert config.params == {"K": 3, "lambda": 2.0, "e_max": 1.5, "xi": 0.0}
    assert config.csv_precision == 9
    assert config.seed == 0
    assert config.output_path is None


@pytest.mark.parametrize(
    "data, command, match",
    [
        ({"K": 3, "lambda": 1, "e_max": 1.5}, "plot", "Unknown command"),
        ([1, 2], "optimize", "JSON object"),
        ({"K": 3, "lambda": 1, "e_max": 1.5, "csv_precision": 0}, "optimize", "csv"),
        ({"K": 3, "lambda": 1, "e_max": 1.5, "seed": -2}, "optimize", "seed"),
        ({"K": 3, "lambda": 1, "e_max": 1.5, "output_path": 3}, "optimize", "output"),
        ({"K": 3, "lambda": 1, "e_max": 1.5, "xi": 0.5}, "optimize", "xi"),
        ({"K": 3, "lambda": 1}, "optimize", "Missing"),
        ({"K": 3, "lambda": 1, "e_grid": []}, "tradeoff", "e_grid"),
        ({"K": [], "lambda": 1, "policy": "fcfs", "horizon": 1}, "simulate", "empty"),
        (
            {"K": 2, "lambda": 1, "policy": "fcfs", "horizon": 10, "warmup": 10},
            "simulate",
            "warmup",
        ),
        (
            {"K": 2, "lambda": 1, "policy": "fcfs", "horizon": 10, "buffer_mode": "x"},
            "simulate",
            "buffer_mode",
        ),
        ({"figure": 8}, "reproduce-fig", "figure"),
    ],
)
def test_parse_config_errors(data, command, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(data, command)


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"command": "overflow", "K": 5, "q_total": 100, "trials": 1000}')
    config = load_config(path, "overflow")
    assert config.params == {"K": [5], "q_total": 100, "trials": 1000}


def test_build_policy_forms():
    assert build_policy("fcfs", 3, 1.0).loss_free
    lossy = build_policy({"lossy": {"xi": 0.05}}, 3, 1.0)
    assert float(lossy.g[3]) == pytest.approx(0.65)
    optimal = build_policy({"optimal": {"e_max": 1.5}}, 3, 1.0)
    assert float(optimal.f[1]) == pytest.approx(1.0)
    with pytest.raises(ConfigError, match="loss-free"):
        build_policy({"optimal": {"e_max": 1.05}}, 3, 1.0)
    with pytest.raises(ConfigError, match="variant"):
        build_policy({"lossy": {"xi": 0.05, "variant": "other"}}, 3, 1.0)


@pytest.mark.parametrize(
    "value, expected",
    [
        (None, ""),
        ("all", "all"),
        (True, "1"),
        (False, "0"),
        (12, "12"),
        (0.0, "0"),
        (float("nan"), ""),
        (0.1 + 0.2, "0.3"),
        (1e-12, "1e-12"),
        ([0.5, 1.0], "[0.5,1]"),
    ],
)
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_format_value_precision():
    assert format_value(1 / 3, 3) == "0.333"


def test_write_csv_line_endings(tmp_path):
    table = Table(header=("a", "b"), rows=[(1, 0.5), (None, "x")])
    path = tmp_path / "t.csv"
    with path.open("w", newline="", encoding="utf-8") as f:
        write_csv(f, table)
    assert path.read_bytes() == b"a,b\n1,0.5\n,x\n"
