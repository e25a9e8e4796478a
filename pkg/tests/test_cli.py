import numpy as np
import pytest

from polyqre import bench
from polyqre.cli import main
from polyqre.game import delta_f, table1_game


def test_game_file_round_trip():
    g = bench.gen_random_game(3, (1, 2, 1), 6.0, seed=4)
    back = bench.parse_game(bench.format_game(g))
    assert back.dims == g.dims
    for key in g.Q:
        np.testing.assert_array_equal(back.Q[key], g.Q[key])
    for a, b in zip(back.r, g.r):
        np.testing.assert_array_equal(a, b)


def test_parse_game_error_has_line_number():
    text = "N = 2\ndims = 1 1\nQ 0 1\n-6 1\n-4\n"
    with pytest.raises(bench.ConfigError, match="line 5"):
        bench.parse_game(text)
    with pytest.raises(bench.ConfigError, match="line 3"):
        bench.parse_game("N = 2\ndims = 1 1\nr 5\n")


def test_random_game_entries_within_range():
    g = bench.gen_random_game(2, (1, 1), 6.0, seed=0)
    assert all(np.abs(q).max() <= 6 for q in g.Q.values())
    assert delta_f(g)[0] <= 6 * 6


def test_load_builtin():
    assert bench.load_game_source("builtin:table1").Q[(0, 1)].tolist() == table1_game().Q[(0, 1)].tolist()
    with pytest.raises(Exception):
        bench.load_game_source("builtin:nope")


def test_parse_config_and_unknown_key():
    cfg = bench.parse_config("[solver]\nalgorithm = pgd\ntau = 0.05\n[graph]\ntopology = ring\n")
    assert cfg.algorithm == "pgd" and cfg.tau == 0.05 and cfg.topology == "ring"
    with pytest.raises(bench.ConfigError, match="line 3"):
        bench.parse_config("[solver]\nalgorithm = pgd\ntua = 0.05\n")


def test_config_echo_reparses():
    cfg = bench.parse_config("[solver]\nalgorithm = pgd\ntau = 0.05\nseed = 3\n")
    again = bench.parse_config(bench.config_echo(cfg))
    assert again.algorithm == "pgd" and again.tau == 0.05 and again.seed == 3


def test_run_pgd_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["run", "--algorithm", "pgd", "--tau", "0.05", "--seed", "7", "--output-dir", str(out)])
    assert code == 0
    header = (out / "trace.csv").read_text().splitlines()[0]
    assert header == "iter,total_residual,epsilon_gap,disagreement,x_0_0,x_1_0"
    summary = (out / "summary.txt").read_text()
    assert "status: converged" in summary and "tau_below_tau_max: false" in summary
    assert (out / "config_echo.ini").exists()
    assert "final_gap" in capsys.readouterr().out


def test_run_max_iters_exit_code(tmp_path):
    code = main(["run", "--algorithm", "pgd", "--tau", "0.05",
                 "--max-iters", "2", "--seed", "0", "--output-dir", str(tmp_path)])
    assert code == 2


def test_strict_refuses_large_tau(tmp_path, capsys):
    code = main(["run", "--tau", "0.05", "--strict", "--output-dir", str(tmp_path)])
    assert code == 1
    assert "tau_max" in capsys.readouterr().err


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(bench.OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["run", "--algorithm", "pgd", "--tau", "0.05", "--seed", "1"]) == 0
    assert (tmp_path / "env" / "trace.csv").exists()


def test_runs_are_byte_identical(tmp_path):
    args = ["run", "--algorithm", "pgd", "--tau", "0.05", "--seed", "5", "--max-iters", "200"]
    main(args + ["--output-dir", str(tmp_path / "a")])
    main(args + ["--output-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()


def test_config_sweep(tmp_path):
    paths = []
    for name, seed in (("one", 1), ("two", 2)):
        p = tmp_path / f"{name}.ini"
        p.write_text(f"[solver]\nalgorithm = pgd\ntau = 0.05\nseed = {seed}\n[output]\ndir = {tmp_path / 'sweep'}\n")
        paths.append(str(p))
    code = main(["run", "--config", paths[0], "--config", paths[1], "--jobs", "2"])
    assert code == 0
    assert (tmp_path / "sweep" / "one" / "trace.csv").exists()
    assert (tmp_path / "sweep" / "two" / "summary.txt").exists()


def test_verify(capsys):
    assert main(["verify", "--point", "1/3,2/3;1/3,2/3", "--epsilon", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "epsilon_gap: 0" in out and "is_epsilon_ne: true" in out
    assert main(["verify", "--point", "1;1", "--reduced"]) == 0
    assert "epsilon_gap: 2" in capsys.readouterr().out


def test_verify_bad_point(capsys):
    assert main(["verify", "--point", "0.5,0.5,0.1;1,0"]) == 1


def test_gen(tmp_path):
    path = tmp_path / "g.txt"
    assert main(["gen", "--players", "3", "--dims", "1", "2", "1", "--seed", "2", "-o", str(path)]) == 0
    g = bench.load_game_source(f"file:{path}")
    assert g.dims == (1, 2, 1)
    assert main(["run", "--game", f"file:{path}", "--algorithm", "pgd", "--epsilon", "0.5",
                 "--max-iters", "50", "--seed", "0", "--output-dir", str(tmp_path / "o")]) in (0, 2)
