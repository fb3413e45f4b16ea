"""Command-line interface: flag parsing, config layering, exit codes."""

import json

import pytest

from zoomgrad.cli import _parse_seeds, main
from zoomgrad.config import RunConfig
from zoomgrad.runner import SUMMARY_COLUMNS, SWEEP_COLUMNS


def summary_row(path):
    header, row = path.read_text().splitlines()
    return dict(zip(header.split(","), row.split(",")))


def test_parse_seeds():
    assert _parse_seeds(None, [7]) == [7]
    assert _parse_seeds("0:4", [7]) == [0, 1, 2, 3]
    assert _parse_seeds("3,7,11", [0]) == [3, 7, 11]
    assert _parse_seeds("5", [0]) == [5]
    assert _parse_seeds("2:2", [0]) == []


def test_run_with_flags(tmp_path):
    rc = main(
        [
            "run",
            "--seed", "3",
            "--nodes", "5",
            "--alpha", "1/10",
            "--max-steps", "50",
            "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    row = summary_row(tmp_path / "summary.csv")
    assert row["seed"] == "3" and row["n"] == "5"
    assert int(row["steps"]) <= 50
    assert (tmp_path / "history.csv").exists()


def test_config_file_plus_flag_override(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(
        json.dumps({"seed": 9, "n": 4, "stop": {"max_steps": 6}})
    )
    out = tmp_path / "out"
    rc = main(["run", "--config", str(cfg), "--seed", "12", "--out", str(out)])
    assert rc == 0
    row = summary_row(out / "summary.csv")
    assert row["seed"] == "12"  # the flag wins over the file
    assert row["n"] == "4"  # untouched file values survive
    assert row["steps"] == "6"


def test_flags_match_api_run(tmp_path):
    out = tmp_path / "cli"
    assert main(["run", "--seed", "1", "--out", str(out)]) == 0
    from zoomgrad.runner import cmd_run

    api_out = tmp_path / "api"
    assert cmd_run(RunConfig(seed=1, out_dir=str(api_out))) == 0
    assert (out / "history.csv").read_bytes() == (api_out / "history.csv").read_bytes()
    assert (out / "summary.csv").read_bytes() == (api_out / "summary.csv").read_bytes()


def test_accounting_flag_reaches_summary(tmp_path):
    out = tmp_path / "m"
    rc = main(
        ["run", "--seed", "2", "--nodes", "5", "--max-steps", "30",
         "--accounting", "measured", "--out", str(out)]
    )
    assert rc == 0
    row = summary_row(out / "summary.csv")
    assert row["accounting_mode"] == "measured"
    # both prices are logged; the idealized one is a flat 3 bits per symbol
    assert int(row["total_bits_paper_mode"]) == 3 * int(row["total_mass_transmissions"])
    assert int(row["total_bits_measured_mode"]) > 0


def test_policy_flag(tmp_path):
    out = tmp_path / "r"
    rc = main(
        ["run", "--seed", "2", "--nodes", "5", "--policy", "refine_only",
         "--max-steps", "40", "--out", str(out)]
    )
    assert rc == 0
    assert summary_row(out / "summary.csv")["policy"] == "refine_only"


def test_bad_rational_flag_exits_1(tmp_path, capsys):
    rc = main(["run", "--alpha", "1/0", "--out", str(tmp_path)])
    assert rc == 1
    assert "invalid config" in capsys.readouterr().err


def test_invalid_config_value_exits_1(tmp_path, capsys):
    rc = main(["run", "--nodes", "1", "--out", str(tmp_path)])
    assert rc == 1
    assert "invalid config" in capsys.readouterr().err


def test_missing_config_file_exits_1(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "nope.json")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bad_choice_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--policy", "warp_drive"])
    assert exc.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_sweep_seeds_flag(tmp_path):
    rc = main(
        ["sweep", "--nodes", "5", "--max-steps", "60", "--seeds", "0:3",
         "--out", str(tmp_path)]
    )
    assert rc == 0
    lines = (tmp_path / "sweep_seeds.csv").read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert [line.split(",")[0] for line in lines[1:]] == ["0", "1", "2"]
    assert (tmp_path / "sweep_aggregate.csv").exists()


def test_sweep_defaults_to_config_seed(tmp_path):
    rc = main(
        ["sweep", "--seed", "8", "--nodes", "4", "--max-steps", "40",
         "--out", str(tmp_path)]
    )
    assert rc == 0
    lines = (tmp_path / "sweep_seeds.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].split(",")[0] == "8"


def test_compare_smoke(tmp_path):
    rc = main(
        ["compare", "--seed", "5", "--nodes", "4", "--max-steps", "25",
         "--out", str(tmp_path)]
    )
    assert rc == 0
    lines = (tmp_path / "compare.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "k"
    assert len(lines) >= 3
    summary = (tmp_path / "compare_summary.csv").read_text().splitlines()
    assert summary[0] == ",".join(SUMMARY_COLUMNS)
    assert len(summary) == 6


def test_table1_smoke(tmp_path):
    assert main(["table1", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "table_bits.csv").read_text()
    assert "11441.52" in text and "25425.60" in text
    assert "31.782" in (tmp_path / "table_avg_bits.csv").read_text()
