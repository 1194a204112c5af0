"""CLI behavior: output formatting, exit codes, config plumbing, validate."""

import json

import pytest

from tipleak.cli import (
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    UsageError,
    main,
    parse_config_line,
    resolve_overrides,
)


def run_cli(*argv):
    return main(list(argv))


# ---------------------------------------------------------------------------
# analytic subcommand
# ---------------------------------------------------------------------------

def test_analytic_deanon_prints_six_decimals(capsys):
    assert run_cli("analytic", "deanon", "--n", "100", "--c", "10", "--m", "3") == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.100000"


def test_analytic_mixer_expected(capsys):
    assert run_cli(
        "analytic", "mixer-expected", "--p", "0.1", "--mode", "normalized"
    ) == EXIT_OK
    assert capsys.readouterr().out.strip() == "1.010101"
    assert run_cli("analytic", "mixer-expected", "--p", "0.1", "--mode", "raw") == EXIT_OK
    assert capsys.readouterr().out.strip() == "1.020304"


def test_analytic_required_nodes(capsys):
    assert run_cli("analytic", "required-nodes", "--c", "10", "--target", "0.01") == EXIT_OK
    assert capsys.readouterr().out.strip() == "1001"
    assert run_cli("analytic", "required-nodes", "--c", "16", "--target", "1/20") == EXIT_OK
    assert capsys.readouterr().out.strip() == "321"


def test_analytic_entropy_and_hypergeom(capsys):
    assert run_cli("analytic", "entropy", "--probs", "0.25,0.25,0.25,0.25") == EXIT_OK
    assert capsys.readouterr().out.strip() == "1.000000"
    assert run_cli(
        "analytic", "hypergeom", "--n", "10", "--c", "4", "--m", "3", "--k", "1"
    ) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.500000"


def test_analytic_takeover(capsys):
    assert run_cli("analytic", "takeover", "--nodes", "8") == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.125000"
    assert run_cli(
        "analytic", "takeover", "--nodes", "6", "--mode", "add"
    ) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.142857"


def test_analytic_invalid_params_usage_exit(capsys):
    assert run_cli("analytic", "deanon", "--n", "10", "--c", "20") == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_unknown_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as info:
        run_cli("analytic", "deanon", "--n", "100", "--c", "10", "--bogus")
    assert info.value.code == EXIT_USAGE


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def test_parse_config_line_forms():
    assert parse_config_line("mixer.max_chain = 7", "custom") == (
        "mixer", "max_chain", " 7"
    )
    assert parse_config_line("mode=proxy", "custom") == ("custom", "mode", "proxy")
    assert parse_config_line("  # comment", "custom") is None
    assert parse_config_line("", "custom") is None
    with pytest.raises(UsageError):
        parse_config_line("no equals sign", "custom")
    with pytest.raises(UsageError):
        parse_config_line("nosuchsection.key=1", "custom")


def test_resolve_overrides_types_and_unknown_keys(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "custom.rounds=25\n"
        "custom.adversary_ratio=0.2\n"
        "heatmap.placement=clustered\n"
    )
    merged = resolve_overrides("custom", str(cfg), ["matching=collision_aware"])
    assert merged["custom"]["rounds"] == 25
    assert merged["custom"]["adversary_ratio"] == 0.2
    assert merged["custom"]["matching"] == "collision_aware"
    assert merged["heatmap"]["placement"] == "clustered"
    with pytest.raises(UsageError):
        resolve_overrides("custom", None, ["not_a_key=1"])
    with pytest.raises(UsageError):
        resolve_overrides("custom", None, ["rounds=soon"])
    with pytest.raises(UsageError):
        resolve_overrides("custom", str(tmp_path / "missing.cfg"), [])


# ---------------------------------------------------------------------------
# run subcommand
# ---------------------------------------------------------------------------

def test_run_unknown_experiment(capsys):
    assert run_cli("run", "warp") == EXIT_USAGE
    assert "unknown experiment" in capsys.readouterr().err


def test_run_mixer_writes_csv(tmp_path, capsys):
    code = run_cli(
        "run", "mixer", "--seed", "5", "--out", str(tmp_path),
        "--set", "participants=2000", "--set", "p_values=0.1",
    )
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "wrote" in out and "mixer_5.csv" in out
    text = (tmp_path / "mixer_5.csv").read_text()
    assert text.startswith("# seed=5\n")
    assert "label,metric,value,dispersion" in text


def test_run_same_seed_byte_identical(tmp_path):
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        assert run_cli(
            "run", "decentralized", "--seed", "7", "--out", str(tmp_path / sub),
            "--set", "light_nodes=10", "--set", "rounds=10", "--workers", "2",
        ) == EXIT_OK
    first = (tmp_path / "a" / "decentralized_7.csv").read_bytes()
    second = (tmp_path / "b" / "decentralized_7.csv").read_bytes()
    assert first == second


def test_run_heatmap_uniform_grid_band(tmp_path):
    assert run_cli(
        "run", "heatmap", "--seed", "3", "--out", str(tmp_path),
        "--set", "samples_per_cell=400", "--format", "structured",
    ) == EXIT_OK
    doc = json.loads((tmp_path / "heatmap_3.json").read_text())
    probs = [
        row["value"] for row in doc["rows"]
        if row["metric"] == "adversary_selection_probability"
    ]
    assert len(probs) == 9
    assert all(0.05 <= p <= 0.15 for p in probs)


def test_run_custom_proxy_mode(tmp_path):
    assert run_cli(
        "run", "custom", "--seed", "11", "--out", str(tmp_path),
        "--set", "mode=proxy", "--set", "proxy_count=1",
        "--set", "full_node_count=10", "--set", "light_node_count=4",
        "--set", "rounds=10",
    ) == EXIT_OK
    doc = (tmp_path / "custom_11.csv").read_text()
    assert "mean_attacked_degree,1," in doc  # proxied requesters keep degree 1


def test_run_env_var_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("TIPLEAK_OUT", str(tmp_path))
    assert run_cli(
        "run", "mixer", "--seed", "6",
        "--set", "participants=1000", "--set", "p_values=0.2",
    ) == EXIT_OK
    assert (tmp_path / "mixer_6.csv").exists()


def test_run_invalid_override_value(capsys):
    assert run_cli(
        "run", "custom", "--set", "full_node_count=0", "--out", "/tmp"
    ) == EXIT_USAGE
    assert "error" in capsys.readouterr().err


def test_run_unwritable_out_dir(tmp_path, capsys):
    blocked = tmp_path / "blocked"
    blocked.write_text("a file, not a directory")
    assert run_cli(
        "run", "mixer", "--seed", "5", "--out", str(blocked / "sub"),
        "--set", "participants=500", "--set", "p_values=0.1",
    ) == EXIT_USAGE


# ---------------------------------------------------------------------------
# validate subcommand
# ---------------------------------------------------------------------------

def test_validate_passes_on_fresh_build(capsys):
    assert run_cli("validate") == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out
    assert out.count("PASS") == 10


def test_validate_only_filter(capsys):
    assert run_cli("validate", "--only", "analytic") == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 4
    assert run_cli("validate", "--only", "nosuchcheck") == EXIT_USAGE


def test_validate_tampered_data_fails(tmp_path, capsys):
    doc = {
        "snapshot": "2020",
        "regions": {
            "africa": 1, "asia": 6, "europe": 30,
            "north_america": 9, "south_america": 1,
        },
    }
    tampered = tmp_path / "regions.json"
    tampered.write_text(json.dumps(doc))
    code = run_cli(
        "validate", "--only", "realworld",
        "--set", f"realworld.data={tampered}",
    )
    assert code == EXIT_VALIDATION
    out = capsys.readouterr().out
    assert "FAIL realworld-data" in out
