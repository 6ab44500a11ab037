"""
Tests for configuration, report rendering and the command-line front end.

Run with: pytest tests/test_cli.py -v
"""

import json

import pytest

import qbsc
from src.config import DEFAULT_CONFIG_PATH, SEED_ENV_VAR, WORKERS_ENV_VAR, Settings, load_settings
from src.exceptions import ConfigError
from src.messages import read_transcript
from src.photon_sim import SimConfig
from src.polarization import ProtocolParams
from src.protocol import validate_transcript
from src.report import (
    OutputFormat,
    format_p_a_percent,
    format_p_b_percent,
    render_security,
    render_validation,
)
from src.security_metrics import security_table
from src.utils import truncate_decimal
from src.validation import ValidationPipeline


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    # set-then-delete so that values loaded from .env are undone after each test
    for name in (SEED_ENV_VAR, WORKERS_ENV_VAR):
        monkeypatch.setenv(name, "0")
        monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)


# printed rows at rs1=0.5, mu=0.75: M, <n>, p_a(%), p_b(%), QCM flag
DEFAULT_TABLE_ROWS = [
    ("2", "1.183", "19.832", "2.928", "1"),
    ("3", "2.586", "40.153", "0.492", "1"),
    ("4", "4.552", "48.552", "0.116", "1"),
    ("5", "7.081", "50.438", "0.034", "1"),
    ("6", "10.171", "50.552", "0.012", "1"),
    ("7", "13.823", "50.433", "0.005", "1"),
    ("8", "18.036", "50.333", "0.002", "1"),
    ("9", "22.812", "50.263", "0.0008", "1"),
    ("10", "28.150", "50.213", "0.0004", "1"),
    ("11", "34.049", "50.176", "0.0002", "1"),
    ("12", "40.510", "50.148", "0.0001", "0"),
]


def write_config(tmp_path, text):
    path = tmp_path / "settings.yaml"
    path.write_text(text)
    return path


class TestConfig:
    """Test settings resolution"""

    def test_bundled_defaults(self):
        assert DEFAULT_CONFIG_PATH.exists()
        assert load_settings() == Settings()

    def test_yaml_override(self, tmp_path):
        path = write_config(tmp_path, "protocol:\n  rs1: 0.3\nsimulation:\n  seed: 9\n")
        settings = load_settings(path)
        assert settings.rs1 == 0.3
        assert settings.seed == 9
        assert settings.mu == 0.75

    def test_env_overrides_yaml(self, tmp_path, monkeypatch):
        path = write_config(tmp_path, "simulation:\n  seed: 9\n")
        monkeypatch.setenv(SEED_ENV_VAR, "0x10")
        monkeypatch.setenv(WORKERS_ENV_VAR, "3")
        settings = load_settings(path)
        assert settings.seed == 16
        assert settings.workers == 3

    def test_env_ignored_when_disabled(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "5")
        assert load_settings(use_env=False).seed == 0

    def test_dotenv_file(self, tmp_path):
        (tmp_path / ".env").write_text(f"{SEED_ENV_VAR}=31\n")
        assert load_settings().seed == 31

    @pytest.mark.parametrize("text", [
        "protocol:\n  nope: 1\n",
        "network:\n  port: 1\n",
        "protocol: 3\n",
        "- a\n- b\n",
        "simulation:\n  seed: -1\n",
        "simulation:\n  workers: 0\n",
        "protocol:\n  rs1: [1, 2]\n",
        "protocol: {rs1: \n",
    ])
    def test_invalid_config(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_settings(write_config(tmp_path, text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_settings(tmp_path / "missing.yaml")

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "seven")
        with pytest.raises(ConfigError):
            load_settings()


class TestFormatting:
    """Test percent formatting"""

    @pytest.mark.parametrize("value,decimals,expected", [
        (40.5107, 3, "40.510"),
        (22.8125, 3, "22.812"),
        (0.29, 2, "0.29"),
        (1.0, 3, "1.000"),
    ])
    def test_truncate_decimal(self, value, decimals, expected):
        assert truncate_decimal(value, decimals) == expected

    def test_p_a_percent(self):
        assert format_p_a_percent(0.198324) == "19.832"

    def test_p_b_percent(self):
        assert format_p_b_percent(0.0292849) == "2.928"
        assert format_p_b_percent(0.00002) == "0.002"
        assert format_p_b_percent(0.00000881) == "0.0008"


class TestReport:
    """Test rendered reports"""

    @pytest.fixture
    def reports(self):
        return security_table(0.5, 0.75, range(2, 13))

    def test_text_table(self, reports):
        lines = render_security(reports, OutputFormat.TEXT_TABLE).splitlines()
        assert lines[0] == "# rs1=0.5 mu=0.75 prior=uniform"
        assert lines[1].split() == ["M", "<n>", "p_a(%)", "p_b(%)", "QCM"]
        assert lines[2].split() == ["2", "1.183", "19.832", "2.928", "1"]
        assert lines[-1].split()[:2] == ["12", "40.510"]
        assert lines[-1].split()[-1] == "0"
        assert len(lines) == 13

    def test_max_secure_footer(self, reports):
        text = render_security(reports, OutputFormat.TEXT_TABLE, max_secure=11)
        assert text.splitlines()[-1] == "# largest QCM-secure M: 11"

    def test_csv(self, reports):
        lines = render_security(reports, OutputFormat.CSV).splitlines()
        assert lines[0] == "M,mean_photons,p_a,p_b,qcm_secure,worst_N"
        assert lines[1].split(",")[0] == "2"
        assert lines[1].endswith(",1,")
        assert lines[-1].endswith(",0,11")

    def test_csv_keeps_full_precision(self, reports):
        row = render_security(reports, OutputFormat.CSV).splitlines()[1].split(",")
        assert float(row[1]) == reports[0].mean_photons

    def test_json(self, reports):
        data = json.loads(render_security(reports, OutputFormat.JSON))
        assert len(data) == 11
        assert data[-1]["qcm_secure"] is False
        assert data[-1]["worst_N"] == 11
        assert set(data[0]) == {"M", "mean_photons", "p_a", "p_b", "qcm_secure", "worst_N"}

    def test_sweep_columns(self, reports):
        lines = render_security(reports[:2], OutputFormat.CSV, sweep=True).splitlines()
        assert lines[0] == "rs1,mu,M,mean_photons,p_a,p_b,qcm_secure,worst_N"
        text = render_security(reports[:2], OutputFormat.TEXT_TABLE, sweep=True)
        assert text.splitlines()[2].split()[:3] == ["0.5", "0.75", "2"]

    def test_validation_report(self):
        report = ValidationPipeline(ProtocolParams.uniform(2, 0.5), SimConfig(trials=20_000, seed=1)).run()
        assert [r.quantity for r in report.rows] == ["p_b", "p_a", "honest_accept"]
        data = json.loads(render_validation(report, OutputFormat.JSON))
        assert data["trials"] == 20_000
        assert data["all_passed"] == report.all_passed
        text = render_validation(report, OutputFormat.TEXT_TABLE)
        assert len(text.splitlines()) == 5
        csv_lines = render_validation(report, OutputFormat.CSV).splitlines()
        assert csv_lines[0] == "quantity,closed_form,monte_carlo,std_error,successes,trials,status"


class TestCLITable:
    """Test the table command"""

    def test_default_table(self, capsys):
        assert qbsc.main(["table"]) == qbsc.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 13
        assert lines[2].split() == ["2", "1.183", "19.832", "2.928", "1"]

    def test_default_table_rows(self, capsys):
        assert qbsc.main(["table"]) == qbsc.EXIT_OK
        rows = [line.split() for line in capsys.readouterr().out.splitlines()[2:]]
        assert len(rows) == len(DEFAULT_TABLE_ROWS)
        for row, (M, n, p_a, p_b, flag) in zip(rows, DEFAULT_TABLE_ROWS):
            assert row[0] == M
            assert row[1] == n
            assert row[2] == p_a
            assert row[4] == flag
            # p_b is printed cut to its last digit; reference values may differ by one unit there
            places = len(p_b.split(".")[1])
            assert len(row[3].split(".")[1]) == places
            assert abs(round(float(row[3]) * 10 ** places) - round(float(p_b) * 10 ** places)) <= 1

    def test_output_is_stable(self, capsys):
        qbsc.main(["table", "--format", "csv"])
        first = capsys.readouterr().out
        qbsc.main(["table", "--format", "csv"])
        assert capsys.readouterr().out == first

    def test_max_secure(self, capsys):
        assert qbsc.main(["table", "--rs1", "0.1", "--m-max", "5", "--max-secure"]) == qbsc.EXIT_OK
        out = capsys.readouterr().out
        assert out.splitlines()[-1] == "# largest QCM-secure M: 3"

    def test_low_overlap_flags(self, capsys):
        qbsc.main(["table", "--rs1", "0.1", "--m-max", "5", "--format", "json"])
        flags = {row["M"]: row["qcm_secure"] for row in json.loads(capsys.readouterr().out)}
        assert flags == {2: True, 3: True, 4: False, 5: False}

    def test_single_M_json(self, capsys):
        assert qbsc.main(["table", "--m", "12", "--format", "json"]) == qbsc.EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert [row["M"] for row in data] == [12]

    def test_out_file(self, tmp_path, capsys):
        out = tmp_path / "reports" / "table.csv"
        assert qbsc.main(["table", "--format", "csv", "--out", str(out)]) == qbsc.EXIT_OK
        assert capsys.readouterr().out == ""
        assert out.read_text().startswith("M,mean_photons")

    @pytest.mark.parametrize("argv", [
        ["table", "--m-min", "5", "--m-max", "3"],
        ["table", "--m", "1"],
        ["table", "--m-max", "65"],
        ["table", "--rs1", "1.5"],
        ["table", "--mu", "0"],
    ])
    def test_usage_errors(self, argv):
        assert qbsc.main(argv) == qbsc.EXIT_USAGE

    def test_config_file(self, tmp_path, capsys):
        path = write_config(tmp_path, "protocol:\n  m_min: 3\n  m_max: 4\n")
        assert qbsc.main(["--config", str(path), "table", "--format", "csv"]) == qbsc.EXIT_OK
        assert len(capsys.readouterr().out.splitlines()) == 3

    def test_bad_config_file(self, tmp_path):
        path = write_config(tmp_path, "protocol:\n  nope: 1\n")
        assert qbsc.main(["--config", str(path), "table"]) == qbsc.EXIT_USAGE

    def test_unknown_command(self):
        with pytest.raises(SystemExit) as exc:
            qbsc.main(["plot"])
        assert exc.value.code == 2


class TestCLIValidate:
    """Test the validate command"""

    def test_too_few_trials(self):
        assert qbsc.main(["validate", "--trials", "100"]) == qbsc.EXIT_USAGE

    def test_validate(self, capsys):
        code = qbsc.main(["validate", "--m", "2", "--trials", "20000", "--seed", "1", "--format", "json"])
        data = json.loads(capsys.readouterr().out)
        assert len(data["rows"]) == 3
        assert code == (qbsc.EXIT_OK if data["all_passed"] else qbsc.EXIT_FAILURE)

    def test_rerun_is_byte_identical(self, capsys):
        argv = ["validate", "--m", "3", "--trials", "30000", "--seed", "5", "--workers", "2"]
        qbsc.main(argv)
        first = capsys.readouterr().out
        qbsc.main(argv)
        assert capsys.readouterr().out == first

    def test_M_above_limit(self):
        assert qbsc.main(["validate", "--m", "65", "--trials", "10000"]) == qbsc.EXIT_USAGE

    def test_bad_choice_rejected_before_simulating(self, monkeypatch):
        def fail(*args, **kwargs):
            raise AssertionError("simulation started")

        monkeypatch.setattr("src.validation.simulate_brute_force_attack", fail)
        assert qbsc.main(["validate", "--m", "2", "--choice", "2", "--trials", "10000"]) == qbsc.EXIT_USAGE

    def test_seed_from_environment(self, monkeypatch, capsys):
        monkeypatch.setenv(SEED_ENV_VAR, "42")
        qbsc.main(["validate", "--trials", "10000", "--format", "json"])
        assert json.loads(capsys.readouterr().out)["seed"] == 42


class TestCLISession:
    """Test the session command"""

    def test_session_to_stdout(self, capsys):
        code = qbsc.main(["session", "--m", "4", "--bits", "10", "--seed", "3"])
        lines = capsys.readouterr().out.splitlines()
        messages = [json.loads(line) for line in lines]
        assert [m["kind"] for m in messages] == ["COMMIT_PULSE", "REVEAL", "VERDICT"]
        assert messages[1]["payload"]["choice_index"] == 2
        accepted = messages[2]["payload"]["accepted"]
        assert code == (qbsc.EXIT_OK if accepted else qbsc.EXIT_FAILURE)

    def test_session_to_file(self, tmp_path):
        out = tmp_path / "transcript.jsonl"
        qbsc.main(["session", "--m", "2", "--strategy", "neighbor_cheat", "--seed", "7", "--out", str(out)])
        transcript = read_transcript(out)
        validate_transcript(transcript)
        assert transcript[1].payload.choice_index == 1

    def test_session_reproducible(self, capsys):
        qbsc.main(["session", "--m", "3", "--choice", "1", "--seed", "99"])
        first = capsys.readouterr().out
        qbsc.main(["session", "--m", "3", "--choice", "1", "--seed", "99"])
        assert capsys.readouterr().out == first

    def test_underpowered_rejected(self, capsys):
        code = qbsc.main(["session", "--strategy", "underpower:0.3", "--power-check", "--seed", "1"])
        verdict = json.loads(capsys.readouterr().out.splitlines()[-1])
        assert verdict["payload"]["reason"] == "UNDERPOWERED"
        assert code == qbsc.EXIT_FAILURE

    def test_unknown_strategy(self):
        with pytest.raises(SystemExit) as exc:
            qbsc.main(["session", "--strategy", "bribe"])
        assert exc.value.code == 2

    def test_bad_choice(self):
        assert qbsc.main(["session", "--m", "2", "--choice", "5"]) == qbsc.EXIT_USAGE

    def test_bad_bits(self):
        assert qbsc.main(["session", "--m", "4", "--bits", "3"]) == qbsc.EXIT_USAGE

    @pytest.mark.parametrize("argv", [
        ["session", "--m", "65", "--seed", "1"],
        ["session", "--m", "5000", "--choice", "4000", "--seed", "1"],
        ["session", "--m", "1"],
    ])
    def test_M_out_of_range(self, argv):
        assert qbsc.main(argv) == qbsc.EXIT_USAGE


class TestCLISweep:
    """Test the sweep command"""

    def test_sweep_values(self, capsys):
        assert qbsc.main(["sweep", "--parameter", "rs1", "--values", "0.1,0.3,0.5", "--m", "4",
                          "--format", "csv"]) == qbsc.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert len(lines) == 4
        assert [line.split(",")[0] for line in lines[1:]] == ["0.1", "0.3", "0.5"]

    def test_sweep_shows_overlap_trade_off(self, capsys):
        qbsc.main(["sweep", "--parameter", "rs1", "--values", "0.1,0.3,0.5", "--m", "4", "--format", "json"])
        rows = json.loads(capsys.readouterr().out)
        p_a = [row["p_a"] for row in rows]
        assert p_a == sorted(p_a) and len(set(p_a)) == 3
        assert rows[0]["qcm_secure"] is False
        assert rows[-1]["qcm_secure"] is True

    def test_sweep_range_is_inclusive(self, capsys):
        assert qbsc.main(["sweep", "--parameter", "mu", "--range", "0.25:0.75:0.25", "--m", "2",
                          "--format", "json"]) == qbsc.EXIT_OK
        data = json.loads(capsys.readouterr().out)
        assert [row["mu"] for row in data] == [0.25, 0.5, 0.75]

    def test_sweep_M(self, capsys):
        assert qbsc.main(["sweep", "--parameter", "M", "--range", "2:4:1", "--format", "json"]) == qbsc.EXIT_OK
        assert [row["M"] for row in json.loads(capsys.readouterr().out)] == [2, 3, 4]

    @pytest.mark.parametrize("argv", [
        ["sweep", "--parameter", "rs1", "--values", "0.1"],
        ["sweep", "--parameter", "rs1", "--m", "2"],
        ["sweep", "--parameter", "rs1", "--m", "2", "--values", "0.1", "--range", "0.1:0.2:0.1"],
        ["sweep", "--parameter", "rs1", "--m", "2", "--range", "0.1:0.2:0"],
        ["sweep", "--parameter", "rs1", "--m", "2", "--values", "a,b"],
        ["sweep", "--parameter", "M", "--values", "1,2"],
        ["sweep", "--parameter", "rs1", "--m", "2", "--values", "0.5,1.5"],
        ["sweep", "--parameter", "rs1", "--m", "65", "--values", "0.5"],
        ["sweep", "--parameter", "mu", "--m", "500", "--values", "0.5"],
        ["sweep", "--parameter", "M", "--values", "2,65"],
    ])
    def test_usage_errors(self, argv):
        assert qbsc.main(argv) == qbsc.EXIT_USAGE

    def test_parse_sweep_values(self):
        assert qbsc.parse_sweep_values(None, "0.1:0.3:0.1", integer=False) == [0.1, 0.2, 0.3]
        assert qbsc.parse_sweep_values("2,5", None, integer=True) == [2, 5]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
