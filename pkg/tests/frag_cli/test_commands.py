import json

import pytest
from click.testing import CliRunner as ClickRunner
from typer.testing import CliRunner

from cli import cli
from frag_cli.acceptance import CheckResult, CheckStatus
from frag_cli.commands.counterexample import check_counterexample
from frag_cli.main import app
from frag_cli.utils import read_csv
from shared.config.env import DEFAULT_SEED
from shared.constants import COUNTEREXAMPLE_COLUMNS, LIMIT_COLUMNS, TAIL_COLUMNS

runner = CliRunner()

SMALL = "sizes = 6\nreplicates = 3\n"


class TestCounterexample:
    """Separation of the non-compact sequence."""

    def test_check_has_no_failures(self):
        rows, failures = check_counterexample(8)
        assert len(rows) == 7 * 6 // 2
        assert failures == []

    def test_command_writes_csv(self, write_config, tmp_path):
        config = write_config("counterexample.n_max = 8\n")
        out = tmp_path / "out"
        result = runner.invoke(app, ["counterexample", "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0, result.output
        meta, columns, rows = read_csv(out / "counterexample.csv")
        assert columns == COUNTEREXAMPLE_COLUMNS
        assert len(rows) == 21
        assert meta.seed == DEFAULT_SEED

    def test_failure_exits_one(self, mocker, tmp_path):
        mock_check = mocker.patch("frag_cli.commands.counterexample.check_counterexample")
        mock_check.return_value = ([(2, 4, 0.25)], ["g_2 vs g_4: 0.25 < 0.5"])
        result = runner.invoke(app, ["counterexample", "--out", str(tmp_path)])
        assert result.exit_code == 1


class TestUsageErrors:
    def test_bad_config_value(self, write_config, tmp_path):
        config = write_config("sizes = many\n")
        result = runner.invoke(app, ["generate", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_missing_config(self, tmp_path):
        result = runner.invoke(app, ["fragment", "--config", str(tmp_path / "none.env")])
        assert result.exit_code == 2

    def test_bad_threads(self, tmp_path):
        result = runner.invoke(app, ["generate", "--threads", "0", "--out", str(tmp_path)])
        assert result.exit_code == 2

    def test_seed_out_of_range(self, tmp_path):
        result = runner.invoke(app, ["generate", "--seed", str(2**64), "--out", str(tmp_path)])
        assert result.exit_code == 2


class TestGenerateAndFragment:
    def test_generate_rows(self, write_config, tmp_path):
        config = write_config(SMALL)
        result = runner.invoke(app, ["generate", "--config", str(config), "--out", str(tmp_path / "g")])
        assert result.exit_code == 0, result.output
        _, columns, rows = read_csv(tmp_path / "g" / "generate.csv")
        assert columns[0] == "n"
        assert len(rows) == 3
        assert (tmp_path / "g" / "tree_n6.edges").is_file()

    def test_fragment_is_reproducible(self, write_config, tmp_path):
        config = write_config(SMALL)
        for name, threads in (("a", "1"), ("b", "4")):
            result = runner.invoke(app, ["fragment", "--config", str(config), "--seed", "99",
                                         "--threads", threads, "--out", str(tmp_path / name)])
            assert result.exit_code == 0, result.output
        first = (tmp_path / "a" / "fragment_n6.json").read_bytes()
        assert first == (tmp_path / "b" / "fragment_n6.json").read_bytes()
        assert json.loads(first)["meta"]["seed"] == 99

    def test_fragment_top_k_columns(self, write_config, tmp_path):
        config = write_config(SMALL)
        result = runner.invoke(app, ["fragment", "--config", str(config), "--top-k", "3",
                                     "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        _, columns, rows = read_csv(tmp_path / "fragment_n6.csv")
        assert columns == ["t", "m1", "m2", "m3"]
        assert rows


class TestStats:
    def test_exact_studies_pass(self, write_config, tmp_path):
        config = write_config("sizes = 12\nreplicates = 5\ntimes = 0.5, 1\nstats.studies = sof3, audit\n")
        result = runner.invoke(app, ["stats", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        summary = json.loads((tmp_path / "stats.json").read_text())
        assert summary["failures"] == []
        assert summary["studies"]["audit"][0]["violations"] == 0
        assert summary["studies"]["sof3"][0]["holds"] is True


class TestTailsAndLimit:
    def test_small_x_is_a_usage_error(self, write_config, tmp_path):
        config = write_config("family.kind = ptree\nsizes = 50\nreplicates = 100\ntails.x_grid = 2\n")
        result = runner.invoke(app, ["tails", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == 2

    @pytest.mark.statistical
    def test_tails_table(self, write_config, tmp_path):
        config = write_config("family.kind = ptree\nsizes = 50\nreplicates = 400\n")
        result = runner.invoke(app, ["tails", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        _, columns, rows = read_csv(tmp_path / "tails_n50.csv")
        assert columns == TAIL_COLUMNS
        assert {r[0] for r in rows} >= {"T1", "distance", "chernoff", "binomial"}
        assert {r[-1] for r in rows} <= {"pass", "underpowered"}

    def test_limit_rows(self, write_config, tmp_path):
        config = write_config("times = 0.5, 1\nreplicates = 4\nlimit.mesh = 64\n")
        result = runner.invoke(app, ["limit", "--config", str(config), "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        _, columns, rows = read_csv(tmp_path / "limit.csv")
        assert columns == LIMIT_COLUMNS
        assert len(rows) == 8
        assert not (tmp_path / "limit.json").exists()


class TestAcceptance:
    """Suite runner patched so only the command surface is exercised."""

    def test_all_passed(self, mocker, tmp_path):
        mock_suite = mocker.patch("frag_cli.commands.acceptance.run_suite")
        mock_suite.return_value = [
            CheckResult(item=1, name="audit", status=CheckStatus.PASSED, duration=0.5),
            CheckResult(item=11, name="limit", status=CheckStatus.WARNING, advisory=True,
                        detail="ks 0.06"),
        ]
        result = runner.invoke(app, ["acceptance", "--profile", "quick", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        document = json.loads((tmp_path / "acceptance.json").read_text())
        assert document["profile"] == "quick"
        assert document["checks"][1]["status"] == "warning"
        assert "duration" not in document["checks"][0]

    def test_failed_check(self, mocker, tmp_path):
        mock_suite = mocker.patch("frag_cli.commands.acceptance.run_suite")
        mock_suite.return_value = [
            CheckResult(item=3, name="sof3", status=CheckStatus.FAILED, detail="lhs > rhs"),
        ]
        result = runner.invoke(app, ["acceptance", "--out", str(tmp_path)])
        assert result.exit_code == 1
        assert (tmp_path / "acceptance.json").is_file()


class TestRootCli:
    def test_version(self):
        result = ClickRunner().invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert "0.1.0" in result.output

    def test_system_info(self):
        result = ClickRunner().invoke(cli, ["system", "info"])
        assert result.exit_code == 0
        assert "Defaults" in result.output

    @pytest.mark.integration
    def test_lab_is_mounted(self, tmp_path):
        result = ClickRunner().invoke(cli, ["lab", "counterexample", "--out", str(tmp_path)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "counterexample.csv").is_file()
