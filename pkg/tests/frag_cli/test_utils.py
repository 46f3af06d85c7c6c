import pytest

from frag_core.errors import ConfigError
from frag_core.fragmenter import ClockKind, StoppingKind
from frag_core.generators import FamilyKind, FamilySpec
from frag_cli.utils import (
    ArtifactMeta, ClockConfig, ClockRule, config_sha256, load_experiment_config, parse_stopping,
    read_csv, read_json, write_csv, write_json,
)

META = ArtifactMeta(config_sha256="ab" * 32, seed=42)


class TestLoadConfig:
    """Dotted-key experiment files."""

    def test_defaults_without_file(self):
        cfg, digest = load_experiment_config(None)
        assert cfg.sizes == [100]
        assert digest == config_sha256(b"")

    def test_dotted_keys(self, write_config):
        path = write_config(
            "# small run\n"
            "family.kind = gw\n"
            "family.alpha = 1.5\n"
            "sizes = 10, 20\n"
            "times = 0.5,1\n"
            "clock.kind = uniform\n"
            "probe.stopping = first_split, constant(0.25)\n"
            "seed = 7\n"
        )
        cfg, digest = load_experiment_config(path)
        assert cfg.family.kind == FamilyKind.GW
        assert cfg.family.alpha == 1.5
        assert cfg.sizes == [10, 20]
        assert cfg.times == [0.5, 1.0]
        assert cfg.clock.kind == ClockKind.UNIFORM
        assert [s.kind for s in cfg.probe.stopping_specs()] == [StoppingKind.FIRST_SPLIT,
                                                               StoppingKind.CONSTANT]
        assert cfg.seed == 7
        assert digest == config_sha256(path.read_bytes())

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_config(tmp_path / "absent.env")

    def test_unknown_key(self, write_config):
        with pytest.raises(ConfigError) as exc:
            load_experiment_config(write_config("sizes = 10\nflavour = mint\n"))
        assert exc.value.line == 2
        assert exc.value.key == "flavour"

    def test_invalid_value_reports_line(self, write_config):
        with pytest.raises(ConfigError) as exc:
            load_experiment_config(write_config("sizes = 10\n\nreplicates = 0\n"))
        assert exc.value.line == 3

    def test_offspring_law_with_stable_alpha(self, write_config):
        path = write_config("sizes = 10\nfamily.kind = gw\nfamily.alpha = 1.5\nfamily.offspring = geometric\n")
        with pytest.raises(ConfigError, match="needs alpha=2") as exc:
            load_experiment_config(path)
        assert exc.value.key == "family"
        assert exc.value.line == 2

    def test_malformed_line(self, write_config):
        with pytest.raises(ConfigError) as exc:
            load_experiment_config(write_config("sizes = 10\njust words\n"))
        assert exc.value.line == 2

    def test_table_relative_to_config(self, write_config, tmp_path):
        (tmp_path / "degrees.txt").write_text("0 3\n1 1\n3 1\n")
        cfg, _ = load_experiment_config(write_config("family.kind = degseq\nfamily.degree_table = degrees.txt\n"))
        assert cfg.family.degree_table == str(tmp_path / "degrees.txt")

    def test_missing_table(self, write_config):
        with pytest.raises(ConfigError) as exc:
            load_experiment_config(write_config("family.kind = ptree\nfamily.p_table = nope.txt\n"))
        assert exc.value.key == "family.p_table"


class TestStoppingAndClocks:
    def test_parse_stopping(self):
        assert parse_stopping("constant(0.5)").value == 0.5
        assert parse_stopping(" first_split ").kind == StoppingKind.FIRST_SPLIT
        assert parse_stopping("first_max_below(1e-1)").value == pytest.approx(0.1)

    def test_unknown_stopping(self):
        with pytest.raises(ValueError):
            parse_stopping("last_split")

    def test_fixed_rule_needs_value(self):
        with pytest.raises(ValueError):
            ClockConfig(rule=ClockRule.FIXED)

    def test_natural_exponential_rate(self):
        law = ClockConfig().law(FamilySpec(), 100)
        assert law.rate == pytest.approx(0.1)

    def test_fixed_uniform_horizon(self):
        law = ClockConfig(kind=ClockKind.UNIFORM, rule=ClockRule.FIXED, value=3.0).law(FamilySpec(), 100)
        assert law.t_max == 3.0


class TestArtifacts:
    """CSV and JSON artifacts carry the config hash and seed."""

    def test_csv_header_and_cells(self, tmp_path):
        path = write_csv(tmp_path / "out" / "a.csv", META, ["n", "x", "ok"], [[1, 0.1, True]])
        first = path.read_text().splitlines()[0]
        assert first == f"# config_sha256={'ab' * 32} seed=42"
        meta, columns, rows = read_csv(path)
        assert meta == META
        assert columns == ["n", "x", "ok"]
        assert rows == [["1", "0.1", "1"]]

    def test_csv_without_header(self, tmp_path):
        path = tmp_path / "plain.csv"
        path.write_text("n,x\n1,2\n")
        with pytest.raises(ValueError):
            read_csv(path)

    def test_json_is_sorted_and_tagged(self, tmp_path):
        path = write_json(tmp_path / "a.json", META, {"z": 1, "a": [1, 2]})
        text = path.read_text()
        assert text.index('"a"') < text.index('"meta"') < text.index('"z"')
        meta, payload = read_json(path)
        assert meta == META
        assert payload == {"z": 1, "a": [1, 2]}
