import json
import logging

from frag_core.services.logger import (
    CustomFormatter, get_logger, log_check_result, log_error, log_experiment_event,
)


def make_record(message: str, **extra) -> logging.LogRecord:
    record = logging.LogRecord("fraglab.test", logging.INFO, __file__, 1, message, (), None)
    if extra:
        record.extra_fields = extra
    return record


class TestCustomFormatter:
    """Text and JSON renderings."""

    def test_json_mode_merges_extra_fields(self):
        line = CustomFormatter(use_color=False, use_json=True).format(make_record("hello", seed=7))
        entry = json.loads(line)
        assert entry["message"] == "hello"
        assert entry["seed"] == 7
        assert entry["level"] == "INFO"

    def test_text_mode_appends_sorted_extras(self):
        line = CustomFormatter(use_color=False).format(make_record("hi", b=2, a=1))
        assert line.endswith('hi | {"a": 1, "b": 2}')


class TestLoggerService:
    """Module-level helpers of the logging service."""

    def test_names_hang_off_the_package_logger(self):
        assert get_logger("frag_lab.tightlab").name == "fraglab.frag_lab.tightlab"
        assert get_logger("fraglab.x").name == "fraglab.x"

    def test_failed_check_logs_an_error(self, caplog):
        with caplog.at_level(logging.INFO, logger="fraglab"):
            log_check_result("audit", False, {"violations": 3})
        record = caplog.records[-1]
        assert record.levelno == logging.ERROR
        assert record.extra_fields["details"] == {"violations": 3}

    def test_experiment_event(self, caplog):
        with caplog.at_level(logging.INFO, logger="fraglab"):
            log_experiment_event("oracle", "replicates finished", {"count": 10})
        assert caplog.records[-1].getMessage() == "Experiment oracle: replicates finished"

    def test_error_carries_its_type(self, caplog):
        with caplog.at_level(logging.INFO, logger="fraglab"):
            log_error(ValueError("boom"), context="stats")
        record = caplog.records[-1]
        assert record.extra_fields["error_type"] == "ValueError"
        assert "stats" in record.getMessage()
