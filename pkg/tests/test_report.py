import hashlib
import json

from gkverify.report import (
    FAIL,
    GATE_FAIL,
    INFO,
    PASS,
    REPORT_VERSION,
    CheckReport,
    Reporter,
    Residual,
)


def make_report(*residuals):
    report = CheckReport(command="check-space")
    report.add_input("a.space", b"dimension = 2\n")
    report.add(list(residuals), (-1.0, 1.0), 4, 0)
    return report


class TestResidual:
    def test_upper_bound(self):
        assert Residual("r", "Eq (1)", 1e-12, 1e-9).verdict == PASS
        assert Residual("r", "Eq (1)", 1e-3, 1e-9).verdict == FAIL

    def test_lower_bound(self):
        assert Residual("det", "Eq (2)", 0.5, 1e-12, lower_bound=True).verdict == PASS
        assert Residual("det", "Eq (2)", 0.0, 1e-12, lower_bound=True).verdict == FAIL

    def test_informational_never_fails(self):
        residual = Residual("trace", "Eq (16)", 4.0, 1e-9, informational=True)
        assert residual.verdict == INFO
        assert residual.passed
        assert not residual.counts

    def test_status_overrides(self):
        residual = Residual("gated", "Eq (26)", None, 1e-9, status=GATE_FAIL)
        assert residual.verdict == GATE_FAIL
        assert not residual.counts


class TestCheckReport:
    def test_empty_report_passes(self):
        report = CheckReport(command="check-kahler")
        assert report.passed
        data = report.as_dict()
        assert data["records"] == []
        assert data["verdict"] == PASS

    def test_failure_decides_verdict(self):
        report = make_report(Residual("ok", "Eq (8)", 0.0, 1e-9), Residual("bad", "Eq (9)", 1.0, 1e-9))
        assert not report.passed
        assert report.as_dict()["verdict"] == FAIL

    def test_gated_records_do_not_fail(self):
        report = make_report(Residual("gated", "Eq (12)", 1.0, 1e-9, status="premises-fail"))
        assert report.passed
        assert report.as_dict()["records"][0]["informational"] is True

    def test_input_digest(self):
        report = make_report()
        assert report.inputs["a.space"] == hashlib.sha256(b"dimension = 2\n").hexdigest()


class TestReporter:
    def test_json_schema(self):
        residual = Residual("det", "Eq (2)", 0.25, 1e-12, lower_bound=True, notes=["min over box"])
        text = Reporter().emit_report(make_report(residual), "json")
        data = json.loads(text)
        assert data["report_version"] == REPORT_VERSION
        assert data["command"] == "check-space"
        assert data["inputs"][0]["path"] == "a.space"
        record = data["records"][0]
        assert record["comparison"] == ">="
        assert record["equation"] == "Eq (2)"
        assert record["notes"] == ["min over box"]
        assert record["sample_box"] == [-1.0, 1.0]

    def test_human_rendering(self):
        report = make_report(Residual("bad", "Eq (9)", 1.0, 1e-9, notes=["look here"]))
        text = Reporter().render_human(report)
        assert "❌ bad" in text
        assert "· look here" in text
        assert text.rstrip().endswith("(1 checks)")

    def test_unset_value_is_dash(self):
        report = make_report(Residual("gated", "Eq (26)", None, 1e-9, status=GATE_FAIL))
        assert " - " in Reporter().render_human(report)

    def test_summary_logs_failures(self, caplog):
        report = make_report(Residual("bad", "Eq (9)", 1.0, 1e-9))
        with caplog.at_level("INFO"):
            Reporter().log_summary(report)
        assert "1 failed" in caplog.text
        assert "Check failed: bad" in caplog.text
