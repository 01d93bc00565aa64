"""
Tests for the error recovery system
"""

import json

from error_recovery import (
    ConfigError,
    ConvergenceFailure,
    ErrorRecoverySystem,
    InstabilityDetected,
    InvalidArgument,
    LabError,
)


def test_exception_hierarchy():
    assert issubclass(InvalidArgument, LabError)
    assert issubclass(InvalidArgument, ValueError)
    assert issubclass(InstabilityDetected, LabError)


def test_instability_retried_with_halved_cfl():
    ers = ErrorRecoverySystem(max_retries=3)
    seen = []

    def retry(cfl):
        seen.append(cfl)
        if cfl > 0.15:
            raise InstabilityDetected(f"cfl={cfl}")
        return "trace"

    result = ers.handle_error(InstabilityDetected("nan at t=1"), {"cfl": 0.8, "retry_function": retry})
    assert result["success"]
    assert result["result"] == "trace"
    assert result["attempts"] == 3
    assert seen == [0.4, 0.2, 0.1]
    assert result["cfl"] == 0.1


def test_instability_gives_up():
    ers = ErrorRecoverySystem(max_retries=2)

    def retry(cfl):
        raise InstabilityDetected("still unstable")

    result = ers.handle_error(InstabilityDetected("nan"), {"cfl": 0.9, "retry_function": retry})
    assert not result["success"]
    assert result["action"] == "retry_failed"


def test_instability_without_retry_function():
    result = ErrorRecoverySystem().handle_error(InstabilityDetected("nan"))
    assert not result["success"]
    assert "suggestion" in result


def test_non_retryable_errors_get_suggestions():
    ers = ErrorRecoverySystem()
    for error in (ConvergenceFailure("scan"), InvalidArgument("p"), ConfigError("keys")):
        result = ers.handle_error(error)
        assert not result["success"]
        assert result["suggestion"]

    unknown = ers.handle_error(OverflowError("exp"))
    assert unknown["error"] == "No recovery action available"
    assert unknown["suggestion"] == "Evaluate in log-domain"


def test_report_and_export(tmp_path):
    ers = ErrorRecoverySystem()
    ers.handle_error(ConfigError("missing P"), {"path": "run.env"})
    ers.handle_error(InstabilityDetected("nan"), {"cfl": 0.9, "retry_function": lambda cfl: "ok"})

    report = ers.get_error_report()
    assert report["total_errors"] == 2
    assert report["recovery_success_rate"] == 50.0
    assert report["by_type"] == {"ConfigError": 1, "InstabilityDetected": 1}
    assert report["recent_errors"][0]["context"] == {"path": "run.env"}

    out = ers.export_logs(str(tmp_path / "logs" / "errors.json"))
    assert out["success"]
    data = json.loads((tmp_path / "logs" / "errors.json").read_text())
    assert len(data["error_log"]) == 2
    assert "result" not in data["recovery_history"][1]["recovery"]


def test_memory_check_reports_status():
    health = ErrorRecoverySystem().check_memory_usage()
    assert health["name"] == "memory_usage"
    assert health["status"] in ("healthy", "critical", "unavailable", "error")
