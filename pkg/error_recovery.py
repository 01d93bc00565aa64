"""
Error Recovery for Lifespan Experiments
Domain exceptions plus a recovery system that retries unstable runs and keeps an audit trail
"""

import json
import logging
import traceback
from collections import Counter
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class LabError(Exception):
    """Root of every error raised by the laboratory"""


class InvalidArgument(LabError, ValueError):
    """An argument lies outside the range an operation is defined on"""


class ConfigError(LabError):
    """A config file is missing keys or holds values that cannot be parsed"""


class ConvergenceFailure(LabError):
    """A scan or iteration ran out of candidates"""


class BoundViolated(LabError):
    """A proven lower bound failed on numerical data"""


class InstabilityDetected(LabError):
    """The time stepper produced NaN/Inf before the blow-up threshold"""


class InsufficientData(LabError):
    """Too few valid points for a fit"""


class AccuracyWarning(UserWarning):
    """Quadrature error estimate above the requested tolerance"""


Action = Callable[[Exception, Dict[str, Any]], Dict[str, Any]]

SUGGESTIONS = {
    "FloatingPointError": "Use a smaller CFL number or a finer grid",
    "OverflowError": "Evaluate in log-domain",
    "ZeroDivisionError": "Check for vanishing gamma(p, n+mu)",
    "OSError": "Check output directory permissions",
}


class ErrorRecoverySystem:
    """
    Error recovery for sweep entries

    Features:
    - Actions looked up by exception class name
    - Unstable runs retried with a halved CFL number
    - Suggestions for errors that cannot be retried
    - Error log and recovery history export
    - Memory check before large sweeps
    """

    def __init__(self, max_retries: int = 2):
        self.max_retries = max_retries
        self.error_log: List[Dict[str, Any]] = []
        self.recovery_history: List[Dict[str, Any]] = []
        self.recovery_actions: Dict[str, Action] = {
            "InstabilityDetected": self._retry_with_smaller_cfl,
            "AccuracyWarning": self._advise("Quadrature did not reach tolerance",
                                            "Results are usable but carry a larger error estimate"),
            "ConvergenceFailure": self._advise("Scan exhausted",
                                               "mu is far outside the tested range; T0 needs a longer scan"),
            "InvalidArgument": self._advise("Invalid argument",
                                            "Check n, mu, p against 1 < p < p_S(n+mu) and n >= 2"),
            "ConfigError": self._advise("Config error",
                                        "Compare the config file against the documented keys"),
        }

    def handle_error(self, error: Exception, context: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Log an error and run the recovery action registered for its type

        Args:
            error: Exception raised by a laboratory operation
            context: Run details; ``retry_function`` (called with a cfl value)
                and ``cfl`` enable the instability retry

        Returns:
            Dict with ``success`` and, after a successful retry, the new ``result``
        """
        context = context or {}
        kind = type(error).__name__
        logger.error(f"{kind} during run {self._describe(context)}: {error}")

        entry = {
            "timestamp": datetime.now().isoformat(),
            "type": kind,
            "message": str(error),
            "traceback": traceback.format_exc(),
            "context": {k: v for k, v in context.items() if not callable(v)},
        }
        self.error_log.append(entry)

        outcome = self._recover(kind, error, context)
        self.recovery_history.append({
            "timestamp": datetime.now().isoformat(),
            "error": entry,
            "recovery": {k: v for k, v in outcome.items() if k != "result"},
        })
        return outcome

    @staticmethod
    def _describe(context: Dict[str, Any]) -> str:
        shown = {k: context[k] for k in ("eps", "cfl", "path") if k in context}
        return ", ".join(f"{k}={v}" for k, v in shown.items()) or "(no context)"

    def _recover(self, kind: str, error: Exception, context: Dict[str, Any]) -> Dict[str, Any]:
        action = self.recovery_actions.get(kind)
        if action is None:
            logger.warning(f"No recovery action for {kind}")
            return {
                "success": False,
                "error": "No recovery action available",
                "suggestion": SUGGESTIONS.get(kind, "Review error details"),
            }
        try:
            outcome = action(error, context)
        except Exception as e:
            logger.error(f"Recovery for {kind} raised {type(e).__name__}: {e}")
            return {"success": False, "error": "Recovery function failed", "details": str(e)}
        if outcome.get("success"):
            logger.info(f"Recovered from {kind}")
        return outcome

    # ==================== RECOVERY ACTIONS ====================

    def _retry_with_smaller_cfl(self, error: Exception, context: Dict[str, Any]) -> Dict[str, Any]:
        """Halve the CFL number and re-run until the run is stable or retries run out"""
        rerun = context.get("retry_function")
        if rerun is None:
            return {
                "success": False,
                "error": "No retry function provided",
                "suggestion": "Lower CFL or refine DR in the config",
            }

        cfl = float(context.get("cfl", 0.9))
        for attempt in range(1, self.max_retries + 1):
            cfl *= 0.5
            logger.info(f"Re-running with cfl={cfl} ({attempt}/{self.max_retries})")
            try:
                result = rerun(cfl)
            except InstabilityDetected as e:
                logger.warning(f"Still unstable at cfl={cfl}: {e}")
                continue
            return {"success": True, "action": "retry_succeeded", "attempts": attempt, "cfl": cfl, "result": result}

        return {
            "success": False,
            "action": "retry_failed",
            "attempts": self.max_retries,
            "error": "All retry attempts failed",
        }

    @staticmethod
    def _advise(error: str, suggestion: str) -> Action:
        def action(exc: Exception, context: Dict[str, Any]) -> Dict[str, Any]:
            return {"success": False, "error": error, "suggestion": suggestion, "details": str(exc)}
        return action

    # ==================== HEALTH ====================

    def check_memory_usage(self) -> Dict[str, Any]:
        """System memory through psutil, 'critical' above 90% use"""
        try:
            import psutil
        except ImportError:
            return {"name": "memory_usage", "status": "unavailable", "error": "psutil not installed"}
        try:
            vm = psutil.virtual_memory()
        except Exception as e:
            return {"name": "memory_usage", "status": "error", "error": str(e)}
        return {
            "name": "memory_usage",
            "status": "critical" if vm.percent >= 90 else "healthy",
            "percent": vm.percent,
            "available_gb": round(vm.available / 1024 ** 3, 2),
        }

    # ==================== REPORTING ====================

    def recovery_rate(self) -> float:
        """Percentage of handled errors whose recovery succeeded"""
        if not self.recovery_history:
            return 0.0
        recovered = sum(bool(h["recovery"].get("success")) for h in self.recovery_history)
        return 100.0 * recovered / len(self.recovery_history)

    def get_error_report(self, limit: int = 10) -> Dict[str, Any]:
        return {
            "total_errors": len(self.error_log),
            "by_type": dict(Counter(e["type"] for e in self.error_log)),
            "recent_errors": self.error_log[-limit:],
            "recovery_success_rate": self.recovery_rate(),
        }

    def export_logs(self, output_file: str) -> Dict[str, Any]:
        """Write the error log and recovery history as JSON"""
        path = Path(output_file)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "error_log": self.error_log,
            "recovery_history": self.recovery_history,
            "recovery_rate": self.recovery_rate(),
        }
        path.write_text(json.dumps(payload, indent=2, default=str))
        return {"success": True, "file": str(path)}
