"""Records of acceptance checks and the resources they ran with."""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import psutil

from src.core.errors import HarmonicAnalysisError

logger = logging.getLogger(__name__)


class CheckStatus(Enum):
    """Outcome of one acceptance check."""
    PASSED = "passed"
    FAILED = "failed"
    ERROR = "error"


@dataclass
class CheckResult:
    """Result of a named check.

    Timings are logged but kept out of ``to_dict`` so reports stay reproducible.
    """
    name: str
    status: CheckStatus
    message: str
    details: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == CheckStatus.PASSED

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "status": self.status.value,
            "message": self.message,
            "details": self.details,
        }


class CheckLedger:
    """Runs checks, keeps their results in order and summarises them.

    A check is a callable returning ``(passed, message, details)``. Domain
    errors and argument errors raised by a check are recorded as ERROR rather
    than propagated, so one broken check does not hide the others.

    Example:
        ledger = CheckLedger()
        ledger.run("group axioms", check_group_axioms)
        if not ledger.all_passed:
            ...
    """

    def __init__(self):
        self.results: List[CheckResult] = []

    def run(self, name: str, check: Callable[[], tuple]) -> CheckResult:
        start = time.time()
        try:
            passed, message, details = check()
            status = CheckStatus.PASSED if passed else CheckStatus.FAILED
        except (HarmonicAnalysisError, ValueError) as e:
            logger.error(f"Check '{name}' raised {type(e).__name__}: {e}")
            status, message, details = CheckStatus.ERROR, f"{type(e).__name__}: {e}", {}
        result = CheckResult(name, status, message, details, time.time() - start)
        self.results.append(result)
        log = logger.info if result.passed else logger.warning
        log(f"[{status.value}] {name}: {message} ({result.elapsed:.1f}s)")
        return result

    @property
    def all_passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    def counts(self) -> Dict[str, int]:
        out = {s.value: 0 for s in CheckStatus}
        for r in self.results:
            out[r.status.value] += 1
        return out

    def summary(self) -> Dict[str, Any]:
        return {
            "all_passed": self.all_passed,
            "counts": self.counts(),
            "checks": [r.to_dict() for r in self.results],
        }

    def __repr__(self) -> str:
        return f"CheckLedger(checks={len(self.results)}, counts={self.counts()})"


def resource_snapshot() -> Dict[str, Optional[float]]:
    """Physical cores and available memory, for the run log.

    Returns:
        Dictionary with core counts and memory figures in MB
    """
    try:
        memory = psutil.virtual_memory()
        return {
            "physical_cores": psutil.cpu_count(logical=False),
            "logical_cores": psutil.cpu_count(logical=True),
            "memory_total_mb": round(memory.total / (1024 * 1024), 2),
            "memory_available_mb": round(memory.available / (1024 * 1024), 2),
        }
    except Exception as e:
        logger.error(f"Failed to read system resources: {e}")
        return {"physical_cores": None, "logical_cores": None, "memory_total_mb": None, "memory_available_mb": None}
