"""Verification results shared by every law checker."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float | None = None
    witness: Any = None
    details: dict[str, Any] = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    def __bool__(self) -> bool:
        return self.passed

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        d["residual"] = _jsonable(self.residual)
        d["witness"] = _jsonable(self.witness)
        d["details"] = _jsonable(self.details)
        return d


def _jsonable(x):
    # numpy scalars and arrays -> builtins; tuples -> lists
    if hasattr(x, "tolist"):
        return x.tolist()
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def worst(name: str, residuals, tolerance: float, witnesses=None, **details) -> CheckResult:
    """Collapse per-trial residuals into one result carrying the worst trial."""
    residuals = list(residuals)
    if not residuals:
        return CheckResult(name, True, 0.0, tolerance, None, dict(details))
    i = max(range(len(residuals)), key=lambda k: residuals[k])
    witness = witnesses[i] if witnesses is not None else {"trial": i}
    r = float(residuals[i])
    details.setdefault("trials", len(residuals))
    return CheckResult(name, r <= tolerance, r, tolerance, witness, dict(details))
