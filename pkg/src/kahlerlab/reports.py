"""Structured results shared by every verification routine."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np


def digest(*objs) -> str:
    """Short sha256 digest of the numeric content of fields or arrays."""
    h = hashlib.sha256()
    for obj in objs:
        arr = getattr(obj, "comps", obj)
        arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    return h.hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


@dataclass
class ResidualReport:
    """Outcome of one identity check.

    ``linf`` and ``l2`` are already normalized by the check's scale, so the
    pass rule is simply ``linf <= tolerance``.
    """

    id: str
    linf: float
    l2: float
    tolerance: float
    seed: int | None = None
    digests: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    runtime: float = 0.0
    passed: bool = field(init=False)

    def __post_init__(self):
        self.linf = float(self.linf)
        self.l2 = float(self.l2)
        self.passed = bool(math.isfinite(self.linf) and self.linf <= self.tolerance)

    def to_dict(self, include_runtime: bool = False) -> dict:
        out = asdict(self)
        if not include_runtime:
            out.pop("runtime")
        return _jsonable(out)

    def to_json(self, include_runtime: bool = False) -> str:
        return json.dumps(self.to_dict(include_runtime), sort_keys=True)


def combine(id: str, parts: dict[str, float], tolerance: float, **kw) -> ResidualReport:
    """One report from several normalized residuals (worst one decides)."""
    vals = [float(v) for v in parts.values()]
    worst = max(vals) if vals else 0.0
    l2 = math.sqrt(sum(v * v for v in vals)) if vals else 0.0
    details = dict(kw.pop("details", {}))
    details["components"] = dict(parts)
    return ResidualReport(id, worst, l2, tolerance, details=details, **kw)


def relative(diff: float, scale: float) -> float:
    """|diff| / scale, with 0/0 read as a perfect match."""
    diff = abs(float(diff))
    if scale <= 0 or not math.isfinite(scale):
        return 0.0 if diff == 0 else math.inf
    return diff / scale


def richardson_confirmed(coarse: float, fine: float, scale: float, noise: float = 1e-9) -> bool:
    """True when halving the step divides a central-difference residual by about four,
    or when both residuals already sit at the noise floor."""
    if max(abs(coarse), abs(fine)) <= noise * scale:
        return True
    return fine != 0 and 3.5 <= abs(coarse / fine) <= 4.5
