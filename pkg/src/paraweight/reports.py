"""Measured-constant reports, seeded generators and JSON helpers."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np

# a measured constant may grow by this factor across one resolution doubling
GROWTH_LIMIT = 1.25


def generator(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator keyed on ``seed`` and a stream path.

    Derived streams (ensemble members, out-of-sample redraws, resolutions)
    use distinct ``stream`` tuples, so no draw depends on call order
    elsewhere.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


def growth_ok(constants: Sequence[float], limit: float = GROWTH_LIMIT, atol: float = 1e-12) -> bool:
    c = [float(x) for x in constants]
    if not all(math.isfinite(x) for x in c):
        return False
    return all(b <= limit * a + atol for a, b in zip(c, c[1:]))


@dataclass
class ProbeReport:
    """Empirical constant of one inequality over an ensemble and resolutions."""

    inequality: str
    m: int | None
    s: float | None
    N: int
    dim: int
    ensemble: int
    seed: int
    constant: float
    per_resolution: list[dict[str, Any]] = field(default_factory=list)
    verdict: str = "fail"
    details: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_resolutions(
        cls,
        inequality: str,
        per_resolution: list[dict[str, Any]],
        *,
        m: int | None,
        s: float | None,
        dim: int,
        ensemble: int,
        seed: int,
        details: dict[str, Any] | None = None,
    ) -> "ProbeReport":
        consts = [r["constant"] for r in per_resolution]
        verdict = "pass" if growth_ok(consts) else "fail"
        return cls(
            inequality=inequality,
            m=m,
            s=s,
            N=int(per_resolution[0]["N"]),
            dim=dim,
            ensemble=ensemble,
            seed=seed,
            constant=float(max(consts)),
            per_resolution=per_resolution,
            verdict=verdict,
            details=details or {},
        )

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable(asdict(self))


def to_jsonable(obj: Any) -> Any:
    """Convert numpy scalars/arrays recursively; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(obj: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path
