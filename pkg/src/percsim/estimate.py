"""Monte Carlo estimate container."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class EstimateResult:
    """Point estimate with standard error and seed provenance.

    Attributes
    ----------
    estimate : float
        Probability, mean or threshold.
    stderr : float
        Standard error in the units of `estimate`.
    replications : int
        Number of Monte Carlo replications behind the estimate.
    seed : int
        Root seed of the random streams used.
    metadata : dict
        Free-form parameter echo.
    """

    estimate: float
    stderr: float
    replications: int
    seed: int
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.stderr >= 0 or math.isnan(self.stderr):
            raise ValueError("stderr must be >= 0")

    @classmethod
    def from_indicators(cls, hits, seed: int, **metadata) -> "EstimateResult":
        """Binomial proportion with stderr sqrt(p(1-p)/n)."""
        n = len(hits)
        p = float(sum(bool(h) for h in hits)) / n
        return cls(p, math.sqrt(p * (1.0 - p) / n), n, int(seed), dict(metadata))

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.estimate - value) <= k * self.stderr
