"""Monte Carlo estimates with standard errors."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    se: float
    n: int
    meta: dict[str, Any] = field(default_factory=dict)

    @staticmethod
    def from_mean_se(estimate: float, se: float, n: int, **meta) -> "MonteCarloEstimate":
        return MonteCarloEstimate(float(estimate), float(se), int(n), dict(meta))

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.estimate - k * self.se, self.estimate + k * self.se

    def within(self, target: float, k: float = 3.0, allowance: float = 0.0) -> bool:
        return abs(self.estimate - target) <= max(k * self.se, allowance)

    def to_json(self) -> dict[str, Any]:
        return {"estimate": self.estimate, "se": self.se, "n": self.n, **self.meta}


def mean_estimate(x: np.ndarray, **meta) -> MonteCarloEstimate:
    x = np.asarray(x, dtype=float)
    n = len(x)
    se = float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return MonteCarloEstimate.from_mean_se(float(np.mean(x)) if n else float("nan"), se, n, **meta)


def proportion_estimate(k: int, n: int, **meta) -> MonteCarloEstimate:
    p = k / n
    return MonteCarloEstimate.from_mean_se(p, np.sqrt(p * (1 - p) / n), n, **meta)


def variance_estimate(x: np.ndarray, **meta) -> MonteCarloEstimate:
    """Sample variance with its asymptotic SE sqrt((m4 - s^4) / n)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = x - x.mean()
    s2 = float(c @ c / (n - 1))
    m4 = float(np.mean(c ** 4))
    return MonteCarloEstimate.from_mean_se(s2, np.sqrt(max(m4 - s2 * s2, 0.0) / n), n, **meta)


def dkw_epsilon(n: int, alpha: float = 0.05) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band for an empirical cdf."""
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * n)))
