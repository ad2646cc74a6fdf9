"""Performance maps, confusion statistics and Jensen-Shannon divergence.

All divergences use base-2 logarithms so results stay in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np


class MetricsError(ValueError):
    pass


class MapKind(Enum):
    RELIABILITY = "reliability"
    SECURITY = "security"


class MapSource(Enum):
    MODEL = "model"
    SIMULATION = "simulation"


LOW_CONFIDENCE_COUNT = 30  # conditioning sets smaller than this are flagged


def grid_points(grid_step: float) -> np.ndarray:
    """Grid values 0, step, ..., 1; the step must divide 1 evenly."""
    n = round(1.0 / grid_step)
    if abs(n * grid_step - 1.0) > 1e-9 or n < 1:
        raise MetricsError(f"grid step {grid_step} does not divide 1 evenly")
    return np.round(np.arange(n + 1) * grid_step, 12)


@dataclass
class PerformanceMap:
    """(p_h, p_c)-indexed grid of estimates; axis 0 is p_h, axis 1 is p_c.

    Undefined cells (empty conditioning set) are NaN with count 0.
    """

    grid_step: float
    values: np.ndarray
    counts: np.ndarray
    kind: MapKind
    source: MapSource

    def __post_init__(self) -> None:
        n = grid_points(self.grid_step).size
        self.values = np.asarray(self.values, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.values.shape != (n, n) or self.counts.shape != (n, n):
            raise MetricsError(
                f"map arrays must be {n}x{n} for grid step {self.grid_step}"
            )
        defined = ~np.isnan(self.values)
        vals = self.values[defined]
        if vals.size and (vals.min() < 0 or vals.max() > 1):
            raise MetricsError("defined map values must lie in [0, 1]")
        if np.any((self.counts == 0) != ~defined):
            raise MetricsError("values must be NaN exactly where count is 0")

    @property
    def low_confidence(self) -> np.ndarray:
        return self.counts < LOW_CONFIDENCE_COUNT


def conditional_rate(successes: int, trials: int) -> Optional[float]:
    """successes/trials, or None for an empty conditioning set."""
    if successes > trials:
        raise MetricsError("successes cannot exceed trials")
    if successes < 0 or trials < 0:
        raise MetricsError("counts must be non-negative")
    if trials == 0:
        return None
    return successes / trials


def _kl_bits(p: np.ndarray, m: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / m[mask])))


def jsd(p, q) -> float:
    """Jensen-Shannon divergence between two pmfs over the same support."""
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise MetricsError("pmfs must share the same support")
    if np.any(p < 0) or np.any(q < 0):
        raise MetricsError("pmf entries must be non-negative")
    if abs(p.sum() - 1.0) > 1e-9 or abs(q.sum() - 1.0) > 1e-9:
        raise MetricsError("pmfs must each sum to 1")
    m = 0.5 * (p + q)
    value = 0.5 * _kl_bits(p, m) + 0.5 * _kl_bits(q, m)
    return min(max(value, 0.0), 1.0)


def _binary_entropy(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, 1.0)
    out = np.zeros_like(p)
    with np.errstate(divide="ignore", invalid="ignore"):
        for x in (p, 1.0 - p):
            term = np.where(x > 0, -x * np.log2(np.where(x > 0, x, 1.0)), 0.0)
            out = out + term
    return out


def bernoulli_jsd(p, q) -> np.ndarray:
    """Elementwise JSD between Bernoulli(p) and Bernoulli(q); NaN-propagating."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    value = _binary_entropy(0.5 * (p + q)) - 0.5 * (
        _binary_entropy(p) + _binary_entropy(q)
    )
    value = np.clip(value, 0.0, 1.0)
    return np.where(np.isnan(p) | np.isnan(q), np.nan, value)


def _check_comparable(a: PerformanceMap, b: PerformanceMap) -> None:
    if a.kind is not b.kind:
        raise MetricsError("maps must be of the same kind")
    if a.grid_step != b.grid_step or a.values.shape != b.values.shape:
        raise MetricsError("maps must share the same grid")


def pointwise_jsd(a: PerformanceMap, b: PerformanceMap) -> np.ndarray:
    """Per-cell JSD between the Bernoulli distributions the two maps imply."""
    _check_comparable(a, b)
    return bernoulli_jsd(a.values, b.values)


def global_jsd(a: PerformanceMap, b: PerformanceMap) -> float:
    """JSD between the two maps normalized to pmfs over the grid.

    Cells undefined in either map are dropped from both supports before
    normalization, keeping the comparison symmetric.
    """
    _check_comparable(a, b)
    defined = ~np.isnan(a.values) & ~np.isnan(b.values)
    if not defined.any():
        raise MetricsError("no cell is defined in both maps")
    va = a.values[defined]
    vb = b.values[defined]
    if va.sum() == 0 or vb.sum() == 0:
        raise MetricsError("cannot normalize an all-zero map to a pmf")
    return jsd(va / va.sum(), vb / vb.sum())


@dataclass(frozen=True)
class ConfusionCounts:
    honest_accepted: int = 0
    honest_rejected: int = 0
    dishonest_accepted: int = 0
    dishonest_rejected: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.honest_accepted + other.honest_accepted,
            self.honest_rejected + other.honest_rejected,
            self.dishonest_accepted + other.dishonest_accepted,
            self.dishonest_rejected + other.dishonest_rejected,
        )

    @property
    def honest_total(self) -> int:
        return self.honest_accepted + self.honest_rejected

    @property
    def dishonest_total(self) -> int:
        return self.dishonest_accepted + self.dishonest_rejected

    def reliability(self) -> Optional[float]:
        return conditional_rate(self.honest_accepted, self.honest_total)

    def security(self) -> Optional[float]:
        return conditional_rate(self.dishonest_rejected, self.dishonest_total)

    def to_json(self) -> dict:
        return {
            "honest_accepted": self.honest_accepted,
            "honest_rejected": self.honest_rejected,
            "dishonest_accepted": self.dishonest_accepted,
            "dishonest_rejected": self.dishonest_rejected,
        }


@dataclass
class JsdReport:
    """Model-vs-simulation divergence for one map kind."""

    kind: MapKind
    theta_label: str
    global_value: float
    pointwise: np.ndarray

    def to_json(self, pointwise_csv_path: str) -> dict:
        return {
            "kind": self.kind.value,
            "theta_label": self.theta_label,
            "global": self.global_value,
            "pointwise_csv_path": pointwise_csv_path,
        }
