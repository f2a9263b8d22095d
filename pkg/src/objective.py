"""
Objective Module
Success probability, figure of merit and discrimination patterns of a probability table
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.exceptions import DimensionError
from src.fock import BellIndex, OccupationVector
from src.utils import snap_rational

logger = logging.getLogger(__name__)

DEFAULT_EPS_ZERO = 1e-9
NEGATIVE_TOLERANCE = -1e-14


class ProbabilityTable:
    """
    The 4 x N array p_beta^e of event probabilities.

    Rows follow BellIndex order, columns follow ``events``. Entries within
    round-off below zero are clamped to 0.
    """

    def __init__(self, values: np.ndarray, events: Sequence[OccupationVector],
                 eps_zero: float = DEFAULT_EPS_ZERO):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != 4 or values.shape[1] != len(events):
            raise DimensionError(
                f"Probability table must be 4 x {len(events)}, got {values.shape}"
            )
        if values.size and values.min() < NEGATIVE_TOLERANCE:
            logger.warning(f"Clamping probability {values.min():.3e} to zero")
        values[values < 0] = 0.0
        values.setflags(write=False)
        self.values = values
        self.events = list(events)
        self.eps_zero = eps_zero

    def with_threshold(self, eps_zero: float) -> 'ProbabilityTable':
        return ProbabilityTable(self.values, self.events, eps_zero)

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)

    def nonzero(self) -> np.ndarray:
        """Boolean (4, N): p > eps_zero"""
        return self.values > self.eps_zero

    def discriminating(self) -> np.ndarray:
        """Boolean (N,): exactly one Bell state has nonzero probability"""
        return self.nonzero().sum(axis=0) == 1

    def discriminating_events(self) -> List[Dict]:
        """One entry per discriminating event: event, Bell label and probability"""
        mask = self.nonzero()
        listing = []
        for column in np.flatnonzero(self.discriminating()):
            beta = int(np.flatnonzero(mask[:, column])[0])
            listing.append({
                'event': list(self.events[column]),
                'bell': BellIndex(beta).label,
                'probability': float(self.values[beta, column]),
            })
        return listing


def success_probability(table: ProbabilityTable) -> float:
    """
    P_succ = 1/4 * sum of p_beta^e over discriminating (event, beta) pairs

    Args:
        table: Probability table with its zero threshold

    Returns:
        Success probability in [0, 1]
    """
    mask = table.nonzero() & table.discriminating()[None, :]
    return float(0.25 * np.sum(table.values[mask]))


def figure_of_merit(table: ProbabilityTable) -> float:
    """f = sum_e (sum_beta p_beta^e - 2 max_alpha p_alpha^e); no thresholding"""
    values = table.values
    return float(np.sum(values.sum(axis=0) - 2.0 * values.max(axis=0)))


def figure_of_merit_gradient(table: ProbabilityTable, gradient: np.ndarray) -> np.ndarray:
    """
    Gradient of f from per-probability gradients

    Args:
        table: Probability table at the current point
        gradient: Array (4, N, V) of dp_beta^e / dx

    Returns:
        Array (V,); ties for the maximum use the first Bell state
    """
    argmax = np.argmax(table.values, axis=0)
    total = gradient.sum(axis=(0, 1))
    chosen = gradient[argmax, np.arange(gradient.shape[1])]
    return total - 2.0 * chosen.sum(axis=0)


@dataclass(frozen=True)
class DiscriminationPattern:
    """Per-Bell-state success probabilities in (Φ⁺, Φ⁻, Ψ⁺, Ψ⁻) order"""

    values: Tuple[float, float, float, float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    def sorted(self) -> Tuple[float, ...]:
        return tuple(sorted(self.values, reverse=True))

    def snapped(self, max_denominator: int = 64, tolerance: float = 1e-7) -> Tuple[str, ...]:
        """Sorted components as rational strings where one is close enough"""
        labels = []
        for value in self.sorted():
            fraction = snap_rational(value, max_denominator, tolerance)
            labels.append(str(fraction) if fraction is not None else f"{value:.9f}")
        return tuple(labels)

    def to_dict(self) -> Dict[str, float]:
        return {BellIndex(i).name: float(v) for i, v in enumerate(self.values)}


def pattern(table: ProbabilityTable) -> DiscriminationPattern:
    """Sum of p_beta^e over the events that discriminate beta, per beta"""
    mask = table.nonzero() & table.discriminating()[None, :]
    components = np.where(mask, table.values, 0.0).sum(axis=1)
    return DiscriminationPattern(tuple(float(c) for c in components))


def snapped_value(value: float, max_denominator: int = 64,
                  tolerance: float = 1e-7) -> Optional[str]:
    """Rational display string of a value, or None"""
    fraction = snap_rational(value, max_denominator, tolerance)
    return str(fraction) if fraction is not None else None
